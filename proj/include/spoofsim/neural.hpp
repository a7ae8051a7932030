#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include "json.hpp"

#include "spoofsim/rng.hpp"

namespace spoofsim::nn {

using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

enum class HiddenActivation { ReLU, Tanh };
enum class OutputActivation { Softmax, Sigmoid, ScaledTanh, Linear };
enum class LossKind { CrossEntropy, BinaryCrossEntropy };
enum class OptimizerKind { SGD, Adam };

/// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before logs.
inline constexpr double kProbClamp = 1e-7;

/// Dense feedforward network. Layer l maps width dims[l] to dims[l+1] with
/// weights[l] of shape dims[l] x dims[l+1]; batches are row-per-sample.
struct MlpModel {
    std::vector<int> layer_dims;
    std::vector<Matrix> weights;
    std::vector<RowVector> biases;
    HiddenActivation hidden_activation = HiddenActivation::ReLU;
    OutputActivation output_activation = OutputActivation::Linear;
    /// S for ScaledTanh (outputs in (-S, S)); ignored otherwise.
    double output_scale = 1.0;

    int input_width() const { return layer_dims.front(); }
    int output_width() const { return layer_dims.back(); }
    std::size_t layer_count() const { return weights.size(); }
    std::size_t parameter_count() const;

    /// Shape chain and finiteness; throws ConfigError / NumericError.
    void validate() const;
};

/// Parameter gradients, shape-congruent with the model, plus the gradient
/// with respect to the input batch.
struct Gradients {
    std::vector<Matrix> weights;
    std::vector<RowVector> biases;
    Matrix input;

    static Gradients zeros_like(const MlpModel& model);
};

/// Cached activations of one forward pass. act[0] is the input batch,
/// act[l+1] = f(pre[l]).
struct ForwardPass {
    std::vector<Matrix> pre;
    std::vector<Matrix> act;

    const Matrix& output() const { return act.back(); }
};

/// He-normal weights for ReLU layers, Xavier-normal for tanh and for the
/// output layer; zero biases.
MlpModel init_model(std::span<const int> layer_dims, HiddenActivation hidden, OutputActivation output,
                    RandomStream& rng, double output_scale = 1.0);

ForwardPass forward(const MlpModel& model, const Matrix& batch);

/// Mean loss over the batch. CrossEntropy expects one-hot (or soft) label
/// rows; BinaryCrossEntropy expects a single column of targets in [0, 1].
double loss(const Matrix& outputs, const Matrix& labels, LossKind kind);

/// d(loss)/d(outputs) matching loss().
Matrix loss_gradient(const Matrix& outputs, const Matrix& labels, LossKind kind);

/// Exact gradients of loss(forward(batch), labels, kind).
Gradients backward(const MlpModel& model, const ForwardPass& pass, const Matrix& labels, LossKind kind);

/// Backpropagates an arbitrary upstream gradient d(objective)/d(outputs).
Gradients backward_from_output(const MlpModel& model, const ForwardPass& pass, const Matrix& output_grad);

struct TrainConfig {
    int batch_size = 150;
    int steps = 1000;
    double learning_rate = 1e-3;
    OptimizerKind optimizer = OptimizerKind::Adam;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

/// Adam moment buffers; unused for SGD. Value-semantic, one per model.
struct OptimizerState {
    std::vector<Matrix> m_weights, v_weights;
    std::vector<RowVector> m_biases, v_biases;
    long step = 0;

    static OptimizerState for_model(const MlpModel& model);
};

/// One update. learning_rate is passed separately so schedules can scale it.
void opt_step(MlpModel& model, const Gradients& grads, OptimizerState& state, const TrainConfig& config,
              double learning_rate);
inline void opt_step(MlpModel& model, const Gradients& grads, OptimizerState& state, const TrainConfig& config) {
    opt_step(model, grads, state, config, config.learning_rate);
}

/// Row-wise argmax.
std::vector<int> argmax_rows(const Matrix& m);

/// One-hot encoding of class indices.
Matrix one_hot(std::span<const int> classes, int num_classes);

// Central-difference gradient verification.

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t parameters_checked = 0;
};

/// Relative error |a - n| / max(|a|, |n|, floor).
double relative_error(double analytic, double numeric, double floor = 1e-6);

/// Compares backward() against central differences with step h for every
/// parameter of the model.
GradCheckResult gradient_check(const MlpModel& model, const Matrix& batch, const Matrix& labels, LossKind kind,
                               double h = 1e-5);

// Persistence: versioned JSON with row-major parameter arrays.

inline constexpr int kModelFormatVersion = 1;

nlohmann::json model_to_json(const MlpModel& model);
MlpModel model_from_json(const nlohmann::json& doc);

const char* to_string(HiddenActivation a);
const char* to_string(OutputActivation a);

}  // namespace spoofsim::nn
