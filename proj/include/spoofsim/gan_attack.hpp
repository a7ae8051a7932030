#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "spoofsim/defender.hpp"
#include "spoofsim/neural.hpp"
#include "spoofsim/scenario.hpp"
#include "spoofsim/signal_model.hpp"

namespace spoofsim {

/// Generator at A_T, discriminator at A_R, and the bookkeeping of one
/// adversarial training run.
struct GanState {
    /// [z_dim, w, ..., w, 800] with P-scaled tanh output (transmit waveform).
    nn::MlpModel generator;
    /// [800, w, ..., w, 1] with sigmoid output = probability the frame is real.
    nn::MlpModel discriminator;
    nn::OptimizerState generator_opt;
    nn::OptimizerState discriminator_opt;
    /// Standardization of discriminator inputs, fitted on the real A_R frames.
    Normalization input_normalization;
    ConvergenceRule rule;
    std::uint64_t seed = 0;
    int epoch = 0;
    std::vector<double> g_loss_history;
    std::vector<double> d_loss_history;
    bool converged = false;

    int z_dim() const { return generator.input_width(); }
};

/// Fresh state with initialized networks and the given input normalization.
GanState make_gan_state(const GanConfig& config, double transmit_power, Normalization input_normalization,
                        std::uint64_t seed);

/// Batch of z vectors, i.i.d. standard normal, one row per frame.
nn::Matrix draw_noise(int rows, int z_dim, RandomStream& rng);

/// Generator output for a noise batch: interleaved I/Q transmit waveforms,
/// every component in [-P, P]. Any even output width is accepted.
nn::Matrix generate_batch(const nn::MlpModel& generator, const nn::Matrix& z);

/// Single waveform of kSamplesPerFrame complex samples.
std::vector<ComplexSample> generate_waveform(const nn::MlpModel& generator, const Eigen::VectorXd& z);

/// Multiplies every sample by gain * exp(j * phase). The result carries no
/// bit payload and is labeled Other.
IqFrame transmit_through_channel(std::span<const ComplexSample> waveform, const ChannelRealization& channel);

/// Row-wise channel on interleaved feature rows; row i uses channels[i].
nn::Matrix apply_channel(const nn::Matrix& waveforms, std::span<const ChannelRealization> channels);

/// Transpose of apply_channel: maps d(objective)/d(received) back to
/// d(objective)/d(transmitted).
nn::Matrix apply_channel_transpose(const nn::Matrix& upstream, std::span<const ChannelRealization> channels);

/// One optimizer step on L_D = BCE(D(real), 1) + BCE(D(fake), 0). Inputs are
/// already normalized. Returns L_D before the step.
double discriminator_step(GanState& state, const nn::Matrix& real, const nn::Matrix& fake,
                          const nn::TrainConfig& config, double learning_rate);

/// Non-saturating generator loss BCE(D(norm(channel(G(z)))), 1) and its
/// gradient with respect to every generator parameter. D is untouched.
struct GeneratorObjective {
    double loss = 0.0;
    nn::Gradients gradients;
};
GeneratorObjective generator_objective(const GanState& state, const nn::Matrix& z,
                                       std::span<const ChannelRealization> channels);

/// One optimizer step on the generator through the frozen discriminator.
/// Returns the loss before the step.
double generator_step(GanState& state, const nn::Matrix& z, std::span<const ChannelRealization> channels,
                      const nn::TrainConfig& config, double learning_rate);

/// False while the history is shorter than the window; otherwise whether
/// every loss in the last `window` entries lies within threshold * |L_now|
/// of the latest loss L_now (absolute tolerance when L_now == 0).
bool check_convergence(std::span<const double> history, const ConvergenceRule& rule);

/// Central-difference check of generator_objective's gradients.
nn::GradCheckResult gan_gradient_check(const GanState& state, const nn::Matrix& z,
                                       std::span<const ChannelRealization> channels, double h = 1e-5);

using EpochCallback = std::function<void(const GanState&)>;

/// Channel-in-the-loop adversarial training at A_T's configured position.
/// Each epoch runs a shuffled pass of discriminator steps over the real A_R
/// frames (each paired with fresh generated frames through fresh A_T->A_R
/// channel draws), then a pass of generator steps, then records the losses
/// of both networks on a fixed probe set. Stops when both histories satisfy
/// the convergence rule or at gan.max_epochs.
GanState train_gan(const ScenarioConfig& scenario, std::uint64_t seed, const EpochCallback& on_epoch = {});

/// Received frames of generated waveforms sent from `position` to R through
/// fresh channel draws.
FeatureMatrix spoof_features(const GanState& state, const ScenarioConfig& scenario, const Position& position,
                             int n_frames, RandomStream& rng);

/// Defender verdict on n_frames spoofed frames from `position`.
ErrorMetrics spoof_attack(const GanState& state, const DefenderModel& defender, const ScenarioConfig& scenario,
                          const Position& position, int n_frames, RandomStream& rng);

nlohmann::json gan_state_to_json(const GanState& state);
/// Restores models, normalization and histories; optimizer moments restart.
GanState gan_state_from_json(const nlohmann::json& doc);

}  // namespace spoofsim
