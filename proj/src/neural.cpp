#include "spoofsim/neural.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "spoofsim/errors.hpp"

namespace spoofsim::nn {

namespace {

bool all_finite(const Eigen::Ref<const Matrix>& m) { return m.array().isFinite().all(); }

void apply_hidden(HiddenActivation a, const Matrix& z, Matrix& out) {
    switch (a) {
        case HiddenActivation::ReLU: out = z.cwiseMax(0.0); break;
        case HiddenActivation::Tanh: out = z.array().tanh().matrix(); break;
    }
}

// dL/dz given dL/da for a hidden layer.
Matrix hidden_backward(HiddenActivation a, const Matrix& z, const Matrix& act, const Matrix& upstream) {
    switch (a) {
        case HiddenActivation::ReLU:
            return (z.array() > 0.0).select(upstream, 0.0);
        case HiddenActivation::Tanh:
            return (upstream.array() * (1.0 - act.array().square())).matrix();
    }
    return upstream;
}

void apply_output(OutputActivation a, double scale, const Matrix& z, Matrix& out) {
    switch (a) {
        case OutputActivation::Softmax: {
            out.resize(z.rows(), z.cols());
            for (Eigen::Index r = 0; r < z.rows(); ++r) {
                const double mx = z.row(r).maxCoeff();
                out.row(r) = (z.row(r).array() - mx).exp().matrix();
                out.row(r) /= out.row(r).sum();
            }
            break;
        }
        case OutputActivation::Sigmoid:
            // Split by sign so exp() never overflows.
            out = z.unaryExpr([](double v) {
                if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
                const double e = std::exp(v);
                return e / (1.0 + e);
            });
            break;
        case OutputActivation::ScaledTanh: out = (scale * z.array().tanh()).matrix(); break;
        case OutputActivation::Linear: out = z; break;
    }
}

Matrix output_backward(OutputActivation a, double scale, const Matrix& act, const Matrix& upstream) {
    switch (a) {
        case OutputActivation::Softmax: {
            // J^T g = s * (g - <g, s>) row-wise.
            const Eigen::VectorXd dots = (upstream.array() * act.array()).rowwise().sum();
            return (act.array() * (upstream.colwise() - dots).array()).matrix();
        }
        case OutputActivation::Sigmoid:
            return (upstream.array() * act.array() * (1.0 - act.array())).matrix();
        case OutputActivation::ScaledTanh: {
            const auto t = act.array() / scale;
            return (upstream.array() * scale * (1.0 - t.square())).matrix();
        }
        case OutputActivation::Linear: return upstream;
    }
    return upstream;
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

void check_labels(const Matrix& outputs, const Matrix& labels, LossKind kind) {
    if (outputs.rows() != labels.rows() || outputs.cols() != labels.cols()) {
        throw ShapeError("loss: outputs " + std::to_string(outputs.rows()) + "x" + std::to_string(outputs.cols()) +
                         " vs labels " + std::to_string(labels.rows()) + "x" + std::to_string(labels.cols()));
    }
    if (outputs.rows() == 0) throw ShapeError("loss: empty batch");
    if (kind == LossKind::BinaryCrossEntropy && outputs.cols() != 1) {
        throw ShapeError("binary cross-entropy expects a single output column");
    }
    if (!all_finite(outputs)) throw NumericError("loss: non-finite outputs");
    if ((outputs.array() < 0.0).any() || (outputs.array() > 1.0).any()) {
        throw NumericError("loss: outputs are not probabilities");
    }
}

}  // namespace

std::size_t MlpModel::parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        n += static_cast<std::size_t>(weights[l].size() + biases[l].size());
    }
    return n;
}

void MlpModel::validate() const {
    if (layer_dims.size() < 2) throw ConfigError("model needs at least two layer widths");
    for (int d : layer_dims) {
        if (d < 1) throw ConfigError("layer widths must be >= 1");
    }
    if (weights.size() != layer_dims.size() - 1 || biases.size() != weights.size()) {
        throw ConfigError("parameter count does not match layer_dims");
    }
    for (std::size_t l = 0; l < weights.size(); ++l) {
        if (weights[l].rows() != layer_dims[l] || weights[l].cols() != layer_dims[l + 1] ||
            biases[l].size() != layer_dims[l + 1]) {
            throw ConfigError("layer " + std::to_string(l) + " shape does not chain");
        }
        if (!all_finite(weights[l]) || !all_finite(biases[l])) {
            throw NumericError("layer " + std::to_string(l) + " has non-finite parameters");
        }
    }
    if (output_activation == OutputActivation::ScaledTanh && !(output_scale > 0.0)) {
        throw ConfigError("ScaledTanh needs a positive output scale");
    }
}

Gradients Gradients::zeros_like(const MlpModel& model) {
    Gradients g;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        g.weights.push_back(Matrix::Zero(model.weights[l].rows(), model.weights[l].cols()));
        g.biases.push_back(RowVector::Zero(model.biases[l].size()));
    }
    return g;
}

MlpModel init_model(std::span<const int> layer_dims, HiddenActivation hidden, OutputActivation output,
                    RandomStream& rng, double output_scale) {
    MlpModel model;
    model.layer_dims.assign(layer_dims.begin(), layer_dims.end());
    model.hidden_activation = hidden;
    model.output_activation = output;
    model.output_scale = output_scale;
    if (model.layer_dims.size() < 2) throw ConfigError("model needs at least two layer widths");
    for (int d : model.layer_dims) {
        if (d < 1) throw ConfigError("layer widths must be >= 1");
    }
    const std::size_t n_layers = model.layer_dims.size() - 1;
    for (std::size_t l = 0; l < n_layers; ++l) {
        const int fan_in = model.layer_dims[l];
        const int fan_out = model.layer_dims[l + 1];
        const bool is_output = l + 1 == n_layers;
        const bool he = !is_output && hidden == HiddenActivation::ReLU;
        const double std = he ? std::sqrt(2.0 / fan_in) : std::sqrt(2.0 / (fan_in + fan_out));
        Matrix w(fan_in, fan_out);
        // Row-major fill order so the draw sequence matches the JSON layout.
        for (int r = 0; r < fan_in; ++r) {
            for (int c = 0; c < fan_out; ++c) w(r, c) = std * rng.normal();
        }
        model.weights.push_back(std::move(w));
        model.biases.push_back(RowVector::Zero(fan_out));
    }
    model.validate();
    return model;
}

ForwardPass forward(const MlpModel& model, const Matrix& batch) {
    if (batch.cols() != model.input_width()) {
        throw ShapeError("forward: input width " + std::to_string(batch.cols()) + ", model expects " +
                         std::to_string(model.input_width()));
    }
    ForwardPass pass;
    const std::size_t n_layers = model.layer_count();
    pass.pre.resize(n_layers);
    pass.act.resize(n_layers + 1);
    pass.act[0] = batch;
    for (std::size_t l = 0; l < n_layers; ++l) {
        Matrix& z = pass.pre[l];
        z.noalias() = pass.act[l] * model.weights[l];
        z.rowwise() += model.biases[l];
        if (l + 1 < n_layers) {
            apply_hidden(model.hidden_activation, z, pass.act[l + 1]);
        } else {
            apply_output(model.output_activation, model.output_scale, z, pass.act[l + 1]);
        }
    }
    return pass;
}

double loss(const Matrix& outputs, const Matrix& labels, LossKind kind) {
    check_labels(outputs, labels, kind);
    const double n = static_cast<double>(outputs.rows());
    double total = 0.0;
    switch (kind) {
        case LossKind::CrossEntropy:
            for (Eigen::Index r = 0; r < outputs.rows(); ++r) {
                for (Eigen::Index c = 0; c < outputs.cols(); ++c) {
                    if (labels(r, c) != 0.0) total -= labels(r, c) * std::log(clamp_prob(outputs(r, c)));
                }
            }
            break;
        case LossKind::BinaryCrossEntropy:
            for (Eigen::Index r = 0; r < outputs.rows(); ++r) {
                const double p = clamp_prob(outputs(r, 0));
                const double y = labels(r, 0);
                total -= y * std::log(p) + (1.0 - y) * std::log(1.0 - p);
            }
            break;
    }
    return total / n;
}

Matrix loss_gradient(const Matrix& outputs, const Matrix& labels, LossKind kind) {
    check_labels(outputs, labels, kind);
    const double n = static_cast<double>(outputs.rows());
    Matrix g(outputs.rows(), outputs.cols());
    switch (kind) {
        case LossKind::CrossEntropy:
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                for (Eigen::Index c = 0; c < g.cols(); ++c) {
                    const double p = outputs(r, c);
                    const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
                    g(r, c) = clamped ? 0.0 : -labels(r, c) / (p * n);
                }
            }
            break;
        case LossKind::BinaryCrossEntropy:
            for (Eigen::Index r = 0; r < g.rows(); ++r) {
                const double p = outputs(r, 0);
                const double y = labels(r, 0);
                const bool clamped = p < kProbClamp || p > 1.0 - kProbClamp;
                g(r, 0) = clamped ? 0.0 : (-(y / p) + (1.0 - y) / (1.0 - p)) / n;
            }
            break;
    }
    return g;
}

namespace {

Gradients backprop_from_preactivation(const MlpModel& model, const ForwardPass& pass, Matrix dz) {
    const std::size_t n_layers = model.layer_count();
    Gradients g;
    g.weights.resize(n_layers);
    g.biases.resize(n_layers);
    for (std::size_t l = n_layers; l-- > 0;) {
        g.weights[l].noalias() = pass.act[l].transpose() * dz;
        g.biases[l] = dz.colwise().sum();
        Matrix da;
        da.noalias() = dz * model.weights[l].transpose();
        if (l == 0) {
            g.input = std::move(da);
        } else {
            dz = hidden_backward(model.hidden_activation, pass.pre[l - 1], pass.act[l], da);
        }
    }
    return g;
}

void check_pass(const MlpModel& model, const ForwardPass& pass) {
    if (pass.pre.size() != model.layer_count() || pass.act.size() != model.layer_count() + 1) {
        throw ShapeError("backward: forward pass does not belong to this model");
    }
}

}  // namespace

Gradients backward(const MlpModel& model, const ForwardPass& pass, const Matrix& labels, LossKind kind) {
    check_pass(model, pass);
    const Matrix& out = pass.output();
    check_labels(out, labels, kind);
    const double n = static_cast<double>(out.rows());
    // Fused softmax/CE and sigmoid/BCE: dL/dz = (p - y) / n. Exact for any
    // probability not hitting the clamp; rows of a CE label must sum to 1.
    if (kind == LossKind::CrossEntropy && model.output_activation == OutputActivation::Softmax) {
        const Eigen::VectorXd row_mass = labels.rowwise().sum();
        Matrix dz = (out.array().colwise() * row_mass.array() - labels.array()).matrix() / n;
        return backprop_from_preactivation(model, pass, std::move(dz));
    }
    if (kind == LossKind::BinaryCrossEntropy && model.output_activation == OutputActivation::Sigmoid) {
        Matrix dz = (out - labels) / n;
        return backprop_from_preactivation(model, pass, std::move(dz));
    }
    return backward_from_output(model, pass, loss_gradient(out, labels, kind));
}

Gradients backward_from_output(const MlpModel& model, const ForwardPass& pass, const Matrix& output_grad) {
    check_pass(model, pass);
    if (output_grad.rows() != pass.output().rows() || output_grad.cols() != pass.output().cols()) {
        throw ShapeError("backward: upstream gradient shape mismatch");
    }
    Matrix dz = output_backward(model.output_activation, model.output_scale, pass.output(), output_grad);
    return backprop_from_preactivation(model, pass, std::move(dz));
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (steps < 1) throw ConfigError("steps must be >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
}

OptimizerState OptimizerState::for_model(const MlpModel& model) {
    OptimizerState s;
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        s.m_weights.push_back(Matrix::Zero(model.weights[l].rows(), model.weights[l].cols()));
        s.v_weights.push_back(Matrix::Zero(model.weights[l].rows(), model.weights[l].cols()));
        s.m_biases.push_back(RowVector::Zero(model.biases[l].size()));
        s.v_biases.push_back(RowVector::Zero(model.biases[l].size()));
    }
    return s;
}

namespace {

template <typename Param>
void adam_update(Param& p, const Param& g, Param& m, Param& v, double lr, double b1, double b2, double eps,
                 double c1, double c2) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
}

}  // namespace

void opt_step(MlpModel& model, const Gradients& grads, OptimizerState& state, const TrainConfig& config,
              double learning_rate) {
    if (grads.weights.size() != model.layer_count() || grads.biases.size() != model.layer_count()) {
        throw ShapeError("opt_step: gradient layer count mismatch");
    }
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        if (grads.weights[l].rows() != model.weights[l].rows() ||
            grads.weights[l].cols() != model.weights[l].cols() ||
            grads.biases[l].size() != model.biases[l].size()) {
            throw ShapeError("opt_step: gradient shape mismatch at layer " + std::to_string(l));
        }
    }
    switch (config.optimizer) {
        case OptimizerKind::SGD:
            for (std::size_t l = 0; l < model.layer_count(); ++l) {
                model.weights[l] -= learning_rate * grads.weights[l];
                model.biases[l] -= learning_rate * grads.biases[l];
            }
            ++state.step;
            break;
        case OptimizerKind::Adam: {
            if (state.m_weights.size() != model.layer_count()) state = OptimizerState::for_model(model);
            ++state.step;
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.step));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.step));
            for (std::size_t l = 0; l < model.layer_count(); ++l) {
                adam_update(model.weights[l], grads.weights[l], state.m_weights[l], state.v_weights[l],
                            learning_rate, config.beta1, config.beta2, config.epsilon, c1, c2);
                adam_update(model.biases[l], grads.biases[l], state.m_biases[l], state.v_biases[l], learning_rate,
                            config.beta1, config.beta2, config.epsilon, c1, c2);
            }
            break;
        }
    }
}

std::vector<int> argmax_rows(const Matrix& m) {
    std::vector<int> out(static_cast<std::size_t>(m.rows()));
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        Eigen::Index idx = 0;
        m.row(r).maxCoeff(&idx);
        out[static_cast<std::size_t>(r)] = static_cast<int>(idx);
    }
    return out;
}

Matrix one_hot(std::span<const int> classes, int num_classes) {
    Matrix m = Matrix::Zero(static_cast<Eigen::Index>(classes.size()), num_classes);
    for (std::size_t i = 0; i < classes.size(); ++i) {
        if (classes[i] < 0 || classes[i] >= num_classes) throw ShapeError("one_hot: class index out of range");
        m(static_cast<Eigen::Index>(i), classes[i]) = 1.0;
    }
    return m;
}

double relative_error(double analytic, double numeric, double floor) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
    return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check(const MlpModel& model, const Matrix& batch, const Matrix& labels, LossKind kind,
                               double h) {
    const Gradients analytic = backward(model, forward(model, batch), labels, kind);
    MlpModel probe = model;
    GradCheckResult result;
    auto eval = [&] { return loss(forward(probe, batch).output(), labels, kind); };
    auto check = [&](double& param, double grad) {
        const double saved = param;
        param = saved + h;
        const double up = eval();
        param = saved - h;
        const double down = eval();
        param = saved;
        result.max_relative_error = std::max(result.max_relative_error, relative_error(grad, (up - down) / (2 * h)));
        ++result.parameters_checked;
    };
    for (std::size_t l = 0; l < probe.layer_count(); ++l) {
        for (Eigen::Index r = 0; r < probe.weights[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < probe.weights[l].cols(); ++c) {
                check(probe.weights[l](r, c), analytic.weights[l](r, c));
            }
        }
        for (Eigen::Index c = 0; c < probe.biases[l].size(); ++c) check(probe.biases[l][c], analytic.biases[l][c]);
    }
    return result;
}

const char* to_string(HiddenActivation a) {
    switch (a) {
        case HiddenActivation::ReLU: return "relu";
        case HiddenActivation::Tanh: return "tanh";
    }
    return "?";
}

const char* to_string(OutputActivation a) {
    switch (a) {
        case OutputActivation::Softmax: return "softmax";
        case OutputActivation::Sigmoid: return "sigmoid";
        case OutputActivation::ScaledTanh: return "scaled_tanh";
        case OutputActivation::Linear: return "linear";
    }
    return "?";
}

namespace {

HiddenActivation hidden_from_string(const std::string& s) {
    if (s == "relu") return HiddenActivation::ReLU;
    if (s == "tanh") return HiddenActivation::Tanh;
    throw ConfigError("unknown hidden activation '" + s + "'");
}

OutputActivation output_from_string(const std::string& s) {
    if (s == "softmax") return OutputActivation::Softmax;
    if (s == "sigmoid") return OutputActivation::Sigmoid;
    if (s == "scaled_tanh") return OutputActivation::ScaledTanh;
    if (s == "linear") return OutputActivation::Linear;
    throw ConfigError("unknown output activation '" + s + "'");
}

}  // namespace

nlohmann::json model_to_json(const MlpModel& model) {
    nlohmann::json doc;
    doc["format"] = "spoofsim-mlp";
    doc["version"] = kModelFormatVersion;
    doc["layer_dims"] = model.layer_dims;
    doc["hidden_activation"] = to_string(model.hidden_activation);
    doc["output_activation"] = to_string(model.output_activation);
    doc["output_scale"] = model.output_scale;
    auto& layers = doc["layers"] = nlohmann::json::array();
    for (std::size_t l = 0; l < model.layer_count(); ++l) {
        std::vector<double> w;
        w.reserve(static_cast<std::size_t>(model.weights[l].size()));
        for (Eigen::Index r = 0; r < model.weights[l].rows(); ++r) {
            for (Eigen::Index c = 0; c < model.weights[l].cols(); ++c) w.push_back(model.weights[l](r, c));
        }
        std::vector<double> b(model.biases[l].data(), model.biases[l].data() + model.biases[l].size());
        layers.push_back({{"weights", std::move(w)}, {"biases", std::move(b)}});
    }
    return doc;
}

MlpModel model_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format").get<std::string>() != "spoofsim-mlp") throw ConfigError("not a spoofsim model document");
        const int version = doc.at("version").get<int>();
        if (version != kModelFormatVersion) {
            throw ConfigError("unsupported model format version " + std::to_string(version));
        }
        MlpModel model;
        model.layer_dims = doc.at("layer_dims").get<std::vector<int>>();
        model.hidden_activation = hidden_from_string(doc.at("hidden_activation").get<std::string>());
        model.output_activation = output_from_string(doc.at("output_activation").get<std::string>());
        model.output_scale = doc.at("output_scale").get<double>();
        const auto& layers = doc.at("layers");
        if (model.layer_dims.size() < 2 || layers.size() != model.layer_dims.size() - 1) {
            throw ConfigError("layer list does not match layer_dims");
        }
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto w = layers[l].at("weights").get<std::vector<double>>();
            const auto b = layers[l].at("biases").get<std::vector<double>>();
            const int rows = model.layer_dims[l];
            const int cols = model.layer_dims[l + 1];
            if (w.size() != static_cast<std::size_t>(rows) * cols || b.size() != static_cast<std::size_t>(cols)) {
                throw ConfigError("layer " + std::to_string(l) + " parameter array has the wrong length");
            }
            Matrix wm(rows, cols);
            for (int r = 0; r < rows; ++r) {
                for (int c = 0; c < cols; ++c) wm(r, c) = w[static_cast<std::size_t>(r) * cols + c];
            }
            model.weights.push_back(std::move(wm));
            model.biases.push_back(Eigen::Map<const RowVector>(b.data(), cols));
        }
        model.validate();
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed model document: ") + e.what());
    }
}

}  // namespace spoofsim::nn
