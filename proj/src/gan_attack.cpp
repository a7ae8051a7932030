#include "spoofsim/gan_attack.hpp"

#include <cmath>
#include <numeric>

#include "spoofsim/errors.hpp"

namespace spoofsim {

namespace {

std::vector<int> hidden_stack(int first, int width, int layers, int last) {
    std::vector<int> dims{first};
    for (int l = 0; l < layers; ++l) dims.push_back(width);
    dims.push_back(last);
    return dims;
}

void require_rows(const nn::Matrix& m, std::span<const ChannelRealization> channels, const char* what) {
    if (m.cols() % 2 != 0) throw ShapeError(std::string(what) + ": feature width must be even");
    if (static_cast<std::size_t>(m.rows()) != channels.size()) {
        throw ShapeError(std::string(what) + ": one channel per row required");
    }
}

/// Rotation by +phase (forward) or -phase (transpose), scaled by gain.
nn::Matrix rotate_rows(const nn::Matrix& in, std::span<const ChannelRealization> channels, double sign) {
    nn::Matrix out(in.rows(), in.cols());
    for (Eigen::Index r = 0; r < in.rows(); ++r) {
        const auto& ch = channels[static_cast<std::size_t>(r)];
        const double c = ch.gain * std::cos(ch.phase);
        const double s = sign * ch.gain * std::sin(ch.phase);
        for (Eigen::Index k = 0; k < in.cols(); k += 2) {
            const double re = in(r, k);
            const double im = in(r, k + 1);
            out(r, k) = c * re - s * im;
            out(r, k + 1) = s * re + c * im;
        }
    }
    return out;
}

std::vector<ChannelRealization> draw_channels(int n, double d, const ChannelModel& model, RandomStream& rng) {
    std::vector<ChannelRealization> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out.push_back(draw_channel(d, model, rng));
    return out;
}

nn::Matrix constant_labels(Eigen::Index rows, double value) { return nn::Matrix::Constant(rows, 1, value); }

double probe_generator_loss(const nn::Matrix& d_fake) {
    return nn::loss(d_fake, constant_labels(d_fake.rows(), 1.0), nn::LossKind::BinaryCrossEntropy);
}

double probe_discriminator_loss(const nn::Matrix& d_real, const nn::Matrix& d_fake) {
    return nn::loss(d_real, constant_labels(d_real.rows(), 1.0), nn::LossKind::BinaryCrossEntropy) +
           nn::loss(d_fake, constant_labels(d_fake.rows(), 0.0), nn::LossKind::BinaryCrossEntropy);
}

void add_into(nn::Gradients& acc, const nn::Gradients& g) {
    for (std::size_t l = 0; l < acc.weights.size(); ++l) {
        acc.weights[l] += g.weights[l];
        acc.biases[l] += g.biases[l];
    }
}

}  // namespace

GanState make_gan_state(const GanConfig& config, double transmit_power, Normalization input_normalization,
                        std::uint64_t seed) {
    config.validate();
    if (!(transmit_power > 0.0)) throw ConfigError("generator needs a positive transmit power");
    if (input_normalization.width() != kFeatureWidth) throw ShapeError("discriminator normalization width must be 800");
    auto g_rng = rng_substream(seed, "gan-generator-init");
    auto d_rng = rng_substream(seed, "gan-discriminator-init");
    const int width = static_cast<int>(kFeatureWidth);
    GanState s;
    s.generator = nn::init_model(hidden_stack(config.z_dim, config.hidden_width, config.hidden_layers, width),
                                 nn::HiddenActivation::ReLU, nn::OutputActivation::ScaledTanh, g_rng, transmit_power);
    s.discriminator = nn::init_model(hidden_stack(width, config.hidden_width, config.hidden_layers, 1),
                                     nn::HiddenActivation::ReLU, nn::OutputActivation::Sigmoid, d_rng);
    s.generator_opt = nn::OptimizerState::for_model(s.generator);
    s.discriminator_opt = nn::OptimizerState::for_model(s.discriminator);
    s.input_normalization = std::move(input_normalization);
    s.rule = config.rule;
    s.seed = seed;
    return s;
}

nn::Matrix draw_noise(int rows, int z_dim, RandomStream& rng) {
    nn::Matrix z(rows, z_dim);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < z_dim; ++c) z(r, c) = rng.normal();
    }
    return z;
}

nn::Matrix generate_batch(const nn::MlpModel& generator, const nn::Matrix& z) {
    if (generator.output_width() % 2 != 0) throw ShapeError("generator output must be interleaved I/Q pairs");
    return nn::forward(generator, z).output();
}

std::vector<ComplexSample> generate_waveform(const nn::MlpModel& generator, const Eigen::VectorXd& z) {
    if (generator.output_width() != static_cast<int>(kFeatureWidth)) {
        throw ShapeError("generator output width must be " + std::to_string(kFeatureWidth));
    }
    const nn::Matrix out = generate_batch(generator, nn::Matrix(z.transpose()));
    return features_to_samples(out.row(0));
}

IqFrame transmit_through_channel(std::span<const ComplexSample> waveform, const ChannelRealization& channel) {
    if (waveform.size() != kSamplesPerFrame) throw ShapeError("waveform must have 400 samples");
    const ComplexSample h = std::polar(channel.gain, channel.phase);
    IqFrame frame;
    frame.samples.reserve(waveform.size());
    for (const auto& x : waveform) frame.samples.push_back(h * x);
    frame.source_label = SourceLabel::Other;
    return frame;
}

nn::Matrix apply_channel(const nn::Matrix& waveforms, std::span<const ChannelRealization> channels) {
    require_rows(waveforms, channels, "apply_channel");
    return rotate_rows(waveforms, channels, 1.0);
}

nn::Matrix apply_channel_transpose(const nn::Matrix& upstream, std::span<const ChannelRealization> channels) {
    require_rows(upstream, channels, "apply_channel_transpose");
    return rotate_rows(upstream, channels, -1.0);
}

double discriminator_step(GanState& state, const nn::Matrix& real, const nn::Matrix& fake,
                          const nn::TrainConfig& config, double learning_rate) {
    if (real.rows() < 1 || fake.rows() < 1) throw ShapeError("discriminator_step: empty batch");
    const auto real_pass = nn::forward(state.discriminator, real);
    const auto fake_pass = nn::forward(state.discriminator, fake);
    const nn::Matrix ones = constant_labels(real.rows(), 1.0);
    const nn::Matrix zeros = constant_labels(fake.rows(), 0.0);
    const double l = nn::loss(real_pass.output(), ones, nn::LossKind::BinaryCrossEntropy) +
                     nn::loss(fake_pass.output(), zeros, nn::LossKind::BinaryCrossEntropy);
    if (!std::isfinite(l)) throw NumericError("discriminator loss is not finite");
    auto grads = nn::backward(state.discriminator, real_pass, ones, nn::LossKind::BinaryCrossEntropy);
    add_into(grads, nn::backward(state.discriminator, fake_pass, zeros, nn::LossKind::BinaryCrossEntropy));
    nn::opt_step(state.discriminator, grads, state.discriminator_opt, config, learning_rate);
    return l;
}

GeneratorObjective generator_objective(const GanState& state, const nn::Matrix& z,
                                       std::span<const ChannelRealization> channels) {
    const auto g_pass = nn::forward(state.generator, z);
    const nn::Matrix received = apply_channel(g_pass.output(), channels);
    const nn::Matrix d_in = state.input_normalization.apply(received);
    const auto d_pass = nn::forward(state.discriminator, d_in);
    const nn::Matrix ones = constant_labels(z.rows(), 1.0);

    GeneratorObjective out;
    out.loss = nn::loss(d_pass.output(), ones, nn::LossKind::BinaryCrossEntropy);
    if (!std::isfinite(out.loss)) throw NumericError("generator loss is not finite");
    const auto d_grads = nn::backward(state.discriminator, d_pass, ones, nn::LossKind::BinaryCrossEntropy);
    const nn::Matrix d_received = d_grads.input.array().rowwise() / state.input_normalization.std.array();
    out.gradients = nn::backward_from_output(state.generator, g_pass, apply_channel_transpose(d_received, channels));
    return out;
}

double generator_step(GanState& state, const nn::Matrix& z, std::span<const ChannelRealization> channels,
                      const nn::TrainConfig& config, double learning_rate) {
    auto obj = generator_objective(state, z, channels);
    nn::opt_step(state.generator, obj.gradients, state.generator_opt, config, learning_rate);
    return obj.loss;
}

bool check_convergence(std::span<const double> history, const ConvergenceRule& rule) {
    rule.validate();
    const auto window = static_cast<std::size_t>(rule.window);
    if (history.size() < window) return false;
    const double now = history.back();
    const double bound = now == 0.0 ? rule.zero_loss_tolerance : rule.threshold * std::abs(now);
    double worst = 0.0;
    for (std::size_t i = history.size() - window; i < history.size(); ++i) {
        worst = std::max(worst, std::abs(history[i] - now));
    }
    return worst <= bound;
}

nn::GradCheckResult gan_gradient_check(const GanState& state, const nn::Matrix& z,
                                       std::span<const ChannelRealization> channels, double h) {
    const auto analytic = generator_objective(state, z, channels).gradients;
    GanState probe = state;
    auto objective = [&]() {
        const nn::Matrix received = apply_channel(generate_batch(probe.generator, z), channels);
        const auto out = nn::forward(probe.discriminator, probe.input_normalization.apply(received)).output();
        return probe_generator_loss(out);
    };
    nn::GradCheckResult result;
    auto check = [&](double& param, double grad) {
        const double saved = param;
        param = saved + h;
        const double up = objective();
        param = saved - h;
        const double down = objective();
        param = saved;
        const double numeric = (up - down) / (2.0 * h);
        result.max_relative_error = std::max(result.max_relative_error, nn::relative_error(grad, numeric));
        ++result.parameters_checked;
    };
    for (std::size_t l = 0; l < probe.generator.layer_count(); ++l) {
        auto& w = probe.generator.weights[l];
        for (Eigen::Index i = 0; i < w.rows(); ++i) {
            for (Eigen::Index j = 0; j < w.cols(); ++j) check(w(i, j), analytic.weights[l](i, j));
        }
        auto& b = probe.generator.biases[l];
        for (Eigen::Index j = 0; j < b.size(); ++j) check(b(j), analytic.biases[l](j));
    }
    return result;
}

GanState train_gan(const ScenarioConfig& scenario, std::uint64_t seed, const EpochCallback& on_epoch) {
    const GanConfig& cfg = scenario.gan;
    cfg.validate();
    const NodeConfig& t = scenario.node(NodeId::T);
    const NodeConfig& at = scenario.node(NodeId::AT);
    const Position& ar = scenario.node(NodeId::AR).position;
    const double d_t_ar = distance(t.position, ar);
    const double d_at_ar = distance(at.position, ar);

    // A_R eavesdrops on T to collect the real class.
    auto real_rng = rng_substream(seed, "gan-real");
    std::vector<IqFrame> real_frames;
    real_frames.reserve(static_cast<std::size_t>(cfg.real_samples));
    for (int i = 0; i < cfg.real_samples; ++i) {
        real_frames.push_back(
            synthesize_direct_frame(scenario.intended_payload, t, draw_channel(d_t_ar, scenario.channel, real_rng)));
    }
    const FeatureMatrix real_raw = frames_to_features(real_frames);
    GanState state = make_gan_state(cfg, at.transmit_power, Normalization::fit(real_raw), seed);
    const nn::Matrix real = state.input_normalization.apply(real_raw);

    auto probe_rng = rng_substream(seed, "gan-probe");
    const nn::Matrix probe_z = draw_noise(cfg.fake_samples, cfg.z_dim, probe_rng);
    const auto probe_channels = draw_channels(cfg.fake_samples, d_at_ar, scenario.channel, probe_rng);

    auto rng = rng_substream(seed, "gan-train");
    const int bs = cfg.train.batch_size;
    const int n_real = static_cast<int>(real.rows());
    std::vector<int> order(static_cast<std::size_t>(n_real));
    std::iota(order.begin(), order.end(), 0);

    double lr = cfg.train.learning_rate;
    state.g_loss_history.reserve(static_cast<std::size_t>(cfg.max_epochs));
    state.d_loss_history.reserve(static_cast<std::size_t>(cfg.max_epochs));
    while (state.epoch < cfg.max_epochs) {
        for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
        for (int start = 0; start < n_real; start += bs) {
            const int rows = std::min(bs, n_real - start);
            nn::Matrix xr(rows, real.cols());
            for (int i = 0; i < rows; ++i) xr.row(i) = real.row(order[static_cast<std::size_t>(start + i)]);
            const nn::Matrix z = draw_noise(rows, cfg.z_dim, rng);
            const auto ch = draw_channels(rows, d_at_ar, scenario.channel, rng);
            const nn::Matrix xf = state.input_normalization.apply(apply_channel(generate_batch(state.generator, z), ch));
            discriminator_step(state, xr, xf, cfg.train, lr);
        }
        for (int start = 0; start < cfg.fake_samples; start += bs) {
            const int rows = std::min(bs, cfg.fake_samples - start);
            const nn::Matrix z = draw_noise(rows, cfg.z_dim, rng);
            const auto ch = draw_channels(rows, d_at_ar, scenario.channel, rng);
            generator_step(state, z, ch, cfg.train, lr);
        }
        lr *= cfg.lr_decay;

        const nn::Matrix probe_in =
            state.input_normalization.apply(apply_channel(generate_batch(state.generator, probe_z), probe_channels));
        const nn::Matrix d_fake = nn::forward(state.discriminator, probe_in).output();
        const nn::Matrix d_real = nn::forward(state.discriminator, real).output();
        state.g_loss_history.push_back(probe_generator_loss(d_fake));
        state.d_loss_history.push_back(probe_discriminator_loss(d_real, d_fake));
        ++state.epoch;
        state.converged = check_convergence(state.g_loss_history, cfg.rule) &&
                          check_convergence(state.d_loss_history, cfg.rule);
        if (on_epoch) on_epoch(state);
        if (state.converged) break;
    }
    return state;
}

FeatureMatrix spoof_features(const GanState& state, const ScenarioConfig& scenario, const Position& position,
                             int n_frames, RandomStream& rng) {
    if (n_frames < 1) throw ConfigError("attack needs at least one frame");
    const double d = distance(position, scenario.node(NodeId::R).position);
    const nn::Matrix z = draw_noise(n_frames, state.z_dim(), rng);
    const auto ch = draw_channels(n_frames, d, scenario.channel, rng);
    return apply_channel(generate_batch(state.generator, z), ch);
}

ErrorMetrics spoof_attack(const GanState& state, const DefenderModel& defender, const ScenarioConfig& scenario,
                          const Position& position, int n_frames, RandomStream& rng) {
    return evaluate_attack(defender, spoof_features(state, scenario, position, n_frames, rng));
}

nlohmann::json gan_state_to_json(const GanState& s) {
    return {{"format", "spoofsim-gan"},
            {"version", 1},
            {"seed", s.seed},
            {"epoch", s.epoch},
            {"converged", s.converged},
            {"rule", {{"window", s.rule.window}, {"threshold", s.rule.threshold}}},
            {"generator", nn::model_to_json(s.generator)},
            {"discriminator", nn::model_to_json(s.discriminator)},
            {"input_normalization", s.input_normalization.to_json()},
            {"g_loss_history", s.g_loss_history},
            {"d_loss_history", s.d_loss_history}};
}

GanState gan_state_from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format") != "spoofsim-gan") throw ConfigError("not a GAN checkpoint");
        if (doc.at("version") != 1) throw ConfigError("unsupported GAN checkpoint version");
        GanState s;
        s.seed = doc.at("seed").get<std::uint64_t>();
        s.epoch = doc.at("epoch").get<int>();
        s.converged = doc.at("converged").get<bool>();
        s.rule.window = doc.at("rule").at("window").get<int>();
        s.rule.threshold = doc.at("rule").at("threshold").get<double>();
        s.generator = nn::model_from_json(doc.at("generator"));
        s.discriminator = nn::model_from_json(doc.at("discriminator"));
        s.input_normalization = Normalization::from_json(doc.at("input_normalization"));
        s.g_loss_history = doc.at("g_loss_history").get<std::vector<double>>();
        s.d_loss_history = doc.at("d_loss_history").get<std::vector<double>>();
        if (s.g_loss_history.size() != static_cast<std::size_t>(s.epoch) ||
            s.d_loss_history.size() != static_cast<std::size_t>(s.epoch)) {
            throw ConfigError("GAN checkpoint histories do not match its epoch count");
        }
        s.generator_opt = nn::OptimizerState::for_model(s.generator);
        s.discriminator_opt = nn::OptimizerState::for_model(s.discriminator);
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed GAN checkpoint: ") + e.what());
    }
}

}  // namespace spoofsim
