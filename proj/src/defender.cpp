#include "spoofsim/defender.hpp"

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "spoofsim/errors.hpp"

namespace spoofsim {

namespace {

constexpr int kIntendedColumn = 1;

void fisher_yates(std::vector<int>& v, RandomStream& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

nlohmann::json vector_to_json(const Eigen::RowVectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Eigen::RowVectorXd vector_from_json(const nlohmann::json& j) {
    const auto values = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::RowVectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::uint64_t fnv_update(std::uint64_t h, const double* data, std::size_t count) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < count * sizeof(double); ++i) {
        h ^= bytes[i];
        h *= 1099511628211ull;
    }
    return h;
}

NodeConfig other_transmitter(const ScenarioConfig& s, RandomStream& rng) {
    NodeConfig tx = s.node(NodeId::AT);
    tx.device_phase = rng.uniform(0.0, kTwoPi);
    return tx;
}

IqFrame intended_frame(const ScenarioConfig& s, double d_tr, RandomStream& rng) {
    return synthesize_direct_frame(s.intended_payload, s.node(NodeId::T), draw_channel(d_tr, s.channel, rng));
}

IqFrame other_frame(const ScenarioConfig& s, double d_ar, RandomStream& rng) {
    const NodeConfig tx = other_transmitter(s, rng);
    const auto ch = draw_channel(d_ar, s.channel, rng);
    return synthesize_random_frame(tx, ch, rng);
}

}  // namespace

Normalization Normalization::fit(const FeatureMatrix& features, double std_floor) {
    if (features.rows() < 1) throw ShapeError("normalization: empty feature matrix");
    Normalization n;
    n.mean = features.colwise().mean();
    const FeatureMatrix centered = features.rowwise() - n.mean;
    n.std = (centered.array().square().colwise().sum() / static_cast<double>(features.rows())).sqrt();
    n.std = n.std.cwiseMax(std_floor);
    return n;
}

FeatureMatrix Normalization::apply(const FeatureMatrix& features) const {
    if (static_cast<std::size_t>(features.cols()) != width()) {
        throw ShapeError("normalization: expected width " + std::to_string(width()) + ", got " +
                         std::to_string(features.cols()));
    }
    return (features.rowwise() - mean).array().rowwise() / std.array();
}

nlohmann::json Normalization::to_json() const {
    return {{"mean", vector_to_json(mean)}, {"std", vector_to_json(std)}};
}

Normalization Normalization::from_json(const nlohmann::json& doc) {
    try {
        Normalization n;
        n.mean = vector_from_json(doc.at("mean"));
        n.std = vector_from_json(doc.at("std"));
        if (n.mean.size() != n.std.size()) throw ConfigError("normalization mean/std widths differ");
        if ((n.std.array() <= 0.0).any()) throw ConfigError("normalization std must be positive");
        return n;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed normalization: ") + e.what());
    }
}

void LabeledDataset::validate() const {
    if (labels.empty()) throw ShapeError("dataset is empty");
    if (static_cast<std::size_t>(features.rows()) != labels.size()) throw ShapeError("dataset rows/labels mismatch");
    for (int y : labels) {
        if (y != 0 && y != 1) throw ConfigError("dataset labels must be 0 or 1");
    }
    if (normalization.width() != static_cast<std::size_t>(features.cols())) {
        throw ShapeError("dataset normalization width mismatch");
    }
    if ((normalization.std.array() <= 0.0).any()) throw NumericError("normalization std must be positive");
}

double ErrorMetrics::max_error() const {
    if (!e_MD || !e_FA) throw DegenerateMetricsError("max error needs both intended and other frames");
    return std::max(*e_MD, *e_FA);
}

ErrorMetrics metrics_from_counts(long n, long n_T, long n_MD, long n_FA) {
    if (n < 0 || n_T < 0 || n_T > n || n_MD < 0 || n_MD > n_T || n_FA < 0 || n_FA > n - n_T) {
        throw ConfigError("inconsistent error counts");
    }
    ErrorMetrics m;
    m.n = n;
    m.n_T = n_T;
    m.n_MD = n_MD;
    m.n_FA = n_FA;
    if (n_T > 0) m.e_MD = static_cast<double>(n_MD) / static_cast<double>(n_T);
    if (n - n_T > 0) {
        m.e_FA = static_cast<double>(n_FA) / static_cast<double>(n - n_T);
        m.success_probability = *m.e_FA;
    }
    return m;
}

nlohmann::json DefenderModel::to_json() const {
    return {{"format", "spoofsim-defender"},
            {"version", 1},
            {"network", nn::model_to_json(network)},
            {"normalization", normalization.to_json()}};
}

DefenderModel DefenderModel::from_json(const nlohmann::json& doc) {
    try {
        if (doc.at("format") != "spoofsim-defender") throw ConfigError("not a defender document");
        if (doc.at("version") != 1) throw ConfigError("unsupported defender document version");
        DefenderModel m;
        m.network = nn::model_from_json(doc.at("network"));
        m.normalization = Normalization::from_json(doc.at("normalization"));
        if (m.normalization.width() != static_cast<std::size_t>(m.network.input_width())) {
            throw ConfigError("defender normalization width does not match the network");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed defender document: ") + e.what());
    }
}

std::string DefenderModel::digest() const {
    std::uint64_t h = 14695981039346656037ull;
    for (std::size_t l = 0; l < network.layer_count(); ++l) {
        h = fnv_update(h, network.weights[l].data(), static_cast<std::size_t>(network.weights[l].size()));
        h = fnv_update(h, network.biases[l].data(), static_cast<std::size_t>(network.biases[l].size()));
    }
    h = fnv_update(h, normalization.mean.data(), normalization.width());
    h = fnv_update(h, normalization.std.data(), normalization.width());
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

LabeledDataset build_training_set(const ScenarioConfig& s, int n_intended, int n_other, RandomStream& rng) {
    if (n_intended < 1 || n_other < 1) throw ConfigError("training set needs at least one frame of each class");
    const double d_tr = distance(s.node(NodeId::T).position, s.node(NodeId::R).position);
    const double d_ar = distance(s.node(NodeId::AT).position, s.node(NodeId::R).position);

    std::vector<int> order(static_cast<std::size_t>(n_intended + n_other));
    std::iota(order.begin(), order.end(), 0);
    fisher_yates(order, rng);

    std::vector<IqFrame> frames;
    frames.reserve(order.size());
    for (int i = 0; i < n_intended; ++i) frames.push_back(intended_frame(s, d_tr, rng));
    for (int i = 0; i < n_other; ++i) frames.push_back(other_frame(s, d_ar, rng));

    LabeledDataset ds;
    ds.features.resize(static_cast<Eigen::Index>(order.size()), static_cast<Eigen::Index>(kFeatureWidth));
    ds.labels.resize(order.size());
    for (std::size_t row = 0; row < order.size(); ++row) {
        const IqFrame& f = frames[static_cast<std::size_t>(order[row])];
        ds.features.row(static_cast<Eigen::Index>(row)) = frame_to_features(f).transpose();
        ds.labels[row] = f.source_label == SourceLabel::Intended ? 1 : 0;
    }
    ds.normalization = Normalization::fit(ds.features, s.defender.std_floor);
    return ds;
}

std::vector<IqFrame> build_test_frames(const ScenarioConfig& s, int n, RandomStream& rng) {
    if (n < 1) throw ConfigError("test set must be non-empty");
    const double d_tr = distance(s.node(NodeId::T).position, s.node(NodeId::R).position);
    const double d_ar = distance(s.node(NodeId::AT).position, s.node(NodeId::R).position);
    std::vector<IqFrame> frames;
    frames.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const bool intended = (rng.next_u64() >> 63) != 0;
        frames.push_back(intended ? intended_frame(s, d_tr, rng) : other_frame(s, d_ar, rng));
    }
    return frames;
}

DefenderModel train_defender(const LabeledDataset& dataset, const DefenderConfig& config, std::uint64_t seed) {
    dataset.validate();
    config.train.validate();
    std::vector<int> dims{static_cast<int>(dataset.features.cols())};
    for (int l = 0; l < config.hidden_layers; ++l) dims.push_back(config.hidden_width);
    dims.push_back(2);

    auto init_rng = rng_substream(seed, "defender-init");
    auto batch_rng = rng_substream(seed, "defender-batches");

    DefenderModel model;
    model.normalization = dataset.normalization;
    model.network = nn::init_model(dims, nn::HiddenActivation::ReLU, nn::OutputActivation::Softmax, init_rng);
    auto state = nn::OptimizerState::for_model(model.network);

    const FeatureMatrix x = dataset.normalization.apply(dataset.features);
    const nn::Matrix y = nn::one_hot(dataset.labels, 2);
    const int n = static_cast<int>(dataset.size());
    const int batch = std::min(config.train.batch_size, n);

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    fisher_yates(order, batch_rng);
    int cursor = 0;
    nn::Matrix xb(batch, x.cols());
    nn::Matrix yb(batch, 2);
    model.loss_history.reserve(static_cast<std::size_t>(config.train.steps));
    for (int step = 0; step < config.train.steps; ++step) {
        if (cursor + batch > n) {
            fisher_yates(order, batch_rng);
            cursor = 0;
        }
        for (int i = 0; i < batch; ++i) {
            const int r = order[static_cast<std::size_t>(cursor + i)];
            xb.row(i) = x.row(r);
            yb.row(i) = y.row(r);
        }
        cursor += batch;
        const auto pass = nn::forward(model.network, xb);
        model.loss_history.push_back(nn::loss(pass.output(), yb, nn::LossKind::CrossEntropy));
        const auto grads = nn::backward(model.network, pass, yb, nn::LossKind::CrossEntropy);
        nn::opt_step(model.network, grads, state, config.train);
    }
    model.network.validate();
    return model;
}

std::vector<Classification> classify(const DefenderModel& model, const FeatureMatrix& raw_features) {
    const auto pass = nn::forward(model.network, model.normalization.apply(raw_features));
    const auto& p = pass.output();
    std::vector<Classification> out(static_cast<std::size_t>(p.rows()));
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
        auto& c = out[static_cast<std::size_t>(i)];
        c.intended_probability = p(i, kIntendedColumn);
        c.other_probability = p(i, 1 - kIntendedColumn);
        c.label = c.intended_probability >= 0.5 ? SourceLabel::Intended : SourceLabel::Other;
    }
    return out;
}

Classification classify(const DefenderModel& model, const IqFrame& frame) {
    frame.validate();
    return classify(model, FeatureMatrix(frame_to_features(frame).transpose())).front();
}

ErrorMetrics evaluate(const DefenderModel& model, std::span<const IqFrame> frames) {
    long n_T = 0, n_MD = 0, n_FA = 0;
    const auto results = classify(model, frames_to_features(frames));
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const bool truth = frames[i].source_label == SourceLabel::Intended;
        const bool said = results[i].label == SourceLabel::Intended;
        if (truth) {
            ++n_T;
            if (!said) ++n_MD;
        } else if (said) {
            ++n_FA;
        }
    }
    const long n = static_cast<long>(frames.size());
    if (n_T == 0 || n_T == n) {
        throw DegenerateMetricsError("test set contains only " + std::string(n_T == 0 ? "other" : "intended") +
                                     " frames; misdetection and false-alarm rates are both required");
    }
    return metrics_from_counts(n, n_T, n_MD, n_FA);
}

ErrorMetrics evaluate_attack(const DefenderModel& model, const FeatureMatrix& raw_features) {
    if (raw_features.rows() < 1) throw DegenerateMetricsError("attack set is empty");
    long accepted = 0;
    for (const auto& c : classify(model, raw_features)) {
        if (c.label == SourceLabel::Intended) ++accepted;
    }
    return metrics_from_counts(raw_features.rows(), 0, 0, accepted);
}

ErrorMetrics evaluate_attack(const DefenderModel& model, std::span<const IqFrame> frames) {
    return evaluate_attack(model, frames_to_features(frames));
}

double accuracy(const DefenderModel& model, const LabeledDataset& dataset) {
    const auto results = classify(model, dataset.features);
    long correct = 0;
    for (std::size_t i = 0; i < results.size(); ++i) {
        const int said = results[i].label == SourceLabel::Intended ? 1 : 0;
        if (said == dataset.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(results.size());
}

}  // namespace spoofsim
