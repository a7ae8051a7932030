#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "spoofsim/neural.hpp"
#include "spoofsim/scenario.hpp"
#include "spoofsim/signal_model.hpp"

namespace spoofsim {

/// Per-feature standardization frozen at fit time.
struct Normalization {
    Eigen::RowVectorXd mean;
    Eigen::RowVectorXd std;

    /// Column mean and population std, with std floored at `std_floor`.
    static Normalization fit(const FeatureMatrix& features, double std_floor = 1e-6);

    FeatureMatrix apply(const FeatureMatrix& features) const;
    std::size_t width() const { return static_cast<std::size_t>(mean.size()); }

    nlohmann::json to_json() const;
    static Normalization from_json(const nlohmann::json& doc);
};

/// Raw feature rows with labels (1 = Intended) and the normalization fitted
/// on them. Features are stored unnormalized.
struct LabeledDataset {
    FeatureMatrix features;
    std::vector<int> labels;
    Normalization normalization;

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

/// Eq.-style counts and rates. Rates derive from the integer counts, so the
/// identities e_MD = n_MD / n_T and e_FA = n_FA / (n - n_T) hold exactly.
struct ErrorMetrics {
    long n = 0;
    long n_T = 0;
    long n_MD = 0;
    long n_FA = 0;
    /// Absent when the corresponding class is missing from the test set.
    std::optional<double> e_MD;
    std::optional<double> e_FA;
    /// Fraction of Other frames labeled Intended; equals e_FA when defined.
    double success_probability = 0.0;

    /// Requires both rates; throws DegenerateMetricsError otherwise.
    double max_error() const;
};

/// Builds metrics from counts. Throws ConfigError for inconsistent counts.
ErrorMetrics metrics_from_counts(long n, long n_T, long n_MD, long n_FA);

/// R's authenticator: a [800, w, ..., w, 2] softmax network plus the input
/// normalization. Output column 1 is the Intended probability.
struct DefenderModel {
    nn::MlpModel network;
    Normalization normalization;
    std::vector<double> loss_history;

    nlohmann::json to_json() const;
    static DefenderModel from_json(const nlohmann::json& doc);

    /// Hex digest of the parameters and normalization.
    std::string digest() const;
};

struct Classification {
    SourceLabel label = SourceLabel::Other;
    double intended_probability = 0.0;
    double other_probability = 0.0;
};

/// n_intended frames from T and n_other random frames from A_T's position,
/// each Other frame with a fresh uniform device phase, rows shuffled.
LabeledDataset build_training_set(const ScenarioConfig& scenario, int n_intended, int n_other, RandomStream& rng);

/// Frames with ground truth: each frame is Intended with probability 1/2.
std::vector<IqFrame> build_test_frames(const ScenarioConfig& scenario, int n, RandomStream& rng);

/// Adam (or SGD) on cross-entropy with minibatches drawn from shuffled
/// passes over the dataset. Initialization and batch order come from the
/// "defender-init" and "defender-batches" substreams of `seed`.
DefenderModel train_defender(const LabeledDataset& dataset, const DefenderConfig& config, std::uint64_t seed);

Classification classify(const DefenderModel& model, const IqFrame& frame);
std::vector<Classification> classify(const DefenderModel& model, const FeatureMatrix& raw_features);

/// Misdetection and false-alarm accounting over frames with ground truth.
/// Throws DegenerateMetricsError if either class is absent.
ErrorMetrics evaluate(const DefenderModel& model, std::span<const IqFrame> frames);

/// Accounting for an all-attack set: only success_probability (and e_FA) are
/// populated.
ErrorMetrics evaluate_attack(const DefenderModel& model, const FeatureMatrix& raw_features);
ErrorMetrics evaluate_attack(const DefenderModel& model, std::span<const IqFrame> frames);

/// Training-set accuracy, used as a sanity check.
double accuracy(const DefenderModel& model, const LabeledDataset& dataset);

}  // namespace spoofsim
