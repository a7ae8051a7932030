#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "spoofsim/defender.hpp"
#include "spoofsim/errors.hpp"
#include "spoofsim/harness.hpp"

using namespace spoofsim;

namespace {

/// One trained defender shared by the slower cases.
const DefenderRun& trained() {
    static const DefenderRun run = run_defender(default_scenario(), 1);
    return run;
}

}  // namespace

TEST_CASE("metrics from the reported counts") {
    const auto m = metrics_from_counts(1000, 504, 37, 39);
    CHECK(*m.e_MD == doctest::Approx(37.0 / 504.0));
    CHECK(*m.e_FA == doctest::Approx(39.0 / 496.0));
    CHECK(100.0 * *m.e_MD == doctest::Approx(7.34).epsilon(1e-3));
    CHECK(100.0 * *m.e_FA == doctest::Approx(7.86).epsilon(1e-3));
    CHECK(m.success_probability == *m.e_FA);
    CHECK(m.max_error() == *m.e_FA);
}

TEST_CASE("count identities hold exactly") {
    for (long n_T = 1; n_T < 40; n_T += 3) {
        for (long md = 0; md <= n_T; md += 2) {
            const auto m = metrics_from_counts(40, n_T, md, 0);
            CHECK(*m.e_MD * static_cast<double>(n_T) == doctest::Approx(static_cast<double>(md)).epsilon(1e-15));
            CHECK(*m.e_MD == static_cast<double>(md) / static_cast<double>(n_T));
        }
    }
    CHECK_THROWS_AS(metrics_from_counts(10, 11, 0, 0), ConfigError);
    CHECK_THROWS_AS(metrics_from_counts(10, 5, 6, 0), ConfigError);
    CHECK_THROWS_AS(metrics_from_counts(10, 5, 0, 6), ConfigError);
}

TEST_CASE("single-class metrics leave the missing rate empty") {
    const auto attack = metrics_from_counts(100, 0, 0, 12);
    CHECK_FALSE(attack.e_MD.has_value());
    CHECK(*attack.e_FA == doctest::Approx(0.12));
    CHECK(attack.success_probability == doctest::Approx(0.12));
    CHECK_THROWS_AS(attack.max_error(), DegenerateMetricsError);
}

TEST_CASE("normalization standardizes the fitting set") {
    auto rng = rng_substream(2, "norm");
    FeatureMatrix x(300, 5);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = 4.0 + 3.0 * rng.normal();
    x.col(3).setConstant(2.0);
    const auto n = Normalization::fit(x);
    const auto z = n.apply(x);
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
        CHECK(std::abs(z.col(c).mean()) < 1e-9);
        if (c != 3) CHECK(std::sqrt(z.col(c).array().square().mean()) == doctest::Approx(1.0).epsilon(1e-9));
    }
    CHECK(n.std(3) == 1e-6);
    CHECK_THROWS_AS(n.apply(FeatureMatrix::Zero(2, 4)), ShapeError);
}

TEST_CASE("training set composition and determinism") {
    const auto s = default_scenario();
    auto a = rng_substream(4, "defender-train");
    auto b = rng_substream(4, "defender-train");
    const auto d1 = build_training_set(s, 500, 500, a);
    const auto d2 = build_training_set(s, 500, 500, b);
    CHECK(d1.size() == 1000);
    CHECK(d1.features.cols() == static_cast<Eigen::Index>(kFeatureWidth));
    double label_mean = 0.0;
    for (int y : d1.labels) label_mean += y;
    CHECK(label_mean / 1000.0 == doctest::Approx(0.5));
    CHECK(d1.features == d2.features);
    CHECK(d1.labels == d2.labels);
    // Shuffled: the first hundred rows are not all one class.
    const auto head = std::count(d1.labels.begin(), d1.labels.begin() + 100, 1);
    CHECK(head > 20);
    CHECK(head < 80);
    const auto z = d1.normalization.apply(d1.features);
    CHECK(z.colwise().mean().cwiseAbs().maxCoeff() < 1e-9);
    CHECK(((z.array().square().colwise().mean().sqrt()) - 1.0).abs().maxCoeff() < 1e-9);
    CHECK_THROWS_AS(build_training_set(s, 0, 10, a), ConfigError);
}

TEST_CASE("trained defender quality") {
    const auto& run = trained();
    CHECK(run.model.network.layer_dims == std::vector<int>{800, 50, 50, 50, 2});
    CHECK(run.model.loss_history.size() == 1000);
    CHECK(run.model.loss_history.back() < 0.3);
    CHECK(accuracy(run.model, run.training_set) >= 0.85);
    CHECK(run.test_metrics.n == 1000);
    CHECK(run.test_metrics.max_error() <= 0.15);
}

TEST_CASE("classification probabilities and threshold") {
    const auto& run = trained();
    const auto results = classify(run.model, run.training_set.features.topRows(200));
    for (const auto& c : results) {
        CHECK(c.intended_probability + c.other_probability == doctest::Approx(1.0).epsilon(1e-12));
        CHECK((c.label == SourceLabel::Intended) == (c.intended_probability >= 0.5));
    }
    auto rng = rng_substream(1, "classify");
    const auto frames = build_test_frames(default_scenario(), 5, rng);
    for (std::size_t i = 0; i < frames.size(); ++i) {
        const auto one = classify(run.model, frames[i]);
        const auto batch = classify(run.model, frames_to_features(frames))[i];
        CHECK(one.intended_probability == doctest::Approx(batch.intended_probability).epsilon(1e-12));
    }
}

TEST_CASE("training is deterministic per seed") {
    auto s = default_scenario();
    s.defender.train.steps = 50;
    auto rng = rng_substream(9, "defender-train");
    const auto ds = build_training_set(s, 100, 100, rng);
    const auto a = train_defender(ds, s.defender, 9);
    const auto b = train_defender(ds, s.defender, 9);
    const auto c = train_defender(ds, s.defender, 10);
    CHECK(a.digest() == b.digest());
    CHECK(a.loss_history == b.loss_history);
    CHECK(a.digest() != c.digest());
}

TEST_CASE("evaluate is permutation invariant and rejects single-class sets") {
    const auto& run = trained();
    auto rng = rng_substream(3, "perm");
    auto frames = build_test_frames(default_scenario(), 300, rng);
    const auto m1 = evaluate(run.model, frames);
    std::reverse(frames.begin(), frames.end());
    std::rotate(frames.begin(), frames.begin() + 77, frames.end());
    const auto m2 = evaluate(run.model, frames);
    CHECK(m1.n_T == m2.n_T);
    CHECK(m1.n_MD == m2.n_MD);
    CHECK(m1.n_FA == m2.n_FA);

    std::vector<IqFrame> intended;
    for (const auto& f : frames) {
        if (f.source_label == SourceLabel::Intended) intended.push_back(f);
    }
    CHECK_THROWS_AS(evaluate(run.model, intended), DegenerateMetricsError);
}

TEST_CASE("attack accounting equals e_FA on the same set") {
    const auto& run = trained();
    auto rng = rng_substream(5, "attack-acc");
    auto frames = build_test_frames(default_scenario(), 400, rng);
    std::vector<IqFrame> other;
    for (const auto& f : frames) {
        if (f.source_label == SourceLabel::Other) other.push_back(f);
    }
    const auto attack = evaluate_attack(run.model, other);
    const auto mixed = evaluate(run.model, frames);
    CHECK(attack.n_FA == mixed.n_FA);
    CHECK(attack.success_probability == doctest::Approx(*mixed.e_FA).epsilon(1e-15));
}

TEST_CASE("perfect and coin-flip classifiers") {
    const auto perfect = metrics_from_counts(1000, 500, 0, 0);
    CHECK(*perfect.e_MD == 0.0);
    CHECK(*perfect.e_FA == 0.0);

    auto rng = rng_substream(1, "coin");
    long n_T = 0, md = 0, fa = 0;
    for (int i = 0; i < 1000; ++i) {
        const bool truth = rng.below(2) == 1;
        const bool said = rng.below(2) == 1;
        if (truth) {
            ++n_T;
            if (!said) ++md;
        } else if (said) {
            ++fa;
        }
    }
    const auto coin = metrics_from_counts(1000, n_T, md, fa);
    CHECK(std::abs(*coin.e_MD - 0.5) <= 0.05);
    CHECK(std::abs(*coin.e_FA - 0.5) <= 0.05);
}

TEST_CASE("defender JSON round trip") {
    const auto& run = trained();
    const auto back = DefenderModel::from_json(nlohmann::json::parse(run.model.to_json().dump()));
    CHECK(back.digest() == run.model.digest());
    auto doc = run.model.to_json();
    doc["normalization"]["mean"] = nlohmann::json::array({1.0, 2.0});
    doc["normalization"]["std"] = nlohmann::json::array({1.0, 2.0});
    CHECK_THROWS_AS(DefenderModel::from_json(doc), ConfigError);
}
