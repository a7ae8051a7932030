#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "spoofsim/defender.hpp"
#include "spoofsim/gan_attack.hpp"
#include "spoofsim/scenario.hpp"

namespace spoofsim {

/// A_T test positions of the mobility sweep.
std::vector<Position> mobility_positions();

struct AttackOutcome {
    AttackKind kind = AttackKind::Random;
    Position position;
    ErrorMetrics metrics;
};

struct SeedResult {
    std::uint64_t seed = 0;
    /// Set when this seed failed; every other field is then unspecified.
    std::optional<std::string> error;
    ErrorMetrics defender_metrics;
    double defender_final_loss = 0.0;
    std::string defender_digest;
    std::vector<AttackOutcome> attacks;
    /// GAN epochs and convergence flag; zero / false when no GAN was trained.
    int gan_epochs = 0;
    bool gan_converged = false;
    double wall_seconds = 0.0;
};

/// Mean and sample standard deviation over the seeds that succeeded.
struct Summary {
    double mean = 0.0;
    double std = 0.0;
    int count = 0;
};

Summary summarize(std::span<const double> values);

struct AttackSummary {
    AttackKind kind = AttackKind::Random;
    Position position;
    Summary success;
};

struct ExperimentResult {
    std::string scenario_digest;
    std::vector<AttackKind> attacks;
    std::vector<Position> positions;
    std::vector<std::uint64_t> seeds;
    std::vector<SeedResult> per_seed;
    Summary defender_max_error;
    Summary defender_e_md;
    Summary defender_e_fa;
    std::vector<AttackSummary> summaries;
    Summary gan_epochs;
    int gan_converged_seeds = 0;
    double wall_seconds = 0.0;
    std::vector<std::string> artifacts;

    /// Summary for (kind, position); throws Error when absent.
    const AttackSummary& summary(AttackKind kind, const Position& position) const;
};

struct RunOptions {
    /// Attacks to execute per seed; empty means the scenario's attack_kind.
    std::vector<AttackKind> attacks;
    /// Worker threads across seeds. Results do not depend on this value.
    int jobs = 1;
    /// Directory for per-seed model files; empty disables them.
    std::filesystem::path artifact_dir;
    /// Per-seed progress lines (seed start/finish), may be null.
    std::ostream* log = nullptr;
};

/// Defender training and evaluation only.
struct DefenderRun {
    LabeledDataset training_set;
    DefenderModel model;
    ErrorMetrics test_metrics;
};
DefenderRun run_defender(const ScenarioConfig& config, std::uint64_t seed);

/// One seed: defender, then every requested attack at every attack position.
SeedResult run_seed(const ScenarioConfig& config, std::uint64_t seed, const RunOptions& options = {});

/// Runs every seed, records per-seed failures, aggregates in seed order.
/// Throws Error if every seed failed.
ExperimentResult run_experiment(const ScenarioConfig& config, std::span<const std::uint64_t> seeds,
                                const RunOptions& options = {});

/// Random, replay and GAN attacks at A_T's configured position plus the GAN
/// mobility sweep, over the given seeds.
ExperimentResult reproduce_tables(const ScenarioConfig& config, std::span<const std::uint64_t> seeds,
                                  const RunOptions& options = {});

enum class OutputFormat { Json, Csv, Table };
OutputFormat output_format_from_string(std::string_view s);

nlohmann::json result_to_json(const ExperimentResult& result);
std::string result_to_csv(const ExperimentResult& result);
/// Aligned text: attack rows in random/replay/GAN order at A_T's configured
/// position, then the GAN rows for every other position.
std::string result_to_table(const ExperimentResult& result);
void emit_results(const ExperimentResult& result, OutputFormat format, std::ostream& out);

struct CsvRow {
    AttackKind attack = AttackKind::Random;
    std::uint64_t seed = 0;
    Position position;
    double e_md = 0.0;
    double e_fa = 0.0;
    double success = 0.0;
    int epochs = 0;
};
inline constexpr const char* kCsvHeader = "attack,seed,position_x,position_y,e_MD,e_FA,success,epochs";
/// Parses result_to_csv output. Throws ParseError on malformed input.
std::vector<CsvRow> parse_results_csv(std::string_view text);

/// Seed list from "N" or "a..b" (inclusive).
std::vector<std::uint64_t> parse_seed_range(std::string_view spec);

struct GradcheckReport {
    double classifier_error = 0.0;
    std::size_t classifier_parameters = 0;
    double gan_error = 0.0;
    std::size_t gan_parameters = 0;
};
/// Central-difference checks on a [6,5,4,2] softmax classifier and on a tiny
/// generator -> channel -> discriminator composition.
GradcheckReport run_gradchecks(std::uint64_t seed);

}  // namespace spoofsim
