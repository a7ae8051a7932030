// Command-line front end: train the defender, run attacks, sweep A_T's
// position, reproduce both result tables, and check gradients.

#include <cstdlib>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "spoofsim/errors.hpp"
#include "spoofsim/harness.hpp"

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
    std::string config_path;
    std::string seeds;
    std::string out_dir;
    std::string format = "table";
    int max_epochs = 0;
    int jobs = 1;
    bool save_models = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonOptions& o, const std::string& default_seeds) {
    o.seeds = default_seeds;
    cmd->add_option("--config", o.config_path, "Scenario YAML file (omitted keys keep their defaults)");
    cmd->add_option("--seed,--seeds", o.seeds, "Seed N or inclusive range a..b")->capture_default_str();
    cmd->add_option("--out", o.out_dir, "Output directory (default: $SPOOFSIM_OUT, else stdout only)");
    cmd->add_option("--format", o.format, "json, csv or table")
        ->check(CLI::IsMember({"json", "csv", "table"}))
        ->capture_default_str();
    cmd->add_option("--max-epochs", o.max_epochs, "Cap on GAN training epochs")->check(CLI::PositiveNumber);
    cmd->add_option("--jobs", o.jobs, "Seeds run in parallel")->check(CLI::PositiveNumber)->capture_default_str();
    cmd->add_flag("--save-models", o.save_models, "Write per-seed defender and GAN models to --out");
    cmd->add_flag("--quiet", o.quiet, "Suppress progress lines on stderr");
}

spoofsim::ScenarioConfig load_config(const CommonOptions& o) {
    auto c = o.config_path.empty() ? spoofsim::default_scenario() : spoofsim::load_scenario(o.config_path);
    if (o.max_epochs > 0) c.gan.max_epochs = o.max_epochs;
    c.validate();
    return c;
}

std::filesystem::path output_dir(const CommonOptions& o) {
    if (!o.out_dir.empty()) return o.out_dir;
    if (const char* env = std::getenv("SPOOFSIM_OUT"); env && *env) return env;
    return {};
}

spoofsim::RunOptions run_options(const CommonOptions& o) {
    spoofsim::RunOptions r;
    r.jobs = o.jobs;
    r.log = o.quiet ? nullptr : &std::cerr;
    if (o.save_models) {
        r.artifact_dir = output_dir(o);
        if (r.artifact_dir.empty()) throw spoofsim::ConfigError("--save-models requires --out or SPOOFSIM_OUT");
    }
    return r;
}

void write_result(const spoofsim::ExperimentResult& result, const CommonOptions& o, const std::string& stem) {
    const auto format = spoofsim::output_format_from_string(o.format);
    spoofsim::emit_results(result, format, std::cout);
    const auto dir = output_dir(o);
    if (dir.empty()) return;
    std::filesystem::create_directories(dir);
    const char* ext = format == spoofsim::OutputFormat::Json ? ".json" : format == spoofsim::OutputFormat::Csv ? ".csv" : ".txt";
    std::ofstream file(dir / (stem + ext));
    spoofsim::emit_results(result, format, file);
    if (format != spoofsim::OutputFormat::Json) {
        std::ofstream json(dir / (stem + ".json"));
        spoofsim::emit_results(result, spoofsim::OutputFormat::Json, json);
    }
}

int train_defender_cmd(const CommonOptions& o) {
    const auto config = load_config(o);
    const auto seeds = spoofsim::parse_seed_range(o.seeds);
    const auto dir = output_dir(o);
    nlohmann::json rows = nlohmann::json::array();
    for (auto seed : seeds) {
        const auto run = spoofsim::run_defender(config, seed);
        const auto& m = run.test_metrics;
        rows.push_back({{"seed", seed},
                        {"e_MD", *m.e_MD},
                        {"e_FA", *m.e_FA},
                        {"n", m.n},
                        {"n_T", m.n_T},
                        {"n_MD", m.n_MD},
                        {"n_FA", m.n_FA},
                        {"final_loss", run.model.loss_history.back()},
                        {"train_accuracy", spoofsim::accuracy(run.model, run.training_set)},
                        {"digest", run.model.digest()}});
        if (o.format == "table") {
            std::cout << "seed " << seed << ": e_MD " << m.n_MD << "/" << m.n_T << " = " << 100.0 * *m.e_MD
                      << "%, e_FA " << m.n_FA << "/" << (m.n - m.n_T) << " = " << 100.0 * *m.e_FA << "%\n";
        } else if (o.format == "csv") {
            if (rows.size() == 1) std::cout << "seed,n,n_T,n_MD,n_FA,e_MD,e_FA\n";
            std::cout << seed << "," << m.n << "," << m.n_T << "," << m.n_MD << "," << m.n_FA << "," << *m.e_MD << ","
                      << *m.e_FA << "\n";
        }
        if (!dir.empty()) {
            std::filesystem::create_directories(dir);
            std::ofstream(dir / ("defender-seed" + std::to_string(seed) + ".json")) << run.model.to_json().dump();
        }
    }
    if (o.format == "json") std::cout << rows.dump(2) << "\n";
    return 0;
}

int attack_cmd(const CommonOptions& o, const std::string& kind) {
    auto config = load_config(o);
    config.attack_kind = spoofsim::attack_kind_from_string(kind);
    const auto seeds = spoofsim::parse_seed_range(o.seeds);
    const auto result = spoofsim::run_experiment(config, seeds, run_options(o));
    write_result(result, o, std::string("attack-") + kind);
    return 0;
}

int sweep_cmd(const CommonOptions& o) {
    auto config = load_config(o);
    config.attack_kind = spoofsim::AttackKind::Gan;
    if (config.test_positions.empty()) config.test_positions = spoofsim::mobility_positions();
    const auto seeds = spoofsim::parse_seed_range(o.seeds);
    write_result(spoofsim::run_experiment(config, seeds, run_options(o)), o, "sweep-mobility");
    return 0;
}

int tables_cmd(const CommonOptions& o) {
    const auto config = load_config(o);
    const auto seeds = spoofsim::parse_seed_range(o.seeds);
    write_result(spoofsim::reproduce_tables(config, seeds, run_options(o)), o, "tables");
    return 0;
}

int gradcheck_cmd(std::uint64_t seed) {
    const auto r = spoofsim::run_gradchecks(seed);
    constexpr double kTolerance = 1e-4;
    std::cout << "classifier [6,5,4,2]: max relative error " << r.classifier_error << " over "
              << r.classifier_parameters << " parameters\n";
    std::cout << "generator->channel->discriminator: max relative error " << r.gan_error << " over "
              << r.gan_parameters << " parameters\n";
    const bool ok = r.classifier_error < kTolerance && r.gan_error < kTolerance;
    std::cout << (ok ? "PASS" : "FAIL") << " (tolerance " << kTolerance << ")\n";
    return ok ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Physical-layer spoofing simulator"};
    app.require_subcommand(1);

    CommonOptions train_o, attack_o, sweep_o, tables_o;
    auto* train = app.add_subcommand("train-defender", "Train and evaluate R's classifier");
    add_common(train, train_o, "1");
    auto* attack = app.add_subcommand("attack", "Run one attack against the trained defender");
    add_common(attack, attack_o, "1");
    std::string kind = "gan";
    attack->add_option("--kind", kind, "random, replay or gan")
        ->check(CLI::IsMember({"random", "replay", "gan"}))
        ->capture_default_str();
    auto* sweep = app.add_subcommand("sweep-mobility", "GAN attack from several A_T test positions");
    add_common(sweep, sweep_o, "1..5");
    auto* tables = app.add_subcommand("reproduce-tables", "All three attacks plus the mobility sweep");
    add_common(tables, tables_o, "1..5");
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient verification");
    std::uint64_t grad_seed = 1;
    grad->add_option("--seed", grad_seed, "Seed for the random test models")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*train) return train_defender_cmd(train_o);
        if (*attack) return attack_cmd(attack_o, kind);
        if (*sweep) return sweep_cmd(sweep_o);
        if (*tables) return tables_cmd(tables_o);
        if (*grad) return gradcheck_cmd(grad_seed);
    } catch (const spoofsim::ValidationError& e) {
        std::cerr << "error: invalid scenario:\n";
        for (const auto& v : e.violations()) std::cerr << "  - " << v << "\n";
        return kExitValidation;
    } catch (const spoofsim::ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const spoofsim::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return 0;
}
