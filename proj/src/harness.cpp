#include "spoofsim/harness.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <thread>

#include "spoofsim/errors.hpp"

namespace spoofsim {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<IqFrame> random_attack_frames(const ScenarioConfig& c, const Position& p, int n, RandomStream& rng) {
    NodeConfig tx = c.node(NodeId::AT);
    tx.position = p;
    const double d = distance(p, c.node(NodeId::R).position);
    std::vector<IqFrame> frames;
    frames.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) frames.push_back(synthesize_random_frame(tx, draw_channel(d, c.channel, rng), rng));
    return frames;
}

std::vector<IqFrame> replay_attack_frames(const ScenarioConfig& c, const Position& p, int n, RandomStream& rng) {
    const NodeConfig& t = c.node(NodeId::T);
    NodeConfig relay = c.node(NodeId::AT);
    relay.position = p;
    const double d1 = distance(t.position, p);
    const double d2 = distance(p, c.node(NodeId::R).position);
    std::vector<IqFrame> frames;
    frames.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const auto ch1 = draw_channel(d1, c.channel, rng);
        const auto ch2 = draw_channel(d2, c.channel, rng);
        frames.push_back(synthesize_replay_frame(c.intended_payload, t, relay, ch1, ch2));
    }
    return frames;
}

std::string attack_tag(AttackKind kind) { return std::string("attack-") + to_string(kind); }

nlohmann::json summary_json(const Summary& s) { return {{"mean", s.mean}, {"std", s.std}, {"count", s.count}}; }

nlohmann::json metrics_json(const ErrorMetrics& m) {
    nlohmann::json j = {{"n", m.n}, {"n_T", m.n_T}, {"n_MD", m.n_MD}, {"n_FA", m.n_FA},
                        {"success_probability", m.success_probability}};
    j["e_MD"] = m.e_MD ? nlohmann::json(*m.e_MD) : nlohmann::json(nullptr);
    j["e_FA"] = m.e_FA ? nlohmann::json(*m.e_FA) : nlohmann::json(nullptr);
    return j;
}

nlohmann::json position_json(const Position& p) { return nlohmann::json::array({p.x, p.y}); }

std::string format_double(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

std::string percent(const Summary& s) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(1) << 100.0 * s.mean << "% +/- " << 100.0 * s.std << "%";
    return os.str();
}

std::string position_label(const Position& p) {
    std::ostringstream os;
    os << "(" << p.x << "," << p.y << ")";
    return os.str();
}

const char* table_name(AttackKind kind) {
    switch (kind) {
        case AttackKind::Random: return "Random signal";
        case AttackKind::Replay: return "Replay";
        case AttackKind::Gan: return "GAN-based spoofing";
    }
    return "?";
}

template <typename T>
T parse_number(std::string_view field, const char* what) {
    T value{};
    const auto* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, value);
    if (ec != std::errc() || ptr != end) throw ParseError(std::string("bad ") + what + " '" + std::string(field) + "'");
    return value;
}

}  // namespace

std::vector<Position> mobility_positions() { return {{0.0, 10.0}, {0.0, 11.0}, {0.0, 15.0}, {0.0, 20.0}}; }

Summary summarize(std::span<const double> values) {
    Summary s;
    s.count = static_cast<int>(values.size());
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    if (values.size() > 1) {
        double ss = 0.0;
        for (double v : values) ss += (v - s.mean) * (v - s.mean);
        s.std = std::sqrt(ss / static_cast<double>(values.size() - 1));
    }
    return s;
}

const AttackSummary& ExperimentResult::summary(AttackKind kind, const Position& position) const {
    for (const auto& s : summaries) {
        if (s.kind == kind && s.position == position) return s;
    }
    throw Error(std::string("no ") + to_string(kind) + " result at " + position_label(position));
}

DefenderRun run_defender(const ScenarioConfig& config, std::uint64_t seed) {
    config.validate();
    DefenderRun run;
    auto train_rng = rng_substream(seed, "defender-train");
    const int n_intended = config.n_train / 2;
    run.training_set = build_training_set(config, n_intended, config.n_train - n_intended, train_rng);
    run.model = train_defender(run.training_set, config.defender, seed);
    auto test_rng = rng_substream(seed, "defender-test");
    const auto test = build_test_frames(config, config.n_test, test_rng);
    run.test_metrics = evaluate(run.model, test);
    return run;
}

SeedResult run_seed(const ScenarioConfig& config, std::uint64_t seed, const RunOptions& options) {
    const auto start = Clock::now();
    SeedResult r;
    r.seed = seed;
    const auto defender = run_defender(config, seed);
    r.defender_metrics = defender.test_metrics;
    r.defender_final_loss = defender.model.loss_history.back();
    r.defender_digest = defender.model.digest();

    const auto kinds = options.attacks.empty() ? std::vector<AttackKind>{config.attack_kind} : options.attacks;
    const auto positions = config.attack_positions();
    std::optional<GanState> gan;
    for (AttackKind kind : kinds) {
        if (kind == AttackKind::Gan && !gan) {
            gan = train_gan(config, seed);
            r.gan_epochs = gan->epoch;
            r.gan_converged = gan->converged;
        }
        for (std::size_t i = 0; i < positions.size(); ++i) {
            auto rng = rng_substream(seed, attack_tag(kind), i);
            AttackOutcome o{kind, positions[i], {}};
            switch (kind) {
                case AttackKind::Random:
                    o.metrics = evaluate_attack(defender.model, random_attack_frames(config, positions[i], config.n_attack, rng));
                    break;
                case AttackKind::Replay:
                    o.metrics = evaluate_attack(defender.model, replay_attack_frames(config, positions[i], config.n_attack, rng));
                    break;
                case AttackKind::Gan:
                    o.metrics = spoof_attack(*gan, defender.model, config, positions[i], config.n_attack, rng);
                    break;
            }
            r.attacks.push_back(o);
        }
    }
    if (!options.artifact_dir.empty()) {
        std::filesystem::create_directories(options.artifact_dir);
        const auto stem = "seed" + std::to_string(seed);
        std::ofstream(options.artifact_dir / ("defender-" + stem + ".json")) << defender.model.to_json().dump();
        if (gan) std::ofstream(options.artifact_dir / ("gan-" + stem + ".json")) << gan_state_to_json(*gan).dump();
    }
    r.wall_seconds = seconds_since(start);
    return r;
}

ExperimentResult run_experiment(const ScenarioConfig& config, std::span<const std::uint64_t> seeds,
                                const RunOptions& options) {
    config.validate();
    if (seeds.empty()) throw ConfigError("at least one seed is required");
    const auto start = Clock::now();
    ExperimentResult res;
    res.scenario_digest = scenario_digest(config);
    res.attacks = options.attacks.empty() ? std::vector<AttackKind>{config.attack_kind} : options.attacks;
    res.positions = config.attack_positions();
    res.seeds.assign(seeds.begin(), seeds.end());
    res.per_seed.resize(seeds.size());

    std::mutex log_mutex;
    auto log = [&](const std::string& line) {
        if (!options.log) return;
        std::lock_guard lock(log_mutex);
        *options.log << line << std::endl;
    };
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (std::size_t i = next++; i < seeds.size(); i = next++) {
            log("seed " + std::to_string(seeds[i]) + ": started");
            try {
                res.per_seed[i] = run_seed(config, seeds[i], options);
                std::ostringstream os;
                os << "seed " << seeds[i] << ": done in " << std::fixed << std::setprecision(1)
                   << res.per_seed[i].wall_seconds << " s";
                log(os.str());
            } catch (const std::exception& e) {
                res.per_seed[i] = SeedResult{};
                res.per_seed[i].seed = seeds[i];
                res.per_seed[i].error = e.what();
                log("seed " + std::to_string(seeds[i]) + ": failed: " + e.what());
            }
        }
    };
    const int jobs = std::clamp(options.jobs, 1, static_cast<int>(seeds.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    std::vector<double> max_err, e_md, e_fa, epochs;
    for (const auto& s : res.per_seed) {
        if (s.error) continue;
        max_err.push_back(s.defender_metrics.max_error());
        e_md.push_back(*s.defender_metrics.e_MD);
        e_fa.push_back(*s.defender_metrics.e_FA);
        if (s.gan_epochs > 0) {
            epochs.push_back(s.gan_epochs);
            if (s.gan_converged) ++res.gan_converged_seeds;
        }
    }
    if (max_err.empty()) {
        throw Error("every seed failed; first error: " + res.per_seed.front().error.value_or("?"));
    }
    res.defender_max_error = summarize(max_err);
    res.defender_e_md = summarize(e_md);
    res.defender_e_fa = summarize(e_fa);
    res.gan_epochs = summarize(epochs);
    for (AttackKind kind : res.attacks) {
        for (const auto& p : res.positions) {
            std::vector<double> v;
            for (const auto& s : res.per_seed) {
                if (s.error) continue;
                for (const auto& a : s.attacks) {
                    if (a.kind == kind && a.position == p) v.push_back(a.metrics.success_probability);
                }
            }
            res.summaries.push_back({kind, p, summarize(v)});
        }
    }
    if (!options.artifact_dir.empty()) {
        for (const auto& s : res.per_seed) {
            if (s.error) continue;
            const auto stem = "seed" + std::to_string(s.seed) + ".json";
            res.artifacts.push_back((options.artifact_dir / ("defender-" + stem)).string());
            if (s.gan_epochs > 0) res.artifacts.push_back((options.artifact_dir / ("gan-" + stem)).string());
        }
    }
    res.wall_seconds = seconds_since(start);
    return res;
}

ExperimentResult reproduce_tables(const ScenarioConfig& config, std::span<const std::uint64_t> seeds,
                                  const RunOptions& options) {
    ScenarioConfig c = config;
    std::vector<Position> positions{c.node(NodeId::AT).position};
    for (const auto& p : mobility_positions()) {
        if (!(p == positions.front())) positions.push_back(p);
    }
    c.test_positions = positions;
    RunOptions o = options;
    o.attacks = {AttackKind::Random, AttackKind::Replay, AttackKind::Gan};
    return run_experiment(c, seeds, o);
}

OutputFormat output_format_from_string(std::string_view s) {
    if (s == "json") return OutputFormat::Json;
    if (s == "csv") return OutputFormat::Csv;
    if (s == "table") return OutputFormat::Table;
    throw ParseError("unknown format '" + std::string(s) + "' (expected json, csv or table)");
}

nlohmann::json result_to_json(const ExperimentResult& r) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["scenario_digest"] = r.scenario_digest;
    j["attacks"] = nlohmann::json::array();
    for (auto k : r.attacks) j["attacks"].push_back(to_string(k));
    j["positions"] = nlohmann::json::array();
    for (const auto& p : r.positions) j["positions"].push_back(position_json(p));
    j["seeds"] = r.seeds;
    j["per_seed"] = nlohmann::json::array();
    for (const auto& s : r.per_seed) {
        nlohmann::json e = {{"seed", s.seed}};
        if (s.error) {
            e["error"] = *s.error;
        } else {
            e["defender"] = metrics_json(s.defender_metrics);
            e["defender"]["final_loss"] = s.defender_final_loss;
            e["defender"]["digest"] = s.defender_digest;
            e["attacks"] = nlohmann::json::array();
            for (const auto& a : s.attacks) {
                e["attacks"].push_back(
                    {{"kind", to_string(a.kind)}, {"position", position_json(a.position)}, {"metrics", metrics_json(a.metrics)}});
            }
            e["gan_epochs"] = s.gan_epochs;
            e["gan_converged"] = s.gan_converged;
            e["wall_seconds"] = s.wall_seconds;
        }
        j["per_seed"].push_back(e);
    }
    j["aggregate"]["defender_max_error"] = summary_json(r.defender_max_error);
    j["aggregate"]["defender_e_MD"] = summary_json(r.defender_e_md);
    j["aggregate"]["defender_e_FA"] = summary_json(r.defender_e_fa);
    j["aggregate"]["gan_epochs"] = summary_json(r.gan_epochs);
    j["aggregate"]["gan_converged_seeds"] = r.gan_converged_seeds;
    j["aggregate"]["attacks"] = nlohmann::json::array();
    for (const auto& s : r.summaries) {
        j["aggregate"]["attacks"].push_back(
            {{"kind", to_string(s.kind)}, {"position", position_json(s.position)}, {"success", summary_json(s.success)}});
    }
    j["wall_seconds"] = r.wall_seconds;
    j["artifacts"] = r.artifacts;
    return j;
}

std::string result_to_csv(const ExperimentResult& r) {
    std::ostringstream os;
    os << kCsvHeader << "\n";
    for (const auto& s : r.per_seed) {
        if (s.error) continue;
        for (const auto& a : s.attacks) {
            os << to_string(a.kind) << "," << s.seed << "," << format_double(a.position.x) << ","
               << format_double(a.position.y) << "," << format_double(*s.defender_metrics.e_MD) << ","
               << format_double(*s.defender_metrics.e_FA) << "," << format_double(a.metrics.success_probability)
               << "," << (a.kind == AttackKind::Gan ? s.gan_epochs : 0) << "\n";
        }
    }
    return os.str();
}

std::string result_to_table(const ExperimentResult& r) {
    std::ostringstream os;
    const int ok = r.defender_max_error.count;
    os << "Seeds: " << ok << " of " << r.seeds.size() << " succeeded; values are mean +/- sample std\n\n";
    os << "Defender test errors\n";
    os << "  " << std::left << std::setw(24) << "e_MD" << percent(r.defender_e_md) << "\n";
    os << "  " << std::left << std::setw(24) << "e_FA" << percent(r.defender_e_fa) << "\n";
    os << "  " << std::left << std::setw(24) << "max(e_MD, e_FA)" << percent(r.defender_max_error) << "\n\n";

    if (r.positions.empty()) return os.str();
    const Position& home = r.positions.front();
    os << "Success probability of spoofing attack by different methods, A_T at " << position_label(home) << "\n";
    os << "  " << std::left << std::setw(24) << "Method" << "Success probability\n";
    for (AttackKind kind : {AttackKind::Random, AttackKind::Replay, AttackKind::Gan}) {
        for (const auto& s : r.summaries) {
            if (s.kind == kind && s.position == home) {
                os << "  " << std::left << std::setw(24) << table_name(kind) << percent(s.success) << "\n";
            }
        }
    }
    bool has_sweep = false;
    for (const auto& s : r.summaries) has_sweep = has_sweep || (s.kind == AttackKind::Gan && r.positions.size() > 1);
    if (has_sweep) {
        os << "\nImpact of A_T's mobility on GAN-based spoofing success probability\n";
        os << "  " << std::left << std::setw(24) << "A_T location" << "Success probability\n";
        for (const auto& s : r.summaries) {
            if (s.kind == AttackKind::Gan) {
                os << "  " << std::left << std::setw(24) << position_label(s.position) << percent(s.success) << "\n";
            }
        }
    }
    if (r.gan_epochs.count > 0) {
        os << "\nGAN epochs: " << std::fixed << std::setprecision(1) << r.gan_epochs.mean << " +/- " << r.gan_epochs.std
           << "; converged on " << r.gan_converged_seeds << " of " << r.gan_epochs.count << " seeds\n";
    }
    return os.str();
}

void emit_results(const ExperimentResult& result, OutputFormat format, std::ostream& out) {
    switch (format) {
        case OutputFormat::Json: out << result_to_json(result).dump(2) << "\n"; break;
        case OutputFormat::Csv: out << result_to_csv(result); break;
        case OutputFormat::Table: out << result_to_table(result); break;
    }
    if (!out) throw Error("failed to write results");
}

std::vector<CsvRow> parse_results_csv(std::string_view text) {
    std::vector<CsvRow> rows;
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line) || line != kCsvHeader) throw ParseError("CSV header mismatch");
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string_view> f;
        std::string_view rest(line);
        for (std::size_t pos; (pos = rest.find(',')) != std::string_view::npos; rest.remove_prefix(pos + 1)) {
            f.push_back(rest.substr(0, pos));
        }
        f.push_back(rest);
        if (f.size() != 8) throw ParseError("CSV line " + std::to_string(line_no) + ": expected 8 fields");
        try {
            CsvRow r;
            r.attack = attack_kind_from_string(f[0]);
            r.seed = parse_number<std::uint64_t>(f[1], "seed");
            r.position = {parse_number<double>(f[2], "position_x"), parse_number<double>(f[3], "position_y")};
            r.e_md = parse_number<double>(f[4], "e_MD");
            r.e_fa = parse_number<double>(f[5], "e_FA");
            r.success = parse_number<double>(f[6], "success");
            r.epochs = parse_number<int>(f[7], "epochs");
            rows.push_back(r);
        } catch (const ParseError& e) {
            throw ParseError("CSV line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return rows;
}

std::vector<std::uint64_t> parse_seed_range(std::string_view spec) {
    const auto dots = spec.find("..");
    if (dots == std::string_view::npos) return {parse_number<std::uint64_t>(spec, "seed")};
    const auto a = parse_number<std::uint64_t>(spec.substr(0, dots), "seed range start");
    const auto b = parse_number<std::uint64_t>(spec.substr(dots + 2), "seed range end");
    if (b < a) throw ParseError("seed range end precedes start");
    if (b - a >= 100000) throw ParseError("seed range too large");
    std::vector<std::uint64_t> out;
    for (auto s = a; s <= b; ++s) out.push_back(s);
    return out;
}

GradcheckReport run_gradchecks(std::uint64_t seed) {
    GradcheckReport report;
    auto rng = rng_substream(seed, "gradcheck");

    const std::vector<int> dims{6, 5, 4, 2};
    const auto clf = nn::init_model(dims, nn::HiddenActivation::Tanh, nn::OutputActivation::Softmax, rng);
    nn::Matrix x(8, 6);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    std::vector<int> classes;
    for (int i = 0; i < 8; ++i) classes.push_back(static_cast<int>(rng.below(2)));
    const auto c = nn::gradient_check(clf, x, nn::one_hot(classes, 2), nn::LossKind::CrossEntropy);
    report.classifier_error = c.max_relative_error;
    report.classifier_parameters = c.parameters_checked;

    // z_dim 3, generator [3, 4, 8] emits 4 complex samples; discriminator [8, 5, 1].
    GanState g;
    g.generator = nn::init_model(std::vector<int>{3, 4, 8}, nn::HiddenActivation::ReLU,
                                 nn::OutputActivation::ScaledTanh, rng, 2.0);
    g.discriminator = nn::init_model(std::vector<int>{8, 5, 1}, nn::HiddenActivation::ReLU,
                                     nn::OutputActivation::Sigmoid, rng);
    g.input_normalization.mean = Eigen::RowVectorXd(8);
    g.input_normalization.std = Eigen::RowVectorXd(8);
    for (int i = 0; i < 8; ++i) {
        g.input_normalization.mean(i) = 0.1 * rng.normal();
        g.input_normalization.std(i) = rng.uniform(0.5, 1.5);
    }
    const nn::Matrix z = draw_noise(5, 3, rng);
    std::vector<ChannelRealization> ch;
    for (int i = 0; i < 5; ++i) ch.push_back({rng.uniform(0.5, 2.0), rng.uniform(0.0, kTwoPi)});
    const auto gc = gan_gradient_check(g, z, ch);
    report.gan_error = gc.max_relative_error;
    report.gan_parameters = gc.parameters_checked;
    return report;
}

}  // namespace spoofsim
