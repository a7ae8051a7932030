#include "spoofsim/scenario.hpp"

#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "spoofsim/errors.hpp"

namespace spoofsim {

namespace {

std::string join_violations(const std::vector<std::string>& v) {
    std::string msg = "invalid scenario";
    for (const auto& s : v) msg += "; " + s;
    return msg;
}

}  // namespace

ValidationError::ValidationError(std::vector<std::string> violations)
    : Error(join_violations(violations)), violations_(std::move(violations)) {}

const char* to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::Random: return "random";
        case AttackKind::Replay: return "replay";
        case AttackKind::Gan: return "gan";
    }
    return "?";
}

AttackKind attack_kind_from_string(std::string_view s) {
    if (s == "random") return AttackKind::Random;
    if (s == "replay") return AttackKind::Replay;
    if (s == "gan") return AttackKind::Gan;
    throw ParseError("unknown attack kind '" + std::string(s) + "' (expected random, replay or gan)");
}

void ConvergenceRule::validate() const {
    if (window < 1) throw ConfigError("convergence window must be >= 1");
    if (!(threshold > 0.0)) throw ConfigError("convergence threshold must be > 0");
}

void GanConfig::validate() const {
    std::vector<std::string> v;
    if (train.batch_size < 1) v.push_back("gan_batch_size must be >= 1");
    if (!(train.learning_rate > 0.0)) v.push_back("gan_learning_rate must be > 0");
    if (!(lr_decay > 0.0 && lr_decay <= 1.0)) v.push_back("gan_lr_decay must be in (0, 1]");
    if (max_epochs < 1) v.push_back("gan_max_epochs must be >= 1");
    if (z_dim < 1) v.push_back("gan_z_dim must be >= 1");
    if (hidden_width < 1 || hidden_layers < 1) v.push_back("gan hidden layers must be non-empty");
    if (real_samples < 1 || fake_samples < 1) v.push_back("gan sample counts must be > 0");
    if (rule.window < 1) v.push_back("convergence_window must be >= 1");
    if (!(rule.threshold > 0.0)) v.push_back("convergence_threshold must be > 0");
    if (!v.empty()) throw ValidationError(std::move(v));
}

std::vector<Position> ScenarioConfig::attack_positions() const {
    if (!test_positions.empty()) return test_positions;
    return {node(NodeId::AT).position};
}

void ScenarioConfig::validate() const {
    std::vector<std::string> v;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto& n = nodes[i];
        const std::string name = to_string(static_cast<NodeId>(i));
        if (static_cast<std::size_t>(n.id) != i) v.push_back("node slot " + name + " holds node " + to_string(n.id));
        if (!(n.transmit_power >= 0.0)) v.push_back("node " + name + " transmit power must be >= 0");
        if (!(n.device_phase >= 0.0 && n.device_phase < kTwoPi)) {
            v.push_back("node " + name + " device phase must be in [0, 2pi)");
        }
    }
    if (!(node(NodeId::T).transmit_power > 0.0)) v.push_back("T must have positive transmit power");
    if (!(node(NodeId::AT).transmit_power > 0.0)) v.push_back("A_T must have positive transmit power");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        for (std::size_t j = i + 1; j < nodes.size(); ++j) {
            if (nodes[i].position == nodes[j].position) {
                v.push_back(std::string("nodes ") + to_string(nodes[i].id) + " and " + to_string(nodes[j].id) +
                            " share a position");
            }
        }
    }
    for (const auto& p : test_positions) {
        if (p == node(NodeId::R).position || p == node(NodeId::T).position) {
            v.push_back("test position coincides with T or R");
        }
    }
    if (channel.phase_model == PhaseModel::PropagationScatter) {
        if (!(channel.wavelength > 0.0)) v.push_back("wavelength must be > 0");
        if (!(channel.scatter_std >= 0.0)) v.push_back("phase_scatter must be >= 0");
    }
    if (n_train < 2) v.push_back("n_train must be >= 2");
    if (n_test < 2) v.push_back("n_test must be >= 2");
    if (n_attack < 1) v.push_back("n_attack must be > 0");
    if (defender.train.batch_size < 1) v.push_back("defender_batch_size must be >= 1");
    if (defender.train.steps < 1) v.push_back("defender_steps must be >= 1");
    if (!(defender.train.learning_rate > 0.0)) v.push_back("defender_learning_rate must be > 0");
    if (defender.hidden_width < 1 || defender.hidden_layers < 1) v.push_back("defender hidden layers must be non-empty");
    try {
        gan.validate();
    } catch (const ValidationError& e) {
        v.insert(v.end(), e.violations().begin(), e.violations().end());
    }
    if (!v.empty()) throw ValidationError(std::move(v));
}

ScenarioConfig default_scenario() {
    ScenarioConfig c;
    constexpr double kPower = 1000.0;
    c.nodes[0] = {NodeId::T, {0.0, 0.0}, kPower, 1.0};
    c.nodes[1] = {NodeId::R, {10.0, 0.0}, 0.0, 0.0};
    c.nodes[2] = {NodeId::AT, {0.0, 10.0}, kPower, 6.2};
    c.nodes[3] = {NodeId::AR, {10.0, 0.1}, 0.0, 0.0};
    return c;
}

std::string payload_to_string(Payload bits) {
    std::string s(8, '0');
    for (int i = 0; i < 8; ++i) {
        if (bits & (1u << (7 - i))) s[static_cast<std::size_t>(i)] = '1';
    }
    return s;
}

namespace {

[[noreturn]] void fail_at(const YAML::Node& node, const std::string& what) {
    const auto mark = node.Mark();
    std::ostringstream os;
    if (mark.line >= 0) os << "line " << (mark.line + 1) << ": ";
    os << what;
    throw ParseError(os.str());
}

template <typename T>
T as(const YAML::Node& node, const std::string& key) {
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        fail_at(node, "field '" + key + "' has the wrong type");
    }
}

Position as_position(const YAML::Node& node, const std::string& key) {
    if (!node.IsSequence() || node.size() != 2) fail_at(node, "field '" + key + "' must be a [x, y] pair");
    return {as<double>(node[0], key), as<double>(node[1], key)};
}

NodeId node_id_from(const YAML::Node& node) {
    const auto s = as<std::string>(node, "id");
    if (s == "T") return NodeId::T;
    if (s == "R") return NodeId::R;
    if (s == "A_T") return NodeId::AT;
    if (s == "A_R") return NodeId::AR;
    fail_at(node, "unknown node id '" + s + "' (expected T, R, A_T or A_R)");
}

Payload payload_from(const YAML::Node& node) {
    const auto s = as<std::string>(node, "intended_payload");
    if (s.size() != 8 || s.find_first_not_of("01") != std::string::npos) {
        fail_at(node, "intended_payload must be 8 binary digits");
    }
    Payload bits = 0;
    for (char ch : s) bits = static_cast<Payload>((bits << 1) | (ch == '1' ? 1 : 0));
    return bits;
}

void apply_nodes(const YAML::Node& list, ScenarioConfig& c, std::vector<std::string>& violations) {
    if (!list.IsSequence()) fail_at(list, "'nodes' must be a list");
    std::set<NodeId> seen;
    for (const auto& entry : list) {
        if (!entry.IsMap()) fail_at(entry, "node entries must be maps");
        if (!entry["id"]) fail_at(entry, "node entry is missing 'id'");
        const NodeId id = node_id_from(entry["id"]);
        if (!seen.insert(id).second) {
            violations.push_back(std::string("duplicate node id ") + to_string(id));
            continue;
        }
        NodeConfig& n = c.node(id);
        for (const auto& kv : entry) {
            const auto key = kv.first.as<std::string>();
            if (key == "id") continue;
            if (key == "position") n.position = as_position(kv.second, key);
            else if (key == "power") n.transmit_power = as<double>(kv.second, key);
            else if (key == "device_phase") n.device_phase = wrap_phase(as<double>(kv.second, key));
            else fail_at(kv.first, "unknown node field '" + key + "'");
        }
    }
}

}  // namespace

ScenarioConfig parse_scenario(std::string_view document) {
    YAML::Node root;
    try {
        root = YAML::Load(std::string(document));
    } catch (const YAML::ParserException& e) {
        throw ParseError("line " + std::to_string(e.mark.line + 1) + ": " + e.msg);
    }
    ScenarioConfig c = default_scenario();
    if (root.IsNull()) {
        c.validate();
        return c;
    }
    if (!root.IsMap()) fail_at(root, "scenario document must be a map of key: value pairs");

    std::vector<std::string> violations;
    for (const auto& kv : root) {
        const auto key = kv.first.as<std::string>();
        const YAML::Node& val = kv.second;
        if (key == "schema_version") {
            const int v = as<int>(val, key);
            if (v != kScenarioSchemaVersion) fail_at(val, "unsupported schema_version " + std::to_string(v));
        } else if (key == "seed") {
            c.seed = as<std::uint64_t>(val, key);
        } else if (key == "attack") {
            try {
                c.attack_kind = attack_kind_from_string(as<std::string>(val, key));
            } catch (const ParseError& e) {
                fail_at(val, e.what());
            }
        } else if (key == "nodes") {
            apply_nodes(val, c, violations);
        } else if (key == "channel_phase_model") {
            const auto s = as<std::string>(val, key);
            if (s == "propagation") c.channel.phase_model = PhaseModel::PropagationScatter;
            else if (s == "uniform") c.channel.phase_model = PhaseModel::Uniform;
            else fail_at(val, "channel_phase_model must be 'propagation' or 'uniform'");
        } else if (key == "wavelength") {
            c.channel.wavelength = as<double>(val, key);
        } else if (key == "phase_scatter") {
            c.channel.scatter_std = as<double>(val, key);
        } else if (key == "intended_payload") {
            c.intended_payload = payload_from(val);
        } else if (key == "n_train") {
            c.n_train = as<int>(val, key);
        } else if (key == "n_test") {
            c.n_test = as<int>(val, key);
        } else if (key == "n_attack") {
            c.n_attack = as<int>(val, key);
        } else if (key == "defender_batch_size") {
            c.defender.train.batch_size = as<int>(val, key);
        } else if (key == "defender_steps") {
            c.defender.train.steps = as<int>(val, key);
        } else if (key == "defender_learning_rate") {
            c.defender.train.learning_rate = as<double>(val, key);
        } else if (key == "defender_hidden_width") {
            c.defender.hidden_width = as<int>(val, key);
        } else if (key == "defender_hidden_layers") {
            c.defender.hidden_layers = as<int>(val, key);
        } else if (key == "gan_batch_size") {
            c.gan.train.batch_size = as<int>(val, key);
        } else if (key == "gan_learning_rate") {
            c.gan.train.learning_rate = as<double>(val, key);
        } else if (key == "gan_beta1") {
            c.gan.train.beta1 = as<double>(val, key);
        } else if (key == "gan_lr_decay") {
            c.gan.lr_decay = as<double>(val, key);
        } else if (key == "gan_max_epochs") {
            c.gan.max_epochs = as<int>(val, key);
        } else if (key == "gan_z_dim") {
            c.gan.z_dim = as<int>(val, key);
        } else if (key == "gan_hidden_width") {
            c.gan.hidden_width = as<int>(val, key);
        } else if (key == "gan_hidden_layers") {
            c.gan.hidden_layers = as<int>(val, key);
        } else if (key == "gan_real_samples") {
            c.gan.real_samples = as<int>(val, key);
        } else if (key == "gan_fake_samples") {
            c.gan.fake_samples = as<int>(val, key);
        } else if (key == "convergence_window") {
            c.gan.rule.window = as<int>(val, key);
        } else if (key == "convergence_threshold") {
            c.gan.rule.threshold = as<double>(val, key);
        } else if (key == "test_positions") {
            if (!val.IsSequence()) fail_at(val, "test_positions must be a list of [x, y] pairs");
            c.test_positions.clear();
            for (const auto& p : val) c.test_positions.push_back(as_position(p, key));
        } else {
            fail_at(kv.first, "unknown key '" + key + "'");
        }
    }
    try {
        c.validate();
    } catch (const ValidationError& e) {
        violations.insert(violations.end(), e.violations().begin(), e.violations().end());
    }
    if (!violations.empty()) throw ValidationError(std::move(violations));
    return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open scenario file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

std::string render_scenario(const ScenarioConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "schema_version" << YAML::Value << kScenarioSchemaVersion;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "attack" << YAML::Value << to_string(c.attack_kind);
    out << YAML::Key << "nodes" << YAML::Value << YAML::BeginSeq;
    for (const auto& n : c.nodes) {
        out << YAML::Flow << YAML::BeginMap;
        out << YAML::Key << "id" << YAML::Value << to_string(n.id);
        out << YAML::Key << "position" << YAML::Value << YAML::Flow << YAML::BeginSeq << n.position.x
            << n.position.y << YAML::EndSeq;
        out << YAML::Key << "power" << YAML::Value << n.transmit_power;
        out << YAML::Key << "device_phase" << YAML::Value << n.device_phase;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "channel_phase_model" << YAML::Value
        << (c.channel.phase_model == PhaseModel::Uniform ? "uniform" : "propagation");
    out << YAML::Key << "wavelength" << YAML::Value << c.channel.wavelength;
    out << YAML::Key << "phase_scatter" << YAML::Value << c.channel.scatter_std;
    out << YAML::Key << "intended_payload" << YAML::Value << YAML::DoubleQuoted << payload_to_string(c.intended_payload);
    out << YAML::Key << "n_train" << YAML::Value << c.n_train;
    out << YAML::Key << "n_test" << YAML::Value << c.n_test;
    out << YAML::Key << "n_attack" << YAML::Value << c.n_attack;
    out << YAML::Key << "defender_batch_size" << YAML::Value << c.defender.train.batch_size;
    out << YAML::Key << "defender_steps" << YAML::Value << c.defender.train.steps;
    out << YAML::Key << "defender_learning_rate" << YAML::Value << c.defender.train.learning_rate;
    out << YAML::Key << "defender_hidden_width" << YAML::Value << c.defender.hidden_width;
    out << YAML::Key << "defender_hidden_layers" << YAML::Value << c.defender.hidden_layers;
    out << YAML::Key << "gan_batch_size" << YAML::Value << c.gan.train.batch_size;
    out << YAML::Key << "gan_learning_rate" << YAML::Value << c.gan.train.learning_rate;
    out << YAML::Key << "gan_beta1" << YAML::Value << c.gan.train.beta1;
    out << YAML::Key << "gan_lr_decay" << YAML::Value << c.gan.lr_decay;
    out << YAML::Key << "gan_max_epochs" << YAML::Value << c.gan.max_epochs;
    out << YAML::Key << "gan_z_dim" << YAML::Value << c.gan.z_dim;
    out << YAML::Key << "gan_hidden_width" << YAML::Value << c.gan.hidden_width;
    out << YAML::Key << "gan_hidden_layers" << YAML::Value << c.gan.hidden_layers;
    out << YAML::Key << "gan_real_samples" << YAML::Value << c.gan.real_samples;
    out << YAML::Key << "gan_fake_samples" << YAML::Value << c.gan.fake_samples;
    out << YAML::Key << "convergence_window" << YAML::Value << c.gan.rule.window;
    out << YAML::Key << "convergence_threshold" << YAML::Value << c.gan.rule.threshold;
    out << YAML::Key << "test_positions" << YAML::Value << YAML::BeginSeq;
    for (const auto& p : c.test_positions) {
        out << YAML::Flow << YAML::BeginSeq << p.x << p.y << YAML::EndSeq;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

std::string scenario_digest(const ScenarioConfig& config) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << hash_tag(render_scenario(config));
    return os.str();
}

}  // namespace spoofsim
