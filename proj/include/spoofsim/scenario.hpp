#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "spoofsim/neural.hpp"
#include "spoofsim/signal_model.hpp"

namespace spoofsim {

enum class AttackKind { Random, Replay, Gan };

const char* to_string(AttackKind kind);
AttackKind attack_kind_from_string(std::string_view s);

/// Stop rule for adversarial training: the largest deviation of the last
/// `window` losses from the latest loss must not exceed threshold * |latest|.
struct ConvergenceRule {
    int window = 100;
    double threshold = 0.05;
    /// Absolute tolerance used when the latest loss is exactly zero.
    double zero_loss_tolerance = 1e-6;

    void validate() const;
};

struct GanConfig {
    /// batch_size, learning_rate, optimizer and Adam constants apply to both
    /// networks; `steps` is unused (epochs are governed by max_epochs).
    nn::TrainConfig train{.batch_size = 100, .steps = 1, .learning_rate = 2e-4, .beta1 = 0.5};
    /// Multiplicative learning-rate decay applied once per epoch.
    double lr_decay = 0.995;
    int max_epochs = 5000;
    int z_dim = 100;
    int hidden_width = 128;
    int hidden_layers = 3;
    int real_samples = 500;
    int fake_samples = 500;
    ConvergenceRule rule;

    void validate() const;
};

struct DefenderConfig {
    nn::TrainConfig train{.batch_size = 150, .steps = 1000, .learning_rate = 1e-3};
    int hidden_width = 50;
    int hidden_layers = 3;
    /// Standardization floor for per-feature std.
    double std_floor = 1e-6;
};

struct ScenarioConfig {
    /// Indexed by NodeId: T, R, A_T, A_R.
    std::array<NodeConfig, 4> nodes;
    ChannelModel channel;
    /// Sensing burst T transmits in every frame.
    Payload intended_payload = 0b00011110;
    DefenderConfig defender;
    GanConfig gan;
    int n_train = 1000;
    int n_test = 1000;
    /// Frames per attack evaluation.
    int n_attack = 1000;
    std::uint64_t seed = 1;
    AttackKind attack_kind = AttackKind::Gan;
    /// A_T positions used at attack time; empty means A_T's configured position.
    std::vector<Position> test_positions;

    const NodeConfig& node(NodeId id) const { return nodes[static_cast<std::size_t>(id)]; }
    NodeConfig& node(NodeId id) { return nodes[static_cast<std::size_t>(id)]; }

    /// Attack-time positions with the empty-list default resolved.
    std::vector<Position> attack_positions() const;

    /// Throws ValidationError listing every violated invariant.
    void validate() const;
};

inline constexpr int kScenarioSchemaVersion = 1;

/// Four-node topology with P = 1000 and all training constants at their
/// defaults.
ScenarioConfig default_scenario();

/// Parses a YAML scenario document; omitted keys keep default_scenario()
/// values. Unknown keys and type errors raise ParseError with the line
/// number; semantic violations raise ValidationError.
ScenarioConfig parse_scenario(std::string_view document);
ScenarioConfig load_scenario(const std::filesystem::path& path);

/// Canonical YAML rendering; parse_scenario(render_scenario(c)) == c.
std::string render_scenario(const ScenarioConfig& config);

/// Stable hex digest of the rendered scenario.
std::string scenario_digest(const ScenarioConfig& config);

std::string payload_to_string(Payload bits);

}  // namespace spoofsim
