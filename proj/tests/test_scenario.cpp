#include <filesystem>
#include <string>

#include "doctest.h"
#include "spoofsim/errors.hpp"
#include "spoofsim/scenario.hpp"

using namespace spoofsim;

namespace {

std::string parse_error_of(const std::string& doc) {
    try {
        parse_scenario(doc);
    } catch (const ParseError& e) {
        return e.what();
    }
    return {};
}

std::vector<std::string> violations_of(const std::string& doc) {
    try {
        parse_scenario(doc);
    } catch (const ValidationError& e) {
        return e.violations();
    }
    return {};
}

}  // namespace

TEST_CASE("empty document gives the default scenario") {
    const auto c = parse_scenario("");
    CHECK(c.node(NodeId::T).transmit_power == 1000.0);
    CHECK(c.node(NodeId::AT).transmit_power == 1000.0);
    CHECK(c.node(NodeId::T).position == Position{0, 0});
    CHECK(c.node(NodeId::R).position == Position{10, 0});
    CHECK(c.node(NodeId::AT).position == Position{0, 10});
    CHECK(c.node(NodeId::AR).position == Position{10, 0.1});
    CHECK(c.defender.train.batch_size == 150);
    CHECK(c.defender.train.steps == 1000);
    CHECK(c.defender.hidden_layers == 3);
    CHECK(c.defender.hidden_width == 50);
    CHECK(c.gan.hidden_width == 128);
    CHECK(c.gan.real_samples == 500);
    CHECK(c.gan.fake_samples == 500);
    CHECK(c.gan.rule.window == 100);
    CHECK(c.gan.rule.threshold == 0.05);
    CHECK(c.gan.max_epochs == 5000);
    CHECK(c.n_train == 1000);
    CHECK(c.n_test == 1000);
    CHECK(c.attack_positions() == std::vector<Position>{{0, 10}});
    CHECK(scenario_digest(c) == scenario_digest(default_scenario()));
}

TEST_CASE("A_T position override") {
    const auto c = parse_scenario("nodes:\n  - {id: A_T, position: [0, 11]}\n");
    CHECK(c.node(NodeId::AT).position == Position{0, 11});
    CHECK(c.node(NodeId::AT).transmit_power == 1000.0);
    CHECK(c.node(NodeId::T).position == Position{0, 0});
}

TEST_CASE("typed overrides") {
    const auto c = parse_scenario(
        "seed: 42\nattack: replay\nn_attack: 250\ngan_learning_rate: 0.001\nintended_payload: \"11001001\"\n"
        "channel_phase_model: uniform\ntest_positions: [[0, 10], [0, 20]]\n");
    CHECK(c.seed == 42);
    CHECK(c.attack_kind == AttackKind::Replay);
    CHECK(c.n_attack == 250);
    CHECK(c.gan.train.learning_rate == 0.001);
    CHECK(c.intended_payload == 0b11001001);
    CHECK(c.channel.phase_model == PhaseModel::Uniform);
    CHECK(c.attack_positions().size() == 2);
}

TEST_CASE("device phases are normalized into [0, 2pi)") {
    const auto c = parse_scenario("nodes:\n  - {id: T, device_phase: 7.0}\n");
    CHECK(c.node(NodeId::T).device_phase == doctest::Approx(7.0 - kTwoPi));
}

TEST_CASE("unknown keys are rejected with a line number") {
    const auto msg = parse_error_of("seed: 1\nn_tarin: 5\n");
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("n_tarin") != std::string::npos);
    CHECK(parse_error_of("nodes:\n  - {id: T, colour: red}\n").find("colour") != std::string::npos);
}

TEST_CASE("type errors name the field and line") {
    const auto msg = parse_error_of("seed: 1\nn_train: many\n");
    CHECK(msg.find("line 2") != std::string::npos);
    CHECK(msg.find("n_train") != std::string::npos);
    CHECK_FALSE(parse_error_of("attack: jam\n").empty());
    CHECK_FALSE(parse_error_of("intended_payload: \"0102\"\n").empty());
    CHECK_FALSE(parse_error_of("schema_version: 9\n").empty());
    CHECK_FALSE(parse_error_of("[1, 2").empty());
    CHECK_FALSE(parse_error_of("- 1\n- 2\n").empty());
    CHECK_FALSE(parse_error_of("nodes:\n  - {id: Q}\n").empty());
}

TEST_CASE("validation lists every violation") {
    const auto v = violations_of(
        "n_train: 0\nn_attack: -1\nnodes:\n  - {id: T, position: [0, 0]}\n  - {id: T, position: [3, 3]}\n"
        "  - {id: A_R, position: [10, 0]}\n");
    REQUIRE(v.size() >= 4);
    auto has = [&](const std::string& needle) {
        for (const auto& s : v) {
            if (s.find(needle) != std::string::npos) return true;
        }
        return false;
    };
    CHECK(has("duplicate node id T"));
    CHECK(has("n_train"));
    CHECK(has("n_attack"));
    CHECK(has("share a position"));
}

TEST_CASE("T needs power") {
    const auto v = violations_of("nodes:\n  - {id: T, power: 0}\n");
    CHECK_FALSE(v.empty());
}

TEST_CASE("render and parse round trip") {
    auto c = default_scenario();
    c.seed = 77;
    c.attack_kind = AttackKind::Random;
    c.node(NodeId::AT).position = {0.0, 15.0};
    c.node(NodeId::AT).device_phase = 0.123456789012345;
    c.test_positions = {{0, 10}, {0.5, 20.25}};
    c.gan.lr_decay = 0.99;
    const auto back = parse_scenario(render_scenario(c));
    CHECK(render_scenario(back) == render_scenario(c));
    CHECK(scenario_digest(back) == scenario_digest(c));
    CHECK(back.node(NodeId::AT).device_phase == c.node(NodeId::AT).device_phase);
    CHECK(scenario_digest(back) != scenario_digest(default_scenario()));
}

TEST_CASE("attack kind strings") {
    for (auto k : {AttackKind::Random, AttackKind::Replay, AttackKind::Gan}) {
        CHECK(attack_kind_from_string(to_string(k)) == k);
    }
    CHECK_THROWS_AS(attack_kind_from_string("jam"), ParseError);
    CHECK(payload_to_string(0b00011110) == "00011110");
}

TEST_CASE("shipped configs load") {
    const std::filesystem::path dir = SPOOFSIM_CONFIG_DIR;
    CHECK(scenario_digest(load_scenario(dir / "default.yaml")) == scenario_digest(default_scenario()));
    CHECK(load_scenario(dir / "mobility.yaml").attack_positions().size() == 4);
    const auto replay = load_scenario(dir / "replay_at_11.yaml");
    CHECK(replay.attack_kind == AttackKind::Replay);
    CHECK(replay.node(NodeId::AT).position == Position{0, 11});
    CHECK_THROWS_AS(load_scenario(dir / "missing.yaml"), Error);
}
