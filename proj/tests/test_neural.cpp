#include <cmath>
#include <vector>

#include "doctest.h"
#include "spoofsim/errors.hpp"
#include "spoofsim/neural.hpp"

using namespace spoofsim;
using namespace spoofsim::nn;

namespace {

MlpModel zero_model(std::vector<int> dims, HiddenActivation hidden, OutputActivation out, double scale = 1.0) {
    RandomStream rng(1);
    auto m = init_model(dims, hidden, out, rng, scale);
    for (auto& w : m.weights) w.setZero();
    return m;
}

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, RandomStream& rng) {
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
    return m;
}

/// Hand-set [3, 4, 2] network used by the forward-pass oracle.
MlpModel oracle_model(HiddenActivation hidden) {
    MlpModel m = zero_model({3, 4, 2}, hidden, OutputActivation::Linear);
    m.weights[0] << 0.2, -0.1, 0.4, 0.05, -0.3, 0.25, 0.1, -0.2, 0.15, 0.3, -0.05, 0.1;
    m.biases[0] << 0.01, -0.02, 0.03, 0.0;
    m.weights[1] << 0.5, -0.4, 0.2, 0.1, -0.3, 0.6, 0.7, -0.2;
    m.biases[1] << 0.05, -0.05;
    return m;
}

/// Explicit-loop affine/activation chain, independent of the Eigen path.
std::vector<double> loop_forward(const MlpModel& m, std::vector<double> x) {
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        const auto& w = m.weights[l];
        std::vector<double> y(static_cast<std::size_t>(w.cols()));
        for (Eigen::Index j = 0; j < w.cols(); ++j) {
            double acc = m.biases[l](j);
            for (Eigen::Index i = 0; i < w.rows(); ++i) acc += x[static_cast<std::size_t>(i)] * w(i, j);
            const bool hidden = l + 1 < m.layer_count();
            if (hidden) acc = m.hidden_activation == HiddenActivation::ReLU ? std::max(0.0, acc) : std::tanh(acc);
            y[static_cast<std::size_t>(j)] = acc;
        }
        x = y;
    }
    return x;
}

}  // namespace

TEST_CASE("init_model shapes and determinism") {
    RandomStream a(7), b(7);
    const std::vector<int> dims{800, 50, 50, 50, 2};
    const auto m1 = init_model(dims, HiddenActivation::ReLU, OutputActivation::Softmax, a);
    const auto m2 = init_model(dims, HiddenActivation::ReLU, OutputActivation::Softmax, b);
    for (std::size_t l = 0; l < m1.layer_count(); ++l) {
        CHECK(m1.weights[l] == m2.weights[l]);
        CHECK(m1.biases[l] == m2.biases[l]);
        CHECK(m1.biases[l].isZero());
    }
    CHECK(m1.parameter_count() == 800u * 50 + 50 + 2 * (50 * 50 + 50) + 50 * 2 + 2);

    RandomStream c(1);
    const auto small = init_model(std::vector<int>{4, 3}, HiddenActivation::ReLU, OutputActivation::Linear, c);
    CHECK(small.weights[0].rows() == 4);
    CHECK(small.weights[0].cols() == 3);
    CHECK(small.biases[0].size() == 3);
}

TEST_CASE("He initialization variance on the first layer") {
    RandomStream rng(7);
    const auto m = init_model(std::vector<int>{800, 50, 50, 50, 2}, HiddenActivation::ReLU,
                              OutputActivation::Softmax, rng);
    const auto& w = m.weights[0];
    const double mean = w.mean();
    const double var = (w.array() - mean).square().sum() / static_cast<double>(w.size() - 1);
    CHECK(var == doctest::Approx(2.0 / 800.0).epsilon(0.2));
}

TEST_CASE("init_model rejects bad dimensions") {
    RandomStream rng(1);
    CHECK_THROWS_AS(init_model(std::vector<int>{}, HiddenActivation::ReLU, OutputActivation::Linear, rng), ConfigError);
    CHECK_THROWS_AS(init_model(std::vector<int>{5}, HiddenActivation::ReLU, OutputActivation::Linear, rng), ConfigError);
    CHECK_THROWS_AS(init_model(std::vector<int>{5, 0, 2}, HiddenActivation::ReLU, OutputActivation::Linear, rng),
                    ConfigError);
}

TEST_CASE("zero networks give symmetric outputs") {
    const Matrix x = Matrix::Ones(3, 4);
    const auto soft = forward(zero_model({4, 5, 2}, HiddenActivation::ReLU, OutputActivation::Softmax), x).output();
    CHECK((soft.array() - 0.5).abs().maxCoeff() < 1e-15);
    const auto sig = forward(zero_model({4, 5, 1}, HiddenActivation::ReLU, OutputActivation::Sigmoid), x).output();
    CHECK((sig.array() - 0.5).abs().maxCoeff() < 1e-15);
    const auto tanh_out =
        forward(zero_model({4, 5, 6}, HiddenActivation::ReLU, OutputActivation::ScaledTanh, 1000.0), x).output();
    CHECK(tanh_out.isZero());
}

TEST_CASE("forward pass oracle") {
    const Matrix x = (Matrix(1, 3) << 1.0, -2.0, 0.5).finished();
    const auto relu = forward(oracle_model(HiddenActivation::ReLU), x);
    CHECK(relu.act[1](0, 0) == doctest::Approx(0.885).epsilon(1e-12));
    CHECK(relu.act[1](0, 1) == 0.0);
    CHECK(relu.output()(0, 0) == doctest::Approx(0.781).epsilon(1e-12));
    CHECK(relu.output()(0, 1) == doctest::Approx(-0.381).epsilon(1e-12));
    const auto tanh_pass = forward(oracle_model(HiddenActivation::Tanh), x);
    CHECK(tanh_pass.output()(0, 0) == doctest::Approx(0.57964709).epsilon(1e-8));
    CHECK(tanh_pass.output()(0, 1) == doctest::Approx(-0.34850405).epsilon(1e-8));
}

TEST_CASE("forward pass matches an explicit loop on a random model") {
    RandomStream rng(21);
    for (auto hidden : {HiddenActivation::ReLU, HiddenActivation::Tanh}) {
        auto m = init_model(std::vector<int>{7, 6, 5, 3}, hidden, OutputActivation::Linear, rng);
        for (auto& b : m.biases) b = random_matrix(1, b.size(), rng);
        const Matrix x = random_matrix(4, 7, rng);
        const auto out = forward(m, x).output();
        for (Eigen::Index r = 0; r < x.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(x.cols()));
            for (Eigen::Index c = 0; c < x.cols(); ++c) row[static_cast<std::size_t>(c)] = x(r, c);
            const auto expect = loop_forward(m, row);
            for (Eigen::Index c = 0; c < out.cols(); ++c) {
                CHECK(out(r, c) == doctest::Approx(expect[static_cast<std::size_t>(c)]).epsilon(1e-12));
            }
        }
    }
}

TEST_CASE("forward rejects width mismatch") {
    RandomStream rng(1);
    const auto m = init_model(std::vector<int>{4, 3}, HiddenActivation::ReLU, OutputActivation::Linear, rng);
    CHECK_THROWS_AS(forward(m, Matrix::Ones(2, 5)), ShapeError);
}

TEST_CASE("softmax rows sum to one and stay inside (0, 1)") {
    RandomStream rng(4);
    const auto m = init_model(std::vector<int>{10, 8, 4}, HiddenActivation::ReLU, OutputActivation::Softmax, rng);
    const Matrix x = 50.0 * random_matrix(200, 10, rng);
    const auto p = forward(m, x).output();
    for (Eigen::Index r = 0; r < p.rows(); ++r) {
        CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-9);
        CHECK(p.row(r).minCoeff() >= 0.0);
        CHECK(p.row(r).maxCoeff() <= 1.0);
    }
}

TEST_CASE("sigmoid and scaled tanh ranges") {
    RandomStream rng(6);
    const auto sig = init_model(std::vector<int>{5, 4, 1}, HiddenActivation::ReLU, OutputActivation::Sigmoid, rng);
    const auto tan = init_model(std::vector<int>{5, 4, 3}, HiddenActivation::ReLU, OutputActivation::ScaledTanh, rng, 7.5);
    const Matrix x = 3.0 * random_matrix(500, 5, rng);
    const auto ps = forward(sig, x).output();
    CHECK(ps.minCoeff() > 0.0);
    CHECK(ps.maxCoeff() < 1.0);
    const auto pt = forward(tan, x).output();
    CHECK(pt.cwiseAbs().maxCoeff() <= 7.5);
}

TEST_CASE("ReLU stack with linear output is positively homogeneous") {
    RandomStream rng(12);
    const auto m = init_model(std::vector<int>{6, 9, 9, 3}, HiddenActivation::ReLU, OutputActivation::Linear, rng);
    const Matrix x = random_matrix(5, 6, rng);
    const auto y = forward(m, x).output();
    const auto y3 = forward(m, 3.5 * x).output();
    CHECK((y3 - 3.5 * y).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("loss values") {
    const Matrix half = Matrix::Constant(4, 2, 0.5);
    CHECK(loss(half, one_hot(std::vector<int>{0, 1, 1, 0}, 2), LossKind::CrossEntropy) ==
          doctest::Approx(std::log(2.0)));
    const Matrix p = Matrix::Constant(3, 1, 0.5);
    const Matrix y = (Matrix(3, 1) << 1.0, 0.0, 1.0).finished();
    CHECK(loss(p, y, LossKind::BinaryCrossEntropy) == doctest::Approx(std::log(2.0)));
    const Matrix perfect = (Matrix(2, 1) << 1.0, 0.0).finished();
    CHECK(loss(perfect, perfect, LossKind::BinaryCrossEntropy) <= 2 * kProbClamp);
    CHECK(loss(one_hot(std::vector<int>{1, 0}, 2), one_hot(std::vector<int>{1, 0}, 2), LossKind::CrossEntropy) <=
          2 * kProbClamp);
}

TEST_CASE("loss rejects invalid probabilities") {
    const Matrix bad = (Matrix(1, 1) << 1.5).finished();
    const Matrix y = (Matrix(1, 1) << 1.0).finished();
    CHECK_THROWS_AS(loss(bad, y, LossKind::BinaryCrossEntropy), NumericError);
    const Matrix nan_p = (Matrix(1, 1) << std::nan("")).finished();
    CHECK_THROWS_AS(loss(nan_p, y, LossKind::BinaryCrossEntropy), NumericError);
}

TEST_CASE("gradient check on a [6,5,4,2] softmax classifier") {
    RandomStream rng(3);
    for (auto hidden : {HiddenActivation::Tanh, HiddenActivation::ReLU}) {
        const auto m = init_model(std::vector<int>{6, 5, 4, 2}, hidden, OutputActivation::Softmax, rng);
        const Matrix x = random_matrix(10, 6, rng);
        std::vector<int> cls;
        for (int i = 0; i < 10; ++i) cls.push_back(static_cast<int>(rng.below(2)));
        const auto r = gradient_check(m, x, one_hot(cls, 2), LossKind::CrossEntropy);
        CHECK(r.parameters_checked == m.parameter_count());
        CHECK(r.max_relative_error < 1e-4);
    }
}

TEST_CASE("gradient check on sigmoid/BCE and generic output paths") {
    RandomStream rng(8);
    const auto sig = init_model(std::vector<int>{4, 6, 1}, HiddenActivation::Tanh, OutputActivation::Sigmoid, rng);
    const Matrix x = random_matrix(7, 4, rng);
    Matrix y(7, 1);
    for (int i = 0; i < 7; ++i) y(i, 0) = static_cast<double>(i % 2);
    CHECK(gradient_check(sig, x, y, LossKind::BinaryCrossEntropy).max_relative_error < 1e-4);

    // Sigmoid under cross-entropy goes through the generic Jacobian path.
    const auto multi = init_model(std::vector<int>{4, 5, 3}, HiddenActivation::Tanh, OutputActivation::Sigmoid, rng);
    Matrix y3 = Matrix::Constant(7, 3, 0.0);
    for (int i = 0; i < 7; ++i) y3(i, i % 3) = 1.0;
    CHECK(gradient_check(multi, x, y3, LossKind::CrossEntropy).max_relative_error < 1e-4);
    CHECK_THROWS(gradient_check(multi, x, y3, LossKind::BinaryCrossEntropy));
}

TEST_CASE("backward: dead inputs give zero first-layer weight gradients") {
    RandomStream rng(2);
    const auto m = init_model(std::vector<int>{5, 4, 2}, HiddenActivation::ReLU, OutputActivation::Softmax, rng);
    const Matrix x = Matrix::Zero(3, 5);
    const auto g = backward(m, forward(m, x), one_hot(std::vector<int>{0, 1, 1}, 2), LossKind::CrossEntropy);
    CHECK(g.weights[0].isZero());
}

TEST_CASE("backward: input gradient of a linear layer is W applied to the upstream gradient") {
    RandomStream rng(2);
    const auto m = init_model(std::vector<int>{5, 3}, HiddenActivation::ReLU, OutputActivation::Linear, rng);
    const Matrix x = random_matrix(4, 5, rng);
    const Matrix up = random_matrix(4, 3, rng);
    const auto g = backward_from_output(m, forward(m, x), up);
    CHECK((g.input - up * m.weights[0].transpose()).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("SGD step") {
    MlpModel m = zero_model({1, 1}, HiddenActivation::ReLU, OutputActivation::Linear);
    m.weights[0](0, 0) = 1.0;
    auto g = Gradients::zeros_like(m);
    g.weights[0](0, 0) = 2.0;
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::SGD;
    cfg.learning_rate = 0.1;
    auto state = OptimizerState::for_model(m);
    opt_step(m, g, state, cfg);
    CHECK(m.weights[0](0, 0) == doctest::Approx(0.8));
}

TEST_CASE("Adam first step moves each parameter by about the learning rate") {
    RandomStream rng(5);
    auto m = init_model(std::vector<int>{3, 2}, HiddenActivation::ReLU, OutputActivation::Linear, rng);
    const auto before = m.weights[0];
    auto g = Gradients::zeros_like(m);
    g.weights[0] << 0.3, -2.0, 1e-3, -0.7, 5.0, 0.02;
    TrainConfig cfg;
    auto state = OptimizerState::for_model(m);
    opt_step(m, g, state, cfg);
    const Matrix step = m.weights[0] - before;
    for (Eigen::Index i = 0; i < step.size(); ++i) {
        CHECK(std::abs(step.data()[i]) == doctest::Approx(cfg.learning_rate).epsilon(1e-3));
        CHECK((step.data()[i] > 0) == (g.weights[0].data()[i] < 0));
    }
}

TEST_CASE("training is bit-identical across equal seeds") {
    auto run = [] {
        RandomStream rng(99);
        auto m = init_model(std::vector<int>{4, 8, 2}, HiddenActivation::ReLU, OutputActivation::Softmax, rng);
        auto state = OptimizerState::for_model(m);
        const Matrix x = random_matrix(16, 4, rng);
        std::vector<int> cls;
        for (int i = 0; i < 16; ++i) cls.push_back(i % 2);
        const Matrix y = one_hot(cls, 2);
        TrainConfig cfg;
        for (int s = 0; s < 50; ++s) opt_step(m, backward(m, forward(m, x), y, LossKind::CrossEntropy), state, cfg);
        return m;
    };
    const auto a = run(), b = run();
    for (std::size_t l = 0; l < a.layer_count(); ++l) CHECK(a.weights[l] == b.weights[l]);
}

TEST_CASE("SGD separates a linearly separable toy set") {
    RandomStream rng(17);
    Matrix x(50, 2);
    std::vector<int> cls;
    for (int i = 0; i < 50; ++i) {
        const int c = i % 2;
        x(i, 0) = (c ? 1.5 : -1.5) + 0.3 * rng.normal();
        x(i, 1) = rng.normal();
        cls.push_back(c);
    }
    const Matrix y = one_hot(cls, 2);
    auto m = init_model(std::vector<int>{2, 8, 2}, HiddenActivation::ReLU, OutputActivation::Softmax, rng);
    TrainConfig cfg;
    cfg.optimizer = OptimizerKind::SGD;
    cfg.learning_rate = 0.1;
    auto state = OptimizerState::for_model(m);
    for (int s = 0; s < 500; ++s) opt_step(m, backward(m, forward(m, x), y, LossKind::CrossEntropy), state, cfg);
    CHECK(loss(forward(m, x).output(), y, LossKind::CrossEntropy) < 0.1);
}

TEST_CASE("model JSON round trip") {
    RandomStream rng(31);
    const auto m = init_model(std::vector<int>{6, 4, 3}, HiddenActivation::Tanh, OutputActivation::ScaledTanh, rng, 2.5);
    const auto doc = model_to_json(m);
    CHECK(doc.at("version") == kModelFormatVersion);
    const auto back = model_from_json(nlohmann::json::parse(doc.dump()));
    CHECK(back.layer_dims == m.layer_dims);
    CHECK(back.hidden_activation == m.hidden_activation);
    CHECK(back.output_activation == m.output_activation);
    CHECK(back.output_scale == m.output_scale);
    for (std::size_t l = 0; l < m.layer_count(); ++l) {
        CHECK(back.weights[l] == m.weights[l]);
        CHECK(back.biases[l] == m.biases[l]);
    }
    auto broken = doc;
    broken["version"] = 99;
    CHECK_THROWS_AS(model_from_json(broken), ConfigError);
    broken = doc;
    broken["layers"][0]["weights"] = nlohmann::json::array({1.0});
    CHECK_THROWS_AS(model_from_json(broken), ConfigError);
}

TEST_CASE("relative_error uses the floor for tiny values") {
    CHECK(relative_error(1.0, 1.0) == 0.0);
    CHECK(relative_error(2.0, 1.0) == doctest::Approx(0.5));
    CHECK(relative_error(1e-9, 0.0) == doctest::Approx(1e-3));
}
