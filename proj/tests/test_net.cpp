#include <gtest/gtest.h>

#include <cmath>

#include "hardproj/net.hpp"
#include "oracles.hpp"

using namespace hardproj;

TEST(Glorot, SameSeedSameWeights) {
    EXPECT_EQ(glorot_init({10, 64, 10}, 42), glorot_init({10, 64, 10}, 42));
    EXPECT_FALSE(glorot_init({10, 64, 10}, 42) == glorot_init({10, 64, 10}, 43));
}

TEST(Glorot, WeightsWithinFanBound) {
    const auto p = glorot_init({10, 64, 10}, 42);
    const double bound = std::sqrt(6.0 / 74.0);  // ≈ 0.2847
    EXPECT_NEAR(bound, 0.2847, 1e-4);
    for (const auto& l : p.layers)
        for (double w : l.weight.data()) EXPECT_LE(std::abs(w), bound);
}

TEST(Glorot, BiasesZero) {
    const auto p = glorot_init({10, 64, 32, 10}, 1);
    for (const auto& l : p.layers)
        for (double b : l.bias) EXPECT_EQ(b, 0.0);
}

TEST(Glorot, EmptyShapeIsConfigError) {
    EXPECT_THROW(glorot_init(std::span<const std::size_t>{}, 1), ConfigError);
    EXPECT_THROW(glorot_init({10}, 1), ConfigError);
}

TEST(Forward, ZeroParamsGiveZeroOutput) {
    auto p = glorot_init({3, 5, 2}, 1);
    for (auto b : p.blocks()) std::fill(b.begin(), b.end(), 0.0);
    Rng rng(1);
    const auto r = forward(p, oracle::random_mat(rng, 4, 3));
    for (double v : r.y.data()) EXPECT_EQ(v, 0.0);
}

TEST(Forward, SingleLayerIsAffine) {
    Rng rng(2);
    auto p = glorot_init({4, 3}, 5);
    for (double& b : p.layers[0].bias) b = rng.uniform(-1, 1);
    const Mat x = oracle::random_mat(rng, 6, 4);
    const Mat want = oracle::naive_matmul(x, transpose(p.layers[0].weight));
    const auto r = forward(p, x);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t o = 0; o < 3; ++o) EXPECT_NEAR(r.y(i, o), want(i, o) + p.layers[0].bias[o], 1e-15);
}

// straight-line re-implementation: per-sample vector loop with explicit ReLU
static std::vector<double> reference_forward(const MlpParams& p, std::span<const double> x) {
    std::vector<double> h(x.begin(), x.end());
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        std::vector<double> next(p.layers[k].bias.size());
        for (std::size_t o = 0; o < next.size(); ++o) {
            double s = 0.0;
            for (std::size_t j = 0; j < h.size(); ++j) s += p.layers[k].weight(o, j) * h[j];
            s += p.layers[k].bias[o];
            next[o] = (k + 1 < p.layers.size()) ? std::max(0.0, s) : s;
        }
        h = next;
    }
    return h;
}

TEST(Forward, MatchesReferenceImplementation) {
    Rng rng(3);
    auto p = glorot_init({10, 64, 16, 10}, 9);
    for (auto& l : p.layers)
        for (double& b : l.bias) b = rng.uniform(-0.5, 0.5);
    const Mat x = oracle::random_mat(rng, 32, 10, -2, 2);
    const auto r = forward(p, x);
    for (std::size_t i = 0; i < 32; ++i) {
        const auto want = reference_forward(p, x.row(i));
        for (std::size_t o = 0; o < 10; ++o) EXPECT_NEAR(r.y(i, o), want[o], 1e-14);
    }
}

TEST(Forward, ShapeMismatch) { EXPECT_THROW(forward(glorot_init({3, 2}, 1), Mat(2, 4)), ShapeError); }

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
    Rng rng(4);
    const auto p = glorot_init({3, 8, 2}, 1);
    auto r = forward(p, oracle::random_mat(rng, 5, 3));
    const auto g = backward(p, r.tape, Mat(5, 2));
    for (auto b : g.blocks())
        for (double v : b) EXPECT_EQ(v, 0.0);
}

TEST(Backward, ScalarLinearHandDerivative) {
    MlpParams p;
    p.layers.push_back({Mat{{1.5}}, {0.25}});
    const double x = 2.0, t = 1.0;
    auto r = forward(p, Mat{{x}});
    const double y = r.y(0, 0);
    // L = ½ (y - t)², dL/dy = y - t
    const auto g = backward(p, r.tape, Mat{{y - t}});
    EXPECT_DOUBLE_EQ(g.layers[0].weight(0, 0), (1.5 * x + 0.25 - t) * x);
    EXPECT_DOUBLE_EQ(g.layers[0].bias[0], 1.5 * x + 0.25 - t);
}

TEST(Backward, TapeCanOnlyBeUsedOnce) {
    const auto p = glorot_init({2, 2}, 1);
    auto r = forward(p, Mat(1, 2, 1.0));
    EXPECT_TRUE(r.tape.fresh());
    backward(p, r.tape, Mat(1, 2, 1.0));
    EXPECT_FALSE(r.tape.fresh());
    EXPECT_THROW(backward(p, r.tape, Mat(1, 2, 1.0)), UsageError);
    Tape blank;
    EXPECT_THROW(backward(p, blank, Mat(1, 2, 1.0)), UsageError);
}

TEST(Backward, EveryParameterMatchesCentralDifference) {
    Rng rng(5);
    auto p = glorot_init({4, 7, 5, 3}, 12);
    for (auto& l : p.layers)
        for (double& b : l.bias) b = rng.uniform(-0.3, 0.3);
    const Mat x = oracle::random_mat(rng, 9, 4, -2, 2);
    const Mat t = oracle::random_mat(rng, 9, 3);
    auto loss = [&] { return mse_loss(forward(p, x).y, t).value; };

    auto fr = forward(p, x);
    const auto g = backward(p, fr.tape, mse_loss(fr.y, t).grad);
    for (std::size_t i = 0; i < p.parameter_count(); ++i) {
        const double fd = oracle::central_difference(loss, p.at(i), 1e-6);
        EXPECT_LT(oracle::relative_error(g.at(i), fd), 1e-5) << "parameter " << i;
    }
}

TEST(Mse, IdenticalIsZero) {
    Rng rng(6);
    const Mat y = oracle::random_mat(rng, 4, 3);
    const auto l = mse_loss(y, y);
    EXPECT_EQ(l.value, 0.0);
    for (double g : l.grad.data()) EXPECT_EQ(g, 0.0);
}

TEST(Mse, UnitErrorIsOne) {
    const Mat y(3, 4, 2.0), yh(3, 4, 3.0);
    const auto l = mse_loss(yh, y);
    EXPECT_DOUBLE_EQ(l.value, 1.0);
    for (double g : l.grad.data()) EXPECT_DOUBLE_EQ(g, 2.0 / 12.0);
}

TEST(Mse, MatchesNaiveLoop) {
    Rng rng(7);
    const Mat a = oracle::random_mat(rng, 13, 5), b = oracle::random_mat(rng, 13, 5);
    double s = 0.0;
    for (std::size_t i = 0; i < 13; ++i)
        for (std::size_t j = 0; j < 5; ++j) s += (a(i, j) - b(i, j)) * (a(i, j) - b(i, j));
    EXPECT_LT(std::abs(mse_loss(a, b).value - s / 65.0), 1e-14);
    EXPECT_THROW(mse_loss(a, Mat(13, 4)), ShapeError);
}

static MlpParams scalar_params(double w) {
    MlpParams p;
    p.layers.push_back({Mat{{w}}, {0.0}});
    return p;
}

TEST(Adam, ZeroGradientLeavesParams) {
    auto p = glorot_init({3, 4, 2}, 3);
    const auto before = p;
    auto s = AdamState::for_params(p, 1e-3);
    adam_step(p, zeros_like(p), s);
    EXPECT_EQ(p, before);
    EXPECT_EQ(s.step, 1u);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    auto p = scalar_params(0.5);
    auto s = AdamState::for_params(p, 1e-3);
    auto g = scalar_params(1.0);
    adam_step(p, g, s);
    // m̂ = v̂ = 1 after bias correction: Δ = -lr / (1 + ε)
    EXPECT_NEAR(p.layers[0].weight(0, 0) - 0.5, -1e-3 / (1.0 + 1e-8), 1e-16);
}

TEST(Adam, ConstantGradientStepApproachesLearningRate) {
    auto p = scalar_params(0.0);
    auto s = AdamState::for_params(p, 1e-2);
    auto g = scalar_params(0.3);
    double prev = 0.0, delta = 0.0;
    for (int k = 0; k < 2000; ++k) {
        adam_step(p, g, s);
        delta = p.layers[0].weight(0, 0) - prev;
        prev = p.layers[0].weight(0, 0);
    }
    EXPECT_NEAR(delta, -1e-2, 1e-8);
    EXPECT_EQ(s.step, 2000u);
}

TEST(Adam, ShapeMismatch) {
    auto p = glorot_init({3, 2}, 1);
    auto s = AdamState::for_params(p, 1e-3);
    EXPECT_THROW(adam_step(p, glorot_init({3, 3}, 1), s), ShapeError);
}
