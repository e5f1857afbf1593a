#include <gtest/gtest.h>

#include <cmath>
#include <limits>

#include "hardproj/constraints.hpp"
#include "hardproj/dataset.hpp"
#include "hardproj/reactor.hpp"
#include "oracles.hpp"

using namespace hardproj;

TEST(ResidualLinear, IdentityAgainstTarget) {
    const Vec y{1.0, -2.0, 3.5};
    // N_C < N_O is enforced by make_linear_spec; build the struct directly here
    LinearSpec s{"t", Mat(3, 2), Mat::identity(3), y, default_labels(3)};
    for (double r : residual_linear(s, Vec{4.0, 5.0}, y).residual) EXPECT_EQ(r, 0.0);
}

TEST(ResidualLinear, OppositeInputCancels) {
    LinearSpec s{"t", Mat::identity(3), Mat::identity(3), Vec(3, 0.0), default_labels(3)};
    const Vec y{0.3, -1.7, 2.2};
    for (double r : residual_linear(s, Vec{-0.3, 1.7, -2.2}, y).residual) EXPECT_EQ(r, 0.0);
}

TEST(ResidualLinear, MatchesLoop) {
    Rng rng(1);
    auto spec = make_linear_spec(oracle::random_mat(rng, 3, 4), oracle::random_mat(rng, 3, 6), Vec{0.1, 0.2, 0.3});
    Vec x(4), y(6);
    for (double& v : x) v = rng.uniform(-1, 1);
    for (double& v : y) v = rng.uniform(-1, 1);
    const Vec ax = matvec(spec.A, x), by = matvec(spec.B, y);
    const auto r = residual_linear(spec, x, y);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_LT(std::abs(r.residual[k] - (ax[k] + by[k] - spec.b[k])), 1e-14);
    EXPECT_THROW(residual_linear(spec, Vec(3), y), ShapeError);
}

TEST(LinearSpec, RegistrationChecks) {
    EXPECT_THROW(make_linear_spec(Mat(2, 1), Mat(2, 2), Vec(2)), ConfigError);                   // N_C == N_O
    EXPECT_THROW(make_linear_spec(Mat(2, 1), Mat{{1, 1, 0}, {2, 2, 0}}, Vec(2)), RankDeficiencyError);
    EXPECT_THROW(make_linear_spec(Mat(3, 1), Mat{{1, 1, 0}, {0, 1, 1}}, Vec(2)), ShapeError);
}

// B y + F(y_F) y_U - v(x) with one frozen output T and one unfrozen n: h(T)·n = v
static SeparableSpec scalar_spec(double v) {
    SeparableSpec s;
    s.id = "scalar";
    s.n_inputs = 1;
    s.B = Mat(1, 2);
    s.frozen = {0};
    s.unfrozen = {1};
    s.v_fn = [v](std::span<const double>, std::span<double> out) { out[0] = v; };
    s.F_fn = [](std::span<const double> yf, std::span<double> f) { f[0] = 1.0 + 0.5 * yf[0] * yf[0]; };
    s.labels = {"energy"};
    return register_separable(s);
}

TEST(ResidualSeparable, ZeroFReducesToLinearForm) {
    Rng rng(2);
    const Mat b = oracle::random_mat(rng, 2, 5);
    SeparableSpec s;
    s.n_inputs = 3;
    s.B = b;
    s.frozen = {1};
    s.unfrozen = {0, 2, 3, 4};
    s.v_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = std::sin(x[0]) + x[1];
        out[1] = x[2] * x[2];
    };
    s = register_separable(s);
    const Vec x{0.4, -0.2, 1.3}, y{0.1, 0.2, 0.3, 0.4, 0.5};
    const Vec by = matvec(b, y);
    const auto r = residual_separable(s, x, y);
    EXPECT_EQ(r.residual[0], by[0] - (std::sin(0.4) - 0.2));
    EXPECT_EQ(r.residual[1], by[1] - 1.3 * 1.3);
}

TEST(ResidualSeparable, ReactorOracleSampleIsFeasible) {
    const auto th = reactor::default_thermo();
    const auto spec = reactor::build_reactor_spec(th);
    const auto g = reactor::generate_dataset(th, 50, 1, reactor::default_bounds(), 3);
    for (std::size_t r = 0; r < 50; ++r) {
        const auto res = residual_separable(spec, g.train.x.row(r), g.train.y.row(r));
        Vec ref(5);
        spec.reference_fn(g.train.x.row(r), ref);
        for (std::size_t k = 0; k < 5; ++k) EXPECT_LT(std::abs(res.residual[k]) / ref[k], 1e-9) << res.labels[k];
    }
}

TEST(ResidualSeparable, UnfrozenPerturbationMovesByReducedColumn) {
    const auto th = reactor::default_thermo();
    const auto spec = reactor::build_reactor_spec(th);
    const auto g = reactor::generate_dataset(th, 1, 1, reactor::default_bounds(), 4);
    const Vec x(g.train.x.row(0).begin(), g.train.x.row(0).end());
    const Vec y(g.train.y.row(0).begin(), g.train.y.row(0).end());
    const auto base = residual_separable(spec, x, y);
    const auto sys = linearize(spec, x, y);
    const double delta = 1e-3;
    for (std::size_t j = 0; j < spec.n_unfrozen(); ++j) {
        Vec yp = y;
        yp[spec.unfrozen[j]] += delta;
        const auto moved = residual_separable(spec, x, yp);
        for (std::size_t k = 0; k < 5; ++k) {
            const double want = sys.b_reduced(k, j) * delta;
            EXPECT_NEAR(moved.residual[k] - base.residual[k], want, 1e-9 * std::max(1.0, std::abs(want)) + 1e-6)
                << "column " << j << " row " << k;
        }
    }
}

TEST(ResidualSeparable, NonFiniteCallbackNamesConstraint) {
    auto s = scalar_spec(1.0);
    s.F_fn = [](std::span<const double>, std::span<double> f) { f[0] = std::numeric_limits<double>::infinity(); };
    try {
        residual_separable(s, Vec{0.0}, Vec{1.0, 1.0});
        FAIL();
    } catch (const NumericalError& e) {
        EXPECT_NE(std::string(e.what()).find("energy"), std::string::npos);
    }
}

TEST(Linearize, NoFrozenNoFReturnsOriginalSystem) {
    Rng rng(5);
    SeparableSpec s;
    s.n_inputs = 2;
    s.B = oracle::random_mat(rng, 2, 4);
    s.unfrozen = {0, 1, 2, 3};
    s.v_fn = [](std::span<const double> x, std::span<double> out) {
        out[0] = x[0];
        out[1] = x[1] * 3.0;
    };
    s = register_separable(s);
    const auto sys = linearize(s, Vec{1.0, 2.0}, Vec{9, 9, 9, 9});
    EXPECT_EQ(sys.b_reduced, s.B);
    EXPECT_EQ(sys.rhs, (Vec{1.0, 6.0}));
}

TEST(Linearize, ScalarSubstitution) {
    const auto s = scalar_spec(10.0);
    const auto sys = linearize(s, Vec{0.0}, Vec{2.0, 3.0});
    EXPECT_EQ(sys.b_reduced, (Mat{{1.0 + 0.5 * 4.0}}));
    EXPECT_EQ(sys.rhs, (Vec{10.0}));
}

TEST(Linearize, ReactorEnthalpyRowIsNegativeSpeciesEnthalpy) {
    const auto th = reactor::default_thermo();
    const auto spec = reactor::build_reactor_spec(th);
    const auto g = reactor::generate_dataset(th, 1, 1, reactor::default_bounds(), 5);
    Vec y(g.train.y.row(0).begin(), g.train.y.row(0).end());
    y[reactor::out_T] = 612.5;
    const auto sys = linearize(spec, g.train.x.row(0), y);
    for (std::size_t i = 0; i < reactor::n_species; ++i) {
        EXPECT_EQ(sys.b_reduced(reactor::enthalpy_row, i), -reactor::enthalpy(th, i, 612.5));
        for (std::size_t a = 0; a < reactor::n_atoms; ++a)
            EXPECT_EQ(sys.b_reduced(a, i), th.species[i].atoms[a]);
    }
}

TEST(Linearize, RankDeficientReducedSystem) {
    SeparableSpec s;
    s.n_inputs = 1;
    s.B = Mat{{1, 1, 0}, {2, 2, 0}};
    s.frozen = {2};
    s.unfrozen = {0, 1};
    s.v_fn = [](std::span<const double>, std::span<double> out) { out[0] = out[1] = 0.0; };
    s = register_separable(s);
    EXPECT_THROW(linearize(s, Vec{0.0}, Vec{1, 1, 1}), RankDeficiencyError);
}

TEST(Linearize, ExactWhenFrozenComponentsUnchanged) {
    // any y with y_F = ŷ_F solving the reduced system satisfies the nonlinear constraint
    const auto th = reactor::default_thermo();
    const auto spec = reactor::build_reactor_spec(th);
    const auto g = reactor::generate_dataset(th, 20, 1, reactor::default_bounds(), 6);
    Rng rng(6);
    for (std::size_t r = 0; r < 20; ++r) {
        Vec y(g.train.y.row(r).begin(), g.train.y.row(r).end());
        y[reactor::out_T] += rng.uniform(-30, 30);
        const auto sys = linearize(spec, g.train.x.row(r), y);
        const Vec u = oracle::kkt_qp(sys.b_reduced, sys.rhs, Vec(spec.n_unfrozen(), 1.0));
        for (std::size_t j = 0; j < u.size(); ++j) y[spec.unfrozen[j]] = u[j];
        const auto res = residual_separable(spec, g.train.x.row(r), y);
        Vec ref(5);
        spec.reference_fn(g.train.x.row(r), ref);
        for (std::size_t k = 0; k < 5; ++k) EXPECT_LT(std::abs(res.residual[k]) / ref[k], 1e-10);
    }
}

TEST(Linearize, Idempotent) {
    const auto s = scalar_spec(4.0);
    const auto a = linearize(s, Vec{0.0}, Vec{1.3, 7.0});
    const auto b = linearize(s, Vec{0.0}, Vec{1.3, -2.0});
    EXPECT_EQ(a.b_reduced, b.b_reduced);
    EXPECT_EQ(a.rhs, b.rhs);
}

TEST(SeparableSpec, RegistrationChecks) {
    auto s = scalar_spec(1.0);
    auto bad = s;
    bad.unfrozen = {0};
    EXPECT_THROW(register_separable(bad), ConfigError);  // overlap, output 1 missing
    bad = s;
    bad.v_fn = nullptr;
    EXPECT_THROW(register_separable(bad), ConfigError);
    bad = s;
    bad.B = Mat(2, 2);
    bad.labels.clear();
    EXPECT_THROW(register_separable(bad), ConfigError);  // 2 constraints, 1 unfrozen
}
