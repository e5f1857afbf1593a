#pragma once

// Equality-constraint systems attached to a network's outputs.
//
//   linear:     A x + B y = b
//   separable:  B y + F(y_F) y_U - v(x) = 0
//
// where y_F are the frozen output components and y_U the unfrozen ones. With
// y_F held fixed the separable system is linear in y_U, which is what the
// projection layers exploit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hardproj/errors.hpp"
#include "hardproj/linalg.hpp"

namespace hardproj {

using Labels = std::vector<std::string>;

struct ConstraintValue {
    Vec residual;
    Labels labels;
};

inline Labels default_labels(std::size_t n) {
    Labels l;
    for (std::size_t k = 0; k < n; ++k) l.push_back("c" + std::to_string(k));
    return l;
}

struct LinearSpec {
    std::string id;
    Mat A;  // [N_C x N_I]
    Mat B;  // [N_C x N_O]
    Vec b;  // [N_C]
    Labels labels;

    std::size_t n_constraints() const { return B.rows(); }
    std::size_t n_inputs() const { return A.cols(); }
    std::size_t n_outputs() const { return B.cols(); }
};

/// Validates shapes, N_C < N_O and full row rank of B.
inline LinearSpec make_linear_spec(Mat A, Mat B, Vec b, Labels labels = {}, std::string id = "linear") {
    const std::size_t nc = B.rows();
    if (nc == 0) throw ConfigError("linear spec: no constraints");
    if (A.rows() != nc || b.size() != nc) throw ShapeError("linear spec: A, B, b row counts differ");
    if (nc >= B.cols())
        throw ConfigError("linear spec: need fewer constraints (" + std::to_string(nc) + ") than outputs (" +
                          std::to_string(B.cols()) + ")");
    if (labels.empty()) labels = default_labels(nc);
    if (labels.size() != nc) throw ShapeError("linear spec: label count");
    Mat g = gram_rows(B);
    kernel::cholesky_factor(g.data(), nc);
    return {std::move(id), std::move(A), std::move(B), std::move(b), std::move(labels)};
}

inline ConstraintValue residual_linear(const LinearSpec& spec, std::span<const double> x, std::span<const double> y) {
    if (x.size() != spec.n_inputs() || y.size() != spec.n_outputs())
        throw ShapeError("residual_linear: x or y has the wrong length");
    ConstraintValue r{Vec(spec.n_constraints()), spec.labels};
    for (std::size_t k = 0; k < spec.n_constraints(); ++k) {
        double s = 0.0;
        for (std::size_t j = 0; j < x.size(); ++j) s += spec.A(k, j) * x[j];
        for (std::size_t j = 0; j < y.size(); ++j) s += spec.B(k, j) * y[j];
        r.residual[k] = s - spec.b[k];
    }
    return r;
}

/// Multiplicatively separable constraint system. Callbacks write into
/// caller-provided storage and must be pure.
struct SeparableSpec {
    /// x -> R^{N_C}
    using InputFn = std::function<void(std::span<const double> x, std::span<double> out)>;
    /// y_F -> row-major [N_C x N_U] (F) or [N_F x N_C x N_U] (dF/dy_F)
    using FrozenFn = std::function<void(std::span<const double> y_frozen, std::span<double> out)>;

    std::string id;
    std::size_t n_inputs = 0;
    Mat B;  // [N_C x N_O]
    std::vector<std::size_t> frozen;
    std::vector<std::size_t> unfrozen;
    InputFn v_fn;
    FrozenFn F_fn;         // empty means F ≡ 0
    FrozenFn F_jacobian;   // optional; presence marks F as differentiable
    InputFn reference_fn;  // optional inlet-side magnitudes used for relative errors
    Labels labels;

    std::size_t n_constraints() const { return B.rows(); }
    std::size_t n_outputs() const { return B.cols(); }
    std::size_t n_frozen() const { return frozen.size(); }
    std::size_t n_unfrozen() const { return unfrozen.size(); }
    bool has_nonlinear_term() const { return static_cast<bool>(F_fn); }
    bool differentiable() const { return !F_fn || static_cast<bool>(F_jacobian); }
};

/// Checks the partition and dimensions of a separable spec and fills default labels.
inline SeparableSpec register_separable(SeparableSpec spec) {
    const std::size_t nc = spec.n_constraints(), no = spec.n_outputs();
    if (nc == 0) throw ConfigError("separable spec: no constraints");
    if (!spec.v_fn) throw ConfigError("separable spec: v_fn is required");
    std::vector<int> seen(no, 0);
    for (auto idx : spec.frozen) {
        if (idx >= no) throw ConfigError("separable spec: frozen index out of range");
        ++seen[idx];
    }
    for (auto idx : spec.unfrozen) {
        if (idx >= no) throw ConfigError("separable spec: unfrozen index out of range");
        ++seen[idx];
    }
    for (std::size_t j = 0; j < no; ++j)
        if (seen[j] != 1)
            throw ConfigError("separable spec: output " + std::to_string(j) +
                              " must be in exactly one of frozen/unfrozen");
    if (nc > spec.n_unfrozen())
        throw ConfigError("separable spec: " + std::to_string(nc) + " constraints exceed " +
                          std::to_string(spec.n_unfrozen()) + " unfrozen outputs");
    if (spec.labels.empty()) spec.labels = default_labels(nc);
    if (spec.labels.size() != nc) throw ShapeError("separable spec: label count");
    return spec;
}

namespace detail {

/// `row_width` is the number of entries per constraint row in `v`.
inline void require_finite(std::span<const double> v, const SeparableSpec& spec, const char* what,
                           std::size_t row_width = 1) {
    for (std::size_t i = 0; i < v.size(); ++i)
        if (!std::isfinite(v[i])) {
            const std::size_t row = (i / row_width) % spec.n_constraints();
            throw NumericalError(std::string(what) + " returned a non-finite value for constraint '" +
                                 spec.labels[row] + "' in spec '" + spec.id + "'");
        }
}

inline void gather(std::span<const double> y, std::span<const std::size_t> idx, std::span<double> out) {
    for (std::size_t i = 0; i < idx.size(); ++i) out[i] = y[idx[i]];
}

/// Evaluates F(y_F) into `f` ([N_C x N_U]); zero when the spec has no nonlinear term.
inline void eval_F(const SeparableSpec& spec, std::span<const double> y_frozen, std::span<double> f) {
    if (!spec.F_fn) {
        std::fill(f.begin(), f.end(), 0.0);
        return;
    }
    spec.F_fn(y_frozen, f);
    require_finite(f, spec, "F_fn", spec.n_unfrozen());
}

/// Reduced system over unfrozen outputs with y_F fixed:
///   b_red = B[:,U] + F(y_F),  rhs = v(x) - B[:,F] y_F
/// `y_frozen` must already hold y[frozen].
inline void linearize_into(const SeparableSpec& spec, std::span<const double> x, std::span<const double> y_frozen,
                           std::span<double> b_red, std::span<double> rhs) {
    const std::size_t nc = spec.n_constraints(), nu = spec.n_unfrozen();
    eval_F(spec, y_frozen, b_red);
    spec.v_fn(x, rhs);
    require_finite(rhs, spec, "v_fn");
    for (std::size_t k = 0; k < nc; ++k) {
        auto brow = spec.B.row(k);
        for (std::size_t j = 0; j < nu; ++j) b_red[k * nu + j] += brow[spec.unfrozen[j]];
        double s = rhs[k];
        for (std::size_t f = 0; f < spec.n_frozen(); ++f) s -= brow[spec.frozen[f]] * y_frozen[f];
        rhs[k] = s;
    }
}

}  // namespace detail

namespace detail {

/// B y + F(y_F) y_U - v for a precomputed v. `f` needs N_C·N_U entries and
/// `y_frozen` N_F; both are scratch.
inline void residual_given_v(const SeparableSpec& spec, std::span<const double> v, std::span<const double> y,
                             std::span<double> f, std::span<double> y_frozen, std::span<double> out) {
    const std::size_t nc = spec.n_constraints(), nu = spec.n_unfrozen();
    gather(y, spec.frozen, y_frozen);
    eval_F(spec, y_frozen, f);
    for (std::size_t k = 0; k < nc; ++k) {
        double s = 0.0;
        auto brow = spec.B.row(k);
        for (std::size_t j = 0; j < y.size(); ++j) s += brow[j] * y[j];
        for (std::size_t j = 0; j < nu; ++j) s += f[k * nu + j] * y[spec.unfrozen[j]];
        out[k] = s - v[k];
    }
}

}  // namespace detail

/// B y + F(y_F) y_U - v(x)
inline ConstraintValue residual_separable(const SeparableSpec& spec, std::span<const double> x,
                                          std::span<const double> y) {
    if (x.size() != spec.n_inputs || y.size() != spec.n_outputs())
        throw ShapeError("residual_separable: x or y has the wrong length");
    const std::size_t nc = spec.n_constraints();
    Vec y_frozen(spec.n_frozen()), f(nc * spec.n_unfrozen()), v(nc);
    spec.v_fn(x, v);
    detail::require_finite(v, spec, "v_fn");
    ConstraintValue r{Vec(nc), spec.labels};
    detail::residual_given_v(spec, v, y, f, y_frozen, r.residual);
    return r;
}

struct LinearizedSystem {
    Mat b_reduced;  // [N_C x N_U]
    Vec rhs;        // [N_C]
};

/// Freezes y_F at the prediction and returns the linear system in the unfrozen
/// outputs. Throws RankDeficiencyError if b_reduced lacks full row rank.
inline LinearizedSystem linearize(const SeparableSpec& spec, std::span<const double> x,
                                  std::span<const double> y_hat) {
    if (x.size() != spec.n_inputs || y_hat.size() != spec.n_outputs())
        throw ShapeError("linearize: x or y_hat has the wrong length");
    const std::size_t nc = spec.n_constraints(), nu = spec.n_unfrozen();
    Vec y_frozen(spec.n_frozen());
    detail::gather(y_hat, spec.frozen, y_frozen);
    LinearizedSystem sys{Mat(nc, nu), Vec(nc)};
    detail::linearize_into(spec, x, y_frozen, sys.b_reduced.data(), sys.rhs);
    Mat g = gram_rows(sys.b_reduced);
    kernel::cholesky_factor(g.data(), nc);
    return sys;
}

}  // namespace hardproj
