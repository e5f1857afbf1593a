#pragma once

// Differentiable correction layers that map a raw prediction onto the
// constraint manifold by orthogonal (KKT) projection.
//
// Global layer, for A x + B y = b:
//   y~ = A* x + B* y^ + b*,   A* = -Bᵀ(BBᵀ)⁻¹A,  B* = I - Bᵀ(BBᵀ)⁻¹B,  b* = Bᵀ(BBᵀ)⁻¹b
//
// Picard layer, for a separable spec: the frozen outputs pass through
// unchanged and the unfrozen ones are projected onto the per-instance linear
// system obtained by freezing (see linearize()):
//   u~ = B*_i u^ + v*_i,     B*_i = I - B_iᵀ(B_i B_iᵀ)⁻¹B_i,  v*_i = B_iᵀ(B_i B_iᵀ)⁻¹ r_i

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "hardproj/constraints.hpp"
#include "hardproj/errors.hpp"
#include "hardproj/linalg.hpp"

namespace hardproj {

/// How picard_backward treats the dependence of F(y_F) on the frozen outputs.
enum class GradMode {
    frozen,  // F(y_F) is a constant of the layer (stop-gradient)
    exact,   // differentiate through F using the spec's analytic Jacobian
};

inline const char* to_string(GradMode m) { return m == GradMode::exact ? "exact" : "frozen"; }

struct GlobalProjection {
    Mat A_star;  // [N_O x N_I]
    Mat B_star;  // [N_O x N_O]
    Vec b_star;  // [N_O]
};

inline GlobalProjection build_global(const LinearSpec& spec) {
    const std::size_t nc = spec.n_constraints(), ni = spec.n_inputs(), no = spec.n_outputs();
    if (spec.A.rows() != nc || spec.b.size() != nc) throw ShapeError("build_global: inconsistent spec");
    // W = (BBᵀ)⁻¹ [A | B | b]
    Mat rhs(nc, ni + no + 1);
    for (std::size_t k = 0; k < nc; ++k) {
        for (std::size_t j = 0; j < ni; ++j) rhs(k, j) = spec.A(k, j);
        for (std::size_t j = 0; j < no; ++j) rhs(k, ni + j) = spec.B(k, j);
        rhs(k, ni + no) = spec.b[k];
    }
    const Mat w = spd_solve(gram_rows(spec.B), rhs);

    GlobalProjection p{Mat(no, ni), Mat::identity(no), Vec(no, 0.0)};
    for (std::size_t i = 0; i < no; ++i)
        for (std::size_t k = 0; k < nc; ++k) {
            const double bki = spec.B(k, i);
            if (bki == 0.0) continue;
            for (std::size_t j = 0; j < ni; ++j) p.A_star(i, j) -= bki * w(k, j);
            for (std::size_t j = 0; j < no; ++j) p.B_star(i, j) -= bki * w(k, ni + j);
            p.b_star[i] += bki * w(k, ni + no);
        }
    return p;
}

/// Projects every row of y_hat; rows of x are the matching inputs.
inline Mat apply_global(const GlobalProjection& p, const Mat& x, const Mat& y_hat) {
    const std::size_t no = p.B_star.rows(), ni = p.A_star.cols();
    if (x.rows() != y_hat.rows() || x.cols() != ni || y_hat.cols() != no)
        throw ShapeError("apply_global: shape mismatch");
    Mat out(y_hat.rows(), no);
    for (std::size_t b = 0; b < y_hat.rows(); ++b) {
        auto xb = x.row(b);
        auto yb = y_hat.row(b);
        auto ob = out.row(b);
        for (std::size_t i = 0; i < no; ++i) {
            double s = p.b_star[i];
            auto ar = p.A_star.row(i);
            auto br = p.B_star.row(i);
            for (std::size_t j = 0; j < ni; ++j) s += ar[j] * xb[j];
            for (std::size_t j = 0; j < no; ++j) s += br[j] * yb[j];
            ob[i] = s;
        }
    }
    return out;
}

inline Vec apply_global(const GlobalProjection& p, std::span<const double> x, std::span<const double> y_hat) {
    Mat xm = Mat::from_data(1, x.size(), Vec(x.begin(), x.end()));
    Mat ym = Mat::from_data(1, y_hat.size(), Vec(y_hat.begin(), y_hat.end()));
    const Mat r = apply_global(p, xm, ym);
    return {r.data().begin(), r.data().end()};
}

/// dL/dy^ = B*ᵀ dL/dy~ (A* x and b* do not depend on the prediction).
inline Mat global_backward(const GlobalProjection& p, const Mat& dL_dy_tilde) {
    const std::size_t no = p.B_star.rows();
    if (dL_dy_tilde.cols() != no) throw ShapeError("global_backward: gradient width");
    Mat g(dL_dy_tilde.rows(), no);
    for (std::size_t b = 0; b < g.rows(); ++b) {
        auto gin = dL_dy_tilde.row(b);
        auto gout = g.row(b);
        for (std::size_t i = 0; i < no; ++i) {
            auto br = p.B_star.row(i);
            for (std::size_t j = 0; j < no; ++j) gout[j] += br[j] * gin[i];
        }
    }
    return g;
}

/// Per-instance projection operators of the Picard layer.
struct ProjectionTensors {
    BatchMat B_star;  // [BS x N_U x N_U]
    Mat V_star;       // [BS x N_U]
};

/// Everything picard_backward needs from the forward pass. Constraint rows are
/// equilibrated to unit norm before factorization; `row_scale` records the
/// factors (the projection itself is invariant to row scaling).
struct PicardSaved {
    BatchMat b_eq;     // [BS x N_C x N_U]  equilibrated reduced matrix B'
    BatchMat chol;     // [BS x N_C x N_C]  Cholesky factor of B'B'ᵀ
    Mat rhs_eq;        // [BS x N_C]
    Mat row_scale;     // [BS x N_C]
    Mat multipliers;   // [BS x N_C]  unscaled KKT multipliers
    Mat y_frozen;      // [BS x N_F]
    Mat u_tilde;       // [BS x N_U]
    bool consumed = false;

    /// Materializes B* = I - B'ᵀ(B'B'ᵀ)⁻¹B' and V* = B'ᵀ(B'B'ᵀ)⁻¹ rhs' per
    /// instance, so that u~ = B* u^ + V*. The layer itself never forms them.
    ProjectionTensors tensors() const {
        const std::size_t bs = b_eq.batch(), nc = b_eq.rows(), nu = b_eq.cols();
        ProjectionTensors t{BatchMat(bs, nu, nu), Mat(bs, nu)};
        Vec w(nc * nu);
        for (std::size_t b = 0; b < bs; ++b) {
            auto br = b_eq.instance(b);
            std::copy(br.begin(), br.end(), w.begin());
            kernel::cholesky_solve(chol.instance(b), nc, w, nu);
            auto bstar = t.B_star.instance(b);
            for (std::size_t i = 0; i < nu; ++i) {
                for (std::size_t j = 0; j < nu; ++j) {
                    double acc = (i == j) ? 1.0 : 0.0;
                    for (std::size_t k = 0; k < nc; ++k) acc -= br[k * nu + i] * w[k * nu + j];
                    bstar[i * nu + j] = acc;
                }
                double acc = 0.0;
                for (std::size_t k = 0; k < nc; ++k) acc += w[k * nu + i] * rhs_eq(b, k);
                t.V_star(b, i) = acc;
            }
        }
        return t;
    }
};

struct PicardResult {
    Mat y_tilde;
    PicardSaved saved;
};

/// Projects every row of y_hat (physical units) onto the separable spec
/// linearized at its own frozen components. Frozen components are copied
/// bit-for-bit.
inline PicardResult picard_project(const SeparableSpec& spec, const Mat& x, const Mat& y_hat) {
    const std::size_t bs = y_hat.rows();
    const std::size_t nc = spec.n_constraints(), nu = spec.n_unfrozen(), nf = spec.n_frozen();
    if (x.rows() != bs || x.cols() != spec.n_inputs || y_hat.cols() != spec.n_outputs())
        throw ShapeError("picard_project: shape mismatch");

    PicardResult r;
    r.y_tilde = y_hat;
    PicardSaved& s = r.saved;
    s.b_eq = BatchMat(bs, nc, nu);
    s.chol = BatchMat(bs, nc, nc);
    s.rhs_eq = Mat(bs, nc);
    s.row_scale = Mat(bs, nc);
    s.multipliers = Mat(bs, nc);
    s.y_frozen = Mat(bs, nf);
    s.u_tilde = Mat(bs, nu);

    Vec u_hat(nu), lambda(nc);
    for (std::size_t b = 0; b < bs; ++b) {
        auto yb = y_hat.row(b);
        auto yf = s.y_frozen.row(b);
        auto b_red = s.b_eq.instance(b);
        auto rhs = s.rhs_eq.row(b);
        detail::gather(yb, spec.frozen, yf);
        detail::gather(yb, spec.unfrozen, u_hat);
        detail::linearize_into(spec, x.row(b), yf, b_red, rhs);

        auto scale = s.row_scale.row(b);
        for (std::size_t k = 0; k < nc; ++k) {
            double norm = 0.0;
            for (std::size_t j = 0; j < nu; ++j) norm += b_red[k * nu + j] * b_red[k * nu + j];
            norm = std::sqrt(norm);
            if (!(norm > 0.0)) throw RankDeficiencyError(k, 0.0, b);
            scale[k] = 1.0 / norm;
            for (std::size_t j = 0; j < nu; ++j) b_red[k * nu + j] *= scale[k];
            rhs[k] *= scale[k];
        }

        auto gram = s.chol.instance(b);
        for (std::size_t i = 0; i < nc; ++i)
            for (std::size_t j = 0; j <= i; ++j) {
                double acc = 0.0;
                for (std::size_t c = 0; c < nu; ++c) acc += b_red[i * nu + c] * b_red[j * nu + c];
                gram[i * nc + j] = acc;
                gram[j * nc + i] = acc;
            }
        try {
            kernel::cholesky_factor(gram, nc);
        } catch (const RankDeficiencyError& e) {
            throw e.at_instance(b);
        }

        // λ' = (B'B'ᵀ)⁻¹(B'u^ - rhs'),  u~ = u^ - B'ᵀλ'
        for (std::size_t k = 0; k < nc; ++k) {
            double acc = -rhs[k];
            for (std::size_t j = 0; j < nu; ++j) acc += b_red[k * nu + j] * u_hat[j];
            lambda[k] = acc;
        }
        kernel::cholesky_solve(gram, nc, lambda, 1);
        auto ut = s.u_tilde.row(b);
        auto yt = r.y_tilde.row(b);
        for (std::size_t i = 0; i < nu; ++i) {
            double acc = u_hat[i];
            for (std::size_t k = 0; k < nc; ++k) acc -= b_red[k * nu + i] * lambda[k];
            ut[i] = acc;
            yt[spec.unfrozen[i]] = acc;
        }
        for (std::size_t k = 0; k < nc; ++k) s.multipliers(b, k) = scale[k] * lambda[k];
    }
    return r;
}

/// Reverse pass of picard_project. Consumes `saved`.
///
/// With m = (B'B'ᵀ)⁻¹ B' g_u:
/// frozen: dL/du^ = g_u - B'ᵀ m,  dL/dy_F = g_F - B_Fᵀ diag(scale) m
/// exact:  additionally adds Σ_kj dL/dB_kj · dF_kj/dy_F with
///         dL/dB_kj = -λ_k (B* g_u)_j - μ_k u~_j,  μ = diag(scale) m
inline Mat picard_backward(const SeparableSpec& spec, PicardSaved& saved, const Mat& dL_dy_tilde,
                           GradMode mode = GradMode::frozen) {
    const std::size_t bs = saved.u_tilde.rows();
    const std::size_t nc = spec.n_constraints(), nu = spec.n_unfrozen(), nf = spec.n_frozen();
    if (saved.consumed) throw UsageError("picard_backward: projection tensors already consumed");
    if (saved.b_eq.rows() != nc || saved.b_eq.cols() != nu || saved.y_frozen.cols() != nf)
        throw UsageError("picard_backward: tensors were built for a different spec");
    if (dL_dy_tilde.rows() != bs || dL_dy_tilde.cols() != spec.n_outputs())
        throw ShapeError("picard_backward: gradient shape");
    const bool exact = mode == GradMode::exact && spec.has_nonlinear_term();
    if (exact && !spec.F_jacobian)
        throw ConfigError("picard_backward: exact mode needs an analytic Jacobian for F in spec '" + spec.id + "'");
    saved.consumed = true;

    // frozen columns that appear in B couple back through the rhs
    std::vector<std::size_t> coupled;
    for (std::size_t f = 0; f < nf; ++f)
        for (std::size_t k = 0; k < nc; ++k)
            if (spec.B(k, spec.frozen[f]) != 0.0) {
                coupled.push_back(f);
                break;
            }

    Mat g = dL_dy_tilde;
    Vec gu(nu), bg(nu), m(nc), mu(nc), dldb(nc * nu), jac(exact ? nf * nc * nu : 0);
    for (std::size_t b = 0; b < bs; ++b) {
        auto gin = dL_dy_tilde.row(b);
        auto gout = g.row(b);
        auto br = saved.b_eq.instance(b);
        detail::gather(gin, spec.unfrozen, gu);
        for (std::size_t k = 0; k < nc; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < nu; ++j) acc += br[k * nu + j] * gu[j];
            m[k] = acc;
        }
        kernel::cholesky_solve(saved.chol.instance(b), nc, m, 1);
        for (std::size_t j = 0; j < nu; ++j) {
            double acc = gu[j];
            for (std::size_t k = 0; k < nc; ++k) acc -= br[k * nu + j] * m[k];
            bg[j] = acc;
            gout[spec.unfrozen[j]] = acc;
        }
        auto scale = saved.row_scale.row(b);
        for (std::size_t k = 0; k < nc; ++k) mu[k] = scale[k] * m[k];
        for (std::size_t f : coupled) {
            double acc = 0.0;
            for (std::size_t k = 0; k < nc; ++k) acc -= spec.B(k, spec.frozen[f]) * mu[k];
            gout[spec.frozen[f]] += acc;
        }
        if (!exact) continue;

        auto lam = saved.multipliers.row(b);
        auto ut = saved.u_tilde.row(b);
        for (std::size_t k = 0; k < nc; ++k)
            for (std::size_t j = 0; j < nu; ++j) dldb[k * nu + j] = -lam[k] * bg[j] - mu[k] * ut[j];
        spec.F_jacobian(saved.y_frozen.row(b), jac);
        detail::require_finite(jac, spec, "F_jacobian", nu);
        for (std::size_t f = 0; f < nf; ++f) {
            double acc = 0.0;
            for (std::size_t e = 0; e < nc * nu; ++e) acc += dldb[e] * jac[f * nc * nu + e];
            gout[spec.frozen[f]] += acc;
        }
    }
    return g;
}

}  // namespace hardproj
