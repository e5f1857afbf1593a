#pragma once

// A backbone plus an optional correction layer, with z-score normalization
// folded around it. The network works in normalized units; constraint layers
// work in physical units:
//
//   z = net((x - mx)/sx),  y^ = my + sy·z,  y~ = project(x, y^),  z~ = (y~ - my)/sy
//
// and the training loss is the MSE between z~ and the normalized targets.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <utility>

#include "hardproj/constraints.hpp"
#include "hardproj/dataset.hpp"
#include "hardproj/errors.hpp"
#include "hardproj/linalg.hpp"
#include "hardproj/net.hpp"
#include "hardproj/projection.hpp"
#include "hardproj/reactor.hpp"

namespace hardproj {

enum class Variant {
    mlp,     // plain backbone
    kkt,     // backbone + global linear projection
    picard,  // backbone + frozen-variable projection of the separable spec
};

inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::mlp: return "mlp";
        case Variant::kkt: return "kkt";
        case Variant::picard: return "picard";
    }
    return "?";
}

inline Variant parse_variant(const std::string& s) {
    if (s == "mlp") return Variant::mlp;
    if (s == "kkt") return Variant::kkt;
    if (s == "picard") return Variant::picard;
    throw ConfigError("unknown model variant '" + s + "' (expected mlp, kkt or picard)");
}

inline GradMode parse_grad_mode(const std::string& s) {
    if (s == "frozen") return GradMode::frozen;
    if (s == "exact") return GradMode::exact;
    throw ConfigError("unknown gradient mode '" + s + "' (expected frozen or exact)");
}

struct Normalizer {
    Vec x_mean, x_std, y_mean, y_std;

    static Normalizer identity(std::size_t n_in, std::size_t n_out) {
        return {Vec(n_in, 0.0), Vec(n_in, 1.0), Vec(n_out, 0.0), Vec(n_out, 1.0)};
    }

    /// Uses the first n_in stats columns for inputs, the rest for outputs.
    /// Zero-spread columns get a unit scale.
    static Normalizer from_stats(const ColumnStats& s, std::size_t n_in) {
        if (s.mean.size() <= n_in || s.stddev.size() != s.mean.size()) throw ShapeError("normalizer: stats shape");
        Normalizer n;
        auto cut = static_cast<std::ptrdiff_t>(n_in);
        n.x_mean.assign(s.mean.begin(), s.mean.begin() + cut);
        n.y_mean.assign(s.mean.begin() + cut, s.mean.end());
        n.x_std.assign(s.stddev.begin(), s.stddev.begin() + cut);
        n.y_std.assign(s.stddev.begin() + cut, s.stddev.end());
        for (auto* v : {&n.x_std, &n.y_std})
            for (double& d : *v)
                if (!(d > 0.0)) d = 1.0;
        return n;
    }

    static Mat to_normalized(const Mat& m, const Vec& mean, const Vec& sd) {
        if (m.cols() != mean.size()) throw ShapeError("normalizer: column count");
        Mat out(m.rows(), m.cols());
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t j = 0; j < m.cols(); ++j) out(r, j) = (m(r, j) - mean[j]) / sd[j];
        return out;
    }
    static Mat to_physical(const Mat& m, const Vec& mean, const Vec& sd) {
        if (m.cols() != mean.size()) throw ShapeError("normalizer: column count");
        Mat out(m.rows(), m.cols());
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t j = 0; j < m.cols(); ++j) out(r, j) = mean[j] + sd[j] * m(r, j);
        return out;
    }

    Mat normalize_x(const Mat& x) const { return to_normalized(x, x_mean, x_std); }
    Mat normalize_y(const Mat& y) const { return to_normalized(y, y_mean, y_std); }
    Mat denormalize_y(const Mat& z) const { return to_physical(z, y_mean, y_std); }

    friend bool operator==(const Normalizer&, const Normalizer&) = default;
};

/// Constraint systems attached to a model, looked up by identifier.
struct ConstraintBundle {
    std::string id;
    std::shared_ptr<const SeparableSpec> separable;  // evaluation spec; drives the Picard layer
    std::shared_ptr<const LinearSpec> linear;        // linear subset; drives the KKT layer
};

inline ConstraintBundle resolve_constraints(const std::string& id) {
    if (id == reactor::constraint_id) {
        const auto th = reactor::default_thermo();
        return {id, std::make_shared<const SeparableSpec>(reactor::build_reactor_spec(th)),
                std::make_shared<const LinearSpec>(reactor::build_reactor_linear_spec(th))};
    }
    if (id == "none") return {id, nullptr, nullptr};
    throw ConfigError("unknown constraint set '" + id + "'");
}

struct StepResult {
    double loss = 0.0;
    MlpParams grads;
    Mat y_pred;  // physical units, after any correction layer
};

class Model {
public:
    Model(Variant variant, MlpParams params, Normalizer norm, ConstraintBundle constraints,
          GradMode grad_mode = GradMode::frozen)
        : variant_(variant),
          params_(std::move(params)),
          norm_(std::move(norm)),
          constraints_(std::move(constraints)),
          grad_mode_(grad_mode) {
        params_.validate();
        if (norm_.x_mean.size() != params_.in_dim() || norm_.y_mean.size() != params_.out_dim())
            throw ShapeError("model: normalizer does not match network widths");
        if (variant_ == Variant::kkt) {
            if (!constraints_.linear) throw ConfigError("kkt variant needs a linear constraint spec");
            if (constraints_.linear->n_inputs() != params_.in_dim() ||
                constraints_.linear->n_outputs() != params_.out_dim())
                throw ShapeError("kkt variant: constraint spec does not match network widths");
            global_ = build_global(*constraints_.linear);
        }
        if (variant_ == Variant::picard) {
            if (!constraints_.separable) throw ConfigError("picard variant needs a separable constraint spec");
            if (constraints_.separable->n_inputs != params_.in_dim() ||
                constraints_.separable->n_outputs() != params_.out_dim())
                throw ShapeError("picard variant: constraint spec does not match network widths");
            if (grad_mode_ == GradMode::exact && !constraints_.separable->differentiable())
                throw ConfigError("exact gradient mode needs an analytic Jacobian of F");
        }
    }

    Variant variant() const { return variant_; }
    GradMode grad_mode() const { return grad_mode_; }
    const MlpParams& params() const { return params_; }
    MlpParams& params() { return params_; }
    const Normalizer& normalizer() const { return norm_; }
    const ConstraintBundle& constraints() const { return constraints_; }
    const std::optional<GlobalProjection>& global_projection() const { return global_; }

    /// Prediction in physical units.
    Mat predict(const Mat& x) const {
        const Mat y_hat = norm_.denormalize_y(forward(params_, norm_.normalize_x(x)).y);
        switch (variant_) {
            case Variant::mlp: return y_hat;
            case Variant::kkt: return apply_global(*global_, x, y_hat);
            case Variant::picard: return picard_project(*constraints_.separable, x, y_hat).y_tilde;
        }
        return y_hat;
    }

    /// Normalized-MSE loss of the corrected prediction and its parameter gradient.
    StepResult loss_and_grad(const Mat& x, const Mat& y) const {
        auto fwd = forward(params_, norm_.normalize_x(x));
        const Mat z_true = norm_.normalize_y(y);
        StepResult s;
        if (variant_ == Variant::mlp) {
            auto l = mse_loss(fwd.y, z_true);
            s.loss = l.value;
            s.y_pred = norm_.denormalize_y(fwd.y);
            s.grads = backward(params_, fwd.tape, l.grad);
            return s;
        }
        const Mat y_hat = norm_.denormalize_y(fwd.y);
        std::optional<PicardResult> picard;
        if (variant_ == Variant::kkt)
            s.y_pred = apply_global(*global_, x, y_hat);
        else {
            picard = picard_project(*constraints_.separable, x, y_hat);
            s.y_pred = picard->y_tilde;
        }
        auto l = mse_loss(norm_.normalize_y(s.y_pred), z_true);
        s.loss = l.value;
        // chain rule through the affine (de)normalization maps
        Mat g_phys = scale_columns(l.grad, norm_.y_std, /*divide=*/true);
        Mat g_hat = variant_ == Variant::kkt
                        ? global_backward(*global_, g_phys)
                        : picard_backward(*constraints_.separable, picard->saved, g_phys, grad_mode_);
        s.grads = backward(params_, fwd.tape, scale_columns(g_hat, norm_.y_std, /*divide=*/false));
        return s;
    }

    double loss(const Mat& x, const Mat& y) const {
        return mse_loss(norm_.normalize_y(predict(x)), norm_.normalize_y(y)).value;
    }

private:
    static Mat scale_columns(const Mat& m, const Vec& s, bool divide) {
        Mat out(m.rows(), m.cols());
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t j = 0; j < m.cols(); ++j) out(r, j) = divide ? m(r, j) / s[j] : m(r, j) * s[j];
        return out;
    }

    Variant variant_;
    MlpParams params_;
    Normalizer norm_;
    ConstraintBundle constraints_;
    GradMode grad_mode_;
    std::optional<GlobalProjection> global_;
};

}  // namespace hardproj
