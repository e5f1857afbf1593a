#pragma once

// Accuracy and conservation metrics: per-column R², MAPE and the relative
// conservation error (RCE) of each balance.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "hardproj/constraints.hpp"
#include "hardproj/dataset.hpp"
#include "hardproj/errors.hpp"
#include "hardproj/linalg.hpp"

namespace hardproj::metrics {

/// 1 - SS_res/SS_tot for every column.
inline Vec r_squared(const Mat& y_true, const Mat& y_pred, const std::vector<std::string>& names = {}) {
    if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols()) throw ShapeError("r_squared: shape");
    if (y_true.rows() < 2) throw ConfigError("r_squared: need at least two samples");
    const std::size_t n = y_true.rows();
    Vec r2(y_true.cols());
    for (std::size_t j = 0; j < y_true.cols(); ++j) {
        double mean = 0.0;
        for (std::size_t r = 0; r < n; ++r) mean += y_true(r, j);
        mean /= static_cast<double>(n);
        double ss_tot = 0.0, ss_res = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
            ss_tot += (y_true(r, j) - mean) * (y_true(r, j) - mean);
            ss_res += (y_true(r, j) - y_pred(r, j)) * (y_true(r, j) - y_pred(r, j));
        }
        if (!(ss_tot > 0.0))
            throw NumericalError("undefined metric: R² of zero-variance column '" +
                                 (j < names.size() ? names[j] : std::to_string(j)) + "'");
        r2[j] = 1.0 - ss_res / ss_tot;
    }
    return r2;
}

inline double mean(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

struct MapeResult {
    double percent = 0.0;
    std::size_t excluded = 0;  // entries with |truth| <= eps
};

inline MapeResult mape(const Mat& y_true, const Mat& y_pred, double eps = 1e-12) {
    if (y_true.rows() != y_pred.rows() || y_true.cols() != y_pred.cols()) throw ShapeError("mape: shape");
    MapeResult m;
    double sum = 0.0;
    std::size_t used = 0;
    auto t = y_true.data();
    auto p = y_pred.data();
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (!(std::abs(t[k]) > eps)) {
            ++m.excluded;
            continue;
        }
        sum += std::abs(p[k] - t[k]) / std::abs(t[k]);
        ++used;
    }
    m.percent = used ? 100.0 * sum / static_cast<double>(used) : 0.0;
    return m;
}

/// |residual_k| / reference_k · 100 for one sample.
inline Vec rce(const SeparableSpec& spec, std::span<const double> x, std::span<const double> y) {
    if (!spec.reference_fn) throw ConfigError("rce: spec '" + spec.id + "' declares no reference magnitudes");
    const auto r = residual_separable(spec, x, y);
    Vec ref(spec.n_constraints());
    spec.reference_fn(x, ref);
    Vec out(ref.size());
    for (std::size_t k = 0; k < ref.size(); ++k) {
        if (!(ref[k] > 0.0)) throw NumericalError("rce: zero reference for constraint '" + spec.labels[k] + "'");
        out[k] = 100.0 * std::abs(r.residual[k]) / ref[k];
    }
    return out;
}

/// Row-wise rce over a batch; returns [rows x N_C] percents.
inline Mat rce(const SeparableSpec& spec, const Mat& x, const Mat& y) {
    if (x.rows() != y.rows()) throw ShapeError("rce: row counts differ");
    Mat out(x.rows(), spec.n_constraints());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const Vec v = rce(spec, x.row(r), y.row(r));
        std::copy(v.begin(), v.end(), out.row(r).begin());
    }
    return out;
}

inline constexpr const char* rce_reference_note =
    "RCE reference: inlet atomic flow per element; |inlet enthalpy flow| for the energy balance";

struct EvalReport {
    std::string model_tag;
    std::string dataset_tag;
    std::vector<std::string> output_names;
    Vec r2;
    double r2_mean = 0.0;
    double mape = 0.0;
    std::size_t mape_excluded = 0;
    Labels constraint_labels;
    Vec rce_mean;
    Vec rce_max;
    std::string rce_reference = rce_reference_note;
};

inline EvalReport evaluate(const SeparableSpec& spec, const Mat& x, const Mat& y_true, const Mat& y_pred,
                           std::string model_tag, std::string dataset_tag,
                           std::vector<std::string> output_names = {}) {
    EvalReport rep;
    rep.model_tag = std::move(model_tag);
    rep.dataset_tag = std::move(dataset_tag);
    rep.output_names = output_names.empty() ? default_labels(y_true.cols()) : std::move(output_names);
    rep.r2 = r_squared(y_true, y_pred, rep.output_names);
    rep.r2_mean = mean(rep.r2);
    const auto m = mape(y_true, y_pred);
    rep.mape = m.percent;
    rep.mape_excluded = m.excluded;
    rep.constraint_labels = spec.labels;
    const Mat e = rce(spec, x, y_pred);
    rep.rce_mean.assign(spec.n_constraints(), 0.0);
    rep.rce_max.assign(spec.n_constraints(), 0.0);
    for (std::size_t r = 0; r < e.rows(); ++r)
        for (std::size_t k = 0; k < e.cols(); ++k) {
            rep.rce_mean[k] += e(r, k);
            rep.rce_max[k] = std::max(rep.rce_max[k], e(r, k));
        }
    for (auto& v : rep.rce_mean) v /= static_cast<double>(std::max<std::size_t>(1, e.rows()));
    return rep;
}

namespace detail {

inline std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

}  // namespace detail

/// Aligned text table, one column per model.
inline std::string format_table(std::span<const EvalReport> reports) {
    std::vector<std::pair<std::string, std::vector<std::string>>> rows;
    auto add = [&](std::string name, auto cell) {
        std::vector<std::string> cells;
        for (const auto& r : reports) cells.push_back(cell(r));
        rows.emplace_back(std::move(name), std::move(cells));
    };
    add("R2 [-]", [](const EvalReport& r) { return detail::fmt("%.4f", r.r2_mean); });
    add("MAPE [%]", [](const EvalReport& r) { return detail::fmt("%.4f", r.mape); });
    if (!reports.empty()) {
        const auto& labels = reports.front().constraint_labels;
        for (std::size_t k = 0; k < labels.size(); ++k) {
            add("RCE " + labels[k] + " mean [%]", [k](const EvalReport& r) { return detail::fmt("%.3e", r.rce_mean[k]); });
            add("RCE " + labels[k] + " max [%]", [k](const EvalReport& r) { return detail::fmt("%.3e", r.rce_max[k]); });
        }
        const auto& outs = reports.front().output_names;
        for (std::size_t j = 0; j < outs.size(); ++j)
            add("R2 " + outs[j], [j](const EvalReport& r) { return detail::fmt("%.4f", r.r2[j]); });
    }

    std::size_t w0 = 6;
    for (const auto& [name, _] : rows) w0 = std::max(w0, name.size());
    std::vector<std::size_t> w(reports.size());
    for (std::size_t c = 0; c < reports.size(); ++c) {
        w[c] = reports[c].model_tag.size();
        for (const auto& [_, cells] : rows) w[c] = std::max(w[c], cells[c].size());
    }
    std::ostringstream out;
    auto pad = [](const std::string& s, std::size_t n) { return s + std::string(n - std::min(n, s.size()), ' '); };
    auto lpad = [](const std::string& s, std::size_t n) { return std::string(n - std::min(n, s.size()), ' ') + s; };
    out << pad("metric", w0);
    for (std::size_t c = 0; c < reports.size(); ++c) out << "  " << lpad(reports[c].model_tag, w[c]);
    out << '\n';
    for (const auto& [name, cells] : rows) {
        out << pad(name, w0);
        for (std::size_t c = 0; c < cells.size(); ++c) out << "  " << lpad(cells[c], w[c]);
        out << '\n';
    }
    if (!reports.empty()) out << "dataset: " << reports.front().dataset_tag << "\n" << reports.front().rce_reference << '\n';
    return out.str();
}

/// Long-format CSV: model,dataset,metric,value.
inline std::string format_csv(std::span<const EvalReport> reports) {
    std::ostringstream out;
    out << "model,dataset,metric,value\n";
    for (const auto& r : reports) {
        auto row = [&](const std::string& metric, double v) {
            out << r.model_tag << ',' << r.dataset_tag << ',' << metric << ',' << format_real(v) << '\n';
        };
        row("r2_mean", r.r2_mean);
        row("mape_percent", r.mape);
        row("mape_excluded", static_cast<double>(r.mape_excluded));
        for (std::size_t k = 0; k < r.constraint_labels.size(); ++k) {
            row("rce_mean_percent_" + r.constraint_labels[k], r.rce_mean[k]);
            row("rce_max_percent_" + r.constraint_labels[k], r.rce_max[k]);
        }
        for (std::size_t j = 0; j < r.output_names.size(); ++j) row("r2_" + r.output_names[j], r.r2[j]);
    }
    return out.str();
}

}  // namespace hardproj::metrics
