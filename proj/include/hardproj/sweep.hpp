#pragma once

// Data-scarcity sweep: train each variant on seeded uniform subsets of the
// training set and score it on the full test set.

#include <algorithm>
#include <cstdint>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "hardproj/dataset.hpp"
#include "hardproj/metrics.hpp"
#include "hardproj/train.hpp"

namespace hardproj {

struct SweepConfig {
    TrainConfig base;
    std::vector<double> fractions{0.2, 0.35, 0.5, 1.0};
    std::vector<Variant> variants{Variant::mlp, Variant::kkt, Variant::picard};
    std::vector<std::uint64_t> seeds{42};
    // stop after the first fraction (in ascending order) at which some
    // variant's median R² is positive
    bool stop_at_first_positive = false;

    void validate() const {
        base.validate();
        if (fractions.empty() || variants.empty() || seeds.empty())
            throw ConfigError("sweep needs at least one fraction, variant and seed");
        for (double f : fractions)
            if (!(f > 0.0 && f <= 1.0)) throw ConfigError("sweep fractions must lie in (0, 1]");
    }
};

struct SweepRow {
    Variant variant = Variant::mlp;
    double fraction = 1.0;
    std::uint64_t seed = 0;
    std::size_t rows = 0;
    std::size_t batch_size = 0;
    double r2_mean = 0.0;
    double mape = 0.0;
    Vec rce_max;  // percent, per balance
};

inline double median(std::vector<double> v) {
    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

/// Median test R² of one variant at one fraction.
inline double median_r2(const std::vector<SweepRow>& rows, Variant v, double fraction) {
    std::vector<double> r;
    for (const auto& row : rows)
        if (row.variant == v && row.fraction == fraction) r.push_back(row.r2_mean);
    return median(std::move(r));
}

/// Batches larger than a subset are clamped to the subset size; `on_note`
/// receives a message whenever that happens.
inline std::vector<SweepRow> run_sweep(const SweepConfig& cfg, const Dataset& train_set, const Dataset& test_set,
                                       const std::function<void(const SweepRow&)>& on_row = {},
                                       const std::function<void(const std::string&)>& on_note = {}) {
    cfg.validate();
    std::vector<double> fractions = cfg.fractions;
    std::sort(fractions.begin(), fractions.end());
    fractions.erase(std::unique(fractions.begin(), fractions.end()), fractions.end());

    // test-set RCE is always measured against the full reactor spec
    const auto eval_spec = resolve_constraints(reactor::constraint_id).separable;
    std::vector<SweepRow> out;
    for (double f : fractions) {
        for (Variant v : cfg.variants)
            for (std::uint64_t seed : cfg.seeds) {
                TrainConfig tc = cfg.base;
                tc.variant = v;
                tc.seed = seed;
                tc.train_fraction = f;
                tc.log_rce = false;
                const std::size_t n = fraction_indices(train_set.rows(), f, seed).size();
                if (tc.batch_size > n) {
                    if (on_note)
                        on_note("fraction " + format_real(f) + ": batch size " + std::to_string(tc.batch_size) +
                                " clamped to " + std::to_string(n) + " rows");
                    tc.batch_size = n;
                }
                const auto result = train(tc, train_set);
                const Mat pred = result.model.predict(test_set.x);
                const auto rep = metrics::evaluate(*eval_spec, test_set.x, test_set.y, pred, to_string(v), "test",
                                                   test_set.output_names);
                SweepRow row{v, f, seed, n, tc.batch_size, rep.r2_mean, rep.mape, rep.rce_max};
                if (on_row) on_row(row);
                out.push_back(std::move(row));
            }
        if (cfg.stop_at_first_positive) {
            bool any = false;
            for (Variant v : cfg.variants) any = any || median_r2(out, v, f) > 0.0;
            if (any) break;
        }
    }
    return out;
}

/// variant,fraction,seed,rows,batch_size,r2_mean,mape_percent,rce_max_percent_<label>...
inline std::string format_sweep_csv(const std::vector<SweepRow>& rows, const Labels& labels) {
    std::ostringstream out;
    out << "variant,fraction,seed,rows,batch_size,r2_mean,mape_percent";
    for (const auto& l : labels) out << ",rce_max_percent_" << l;
    out << '\n';
    for (const auto& r : rows) {
        out << to_string(r.variant) << ',' << format_real(r.fraction) << ',' << r.seed << ',' << r.rows << ','
            << r.batch_size << ',' << format_real(r.r2_mean) << ',' << format_real(r.mape);
        for (double e : r.rce_max) out << ',' << format_real(e);
        out << '\n';
    }
    return out.str();
}

}  // namespace hardproj
