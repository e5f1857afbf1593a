#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "hardproj/dataset.hpp"
#include "hardproj/errors.hpp"
#include "hardproj/metrics.hpp"
#include "hardproj/model.hpp"
#include "hardproj/net.hpp"
#include "hardproj/rng.hpp"

namespace hardproj {

struct TrainConfig {
    Variant variant = Variant::picard;
    std::vector<std::size_t> hidden{64};
    std::size_t epochs = 5000;
    double lr = 1e-3;
    std::size_t batch_size = 2000;
    std::uint64_t seed = 42;
    double train_fraction = 1.0;
    bool normalize = true;
    GradMode grad_mode = GradMode::frozen;
    std::string constraint = reactor::constraint_id;
    bool log_rce = true;  // track post-correction RCE of training batches

    /// 4k/500 samples, 5k epochs, lr 1e-3.
    static TrainConfig desk() { return {}; }

    /// 20k/500 samples, 50k epochs, lr 1e-5, batch 2000, one hidden layer of 64 ReLU units.
    static TrainConfig paper_scale() {
        TrainConfig c;
        c.epochs = 50000;
        c.lr = 1e-5;
        c.batch_size = 2000;
        return c;
    }

    void validate() const {
        if (epochs == 0) throw ConfigError("epochs must be positive");
        if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
        if (batch_size == 0) throw ConfigError("batch size must be positive");
        if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw ConfigError("train fraction must be in (0, 1]");
        for (auto h : hidden)
            if (h == 0) throw ConfigError("hidden layer widths must be positive");
    }
};

/// Rows kept for a training fraction: a seeded uniform sample without
/// replacement, returned in original row order. fraction 1 keeps every row.
inline std::vector<std::size_t> fraction_indices(std::size_t n, double fraction, std::uint64_t seed) {
    if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("train fraction must be in (0, 1]");
    const auto keep = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
    std::vector<std::size_t> idx;
    if (keep >= n) {
        idx.resize(n);
        for (std::size_t i = 0; i < n; ++i) idx[i] = i;
        return idx;
    }
    Rng rng(seed ^ 0x5eed5a3b1e5ULL);
    idx = rng.permutation(n);
    idx.resize(keep);
    std::sort(idx.begin(), idx.end());
    return idx;
}

struct EpochLog {
    std::size_t epoch = 0;
    double loss = 0.0;          // sample-weighted mean of batch losses
    double max_rce = std::numeric_limits<double>::quiet_NaN();  // percent, over enforced balances
    double seconds = 0.0;       // wall time of the epoch
};

struct TrainResult {
    Model model;
    std::vector<EpochLog> log;
    std::size_t rows_used = 0;
};

/// Indices of evaluation-spec rows that a variant enforces exactly.
inline std::vector<std::size_t> enforced_rows(const Model& m) {
    std::vector<std::size_t> rows;
    const auto& sep = m.constraints().separable;
    if (!sep || !sep->reference_fn) return rows;
    if (m.variant() == Variant::picard)
        for (std::size_t k = 0; k < sep->n_constraints(); ++k) rows.push_back(k);
    if (m.variant() == Variant::kkt)
        for (std::size_t k = 0; k < sep->n_constraints(); ++k)
            if (std::find(m.constraints().linear->labels.begin(), m.constraints().linear->labels.end(),
                          sep->labels[k]) != m.constraints().linear->labels.end())
                rows.push_back(k);
    return rows;
}

inline Model make_model(const TrainConfig& cfg, const Dataset& train) {
    std::vector<std::size_t> dims{train.x.cols()};
    dims.insert(dims.end(), cfg.hidden.begin(), cfg.hidden.end());
    dims.push_back(train.y.cols());
    Normalizer norm = cfg.normalize ? Normalizer::from_stats(train.stats, train.x.cols())
                                    : Normalizer::identity(train.x.cols(), train.y.cols());
    return Model(cfg.variant, glorot_init(dims, cfg.seed), std::move(norm), resolve_constraints(cfg.constraint),
                 cfg.grad_mode);
}

/// Mini-batch Adam on the (possibly subsampled) training set. Normalization
/// statistics are taken from `train.stats`. Single-threaded and deterministic.
inline TrainResult train(const TrainConfig& cfg, const Dataset& train,
                         const std::function<void(const EpochLog&)>& on_epoch = {}) {
    cfg.validate();
    const auto rows = fraction_indices(train.rows(), cfg.train_fraction, cfg.seed);
    if (cfg.batch_size > rows.size())
        throw ConfigError("batch size " + std::to_string(cfg.batch_size) + " exceeds the " +
                          std::to_string(rows.size()) + " training rows in use");
    const Dataset data = rows.size() == train.rows() ? train : train.subset(rows);

    TrainResult result{make_model(cfg, train), {}, rows.size()};
    Model& model = result.model;
    AdamState adam = AdamState::for_params(model.params(), cfg.lr);
    const auto enforced = cfg.log_rce ? enforced_rows(model) : std::vector<std::size_t>{};
    Rng shuffler(cfg.seed + 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(data.rows());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    const std::size_t n = data.rows();
    // v(x) and the RCE references depend on inputs only; evaluate them once
    const SeparableSpec* spec = model.constraints().separable.get();
    Mat v_rows, ref_rows;
    Vec f_buf, yf_buf, res_buf;
    if (!enforced.empty()) {
        const std::size_t nc = spec->n_constraints();
        v_rows = Mat(n, nc);
        ref_rows = Mat(n, nc);
        for (std::size_t r = 0; r < n; ++r) {
            spec->v_fn(data.x.row(r), v_rows.row(r));
            spec->reference_fn(data.x.row(r), ref_rows.row(r));
        }
        f_buf.resize(nc * spec->n_unfrozen());
        yf_buf.resize(spec->n_frozen());
        res_buf.resize(nc);
    }
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        shuffler.shuffle(order);
        EpochLog log;
        log.epoch = epoch;
        if (!enforced.empty()) log.max_rce = 0.0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t bs = std::min(cfg.batch_size, n - start);
            Mat xb(bs, data.x.cols()), yb(bs, data.y.cols());
            for (std::size_t r = 0; r < bs; ++r) {
                const std::size_t src = order[start + r];
                std::copy(data.x.row(src).begin(), data.x.row(src).end(), xb.row(r).begin());
                std::copy(data.y.row(src).begin(), data.y.row(src).end(), yb.row(r).begin());
            }
            StepResult step;
            try {
                step = model.loss_and_grad(xb, yb);
            } catch (const RankDeficiencyError& e) {
                const std::size_t row = e.has_instance() ? rows[order[start + e.instance()]] : 0;
                throw NumericalError("epoch " + std::to_string(epoch) + ", training row " + std::to_string(row) +
                                     ": " + e.what());
            }
            log.loss += step.loss * static_cast<double>(bs);
            for (std::size_t r = 0; r < bs && !enforced.empty(); ++r) {
                const std::size_t src = order[start + r];
                detail::residual_given_v(*spec, v_rows.row(src), step.y_pred.row(r), f_buf, yf_buf, res_buf);
                for (auto k : enforced)
                    log.max_rce = std::max(log.max_rce, 100.0 * std::abs(res_buf[k]) / ref_rows(src, k));
            }
            adam_step(model.params(), step.grads, adam);
        }
        log.loss /= static_cast<double>(n);
        log.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (on_epoch) on_epoch(log);
        result.log.push_back(log);
    }
    return result;
}

}  // namespace hardproj
