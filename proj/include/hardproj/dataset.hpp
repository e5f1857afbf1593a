#pragma once

// Column-labeled sample tables, their CSV/stats files and reactor dataset
// generation.
//
// CSV layout:
//   # hardproj-dataset generator=<version> thermo=<version> seed=<n> split=<name> rows=<n>
//   T_in,P_in,...,n_c,T_out,...,T_hotspot
//   <values in shortest round-trip decimal form>
// Stats sidecar:
//   # hardproj-stats generator=<version> seed=<n> rows=<n>
//   column,mean,std
//   T_in,<mean>,<std>

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "hardproj/errors.hpp"
#include "hardproj/linalg.hpp"
#include "hardproj/reactor.hpp"
#include "hardproj/rng.hpp"

namespace hardproj {

/// Shortest decimal text that parses back to exactly `v`.
inline std::string format_real(double v) {
    char buf[40];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

/// Locale-independent; rejects trailing characters and non-finite values.
inline double parse_real(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw IoError("not a number: '" + s + "'");
    if (!std::isfinite(v)) throw IoError("non-finite number: '" + s + "'");
    return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream in(s);
    while (std::getline(in, cur, sep)) out.push_back(cur);
    if (!s.empty() && s.back() == sep) out.emplace_back();
    return out;
}

/// Per-column mean and (population) standard deviation.
struct ColumnStats {
    std::vector<std::string> columns;
    Vec mean;
    Vec stddev;
};

struct Dataset {
    std::vector<std::string> input_names;
    std::vector<std::string> output_names;
    Mat x;  // [rows x N_I]
    Mat y;  // [rows x N_O]
    ColumnStats stats;
    std::uint64_t seed = 0;
    std::string generator;
    std::string split = "train";

    std::size_t rows() const { return x.rows(); }

    Dataset subset(std::span<const std::size_t> idx) const {
        Dataset d = *this;
        d.x = Mat(idx.size(), x.cols());
        d.y = Mat(idx.size(), y.cols());
        for (std::size_t r = 0; r < idx.size(); ++r) {
            std::copy(x.row(idx[r]).begin(), x.row(idx[r]).end(), d.x.row(r).begin());
            std::copy(y.row(idx[r]).begin(), y.row(idx[r]).end(), d.y.row(r).begin());
        }
        return d;
    }
};

inline ColumnStats compute_stats(const Mat& x, const Mat& y, std::vector<std::string> names) {
    ColumnStats s;
    s.columns = std::move(names);
    const std::size_t n = x.rows();
    if (n == 0) throw ConfigError("compute_stats: empty table");
    auto add = [&](const Mat& m) {
        for (std::size_t j = 0; j < m.cols(); ++j) {
            double mean = 0.0;
            for (std::size_t r = 0; r < n; ++r) mean += m(r, j);
            mean /= static_cast<double>(n);
            double var = 0.0;
            for (std::size_t r = 0; r < n; ++r) var += (m(r, j) - mean) * (m(r, j) - mean);
            s.mean.push_back(mean);
            s.stddev.push_back(std::sqrt(var / static_cast<double>(n)));
        }
    };
    add(x);
    add(y);
    return s;
}

inline std::string dataset_comment(const Dataset& d) {
    return "# hardproj-dataset generator=" + d.generator + " seed=" + std::to_string(d.seed) +
           " split=" + d.split + " rows=" + std::to_string(d.rows());
}

inline void write_csv(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << dataset_comment(d) << '\n';
    bool first = true;
    for (const auto* names : {&d.input_names, &d.output_names})
        for (const auto& n : *names) {
            out << (first ? "" : ",") << n;
            first = false;
        }
    out << '\n';
    for (std::size_t r = 0; r < d.rows(); ++r) {
        first = true;
        for (const auto* m : {&d.x, &d.y})
            for (double v : m->row(r)) {
                out << (first ? "" : ",") << format_real(v);
                first = false;
            }
        out << '\n';
    }
    if (!out) throw IoError("write failed for " + path);
}

inline void write_stats(const ColumnStats& s, const Dataset& source, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << "# hardproj-stats generator=" << source.generator << " seed=" << source.seed
        << " rows=" << source.rows() << '\n';
    out << "column,mean,std\n";
    for (std::size_t j = 0; j < s.columns.size(); ++j)
        out << s.columns[j] << ',' << format_real(s.mean[j]) << ',' << format_real(s.stddev[j]) << '\n';
    if (!out) throw IoError("write failed for " + path);
}

/// Reads `key=value` tokens from a `# ...` comment line.
inline std::string comment_field(const std::string& line, const std::string& key) {
    std::istringstream in(line);
    std::string tok;
    while (in >> tok)
        if (tok.rfind(key + "=", 0) == 0) return tok.substr(key.size() + 1);
    return {};
}

/// Loads a dataset CSV; the first `n_inputs` columns are inputs.
inline Dataset read_csv(const std::string& path, std::size_t n_inputs = reactor::n_inputs) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    Dataset d;
    std::string line;
    std::vector<std::string> header;
    std::vector<double> values;
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            if (auto g = comment_field(line, "generator"); !g.empty()) d.generator = g;
            if (auto s = comment_field(line, "seed"); !s.empty()) {
                try {
                    d.seed = std::stoull(s);
                } catch (const std::exception&) {
                    throw IoError(path + ": bad seed in comment line");
                }
            }
            if (auto s = comment_field(line, "split"); !s.empty()) d.split = s;
            continue;
        }
        auto cells = split(line, ',');
        if (header.empty()) {
            header = cells;
            if (header.size() <= n_inputs) throw IoError(path + ": header has too few columns");
            continue;
        }
        if (cells.size() != header.size())
            throw IoError(path + ": row " + std::to_string(rows + 1) + " has " + std::to_string(cells.size()) +
                          " cells, expected " + std::to_string(header.size()));
        for (const auto& c : cells) values.push_back(parse_real(c));
        ++rows;
    }
    if (header.empty()) throw IoError(path + ": missing header");
    const std::size_t nc = header.size(), no = nc - n_inputs;
    d.input_names.assign(header.begin(), header.begin() + static_cast<std::ptrdiff_t>(n_inputs));
    d.output_names.assign(header.begin() + static_cast<std::ptrdiff_t>(n_inputs), header.end());
    d.x = Mat(rows, n_inputs);
    d.y = Mat(rows, no);
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t j = 0; j < nc; ++j) {
            const double v = values[r * nc + j];
            if (j < n_inputs)
                d.x(r, j) = v;
            else
                d.y(r, j - n_inputs) = v;
        }
    return d;
}

inline ColumnStats read_stats(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    ColumnStats s;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        auto cells = split(line, ',');
        if (cells.size() != 3) throw IoError(path + ": malformed stats row");
        s.columns.push_back(cells[0]);
        s.mean.push_back(parse_real(cells[1]));
        s.stddev.push_back(parse_real(cells[2]));
    }
    return s;
}

namespace reactor {

struct GeneratedData {
    Dataset train;
    Dataset test;
    std::size_t clipped = 0;  // samples whose extents hit the hydrogen limit
};

/// Throws unless the sample obeys non-negativity, the operating window and all five balances.
inline void check_sample(const SeparableSpec& spec, std::span<const double> x, std::span<const double> y,
                         double rel_tol = 1e-9) {
    for (std::size_t i = 0; i < n_species; ++i)
        if (y[out_flow0 + i] < 0.0) throw NumericalError("negative outlet flow");
    for (std::size_t j : {out_T, out_hotspot})
        if (y[j] < t_operating_min || y[j] > t_operating_max)
            throw NumericalError("outlet temperature " + std::to_string(y[j]) + " K outside operating range");
    const auto r = residual_separable(spec, x, y);
    Vec ref(spec.n_constraints());
    spec.reference_fn(x, ref);
    for (std::size_t k = 0; k < r.residual.size(); ++k)
        if (!(std::abs(r.residual[k]) <= rel_tol * ref[k]))
            throw NumericalError("balance '" + r.labels[k] + "' violated by generated sample");
}

/// Samples inputs uniformly in `bounds` (training rows first, then test rows)
/// and labels them with simulate(). Statistics come from the training split.
inline GeneratedData generate_dataset(const Thermo& th, std::size_t n_train, std::size_t n_test,
                                      const Bounds& bounds, std::uint64_t seed) {
    if (n_train == 0 || n_test == 0) throw ConfigError("generate_dataset: need at least one train and test row");
    bounds.validate();
    const SeparableSpec spec = build_reactor_spec(th);
    Rng rng(seed);
    GeneratedData g;
    auto fill = [&](Dataset& d, std::size_t n, const char* split_name) {
        d.input_names = input_columns();
        d.output_names = output_columns();
        d.x = Mat(n, n_inputs);
        d.y = Mat(n, n_outputs);
        d.seed = seed;
        d.generator = std::string(generator_version) + "+" + th.version;
        d.split = split_name;
        for (std::size_t r = 0; r < n; ++r) {
            auto xr = d.x.row(r);
            for (std::size_t j = 0; j < n_inputs; ++j) xr[j] = rng.uniform(bounds.lo[j], bounds.hi[j]);
            const SimResult s = simulate(th, xr);
            if (s.clipped) ++g.clipped;
            std::copy(s.y.begin(), s.y.end(), d.y.row(r).begin());
            check_sample(spec, xr, s.y);
        }
    };
    fill(g.train, n_train, "train");
    fill(g.test, n_test, "test");
    std::vector<std::string> names = input_columns();
    for (auto& n : output_columns()) names.push_back(n);
    g.train.stats = compute_stats(g.train.x, g.train.y, names);
    g.test.stats = g.train.stats;
    return g;
}

}  // namespace reactor

}  // namespace hardproj
