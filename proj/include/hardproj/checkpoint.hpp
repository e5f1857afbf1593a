#pragma once

// Text checkpoint, one record per line, reals printed in shortest round-trip
// digits so that save → load is exact:
//
//   hardproj-checkpoint 1
//   variant <mlp|kkt|picard>
//   constraint <id>
//   grad_mode <frozen|exact>
//   activation relu
//   dims <n0> <n1> ... <nL>
//   x_mean <N_I reals>
//   x_std <N_I reals>
//   y_mean <N_O reals>
//   y_std <N_O reals>
//   weight <k> <rows> <cols> <rows*cols reals, row-major>
//   bias <k> <n> <n reals>
//   ...                       (weight/bias for every layer k)
//   end

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "hardproj/dataset.hpp"
#include "hardproj/errors.hpp"
#include "hardproj/model.hpp"

namespace hardproj {

inline constexpr int checkpoint_version = 1;

inline std::string serialize_checkpoint(const Model& m) {
    std::ostringstream out;
    auto reals = [&](const char* key, std::span<const double> v) {
        out << key;
        for (double d : v) out << ' ' << format_real(d);
        out << '\n';
    };
    const auto& p = m.params();
    out << "hardproj-checkpoint " << checkpoint_version << '\n';
    out << "variant " << to_string(m.variant()) << '\n';
    out << "constraint " << m.constraints().id << '\n';
    out << "grad_mode " << to_string(m.grad_mode()) << '\n';
    out << "activation " << to_string(p.activation) << '\n';
    out << "dims";
    for (auto d : p.dims()) out << ' ' << d;
    out << '\n';
    reals("x_mean", m.normalizer().x_mean);
    reals("x_std", m.normalizer().x_std);
    reals("y_mean", m.normalizer().y_mean);
    reals("y_std", m.normalizer().y_std);
    for (std::size_t k = 0; k < p.layers.size(); ++k) {
        const auto& l = p.layers[k];
        out << "weight " << k << ' ' << l.weight.rows() << ' ' << l.weight.cols();
        for (double d : l.weight.data()) out << ' ' << format_real(d);
        out << '\n';
        out << "bias " << k << ' ' << l.bias.size();
        for (double d : l.bias) out << ' ' << format_real(d);
        out << '\n';
    }
    out << "end\n";
    return out.str();
}

inline void save_checkpoint(const Model& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << serialize_checkpoint(m);
    if (!out) throw IoError("write failed for " + path);
}

inline Model parse_checkpoint(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    auto next = [&](const std::string& key) {
        while (std::getline(in, line))
            if (!line.empty()) break;
        std::istringstream ls(line);
        std::string k;
        ls >> k;
        if (k != key) throw IoError("checkpoint: expected '" + key + "', found '" + k + "'");
        std::vector<std::string> rest;
        std::string tok;
        while (ls >> tok) rest.push_back(tok);
        return rest;
    };
    auto to_reals = [](const std::vector<std::string>& t, std::size_t from) {
        Vec v;
        for (std::size_t i = from; i < t.size(); ++i) v.push_back(parse_real(t[i]));
        return v;
    };
    auto to_size = [](const std::string& s) {
        try {
            return static_cast<std::size_t>(std::stoull(s));
        } catch (const std::exception&) {
            throw IoError("checkpoint: bad integer '" + s + "'");
        }
    };

    auto head = next("hardproj-checkpoint");
    if (head.size() != 1 || head[0] != std::to_string(checkpoint_version))
        throw IoError("checkpoint: unsupported version");
    const Variant variant = parse_variant(next("variant").at(0));
    const std::string constraint = next("constraint").at(0);
    const GradMode mode = parse_grad_mode(next("grad_mode").at(0));
    if (next("activation").at(0) != "relu") throw IoError("checkpoint: unsupported activation");
    std::vector<std::size_t> dims;
    for (const auto& t : next("dims")) dims.push_back(to_size(t));
    if (dims.size() < 2) throw IoError("checkpoint: need at least two layer widths");

    Normalizer norm;
    norm.x_mean = to_reals(next("x_mean"), 0);
    norm.x_std = to_reals(next("x_std"), 0);
    norm.y_mean = to_reals(next("y_mean"), 0);
    norm.y_std = to_reals(next("y_std"), 0);

    MlpParams p;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        auto w = next("weight");
        if (w.size() < 3 || to_size(w[0]) != k) throw IoError("checkpoint: weight record out of order");
        const std::size_t rows = to_size(w[1]), cols = to_size(w[2]);
        if (rows != dims[k + 1] || cols != dims[k]) throw IoError("checkpoint: weight shape disagrees with dims");
        if (w.size() != 3 + rows * cols) throw IoError("checkpoint: weight " + std::to_string(k) + " is truncated");
        Mat weight = Mat::from_data(rows, cols, to_reals(w, 3));
        auto b = next("bias");
        if (b.size() < 2 || to_size(b[0]) != k || to_size(b[1]) != rows) throw IoError("checkpoint: bad bias record");
        Vec bias = to_reals(b, 2);
        if (bias.size() != rows) throw IoError("checkpoint: bias length");
        p.layers.push_back({std::move(weight), std::move(bias)});
    }
    next("end");
    return Model(variant, std::move(p), std::move(norm), resolve_constraints(constraint), mode);
}

inline Model load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str());
}

}  // namespace hardproj
