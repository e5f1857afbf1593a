#pragma once

// Fully connected backbone: Glorot initialization, forward pass with a tape,
// manual reverse mode, MSE loss and Adam.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hardproj/errors.hpp"
#include "hardproj/linalg.hpp"
#include "hardproj/rng.hpp"

namespace hardproj {

enum class Activation { relu };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
    }
    return "?";
}

struct Layer {
    Mat weight;  // [out x in]
    Vec bias;    // [out]
};

/// Backbone weights. Hidden layers use `activation`, the output layer is affine.
struct MlpParams {
    std::vector<Layer> layers;
    Activation activation = Activation::relu;

    std::size_t in_dim() const { return layers.empty() ? 0 : layers.front().weight.cols(); }
    std::size_t out_dim() const { return layers.empty() ? 0 : layers.back().bias.size(); }

    std::vector<std::size_t> dims() const {
        std::vector<std::size_t> d;
        if (layers.empty()) return d;
        d.push_back(in_dim());
        for (const auto& l : layers) d.push_back(l.bias.size());
        return d;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers) n += l.weight.size() + l.bias.size();
        return n;
    }

    /// Weight then bias of every layer, in layer order.
    std::vector<std::span<double>> blocks() {
        std::vector<std::span<double>> out;
        for (auto& l : layers) {
            out.push_back(l.weight.data());
            out.push_back(l.bias);
        }
        return out;
    }
    std::vector<std::span<const double>> blocks() const {
        std::vector<std::span<const double>> out;
        for (const auto& l : layers) {
            out.push_back(l.weight.data());
            out.push_back(l.bias);
        }
        return out;
    }

    /// Parameter at a flat index across blocks().
    double& at(std::size_t flat) {
        for (auto b : blocks()) {
            if (flat < b.size()) return b[flat];
            flat -= b.size();
        }
        throw ShapeError("parameter index out of range");
    }
    double at(std::size_t flat) const { return const_cast<MlpParams&>(*this).at(flat); }

    void validate() const {
        if (layers.empty()) throw ConfigError("network has no layers");
        for (std::size_t k = 0; k < layers.size(); ++k) {
            const auto& l = layers[k];
            if (l.weight.rows() != l.bias.size()) throw ShapeError("layer " + std::to_string(k) + ": bias size");
            if (k > 0 && layers[k - 1].bias.size() != l.weight.cols())
                throw ShapeError("layer " + std::to_string(k) + ": input width does not chain");
        }
    }

    friend bool operator==(const MlpParams& a, const MlpParams& b) {
        if (a.activation != b.activation || a.layers.size() != b.layers.size()) return false;
        for (std::size_t k = 0; k < a.layers.size(); ++k)
            if (!(a.layers[k].weight == b.layers[k].weight) || a.layers[k].bias != b.layers[k].bias) return false;
        return true;
    }
};

inline MlpParams zeros_like(const MlpParams& p) {
    MlpParams z;
    z.activation = p.activation;
    for (const auto& l : p.layers) z.layers.push_back({Mat(l.weight.rows(), l.weight.cols()), Vec(l.bias.size())});
    return z;
}

/// Uniform Glorot initialization, weights in ±sqrt(6/(fan_in+fan_out)), zero biases.
/// `dims` lists widths from input to output, e.g. {10, 64, 10}.
inline MlpParams glorot_init(std::span<const std::size_t> dims, std::uint64_t seed) {
    if (dims.size() < 2) throw ConfigError("glorot_init: need at least input and output widths");
    for (auto d : dims)
        if (d == 0) throw ConfigError("glorot_init: zero layer width");
    Rng rng(seed);
    MlpParams p;
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        const std::size_t fan_in = dims[k], fan_out = dims[k + 1];
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        Layer l{Mat(fan_out, fan_in), Vec(fan_out, 0.0)};
        for (double& w : l.weight.data()) w = rng.uniform(-bound, bound);
        p.layers.push_back(std::move(l));
    }
    return p;
}

inline MlpParams glorot_init(std::initializer_list<std::size_t> dims, std::uint64_t seed) {
    return glorot_init(std::span<const std::size_t>(dims.begin(), dims.size()), seed);
}

class Tape;
struct ForwardResult;
ForwardResult forward(const MlpParams& params, const Mat& x);
MlpParams backward(const MlpParams& params, Tape& tape, const Mat& dL_dy);

/// Activations recorded by forward() for a single backward().
class Tape {
public:
    bool fresh() const noexcept { return recorded_ && !consumed_; }

private:
    friend ForwardResult forward(const MlpParams&, const Mat&);
    friend MlpParams backward(const MlpParams&, Tape&, const Mat&);

    std::vector<Mat> inputs_;  // input of each layer
    bool recorded_ = false;
    bool consumed_ = false;
};

struct ForwardResult {
    Mat y;
    Tape tape;
};

/// Rows of `x` are samples.
inline ForwardResult forward(const MlpParams& params, const Mat& x) {
    if (params.layers.empty()) throw ConfigError("forward: network has no layers");
    if (x.cols() != params.in_dim())
        throw ShapeError("forward: input width " + std::to_string(x.cols()) + " != " +
                         std::to_string(params.in_dim()));
    ForwardResult r;
    r.tape.inputs_.reserve(params.layers.size());
    Mat h = x;
    const std::size_t bs = x.rows();
    for (std::size_t k = 0; k < params.layers.size(); ++k) {
        const auto& l = params.layers[k];
        const bool hidden = k + 1 < params.layers.size();
        Mat out(bs, l.bias.size());
        for (std::size_t i = 0; i < bs; ++i) {
            auto hi = h.row(i);
            auto oi = out.row(i);
            for (std::size_t o = 0; o < l.bias.size(); ++o) {
                auto w = l.weight.row(o);
                double s = l.bias[o];
                for (std::size_t j = 0; j < hi.size(); ++j) s += w[j] * hi[j];
                oi[o] = (hidden && s < 0.0) ? 0.0 : s;
            }
        }
        r.tape.inputs_.push_back(std::move(h));
        h = std::move(out);
    }
    r.y = std::move(h);
    r.tape.recorded_ = true;
    return r;
}

/// Parameter gradients for upstream gradient dL_dy. Consumes the tape.
inline MlpParams backward(const MlpParams& params, Tape& tape, const Mat& dL_dy) {
    if (!tape.recorded_) throw UsageError("backward: tape was never recorded");
    if (tape.consumed_) throw UsageError("backward: tape already consumed");
    if (tape.inputs_.size() != params.layers.size()) throw UsageError("backward: tape does not match network");
    const std::size_t bs = tape.inputs_.front().rows();
    if (dL_dy.rows() != bs || dL_dy.cols() != params.out_dim()) throw ShapeError("backward: upstream gradient shape");
    tape.consumed_ = true;

    MlpParams grads = zeros_like(params);
    Mat g = dL_dy;
    for (std::size_t k = params.layers.size(); k-- > 0;) {
        const auto& l = params.layers[k];
        const Mat& in = tape.inputs_[k];
        auto& gl = grads.layers[k];
        for (std::size_t i = 0; i < bs; ++i) {
            auto gi = g.row(i);
            auto xi = in.row(i);
            for (std::size_t o = 0; o < gi.size(); ++o) {
                const double go = gi[o];
                if (go == 0.0) continue;
                gl.bias[o] += go;
                auto gw = gl.weight.row(o);
                for (std::size_t j = 0; j < xi.size(); ++j) gw[j] += go * xi[j];
            }
        }
        if (k == 0) break;
        // propagate to the previous layer's post-activation, masking inactive ReLU units
        Mat prev(bs, l.weight.cols());
        for (std::size_t i = 0; i < bs; ++i) {
            auto gi = g.row(i);
            auto pi = prev.row(i);
            auto xi = in.row(i);
            for (std::size_t o = 0; o < gi.size(); ++o) {
                const double go = gi[o];
                if (go == 0.0) continue;
                auto w = l.weight.row(o);
                for (std::size_t j = 0; j < pi.size(); ++j) pi[j] += go * w[j];
            }
            for (std::size_t j = 0; j < pi.size(); ++j)
                if (!(xi[j] > 0.0)) pi[j] = 0.0;
        }
        g = std::move(prev);
    }
    return grads;
}

struct LossResult {
    double value = 0.0;
    Mat grad;  // dL/dy_hat
};

/// Mean over batch and outputs of the squared error.
inline LossResult mse_loss(const Mat& y_hat, const Mat& y) {
    if (y_hat.rows() != y.rows() || y_hat.cols() != y.cols()) throw ShapeError("mse_loss: shape mismatch");
    LossResult r{0.0, Mat(y.rows(), y.cols())};
    if (y.size() == 0) return r;
    const double inv_n = 1.0 / static_cast<double>(y.size());
    auto a = y_hat.data();
    auto b = y.data();
    auto g = r.grad.data();
    for (std::size_t k = 0; k < a.size(); ++k) {
        const double d = a[k] - b[k];
        r.value += d * d;
        g[k] = 2.0 * d * inv_n;
    }
    r.value *= inv_n;
    return r;
}

/// Adam moments and hyperparameters; `m` and `v` mirror the parameter shapes.
struct AdamState {
    std::size_t step = 0;
    MlpParams m;
    MlpParams v;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState for_params(const MlpParams& p, double lr) {
        AdamState s;
        s.m = zeros_like(p);
        s.v = zeros_like(p);
        s.lr = lr;
        return s;
    }
};

/// Bias-corrected Adam update, in place.
inline void adam_step(MlpParams& params, const MlpParams& grads, AdamState& state) {
    auto pb = params.blocks();
    auto gb = grads.blocks();
    auto mb = state.m.blocks();
    auto vb = state.v.blocks();
    if (pb.size() != gb.size() || pb.size() != mb.size() || pb.size() != vb.size())
        throw ShapeError("adam_step: parameter structure mismatch");
    for (std::size_t k = 0; k < pb.size(); ++k)
        if (pb[k].size() != gb[k].size() || pb[k].size() != mb[k].size() || pb[k].size() != vb[k].size())
            throw ShapeError("adam_step: block " + std::to_string(k) + " size mismatch");

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(state.beta1, t);
    const double c2 = 1.0 - std::pow(state.beta2, t);
    for (std::size_t k = 0; k < pb.size(); ++k) {
        auto p = pb[k];
        auto g = gb[k];
        auto m = mb[k];
        auto v = vb[k];
        for (std::size_t i = 0; i < p.size(); ++i) {
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
        }
    }
}

}  // namespace hardproj
