#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dtcorl/autodiff.hpp"

namespace dtcorl {

struct Linear {
    Parameter W;  // in x out
    Parameter b;  // 1 x out

    Linear() = default;
    Linear(const std::string& name, int in, int out, Rng& rng)
        : W(name + ".W", in, out), b(name + ".b", 1, out) {
        W.init_uniform_fan_in(in, rng);
    }

    Tape::Var forward(Tape& t, Tape::Var x) const {
        Tape::Var w = t.param(const_cast<Parameter&>(W));
        Tape::Var bb = t.param(const_cast<Parameter&>(b));
        return t.add_rowvec(t.matmul_op(x, w), bb);
    }

    /// Plain forward without tape recording (targets, rollouts).
    Tensor apply(const Tensor& x) const {
        Tensor out = matmul(x, W.value);
        for (int r = 0; r < out.rows; ++r)
            for (int c = 0; c < out.cols; ++c) out.at(r, c) += b.value.at(0, c);
        return out;
    }

    void collect(std::vector<Parameter*>& out) {
        out.push_back(&W);
        out.push_back(&b);
    }
};

enum class Activation { ReLU, Gelu, Tanh };

inline Tape::Var apply_activation(Tape& t, Tape::Var x, Activation act) {
    switch (act) {
        case Activation::ReLU: return t.relu(x);
        case Activation::Gelu: return t.gelu(x);
        case Activation::Tanh: return t.tanh_op(x);
    }
    return x;
}

inline double activation_scalar(double x, Activation act) {
    switch (act) {
        case Activation::ReLU: return x > 0.0 ? x : 0.0;
        case Activation::Gelu: return Tape::gelu_fwd(x);
        case Activation::Tanh: return std::tanh(x);
    }
    return x;
}

/// Feed-forward network with configurable hidden widths and activation.
/// Optionally squashes the output through tanh (actor networks).
struct Mlp {
    std::vector<Linear> layers;
    Activation hidden_act = Activation::ReLU;
    bool squash_output = false;

    Mlp() = default;
    Mlp(const std::string& name, int in, const std::vector<int>& hidden, int out,
        Activation act, bool squash, Rng& rng)
        : hidden_act(act), squash_output(squash) {
        int prev = in;
        for (size_t i = 0; i < hidden.size(); ++i) {
            layers.emplace_back(name + ".l" + std::to_string(i), prev, hidden[i], rng);
            prev = hidden[i];
        }
        layers.emplace_back(name + ".out", prev, out, rng);
    }

    Tape::Var forward(Tape& t, Tape::Var x) const {
        for (size_t i = 0; i + 1 < layers.size(); ++i)
            x = apply_activation(t, layers[i].forward(t, x), hidden_act);
        x = layers.back().forward(t, x);
        if (squash_output) x = t.tanh_op(x);
        return x;
    }

    Tensor apply(const Tensor& x) const {
        Tensor h = x;
        for (size_t i = 0; i + 1 < layers.size(); ++i) {
            h = layers[i].apply(h);
            for (auto& v : h.v) v = activation_scalar(v, hidden_act);
        }
        h = layers.back().apply(h);
        if (squash_output)
            for (auto& v : h.v) v = std::tanh(v);
        return h;
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out;
        for (auto& l : layers) l.collect(out);
        return out;
    }

    /// Hard copy of all parameter values (used for target networks).
    void copy_values_from(const Mlp& other) {
        for (size_t i = 0; i < layers.size(); ++i) {
            layers[i].W.value = other.layers[i].W.value;
            layers[i].b.value = other.layers[i].b.value;
        }
    }

    /// theta_target <- tau * theta + (1 - tau) * theta_target
    void soft_update_from(const Mlp& live, double tau) {
        for (size_t i = 0; i < layers.size(); ++i) {
            auto blend = [tau](Tensor& tgt, const Tensor& src) {
                for (size_t k = 0; k < tgt.v.size(); ++k)
                    tgt.v[k] = tau * src.v[k] + (1.0 - tau) * tgt.v[k];
            };
            blend(layers[i].W.value, live.layers[i].W.value);
            blend(layers[i].b.value, live.layers[i].b.value);
        }
    }
};

}  // namespace dtcorl
