#pragma once

#include <cmath>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtcorl/delayed.hpp"
#include "dtcorl/nn.hpp"

namespace dtcorl {

enum class BeliefMode { Mse, Mle };

/// Batched belief-training input: base observations, the action windows with
/// per-slot mask flags, and the ground-truth label sequence for the window
/// positions. Labels at masked positions are flagged invalid and never enter
/// the loss.
struct BeliefBatch {
    int batch = 0;
    int delay = 0;
    int state_dim = 0;
    int action_dim = 0;
    Tensor base;                          // batch x state_dim
    std::vector<Tensor> window;           // delay entries, each batch x action_dim
    std::vector<std::vector<char>> mask;  // delay entries, each batch flags
    Tensor labels;                        // (batch*delay) x state_dim, row b*delay + j
    std::vector<char> label_valid;        // batch*delay
};

struct TransformerConfig {
    int state_dim = 1;
    int action_dim = 1;
    int max_delay = 16;
    int d_model = 64;
    int n_layers = 4;
    int n_heads = 4;
    int ff_dim = 256;
    double dropout = 0.1;
    BeliefMode mode = BeliefMode::Mse;

    bool operator==(const TransformerConfig&) const = default;
};

/// Causal sequence model mapping an augmented state (one state token followed
/// by the action window, mask slots replaced by a learned [MASK] embedding)
/// to one predicted state per window position. The head always emits mean and
/// log-scale columns; MSE mode reads only the mean half.
class TransformerBelief {
  public:
    TransformerConfig cfg;

    TransformerBelief() = default;

    TransformerBelief(const TransformerConfig& c, Rng& rng) : cfg(c) {
        if (cfg.d_model % cfg.n_heads != 0)
            throw std::invalid_argument("TransformerBelief: heads must divide d_model");
        state_embed_ = Linear("belief.state_embed", cfg.state_dim, cfg.d_model, rng);
        action_embed_ = Linear("belief.action_embed", cfg.action_dim, cfg.d_model, rng);
        mask_token_ = Parameter("belief.mask_token", 1, cfg.d_model);
        mask_token_.init_uniform_fan_in(cfg.d_model, rng);
        pos_embed_ = Parameter("belief.pos_embed", cfg.max_delay + 1, cfg.d_model);
        pos_embed_.init_uniform_fan_in(cfg.d_model, rng);
        blocks_.clear();
        for (int l = 0; l < cfg.n_layers; ++l) {
            Block b;
            const std::string pre = "belief.block" + std::to_string(l);
            b.ln1_g = gain_param(pre + ".ln1.g", cfg.d_model);
            b.ln1_b = Parameter(pre + ".ln1.b", 1, cfg.d_model);
            b.wq = Linear(pre + ".wq", cfg.d_model, cfg.d_model, rng);
            b.wk = Linear(pre + ".wk", cfg.d_model, cfg.d_model, rng);
            b.wv = Linear(pre + ".wv", cfg.d_model, cfg.d_model, rng);
            b.wo = Linear(pre + ".wo", cfg.d_model, cfg.d_model, rng);
            b.ln2_g = gain_param(pre + ".ln2.g", cfg.d_model);
            b.ln2_b = Parameter(pre + ".ln2.b", 1, cfg.d_model);
            b.ff1 = Linear(pre + ".ff1", cfg.d_model, cfg.ff_dim, rng);
            b.ff2 = Linear(pre + ".ff2", cfg.ff_dim, cfg.d_model, rng);
            blocks_.push_back(std::move(b));
        }
        lnf_g_ = gain_param("belief.lnf.g", cfg.d_model);
        lnf_b_ = Parameter("belief.lnf.b", 1, cfg.d_model);
        head_ = Linear("belief.head", cfg.d_model, 2 * cfg.state_dim, rng);
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out;
        state_embed_.collect(out);
        action_embed_.collect(out);
        out.push_back(&mask_token_);
        out.push_back(&pos_embed_);
        for (auto& b : blocks_) {
            out.push_back(&b.ln1_g);
            out.push_back(&b.ln1_b);
            b.wq.collect(out);
            b.wk.collect(out);
            b.wv.collect(out);
            b.wo.collect(out);
            out.push_back(&b.ln2_g);
            out.push_back(&b.ln2_b);
            b.ff1.collect(out);
            b.ff2.collect(out);
        }
        out.push_back(&lnf_g_);
        out.push_back(&lnf_b_);
        head_.collect(out);
        return out;
    }

    /// Builds the forward graph; returns the head output over all window
    /// positions: (batch*delay) x 2*state_dim, row b*delay + j.
    Tape::Var forward(Tape& t, const BeliefBatch& in, bool training, Rng* drop_rng) const {
        if (in.delay > cfg.max_delay)
            throw std::invalid_argument("TransformerBelief: window longer than configured max delay");
        if (in.delay <= 0) throw std::invalid_argument("TransformerBelief: empty window");
        const int B = in.batch, T = in.delay + 1;

        Tape::Var mask_row = t.param(const_cast<Parameter&>(mask_token_));
        std::vector<Tape::Var> tokens;
        tokens.reserve(static_cast<size_t>(T));
        tokens.push_back(state_embed_.forward(t, t.input(in.base)));
        for (int j = 0; j < in.delay; ++j) {
            Tape::Var tok = action_embed_.forward(t, t.input(in.window[static_cast<size_t>(j)]));
            tokens.push_back(t.replace_masked_rows(tok, in.mask[static_cast<size_t>(j)], mask_row));
        }
        Tape::Var h = t.stack_token_rows(tokens, B);
        h = t.add_positional(h, t.param(const_cast<Parameter&>(pos_embed_)), B, T);

        for (const auto& blk : blocks_) {
            Tape::Var x1 = t.layer_norm(h, t.param(const_cast<Parameter&>(blk.ln1_g)),
                                        t.param(const_cast<Parameter&>(blk.ln1_b)));
            Tape::Var q = blk.wq.forward(t, x1);
            Tape::Var k = blk.wk.forward(t, x1);
            Tape::Var v = blk.wv.forward(t, x1);
            Tape::Var att = t.causal_self_attention(q, k, v, B, T, cfg.n_heads);
            att = blk.wo.forward(t, att);
            if (training && drop_rng) att = t.dropout(att, cfg.dropout, *drop_rng, true);
            h = t.add(h, att);

            Tape::Var x2 = t.layer_norm(h, t.param(const_cast<Parameter&>(blk.ln2_g)),
                                        t.param(const_cast<Parameter&>(blk.ln2_b)));
            Tape::Var f = t.gelu(blk.ff1.forward(t, x2));
            if (training && drop_rng) f = t.dropout(f, cfg.dropout, *drop_rng, true);
            f = blk.ff2.forward(t, f);
            if (training && drop_rng) f = t.dropout(f, cfg.dropout, *drop_rng, true);
            h = t.add(h, f);
        }
        h = t.layer_norm(h, t.param(const_cast<Parameter&>(lnf_g_)),
                         t.param(const_cast<Parameter&>(lnf_b_)));

        // Keep only the action-token rows: position j of sample b predicts the
        // state reached after window action j.
        std::vector<int> idx;
        idx.reserve(static_cast<size_t>(B) * in.delay);
        for (int b = 0; b < B; ++b)
            for (int j = 1; j < T; ++j) idx.push_back(b * T + j);
        return head_.forward(t, t.gather_rows(h, idx));
    }

    /// MSE or Gaussian-NLL objective over unmasked positions.
    Tape::Var loss(Tape& t, const BeliefBatch& in, bool training, Rng* drop_rng) const {
        Tape::Var out = forward(t, in, training, drop_rng);
        Tape::Var mean = t.slice_cols(out, 0, cfg.state_dim);
        if (cfg.mode == BeliefMode::Mse) return t.mse_rows(mean, in.labels, in.label_valid);
        Tape::Var log_scale =
            t.clamp(t.slice_cols(out, cfg.state_dim, 2 * cfg.state_dim), -5.0, 2.0);
        return t.gauss_nll_rows(mean, log_scale, in.labels, in.label_valid);
    }

    struct Prediction {
        std::vector<VecF> means;       // delay entries
        std::vector<VecF> log_scales;  // delay entries (clamped)
    };

    /// Inference for one augmented state; the last mean is the belief point
    /// estimate used downstream.
    Prediction predict(const ContAugState& x) const {
        BeliefBatch b = single_batch(x);
        Tape t;
        Tape::Var out = forward(t, b, false, nullptr);
        const Tensor& o = t.val(out);
        Prediction p;
        for (int j = 0; j < b.delay; ++j) {
            VecF mean(static_cast<size_t>(cfg.state_dim));
            VecF ls(static_cast<size_t>(cfg.state_dim));
            for (int c = 0; c < cfg.state_dim; ++c) {
                mean[static_cast<size_t>(c)] = o.at(j, c);
                double raw = o.at(j, cfg.state_dim + c);
                ls[static_cast<size_t>(c)] = raw < -5.0 ? -5.0 : (raw > 2.0 ? 2.0 : raw);
            }
            p.means.push_back(std::move(mean));
            p.log_scales.push_back(std::move(ls));
        }
        return p;
    }

    BeliefBatch single_batch(const ContAugState& x) const {
        BeliefBatch b;
        b.batch = 1;
        b.delay = x.delay();
        b.state_dim = cfg.state_dim;
        b.action_dim = cfg.action_dim;
        b.base = Tensor(1, cfg.state_dim);
        for (int c = 0; c < cfg.state_dim; ++c) b.base.at(0, c) = x.base[static_cast<size_t>(c)];
        for (int j = 0; j < b.delay; ++j) {
            Tensor w(1, cfg.action_dim);
            const bool masked = j < x.masked_prefix;
            if (!masked)
                for (int c = 0; c < cfg.action_dim; ++c)
                    w.at(0, c) = x.window[static_cast<size_t>(j)][static_cast<size_t>(c)];
            b.window.push_back(std::move(w));
            b.mask.push_back({static_cast<char>(masked ? 1 : 0)});
        }
        b.labels = Tensor(b.delay, cfg.state_dim);
        b.label_valid.assign(static_cast<size_t>(b.delay), 1);
        return b;
    }

  private:
    struct Block {
        Parameter ln1_g, ln1_b;
        Linear wq, wk, wv, wo;
        Parameter ln2_g, ln2_b;
        Linear ff1, ff2;
    };

    static Parameter gain_param(const std::string& name, int d) {
        Parameter p(name, 1, d);
        for (auto& v : p.value.v) v = 1.0;
        return p;
    }

    Linear state_embed_, action_embed_;
    Parameter mask_token_;
    Parameter pos_embed_;
    std::vector<Block> blocks_;
    Parameter lnf_g_, lnf_b_;
    Linear head_;
};

/// One AdamW step with gradient clipping at global norm 1. Throws on a
/// non-finite loss.
template <class Model>
double belief_train_step(Model& model, const BeliefBatch& batch, AdamOptimizer& opt, Rng& rng) {
    Tape t;
    Tape::Var l = model.loss(t, batch, true, &rng);
    const double loss = t.val(l).at(0, 0);
    if (!std::isfinite(loss))
        throw std::runtime_error("belief_train_step: non-finite loss (diverged run)");
    auto params = model.params();
    zero_grads(params);
    t.backward(l);
    clip_grad_norm(params, 1.0);
    opt.step(params);
    return loss;
}

/// Central finite-difference verification of the hand-rolled reverse mode.
/// Compares the analytic gradient against (L(p+h) - L(p-h)) / 2h on
/// n_params_sampled randomly chosen parameters; returns the max relative
/// error with denominator max(|analytic|, |fd|, 1e-6).
template <class Model>
double gradient_check(Model& model, const BeliefBatch& batch, int n_params_sampled, Rng& rng) {
    auto params = model.params();
    zero_grads(params);
    {
        Tape t;
        Tape::Var l = model.loss(t, batch, false, nullptr);
        t.backward(l);
    }
    auto eval_loss = [&]() {
        Tape t;
        return t.val(model.loss(t, batch, false, nullptr)).at(0, 0);
    };
    size_t total = 0;
    for (const Parameter* p : params) total += p->value.v.size();
    double max_rel = 0.0;
    const double h = 1e-5;
    for (int k = 0; k < n_params_sampled; ++k) {
        size_t flat = static_cast<size_t>(rng.uniform_int(static_cast<int>(total)));
        Parameter* target = nullptr;
        for (Parameter* p : params) {
            if (flat < p->value.v.size()) {
                target = p;
                break;
            }
            flat -= p->value.v.size();
        }
        const double saved = target->value.v[flat];
        target->value.v[flat] = saved + h;
        const double lp = eval_loss();
        target->value.v[flat] = saved - h;
        const double lm = eval_loss();
        target->value.v[flat] = saved;
        const double fd = (lp - lm) / (2.0 * h);
        const double an = target->grad.v[flat];
        const double rel = std::abs(an - fd) / std::max({std::abs(an), std::abs(fd), 1e-6});
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace dtcorl
