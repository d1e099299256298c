#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dtcorl/transformer.hpp"

namespace dtcorl {

struct EnsembleConfig {
    int state_dim = 1;
    int action_dim = 1;
    int max_delay = 16;
    int n_members = 5;
    std::vector<int> hidden = {128, 128};
    BeliefMode mode = BeliefMode::Mse;

    bool operator==(const EnsembleConfig&) const = default;
};

/// Ensemble of independent one-step dynamics MLPs. Each member maps
/// (state, action) to the next state (mean and log-scale); multi-step belief
/// prediction composes the one-step models autoregressively, and the ensemble
/// output is the member mean. Training is teacher-forced on ground-truth
/// one-step transitions extracted from the window labels.
class EnsembleBelief {
  public:
    EnsembleConfig cfg;

    EnsembleBelief() = default;

    EnsembleBelief(const EnsembleConfig& c, Rng& rng) : cfg(c) {
        if (cfg.n_members <= 0) throw std::invalid_argument("EnsembleBelief: need members");
        for (int m = 0; m < cfg.n_members; ++m)
            members_.emplace_back("ensemble.m" + std::to_string(m), cfg.state_dim + cfg.action_dim,
                                  cfg.hidden, 2 * cfg.state_dim, Activation::Gelu, false, rng);
    }

    std::vector<Parameter*> params() {
        std::vector<Parameter*> out;
        for (auto& m : members_) {
            auto p = m.params();
            out.insert(out.end(), p.begin(), p.end());
        }
        return out;
    }

    int n_members() const { return static_cast<int>(members_.size()); }

    /// Teacher-forced one-step objective averaged over members: for every
    /// unmasked window position the input is the true previous state and the
    /// window action, the target the labeled next state.
    Tape::Var loss(Tape& t, const BeliefBatch& in, bool /*training*/, Rng* /*drop_rng*/) const {
        if (in.delay > cfg.max_delay)
            throw std::invalid_argument("EnsembleBelief: window longer than configured max delay");
        // Assemble teacher-forced rows.
        std::vector<std::pair<int, int>> rows;  // (sample, position)
        for (int b = 0; b < in.batch; ++b)
            for (int j = 0; j < in.delay; ++j)
                if (in.label_valid[static_cast<size_t>(b * in.delay + j)] &&
                    !in.mask[static_cast<size_t>(j)][static_cast<size_t>(b)])
                    rows.push_back({b, j});
        if (rows.empty()) throw std::invalid_argument("EnsembleBelief: empty batch");

        Tensor inputs(static_cast<int>(rows.size()), cfg.state_dim + cfg.action_dim);
        Tensor targets(static_cast<int>(rows.size()), cfg.state_dim);
        for (size_t r = 0; r < rows.size(); ++r) {
            const auto [b, j] = rows[r];
            // previous true state: the base for the first unmasked slot,
            // otherwise the previous position's label
            const bool first = (j == 0) ||
                               !in.label_valid[static_cast<size_t>(b * in.delay + j - 1)] ||
                               in.mask[static_cast<size_t>(j - 1)][static_cast<size_t>(b)];
            for (int c = 0; c < cfg.state_dim; ++c) {
                const double prev = first ? in.base.at(b, c) : in.labels.at(b * in.delay + j - 1, c);
                inputs.at(static_cast<int>(r), c) = prev;
                targets.at(static_cast<int>(r), c) = in.labels.at(b * in.delay + j, c);
            }
            for (int c = 0; c < cfg.action_dim; ++c)
                inputs.at(static_cast<int>(r), cfg.state_dim + c) =
                    in.window[static_cast<size_t>(j)].at(b, c);
        }
        std::vector<char> valid(rows.size(), 1);

        Tape::Var x = t.input(inputs);
        Tape::Var total = t.input(Tensor(1, 1));
        for (const auto& m : members_) {
            Tape::Var out = m.forward(t, x);
            Tape::Var mean = t.slice_cols(out, 0, cfg.state_dim);
            Tape::Var member_loss;
            if (cfg.mode == BeliefMode::Mse) {
                member_loss = t.mse_rows(mean, targets, valid);
            } else {
                Tape::Var ls = t.clamp(t.slice_cols(out, cfg.state_dim, 2 * cfg.state_dim), -5.0, 2.0);
                member_loss = t.gauss_nll_rows(mean, ls, targets, valid);
            }
            total = t.add(total, member_loss);
        }
        return t.scale(total, 1.0 / cfg.n_members);
    }

    /// Autoregressive multi-step prediction: each member rolls its one-step
    /// model through the real window actions; the ensemble prediction per
    /// position is the member mean. Masked leading slots repeat the base.
    TransformerBelief::Prediction predict(const ContAugState& x) const {
        TransformerBelief::Prediction p;
        const int delay = x.delay();
        std::vector<VecF> member_state(members_.size(), x.base);
        for (int j = 0; j < delay; ++j) {
            VecF mean(static_cast<size_t>(cfg.state_dim), 0.0);
            VecF ls(static_cast<size_t>(cfg.state_dim), 0.0);
            if (j < x.masked_prefix) {
                mean = x.base;
                ls.assign(static_cast<size_t>(cfg.state_dim), -5.0);
            } else {
                for (size_t m = 0; m < members_.size(); ++m) {
                    Tensor in(1, cfg.state_dim + cfg.action_dim);
                    for (int c = 0; c < cfg.state_dim; ++c)
                        in.at(0, c) = member_state[m][static_cast<size_t>(c)];
                    for (int c = 0; c < cfg.action_dim; ++c)
                        in.at(0, cfg.state_dim + c) = x.window[static_cast<size_t>(j)][static_cast<size_t>(c)];
                    Tensor out = members_[m].apply(in);
                    for (int c = 0; c < cfg.state_dim; ++c) {
                        member_state[m][static_cast<size_t>(c)] = out.at(0, c);
                        mean[static_cast<size_t>(c)] += out.at(0, c) / cfg.n_members;
                        double raw = out.at(0, cfg.state_dim + c);
                        ls[static_cast<size_t>(c)] +=
                            (raw < -5.0 ? -5.0 : (raw > 2.0 ? 2.0 : raw)) / cfg.n_members;
                    }
                }
            }
            p.means.push_back(std::move(mean));
            p.log_scales.push_back(std::move(ls));
        }
        return p;
    }

    const Mlp& member(int i) const { return members_[static_cast<size_t>(i)]; }

  private:
    std::vector<Mlp> members_;
};

}  // namespace dtcorl
