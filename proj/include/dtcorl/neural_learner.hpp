#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtcorl/belief_data.hpp"
#include "dtcorl/ensemble.hpp"
#include "dtcorl/envs.hpp"
#include "dtcorl/nn.hpp"
#include "dtcorl/rollout.hpp"
#include "dtcorl/transformer.hpp"

namespace dtcorl {

/// Shared knob set of the policy-iteration learners. The Wasserstein weights
/// lambda1/lambda2 drive the tabular penalties, alpha the neural
/// behavior-cloning surrogate; alpha1/alpha2 are the unconstrained-conversion
/// weights kept for the tabular route, and epsilon_margin records the
/// constrained-form margin without entering the unconstrained implementation.
struct LearnerConfig {
    double lambda1 = 0.1;
    double lambda2 = 0.1;
    double alpha = 2.5;
    double alpha1 = 0.1;
    double alpha2 = 0.1;
    double epsilon_margin = 0.0;
    double gamma = 0.99;
    double actor_lr = 3e-4;
    double critic_lr = 1e-3;
    double tau_soft = 5e-3;
    int actor_train_freq = 2;
    int batch_size = 256;
    double action_noise = 0.2;
    double noise_clip = 0.5;
    std::vector<int> hidden = {64, 64};
    bool penalty_in_target = false;  // optional action-space MSE proxy inside the TD target

    void validate() const {
        if (lambda1 < 0 || lambda2 < 0 || alpha < 0 || alpha1 < 0 || alpha2 < 0)
            throw std::invalid_argument("LearnerConfig: weights must be nonnegative");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw std::invalid_argument("LearnerConfig: gamma must lie in (0,1)");
        if (actor_train_freq < 1 || batch_size < 1)
            throw std::invalid_argument("LearnerConfig: frequencies must be >= 1");
    }
};

/// Twin Q networks with tau-trailing target copies.
struct NeuralCritic {
    Mlp q1, q2, q1_target, q2_target;

    NeuralCritic() = default;
    NeuralCritic(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng)
        : q1("critic.q1", state_dim + action_dim, hidden, 1, Activation::ReLU, false, rng),
          q2("critic.q2", state_dim + action_dim, hidden, 1, Activation::ReLU, false, rng) {
        q1_target = q1;
        q2_target = q2;
        q1_target.copy_values_from(q1);
        q2_target.copy_values_from(q2);
    }
};

/// Deterministic policy network with tanh squashing into the action box.
struct NeuralActor {
    Mlp net, target;

    NeuralActor() = default;
    NeuralActor(int state_dim, int action_dim, const std::vector<int>& hidden, Rng& rng)
        : net("actor", state_dim, hidden, action_dim, Activation::ReLU, true, rng) {
        target = net;
        target.copy_values_from(net);
    }

    VecF act(const VecF& s) const {
        Tensor in(1, static_cast<int>(s.size()));
        for (size_t c = 0; c < s.size(); ++c) in.at(0, static_cast<int>(c)) = s[c];
        Tensor out = net.apply(in);
        return VecF(out.v.begin(), out.v.end());
    }
};

/// Batched point-estimate provider for the current state given augmented
/// observations; implementations wrap the learned belief models or an exact
/// dynamics oracle.
using BeliefEstimator = std::function<Tensor(const std::vector<const ContAugState*>&, Rng&)>;

inline BeliefBatch belief_batch_from_states(const std::vector<const ContAugState*>& xs,
                                            int state_dim, int action_dim) {
    if (xs.empty()) throw std::invalid_argument("belief_batch_from_states: empty batch");
    BeliefBatch b;
    b.batch = static_cast<int>(xs.size());
    b.delay = xs[0]->delay();
    b.state_dim = state_dim;
    b.action_dim = action_dim;
    b.base = Tensor(b.batch, state_dim);
    b.labels = Tensor(b.batch * b.delay, state_dim);
    b.label_valid.assign(static_cast<size_t>(b.batch) * b.delay, 1);
    for (int j = 0; j < b.delay; ++j) {
        b.window.emplace_back(b.batch, action_dim);
        b.mask.emplace_back(static_cast<size_t>(b.batch), 0);
    }
    for (int r = 0; r < b.batch; ++r) {
        const ContAugState& x = *xs[static_cast<size_t>(r)];
        if (x.delay() != b.delay)
            throw std::invalid_argument("belief_batch_from_states: mixed window lengths");
        for (int c = 0; c < state_dim; ++c) b.base.at(r, c) = x.base[static_cast<size_t>(c)];
        for (int j = 0; j < b.delay; ++j) {
            b.mask[static_cast<size_t>(j)][static_cast<size_t>(r)] =
                static_cast<char>(j < x.masked_prefix ? 1 : 0);
            for (int c = 0; c < action_dim; ++c)
                b.window[static_cast<size_t>(j)].at(r, c) =
                    j < x.masked_prefix ? 0.0 : x.window[static_cast<size_t>(j)][static_cast<size_t>(c)];
        }
    }
    return b;
}

/// Transformer-backed estimator: the prediction at the final window position.
/// In MLE mode one Gaussian sample per batch element is drawn.
inline BeliefEstimator make_transformer_estimator(const TransformerBelief& model) {
    return [&model](const std::vector<const ContAugState*>& xs, Rng& rng) {
        BeliefBatch b = belief_batch_from_states(xs, model.cfg.state_dim, model.cfg.action_dim);
        Tape t;
        Tape::Var out = model.forward(t, b, false, nullptr);
        const Tensor& o = t.val(out);
        Tensor est(b.batch, model.cfg.state_dim);
        for (int r = 0; r < b.batch; ++r) {
            const int row = r * b.delay + (b.delay - 1);
            for (int c = 0; c < model.cfg.state_dim; ++c) {
                double v = o.at(row, c);
                if (model.cfg.mode == BeliefMode::Mle) {
                    double ls = o.at(row, model.cfg.state_dim + c);
                    ls = std::max(-5.0, std::min(2.0, ls));
                    v += std::exp(ls) * rng.normal();
                }
                est.at(r, c) = v;
            }
        }
        return est;
    };
}

inline BeliefEstimator make_ensemble_estimator(const EnsembleBelief& model) {
    return [&model](const std::vector<const ContAugState*>& xs, Rng&) {
        Tensor est(static_cast<int>(xs.size()), model.cfg.state_dim);
        for (size_t r = 0; r < xs.size(); ++r) {
            auto pred = model.predict(*xs[r]);
            for (int c = 0; c < model.cfg.state_dim; ++c)
                est.at(static_cast<int>(r), c) = pred.means.back()[static_cast<size_t>(c)];
        }
        return est;
    };
}

/// Exact belief for deterministic dynamics: composes the true step function
/// through the unmasked window actions.
inline BeliefEstimator make_exact_estimator(const ContinuousEnv& env) {
    return [&env](const std::vector<const ContAugState*>& xs, Rng& rng) {
        Tensor est(static_cast<int>(xs.size()), env.state_dim);
        for (size_t r = 0; r < xs.size(); ++r) {
            VecF s = xs[r]->base;
            for (int j = xs[r]->masked_prefix; j < xs[r]->delay(); ++j)
                s = env.step(s, xs[r]->window[static_cast<size_t>(j)], rng).first;
            for (int c = 0; c < env.state_dim; ++c) est.at(static_cast<int>(r), c) = s[static_cast<size_t>(c)];
        }
        return est;
    };
}

/// One learner batch with belief point estimates already attached.
struct LearnerBatch {
    Tensor s_hat;       // B x state_dim
    Tensor actions;     // B x action_dim (dataset actions)
    Vec rewards;        // B
    Tensor s_hat_next;  // B x state_dim
    Tensor next_actions;  // B x action_dim (dataset next actions; penalty_in_target)
    std::vector<char> has_next_action;
};

/// Learner tuples flattened across trajectories, with the dataset's next
/// action attached where one exists (used only by the penalty_in_target proxy).
struct LearnerData {
    std::vector<ContAugTuple> tuples;
    std::vector<VecF> next_actions;
    std::vector<char> has_next_action;
};

inline LearnerBatch make_learner_batch(const LearnerData& data, const std::vector<int>& indices,
                                       const BeliefEstimator& belief, int action_dim, Rng& rng) {
    if (indices.empty()) throw std::invalid_argument("make_learner_batch: empty batch");
    std::vector<const ContAugState*> xs, xns;
    for (int i : indices) {
        xs.push_back(&data.tuples[static_cast<size_t>(i)].x);
        xns.push_back(&data.tuples[static_cast<size_t>(i)].x_next);
    }
    LearnerBatch b;
    b.s_hat = belief(xs, rng);
    b.s_hat_next = belief(xns, rng);
    const int B = static_cast<int>(indices.size());
    b.actions = Tensor(B, action_dim);
    b.next_actions = Tensor(B, action_dim);
    b.has_next_action.assign(static_cast<size_t>(B), 0);
    b.rewards.resize(static_cast<size_t>(B));
    for (int r = 0; r < B; ++r) {
        const int i = indices[static_cast<size_t>(r)];
        const ContAugTuple& t = data.tuples[static_cast<size_t>(i)];
        for (int c = 0; c < action_dim; ++c) b.actions.at(r, c) = t.a[static_cast<size_t>(c)];
        b.rewards[static_cast<size_t>(r)] = t.r;
        if (data.has_next_action[static_cast<size_t>(i)]) {
            b.has_next_action[static_cast<size_t>(r)] = 1;
            for (int c = 0; c < action_dim; ++c)
                b.next_actions.at(r, c) = data.next_actions[static_cast<size_t>(i)][static_cast<size_t>(c)];
        }
    }
    return b;
}

/// One TD3-style critic step through the belief estimates: the target
/// bootstraps min(Q1', Q2') at the target policy's noisy action, computed on
/// frozen target copies; both critics regress the same target and the target
/// copies trail by tau afterwards.
inline double critic_update(NeuralCritic& critic, const NeuralActor& actor,
                            const LearnerBatch& batch, const LearnerConfig& cfg,
                            AdamOptimizer& opt, Rng& noise_rng) {
    const int B = batch.s_hat.rows;
    const int adim = batch.actions.cols;

    // Targets outside the tape.
    Tensor next_a = actor.target.apply(batch.s_hat_next);
    for (int r = 0; r < B; ++r)
        for (int c = 0; c < adim; ++c) {
            double eps = cfg.action_noise * noise_rng.normal();
            eps = std::max(-cfg.noise_clip, std::min(cfg.noise_clip, eps));
            next_a.at(r, c) = std::max(-1.0, std::min(1.0, next_a.at(r, c) + eps));
        }
    Tensor next_in(B, batch.s_hat_next.cols + adim);
    for (int r = 0; r < B; ++r) {
        for (int c = 0; c < batch.s_hat_next.cols; ++c) next_in.at(r, c) = batch.s_hat_next.at(r, c);
        for (int c = 0; c < adim; ++c) next_in.at(r, batch.s_hat_next.cols + c) = next_a.at(r, c);
    }
    Tensor tq1 = critic.q1_target.apply(next_in);
    Tensor tq2 = critic.q2_target.apply(next_in);
    Tensor y(B, 1);
    for (int r = 0; r < B; ++r)
        y.at(r, 0) = batch.rewards[static_cast<size_t>(r)] + cfg.gamma * std::min(tq1.at(r, 0), tq2.at(r, 0));
    if (cfg.penalty_in_target) {
        // action-space MSE proxy for the W1 term of the evaluation equation
        Tensor pol_next = actor.net.apply(batch.s_hat_next);
        for (int r = 0; r < B; ++r) {
            if (!batch.has_next_action[static_cast<size_t>(r)]) continue;
            double mse = 0.0;
            for (int c = 0; c < adim; ++c) {
                const double d = pol_next.at(r, c) - batch.next_actions.at(r, c);
                mse += d * d;
            }
            y.at(r, 0) -= cfg.lambda1 * mse / adim;
        }
    }

    Tape t;
    Tape::Var in = t.concat_cols(t.input(batch.s_hat), t.input(batch.actions));
    std::vector<char> valid(static_cast<size_t>(B), 1);
    Tape::Var l1 = t.mse_rows(critic.q1.forward(t, in), y, valid);
    Tape::Var l2 = t.mse_rows(critic.q2.forward(t, in), y, valid);
    Tape::Var loss = t.add(l1, l2);
    const double loss_val = t.val(loss).at(0, 0);
    if (!std::isfinite(loss_val)) throw std::runtime_error("critic_update: non-finite loss");
    auto params = critic.q1.params();
    auto p2 = critic.q2.params();
    params.insert(params.end(), p2.begin(), p2.end());
    zero_grads(params);
    t.backward(loss);
    opt.step(params);
    critic.q1_target.soft_update_from(critic.q1, cfg.tau_soft);
    critic.q2_target.soft_update_from(critic.q2, cfg.tau_soft);
    return loss_val;
}

/// Deterministic-policy-gradient step with the quadratic behavior surrogate:
/// maximizes Q1(s_hat, pi(s_hat)) - alpha * ||a_data - pi(s_hat)||^2.
inline double actor_update(NeuralActor& actor, NeuralCritic& critic, const LearnerBatch& batch,
                           const LearnerConfig& cfg, AdamOptimizer& opt) {
    const int B = batch.s_hat.rows;
    Tape t;
    Tape::Var s = t.input(batch.s_hat);
    Tape::Var a_pi = actor.net.forward(t, s);
    Tape::Var q = critic.q1.forward(t, t.concat_cols(s, a_pi));
    std::vector<char> valid(static_cast<size_t>(B), 1);
    Tape::Var bc = t.mse_rows(a_pi, batch.actions, valid);
    Tape::Var loss = t.add(t.scale(t.mean_all(q), -1.0), t.scale(bc, cfg.alpha));
    const double loss_val = t.val(loss).at(0, 0);
    if (!std::isfinite(loss_val)) throw std::runtime_error("actor_update: non-finite loss");
    auto actor_params = actor.net.params();
    auto critic_params = critic.q1.params();
    std::vector<Parameter*> all = actor_params;
    all.insert(all.end(), critic_params.begin(), critic_params.end());
    zero_grads(all);
    t.backward(loss);
    opt.step(actor_params);  // critic gradients are discarded
    actor.target.soft_update_from(actor.net, cfg.tau_soft);
    return loss_val;
}

/// Behavior cloning over flattened augmented inputs (the Augmented-BC
/// baseline). Returns the batch loss.
inline double augmented_bc_step(Mlp& bc_net, const std::vector<ContAugTuple>& tuples,
                                const std::vector<int>& indices, AdamOptimizer& opt) {
    if (indices.empty()) throw std::invalid_argument("augmented_bc_step: empty batch");
    const ContAugTuple& first = tuples[static_cast<size_t>(indices[0])];
    const int sdim = static_cast<int>(first.x.base.size());
    const int adim = static_cast<int>(first.a.size());
    const int delay = first.x.delay();
    const int B = static_cast<int>(indices.size());
    Tensor in(B, sdim + delay * adim);
    Tensor target(B, adim);
    for (int r = 0; r < B; ++r) {
        const ContAugTuple& tup = tuples[static_cast<size_t>(indices[static_cast<size_t>(r)])];
        int col = 0;
        for (int c = 0; c < sdim; ++c) in.at(r, col++) = tup.x.base[static_cast<size_t>(c)];
        for (int j = 0; j < delay; ++j)
            for (int c = 0; c < adim; ++c) in.at(r, col++) = tup.x.window[static_cast<size_t>(j)][static_cast<size_t>(c)];
        for (int c = 0; c < adim; ++c) target.at(r, c) = tup.a[static_cast<size_t>(c)];
    }
    Tape t;
    std::vector<char> valid(static_cast<size_t>(B), 1);
    Tape::Var loss = t.mse_rows(bc_net.forward(t, t.input(in)), target, valid);
    const double loss_val = t.val(loss).at(0, 0);
    if (!std::isfinite(loss_val)) throw std::runtime_error("augmented_bc_step: non-finite loss");
    auto params = bc_net.params();
    zero_grads(params);
    t.backward(loss);
    opt.step(params);
    return loss_val;
}

/// Per-epoch metrics row shared by every trainer.
struct MetricsRow {
    int epoch = 0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double belief_loss = 0.0;
    double eval_return_mean = std::numeric_limits<double>::quiet_NaN();
    double eval_return_std = std::numeric_limits<double>::quiet_NaN();
    uint64_t seed = 0;
};

struct DtcorlTrainConfig {
    LearnerConfig learner;
    TransformerConfig belief;
    int delay = 4;
    bool joint = true;
    int epochs = 30;
    int steps_per_epoch = 100;
    int belief_pretrain_steps = 1200;  // separate (joint = false) mode
    int belief_batch = 256;
    double belief_lr = 1e-4;
    double belief_weight_decay = 1e-4;
    int eval_episodes = 10;  // 0 disables per-epoch evaluation
    DelayKind eval_delay_kind = DelayKind::Deterministic;
    double eval_delay_mean = 0.0;  // 0 -> defaults to delay (deterministic) or midpoint
    uint64_t seed = 1;
};

struct DtcorlRun {
    TransformerBelief belief;
    NeuralActor actor;
    NeuralCritic critic;
    std::vector<MetricsRow> metrics;
    int epochs_done = 0;
};

/// Delay-compensating agent: belief point estimate, then the deterministic
/// policy.
inline DelayedAgent<VecF, VecF> make_dtcorl_agent(const TransformerBelief& belief,
                                                  const NeuralActor& actor) {
    return [&belief, &actor](const DelayedContext<VecF, VecF>& ctx, Rng&) {
        if (ctx.x.delay() == 0) return actor.act(ctx.x.base);
        auto pred = belief.predict(ctx.x);
        return actor.act(pred.means.back());
    };
}

/// Raw augmented vector straight into the cloned policy (Augmented-BC mode,
/// no belief compensation).
inline DelayedAgent<VecF, VecF> make_augbc_agent(const Mlp& bc_net) {
    return [&bc_net](const DelayedContext<VecF, VecF>& ctx, Rng&) {
        const int sdim = static_cast<int>(ctx.x.base.size());
        const int adim = ctx.x.window.empty() ? 0 : static_cast<int>(ctx.x.window[0].size());
        Tensor in(1, sdim + ctx.x.delay() * adim);
        int col = 0;
        for (int c = 0; c < sdim; ++c) in.at(0, col++) = ctx.x.base[static_cast<size_t>(c)];
        for (const auto& a : ctx.x.window)
            for (int c = 0; c < adim; ++c) in.at(0, col++) = a[static_cast<size_t>(c)];
        Tensor out = bc_net.apply(in);
        return VecF(out.v.begin(), out.v.end());
    };
}

namespace detail {

inline LearnerData learner_tuples_from(const std::vector<ContTrajectory>& data, int delay) {
    LearnerData out;
    for (const auto& tr : data) {
        auto tuples = augment_trajectory(tr, delay);
        for (size_t i = 0; i < tuples.size(); ++i) {
            if (tuples[i].belief_only) continue;
            if (i + 1 < tuples.size()) {
                out.next_actions.push_back(tuples[i + 1].a);
                out.has_next_action.push_back(1);
            } else {
                out.next_actions.push_back(VecF());
                out.has_next_action.push_back(0);
            }
            out.tuples.push_back(std::move(tuples[i]));
        }
    }
    if (out.tuples.empty()) throw std::invalid_argument("train: empty dataset");
    return out;
}

}  // namespace detail

/// The full offline pipeline: augment the delay-free trajectories, train the
/// transformer belief (jointly with the actor-critic, or pretrained and
/// frozen), run behavior-regularized TD3-style updates through the belief
/// point estimates, and evaluate under the configured delay each epoch.
/// A warm start resumes from previously trained models: epoch numbering
/// continues contiguously and the separate-mode pretraining is skipped.
inline DtcorlRun train_dtcorl(const std::vector<ContTrajectory>& data, const ContinuousEnv& env,
                              const DtcorlTrainConfig& cfg, DtcorlRun* warm_start = nullptr) {
    if (data.empty()) throw std::invalid_argument("train_dtcorl: empty dataset");
    cfg.learner.validate();
    const int epoch_offset = warm_start ? warm_start->epochs_done : 0;
    Rng root(cfg.seed + static_cast<uint64_t>(epoch_offset) * 0x9e3779b9ull);
    Rng init_rng = root.child(1);
    Rng batch_rng = root.child(2);
    Rng noise_rng = root.child(3);
    Rng drop_rng = root.child(4);
    Rng belief_batch_rng = root.child(5);
    Rng mle_rng = root.child(6);

    TransformerConfig bc = cfg.belief;
    bc.state_dim = env.state_dim;
    bc.action_dim = env.action_dim;
    if (bc.max_delay < cfg.delay) bc.max_delay = cfg.delay;

    DtcorlRun run;
    if (warm_start) {
        run = std::move(*warm_start);
    } else {
        run.belief = TransformerBelief(bc, init_rng);
        run.actor = NeuralActor(env.state_dim, env.action_dim, cfg.learner.hidden, init_rng);
        run.critic = NeuralCritic(env.state_dim, env.action_dim, cfg.learner.hidden, init_rng);
    }

    LearnerData tuples = detail::learner_tuples_from(data, cfg.delay);
    BeliefDataset belief_ds = make_belief_dataset(data, cfg.delay);
    BeliefEstimator estimator = make_transformer_estimator(run.belief);

    AdamOptimizer belief_opt;
    belief_opt.lr = cfg.belief_lr;
    belief_opt.weight_decay = cfg.belief_weight_decay;
    AdamOptimizer critic_opt;
    critic_opt.lr = cfg.learner.critic_lr;
    AdamOptimizer actor_opt;
    actor_opt.lr = cfg.learner.actor_lr;

    double belief_loss = std::numeric_limits<double>::quiet_NaN();
    if (!cfg.joint && !warm_start) {
        for (int step = 0; step < cfg.belief_pretrain_steps; ++step) {
            BeliefBatch b = make_belief_batch(
                belief_ds, sample_indices(cfg.belief_batch, static_cast<int>(belief_ds.samples.size()),
                                          belief_batch_rng));
            belief_loss = belief_train_step(run.belief, b, belief_opt, drop_rng);
        }
    }

    DelayProcess eval_delay =
        cfg.eval_delay_kind == DelayKind::Deterministic
            ? DelayProcess::deterministic(cfg.delay)
            : DelayProcess::make(cfg.eval_delay_kind, cfg.delay,
                                 cfg.eval_delay_mean > 0 ? cfg.eval_delay_mean
                                                         : (1.0 + cfg.delay) / 2.0);
    ScoreRefs refs;
    if (cfg.eval_episodes > 0) refs = compute_score_refs(env, cfg.seed);

    int global_step = 0;
    for (int epoch = epoch_offset; epoch < epoch_offset + cfg.epochs; ++epoch) {
        double critic_acc = 0.0, actor_acc = 0.0, belief_acc = 0.0;
        int actor_steps = 0, belief_steps = 0;
        for (int step = 0; step < cfg.steps_per_epoch; ++step, ++global_step) {
            std::vector<int> idx = sample_indices(
                cfg.learner.batch_size, static_cast<int>(tuples.tuples.size()), batch_rng);
            LearnerBatch lb = make_learner_batch(tuples, idx, estimator, env.action_dim, mle_rng);
            critic_acc += critic_update(run.critic, run.actor, lb, cfg.learner, critic_opt, noise_rng);
            if (global_step % cfg.learner.actor_train_freq == 0) {
                actor_acc += actor_update(run.actor, run.critic, lb, cfg.learner, actor_opt);
                ++actor_steps;
            }
            if (cfg.joint) {
                BeliefBatch b = make_belief_batch(
                    belief_ds, sample_indices(cfg.belief_batch,
                                              static_cast<int>(belief_ds.samples.size()),
                                              belief_batch_rng));
                belief_acc += belief_train_step(run.belief, b, belief_opt, drop_rng);
                ++belief_steps;
            }
        }
        MetricsRow row;
        row.epoch = epoch;
        row.seed = cfg.seed;
        row.critic_loss = critic_acc / cfg.steps_per_epoch;
        row.actor_loss = actor_steps > 0 ? actor_acc / actor_steps : 0.0;
        row.belief_loss = belief_steps > 0 ? belief_acc / belief_steps : belief_loss;
        if (cfg.eval_episodes > 0) {
            auto agent = make_dtcorl_agent(run.belief, run.actor);
            EvalResult ev = evaluate(env, agent, eval_delay, cfg.eval_episodes,
                                     cfg.seed * 131 + static_cast<uint64_t>(epoch), refs);
            row.eval_return_mean = ev.mean;
            row.eval_return_std = ev.stddev;
        }
        run.metrics.push_back(row);
    }
    run.epochs_done = epoch_offset + cfg.epochs;
    return run;
}

struct AugmentedBcRun {
    Mlp net;
    std::vector<MetricsRow> metrics;
};

/// The Augmented-BC baseline: behavior cloning on flattened augmented inputs.
inline AugmentedBcRun train_augmented_bc(const std::vector<ContTrajectory>& data,
                                         const ContinuousEnv& env, int delay, int epochs,
                                         int steps_per_epoch, const LearnerConfig& learner,
                                         uint64_t seed) {
    if (data.empty()) throw std::invalid_argument("train_augmented_bc: empty dataset");
    Rng root(seed);
    Rng init_rng = root.child(1);
    Rng batch_rng = root.child(2);
    AugmentedBcRun run;
    run.net = Mlp("augbc", env.state_dim + delay * env.action_dim, learner.hidden, env.action_dim,
                  Activation::ReLU, true, init_rng);
    LearnerData tuples = detail::learner_tuples_from(data, delay);
    AdamOptimizer opt;
    opt.lr = learner.actor_lr;
    for (int epoch = 0; epoch < epochs; ++epoch) {
        double acc = 0.0;
        for (int step = 0; step < steps_per_epoch; ++step) {
            std::vector<int> idx = sample_indices(
                learner.batch_size, static_cast<int>(tuples.tuples.size()), batch_rng);
            acc += augmented_bc_step(run.net, tuples.tuples, idx, opt);
        }
        MetricsRow row;
        row.epoch = epoch;
        row.seed = seed;
        row.actor_loss = acc / steps_per_epoch;
        run.metrics.push_back(row);
    }
    return run;
}

}  // namespace dtcorl
