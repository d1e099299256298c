#pragma once

#include <chrono>
#include <vector>

#include "dtcorl/belief_data.hpp"
#include "dtcorl/ensemble.hpp"
#include "dtcorl/rollout.hpp"
#include "dtcorl/transformer.hpp"

namespace dtcorl {

/// Transformer-vs-ensemble comparison on one environment: equal training
/// budgets, then per-horizon prediction MSE on held-out full-window samples
/// and per-call inference latency for the full multi-step prediction.
struct BeliefBenchConfig {
    int delay = 16;
    int train_steps = 300;
    int batch = 32;
    int train_trajectories = 60;
    int eval_trajectories = 20;
    int latency_calls = 100;
    uint64_t seed = 1;
    TransformerConfig transformer;
    EnsembleConfig ensemble;
};

struct BeliefBenchResult {
    Vec transformer_step_mse;  // index j = prediction horizon j+1
    Vec ensemble_step_mse;
    double transformer_latency_ms = 0.0;
    double ensemble_latency_ms = 0.0;
    double transformer_first_loss = 0.0, transformer_last_loss = 0.0;
    double ensemble_first_loss = 0.0, ensemble_last_loss = 0.0;
    size_t transformer_param_count = 0, ensemble_param_count = 0;
};

namespace detail {

template <class Model>
Vec step_mse_of(const Model& model, const BeliefDataset& ds) {
    Vec acc(static_cast<size_t>(ds.delay), 0.0);
    Vec count(static_cast<size_t>(ds.delay), 0.0);
    for (const auto& s : ds.samples) {
        if (s.x.masked_prefix > 0) continue;  // full windows only
        auto pred = model.predict(s.x);
        for (int j = 0; j < ds.delay; ++j) {
            if (!s.label_valid[static_cast<size_t>(j)]) continue;
            double e = 0.0;
            for (int c = 0; c < ds.state_dim; ++c) {
                const double d = pred.means[static_cast<size_t>(j)][static_cast<size_t>(c)] -
                                 s.labels[static_cast<size_t>(j)][static_cast<size_t>(c)];
                e += d * d;
            }
            acc[static_cast<size_t>(j)] += e / ds.state_dim;
            count[static_cast<size_t>(j)] += 1.0;
        }
    }
    for (size_t j = 0; j < acc.size(); ++j) acc[j] /= std::max(count[j], 1.0);
    return acc;
}

template <class Model>
double latency_ms_of(const Model& model, const ContAugState& probe, int calls) {
    // one warm call outside the clock
    volatile double sink = model.predict(probe).means.back()[0];
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < calls; ++i) sink += model.predict(probe).means.back()[0];
    const auto t1 = std::chrono::steady_clock::now();
    (void)sink;
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / calls;
}

}  // namespace detail

inline BeliefBenchResult run_belief_bench(const ContinuousEnv& env, BeliefBenchConfig cfg) {
    cfg.transformer.state_dim = env.state_dim;
    cfg.transformer.action_dim = env.action_dim;
    cfg.transformer.max_delay = std::max(cfg.transformer.max_delay, cfg.delay);
    cfg.ensemble.state_dim = env.state_dim;
    cfg.ensemble.action_dim = env.action_dim;
    cfg.ensemble.max_delay = std::max(cfg.ensemble.max_delay, cfg.delay);

    Rng root(cfg.seed);
    Rng init_rng = root.child(1);
    Rng data_rng = root.child(2);
    Rng batch_rng = root.child(3);
    Rng drop_rng = root.child(4);

    auto train_set =
        generate_behavior_dataset(env, BehaviorKind::Medium, cfg.train_trajectories, data_rng.next_u64());
    auto eval_set =
        generate_behavior_dataset(env, BehaviorKind::Medium, cfg.eval_trajectories, data_rng.next_u64());
    BeliefDataset train_ds = make_belief_dataset(train_set, cfg.delay);
    BeliefDataset eval_ds = make_belief_dataset(eval_set, cfg.delay, false);

    TransformerBelief tf(cfg.transformer, init_rng);
    EnsembleBelief ens(cfg.ensemble, init_rng);

    BeliefBenchResult out;
    for (Parameter* p : tf.params()) out.transformer_param_count += p->value.size();
    for (Parameter* p : ens.params()) out.ensemble_param_count += p->value.size();

    AdamOptimizer tf_opt, ens_opt;
    tf_opt.lr = ens_opt.lr = 1e-4;
    tf_opt.weight_decay = ens_opt.weight_decay = 1e-4;
    // equal training budgets: same step count, same batch stream
    for (int step = 0; step < cfg.train_steps; ++step) {
        std::vector<int> idx =
            sample_indices(cfg.batch, static_cast<int>(train_ds.samples.size()), batch_rng);
        BeliefBatch b = make_belief_batch(train_ds, idx);
        const double lt = belief_train_step(tf, b, tf_opt, drop_rng);
        const double le = belief_train_step(ens, b, ens_opt, drop_rng);
        if (step == 0) {
            out.transformer_first_loss = lt;
            out.ensemble_first_loss = le;
        }
        out.transformer_last_loss = lt;
        out.ensemble_last_loss = le;
    }

    out.transformer_step_mse = detail::step_mse_of(tf, eval_ds);
    out.ensemble_step_mse = detail::step_mse_of(ens, eval_ds);

    // latency probe on one full-window input
    ContAugState probe;
    for (const auto& s : eval_ds.samples)
        if (s.x.masked_prefix == 0) {
            probe = s.x;
            break;
        }
    out.transformer_latency_ms = detail::latency_ms_of(tf, probe, cfg.latency_calls);
    out.ensemble_latency_ms = detail::latency_ms_of(ens, probe, cfg.latency_calls);
    return out;
}

}  // namespace dtcorl
