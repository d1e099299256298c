// Acceptance suite: one criterion per function, one pass/fail line each.
// Exact reductions, brute-force oracle equivalence, bound verification, and
// directional reproductions of the comparative findings, with pinned
// tolerances and runtime budgets.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>
#include <thread>
#include <vector>

#include "dtcorl/bench.hpp"
#include "dtcorl/belief_data.hpp"
#include "dtcorl/ensemble.hpp"
#include "dtcorl/neural_learner.hpp"
#include "dtcorl/tabular_learner.hpp"
#include "dtcorl/theory.hpp"

using namespace dtcorl;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
};

using Criterion = std::function<void(Outcome&)>;

void require(Outcome& o, bool cond, const std::string& what) {
    if (!cond) {
        o.pass = false;
        o.detail << " [violated: " << what << "]";
    }
}

// --------------------------------------------------------------------------
// 1. Belief oracle: exact filter vs 1e6-sample Monte-Carlo, 20 random MDPs,
//    delays up to 3, 3 standard errors per state; deterministic MDPs give
//    exact point masses. Budget: 2 minutes.
// --------------------------------------------------------------------------
void criterion1(Outcome& o) {
    Rng rng(101);
    const int n_samples = 1000000;
    for (int i = 0; i < 20; ++i) {
        TabularMdp m = make_random_mdp(3 + rng.uniform_int(3), 2 + rng.uniform_int(2), rng);
        const int delay = 1 + rng.uniform_int(3);
        TabAugState x{rng.uniform_int(m.n_states), {}, 0};
        for (int k = 0; k < delay; ++k) x.window.push_back(rng.uniform_int(m.n_actions));
        const Vec exact = exact_belief(m, x).probs;
        Vec counts(static_cast<size_t>(m.n_states), 0.0);
        Rng mc = rng.child(static_cast<uint64_t>(i) + 1);
        for (int s = 0; s < n_samples; ++s) {
            int cur = x.base;
            for (int a : x.window) cur = mc.categorical(m.transition[static_cast<size_t>(cur)][static_cast<size_t>(a)]);
            counts[static_cast<size_t>(cur)] += 1.0;
        }
        for (int s = 0; s < m.n_states; ++s) {
            const double p = exact[static_cast<size_t>(s)];
            const double se = std::sqrt(std::max(p * (1.0 - p), 1e-12) / n_samples);
            require(o, std::abs(counts[static_cast<size_t>(s)] / n_samples - p) < 3.0 * se + 1e-9,
                    "mc mismatch at instance " + std::to_string(i));
        }
    }
    // deterministic MDPs: exact point masses
    TabularMdp det = make_chain_mdp(false);
    for (int b = 0; b < 2; ++b)
        for (int a1 = 0; a1 < 2; ++a1)
            for (int a2 = 0; a2 < 2; ++a2) {
                BeliefDistribution bd = exact_belief(det, TabAugState{b, {a1, a2}, 0});
                require(o, bd.point_mass_state() >= 0, "deterministic belief not a point mass");
            }
    o.detail << "20 instances x 1e6 samples within 3 SE; deterministic point masses exact";
}

// --------------------------------------------------------------------------
// 2. Monotone-improvement suite: zero violations of the expected-value
//    property over 20 random 4-state/3-action MDPs x delays {1,2} x 10 iters.
//    Budget: 5 minutes.
// --------------------------------------------------------------------------
void criterion2(Outcome& o) {
    TabularLearnerConfig cfg;  // lambda1 = lambda2 = 0.1
    int violations = 0;
    for (int i = 0; i < 20; ++i) {
        Rng rng(200 + static_cast<uint64_t>(i));
        TabularMdp m = make_random_mdp(4, 3, rng);
        for (int delay : {1, 2}) {
            MonotoneReport rep = check_monotone_improvement(m, delay, cfg, 10, Vec(3, 1.0 / 3));
            violations += static_cast<int>(rep.violations.size());
        }
    }
    require(o, violations == 0, std::to_string(violations) + " monotonicity violations");
    o.detail << "20 mdps x delays {1,2} x 10 iterations, slack floor -1e-8: " << violations
             << " violations";
}

// --------------------------------------------------------------------------
// 3. Reduction suite: delay 0 + zero penalties reproduces classical policy
//    iteration exactly; the neural critic with a perfect analytic belief on a
//    deterministic env matches the delay-free target computation to 1e-9.
// --------------------------------------------------------------------------
void criterion3(Outcome& o) {
    TabularLearnerConfig cfg;
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    for (int i = 0; i < 20; ++i) {
        Rng rng(300 + static_cast<uint64_t>(i));
        TabularMdp m = make_random_mdp(3 + rng.uniform_int(3), 2 + rng.uniform_int(2), rng);
        BeliefPiContext ctx = make_enumerated_context(m, 0, Vec(static_cast<size_t>(m.n_actions), 1.0 / m.n_actions));
        TabularPolicy pol = TabularPolicy::uniform(m.n_states, m.n_actions);
        for (int it = 0; it < 30; ++it) {
            BpeResult r = tabular_bpe(ctx, pol, cfg);
            pol = tabular_bpi(ctx, r.q, cfg, &pol);
        }
        auto [classical, vt] = exact_policy_iteration(m, 1e-12);
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a)
                require(o, pol.probs[static_cast<size_t>(s)][static_cast<size_t>(a)] ==
                               classical.probs[static_cast<size_t>(s)][static_cast<size_t>(a)],
                        "belief PI != classical PI at instance " + std::to_string(i));
    }

    // neural half: perfect analytic belief on a deterministic env
    ContinuousEnv env = make_pointmass1d(0.0);
    auto trajs = generate_behavior_dataset(env, BehaviorKind::Medium, 8, 33);
    LearnerData data;
    for (const auto& tr : trajs) {
        auto tuples = augment_trajectory(tr, 3);
        for (auto& t : tuples)
            if (!t.belief_only) {
                data.next_actions.push_back(VecF());
                data.has_next_action.push_back(0);
                data.tuples.push_back(std::move(t));
            }
    }
    BeliefEstimator exact = make_exact_estimator(env);
    LearnerConfig lc;
    lc.gamma = 0.95;
    for (int b = 0; b < 20; ++b) {
        Rng rng(400 + static_cast<uint64_t>(b));
        NeuralActor actor(1, 1, {16, 16}, rng);
        NeuralCritic c1(1, 1, {16, 16}, rng);
        NeuralCritic c2 = c1;
        Rng mle(500 + static_cast<uint64_t>(b));
        std::vector<int> idx = sample_indices(32, static_cast<int>(data.tuples.size()), mle);
        LearnerBatch via_belief = make_learner_batch(data, idx, exact, 1, mle);
        LearnerBatch direct = via_belief;
        for (int r = 0; r < 32; ++r) {
            const ContAugTuple& t = data.tuples[static_cast<size_t>(idx[static_cast<size_t>(r)])];
            direct.s_hat.at(r, 0) = t.true_state[0];
            direct.s_hat_next.at(r, 0) = t.true_next_state[0];
        }
        AdamOptimizer o1, o2;
        o1.lr = o2.lr = 1e-3;
        Rng n1(600 + static_cast<uint64_t>(b)), n2(600 + static_cast<uint64_t>(b));
        const double la = critic_update(c1, actor, via_belief, lc, o1, n1);
        const double lb = critic_update(c2, actor, direct, lc, o2, n2);
        require(o, std::abs(la - lb) < 1e-9, "critic target mismatch at batch " + std::to_string(b));
    }
    o.detail << "20 exact PI reductions; 20 batches of perfect-belief critic targets within 1e-9";
}

// --------------------------------------------------------------------------
// 4. Difference-bound suites: performance and q-value difference bounds on
//    20 random MDPs x delay pairs {(0,1),(0,2),(1,2)} x 10 policy pairs, plus
//    the general performance-difference identity within rollout tolerance.
//    Budget: 10 minutes.
// --------------------------------------------------------------------------
void criterion4(Outcome& o) {
    int cells = 0;
    for (int i = 0; i < 20; ++i) {
        Rng rng(700 + static_cast<uint64_t>(i));
        TabularMdp m = make_random_mdp(3, 2, rng);
        for (auto [dtau, d] : std::vector<std::pair<int, int>>{{0, 1}, {0, 2}, {1, 2}}) {
            const int xt = build_augmented_mdp(m, dtau).n_states;
            const int xd = build_augmented_mdp(m, d).n_states;
            for (int p = 0; p < 10; ++p) {
                TabularPolicy pi_tau = TabularPolicy::random_dirichlet(xt, 2, rng);
                TabularPolicy pi_delta = TabularPolicy::random_dirichlet(xd, 2, rng);
                BoundReport r1 = verify_performance_difference_bound(m, d, dtau, pi_tau, pi_delta);
                BoundReport r2 = verify_qvalue_difference_bound(m, d, dtau, pi_tau, pi_delta);
                require(o, r1.holds, "performance-difference cell failed at instance " + std::to_string(i));
                require(o, r2.holds, "q-value-difference cell failed at instance " + std::to_string(i));
                ++cells;
            }
        }
        // identity check, one random (mu, pi) per instance
        const int xd = build_augmented_mdp(m, 1).n_states;
        TabularPolicy mu = TabularPolicy::random_dirichlet(xd, 2, rng);
        TabularPolicy pi = TabularPolicy::random_dirichlet(3, 2, rng);
        BoundReport rep = verify_general_performance_difference(m, 1, mu, pi);
        require(o, rep.holds, "identity failed at instance " + std::to_string(i));
    }
    o.detail << cells << " bound cells (per-x worst case, slack >= -1e-8) plus 20 identity checks";
}

// --------------------------------------------------------------------------
// 5. Gradient correctness: transformer and ensemble finite-difference checks
//    under 1e-4 over 5 seeds x 100 sampled parameters; causality and mask
//    shadowing exact.
// --------------------------------------------------------------------------
void criterion5(Outcome& o) {
    double worst_tf = 0.0, worst_ens = 0.0;
    for (uint64_t seed = 1; seed <= 5; ++seed) {
        Rng rng(800 + seed);
        TransformerConfig tc;
        tc.state_dim = 1;
        tc.action_dim = 1;
        tc.max_delay = 4;
        tc.d_model = 16;
        tc.n_layers = 2;
        tc.n_heads = 2;
        tc.ff_dim = 32;
        tc.mode = seed % 2 ? BeliefMode::Mse : BeliefMode::Mle;
        TransformerBelief tf(tc, rng);
        EnsembleConfig ec;
        ec.n_members = 3;
        ec.hidden = {12};
        ec.max_delay = 4;
        ec.mode = tc.mode;
        EnsembleBelief ens(ec, rng);

        ContinuousEnv env = make_pointmass1d(0.05);
        auto trajs = generate_behavior_dataset(env, BehaviorKind::Medium, 4, seed);
        BeliefDataset ds = make_belief_dataset(trajs, 4);
        BeliefBatch batch = make_belief_batch(ds, {0, 3, 7, 11, 19, 25});
        Rng s1(900 + seed), s2(950 + seed);
        worst_tf = std::max(worst_tf, gradient_check(tf, batch, 100, s1));
        worst_ens = std::max(worst_ens, gradient_check(ens, batch, 100, s2));
    }
    require(o, worst_tf < 1e-4, "transformer gradient error " + std::to_string(worst_tf));
    require(o, worst_ens < 1e-4, "ensemble gradient error " + std::to_string(worst_ens));

    // causality and mask shadowing, exact comparisons
    Rng rng(860);
    TransformerConfig tc;
    tc.state_dim = 1;
    tc.action_dim = 1;
    tc.max_delay = 5;
    tc.d_model = 16;
    tc.n_layers = 2;
    tc.n_heads = 2;
    tc.ff_dim = 32;
    TransformerBelief tf(tc, rng);
    ContAugState x;
    x.base = {0.4};
    for (int j = 0; j < 5; ++j) x.window.push_back({0.1 * (j + 1)});
    auto base_pred = tf.predict(x);
    bool causal = true;
    for (int j = 1; j < 5; ++j) {
        ContAugState pert = x;
        pert.window[static_cast<size_t>(j)][0] += 2.0;
        auto p = tf.predict(pert);
        for (int i = 0; i < j; ++i)
            causal = causal && p.means[static_cast<size_t>(i)][0] == base_pred.means[static_cast<size_t>(i)][0];
    }
    require(o, causal, "causality perturbation leaked backward");
    ContAugState masked = x;
    masked.masked_prefix = 3;
    auto m1 = tf.predict(masked);
    ContAugState shadow = masked;
    shadow.window[0][0] = 77.0;
    shadow.window[2][0] = -77.0;
    auto m2 = tf.predict(shadow);
    bool shadowed = true;
    for (int j = 0; j < 5; ++j)
        shadowed = shadowed && m1.means[static_cast<size_t>(j)][0] == m2.means[static_cast<size_t>(j)][0];
    require(o, shadowed, "mask token failed to shadow slot content");
    o.detail << "max rel err transformer " << worst_tf << ", ensemble " << worst_ens
             << "; causality and mask shadowing exact";
}

// --------------------------------------------------------------------------
// 6. Deployment correctness: shadow-log reconstruction at every t >= delay
//    over 100 episodes, monotone reveal under stochastic delay, and the
//    mean-within-2% sampler contracts.
// --------------------------------------------------------------------------
void criterion6(Outcome& o) {
    ContinuousEnv env = make_pointmass1d(0.05);
    const int delay = 4;
    int checked = 0;
    for (uint64_t e = 0; e < 100; ++e) {
        auto rec = run_delayed_episode(env, random_agent(1), DelayProcess::deterministic(delay),
                                       1000 + e);
        for (int t = 0; t < env.episode_len; ++t) {
            if (t >= delay) {
                require(o, rec.reveal_index[static_cast<size_t>(t)] == t - delay, "reveal index wrong");
                require(o,
                        rec.delayed_obs[static_cast<size_t>(t)] ==
                            rec.true_states[static_cast<size_t>(t - delay)],
                        "reconstructed observation mismatch");
                ++checked;
            }
        }
    }
    for (uint64_t e = 0; e < 100; ++e) {
        auto rec = run_delayed_episode(env, random_agent(1), DelayProcess::uniform(8), 2000 + e);
        for (size_t t = 1; t < rec.reveal_index.size(); ++t)
            require(o, rec.reveal_index[t] >= rec.reveal_index[t - 1], "reveal index decreased");
    }
    Rng rng(3000);
    for (DelayKind kind : {DelayKind::Gaussian, DelayKind::Exponential, DelayKind::Binomial}) {
        DelayProcess p = DelayProcess::make(kind, 16, 8.0);
        double acc = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) acc += p.sample(rng);
        require(o, std::abs(acc / n - 8.0) / 8.0 < 0.02,
                to_string(kind) + " mean off by more than 2%");
    }
    o.detail << checked << " shadow-log steps exact; reveal monotone over 100 stochastic episodes; "
             << "3 mean-matched samplers within 2%";
}

// --------------------------------------------------------------------------
// 7 + 8. Directional reproductions on the 1D point mass, 3 seeds:
//    DT-CORL(joint, d=4) beats Augmented-BC(d=4); DT-CORL degrades from d=4
//    to d=16; joint >= separate. The training matrix is shared between the
//    two criteria and runs on a small worker pool. Budget: 60 minutes.
// --------------------------------------------------------------------------
struct Matrix78 {
    double joint_d4 = 0, augbc_d4 = 0, joint_d16 = 0;  // criterion 7 (well-trained belief)
    double joint_lr_slow = 0, sep_lr_slow = 0;         // criterion 8 (slow belief lr)
    bool done = false;
};

Matrix78 run_matrix_78() {
    Matrix78 out;
    ContinuousEnv env = make_pointmass1d(0.05);
    const std::vector<uint64_t> seeds = {1, 2, 3};

    auto base_cfg = [&](int delay, bool joint, double belief_lr, uint64_t seed) {
        DtcorlTrainConfig cfg;
        cfg.delay = delay;
        cfg.joint = joint;
        cfg.epochs = 20;
        cfg.steps_per_epoch = 100;
        cfg.belief_pretrain_steps = 1200;
        cfg.belief_batch = 64;
        cfg.belief_lr = belief_lr;
        cfg.eval_episodes = 0;  // evaluated once at the end below
        cfg.seed = seed;
        cfg.learner.batch_size = 64;
        cfg.learner.hidden = {64, 64};
        cfg.learner.alpha = 0.5;  // data coverage on this env supports a lighter clone pull
        cfg.belief.d_model = 32;
        cfg.belief.n_layers = 2;
        cfg.belief.n_heads = 2;
        cfg.belief.ff_dim = 64;
        cfg.belief.dropout = 0.1;
        cfg.belief.max_delay = delay;
        return cfg;
    };

    // five runs per seed:
    //   0: dtcorl joint, delay 4, tuned belief lr      (criterion 7)
    //   1: augmented-bc, delay 4                        (criterion 7)
    //   2: dtcorl joint, delay 16, tuned belief lr      (criterion 7)
    //   3: dtcorl joint, delay 4, slow belief lr 1e-4   (criterion 8)
    //   4: dtcorl separate, delay 4, slow belief lr     (criterion 8)
    struct Job {
        std::function<double()> run;
        double* slot;
    };
    std::vector<double> results(seeds.size() * 5, 0.0);
    std::vector<Job> jobs;
    int slot = 0;
    for (uint64_t seed : seeds) {
        auto data = generate_behavior_dataset(env, BehaviorKind::Medium, 20, 40 + seed);
        for (int variant = 0; variant < 5; ++variant, ++slot) {
            jobs.push_back(Job{[&env, data, seed, variant, base_cfg]() {
                ScoreRefs refs = compute_score_refs(env, 9);
                const int eval_eps = 100;
                if (variant == 1) {
                    LearnerConfig lc;
                    lc.batch_size = 64;
                    lc.hidden = {64, 64};
                    AugmentedBcRun bc = train_augmented_bc(data, env, 4, 20, 100, lc, seed);
                    auto agent = make_augbc_agent(bc.net);
                    return evaluate(env, agent, DelayProcess::deterministic(4), eval_eps,
                                    7000 + seed, refs)
                        .mean;
                }
                const int delay = variant == 2 ? 16 : 4;
                const bool joint = variant != 4;
                const double lr = variant >= 3 ? 1e-4 : 3e-4;
                DtcorlTrainConfig cfg = base_cfg(delay, joint, lr, seed);
                DtcorlRun run = train_dtcorl(data, env, cfg);
                auto agent = make_dtcorl_agent(run.belief, run.actor);
                return evaluate(env, agent, DelayProcess::deterministic(delay), eval_eps,
                                7000 + seed, refs)
                    .mean;
            }, &results[static_cast<size_t>(slot)]});
        }
    }

    const unsigned workers = std::max(2u, std::thread::hardware_concurrency());
    std::atomic<size_t> next{0};
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= jobs.size()) return;
                *jobs[i].slot = jobs[i].run();
            }
        });
    for (auto& t : pool) t.join();

    for (size_t s = 0; s < seeds.size(); ++s) {
        out.joint_d4 += results[s * 5 + 0] / 3.0;
        out.augbc_d4 += results[s * 5 + 1] / 3.0;
        out.joint_d16 += results[s * 5 + 2] / 3.0;
        out.joint_lr_slow += results[s * 5 + 3] / 3.0;
        out.sep_lr_slow += results[s * 5 + 4] / 3.0;
    }
    out.done = true;
    return out;
}

void criterion7(Outcome& o, const Matrix78& m) {
    require(o, m.joint_d4 > m.augbc_d4, "dtcorl(joint) did not beat augmented-bc at delay 4");
    require(o, m.joint_d4 > m.joint_d16, "no degradation from delay 4 to delay 16");
    o.detail << "normalized returns (3-seed means): dtcorl(joint,d4) " << m.joint_d4
             << " vs augbc(d4) " << m.augbc_d4 << "; dtcorl(d16) " << m.joint_d16;
}

void criterion8(Outcome& o, const Matrix78& m) {
    require(o, m.joint_lr_slow >= m.sep_lr_slow,
            "joint training fell below separate pretraining");
    o.detail << "joint " << m.joint_lr_slow << " >= separate " << m.sep_lr_slow
             << " (3-seed means, d=4)";
}

// --------------------------------------------------------------------------
// 9. Belief-architecture ablation on the stochastic chain embedding: after an
//    equal training budget the transformer's 16-step MSE is below the
//    ensemble's, and its full-prediction latency is lower than the ensemble's
//    16-step autoregressive latency.
// --------------------------------------------------------------------------
void criterion9(Outcome& o) {
    ContinuousEnv env = make_chain_embed();
    BeliefBenchConfig cfg;
    cfg.delay = 16;
    cfg.train_steps = 400;
    cfg.batch = 32;
    cfg.train_trajectories = 60;
    cfg.eval_trajectories = 20;
    cfg.latency_calls = 200;
    cfg.seed = 4;
    cfg.transformer.d_model = 32;
    cfg.transformer.n_layers = 2;
    cfg.transformer.n_heads = 2;
    cfg.transformer.ff_dim = 64;
    cfg.ensemble.n_members = 5;
    cfg.ensemble.hidden = {128, 128};
    BeliefBenchResult res = run_belief_bench(env, cfg);
    const double tf16 = res.transformer_step_mse.back();
    const double ens16 = res.ensemble_step_mse.back();
    require(o, tf16 < ens16, "transformer 16-step mse not below ensemble");
    require(o, res.transformer_latency_ms < res.ensemble_latency_ms,
            "transformer latency not below ensemble autoregressive latency");
    o.detail << "16-step mse: transformer " << tf16 << " < ensemble " << ens16
             << "; latency ms/call: " << res.transformer_latency_ms << " < "
             << res.ensemble_latency_ms;
}

int run_criterion(int number, const std::string& name, double budget_seconds,
                  const Criterion& fn) {
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        fn(o);
    } catch (const std::exception& e) {
        o.pass = false;
        o.detail << " [exception: " << e.what() << "]";
    }
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_seconds > 0 && elapsed > budget_seconds) {
        o.pass = false;
        o.detail << " [runtime " << elapsed << "s exceeded budget " << budget_seconds << "s]";
    }
    std::printf("[%s] criterion %d (%s): %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", number,
                name.c_str(), o.detail.str().c_str(), elapsed);
    std::fflush(stdout);
    return o.pass ? 0 : 1;
}

}  // namespace

int main() {
    int failures = 0;
    failures += run_criterion(1, "belief oracle", 120, criterion1);
    failures += run_criterion(2, "monotone improvement", 300, criterion2);
    failures += run_criterion(3, "reduction suite", 0, criterion3);
    failures += run_criterion(4, "difference-bound suites", 600, criterion4);
    failures += run_criterion(5, "gradient correctness", 0, criterion5);
    failures += run_criterion(6, "deployment correctness", 0, criterion6);

    Matrix78 matrix;
    const auto t0 = std::chrono::steady_clock::now();
    std::string matrix_error;
    try {
        matrix = run_matrix_78();
    } catch (const std::exception& e) {
        matrix_error = e.what();
    }
    const double matrix_elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += run_criterion(7, "directional table trends", 0, [&](Outcome& o) {
        if (!matrix.done) {
            o.pass = false;
            o.detail << "[training matrix failed: " << matrix_error << "]";
            return;
        }
        if (matrix_elapsed > 3600) {
            o.pass = false;
            o.detail << "[matrix runtime " << matrix_elapsed << "s exceeded 3600s] ";
        }
        criterion7(o, matrix);
        o.detail << " (matrix " << matrix_elapsed << "s)";
    });
    failures += run_criterion(8, "joint vs separate", 0, [&](Outcome& o) {
        if (!matrix.done) {
            o.pass = false;
            o.detail << "[training matrix failed: " << matrix_error << "]";
            return;
        }
        criterion8(o, matrix);
    });
    failures += run_criterion(9, "belief architecture ablation", 0, criterion9);

    if (failures == 0)
        std::printf("acceptance: all 9 criteria passed\n");
    else
        std::printf("acceptance: %d criteria FAILED\n", failures);
    return failures == 0 ? 0 : 1;
}
