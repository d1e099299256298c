#include <doctest.h>

#include "dtcorl/tabular_learner.hpp"

using namespace dtcorl;

namespace {

Vec uniform_mixture(int n) { return Vec(static_cast<size_t>(n), 1.0 / n); }

}  // namespace

TEST_SUITE("learner_tabular") {

TEST_CASE("bpe with zero delay and zero penalty reduces to exact policy evaluation") {
    Rng rng(1);
    for (int trial = 0; trial < 5; ++trial) {
        TabularMdp m = make_random_mdp(4, 3, rng);
        TabularPolicy pol = TabularPolicy::random_dirichlet(4, 3, rng);
        TabularLearnerConfig cfg;
        cfg.lambda1 = 0.0;
        cfg.lambda2 = 0.0;
        BeliefPiContext ctx = make_enumerated_context(m, 0, uniform_mixture(3));
        BpeResult r = tabular_bpe(ctx, pol, cfg);
        ValueTables vt = exact_policy_evaluation(m, pol, 1e-12);
        for (int s = 0; s < 4; ++s)
            for (int a = 0; a < 3; ++a) CHECK(std::abs(r.q[s][a] - vt.q[s][a]) < 1e-8);
    }
}

TEST_CASE("bpe on a deterministic mdp equals the delay-free q at realized states") {
    TabularMdp m = make_chain_mdp(false);
    Rng rng(2);
    TabularPolicy pol = TabularPolicy::random_dirichlet(2, 2, rng);
    TabularLearnerConfig cfg;
    cfg.lambda1 = 0.0;
    ValueTables vt = exact_policy_evaluation(m, pol, 1e-12);
    for (int delay : {1, 2}) {
        BeliefPiContext ctx = make_enumerated_context(m, delay, uniform_mixture(2));
        BpeResult r = tabular_bpe(ctx, pol, cfg);
        for (size_t xi = 0; xi < ctx.xs.size(); ++xi) {
            const int realized = BeliefDistribution{ctx.beliefs[xi]}.point_mass_state();
            REQUIRE(realized >= 0);
            for (int a = 0; a < 2; ++a)
                CHECK(std::abs(r.q[static_cast<size_t>(realized)][static_cast<size_t>(a)] -
                               vt.q[static_cast<size_t>(realized)][static_cast<size_t>(a)]) < 1e-8);
        }
    }
}

TEST_CASE("penalty contributes zero when the policy equals the behavior mixture") {
    Rng rng(3);
    TabularMdp m = make_random_mdp(3, 2, rng);
    Vec mu = {0.3, 0.7};
    TabularPolicy pol;
    pol.probs.assign(3, mu);
    TabularLearnerConfig cfg;
    cfg.lambda1 = 0.0;
    BeliefPiContext ctx = make_enumerated_context(m, 1, mu);
    BpeResult base = tabular_bpe(ctx, pol, cfg);
    cfg.lambda1 = 0.7;
    BpeResult penalized = tabular_bpe(ctx, pol, cfg);
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a) CHECK(std::abs(base.q[s][a] - penalized.q[s][a]) < 1e-9);
}

TEST_CASE("bpi with zero penalty is the greedy argmax with low-id tie-breaking") {
    Rng rng(4);
    TabularMdp m = make_random_mdp(3, 3, rng);
    BeliefPiContext ctx = make_enumerated_context(m, 1, uniform_mixture(3));
    std::vector<Vec> q = {{1.0, 2.0, 0.5}, {4.0, 4.0, 1.0}, {0.0, 0.0, 0.0}};
    TabularLearnerConfig cfg;
    cfg.lambda2 = 0.0;
    TabularPolicy pol = tabular_bpi(ctx, q, cfg);
    CHECK(pol.probs[0][1] == doctest::Approx(1.0));
    CHECK(pol.probs[1][0] == doctest::Approx(1.0));
    CHECK(pol.probs[2][0] == doctest::Approx(1.0));
}

TEST_CASE("bpi with a dominating penalty returns the behavior row") {
    Rng rng(5);
    TabularMdp m = make_random_mdp(3, 2, rng);
    Vec mu = {0.25, 0.75};
    BeliefPiContext ctx = make_enumerated_context(m, 1, mu);
    std::vector<Vec> q(3, Vec{1.0, 0.0});
    TabularLearnerConfig cfg;
    cfg.lambda2 = 1e4;
    TabularPolicy pol = tabular_bpi(ctx, q, cfg);
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 2; ++a)
            CHECK(std::abs(pol.probs[s][a] - mu[static_cast<size_t>(a)]) <=
                  1.0 / cfg.grid_resolution + 1e-9);
}

TEST_CASE("bpi matches an independent fine-grid search oracle") {
    Rng rng(6);
    TabularMdp m = make_random_mdp(3, 2, rng);
    Vec mu = {0.6, 0.4};
    BeliefPiContext ctx = make_enumerated_context(m, 1, mu);
    std::vector<Vec> q = {{0.8, 0.3}, {0.2, 0.9}, {0.55, 0.5}};
    TabularLearnerConfig cfg;
    cfg.lambda2 = 0.4;
    TabularPolicy pol = tabular_bpi(ctx, q, cfg);
    auto pen_obj = [&](int s, const Vec& rho) {
        double tot = 0.0, norm = 0.0;
        for (size_t xi = 0; xi < ctx.xs.size(); ++xi) {
            const double w = ctx.x_weight[xi] * ctx.beliefs[xi][static_cast<size_t>(s)];
            if (w <= 1e-14) continue;
            norm += w;
            tot += w * wasserstein1_discrete(rho, ctx.mu_rows[xi], m.action_metric);
        }
        double val = 0.0;
        for (int a = 0; a < 2; ++a) val += rho[static_cast<size_t>(a)] * q[s][a];
        return val - cfg.lambda2 * tot / norm;
    };
    for (int s = 0; s < 3; ++s) {
        // independent fine-grid scan as the oracle
        Vec oracle;
        double best = -1e300;
        for (int k = 0; k <= 4096; ++k) {
            Vec rho = {k / 4096.0, 1.0 - k / 4096.0};
            const double v = pen_obj(s, rho);
            if (v > best) {
                best = v;
                oracle = rho;
            }
        }
        CHECK(pen_obj(s, pol.probs[s]) >= best - cfg.lambda2 / cfg.grid_resolution - 1e-9);
        (void)oracle;
    }
}

TEST_CASE("adding a constant to q leaves the bpi output unchanged") {
    Rng rng(7);
    TabularMdp m = make_random_mdp(3, 3, rng);
    BeliefPiContext ctx = make_enumerated_context(m, 1, uniform_mixture(3));
    std::vector<Vec> q(3, Vec(3, 0.0));
    for (auto& row : q)
        for (auto& v : row) v = rng.uniform(-1.0, 1.0);
    TabularLearnerConfig cfg;
    cfg.lambda2 = 0.35;
    TabularPolicy p1 = tabular_bpi(ctx, q, cfg);
    for (auto& row : q)
        for (auto& v : row) v += 17.5;
    TabularPolicy p2 = tabular_bpi(ctx, q, cfg);
    for (int s = 0; s < 3; ++s)
        for (int a = 0; a < 3; ++a)
            CHECK(p1.probs[s][a] == doctest::Approx(p2.probs[s][a]).epsilon(1e-12));
}

TEST_CASE("monotone improvement: classical reduction at zero delay and penalty") {
    Rng rng(8);
    TabularMdp m = make_random_mdp(4, 3, rng);
    TabularLearnerConfig cfg;
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    MonotoneReport rep = check_monotone_improvement(m, 0, cfg, 8, uniform_mixture(3));
    CHECK(rep.ok());
    auto [pol, vt] = exact_policy_iteration(m, 1e-12);
    Vec v_opt = state_values_from(pol, vt.q);
    const Vec& last = rep.value_trace.back();
    for (int s = 0; s < 4; ++s) CHECK(std::abs(last[s] - v_opt[s]) < 1e-7);
    const Vec& prev = rep.value_trace[rep.value_trace.size() - 2];
    for (int s = 0; s < 4; ++s) CHECK(std::abs(last[s] - prev[s]) < 1e-8);
}

TEST_CASE("monotone improvement holds on random mdps with delays") {
    Rng rng(9);
    TabularLearnerConfig cfg;  // default lambda1 = lambda2 = 0.1
    for (int trial = 0; trial < 4; ++trial) {
        TabularMdp m = make_random_mdp(4, 3, rng);
        for (int delay : {1, 2}) {
            MonotoneReport rep = check_monotone_improvement(m, delay, cfg, 6, uniform_mixture(3));
            if (!rep.ok()) {
                for (const auto& v : rep.violations)
                    MESSAGE("violation at iter ", v.iteration, " state ", v.state, " gap ", v.gap);
            }
            CHECK(rep.ok());
        }
    }
}

TEST_CASE("remark identities on deterministic mdps") {
    TabularMdp m = make_chain_mdp(false);
    Rng rng(10);
    TabularPolicy pi = TabularPolicy::random_dirichlet(2, 2, rng);
    ValueTables vt = exact_policy_evaluation(m, pi, 1e-12);
    const int delay = 2;
    TabularMdp aug = build_augmented_mdp(m, delay);
    TabularPolicy lifted = lift_policy_through_belief(m, delay, pi);
    ValueTables vt_aug = exact_policy_evaluation(aug, lifted, 1e-12);
    for (int xi = 0; xi < aug.n_states; ++xi) {
        const TabAugState x = augmented_from_index(xi, m.n_actions, delay);
        const BeliefDistribution b = exact_belief(m, x);
        const int st = b.point_mass_state();
        REQUIRE(st >= 0);
        for (int a = 0; a < 2; ++a) {
            double eb_r = 0.0;
            for (int s = 0; s < 2; ++s) eb_r += b.probs[s] * m.reward[s][a];
            CHECK(eb_r == doctest::Approx(delayed_reward(m, x, a)).epsilon(1e-12));
            CHECK(eb_r == doctest::Approx(m.reward[st][a]).epsilon(1e-12));
            double eb_q = 0.0;
            for (int s = 0; s < 2; ++s) eb_q += b.probs[s] * vt.q[s][a];
            CHECK(std::abs(eb_q - vt_aug.q[xi][a]) < 1e-9);
        }
    }
}

TEST_CASE("full reduction: belief PI equals classical PI on random mdps") {
    Rng rng(11);
    TabularLearnerConfig cfg;
    cfg.lambda1 = 0.0;
    cfg.lambda2 = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        TabularMdp m = make_random_mdp(3 + rng.uniform_int(3), 2 + rng.uniform_int(2), rng);
        BeliefPiContext ctx = make_enumerated_context(m, 0, uniform_mixture(m.n_actions));
        TabularPolicy pol = TabularPolicy::uniform(m.n_states, m.n_actions);
        for (int it = 0; it < 30; ++it) {
            BpeResult r = tabular_bpe(ctx, pol, cfg);
            pol = tabular_bpi(ctx, r.q, cfg, &pol);
        }
        auto [classical, vt] = exact_policy_iteration(m, 1e-12);
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a)
                CHECK(pol.probs[s][a] == doctest::Approx(classical.probs[s][a]));
    }
}

TEST_CASE("empirical context estimates the behavior policy with smoothing") {
    TabularMdp m = make_chain_mdp(true);
    Rng rng(12);
    std::vector<TabAugTuple> tuples;
    for (int ep = 0; ep < 50; ++ep) {
        TabTrajectory tr;
        int s = 0;
        tr.states.push_back(s);
        for (int t = 0; t < 20; ++t) {
            const int a = rng.uniform01() < 0.25 ? 0 : 1;  // behavior: 25/75
            const int sn = rng.categorical(m.transition[s][a]);
            tr.actions.push_back(a);
            tr.rewards.push_back(m.reward[s][a]);
            tr.states.push_back(sn);
            s = sn;
        }
        auto tt = augment_trajectory(tr, 1);
        tuples.insert(tuples.end(), tt.begin(), tt.end());
    }
    BeliefPiContext ctx = make_empirical_context(m, 1, tuples);
    CHECK(!ctx.samples.empty());
    double w_total = 0.0;
    for (const auto& s : ctx.samples) w_total += s.w;
    CHECK(w_total == doctest::Approx(1.0));
    double mass0 = 0.0, norm = 0.0;
    for (size_t xi = 0; xi < ctx.xs.size(); ++xi) {
        if (ctx.x_weight[xi] <= 0.0) continue;
        mass0 += ctx.x_weight[xi] * ctx.mu_rows[xi][0];
        norm += ctx.x_weight[xi];
    }
    CHECK(mass0 / norm == doctest::Approx(0.25).epsilon(0.15));
}

}  // TEST_SUITE
