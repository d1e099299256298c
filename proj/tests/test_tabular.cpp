#include <doctest.h>

#include "dtcorl/lipschitz.hpp"
#include "dtcorl/rng.hpp"
#include "dtcorl/tabular.hpp"

using namespace dtcorl;

namespace {

// Test-local long-horizon value iteration for a FIXED policy; independent of
// the library's fixed-point solver.
std::vector<Vec> oracle_policy_q(const TabularMdp& m, const TabularPolicy& pol, int sweeps) {
    std::vector<Vec> q(static_cast<size_t>(m.n_states), Vec(static_cast<size_t>(m.n_actions), 0.0));
    for (int it = 0; it < sweeps; ++it) {
        std::vector<Vec> qn = q;
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                double acc = 0.0;
                for (int sn = 0; sn < m.n_states; ++sn) {
                    double v = 0.0;
                    for (int an = 0; an < m.n_actions; ++an) v += pol.probs[sn][an] * q[sn][an];
                    acc += m.transition[s][a][sn] * v;
                }
                qn[s][a] = m.reward[s][a] + m.gamma * acc;
            }
        q = qn;
    }
    return q;
}

// Test-local greedy value iteration oracle.
Vec oracle_optimal_v(const TabularMdp& m, int sweeps) {
    Vec v(static_cast<size_t>(m.n_states), 0.0);
    for (int it = 0; it < sweeps; ++it) {
        Vec vn = v;
        for (int s = 0; s < m.n_states; ++s) {
            double best = -1e300;
            for (int a = 0; a < m.n_actions; ++a) {
                double acc = m.reward[s][a];
                for (int sn = 0; sn < m.n_states; ++sn) acc += m.gamma * m.transition[s][a][sn] * v[sn];
                best = std::max(best, acc);
            }
            vn[s] = best;
        }
        v = vn;
    }
    return v;
}

TabularMdp single_state_mdp(double r, double gamma) {
    TabularMdp m;
    m.n_states = 1;
    m.n_actions = 1;
    m.gamma = gamma;
    m.horizon = 10;
    m.rho0 = {1.0};
    m.transition = {{{1.0}}};
    m.reward = {{r}};
    m.state_metric = make_index_metric(1);
    m.action_metric = make_index_metric(1);
    m.validate();
    return m;
}

}  // namespace

TEST_SUITE("tabular") {

TEST_CASE("geometric series value on one state") {
    TabularMdp m = single_state_mdp(1.0, 0.9);
    TabularPolicy pol = TabularPolicy::uniform(1, 1);
    ValueTables vt = exact_policy_evaluation(m, pol, 1e-10);
    CHECK(vt.q[0][0] == doctest::Approx(10.0).epsilon(1e-9));
    CHECK(vt.v[0] == doctest::Approx(10.0).epsilon(1e-9));
}

TEST_CASE("zero reward gives zero values") {
    Rng rng(3);
    TabularMdp m = make_random_mdp(4, 3, rng);
    for (auto& row : m.reward) std::fill(row.begin(), row.end(), 0.0);
    ValueTables vt = exact_policy_evaluation(m, TabularPolicy::uniform(4, 3), 1e-10);
    for (const auto& row : vt.q)
        for (double q : row) CHECK(std::abs(q) < 1e-12);
    auto [pol, opt] = exact_policy_iteration(m, 1e-10);
    for (const auto& row : opt.q)
        for (double q : row) CHECK(std::abs(q) < 1e-12);
}

TEST_CASE("two-state chain evaluation matches long-horizon value iteration oracle") {
    TabularMdp m = make_chain_mdp(false);
    TabularPolicy pol = TabularPolicy::uniform(2, 2);
    ValueTables vt = exact_policy_evaluation(m, pol, 1e-10);
    auto oracle = oracle_policy_q(m, pol, 10000);
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) CHECK(vt.q[s][a] == doctest::Approx(oracle[s][a]).epsilon(1e-9));
}

TEST_CASE("policy evaluation residual is below tol at return") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        TabularMdp m = make_random_mdp(5, 3, rng);
        TabularPolicy pol = TabularPolicy::random_dirichlet(5, 3, rng);
        const double tol = 1e-10;
        ValueTables vt = exact_policy_evaluation(m, pol, tol);
        for (int s = 0; s < m.n_states; ++s)
            for (int a = 0; a < m.n_actions; ++a) {
                double acc = m.reward[s][a];
                for (int sn = 0; sn < m.n_states; ++sn) acc += m.gamma * m.transition[s][a][sn] * vt.v[sn];
                CHECK(std::abs(acc - vt.q[s][a]) <= tol);
            }
    }
}

TEST_CASE("policy iteration on the chain matches the value iteration oracle") {
    TabularMdp m = make_chain_mdp(false);
    auto [pol, vt] = exact_policy_iteration(m, 1e-10);
    Vec v_star = oracle_optimal_v(m, 10000);
    for (int s = 0; s < 2; ++s) {
        double v = 0.0;
        for (int a = 0; a < 2; ++a) v += pol.probs[s][a] * vt.q[s][a];
        CHECK(v == doctest::Approx(v_star[s]).epsilon(1e-8));
    }
    // from s0 the optimal action flips into the rewarded state; from s1 it stays
    CHECK(pol.probs[0][1] == doctest::Approx(1.0));
    CHECK(pol.probs[1][0] == doctest::Approx(1.0));
}

TEST_CASE("single state policy iteration picks argmax reward") {
    TabularMdp m = single_state_mdp(0.0, 0.9);
    m.n_actions = 3;
    m.transition = {{{1.0}, {1.0}, {1.0}}};
    m.reward = {{0.3, 0.9, 0.1}};
    m.action_metric = make_index_metric(3);
    m.validate();
    auto [pol, vt] = exact_policy_iteration(m, 1e-10);
    CHECK(pol.probs[0][1] == doctest::Approx(1.0));
}

TEST_CASE("policy iteration output dominates random policies") {
    Rng rng(21);
    TabularMdp m = make_random_mdp(6, 3, rng);
    auto [pol, vt] = exact_policy_iteration(m, 1e-10);
    Vec v_opt = state_values_from(pol, vt.q);
    for (int k = 0; k < 100; ++k) {
        TabularPolicy other = TabularPolicy::random_dirichlet(6, 3, rng);
        ValueTables ovt = exact_policy_evaluation(m, other, 1e-10);
        for (int s = 0; s < m.n_states; ++s) CHECK(v_opt[s] >= ovt.v[s] - 1e-8);
    }
}

TEST_CASE("metric validation rejects broken metrics") {
    Mat bad = make_index_metric(3);
    bad[0][2] = 10.0;
    bad[2][0] = 10.0;  // violates triangle through 1
    CHECK_THROWS_AS(validate_metric(bad, "m"), std::invalid_argument);
    Mat asym = make_index_metric(3);
    asym[0][1] = 2.0;
    CHECK_THROWS_AS(validate_metric(asym, "m"), std::invalid_argument);
}

TEST_CASE("mdp validation rejects non-stochastic rows") {
    TabularMdp m = make_chain_mdp(true);
    m.transition[0][0][0] = 0.5;
    CHECK_THROWS_AS(m.validate(), std::invalid_argument);
}

TEST_CASE("lipschitz constants: constant reward gives L_R = 0") {
    Rng rng(9);
    TabularMdp m = make_random_mdp(4, 2, rng);
    for (auto& row : m.reward) std::fill(row.begin(), row.end(), 0.7);
    TabularPolicy pol = TabularPolicy::uniform(4, 2);
    ValueTables vt = exact_policy_evaluation(m, pol, 1e-10);
    LipschitzEstimates est = estimate_lipschitz_constants(m, pol, vt);
    CHECK(est.L_R == doctest::Approx(0.0));
}

TEST_CASE("lipschitz constants: identical transition rows give L_P = 0") {
    TabularMdp m = make_chain_mdp(false);
    Vec row = {0.5, 0.5};
    for (int s = 0; s < 2; ++s)
        for (int a = 0; a < 2; ++a) m.transition[s][a] = row;
    m.validate();
    TabularPolicy pol = TabularPolicy::uniform(2, 2);
    ValueTables vt = exact_policy_evaluation(m, pol, 1e-10);
    LipschitzEstimates est = estimate_lipschitz_constants(m, pol, vt);
    CHECK(est.L_P == doctest::Approx(0.0));
}

TEST_CASE("lipschitz constants match exhaustive recomputation and bound every pair") {
    TabularMdp m = make_chain_mdp(true);
    Rng rng(17);
    TabularPolicy pol = TabularPolicy::random_dirichlet(2, 2, rng);
    ValueTables vt = exact_policy_evaluation(m, pol, 1e-10);
    LipschitzEstimates est = estimate_lipschitz_constants(m, pol, vt);

    // straight-line recomputation from the definitions
    double lp = 0.0, lr = 0.0, lq = 0.0, lpi = 0.0;
    for (int s1 = 0; s1 < 2; ++s1)
        for (int a1 = 0; a1 < 2; ++a1)
            for (int s2 = 0; s2 < 2; ++s2)
                for (int a2 = 0; a2 < 2; ++a2) {
                    const double den = m.state_metric[s1][s2] + m.action_metric[a1][a2];
                    if (den <= 0) continue;
                    lp = std::max(lp, w1_index_cdf(m.transition[s1][a1], m.transition[s2][a2]) / den);
                    lr = std::max(lr, std::abs(m.reward[s1][a1] - m.reward[s2][a2]) / den);
                    lq = std::max(lq, std::abs(vt.q[s1][a1] - vt.q[s2][a2]) / den);
                }
    for (int s1 = 0; s1 < 2; ++s1)
        for (int s2 = 0; s2 < 2; ++s2) {
            if (m.state_metric[s1][s2] <= 0) continue;
            lpi = std::max(lpi, w1_index_cdf(pol.probs[s1], pol.probs[s2]) / m.state_metric[s1][s2]);
        }
    CHECK(est.L_P == doctest::Approx(lp).epsilon(1e-12));
    CHECK(est.L_R == doctest::Approx(lr).epsilon(1e-12));
    CHECK(est.L_Q == doctest::Approx(lq).epsilon(1e-12));
    CHECK(est.L_pi == doctest::Approx(lpi).epsilon(1e-12));

    // no violated pair: the defining inequalities hold with the returned constants
    for (int s1 = 0; s1 < 2; ++s1)
        for (int a1 = 0; a1 < 2; ++a1)
            for (int s2 = 0; s2 < 2; ++s2)
                for (int a2 = 0; a2 < 2; ++a2) {
                    const double den = m.state_metric[s1][s2] + m.action_metric[a1][a2];
                    CHECK(w1_index_cdf(m.transition[s1][a1], m.transition[s2][a2]) <=
                          est.L_P * den + 1e-12);
                    CHECK(std::abs(vt.q[s1][a1] - vt.q[s2][a2]) <= est.L_Q * den + 1e-12);
                }
}

}  // TEST_SUITE
