#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtcorl/rng.hpp"

namespace dtcorl {

using Vec = std::vector<double>;
using Mat = std::vector<std::vector<double>>;

enum class MetricKind { Index, Discrete, Custom };

inline Mat make_index_metric(int n) {
    Mat m(static_cast<size_t>(n), Vec(static_cast<size_t>(n), 0.0));
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) m[i][j] = static_cast<double>(std::abs(i - j));
    return m;
}

inline Mat make_discrete_metric(int n) {
    Mat m(static_cast<size_t>(n), Vec(static_cast<size_t>(n), 1.0));
    for (int i = 0; i < n; ++i) m[i][i] = 0.0;
    return m;
}

/// Checks d(i,i)=0, nonnegativity, symmetry and the triangle inequality
/// exhaustively. Throws on the first violation.
inline void validate_metric(const Mat& d, const std::string& name) {
    const size_t n = d.size();
    for (size_t i = 0; i < n; ++i) {
        if (d[i].size() != n) throw std::invalid_argument(name + ": metric must be square");
        if (d[i][i] != 0.0) throw std::invalid_argument(name + ": d(i,i) must be 0");
        for (size_t j = 0; j < n; ++j) {
            if (!(d[i][j] >= 0.0)) throw std::invalid_argument(name + ": negative entry");
            if (std::abs(d[i][j] - d[j][i]) > 1e-12)
                throw std::invalid_argument(name + ": not symmetric");
        }
    }
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            for (size_t k = 0; k < n; ++k)
                if (d[i][j] > d[i][k] + d[k][j] + 1e-12)
                    throw std::invalid_argument(name + ": triangle inequality violated");
}

inline bool is_probability_vector(const Vec& p, double tol = 1e-12) {
    double sum = 0.0;
    for (double v : p) {
        if (!(v >= 0.0)) return false;
        sum += v;
    }
    return std::abs(sum - 1.0) <= tol;
}

/// Finite delay-free MDP with dense kernels. The ground-truth world that all
/// delayed constructions and oracles are built from.
struct TabularMdp {
    int n_states = 0;
    int n_actions = 0;
    std::vector<std::vector<Vec>> transition;  // [s][a] -> distribution over next states
    std::vector<Vec> reward;                   // [s][a]
    int horizon = 1;
    double gamma = 0.99;
    Vec rho0;
    MetricKind metric_kind = MetricKind::Index;
    Mat state_metric;   // may be empty for very large MDPs (metrics skipped)
    Mat action_metric;  // likewise

    bool has_metrics() const { return !state_metric.empty() && !action_metric.empty(); }

    void validate() const {
        if (n_states <= 0 || n_actions <= 0)
            throw std::invalid_argument("TabularMdp: state/action counts must be positive");
        if (horizon <= 0) throw std::invalid_argument("TabularMdp: horizon must be positive");
        if (!(gamma > 0.0 && gamma < 1.0))
            throw std::invalid_argument("TabularMdp: gamma must lie in (0,1)");
        if (transition.size() != static_cast<size_t>(n_states) ||
            reward.size() != static_cast<size_t>(n_states))
            throw std::invalid_argument("TabularMdp: kernel shape mismatch");
        for (int s = 0; s < n_states; ++s) {
            if (transition[s].size() != static_cast<size_t>(n_actions) ||
                reward[s].size() != static_cast<size_t>(n_actions))
                throw std::invalid_argument("TabularMdp: kernel shape mismatch");
            for (int a = 0; a < n_actions; ++a) {
                if (transition[s][a].size() != static_cast<size_t>(n_states) ||
                    !is_probability_vector(transition[s][a]))
                    throw std::invalid_argument("TabularMdp: transition row is not a distribution");
            }
        }
        if (rho0.size() != static_cast<size_t>(n_states) || !is_probability_vector(rho0))
            throw std::invalid_argument("TabularMdp: rho0 is not a distribution");
        if (has_metrics()) {
            validate_metric(state_metric, "state_metric");
            validate_metric(action_metric, "action_metric");
        }
    }

    bool is_deterministic(double tol = 0.0) const {
        for (int s = 0; s < n_states; ++s)
            for (int a = 0; a < n_actions; ++a)
                for (double p : transition[s][a])
                    if (p > tol && p < 1.0 - tol) return false;
        return true;
    }

    double max_abs_reward() const {
        double m = 0.0;
        for (const auto& row : reward)
            for (double r : row) m = std::max(m, std::abs(r));
        return m;
    }
};

/// Stochastic stationary policy over a finite MDP: one distribution per state.
struct TabularPolicy {
    std::vector<Vec> probs;  // [s] -> distribution over actions

    int n_states() const { return static_cast<int>(probs.size()); }
    int n_actions() const { return probs.empty() ? 0 : static_cast<int>(probs[0].size()); }

    void validate() const {
        for (const auto& row : probs)
            if (!is_probability_vector(row))
                throw std::invalid_argument("TabularPolicy: row is not a distribution");
    }

    static TabularPolicy uniform(int n_states, int n_actions) {
        TabularPolicy p;
        p.probs.assign(static_cast<size_t>(n_states),
                       Vec(static_cast<size_t>(n_actions), 1.0 / n_actions));
        return p;
    }

    static TabularPolicy deterministic(const std::vector<int>& actions, int n_actions) {
        TabularPolicy p;
        p.probs.assign(actions.size(), Vec(static_cast<size_t>(n_actions), 0.0));
        for (size_t s = 0; s < actions.size(); ++s) p.probs[s][static_cast<size_t>(actions[s])] = 1.0;
        return p;
    }

    static TabularPolicy random_dirichlet(int n_states, int n_actions, Rng& rng) {
        TabularPolicy p;
        p.probs.reserve(static_cast<size_t>(n_states));
        for (int s = 0; s < n_states; ++s) p.probs.push_back(rng.dirichlet_uniform(n_actions));
        return p;
    }

    /// Epsilon-mixture with the uniform policy.
    static TabularPolicy epsilon_greedy(const TabularPolicy& base, double eps) {
        TabularPolicy p = base;
        const int A = p.n_actions();
        for (auto& row : p.probs)
            for (auto& v : row) v = (1.0 - eps) * v + eps / A;
        return p;
    }
};

struct ValueTables {
    std::vector<Vec> q;  // [s][a]
    Vec v;               // [s]
};

inline Vec state_values_from(const TabularPolicy& policy, const std::vector<Vec>& q) {
    Vec v(q.size(), 0.0);
    for (size_t s = 0; s < q.size(); ++s)
        for (size_t a = 0; a < q[s].size(); ++a) v[s] += policy.probs[s][a] * q[s][a];
    return v;
}

inline int evaluation_iteration_cap(double gamma, double tol) {
    const double cap = std::ceil(std::log(tol * (1.0 - gamma)) / std::log(gamma));
    return static_cast<int>(std::max(cap, 1.0)) + 64;
}

/// Exact policy evaluation by Bellman fixed-point iteration. The returned q
/// satisfies the Bellman equation with residual max-norm <= tol; v is derived
/// from q and the policy.
inline ValueTables exact_policy_evaluation(const TabularMdp& mdp, const TabularPolicy& policy,
                                           double tol = 1e-10) {
    if (!(tol > 0.0)) throw std::invalid_argument("exact_policy_evaluation: tol must be positive");
    const int S = mdp.n_states, A = mdp.n_actions;
    std::vector<Vec> q(static_cast<size_t>(S), Vec(static_cast<size_t>(A), 0.0));
    std::vector<Vec> qn = q;
    Vec v(static_cast<size_t>(S), 0.0);
    const int cap = evaluation_iteration_cap(mdp.gamma, tol);
    for (int it = 0; it < cap; ++it) {
        for (int s = 0; s < S; ++s) {
            double acc = 0.0;
            for (int a = 0; a < A; ++a) acc += policy.probs[s][a] * q[s][a];
            v[s] = acc;
        }
        double residual = 0.0;
        for (int s = 0; s < S; ++s) {
            for (int a = 0; a < A; ++a) {
                double exp_v = 0.0;
                const Vec& row = mdp.transition[s][a];
                for (int sn = 0; sn < S; ++sn) exp_v += row[sn] * v[sn];
                qn[s][a] = mdp.reward[s][a] + mdp.gamma * exp_v;
                residual = std::max(residual, std::abs(qn[s][a] - q[s][a]));
            }
        }
        std::swap(q, qn);
        if (residual * mdp.gamma / (1.0 - mdp.gamma) <= tol) {
            ValueTables out;
            out.q = q;
            out.v = state_values_from(policy, q);
            return out;
        }
    }
    throw std::runtime_error("exact_policy_evaluation: no convergence within iteration cap "
                             "(misconfigured gamma?)");
}

/// Greedy policy w.r.t. a q table, ties broken toward the lower action id.
inline TabularPolicy greedy_policy_from_q(const std::vector<Vec>& q) {
    std::vector<int> best(q.size(), 0);
    for (size_t s = 0; s < q.size(); ++s) {
        int arg = 0;
        for (size_t a = 1; a < q[s].size(); ++a)
            if (q[s][a] > q[s][arg]) arg = static_cast<int>(a);
        best[s] = arg;
    }
    return TabularPolicy::deterministic(best, static_cast<int>(q[0].size()));
}

/// Howard policy iteration. Returned policy is greedy w.r.t. its own q and no
/// single-state greedy deviation improves q by more than tol.
inline std::pair<TabularPolicy, ValueTables> exact_policy_iteration(const TabularMdp& mdp,
                                                                    double tol = 1e-10) {
    if (!(tol > 0.0)) throw std::invalid_argument("exact_policy_iteration: tol must be positive");
    TabularPolicy policy = TabularPolicy::uniform(mdp.n_states, mdp.n_actions);
    ValueTables vt = exact_policy_evaluation(mdp, policy, tol);
    const int cap = mdp.n_states * mdp.n_actions + 64;
    for (int it = 0; it < cap; ++it) {
        TabularPolicy greedy = greedy_policy_from_q(vt.q);
        double gain = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            double cur = 0.0, best = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a) {
                cur += policy.probs[s][a] * vt.q[s][a];
                best += greedy.probs[s][a] * vt.q[s][a];
            }
            gain = std::max(gain, best - cur);
        }
        if (gain <= tol) return {policy, vt};
        policy = greedy;
        vt = exact_policy_evaluation(mdp, policy, tol);
    }
    return {policy, vt};
}

/// Value iteration to a fixed sweep count; used to produce partially optimized
/// policies ("checkpoints") for replay-style behavior datasets.
inline std::vector<Vec> value_iteration_q(const TabularMdp& mdp, int sweeps) {
    const int S = mdp.n_states, A = mdp.n_actions;
    std::vector<Vec> q(static_cast<size_t>(S), Vec(static_cast<size_t>(A), 0.0));
    Vec v(static_cast<size_t>(S), 0.0);
    for (int it = 0; it < sweeps; ++it) {
        for (int s = 0; s < S; ++s) v[s] = *std::max_element(q[s].begin(), q[s].end());
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) {
                double exp_v = 0.0;
                for (int sn = 0; sn < S; ++sn) exp_v += mdp.transition[s][a][sn] * v[sn];
                q[s][a] = mdp.reward[s][a] + mdp.gamma * exp_v;
            }
    }
    return q;
}

// ---------------------------------------------------------------------------
// Small MDP constructors shared by tests, experiments and oracles.
// ---------------------------------------------------------------------------

/// Two-state chain: action 0 stays, action 1 flips (with success probability
/// p_flip), reward 1 in state s1 under every action.
inline TabularMdp make_chain_mdp(bool stochastic, double p_flip = 0.8, double gamma = 0.9,
                                 int horizon = 50) {
    TabularMdp m;
    m.n_states = 2;
    m.n_actions = 2;
    m.gamma = gamma;
    m.horizon = horizon;
    m.rho0 = {1.0, 0.0};
    const double pf = stochastic ? p_flip : 1.0;
    m.transition.assign(2, std::vector<Vec>(2, Vec(2, 0.0)));
    for (int s = 0; s < 2; ++s) {
        m.transition[s][0][s] = 1.0;  // stay
        m.transition[s][1][1 - s] = pf;
        m.transition[s][1][s] = 1.0 - pf;
    }
    m.reward.assign(2, Vec(2, 0.0));
    m.reward[1][0] = 1.0;
    m.reward[1][1] = 1.0;
    m.metric_kind = MetricKind::Index;
    m.state_metric = make_index_metric(2);
    m.action_metric = make_index_metric(2);
    m.validate();
    return m;
}

/// Random dense MDP: Dirichlet(1) transition rows, U(0,1) rewards.
inline TabularMdp make_random_mdp(int n_states, int n_actions, Rng& rng, double gamma = 0.9,
                                  int horizon = 50) {
    TabularMdp m;
    m.n_states = n_states;
    m.n_actions = n_actions;
    m.gamma = gamma;
    m.horizon = horizon;
    m.rho0 = rng.dirichlet_uniform(n_states);
    m.transition.assign(static_cast<size_t>(n_states),
                        std::vector<Vec>(static_cast<size_t>(n_actions)));
    m.reward.assign(static_cast<size_t>(n_states), Vec(static_cast<size_t>(n_actions), 0.0));
    for (int s = 0; s < n_states; ++s)
        for (int a = 0; a < n_actions; ++a) {
            m.transition[s][a] = rng.dirichlet_uniform(n_states);
            m.reward[s][a] = rng.uniform01();
        }
    m.metric_kind = MetricKind::Index;
    m.state_metric = make_index_metric(n_states);
    m.action_metric = make_index_metric(n_actions);
    m.validate();
    return m;
}

}  // namespace dtcorl
