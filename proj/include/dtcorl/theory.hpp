#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <deque>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtcorl/delayed.hpp"
#include "dtcorl/lipschitz.hpp"
#include "dtcorl/tabular.hpp"
#include "dtcorl/wasserstein.hpp"

namespace dtcorl {

/// Outcome of one numerical bound (or identity) check. For bounds, slack is
/// rhs - lhs and holds means the worst per-x slack stays above -1e-8; for
/// identities, slack is the negated worst absolute deviation.
struct BoundReport {
    std::string instance;
    std::string check_id;
    int delay_tau = 0;
    int delay = 0;
    double lhs = 0.0;   // averaged over the checked set
    double rhs = 0.0;   // averaged over the checked set
    double slack = 0.0; // averaged slack
    double worst_slack = 0.0;
    bool holds = false;
};

inline uint64_t mdp_fingerprint(const TabularMdp& mdp) {
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](double v) {
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, sizeof(bits));
        h ^= bits;
        h *= 1099511628211ull;
    };
    mix(static_cast<double>(mdp.n_states));
    mix(static_cast<double>(mdp.n_actions));
    mix(mdp.gamma);
    for (const auto& sa : mdp.transition)
        for (const auto& row : sa)
            for (double p : row) mix(p);
    for (const auto& row : mdp.reward)
        for (double r : row) mix(r);
    return h;
}

inline std::string instance_tag(const TabularMdp& mdp) {
    std::ostringstream os;
    os << std::hex << mdp_fingerprint(mdp);
    return os.str();
}

/// Augmented states of delay Delta reachable from rho_Delta under any action
/// sequence.
inline std::vector<int64_t> reachable_augmented_states(const TabularMdp& mdp, int delay,
                                                       int init_action = 0) {
    const int64_t X = augmented_state_count(mdp, delay);
    if (X < 0) throw std::invalid_argument("reachable_augmented_states: budget exceeded");
    std::vector<char> seen(static_cast<size_t>(X), 0);
    std::deque<int64_t> queue;
    for (int s = 0; s < mdp.n_states; ++s) {
        if (mdp.rho0[static_cast<size_t>(s)] <= 0.0) continue;
        TabAugState x{s, std::vector<int>(static_cast<size_t>(delay), init_action), 0};
        const int64_t xi = augmented_index(x, mdp.n_actions);
        if (!seen[static_cast<size_t>(xi)]) {
            seen[static_cast<size_t>(xi)] = 1;
            queue.push_back(xi);
        }
    }
    while (!queue.empty()) {
        const int64_t xi = queue.front();
        queue.pop_front();
        const TabAugState x = augmented_from_index(xi, mdp.n_actions, delay);
        for (int a = 0; a < mdp.n_actions; ++a)
            for (const auto& [xn, p] : delayed_transition(mdp, x, a)) {
                const int64_t xni = augmented_index(xn, mdp.n_actions);
                if (!seen[static_cast<size_t>(xni)]) {
                    seen[static_cast<size_t>(xni)] = 1;
                    queue.push_back(xni);
                }
            }
    }
    std::vector<int64_t> out;
    for (int64_t xi = 0; xi < X; ++xi)
        if (seen[static_cast<size_t>(xi)]) out.push_back(xi);
    return out;
}

/// Distribution over the shorter-delay augmented states consistent with x:
/// the base is the Delta-minus-Delta_tau step pushforward of x's base through
/// the oldest window actions, the window is x's action suffix.
inline std::vector<std::pair<int64_t, double>> shorter_delay_belief(const TabularMdp& mdp,
                                                                    const TabAugState& x,
                                                                    int delay_tau) {
    const int delay = x.delay();
    if (delay_tau > delay) throw std::invalid_argument("shorter_delay_belief: delay_tau > delay");
    TabAugState prefix{x.base, std::vector<int>(x.window.begin(), x.window.end() - delay_tau), 0};
    const Vec base_dist = exact_belief(mdp, prefix).probs;
    const std::vector<int> suffix(x.window.end() - delay_tau, x.window.end());
    std::vector<std::pair<int64_t, double>> out;
    for (int s = 0; s < mdp.n_states; ++s) {
        if (base_dist[static_cast<size_t>(s)] <= 0.0) continue;
        TabAugState xt{s, suffix, 0};
        out.push_back({augmented_index(xt, mdp.n_actions), base_dist[static_cast<size_t>(s)]});
    }
    return out;
}

namespace detail {

struct BoundContext {
    TabularMdp aug_tau;
    TabularMdp aug;
    ValueTables vt_tau;
    Vec v_tau;
    ValueTables vt_delta;
    double l_q = 0.0;
    std::vector<int64_t> reachable;
};

inline BoundContext make_bound_context(const TabularMdp& mdp, int delay, int delay_tau,
                                       const TabularPolicy& pi_tau, const TabularPolicy& pi_delta,
                                       double tol = 1e-11) {
    BoundContext c;
    c.aug_tau = build_augmented_mdp(mdp, delay_tau);
    c.aug = build_augmented_mdp(mdp, delay);
    c.vt_tau = exact_policy_evaluation(c.aug_tau, pi_tau, tol);
    c.v_tau = state_values_from(pi_tau, c.vt_tau.q);
    c.vt_delta = exact_policy_evaluation(c.aug, pi_delta, tol);
    c.l_q = estimate_lipschitz_constants(c.aug_tau, pi_tau, c.vt_tau).L_Q;
    c.reachable = reachable_augmented_states(mdp, delay);
    return c;
}

}  // namespace detail

/// Performance-difference bound between a shorter-delay policy and a
/// longer-delay policy: for each reachable x,
///   E_{x_tau ~ b, a ~ pi_Delta(.|x)}[ V_tau(x_tau) - Q_tau(x_tau, a) ]
///     <= L_Q * E_{x_tau ~ b}[ W1(pi_tau(.|x_tau), pi_Delta(.|x)) ].
inline BoundReport verify_performance_difference_bound(const TabularMdp& mdp, int delay,
                                                       int delay_tau, const TabularPolicy& pi_tau,
                                                       const TabularPolicy& pi_delta) {
    if (!(delay_tau < delay))
        throw std::invalid_argument("verify_performance_difference_bound: need delay_tau < delay");
    detail::BoundContext c = detail::make_bound_context(mdp, delay, delay_tau, pi_tau, pi_delta);
    BoundReport rep;
    rep.instance = instance_tag(mdp);
    rep.check_id = "performance_difference";
    rep.delay_tau = delay_tau;
    rep.delay = delay;
    rep.worst_slack = 1e300;
    for (int64_t xi : c.reachable) {
        const TabAugState x = augmented_from_index(xi, mdp.n_actions, delay);
        const Vec& pol_row = pi_delta.probs[static_cast<size_t>(xi)];
        double lhs = 0.0, rhs = 0.0;
        for (const auto& [xt, p] : shorter_delay_belief(mdp, x, delay_tau)) {
            double inner = c.v_tau[static_cast<size_t>(xt)];
            for (int a = 0; a < mdp.n_actions; ++a)
                inner -= pol_row[static_cast<size_t>(a)] * c.vt_tau.q[static_cast<size_t>(xt)][static_cast<size_t>(a)];
            lhs += p * inner;
            rhs += p * c.l_q *
                   wasserstein1_discrete(pi_tau.probs[static_cast<size_t>(xt)], pol_row, mdp.action_metric);
        }
        rep.lhs += lhs;
        rep.rhs += rhs;
        rep.worst_slack = std::min(rep.worst_slack, rhs - lhs);
    }
    const double n = static_cast<double>(c.reachable.size());
    rep.lhs /= n;
    rep.rhs /= n;
    rep.slack = rep.rhs - rep.lhs;
    rep.holds = rep.worst_slack >= -1e-8;
    return rep;
}

/// Q-value difference bound with the discounted constant c = gamma L_Q / (1-gamma).
/// The difference telescopes over the FUTURE policy divergences, so the
/// pointwise-valid bound controls each reachable x by the worst expected
/// divergence over reachable states:
///   E_{x_tau ~ b, a ~ pi_Delta}[ Q_tau(x_tau, a) - Q_Delta(x, a) ]
///     <= c * max_{x~ reachable} E_{x_tau ~ b(.|x~)}[ W1(pi_tau, pi_Delta(.|x~)) ].
/// (The x-local variant with only the current state's W1 on the right is
/// numerically refutable; this check also reports the dataset-averaged form,
/// which is the shape the evaluation-equation derivation actually uses.)
inline BoundReport verify_qvalue_difference_bound(const TabularMdp& mdp, int delay, int delay_tau,
                                                  const TabularPolicy& pi_tau,
                                                  const TabularPolicy& pi_delta) {
    if (!(delay_tau < delay))
        throw std::invalid_argument("verify_qvalue_difference_bound: need delay_tau < delay");
    detail::BoundContext c = detail::make_bound_context(mdp, delay, delay_tau, pi_tau, pi_delta);
    const double constant = mdp.gamma * c.l_q / (1.0 - mdp.gamma);
    BoundReport rep;
    rep.instance = instance_tag(mdp);
    rep.check_id = "qvalue_difference";
    rep.delay_tau = delay_tau;
    rep.delay = delay;

    Vec lhs_per_x, ew1_per_x;
    for (int64_t xi : c.reachable) {
        const TabAugState x = augmented_from_index(xi, mdp.n_actions, delay);
        const Vec& pol_row = pi_delta.probs[static_cast<size_t>(xi)];
        double lhs = 0.0, ew1 = 0.0;
        for (const auto& [xt, p] : shorter_delay_belief(mdp, x, delay_tau)) {
            for (int a = 0; a < mdp.n_actions; ++a)
                lhs += p * pol_row[static_cast<size_t>(a)] *
                       (c.vt_tau.q[static_cast<size_t>(xt)][static_cast<size_t>(a)] -
                        c.vt_delta.q[static_cast<size_t>(xi)][static_cast<size_t>(a)]);
            ew1 += p * wasserstein1_discrete(pi_tau.probs[static_cast<size_t>(xt)], pol_row,
                                             mdp.action_metric);
        }
        lhs_per_x.push_back(lhs);
        ew1_per_x.push_back(ew1);
    }
    const double max_ew1 = *std::max_element(ew1_per_x.begin(), ew1_per_x.end());
    const double rhs_bound = constant * max_ew1;
    double lhs_avg = 0.0, rhs_local_avg = 0.0;
    rep.worst_slack = 1e300;
    for (size_t i = 0; i < lhs_per_x.size(); ++i) {
        lhs_avg += lhs_per_x[i];
        rhs_local_avg += constant * ew1_per_x[i];
        rep.worst_slack = std::min(rep.worst_slack, rhs_bound - lhs_per_x[i]);
    }
    lhs_avg /= static_cast<double>(lhs_per_x.size());
    rhs_local_avg /= static_cast<double>(lhs_per_x.size());
    rep.lhs = lhs_avg;
    rep.rhs = rhs_bound;
    rep.slack = rhs_local_avg - lhs_avg;  // dataset-averaged form of the derivation
    rep.holds = rep.worst_slack >= -1e-8 && rep.slack >= -1e-8;
    return rep;
}

/// General performance-difference identity: for every reachable x,
///   I(x) = E_{s ~ b(.|x)}[ V_pi(s) ] - V_{Delta,beta}(x)
///        = 1/(1-gamma) * E_{x~ ~ d_beta(x), s ~ b(.|x~), a ~ beta(.|x~)}
///              [ V_pi(s) - Q_pi(s, a) ],
/// with d_beta the normalized discounted occupancy of beta from x. Checked as
/// an equality; holds when the worst absolute deviation stays within 1e-8.
inline BoundReport verify_general_performance_difference(const TabularMdp& mdp, int delay,
                                                         const TabularPolicy& mu_delta,
                                                         const TabularPolicy& pi) {
    TabularMdp aug = build_augmented_mdp(mdp, delay);
    const int64_t X = aug.n_states;
    ValueTables vt_pi = exact_policy_evaluation(mdp, pi, 1e-12);
    ValueTables vt_beta = exact_policy_evaluation(aug, mu_delta, 1e-12);
    Vec v_beta = state_values_from(mu_delta, vt_beta.q);

    // per-x expected advantage-style gap g(x~) = E_{s~b, a~beta}[V(s) - Q(s,a)]
    Vec gap(static_cast<size_t>(X), 0.0);
    std::vector<Vec> beliefs(static_cast<size_t>(X));
    for (int64_t xi = 0; xi < X; ++xi) {
        const TabAugState x = augmented_from_index(xi, mdp.n_actions, delay);
        beliefs[static_cast<size_t>(xi)] = exact_belief(mdp, x).probs;
        double g = 0.0;
        for (int s = 0; s < mdp.n_states; ++s) {
            const double bs = beliefs[static_cast<size_t>(xi)][static_cast<size_t>(s)];
            if (bs <= 0.0) continue;
            double inner = vt_pi.v[static_cast<size_t>(s)];
            double qa = 0.0;
            for (int a = 0; a < mdp.n_actions; ++a)
                qa += mu_delta.probs[static_cast<size_t>(xi)][static_cast<size_t>(a)] * vt_pi.q[static_cast<size_t>(s)][static_cast<size_t>(a)];
            g += bs * (inner - qa);
        }
        gap[static_cast<size_t>(xi)] = g;
    }

    // transition matrix of beta in the augmented MDP
    Mat p_beta(static_cast<size_t>(X), Vec(static_cast<size_t>(X), 0.0));
    for (int64_t xi = 0; xi < X; ++xi)
        for (int a = 0; a < mdp.n_actions; ++a) {
            const double pa = mu_delta.probs[static_cast<size_t>(xi)][static_cast<size_t>(a)];
            if (pa <= 0.0) continue;
            for (int64_t xn = 0; xn < X; ++xn)
                p_beta[static_cast<size_t>(xi)][static_cast<size_t>(xn)] +=
                    pa * aug.transition[static_cast<size_t>(xi)][static_cast<size_t>(a)][static_cast<size_t>(xn)];
        }

    BoundReport rep;
    rep.instance = instance_tag(mdp);
    rep.check_id = "general_performance_difference";
    rep.delay = delay;
    rep.worst_slack = 0.0;
    double worst_abs = 0.0;
    // occupancy solve per x: u = sum_k gamma^k (P_beta^k)^T delta_x is handled
    // as the fixed point u = delta_x + gamma P_beta^T u; the identity needs
    // E_{x~ ~ d}[gap] / (1-gamma) = sum_k gamma^k E[gap at step k], i.e.
    // w = (I - gamma P_beta)^{-1} gap evaluated at x.
    // Solve (I - gamma P_beta) w = gap once.
    {
        Mat m(static_cast<size_t>(X), Vec(static_cast<size_t>(X), 0.0));
        for (int64_t i = 0; i < X; ++i) {
            for (int64_t j = 0; j < X; ++j)
                m[static_cast<size_t>(i)][static_cast<size_t>(j)] = -mdp.gamma * p_beta[static_cast<size_t>(i)][static_cast<size_t>(j)];
            m[static_cast<size_t>(i)][static_cast<size_t>(i)] += 1.0;
        }
        // Gaussian elimination
        Vec w = gap;
        // reuse a simple in-place solve
        for (int64_t col = 0; col < X; ++col) {
            int64_t piv = col;
            for (int64_t r = col + 1; r < X; ++r)
                if (std::abs(m[static_cast<size_t>(r)][static_cast<size_t>(col)]) >
                    std::abs(m[static_cast<size_t>(piv)][static_cast<size_t>(col)]))
                    piv = r;
            std::swap(m[static_cast<size_t>(col)], m[static_cast<size_t>(piv)]);
            std::swap(w[static_cast<size_t>(col)], w[static_cast<size_t>(piv)]);
            const double d = m[static_cast<size_t>(col)][static_cast<size_t>(col)];
            for (int64_t r = col + 1; r < X; ++r) {
                const double f = m[static_cast<size_t>(r)][static_cast<size_t>(col)] / d;
                if (f == 0.0) continue;
                for (int64_t cc = col; cc < X; ++cc)
                    m[static_cast<size_t>(r)][static_cast<size_t>(cc)] -= f * m[static_cast<size_t>(col)][static_cast<size_t>(cc)];
                w[static_cast<size_t>(r)] -= f * w[static_cast<size_t>(col)];
            }
        }
        for (int64_t r = X - 1; r >= 0; --r) {
            double acc = w[static_cast<size_t>(r)];
            for (int64_t cc = r + 1; cc < X; ++cc)
                acc -= m[static_cast<size_t>(r)][static_cast<size_t>(cc)] * w[static_cast<size_t>(cc)];
            w[static_cast<size_t>(r)] = acc / m[static_cast<size_t>(r)][static_cast<size_t>(r)];
        }
        // lhs and rhs per reachable x
        std::vector<int64_t> reach = reachable_augmented_states(mdp, delay);
        for (int64_t xi : reach) {
            double lhs = -v_beta[static_cast<size_t>(xi)];
            for (int s = 0; s < mdp.n_states; ++s)
                lhs += beliefs[static_cast<size_t>(xi)][static_cast<size_t>(s)] * vt_pi.v[static_cast<size_t>(s)];
            const double rhs = w[static_cast<size_t>(xi)];
            rep.lhs += lhs;
            rep.rhs += rhs;
            worst_abs = std::max(worst_abs, std::abs(lhs - rhs));
        }
        rep.lhs /= static_cast<double>(reach.size());
        rep.rhs /= static_cast<double>(reach.size());
    }
    rep.slack = -worst_abs;
    rep.worst_slack = -worst_abs;
    rep.holds = worst_abs <= 1e-8;
    return rep;
}

/// Derivation-step inequalities: the action-space Lipschitz transport bound
/// |E_{a1~mu, a2~nu}[Q(s,a1) - Q(s,a2)]| <= L_Q W1(mu, nu) and the W1 triangle
/// inequality, on sampled (state, mu, nu, rho) tuples.
inline std::vector<BoundReport> verify_bpe_derivation_inequalities(const TabularMdp& mdp,
                                                                   const TabularPolicy& pi,
                                                                   int n_triples, Rng& rng) {
    ValueTables vt = exact_policy_evaluation(mdp, pi, 1e-12);
    const double l_q = estimate_lipschitz_constants(mdp, pi, vt).L_Q;
    std::vector<BoundReport> out;
    for (int k = 0; k < n_triples; ++k) {
        const int s = rng.uniform_int(mdp.n_states);
        const Vec mu = rng.dirichlet_uniform(mdp.n_actions);
        const Vec nu = rng.dirichlet_uniform(mdp.n_actions);
        const Vec rho = rng.dirichlet_uniform(mdp.n_actions);

        BoundReport lip;
        lip.instance = instance_tag(mdp);
        lip.check_id = "lipschitz_transport";
        double diff = 0.0;
        for (int a = 0; a < mdp.n_actions; ++a)
            diff += (mu[static_cast<size_t>(a)] - nu[static_cast<size_t>(a)]) * vt.q[static_cast<size_t>(s)][static_cast<size_t>(a)];
        lip.lhs = std::abs(diff);
        lip.rhs = l_q * wasserstein1_discrete(mu, nu, mdp.action_metric);
        lip.slack = lip.rhs - lip.lhs;
        lip.worst_slack = lip.slack;
        lip.holds = lip.slack >= -1e-8;
        out.push_back(lip);

        BoundReport tri;
        tri.instance = lip.instance;
        tri.check_id = "w1_triangle";
        tri.lhs = wasserstein1_discrete(mu, rho, mdp.action_metric);
        tri.rhs = wasserstein1_discrete(mu, nu, mdp.action_metric) +
                  wasserstein1_discrete(nu, rho, mdp.action_metric);
        tri.slack = tri.rhs - tri.lhs;
        tri.worst_slack = tri.slack;
        tri.holds = tri.slack >= -1e-8;
        out.push_back(tri);
    }
    return out;
}

}  // namespace dtcorl
