#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "dtcorl/tabular.hpp"

namespace dtcorl {

/// Observable under an observation delay of `window.size()` steps: the last
/// state that has arrived plus the actions taken since. `masked_prefix` marks
/// how many leading window slots predate the episode (boundary samples near
/// t=0 and, at deployment, delays shorter than the model window).
template <class S, class A>
struct AugmentedState {
    S base{};
    std::vector<A> window;
    int masked_prefix = 0;

    int delay() const { return static_cast<int>(window.size()); }
    bool has_masks() const { return masked_prefix > 0; }
};

using TabAugState = AugmentedState<int, int>;
using VecF = std::vector<double>;
using ContAugState = AugmentedState<VecF, VecF>;

/// Probability vector over the original state space: the exact belief
/// b(s_t | x_t) for tabular MDPs.
struct BeliefDistribution {
    Vec probs;

    void validate() const {
        if (!is_probability_vector(probs))
            throw std::invalid_argument("BeliefDistribution: not a probability vector");
    }

    int point_mass_state(double tol = 1e-12) const {
        for (size_t s = 0; s < probs.size(); ++s)
            if (std::abs(probs[s] - 1.0) <= tol) return static_cast<int>(s);
        return -1;
    }
};

template <class S, class A>
struct AugmentedTuple {
    AugmentedState<S, A> x;
    A a{};
    double r = 0.0;
    AugmentedState<S, A> x_next;
    S true_state{};
    S true_next_state{};
    bool done = false;
    bool belief_only = false;  // boundary sample with masked window; excluded from learner batches
};

using TabAugTuple = AugmentedTuple<int, int>;
using ContAugTuple = AugmentedTuple<VecF, VecF>;

/// Delay-free trajectory as logged by the behavior policy. `states` holds
/// T+1 entries so that every transition (s_t, a_t, r_t, s_{t+1}) is explicit.
template <class S, class A>
struct Trajectory {
    std::vector<S> states;
    std::vector<A> actions;
    Vec rewards;

    int length() const { return static_cast<int>(actions.size()); }

    void validate() const {
        if (states.size() != actions.size() + 1 || rewards.size() != actions.size())
            throw std::invalid_argument("Trajectory: inconsistent lengths");
    }
};

using TabTrajectory = Trajectory<int, int>;
using ContTrajectory = Trajectory<VecF, VecF>;

namespace detail {

inline void check_tab_state(const TabularMdp& mdp, int s, const char* who) {
    if (s < 0 || s >= mdp.n_states) throw std::invalid_argument(std::string(who) + ": invalid state id");
}

inline void check_tab_action(const TabularMdp& mdp, int a, const char* who) {
    if (a < 0 || a >= mdp.n_actions)
        throw std::invalid_argument(std::string(who) + ": invalid action id");
}

}  // namespace detail

/// Exact belief over the current state: a point mass at the base observation
/// pushed forward through the transition kernels of the buffered actions, in
/// chronological order. Delta = 0 returns the point mass itself.
inline BeliefDistribution exact_belief(const TabularMdp& mdp, const TabAugState& x) {
    if (x.has_masks()) throw std::invalid_argument("exact_belief: masked windows are undefined");
    detail::check_tab_state(mdp, x.base, "exact_belief");
    BeliefDistribution b;
    b.probs.assign(static_cast<size_t>(mdp.n_states), 0.0);
    b.probs[static_cast<size_t>(x.base)] = 1.0;
    Vec next(static_cast<size_t>(mdp.n_states), 0.0);
    for (int a : x.window) {
        detail::check_tab_action(mdp, a, "exact_belief");
        std::fill(next.begin(), next.end(), 0.0);
        for (int s = 0; s < mdp.n_states; ++s) {
            const double mass = b.probs[static_cast<size_t>(s)];
            if (mass == 0.0) continue;
            const Vec& row = mdp.transition[static_cast<size_t>(s)][static_cast<size_t>(a)];
            for (int sn = 0; sn < mdp.n_states; ++sn) next[static_cast<size_t>(sn)] += mass * row[static_cast<size_t>(sn)];
        }
        std::swap(b.probs, next);
    }
    return b;
}

/// r_Delta(x, a) = E_{s ~ b(.|x)}[ r(s, a) ].
inline double delayed_reward(const TabularMdp& mdp, const TabAugState& x, int a) {
    detail::check_tab_action(mdp, a, "delayed_reward");
    const BeliefDistribution b = exact_belief(mdp, x);
    double r = 0.0;
    for (int s = 0; s < mdp.n_states; ++s)
        r += b.probs[static_cast<size_t>(s)] * mdp.reward[static_cast<size_t>(s)][static_cast<size_t>(a)];
    return r;
}

/// One row of the delayed transition kernel: successors share the shifted
/// window with `a` appended, and the base advances through the window's
/// oldest action. Probabilities are copied from the delay-free kernel row.
inline std::vector<std::pair<TabAugState, double>> delayed_transition(const TabularMdp& mdp,
                                                                      const TabAugState& x, int a) {
    if (x.has_masks())
        throw std::invalid_argument("delayed_transition: masked windows are undefined");
    detail::check_tab_state(mdp, x.base, "delayed_transition");
    detail::check_tab_action(mdp, a, "delayed_transition");
    std::vector<std::pair<TabAugState, double>> out;
    if (x.window.empty()) {
        const Vec& row = mdp.transition[static_cast<size_t>(x.base)][static_cast<size_t>(a)];
        for (int sn = 0; sn < mdp.n_states; ++sn)
            if (row[static_cast<size_t>(sn)] > 0.0) out.push_back({TabAugState{sn, {}, 0}, row[static_cast<size_t>(sn)]});
        return out;
    }
    const int oldest = x.window.front();
    detail::check_tab_action(mdp, oldest, "delayed_transition");
    std::vector<int> next_window(x.window.begin() + 1, x.window.end());
    next_window.push_back(a);
    const Vec& row = mdp.transition[static_cast<size_t>(x.base)][static_cast<size_t>(oldest)];
    for (int sn = 0; sn < mdp.n_states; ++sn)
        if (row[static_cast<size_t>(sn)] > 0.0)
            out.push_back({TabAugState{sn, next_window, 0}, row[static_cast<size_t>(sn)]});
    return out;
}

/// Bijective index of an augmented state in the enumerated space
/// S x A^Delta: base-major, then window slots oldest first.
inline int64_t augmented_index(const TabAugState& x, int n_actions) {
    int64_t idx = x.base;
    for (int a : x.window) idx = idx * n_actions + a;
    return idx;
}

inline TabAugState augmented_from_index(int64_t idx, int n_actions, int delay) {
    TabAugState x;
    x.window.assign(static_cast<size_t>(delay), 0);
    for (int i = delay - 1; i >= 0; --i) {
        x.window[static_cast<size_t>(i)] = static_cast<int>(idx % n_actions);
        idx /= n_actions;
    }
    x.base = static_cast<int>(idx);
    return x;
}

inline int64_t augmented_state_count(const TabularMdp& mdp, int delay) {
    int64_t count = mdp.n_states;
    for (int i = 0; i < delay; ++i) {
        count *= mdp.n_actions;
        if (count > 1000000) return -1;
    }
    return count;
}

/// Explicitly enumerated delayed MDP over S x A^Delta. Kernel rows equal
/// delayed_transition, rewards equal delayed_reward, and rho places the
/// delay-free initial mass on windows filled with `init_action`. The
/// augmented metric is d_S(base) plus the summed action distances of the
/// window; it is materialized only while the state count stays small enough
/// for downstream exhaustive checks.
inline TabularMdp build_augmented_mdp(const TabularMdp& mdp, int delay, int init_action = 0) {
    if (delay < 0) throw std::invalid_argument("build_augmented_mdp: negative delay");
    if (delay == 0) return mdp;
    detail::check_tab_action(mdp, init_action, "build_augmented_mdp");
    const int64_t X = augmented_state_count(mdp, delay);
    if (X < 0 || X * X * mdp.n_actions > (int64_t(1) << 25))
        throw std::invalid_argument("build_augmented_mdp: enumeration budget exceeded");

    TabularMdp out;
    out.n_states = static_cast<int>(X);
    out.n_actions = mdp.n_actions;
    out.gamma = mdp.gamma;
    out.horizon = mdp.horizon;
    out.transition.assign(static_cast<size_t>(X),
                          std::vector<Vec>(static_cast<size_t>(mdp.n_actions),
                                           Vec(static_cast<size_t>(X), 0.0)));
    out.reward.assign(static_cast<size_t>(X), Vec(static_cast<size_t>(mdp.n_actions), 0.0));
    out.rho0.assign(static_cast<size_t>(X), 0.0);

    for (int64_t xi = 0; xi < X; ++xi) {
        const TabAugState x = augmented_from_index(xi, mdp.n_actions, delay);
        for (int a = 0; a < mdp.n_actions; ++a) {
            out.reward[static_cast<size_t>(xi)][static_cast<size_t>(a)] = delayed_reward(mdp, x, a);
            for (const auto& [xn, p] : delayed_transition(mdp, x, a))
                out.transition[static_cast<size_t>(xi)][static_cast<size_t>(a)]
                              [static_cast<size_t>(augmented_index(xn, mdp.n_actions))] += p;
        }
    }
    for (int s = 0; s < mdp.n_states; ++s) {
        TabAugState x0{s, std::vector<int>(static_cast<size_t>(delay), init_action), 0};
        out.rho0[static_cast<size_t>(augmented_index(x0, mdp.n_actions))] = mdp.rho0[static_cast<size_t>(s)];
    }

    if (mdp.has_metrics() && X <= 512) {
        out.metric_kind = MetricKind::Custom;
        out.action_metric = mdp.action_metric;
        out.state_metric.assign(static_cast<size_t>(X), Vec(static_cast<size_t>(X), 0.0));
        for (int64_t i = 0; i < X; ++i) {
            const TabAugState xi = augmented_from_index(i, mdp.n_actions, delay);
            for (int64_t j = 0; j < X; ++j) {
                const TabAugState xj = augmented_from_index(j, mdp.n_actions, delay);
                double d = mdp.state_metric[static_cast<size_t>(xi.base)][static_cast<size_t>(xj.base)];
                for (int k = 0; k < delay; ++k)
                    d += mdp.action_metric[static_cast<size_t>(xi.window[static_cast<size_t>(k)])]
                                          [static_cast<size_t>(xj.window[static_cast<size_t>(k)])];
                out.state_metric[static_cast<size_t>(i)][static_cast<size_t>(j)] = d;
            }
        }
    } else {
        out.metric_kind = MetricKind::Custom;
    }
    out.validate();
    return out;
}

/// Lifts a state-space policy through the exact belief:
/// pi_Delta(a|x) = E_{s ~ b(.|x)}[ pi(a|s) ].
inline TabularPolicy lift_policy_through_belief(const TabularMdp& mdp, int delay,
                                                const TabularPolicy& pi) {
    const int64_t X = augmented_state_count(mdp, delay);
    if (X < 0) throw std::invalid_argument("lift_policy_through_belief: budget exceeded");
    TabularPolicy out;
    out.probs.assign(static_cast<size_t>(X), Vec(static_cast<size_t>(mdp.n_actions), 0.0));
    for (int64_t xi = 0; xi < X; ++xi) {
        const TabAugState x = augmented_from_index(xi, mdp.n_actions, delay);
        const BeliefDistribution b = exact_belief(mdp, x);
        for (int s = 0; s < mdp.n_states; ++s)
            for (int a = 0; a < mdp.n_actions; ++a)
                out.probs[static_cast<size_t>(xi)][static_cast<size_t>(a)] +=
                    b.probs[static_cast<size_t>(s)] * pi.probs[static_cast<size_t>(s)][static_cast<size_t>(a)];
    }
    return out;
}

/// Converts a delay-free trajectory into augmented tuples. Emits one tuple per
/// step: steps t < Delta carry [MASK]-padded windows and are flagged
/// belief_only (never fed to the learner); steps t >= Delta are full learner
/// tuples with x = (s_{t-Delta}, a_{t-Delta..t-1}), a = a_t, r = r_t and
/// true_state = s_t. Trajectories shorter than Delta+1 yield only boundary
/// samples.
template <class S, class A>
std::vector<AugmentedTuple<S, A>> augment_trajectory(const Trajectory<S, A>& traj, int delay) {
    traj.validate();
    if (delay < 0) throw std::invalid_argument("augment_trajectory: negative delay");
    const int T = traj.length();
    std::vector<AugmentedTuple<S, A>> out;
    out.reserve(static_cast<size_t>(T));

    auto make_x = [&](int t) {
        AugmentedState<S, A> x;
        const int start = t - delay;
        x.masked_prefix = start < 0 ? -start : 0;
        x.base = traj.states[static_cast<size_t>(std::max(start, 0))];
        x.window.reserve(static_cast<size_t>(delay));
        for (int k = 0; k < x.masked_prefix; ++k) x.window.push_back(A{});
        for (int k = std::max(start, 0); k < t; ++k)
            x.window.push_back(traj.actions[static_cast<size_t>(k)]);
        return x;
    };

    for (int t = 0; t < T; ++t) {
        AugmentedTuple<S, A> tup;
        tup.x = make_x(t);
        tup.a = traj.actions[static_cast<size_t>(t)];
        tup.r = traj.rewards[static_cast<size_t>(t)];
        tup.x_next = make_x(t + 1);
        tup.true_state = traj.states[static_cast<size_t>(t)];
        tup.true_next_state = traj.states[static_cast<size_t>(t + 1)];
        tup.done = (t + 1 == T);
        tup.belief_only = (t < delay);
        out.push_back(std::move(tup));
    }
    return out;
}

/// Inverse of augment_trajectory: rebuilds the raw trajectory from the tuple
/// stream of a single episode.
template <class S, class A>
Trajectory<S, A> reconstruct_trajectory(const std::vector<AugmentedTuple<S, A>>& tuples) {
    Trajectory<S, A> traj;
    for (const auto& t : tuples) {
        traj.states.push_back(t.true_state);
        traj.actions.push_back(t.a);
        traj.rewards.push_back(t.r);
    }
    if (!tuples.empty()) traj.states.push_back(tuples.back().true_next_state);
    traj.validate();
    return traj;
}

}  // namespace dtcorl
