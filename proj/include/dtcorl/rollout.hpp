#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtcorl/delayed.hpp"
#include "dtcorl/envs.hpp"
#include "dtcorl/rng.hpp"
#include "dtcorl/tabular.hpp"

namespace dtcorl {

enum class DelayKind { Deterministic, Uniform, Gaussian, Exponential, Binomial };

inline std::string to_string(DelayKind k) {
    switch (k) {
        case DelayKind::Deterministic: return "deterministic";
        case DelayKind::Uniform: return "uniform";
        case DelayKind::Gaussian: return "gaussian";
        case DelayKind::Exponential: return "exponential";
        case DelayKind::Binomial: return "binomial";
    }
    return "?";
}

inline DelayKind delay_kind_from(const std::string& s) {
    if (s == "deterministic") return DelayKind::Deterministic;
    if (s == "uniform") return DelayKind::Uniform;
    if (s == "gaussian") return DelayKind::Gaussian;
    if (s == "exponential") return DelayKind::Exponential;
    if (s == "binomial") return DelayKind::Binomial;
    throw std::invalid_argument("unknown delay kind '" + s + "'");
}

/// Per-step delay sampler. Every sampled delay is an integer in [1, max_delay];
/// the deterministic kind always returns max_delay, the mean-matched kinds are
/// parameterized so that the clamped rounded draw hits the target mean.
struct DelayProcess {
    DelayKind kind = DelayKind::Deterministic;
    int max_delay = 1;
    double mean_target = 0.0;
    double exp_rate = 1.0;  // fitted at construction for the exponential kind

    /// delay = 0 is the degenerate no-delay reduction; the stochastic kinds
    /// always sample in [1, max_delay].
    static DelayProcess deterministic(int delay) {
        if (delay < 0) throw std::invalid_argument("DelayProcess: delay must be >= 0");
        DelayProcess p;
        p.kind = DelayKind::Deterministic;
        p.max_delay = delay;
        p.mean_target = delay;
        return p;
    }

    static DelayProcess uniform(int k) {
        if (k < 1) throw std::invalid_argument("DelayProcess: k must be >= 1");
        DelayProcess p;
        p.kind = DelayKind::Uniform;
        p.max_delay = k;
        p.mean_target = (1.0 + k) / 2.0;
        return p;
    }

    static DelayProcess gaussian(int max_delay, double mean) {
        check_mean(max_delay, mean);
        DelayProcess p;
        p.kind = DelayKind::Gaussian;
        p.max_delay = max_delay;
        p.mean_target = mean;
        return p;
    }

    static DelayProcess exponential(int max_delay, double mean) {
        check_mean(max_delay, mean);
        DelayProcess p;
        p.kind = DelayKind::Exponential;
        p.max_delay = max_delay;
        p.mean_target = mean;
        p.exp_rate = fit_exponential_rate(max_delay, mean);
        return p;
    }

    static DelayProcess binomial(int max_delay, double mean) {
        check_mean(max_delay, mean);
        DelayProcess p;
        p.kind = DelayKind::Binomial;
        p.max_delay = max_delay;
        p.mean_target = mean;
        return p;
    }

    static DelayProcess make(DelayKind kind, int max_delay, double mean) {
        switch (kind) {
            case DelayKind::Deterministic: return deterministic(max_delay);
            case DelayKind::Uniform: return uniform(max_delay);
            case DelayKind::Gaussian: return gaussian(max_delay, mean);
            case DelayKind::Exponential: return exponential(max_delay, mean);
            case DelayKind::Binomial: return binomial(max_delay, mean);
        }
        throw std::invalid_argument("DelayProcess: bad kind");
    }

    int sample(Rng& rng) const {
        switch (kind) {
            case DelayKind::Deterministic:
                return max_delay;
            case DelayKind::Uniform:
                return 1 + rng.uniform_int(max_delay);
            case DelayKind::Gaussian: {
                const double sigma = max_delay / 4.0;
                return clamp_round(rng.normal(mean_target, sigma));
            }
            case DelayKind::Exponential:
                return clamp_round(rng.exponential(exp_rate));
            case DelayKind::Binomial: {
                const double p = mean_target / max_delay;
                int k = 0;
                for (int i = 0; i < max_delay; ++i) k += rng.uniform01() < p ? 1 : 0;
                return std::max(1, k);
            }
        }
        return max_delay;
    }

    /// Mean of the clamped rounded exponential with the given rate (closed form).
    static double clamped_exponential_mean(double rate, int max_delay) {
        double mean = 0.0;
        for (int d = 1; d <= max_delay; ++d) {
            double lo = d - 0.5, hi = d + 0.5;
            double p;
            if (d == 1)
                p = 1.0 - std::exp(-rate * 1.5);
            else if (d == max_delay)
                p = std::exp(-rate * (max_delay - 0.5));
            else
                p = std::exp(-rate * lo) - std::exp(-rate * hi);
            mean += d * p;
        }
        return mean;
    }

  private:
    static void check_mean(int max_delay, double mean) {
        if (max_delay < 1) throw std::invalid_argument("DelayProcess: max_delay must be >= 1");
        if (!(mean >= 1.0 && mean <= max_delay))
            throw std::invalid_argument("DelayProcess: mean must lie in [1, max_delay]");
    }

    int clamp_round(double x) const {
        const int d = static_cast<int>(std::lround(x));
        return std::max(1, std::min(max_delay, d));
    }

    /// Bisection on the rate so the clamped rounded mean matches the target.
    static double fit_exponential_rate(int max_delay, double mean) {
        double lo = 1e-4, hi = 8.0;  // mean is decreasing in the rate
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            if (clamped_exponential_mean(mid, max_delay) > mean)
                lo = mid;
            else
                hi = mid;
        }
        const double rate = 0.5 * (lo + hi);
        const double got = clamped_exponential_mean(rate, max_delay);
        if (std::abs(got - mean) / mean > 0.02)
            throw std::runtime_error("DelayProcess: exponential mean not fittable within 2%");
        return rate;
    }
};

/// Ring buffer over the most recent actions with per-slot "pre-episode" mask
/// flags. Reading yields actions in chronological order.
template <class A>
struct ActionBuffer {
    explicit ActionBuffer(int capacity)
        : capacity_(capacity), slots_(static_cast<size_t>(capacity)),
          masked_(static_cast<size_t>(capacity), 1) {
        if (capacity < 1) throw std::invalid_argument("ActionBuffer: capacity must be >= 1");
    }

    void push(const A& a, bool pre_episode = false) {
        slots_[static_cast<size_t>(head_)] = a;
        masked_[static_cast<size_t>(head_)] = pre_episode ? 1 : 0;
        head_ = (head_ + 1) % capacity_;
        count_ = std::min(count_ + 1, capacity_);
    }

    int fill_count() const { return count_; }
    int capacity() const { return capacity_; }

    bool any_masked() const {
        for (int i = 0; i < count_; ++i)
            if (masked_slot(i)) return true;
        return count_ < capacity_;
    }

    /// Last k pushed entries, oldest first, with their mask flags.
    std::vector<std::pair<A, bool>> last(int k) const {
        if (k > count_) throw std::out_of_range("ActionBuffer: not enough entries");
        std::vector<std::pair<A, bool>> out;
        out.reserve(static_cast<size_t>(k));
        for (int i = count_ - k; i < count_; ++i)
            out.push_back({slot(i), masked_slot(i)});
        return out;
    }

  private:
    // logical index 0 = oldest retained entry
    const A& slot(int logical) const {
        const int idx = (head_ - count_ + logical + 2 * capacity_) % capacity_;
        return slots_[static_cast<size_t>(idx)];
    }
    bool masked_slot(int logical) const {
        const int idx = (head_ - count_ + logical + 2 * capacity_) % capacity_;
        return masked_[static_cast<size_t>(idx)] != 0;
    }

    int capacity_;
    std::vector<A> slots_;
    std::vector<char> masked_;
    int head_ = 0;
    int count_ = 0;
};

/// Everything an agent sees at one delayed step: the newest revealed
/// observation, the actions taken since it (window padded to the model width
/// with leading masks), and the effective delay.
template <class S, class A>
struct DelayedContext {
    AugmentedState<S, A> x;  // window padded to buffer capacity, masked prefix set
    int sampled_delay = 0;
    int effective_delay = 0;
    int t = 0;
};

template <class S, class A>
using DelayedAgent = std::function<A(const DelayedContext<S, A>&, Rng&)>;

template <class S, class A>
struct EpisodeRecord {
    std::vector<S> true_states;   // T + 1
    std::vector<S> delayed_obs;   // T
    std::vector<A> actions;       // T
    Vec rewards;                  // T
    std::vector<int> sampled_delays;
    std::vector<int> reveal_index;  // m_t, nondecreasing
    double undiscounted_return = 0.0;
    double normalized_return = std::numeric_limits<double>::quiet_NaN();

    Trajectory<S, A> as_trajectory() const {
        Trajectory<S, A> tr;
        tr.states = true_states;
        tr.actions = actions;
        tr.rewards = rewards;
        return tr;
    }
};

namespace detail {

/// The delay plumbing shared by the continuous and tabular harnesses.
/// reveal index m_t = max(m_{t-1}, t - delta_t, 0): observations never arrive
/// out of order, so the effective delay is clamped accordingly.
template <class S, class A, class ResetFn, class StepFn, class WarmupFn>
EpisodeRecord<S, A> run_delayed_episode_impl(int episode_len, const ResetFn& reset,
                                             const StepFn& step, const WarmupFn& warmup_action,
                                             const DelayedAgent<S, A>& agent,
                                             const DelayProcess& delay, uint64_t seed,
                                             bool warmup_random) {
    Rng env_rng(seed);
    Rng delay_rng = env_rng.child(1);
    Rng agent_rng = env_rng.child(2);
    Rng warm_rng = env_rng.child(3);

    EpisodeRecord<S, A> rec;
    const int cap = delay.max_delay;
    ActionBuffer<A> buffer(std::max(cap, 1));
    for (int i = 0; i < cap; ++i) buffer.push(warmup_action(warm_rng, warmup_random), true);

    S s = reset(env_rng);
    rec.true_states.push_back(s);
    int m_prev = 0;
    for (int t = 0; t < episode_len; ++t) {
        const int delta = delay.sample(delay_rng);
        const int m = std::max({m_prev, t - delta, 0});
        m_prev = m;
        const int effective = t - m;

        DelayedContext<S, A> ctx;
        ctx.t = t;
        ctx.sampled_delay = delta;
        ctx.effective_delay = effective;
        ctx.x.base = rec.true_states[static_cast<size_t>(m)];
        ctx.x.masked_prefix = cap - effective;
        if (cap > 0)
            for (const auto& [a, pre] : buffer.last(cap)) ctx.x.window.push_back(a);

        const A action = agent(ctx, agent_rng);
        auto [sn, r] = step(s, action, env_rng);

        rec.delayed_obs.push_back(ctx.x.base);
        rec.actions.push_back(action);
        rec.rewards.push_back(r);
        rec.sampled_delays.push_back(delta);
        rec.reveal_index.push_back(m);
        rec.undiscounted_return += r;
        if (cap > 0) buffer.push(action, false);
        rec.true_states.push_back(sn);
        s = sn;
    }
    return rec;
}

}  // namespace detail

/// Online delayed rollout for a continuous environment. At step t the agent
/// sees the newest available observation s_{m_t}, the buffered actions since
/// it (earlier window slots masked), and picks an action.
inline EpisodeRecord<VecF, VecF> run_delayed_episode(const ContinuousEnv& env,
                                                     const DelayedAgent<VecF, VecF>& agent,
                                                     const DelayProcess& delay, uint64_t seed,
                                                     bool warmup_random = true) {
    auto warm = [&env](Rng& rng, bool random) {
        VecF a(static_cast<size_t>(env.action_dim), 0.0);
        if (random)
            for (auto& v : a) v = rng.uniform(-1.0, 1.0);
        return a;
    };
    return detail::run_delayed_episode_impl<VecF, VecF>(
        env.episode_len, env.reset,
        [&env](const VecF& s, const VecF& a, Rng& rng) { return env.step(s, a, rng); }, warm,
        agent, delay, seed, warmup_random);
}

inline EpisodeRecord<int, int> run_delayed_episode(const TabularEnvView& env,
                                                   const DelayedAgent<int, int>& agent,
                                                   const DelayProcess& delay, uint64_t seed,
                                                   bool warmup_random = true) {
    auto warm = [&env](Rng& rng, bool random) {
        return random ? rng.uniform_int(env.mdp->n_actions) : 0;
    };
    return detail::run_delayed_episode_impl<int, int>(
        env.episode_len, [&env](Rng& rng) { return env.reset(rng); },
        [&env](int s, int a, Rng& rng) { return env.step(s, a, rng); }, warm, agent, delay, seed,
        warmup_random);
}

/// Agent adapters ------------------------------------------------------------

/// Applies a state-space policy to the raw delayed observation (the
/// "no compensation" baseline).
inline DelayedAgent<int, int> delayed_state_agent(const TabularPolicy& policy) {
    return [policy](const DelayedContext<int, int>& ctx, Rng& rng) {
        return rng.categorical(policy.probs[static_cast<size_t>(ctx.x.base)]);
    };
}

inline DelayedAgent<VecF, VecF> delayed_state_agent(std::function<VecF(const VecF&)> policy) {
    return [policy](const DelayedContext<VecF, VecF>& ctx, Rng&) { return policy(ctx.x.base); };
}

/// Uniform-random continuous agent.
inline DelayedAgent<VecF, VecF> random_agent(int action_dim) {
    return [action_dim](const DelayedContext<VecF, VecF>&, Rng& rng) {
        VecF a(static_cast<size_t>(action_dim));
        for (auto& v : a) v = rng.uniform(-1.0, 1.0);
        return a;
    };
}

inline DelayedAgent<int, int> random_agent_tabular(int n_actions) {
    return [n_actions](const DelayedContext<int, int>&, Rng& rng) {
        return rng.uniform_int(n_actions);
    };
}

/// Reference scores for normalized returns, cached per environment + seed.
struct ScoreRefs {
    double random_score = 0.0;
    double expert_score = 0.0;
};

struct EvalResult {
    double mean = 0.0;
    double stddev = 0.0;
    std::vector<double> per_episode;
};

inline double normalized_return(double ret, const ScoreRefs& refs) {
    if (refs.expert_score <= refs.random_score)
        throw std::runtime_error("normalized_return: degenerate normalization (expert <= random)");
    return 100.0 * (ret - refs.random_score) / (refs.expert_score - refs.random_score);
}

/// Random/expert reference scores at zero delay: the random policy over 100
/// episodes and the delay-free expert controller over 100 episodes.
inline ScoreRefs compute_score_refs(const ContinuousEnv& env, uint64_t seed) {
    static std::mutex cache_mutex;
    static std::map<std::pair<std::string, uint64_t>, ScoreRefs> cache;
    const auto key = std::make_pair(env.id + "#" + std::to_string(env.episode_len), seed);
    {
        std::lock_guard<std::mutex> lock(cache_mutex);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
    }
    if (!env.expert) throw std::runtime_error("compute_score_refs: env has no expert reference");
    ScoreRefs refs;
    const DelayProcess no_delay = DelayProcess::deterministic(0);
    double acc_r = 0.0, acc_e = 0.0;
    const int n = 100;
    for (int e = 0; e < n; ++e) {
        acc_r += run_delayed_episode(env, random_agent(env.action_dim), no_delay,
                                     seed * 1000003 + static_cast<uint64_t>(e), false)
                     .undiscounted_return;
        acc_e += run_delayed_episode(env, delayed_state_agent(env.expert), no_delay,
                                     seed * 2000003 + static_cast<uint64_t>(e), false)
                     .undiscounted_return;
    }
    refs.random_score = acc_r / n;
    refs.expert_score = acc_e / n;
    {
        std::lock_guard<std::mutex> lock(cache_mutex);
        cache[key] = refs;
    }
    return refs;
}

inline EvalResult evaluate(const ContinuousEnv& env, const DelayedAgent<VecF, VecF>& agent,
                           const DelayProcess& delay, int n_episodes, uint64_t seed,
                           const ScoreRefs& refs) {
    EvalResult out;
    for (int e = 0; e < n_episodes; ++e) {
        auto rec = run_delayed_episode(env, agent, delay, seed + static_cast<uint64_t>(e) * 977, true);
        out.per_episode.push_back(normalized_return(rec.undiscounted_return, refs));
    }
    double mean = 0.0;
    for (double v : out.per_episode) mean += v;
    mean /= out.per_episode.size();
    double var = 0.0;
    for (double v : out.per_episode) var += (v - mean) * (v - mean);
    out.mean = mean;
    out.stddev = out.per_episode.size() > 1 ? std::sqrt(var / (out.per_episode.size() - 1)) : 0.0;
    return out;
}

/// Behavior-dataset generation (always delay-free) ---------------------------

enum class BehaviorKind { Expert, Medium, ReplayMix };

inline BehaviorKind behavior_kind_from(const std::string& s) {
    if (s == "expert") return BehaviorKind::Expert;
    if (s == "medium") return BehaviorKind::Medium;
    if (s == "replay-mix") return BehaviorKind::ReplayMix;
    throw std::invalid_argument("unknown behavior kind '" + s + "'");
}

inline std::string to_string(BehaviorKind k) {
    switch (k) {
        case BehaviorKind::Expert: return "expert";
        case BehaviorKind::Medium: return "medium";
        case BehaviorKind::ReplayMix: return "replay-mix";
    }
    return "?";
}

/// Delay-free trajectories from an epsilon-greedy expert (expert/medium) or a
/// mixture of exploration levels standing in for replay checkpoints.
inline std::vector<ContTrajectory> generate_behavior_dataset(const ContinuousEnv& env,
                                                             BehaviorKind kind, int n_trajectories,
                                                             uint64_t seed) {
    if (!env.expert) throw std::runtime_error("generate_behavior_dataset: env has no expert");
    std::vector<ContTrajectory> out;
    Rng rng(seed);
    for (int k = 0; k < n_trajectories; ++k) {
        double eps = 0.05;
        if (kind == BehaviorKind::Medium) eps = 0.3;
        if (kind == BehaviorKind::ReplayMix) {
            const double levels[] = {0.6, 0.4, 0.2, 0.1, 0.05};
            eps = levels[rng.uniform_int(5)];
        }
        ContTrajectory tr;
        Rng ep_rng = rng.child(static_cast<uint64_t>(k) + 1);
        VecF s = env.reset(ep_rng);
        tr.states.push_back(s);
        for (int t = 0; t < env.episode_len; ++t) {
            VecF a;
            if (ep_rng.uniform01() < eps) {
                a.assign(static_cast<size_t>(env.action_dim), 0.0);
                for (auto& v : a) v = ep_rng.uniform(-1.0, 1.0);
            } else {
                a = env.clamp_action(env.expert(s));
            }
            auto [sn, r] = env.step(s, a, ep_rng);
            tr.actions.push_back(a);
            tr.rewards.push_back(r);
            tr.states.push_back(sn);
            s = sn;
        }
        out.push_back(std::move(tr));
    }
    return out;
}

/// Tabular counterpart: expert from exact policy iteration, replay-mix from
/// greedy policies of successive value-iteration sweeps.
inline std::vector<TabTrajectory> generate_behavior_dataset(const TabularMdp& mdp,
                                                            BehaviorKind kind, int n_trajectories,
                                                            uint64_t seed, int episode_len = 0) {
    if (episode_len <= 0) episode_len = mdp.horizon;
    auto [expert, vt] = exact_policy_iteration(mdp, 1e-10);
    std::vector<TabularPolicy> pool;
    if (kind == BehaviorKind::Expert) pool.push_back(TabularPolicy::epsilon_greedy(expert, 0.05));
    if (kind == BehaviorKind::Medium) pool.push_back(TabularPolicy::epsilon_greedy(expert, 0.3));
    if (kind == BehaviorKind::ReplayMix)
        for (int sweeps : {1, 3, 10, 30, 100})
            pool.push_back(TabularPolicy::epsilon_greedy(
                greedy_policy_from_q(value_iteration_q(mdp, sweeps)), 0.1));

    std::vector<TabTrajectory> out;
    Rng rng(seed);
    for (int k = 0; k < n_trajectories; ++k) {
        const TabularPolicy& pol = pool[static_cast<size_t>(k) % pool.size()];
        Rng ep_rng = rng.child(static_cast<uint64_t>(k) + 1);
        TabTrajectory tr;
        int s = ep_rng.categorical(mdp.rho0);
        tr.states.push_back(s);
        for (int t = 0; t < episode_len; ++t) {
            const int a = ep_rng.categorical(pol.probs[static_cast<size_t>(s)]);
            tr.actions.push_back(a);
            tr.rewards.push_back(mdp.reward[static_cast<size_t>(s)][static_cast<size_t>(a)]);
            const int sn = ep_rng.categorical(mdp.transition[static_cast<size_t>(s)][static_cast<size_t>(a)]);
            tr.states.push_back(sn);
            s = sn;
        }
        out.push_back(std::move(tr));
    }
    return out;
}

}  // namespace dtcorl
