#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>

#include "dtcorl/delayed.hpp"
#include "dtcorl/rng.hpp"
#include "dtcorl/tabular.hpp"

namespace dtcorl {

/// Low-dimensional continuous control task. With sigma_env = 0 the step
/// function never draws from the rng, so it is deterministic for equal inputs.
struct ContinuousEnv {
    std::string id;
    int state_dim = 1;
    int action_dim = 1;
    int episode_len = 48;
    double sigma_env = 0.0;
    std::function<VecF(Rng&)> reset;
    std::function<std::pair<VecF, double>(const VecF&, const VecF&, Rng&)> step;
    std::function<VecF(const VecF&)> expert;  // near-optimal delay-free controller

    VecF clamp_action(VecF a) const {
        for (auto& v : a) v = v < -1.0 ? -1.0 : (v > 1.0 ? 1.0 : v);
        return a;
    }
};

/// 1D point mass: s' = s + 0.1 a + noise, quadratic state cost toward the
/// origin (no action cost, so the deadbeat controller a = clamp(-10 s) is the
/// near-optimal expert reference).
inline ContinuousEnv make_pointmass1d(double sigma_env = 0.02, int episode_len = 48) {
    ContinuousEnv env;
    env.id = "pointmass1d";
    env.state_dim = 1;
    env.action_dim = 1;
    env.episode_len = episode_len;
    env.sigma_env = sigma_env;
    env.reset = [](Rng& rng) { return VecF{rng.uniform(-1.0, 1.0)}; };
    env.step = [sigma_env](const VecF& s, const VecF& a, Rng& rng) {
        const double act = std::max(-1.0, std::min(1.0, a[0]));
        double sn = s[0] + 0.1 * act;
        if (sigma_env > 0.0) sn += sigma_env * rng.normal();
        sn = std::max(-2.0, std::min(2.0, sn));
        const double r = -(s[0] * s[0]);
        return std::make_pair(VecF{sn}, r);
    };
    env.expert = [](const VecF& s) {
        return VecF{std::max(-1.0, std::min(1.0, -10.0 * s[0]))};
    };
    return env;
}

/// 2D slowly rotating linear system with contractive drift.
inline ContinuousEnv make_linear2d(double sigma_env = 0.02, int episode_len = 48) {
    ContinuousEnv env;
    env.id = "linear2d";
    env.state_dim = 2;
    env.action_dim = 2;
    env.episode_len = episode_len;
    env.sigma_env = sigma_env;
    const double theta = 0.2, rho = 0.98, gain = 0.1;
    const double c = std::cos(theta), sn = std::sin(theta);
    env.reset = [](Rng& rng) { return VecF{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)}; };
    env.step = [=](const VecF& s, const VecF& a, Rng& rng) {
        VecF act = {std::max(-1.0, std::min(1.0, a[0])), std::max(-1.0, std::min(1.0, a[1]))};
        VecF next = {rho * (c * s[0] - sn * s[1]) + gain * act[0],
                     rho * (sn * s[0] + c * s[1]) + gain * act[1]};
        if (sigma_env > 0.0) {
            next[0] += sigma_env * rng.normal();
            next[1] += sigma_env * rng.normal();
        }
        for (auto& v : next) v = std::max(-3.0, std::min(3.0, v));
        const double r = -(s[0] * s[0] + s[1] * s[1]) - 0.05 * (act[0] * act[0] + act[1] * act[1]);
        return std::make_pair(next, r);
    };
    env.expert = [=](const VecF& s) {
        // cancel the predicted drift: a = clamp(-(rho R s) / gain)
        const VecF drift = {rho * (c * s[0] - sn * s[1]), rho * (sn * s[0] + c * s[1])};
        return VecF{std::max(-1.0, std::min(1.0, -drift[0] / gain)),
                    std::max(-1.0, std::min(1.0, -drift[1] / gain))};
    };
    return env;
}

/// The stochastic two-state chain embedded in a 1D continuous interface:
/// states are {0.0, 1.0}, actions in [-1,1] with a > 0 meaning "flip".
/// Used by the belief-architecture benchmark, where multi-step prediction
/// error under genuinely stochastic dynamics is the quantity of interest.
inline ContinuousEnv make_chain_embed(double p_flip = 0.8, int episode_len = 64) {
    ContinuousEnv env;
    env.id = "chain1d";
    env.state_dim = 1;
    env.action_dim = 1;
    env.episode_len = episode_len;
    env.sigma_env = 1.0;  // intrinsically stochastic
    env.reset = [](Rng& rng) { return VecF{rng.uniform01() < 0.5 ? 0.0 : 1.0}; };
    env.step = [p_flip](const VecF& s, const VecF& a, Rng& rng) {
        const bool flip_attempt = a[0] > 0.0;
        double sn = s[0];
        if (flip_attempt && rng.uniform01() < p_flip) sn = 1.0 - sn;
        const double r = sn;  // reward for being in state 1 next
        return std::make_pair(VecF{sn}, r);
    };
    env.expert = [](const VecF& s) { return VecF{s[0] < 0.5 ? 1.0 : -1.0}; };
    return env;
}

inline ContinuousEnv make_env(const std::string& id, double sigma_env = 0.02) {
    if (id == "pointmass1d") return make_pointmass1d(sigma_env);
    if (id == "linear2d") return make_linear2d(sigma_env);
    if (id == "chain1d") return make_chain_embed();
    throw std::invalid_argument("make_env: unknown env id '" + id + "'");
}

/// Tabular MDP exposed as a rollout environment (episodic view of the chain
/// and random MDPs).
struct TabularEnvView {
    const TabularMdp* mdp = nullptr;
    int episode_len = 50;

    int reset(Rng& rng) const { return rng.categorical(mdp->rho0); }
    std::pair<int, double> step(int s, int a, Rng& rng) const {
        const double r = mdp->reward[static_cast<size_t>(s)][static_cast<size_t>(a)];
        return {rng.categorical(mdp->transition[static_cast<size_t>(s)][static_cast<size_t>(a)]), r};
    }
};

}  // namespace dtcorl
