#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "dtcorl/tabular.hpp"
#include "dtcorl/wasserstein.hpp"

namespace dtcorl {

/// Exhaustively estimated smoothness constants of a finite MDP, its policy and
/// its q table. Each value is the maximum ratio over all pairs with a nonzero
/// denominator, so the defining inequalities hold for every enumerated pair by
/// construction.
struct LipschitzEstimates {
    double L_P = 0.0;
    double L_R = 0.0;
    double L_pi = 0.0;
    double L_Q = 0.0;
    bool contraction_ok = false;
};

inline LipschitzEstimates estimate_lipschitz_constants(const TabularMdp& mdp,
                                                       const TabularPolicy& policy,
                                                       const ValueTables& values) {
    if (mdp.n_states > 64 || mdp.n_actions > 64)
        throw std::invalid_argument(
            "estimate_lipschitz_constants: exhaustive enumeration needs states/actions <= 64");
    if (!mdp.has_metrics())
        throw std::invalid_argument("estimate_lipschitz_constants: MDP carries no metrics");

    const int S = mdp.n_states, A = mdp.n_actions;
    const Mat& dS = mdp.state_metric;
    const Mat& dA = mdp.action_metric;
    LipschitzEstimates est;

    // Kernel, reward and q constants over all (s,a) pairs.
    for (int s1 = 0; s1 < S; ++s1)
        for (int a1 = 0; a1 < A; ++a1)
            for (int s2 = 0; s2 < S; ++s2)
                for (int a2 = 0; a2 < A; ++a2) {
                    const double denom = dS[s1][s2] + dA[a1][a2];
                    if (denom <= 0.0) continue;  // degenerate pair, skipped
                    const double w = wasserstein1_discrete(mdp.transition[s1][a1],
                                                           mdp.transition[s2][a2], dS);
                    est.L_P = std::max(est.L_P, w / denom);
                    est.L_R = std::max(
                        est.L_R, std::abs(mdp.reward[s1][a1] - mdp.reward[s2][a2]) / denom);
                    est.L_Q = std::max(
                        est.L_Q, std::abs(values.q[s1][a1] - values.q[s2][a2]) / denom);
                }

    // Policy constant over state pairs.
    for (int s1 = 0; s1 < S; ++s1)
        for (int s2 = 0; s2 < S; ++s2) {
            if (dS[s1][s2] <= 0.0) continue;
            const double w = wasserstein1_discrete(policy.probs[s1], policy.probs[s2], dA);
            est.L_pi = std::max(est.L_pi, w / dS[s1][s2]);
        }

    est.contraction_ok = mdp.gamma * est.L_P * (1.0 + est.L_pi) < 1.0;
    return est;
}

}  // namespace dtcorl
