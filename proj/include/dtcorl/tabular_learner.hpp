#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "dtcorl/delayed.hpp"
#include "dtcorl/tabular.hpp"
#include "dtcorl/wasserstein.hpp"

namespace dtcorl {

struct TabularLearnerConfig {
    double lambda1 = 0.1;  // critic-side W1 penalty weight
    double lambda2 = 0.1;  // actor-side W1 penalty weight
    double tol = 1e-10;
    int grid_resolution = 64;
};

/// Everything belief-based policy iteration needs about a dataset over
/// augmented states: the distinct x's with their data frequencies, exact
/// beliefs, the conditional behavior rows mu_Delta(.|x), and the (x, a, x')
/// sample set with weights.
struct BeliefPiContext {
    const TabularMdp* mdp = nullptr;
    int delay = 0;
    std::vector<TabAugState> xs;
    std::vector<double> x_weight;  // source frequency of each x (sums to 1)
    std::vector<Vec> beliefs;      // exact belief per x
    std::vector<Vec> mu_rows;      // mu_Delta(.|x) per x

    struct Sample {
        int x;
        int a;
        int x_next;
        double w;
    };
    std::vector<Sample> samples;  // weights sum to 1
};

/// Full enumeration of S x A^Delta with exact transition weights; the data
/// distribution is uniform over (x, a). `mu` may be state-independent (one
/// row) or per-x (aligned with the enumeration order).
inline BeliefPiContext make_enumerated_context(
    const TabularMdp& mdp, int delay,
    const std::function<Vec(const TabAugState&, const Vec& belief)>& mu_provider) {
    const int64_t X = augmented_state_count(mdp, delay);
    if (X < 0) throw std::invalid_argument("make_enumerated_context: enumeration budget exceeded");
    BeliefPiContext ctx;
    ctx.mdp = &mdp;
    ctx.delay = delay;
    ctx.xs.reserve(static_cast<size_t>(X));
    for (int64_t xi = 0; xi < X; ++xi) {
        TabAugState x = augmented_from_index(xi, mdp.n_actions, delay);
        ctx.beliefs.push_back(exact_belief(mdp, x).probs);
        ctx.mu_rows.push_back(mu_provider(x, ctx.beliefs.back()));
        ctx.xs.push_back(std::move(x));
        ctx.x_weight.push_back(1.0 / static_cast<double>(X));
    }
    const double base_w = 1.0 / (static_cast<double>(X) * mdp.n_actions);
    for (int64_t xi = 0; xi < X; ++xi)
        for (int a = 0; a < mdp.n_actions; ++a)
            for (const auto& [xn, p] : delayed_transition(mdp, ctx.xs[static_cast<size_t>(xi)], a))
                ctx.samples.push_back({static_cast<int>(xi), a,
                                       static_cast<int>(augmented_index(xn, mdp.n_actions)),
                                       base_w * p});
    return ctx;
}

inline BeliefPiContext make_enumerated_context(const TabularMdp& mdp, int delay, const Vec& mu) {
    return make_enumerated_context(mdp, delay, [&mu](const TabAugState&, const Vec&) { return mu; });
}

/// Empirical context from logged augmented tuples. mu_Delta is estimated by
/// conditional action frequencies with additive smoothing.
inline BeliefPiContext make_empirical_context(const TabularMdp& mdp, int delay,
                                              const std::vector<TabAugTuple>& tuples,
                                              double smoothing = 1e-6) {
    BeliefPiContext ctx;
    ctx.mdp = &mdp;
    ctx.delay = delay;
    std::map<int64_t, int> index_of;
    auto intern = [&](const TabAugState& x) {
        const int64_t key = augmented_index(x, mdp.n_actions);
        auto it = index_of.find(key);
        if (it != index_of.end()) return it->second;
        const int id = static_cast<int>(ctx.xs.size());
        index_of.emplace(key, id);
        ctx.xs.push_back(x);
        ctx.beliefs.push_back(exact_belief(mdp, x).probs);
        ctx.x_weight.push_back(0.0);
        return id;
    };
    std::vector<Vec> counts;
    int n_learner = 0;
    for (const auto& t : tuples) {
        if (t.belief_only) continue;
        ++n_learner;
        const int xi = intern(t.x);
        const int xn = intern(t.x_next);
        if (static_cast<size_t>(xi) >= counts.size()) counts.resize(ctx.xs.size());
        if (static_cast<size_t>(xn) >= counts.size()) counts.resize(ctx.xs.size());
        if (counts[static_cast<size_t>(xi)].empty())
            counts[static_cast<size_t>(xi)].assign(static_cast<size_t>(mdp.n_actions), 0.0);
        counts[static_cast<size_t>(xi)][static_cast<size_t>(t.a)] += 1.0;
        ctx.samples.push_back({xi, t.a, xn, 1.0});
    }
    if (n_learner == 0) throw std::invalid_argument("make_empirical_context: no learner tuples");
    counts.resize(ctx.xs.size());
    ctx.mu_rows.resize(ctx.xs.size());
    for (auto& s : ctx.samples) s.w /= n_learner;
    for (size_t i = 0; i < ctx.xs.size(); ++i) {
        double total = 0.0;
        Vec row(static_cast<size_t>(mdp.n_actions), 0.0);
        if (!counts[i].empty())
            for (int a = 0; a < mdp.n_actions; ++a) total += counts[i][static_cast<size_t>(a)];
        ctx.x_weight[i] = total / n_learner;
        double norm = total + smoothing * mdp.n_actions;
        for (int a = 0; a < mdp.n_actions; ++a)
            row[static_cast<size_t>(a)] =
                ((counts[i].empty() ? 0.0 : counts[i][static_cast<size_t>(a)]) + smoothing) / norm;
        ctx.mu_rows[i] = row;
    }
    return ctx;
}

struct BpeResult {
    std::vector<Vec> q;  // S x A; entries outside the belief support are zero
    std::vector<std::pair<int, int>> uncovered;  // (state, action) pairs without support
    int iterations = 0;
    double residual = 0.0;
};

namespace detail {

/// Gaussian elimination with partial pivoting; throws on singular systems.
inline Vec solve_linear_system(Mat m, Vec rhs, const char* who) {
    const int n = static_cast<int>(rhs.size());
    for (int col = 0; col < n; ++col) {
        int pivot = col;
        for (int r = col + 1; r < n; ++r)
            if (std::abs(m[static_cast<size_t>(r)][static_cast<size_t>(col)]) >
                std::abs(m[static_cast<size_t>(pivot)][static_cast<size_t>(col)]))
                pivot = r;
        if (std::abs(m[static_cast<size_t>(pivot)][static_cast<size_t>(col)]) < 1e-13)
            throw std::runtime_error(std::string(who) + ": singular normal equations (rank-deficient belief support)");
        std::swap(m[static_cast<size_t>(col)], m[static_cast<size_t>(pivot)]);
        std::swap(rhs[static_cast<size_t>(col)], rhs[static_cast<size_t>(pivot)]);
        const double d = m[static_cast<size_t>(col)][static_cast<size_t>(col)];
        for (int r = col + 1; r < n; ++r) {
            const double f = m[static_cast<size_t>(r)][static_cast<size_t>(col)] / d;
            if (f == 0.0) continue;
            for (int c = col; c < n; ++c)
                m[static_cast<size_t>(r)][static_cast<size_t>(c)] -= f * m[static_cast<size_t>(col)][static_cast<size_t>(c)];
            rhs[static_cast<size_t>(r)] -= f * rhs[static_cast<size_t>(col)];
        }
    }
    Vec x(static_cast<size_t>(n), 0.0);
    for (int r = n - 1; r >= 0; --r) {
        double acc = rhs[static_cast<size_t>(r)];
        for (int c = r + 1; c < n; ++c) acc -= m[static_cast<size_t>(r)][static_cast<size_t>(c)] * x[static_cast<size_t>(c)];
        x[static_cast<size_t>(r)] = acc / m[static_cast<size_t>(r)][static_cast<size_t>(r)];
    }
    return x;
}

}  // namespace detail

/// Belief-weighted policy evaluation: finds the q table over the ORIGINAL
/// state space whose belief expectations satisfy the penalized Bellman
/// equation over the sample set, in (weighted) least squares. The W1 penalty
/// compares the policy at each belief atom with the behavior row of the
/// conditioning augmented state.
inline BpeResult tabular_bpe(const BeliefPiContext& ctx, const TabularPolicy& policy,
                             const TabularLearnerConfig& cfg) {
    const TabularMdp& mdp = *ctx.mdp;
    const int S = mdp.n_states, A = mdp.n_actions;
    const double gamma = mdp.gamma;
    if (ctx.samples.empty()) throw std::invalid_argument("tabular_bpe: no samples");

    // Per-sample constants.
    const size_t N = ctx.samples.size();
    Vec exp_reward(N, 0.0), penalty(N, 0.0);
    for (size_t i = 0; i < N; ++i) {
        const auto& smp = ctx.samples[i];
        const Vec& b = ctx.beliefs[static_cast<size_t>(smp.x)];
        double er = 0.0;
        for (int s = 0; s < S; ++s) er += b[static_cast<size_t>(s)] * mdp.reward[static_cast<size_t>(s)][static_cast<size_t>(smp.a)];
        exp_reward[i] = er;
        if (cfg.lambda1 > 0.0) {
            const Vec& mu = ctx.mu_rows[static_cast<size_t>(smp.x)];
            double pen = 0.0;
            for (int s = 0; s < S; ++s) {
                const double mass = b[static_cast<size_t>(s)];
                if (mass <= 0.0) continue;
                pen += mass * wasserstein1_discrete(policy.probs[static_cast<size_t>(s)], mu, mdp.action_metric);
            }
            penalty[i] = pen;
        }
    }

    // Coverage per action and the (constant) normal-equation matrices.
    std::vector<std::vector<int>> covered(static_cast<size_t>(A));
    std::vector<std::vector<int>> col_of(static_cast<size_t>(A), std::vector<int>(static_cast<size_t>(S), -1));
    BpeResult out;
    out.q.assign(static_cast<size_t>(S), Vec(static_cast<size_t>(A), 0.0));
    for (int a = 0; a < A; ++a) {
        Vec mass(static_cast<size_t>(S), 0.0);
        for (const auto& smp : ctx.samples) {
            if (smp.a != a) continue;
            const Vec& b = ctx.beliefs[static_cast<size_t>(smp.x)];
            for (int s = 0; s < S; ++s) mass[static_cast<size_t>(s)] += smp.w * b[static_cast<size_t>(s)];
        }
        for (int s = 0; s < S; ++s) {
            if (mass[static_cast<size_t>(s)] > 1e-12) {
                col_of[static_cast<size_t>(a)][static_cast<size_t>(s)] = static_cast<int>(covered[static_cast<size_t>(a)].size());
                covered[static_cast<size_t>(a)].push_back(s);
            } else {
                out.uncovered.push_back({s, a});
            }
        }
        if (covered[static_cast<size_t>(a)].empty())
            throw std::runtime_error("tabular_bpe: action " + std::to_string(a) +
                                     " has no belief support in the data");
    }

    // Fixed-point iteration: each round solves the least-squares projection
    // with targets built from the previous q.
    const int cap = 2 * evaluation_iteration_cap(gamma, cfg.tol) + 16;
    std::vector<Vec> q = out.q;
    for (int it = 0; it < cap; ++it) {
        // V_pi over original states with the current q.
        Vec v(static_cast<size_t>(S), 0.0);
        for (int s = 0; s < S; ++s) {
            double acc = 0.0;
            for (int a = 0; a < A; ++a) acc += policy.probs[static_cast<size_t>(s)][static_cast<size_t>(a)] * q[static_cast<size_t>(s)][static_cast<size_t>(a)];
            v[static_cast<size_t>(s)] = acc;
        }
        std::vector<Vec> qn(static_cast<size_t>(S), Vec(static_cast<size_t>(A), 0.0));
        for (int a = 0; a < A; ++a) {
            const auto& cov = covered[static_cast<size_t>(a)];
            const int n = static_cast<int>(cov.size());
            Mat M(static_cast<size_t>(n), Vec(static_cast<size_t>(n), 0.0));
            Vec rhs(static_cast<size_t>(n), 0.0);
            for (const auto& smp : ctx.samples) {
                if (smp.a != a) continue;
                const Vec& b = ctx.beliefs[static_cast<size_t>(smp.x)];
                const Vec& bn = ctx.beliefs[static_cast<size_t>(smp.x_next)];
                double next_v = 0.0;
                for (int s = 0; s < S; ++s) next_v += bn[static_cast<size_t>(s)] * v[static_cast<size_t>(s)];
                const size_t idx = static_cast<size_t>(&smp - ctx.samples.data());
                const double target = exp_reward[idx] + gamma * next_v - cfg.lambda1 * penalty[idx];
                for (int r = 0; r < n; ++r) {
                    const double br = b[static_cast<size_t>(cov[static_cast<size_t>(r)])];
                    if (br == 0.0) continue;
                    rhs[static_cast<size_t>(r)] += smp.w * br * target;
                    for (int c = 0; c < n; ++c)
                        M[static_cast<size_t>(r)][static_cast<size_t>(c)] += smp.w * br * b[static_cast<size_t>(cov[static_cast<size_t>(c)])];
                }
            }
            Vec z = detail::solve_linear_system(std::move(M), std::move(rhs), "tabular_bpe");
            for (int r = 0; r < n; ++r) qn[static_cast<size_t>(cov[static_cast<size_t>(r)])][static_cast<size_t>(a)] = z[static_cast<size_t>(r)];
        }
        double delta = 0.0;
        for (int s = 0; s < S; ++s)
            for (int a = 0; a < A; ++a) delta = std::max(delta, std::abs(qn[static_cast<size_t>(s)][static_cast<size_t>(a)] - q[static_cast<size_t>(s)][static_cast<size_t>(a)]));
        q = std::move(qn);
        out.iterations = it + 1;
        out.residual = delta;
        if (delta * gamma / (1.0 - gamma) <= cfg.tol) {
            out.q = q;
            return out;
        }
    }
    throw std::runtime_error("tabular_bpe: no convergence within iteration cap");
}

namespace detail {

inline void enumerate_simplex_grid(int dims, int resolution,
                                   const std::function<void(const Vec&)>& visit) {
    Vec point(static_cast<size_t>(dims), 0.0);
    std::function<void(int, int)> rec = [&](int dim, int remaining) {
        if (dim == dims - 1) {
            point[static_cast<size_t>(dim)] = static_cast<double>(remaining) / resolution;
            visit(point);
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            point[static_cast<size_t>(dim)] = static_cast<double>(k) / resolution;
            rec(dim + 1, remaining - k);
        }
    };
    rec(0, resolution);
}

// true when a is preferred over b for tie-breaking: more mass on lower ids
inline bool prefers_lower_actions(const Vec& a, const Vec& b) {
    for (size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i] + 1e-15) return true;
        if (a[i] < b[i] - 1e-15) return false;
    }
    return false;
}

}  // namespace detail

/// Penalized policy improvement over the belief support: for every state with
/// positive support mass, maximizes E_{a~rho}[q(s,a)] minus the weighted W1
/// distance to the conditioning behavior rows, by exhaustive search over the
/// simplex grid (plus the behavior rows and the previous policy row, so the
/// old policy is always dominated). Ties break toward lower action ids.
inline TabularPolicy tabular_bpi(const BeliefPiContext& ctx, const std::vector<Vec>& q,
                                 const TabularLearnerConfig& cfg,
                                 const TabularPolicy* policy_old = nullptr) {
    const TabularMdp& mdp = *ctx.mdp;
    const int S = mdp.n_states, A = mdp.n_actions;

    // anchor weights per state: omega_x(s) ~ x_weight[x] * b_x(s)
    std::vector<std::vector<std::pair<int, double>>> anchors(static_cast<size_t>(S));
    Vec support(static_cast<size_t>(S), 0.0);
    for (size_t xi = 0; xi < ctx.xs.size(); ++xi) {
        if (ctx.x_weight[xi] <= 0.0) continue;
        for (int s = 0; s < S; ++s) {
            const double w = ctx.x_weight[xi] * ctx.beliefs[xi][static_cast<size_t>(s)];
            if (w > 1e-14) {
                anchors[static_cast<size_t>(s)].push_back({static_cast<int>(xi), w});
                support[static_cast<size_t>(s)] += w;
            }
        }
    }
    if (std::all_of(support.begin(), support.end(), [](double v) { return v <= 0.0; }))
        throw std::runtime_error("tabular_bpi: empty belief support");

    TabularPolicy out;
    out.probs.assign(static_cast<size_t>(S), Vec(static_cast<size_t>(A), 1.0 / A));
    for (int s = 0; s < S; ++s) {
        if (support[static_cast<size_t>(s)] <= 0.0) {
            if (policy_old) out.probs[static_cast<size_t>(s)] = policy_old->probs[static_cast<size_t>(s)];
            continue;
        }
        // normalized anchors
        std::vector<std::pair<int, double>> om = anchors[static_cast<size_t>(s)];
        for (auto& [xi, w] : om) w /= support[static_cast<size_t>(s)];

        auto objective = [&](const Vec& rho) {
            double val = 0.0;
            for (int a = 0; a < A; ++a) val += rho[static_cast<size_t>(a)] * q[static_cast<size_t>(s)][static_cast<size_t>(a)];
            if (cfg.lambda2 > 0.0)
                for (const auto& [xi, w] : om)
                    val -= cfg.lambda2 * w *
                           wasserstein1_discrete(rho, ctx.mu_rows[static_cast<size_t>(xi)], mdp.action_metric);
            return val;
        };

        Vec best_rho;
        double best_val = -1e300;
        auto consider = [&](const Vec& rho) {
            const double val = objective(rho);
            if (val > best_val + 1e-12 ||
                (val > best_val - 1e-12 && (best_rho.empty() || detail::prefers_lower_actions(rho, best_rho)))) {
                if (val > best_val) best_val = val;
                best_rho = rho;
            }
        };
        detail::enumerate_simplex_grid(A, cfg.grid_resolution, consider);
        for (const auto& [xi, w] : om) consider(ctx.mu_rows[static_cast<size_t>(xi)]);
        if (policy_old) consider(policy_old->probs[static_cast<size_t>(s)]);
        out.probs[static_cast<size_t>(s)] = best_rho;
    }
    return out;
}

struct MonotoneReport {
    struct Violation {
        int iteration;
        int state;
        double gap;
    };
    std::vector<Vec> value_trace;  // per iteration, per state: E_{a~pi}[q(s,a)]
    std::vector<int> supported_states;
    std::vector<Violation> violations;
    bool ok() const { return violations.empty(); }
};

/// Alternates penalized evaluation and improvement and asserts the monotone
/// expected-value property at every supported state. The behavior policy used
/// in the penalties is a state-independent mixture (exactly representable
/// through the belief, which keeps the evaluation consistent rather than a
/// least-squares compromise).
inline MonotoneReport check_monotone_improvement(const TabularMdp& mdp, int delay,
                                                 const TabularLearnerConfig& cfg, int n_iters,
                                                 const Vec& mu_mixture) {
    BeliefPiContext ctx = make_enumerated_context(mdp, delay, mu_mixture);
    const int S = mdp.n_states, A = mdp.n_actions;

    MonotoneReport report;
    Vec support(static_cast<size_t>(S), 0.0);
    for (size_t xi = 0; xi < ctx.xs.size(); ++xi)
        for (int s = 0; s < S; ++s) support[static_cast<size_t>(s)] += ctx.x_weight[xi] * ctx.beliefs[xi][static_cast<size_t>(s)];
    for (int s = 0; s < S; ++s)
        if (support[static_cast<size_t>(s)] > 1e-12) report.supported_states.push_back(s);

    TabularPolicy policy;
    policy.probs.assign(static_cast<size_t>(S), mu_mixture);
    for (int it = 0; it < n_iters; ++it) {
        BpeResult bpe = tabular_bpe(ctx, policy, cfg);
        Vec values(static_cast<size_t>(S), 0.0);
        for (int s : report.supported_states) {
            double acc = 0.0;
            for (int a = 0; a < A; ++a) acc += policy.probs[static_cast<size_t>(s)][static_cast<size_t>(a)] * bpe.q[static_cast<size_t>(s)][static_cast<size_t>(a)];
            values[static_cast<size_t>(s)] = acc;
        }
        if (!report.value_trace.empty()) {
            const Vec& prev = report.value_trace.back();
            for (int s : report.supported_states)
                if (values[static_cast<size_t>(s)] < prev[static_cast<size_t>(s)] - 1e-8)
                    report.violations.push_back({it, s, prev[static_cast<size_t>(s)] - values[static_cast<size_t>(s)]});
        }
        report.value_trace.push_back(values);
        policy = tabular_bpi(ctx, bpe.q, cfg, &policy);
    }
    return report;
}

}  // namespace dtcorl
