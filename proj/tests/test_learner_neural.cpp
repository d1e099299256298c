#include <doctest.h>

#include "dtcorl/neural_learner.hpp"

using namespace dtcorl;

namespace {

LearnerData toy_data(const ContinuousEnv& env, int delay, int n_traj, uint64_t seed) {
    auto trajs = generate_behavior_dataset(env, BehaviorKind::Medium, n_traj, seed);
    LearnerData out;
    for (const auto& tr : trajs) {
        auto tuples = augment_trajectory(tr, delay);
        for (size_t i = 0; i < tuples.size(); ++i) {
            if (tuples[i].belief_only) continue;
            if (i + 1 < tuples.size()) {
                out.next_actions.push_back(tuples[i + 1].a);
                out.has_next_action.push_back(1);
            } else {
                out.next_actions.push_back(VecF());
                out.has_next_action.push_back(0);
            }
            out.tuples.push_back(tuples[i]);
        }
    }
    return out;
}

std::vector<double> flatten_params(std::vector<Parameter*> params) {
    std::vector<double> out;
    for (Parameter* p : params) out.insert(out.end(), p->value.v.begin(), p->value.v.end());
    return out;
}

}  // namespace

TEST_SUITE("learner_neural") {

TEST_CASE("critic target reduces to the reward when gamma is zero") {
    ContinuousEnv env = make_pointmass1d(0.0);
    Rng rng(1);
    NeuralActor actor(1, 1, {16}, rng);
    NeuralCritic critic(1, 1, {16}, rng);
    LearnerConfig cfg;
    cfg.gamma = 1e-12;  // gamma must be in (0,1); effectively zero
    cfg.batch_size = 16;
    LearnerData data = toy_data(env, 2, 4, 2);
    BeliefEstimator exact = make_exact_estimator(env);
    Rng mle(3), noise(4);
    LearnerBatch batch = make_learner_batch(data, sample_indices(16, static_cast<int>(data.tuples.size()), mle), exact, 1, mle);
    // reproduce the td loss by hand: with gamma ~ 0, target = r
    Tensor in(16, 2);
    for (int r = 0; r < 16; ++r) {
        in.at(r, 0) = batch.s_hat.at(r, 0);
        in.at(r, 1) = batch.actions.at(r, 0);
    }
    Tensor q1 = critic.q1.apply(in), q2 = critic.q2.apply(in);
    double expect = 0.0;
    for (int r = 0; r < 16; ++r) {
        const double d1 = q1.at(r, 0) - batch.rewards[static_cast<size_t>(r)];
        const double d2 = q2.at(r, 0) - batch.rewards[static_cast<size_t>(r)];
        expect += d1 * d1 + d2 * d2;
    }
    expect /= 16.0;
    AdamOptimizer opt;
    opt.lr = 0.0;
    const double loss = critic_update(critic, actor, batch, cfg, opt, noise);
    CHECK(loss == doctest::Approx(expect).epsilon(1e-9));
}

TEST_CASE("perfect belief on a deterministic env matches the delay-free target computation") {
    // run the same batch through (a) the delayed pipeline with the exact
    // belief and (b) a hand-built delay-free TD3-style target on true states
    ContinuousEnv env = make_pointmass1d(0.0);
    Rng rng(5);
    NeuralActor actor(1, 1, {16, 16}, rng);
    NeuralCritic critic(1, 1, {16, 16}, rng);
    LearnerConfig cfg;
    cfg.gamma = 0.95;
    const int delay = 3;
    LearnerData data = toy_data(env, delay, 6, 6);
    BeliefEstimator exact = make_exact_estimator(env);
    Rng mle(7);
    std::vector<int> idx = sample_indices(32, static_cast<int>(data.tuples.size()), mle);
    LearnerBatch batch = make_learner_batch(data, idx, exact, 1, mle);
    // exact belief on a deterministic env must reproduce the true states
    for (int r = 0; r < 32; ++r) {
        const ContAugTuple& t = data.tuples[static_cast<size_t>(idx[static_cast<size_t>(r)])];
        CHECK(std::abs(batch.s_hat.at(r, 0) - t.true_state[0]) < 1e-9);
        CHECK(std::abs(batch.s_hat_next.at(r, 0) - t.true_next_state[0]) < 1e-9);
    }
    // identical noise stream -> identical targets -> identical first critic loss
    NeuralCritic critic_b = critic;
    LearnerBatch direct;
    direct.s_hat = Tensor(32, 1);
    direct.s_hat_next = Tensor(32, 1);
    direct.actions = batch.actions;
    direct.rewards = batch.rewards;
    direct.next_actions = batch.next_actions;
    direct.has_next_action = batch.has_next_action;
    for (int r = 0; r < 32; ++r) {
        const ContAugTuple& t = data.tuples[static_cast<size_t>(idx[static_cast<size_t>(r)])];
        direct.s_hat.at(r, 0) = t.true_state[0];
        direct.s_hat_next.at(r, 0) = t.true_next_state[0];
    }
    AdamOptimizer opt_a, opt_b;
    opt_a.lr = opt_b.lr = 1e-3;
    Rng noise_a(11), noise_b(11);
    const double la = critic_update(critic, actor, batch, cfg, opt_a, noise_a);
    const double lb = critic_update(critic_b, actor, direct, cfg, opt_b, noise_b);
    CHECK(std::abs(la - lb) < 1e-9);
    // and the updated parameters agree bitwise
    CHECK(flatten_params(critic.q1.params()) == flatten_params(critic_b.q1.params()));
}

TEST_CASE("critic update is deterministic under a fixed seed") {
    ContinuousEnv env = make_pointmass1d(0.0);
    auto run = [&](uint64_t seed) {
        Rng rng(seed);
        NeuralActor actor(1, 1, {16}, rng);
        NeuralCritic critic(1, 1, {16}, rng);
        LearnerConfig cfg;
        LearnerData data = toy_data(env, 2, 4, seed);
        BeliefEstimator exact = make_exact_estimator(env);
        Rng mle(seed + 1), noise(seed + 2);
        AdamOptimizer opt;
        opt.lr = 1e-3;
        for (int step = 0; step < 3; ++step) {
            LearnerBatch b = make_learner_batch(
                data, sample_indices(16, static_cast<int>(data.tuples.size()), mle), exact, 1, mle);
            critic_update(critic, actor, b, cfg, opt, noise);
        }
        return flatten_params(critic.q1.params());
    };
    CHECK(run(42) == run(42));
}

TEST_CASE("target networks remain a tau-trailing convex combination") {
    ContinuousEnv env = make_pointmass1d(0.0);
    Rng rng(9);
    NeuralActor actor(1, 1, {12}, rng);
    NeuralCritic critic(1, 1, {12}, rng);
    LearnerConfig cfg;
    LearnerData data = toy_data(env, 2, 4, 10);
    BeliefEstimator exact = make_exact_estimator(env);
    Rng mle(11), noise(12);
    AdamOptimizer opt;
    opt.lr = 1e-3;
    for (int step = 0; step < 5; ++step) {
        // record live/target before the update
        auto live_before = flatten_params(critic.q1.params());
        auto tgt_before = flatten_params(critic.q1_target.params());
        LearnerBatch b = make_learner_batch(
            data, sample_indices(16, static_cast<int>(data.tuples.size()), mle), exact, 1, mle);
        critic_update(critic, actor, b, cfg, opt, noise);
        auto live_after = flatten_params(critic.q1.params());
        auto tgt_after = flatten_params(critic.q1_target.params());
        for (size_t i = 0; i < tgt_after.size(); ++i)
            CHECK(tgt_after[i] ==
                  doctest::Approx(cfg.tau_soft * live_after[i] + (1.0 - cfg.tau_soft) * tgt_before[i])
                      .epsilon(1e-12));
        (void)live_before;
    }
}

TEST_CASE("actor update: large alpha approaches pure behavior cloning") {
    ContinuousEnv env = make_pointmass1d(0.0);
    Rng rng(13);
    NeuralActor actor(1, 1, {16}, rng);
    NeuralCritic critic(1, 1, {16}, rng);
    LearnerData data = toy_data(env, 2, 4, 14);
    BeliefEstimator exact = make_exact_estimator(env);
    Rng mle(15);
    LearnerBatch batch = make_learner_batch(
        data, sample_indices(32, static_cast<int>(data.tuples.size()), mle), exact, 1, mle);

    // gradient of the actor loss at a given alpha
    auto actor_grad = [&](double alpha) {
        LearnerConfig cfg;
        cfg.alpha = alpha;
        Tape t;
        Tape::Var s = t.input(batch.s_hat);
        Tape::Var a_pi = actor.net.forward(t, s);
        Tape::Var q = critic.q1.forward(t, t.concat_cols(s, a_pi));
        std::vector<char> valid(32, 1);
        Tape::Var bc = t.mse_rows(a_pi, batch.actions, valid);
        Tape::Var loss = t.add(t.scale(t.mean_all(q), -1.0), t.scale(bc, cfg.alpha));
        auto params = actor.net.params();
        auto cp = critic.q1.params();
        std::vector<Parameter*> all = params;
        all.insert(all.end(), cp.begin(), cp.end());
        zero_grads(all);
        t.backward(loss);
        std::vector<double> g;
        for (Parameter* p : params) g.insert(g.end(), p->grad.v.begin(), p->grad.v.end());
        // normalize by alpha so the BC term has unit scale
        for (auto& v : g) v /= alpha;
        return g;
    };
    // pure BC gradient
    auto bc_grad = [&]() {
        Tape t;
        Tape::Var a_pi = actor.net.forward(t, t.input(batch.s_hat));
        std::vector<char> valid(32, 1);
        Tape::Var loss = t.mse_rows(a_pi, batch.actions, valid);
        auto params = actor.net.params();
        zero_grads(params);
        t.backward(loss);
        std::vector<double> g;
        for (Parameter* p : params) g.insert(g.end(), p->grad.v.begin(), p->grad.v.end());
        return g;
    };
    auto cosine = [](const std::vector<double>& a, const std::vector<double>& b) {
        double dot = 0, na = 0, nb = 0;
        for (size_t i = 0; i < a.size(); ++i) {
            dot += a[i] * b[i];
            na += a[i] * a[i];
            nb += b[i] * b[i];
        }
        return dot / std::sqrt(na * nb);
    };
    auto g_bc = bc_grad();
    const double cos6 = cosine(actor_grad(1e6), g_bc);
    const double cos8 = cosine(actor_grad(1e8), g_bc);
    CHECK(cos8 >= cos6 - 1e-12);
    CHECK(cos8 > 0.999999);

    // alpha = 0: pure policy gradient through the critic; the BC-term
    // contribution vanishes, so the update direction must not depend on the
    // dataset actions
    LearnerConfig cfg0;
    cfg0.alpha = 0.0;
    AdamOptimizer opt;
    opt.lr = 1e-3;
    NeuralActor a1 = actor, a2 = actor;
    LearnerBatch shuffled = batch;
    for (int r = 0; r < 32; ++r) shuffled.actions.at(r, 0) = -batch.actions.at(r, 0);
    AdamOptimizer o1 = opt, o2 = opt;
    actor_update(a1, critic, batch, cfg0, o1);
    actor_update(a2, critic, shuffled, cfg0, o2);
    CHECK(flatten_params(a1.net.params()) == flatten_params(a2.net.params()));
}

TEST_CASE("frozen constant critic reduces the actor update to behavior cloning") {
    ContinuousEnv env = make_pointmass1d(0.0);
    Rng rng(17);
    NeuralActor actor(1, 1, {16}, rng);
    NeuralCritic critic(1, 1, {16}, rng);
    // zero the critic weights: Q == bias constant, zero gradient through a_pi
    for (Parameter* p : critic.q1.params()) std::fill(p->value.v.begin(), p->value.v.end(), 0.0);
    critic.q1.layers.back().b.value.at(0, 0) = 3.33;
    LearnerData data = toy_data(env, 2, 4, 18);
    BeliefEstimator exact = make_exact_estimator(env);
    Rng mle(19);
    LearnerBatch batch = make_learner_batch(
        data, sample_indices(32, static_cast<int>(data.tuples.size()), mle), exact, 1, mle);
    LearnerConfig cfg;
    cfg.alpha = 1.0;

    NeuralActor bc_actor = actor;
    AdamOptimizer o1, o2;
    o1.lr = o2.lr = 1e-3;
    actor_update(actor, critic, batch, cfg, o1);
    // hand-rolled pure BC step on the copy
    {
        Tape t;
        Tape::Var a_pi = bc_actor.net.forward(t, t.input(batch.s_hat));
        std::vector<char> valid(32, 1);
        Tape::Var loss = t.mse_rows(a_pi, batch.actions, valid);
        auto params = bc_actor.net.params();
        zero_grads(params);
        t.backward(loss);
        o2.step(params);
    }
    auto va = flatten_params(actor.net.params());
    auto vb = flatten_params(bc_actor.net.params());
    for (size_t i = 0; i < va.size(); ++i) CHECK(va[i] == doctest::Approx(vb[i]).epsilon(1e-12));
}

TEST_CASE("augmented bc memorizes a single repeated sample") {
    Rng rng(21);
    Mlp net("bc", 1 + 2 * 1, {16}, 1, Activation::ReLU, true, rng);
    // one hand-made tuple with an interior (non-saturated) action
    std::vector<ContAugTuple> tuples(1);
    tuples[0].x.base = {0.3};
    tuples[0].x.window = {{0.2}, {-0.1}};
    tuples[0].a = {0.37};
    AdamOptimizer opt;
    opt.lr = 3e-3;
    std::vector<int> idx(16, 0);  // one sample repeated
    double loss = 1.0;
    for (int step = 0; step < 3000 && loss > 1e-8; ++step)
        loss = augmented_bc_step(net, tuples, idx, opt);
    CHECK(loss < 1e-8);
}

TEST_CASE("augmented bc with zero delay recovers a linear behavior policy") {
    // dataset from the deterministic policy a = clamp(-0.8 s); delta = 0 makes
    // augmented BC plain behavior cloning on states
    ContinuousEnv env = make_pointmass1d(0.0);
    std::vector<ContTrajectory> trajs;
    Rng gen(23);
    // short trajectories keep the state distribution close to uniform
    for (int k = 0; k < 150; ++k) {
        ContTrajectory tr;
        VecF s = env.reset(gen);
        tr.states.push_back(s);
        for (int t = 0; t < 3; ++t) {
            VecF a = {std::max(-1.0, std::min(1.0, -0.8 * s[0]))};
            auto [sn, r] = env.step(s, a, gen);
            tr.actions.push_back(a);
            tr.rewards.push_back(r);
            tr.states.push_back(sn);
            s = sn;
        }
        trajs.push_back(tr);
    }
    LearnerConfig cfg;
    cfg.batch_size = 64;
    cfg.actor_lr = 3e-3;
    AugmentedBcRun run = train_augmented_bc(trajs, env, 0, 30, 100, cfg, 24);
    Rng heldout(25);
    for (int k = 0; k < 50; ++k) {
        const double s = heldout.uniform(-0.9, 0.9);
        Tensor in(1, 1);
        in.at(0, 0) = s;
        const double pred = run.net.apply(in).at(0, 0);
        CHECK(std::abs(pred - std::max(-1.0, std::min(1.0, -0.8 * s))) < 1e-2);
    }
}

TEST_CASE("train_dtcorl rejects an empty dataset") {
    ContinuousEnv env = make_pointmass1d(0.0);
    DtcorlTrainConfig cfg;
    CHECK_THROWS_WITH_AS(train_dtcorl({}, env, cfg), "train_dtcorl: empty dataset",
                         std::invalid_argument);
}

TEST_CASE("train_dtcorl smoke run produces finite metrics and is reproducible") {
    ContinuousEnv env = make_pointmass1d(0.02);
    auto trajs = generate_behavior_dataset(env, BehaviorKind::Medium, 10, 31);
    DtcorlTrainConfig cfg;
    cfg.delay = 2;
    cfg.joint = true;
    cfg.epochs = 2;
    cfg.steps_per_epoch = 10;
    cfg.belief_batch = 32;
    cfg.learner.batch_size = 32;
    cfg.learner.hidden = {16, 16};
    cfg.belief.d_model = 16;
    cfg.belief.n_layers = 1;
    cfg.belief.n_heads = 2;
    cfg.belief.ff_dim = 32;
    cfg.belief.max_delay = 2;
    cfg.eval_episodes = 2;
    cfg.seed = 77;
    DtcorlRun a = train_dtcorl(trajs, env, cfg);
    CHECK(a.metrics.size() == 2);
    for (const auto& row : a.metrics) {
        CHECK(std::isfinite(row.critic_loss));
        CHECK(std::isfinite(row.actor_loss));
        CHECK(std::isfinite(row.belief_loss));
        CHECK(std::isfinite(row.eval_return_mean));
    }
    DtcorlRun b = train_dtcorl(trajs, env, cfg);
    for (size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].critic_loss == b.metrics[i].critic_loss);
        CHECK(a.metrics[i].eval_return_mean == b.metrics[i].eval_return_mean);
    }
}

}  // TEST_SUITE
