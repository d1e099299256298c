// Batch front door: dataset generation, offline training, delayed evaluation,
// theory verification, and the belief-architecture benchmark.
//
// Exit codes: 0 success, 1 usage/config error, 2 runtime abort, 3 verification
// failure.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <thread>

#include "dtcorl/bench.hpp"
#include "dtcorl/config.hpp"
#include "dtcorl/io.hpp"
#include "dtcorl/tabular_learner.hpp"
#include "dtcorl/theory.hpp"

namespace fs = std::filesystem;
using namespace dtcorl;

namespace {

struct CliOptions {
    std::string config_path;
    std::vector<uint64_t> seeds;  // overrides config when nonempty
    std::string out_dir;          // overrides config when nonempty
    std::string profile;          // overrides config when nonempty
    bool inject_w1_sign_flip = false;
    bool resume = false;
    bool binary_dataset = false;
};

ExperimentConfig load_config(const CliOptions& opt) {
    ConfigMap map = opt.config_path.empty() ? ConfigMap::parse("")
                                            : ConfigMap::parse(read_file(opt.config_path));
    if (!opt.profile.empty()) map.set("run", "profile", opt.profile);
    if (!opt.out_dir.empty()) map.set("run", "out", opt.out_dir);
    if (!opt.seeds.empty()) {
        std::string joined;
        for (size_t i = 0; i < opt.seeds.size(); ++i)
            joined += (i ? "," : "") + std::to_string(opt.seeds[i]);
        map.set("run", "seeds", joined);
    }
    return ExperimentConfig::from_map(map);
}

fs::path dataset_path(const ExperimentConfig& cfg, uint64_t seed, bool binary) {
    return fs::path(cfg.out_dir) /
           ("dataset_seed" + std::to_string(seed) + (binary ? ".dtcd" : ".jsonl"));
}

fs::path manifest_path(const ExperimentConfig& cfg, uint64_t seed, bool binary) {
    return fs::path(dataset_path(cfg, seed, binary).string() + ".manifest.json");
}

fs::path find_dataset(const ExperimentConfig& cfg, uint64_t seed) {
    for (bool binary : {false, true})
        if (fs::exists(dataset_path(cfg, seed, binary))) return dataset_path(cfg, seed, binary);
    throw std::runtime_error("no dataset for seed " + std::to_string(seed) + " under " +
                             cfg.out_dir + " (run `dtcorl generate` first)");
}

/// Runs fn(seed) over all seeds with a small worker pool; rethrows the first
/// failure after all workers join.
void for_each_seed(const std::vector<uint64_t>& seeds, const std::function<void(uint64_t)>& fn) {
    const unsigned workers =
        std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(),
                                        static_cast<unsigned>(seeds.size())));
    if (workers <= 1) {
        for (uint64_t s : seeds) fn(s);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<size_t> next{0};
    std::mutex err_mutex;
    std::exception_ptr first_error;
    for (unsigned w = 0; w < workers; ++w)
        pool.emplace_back([&]() {
            for (;;) {
                const size_t i = next.fetch_add(1);
                if (i >= seeds.size()) return;
                try {
                    fn(seeds[i]);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(err_mutex);
                    if (!first_error) first_error = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::vector<ContTrajectory> apply_fraction(std::vector<ContTrajectory> trajs, double fraction,
                                           uint64_t seed) {
    if (fraction >= 1.0) return trajs;
    const int keep = static_cast<int>(std::ceil(fraction * static_cast<double>(trajs.size())));
    // seeded shuffle, then prefix selection
    Rng rng(seed ^ 0x5eedf00dull);
    for (size_t i = trajs.size(); i > 1; --i)
        std::swap(trajs[i - 1], trajs[static_cast<size_t>(rng.uniform_int(static_cast<int>(i)))]);
    trajs.resize(static_cast<size_t>(keep));
    return trajs;
}

int cmd_generate(const CliOptions& opt) {
    ExperimentConfig cfg = load_config(opt);
    ContinuousEnv env = make_env(cfg.env_id, cfg.env_sigma);
    env.episode_len = cfg.episode_len;
    for_each_seed(cfg.seeds, [&](uint64_t seed) {
        auto trajs = generate_behavior_dataset(env, cfg.behavior, cfg.trajectories, seed);
        trajs = apply_fraction(std::move(trajs), cfg.fraction, seed);
        TupleDataset ds = dataset_from_trajectories(trajs);
        const std::string payload =
            opt.binary_dataset ? dataset_to_binary(ds) : dataset_to_jsonl(ds);
        const fs::path data_file = dataset_path(cfg, seed, opt.binary_dataset);
        atomic_write(data_file, payload);
        DatasetManifest manifest;
        manifest.env = cfg.env_id;
        manifest.behavior = to_string(cfg.behavior);
        manifest.trajectories = static_cast<int>(trajs.size());
        manifest.seed = seed;
        manifest.checksum = hex64(fnv1a64(payload));
        atomic_write(manifest_path(cfg, seed, opt.binary_dataset), manifest.to_json().dump(2));
        std::cout << "generated " << data_file.string() << " (" << trajs.size()
                  << " trajectories, checksum " << manifest.checksum << ")\n";
    });
    return 0;
}

DtcorlTrainConfig train_config_of(const ExperimentConfig& cfg, uint64_t seed) {
    DtcorlTrainConfig tc;
    tc.learner = cfg.learner;
    tc.belief = cfg.belief;
    tc.delay = cfg.delay_max;
    tc.joint = cfg.joint;
    tc.epochs = cfg.epochs;
    tc.steps_per_epoch = cfg.steps_per_epoch;
    tc.belief_pretrain_steps = cfg.belief_pretrain_steps;
    tc.belief_batch = cfg.belief_batch;
    tc.belief_lr = cfg.belief_lr;
    tc.belief_weight_decay = cfg.belief_weight_decay;
    tc.eval_episodes = cfg.eval_episodes;
    tc.eval_delay_kind = cfg.delay_kind;
    tc.eval_delay_mean = cfg.delay_mean;
    tc.seed = seed;
    return tc;
}

int cmd_train(const CliOptions& opt) {
    ExperimentConfig cfg = load_config(opt);
    ContinuousEnv env = make_env(cfg.env_id, cfg.env_sigma);
    env.episode_len = cfg.episode_len;
    for_each_seed(cfg.seeds, [&](uint64_t seed) {
        const fs::path data_file = find_dataset(cfg, seed);
        TupleDataset ds = load_dataset_checked(
            data_file, fs::path(data_file.string() + ".manifest.json"));
        auto trajs = ds.trajectories();
        const fs::path metrics_file =
            fs::path(cfg.out_dir) / ("metrics_seed" + std::to_string(seed) + ".csv");
        const fs::path belief_file =
            fs::path(cfg.out_dir) / ("belief_seed" + std::to_string(seed) + ".dtcb");
        const fs::path policy_file =
            fs::path(cfg.out_dir) / ("policy_seed" + std::to_string(seed) + ".dtcp");

        if (cfg.algo == "augbc") {
            AugmentedBcRun run = train_augmented_bc(trajs, env, cfg.delay_max, cfg.epochs,
                                                    cfg.steps_per_epoch, cfg.learner, seed);
            atomic_write(metrics_file, metrics_to_csv(run.metrics));
            json net_cfg;
            net_cfg["algo"] = "augbc";
            net_cfg["in_dim"] = env.state_dim + cfg.delay_max * env.action_dim;
            net_cfg["action_dim"] = env.action_dim;
            net_cfg["hidden"] = cfg.learner.hidden;
            net_cfg["delay"] = cfg.delay_max;
            net_cfg["epochs_done"] = cfg.epochs;
            atomic_write(policy_file, params_to_blob("DTCP", net_cfg, run.net.params()));
            std::cout << "trained augbc seed " << seed << " -> " << policy_file.string() << "\n";
            return;
        }

        DtcorlTrainConfig tc = train_config_of(cfg, seed);
        DtcorlRun warm;
        DtcorlRun* warm_ptr = nullptr;
        std::string previous_metrics;
        if (opt.resume) {
            if (!fs::exists(policy_file) || !fs::exists(belief_file))
                throw std::runtime_error("resume requested but no checkpoint for seed " +
                                         std::to_string(seed));
            PolicyCheckpoint ckpt = load_policy_checkpoint(policy_file);
            TransformerConfig expected = cfg.belief;
            expected.state_dim = env.state_dim;
            expected.action_dim = env.action_dim;
            if (expected.max_delay < cfg.delay_max) expected.max_delay = cfg.delay_max;
            warm.belief = load_belief_checkpoint(belief_file, &expected);
            warm.actor = std::move(ckpt.actor);
            warm.critic = std::move(ckpt.critic);
            warm.epochs_done = ckpt.epochs_done;
            warm_ptr = &warm;
            if (fs::exists(metrics_file)) previous_metrics = read_file(metrics_file);
        }
        DtcorlRun run = train_dtcorl(trajs, env, tc, warm_ptr);
        std::string csv = metrics_to_csv(run.metrics);
        if (!previous_metrics.empty()) {
            // drop the duplicated header when appending after a resume
            csv = previous_metrics + csv.substr(csv.find('\n') + 1);
        }
        atomic_write(metrics_file, csv);
        save_belief_checkpoint(belief_file, run.belief);
        PolicyCheckpoint ckpt;
        ckpt.state_dim = env.state_dim;
        ckpt.action_dim = env.action_dim;
        ckpt.hidden = cfg.learner.hidden;
        ckpt.epochs_done = run.epochs_done;
        ckpt.actor = std::move(run.actor);
        ckpt.critic = std::move(run.critic);
        save_policy_checkpoint(policy_file, ckpt);
        std::cout << "trained dtcorl seed " << seed << " (" << run.epochs_done << " epochs) -> "
                  << policy_file.string() << "\n";
    });
    return 0;
}

int cmd_eval(const CliOptions& opt) {
    ExperimentConfig cfg = load_config(opt);
    ContinuousEnv env = make_env(cfg.env_id, cfg.env_sigma);
    env.episode_len = cfg.episode_len;
    for_each_seed(cfg.seeds, [&](uint64_t seed) {
        const fs::path policy_file =
            fs::path(cfg.out_dir) / ("policy_seed" + std::to_string(seed) + ".dtcp");
        const fs::path belief_file =
            fs::path(cfg.out_dir) / ("belief_seed" + std::to_string(seed) + ".dtcb");
        if (!fs::exists(policy_file))
            throw std::runtime_error("no policy checkpoint: " + policy_file.string());

        ParamBlob blob = params_from_blob("DTCP", read_file(policy_file));
        const std::string algo = blob.config.value("algo", "dtcorl");

        // reconstruct the agent
        Mlp augbc_net;
        PolicyCheckpoint ckpt;
        TransformerBelief belief;
        DelayedAgent<VecF, VecF> agent;
        if (algo == "augbc") {
            Rng rng(1);
            augbc_net = Mlp("augbc", blob.config.at("in_dim").get<int>(),
                            blob.config.at("hidden").get<std::vector<int>>(),
                            blob.config.at("action_dim").get<int>(), Activation::ReLU, true, rng);
            restore_params(blob, augbc_net.params());
            agent = make_augbc_agent(augbc_net);
        } else {
            ckpt = load_policy_checkpoint(policy_file);
            belief = load_belief_checkpoint(belief_file);
            agent = make_dtcorl_agent(belief, ckpt.actor);
        }

        ScoreRefs refs = compute_score_refs(env, seed);
        std::ostringstream csv;
        csv << eval_csv_header() << "\n";
        csv.precision(12);
        for (DelayKind kind : cfg.eval_kinds)
            for (int d : cfg.eval_delays) {
                DelayProcess proc = kind == DelayKind::Deterministic
                                        ? DelayProcess::deterministic(d)
                                        : DelayProcess::make(kind, d,
                                                             cfg.delay_mean > 0
                                                                 ? cfg.delay_mean
                                                                 : (1.0 + d) / 2.0);
                EvalResult ev = evaluate(env, agent, proc, cfg.eval_episodes,
                                         seed * 7919 + static_cast<uint64_t>(d), refs);
                csv << "-1,0,0,0," << ev.mean << ',' << ev.stddev << ',' << seed << ','
                    << to_string(kind) << ',' << d << ',' << cfg.eval_episodes << "\n";
                std::cout << "seed " << seed << " " << to_string(kind) << " delay " << d << ": "
                          << ev.mean << " +- " << ev.stddev << "\n";
            }
        atomic_write(fs::path(cfg.out_dir) / ("results_seed" + std::to_string(seed) + ".csv"),
                     csv.str());
    });
    return 0;
}

int cmd_verify(const CliOptions& opt) {
    ExperimentConfig cfg = load_config(opt);
    if (opt.inject_w1_sign_flip) testing_hooks::w1_sign_flip = true;
    if (cfg.verify_mdps <= 0) throw std::invalid_argument("verify: nothing to verify");

    std::vector<BoundReport> reports;
    int monotone_violations = 0;
    const std::vector<std::pair<int, int>> delay_pairs = {{0, 1}, {0, 2}, {1, 2}};
    for (int i = 0; i < cfg.verify_mdps; ++i) {
        Rng rng(1000 + static_cast<uint64_t>(i));
        TabularMdp m = make_random_mdp(cfg.verify_states, cfg.verify_actions, rng);
        if (cfg.verify_metric == MetricKind::Discrete) {
            m.metric_kind = MetricKind::Discrete;
            m.state_metric = make_discrete_metric(cfg.verify_states);
            m.action_metric = make_discrete_metric(cfg.verify_actions);
        }
        for (const auto& [dtau, d] : delay_pairs) {
            const int xt = build_augmented_mdp(m, dtau).n_states;
            const int xd = build_augmented_mdp(m, d).n_states;
            for (int p = 0; p < cfg.verify_policy_pairs; ++p) {
                TabularPolicy pi_tau =
                    TabularPolicy::random_dirichlet(xt, cfg.verify_actions, rng);
                TabularPolicy pi_delta =
                    TabularPolicy::random_dirichlet(xd, cfg.verify_actions, rng);
                reports.push_back(
                    verify_performance_difference_bound(m, d, dtau, pi_tau, pi_delta));
                reports.push_back(verify_qvalue_difference_bound(m, d, dtau, pi_tau, pi_delta));
            }
        }
        {
            const int xd = build_augmented_mdp(m, 1).n_states;
            TabularPolicy mu = TabularPolicy::random_dirichlet(xd, cfg.verify_actions, rng);
            TabularPolicy pi = TabularPolicy::random_dirichlet(cfg.verify_states,
                                                               cfg.verify_actions, rng);
            reports.push_back(verify_general_performance_difference(m, 1, mu, pi));
            auto ineq = verify_bpe_derivation_inequalities(m, pi, 50, rng);
            reports.insert(reports.end(), ineq.begin(), ineq.end());
        }
        {
            TabularLearnerConfig lc;
            lc.lambda1 = cfg.learner.lambda1;
            lc.lambda2 = cfg.learner.lambda2;
            for (int d : {1, 2}) {
                MonotoneReport rep = check_monotone_improvement(
                    m, d, lc, cfg.verify_monotone_iters,
                    Vec(static_cast<size_t>(cfg.verify_actions), 1.0 / cfg.verify_actions));
                monotone_violations += static_cast<int>(rep.violations.size());
                BoundReport br;
                br.instance = instance_tag(m);
                br.check_id = "monotone_improvement";
                br.delay = d;
                double worst = 0.0;
                for (const auto& v : rep.violations) worst = std::max(worst, v.gap);
                br.worst_slack = -worst;
                br.slack = -worst;
                br.holds = rep.ok();
                reports.push_back(br);
            }
        }
    }

    int failures = 0;
    for (const auto& r : reports) failures += r.holds ? 0 : 1;
    fs::create_directories(cfg.out_dir);
    atomic_write(fs::path(cfg.out_dir) / "verify_reports.csv", bound_reports_to_csv(reports));

    std::map<std::string, std::pair<int, int>> by_suite;  // id -> (pass, fail)
    for (const auto& r : reports) {
        auto& [pass, fail] = by_suite[r.check_id];
        (r.holds ? pass : fail) += 1;
    }
    for (const auto& [id, pf] : by_suite)
        std::cout << id << ": " << pf.first << " passed, " << pf.second << " failed\n";
    std::cout << "monotone violations: " << monotone_violations << "\n";
    if (failures > 0 || monotone_violations > 0) {
        std::cerr << "verification FAILED (" << failures << " reports)\n";
        return 3;
    }
    std::cout << "all verification suites passed (" << reports.size() << " reports)\n";
    return 0;
}

int cmd_belief_bench(const CliOptions& opt) {
    ExperimentConfig cfg = load_config(opt);
    ContinuousEnv env = make_env(cfg.env_id == "pointmass1d" ? "chain1d" : cfg.env_id);
    BeliefBenchConfig bc;
    bc.delay = cfg.delay_max;
    bc.seed = cfg.seeds.front();
    bc.transformer = cfg.belief;
    bc.transformer.d_model = std::min(cfg.belief.d_model, 32);
    bc.transformer.n_layers = std::min(cfg.belief.n_layers, 2);
    bc.transformer.n_heads = std::min(cfg.belief.n_heads, 2);
    bc.transformer.ff_dim = std::min(cfg.belief.ff_dim, 64);
    bc.ensemble = cfg.ensemble;
    if (cfg.profile == "smoke") {
        bc.train_steps = 40;
        bc.train_trajectories = 10;
        bc.eval_trajectories = 5;
        bc.latency_calls = 10;
    }
    BeliefBenchResult res = run_belief_bench(env, bc);

    std::ostringstream csv;
    csv << "model,step,mse\n";
    csv.precision(12);
    for (size_t j = 0; j < res.transformer_step_mse.size(); ++j)
        csv << "transformer," << (j + 1) << ',' << res.transformer_step_mse[j] << "\n";
    for (size_t j = 0; j < res.ensemble_step_mse.size(); ++j)
        csv << "ensemble," << (j + 1) << ',' << res.ensemble_step_mse[j] << "\n";
    fs::create_directories(cfg.out_dir);
    atomic_write(fs::path(cfg.out_dir) / "belief_bench_mse.csv", csv.str());

    std::ostringstream lat;
    lat << "model,params,ms_per_call\n";
    lat.precision(12);
    lat << "transformer," << res.transformer_param_count << ',' << res.transformer_latency_ms
        << "\n";
    lat << "ensemble," << res.ensemble_param_count << ',' << res.ensemble_latency_ms << "\n";
    atomic_write(fs::path(cfg.out_dir) / "belief_bench_latency.csv", lat.str());

    std::cout << "transformer: final-step mse " << res.transformer_step_mse.back() << ", "
              << res.transformer_latency_ms << " ms/call, " << res.transformer_param_count
              << " params\n";
    std::cout << "ensemble:    final-step mse " << res.ensemble_step_mse.back() << ", "
              << res.ensemble_latency_ms << " ms/call, " << res.ensemble_param_count
              << " params\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Delay-robust offline RL laboratory"};
    app.require_subcommand(1);

    CliOptions opt;
    app.add_option("--config", opt.config_path, "experiment config file");
    app.add_option("--seed", opt.seeds, "seed override (repeatable)");
    app.add_option("--out", opt.out_dir, "output directory override");
    app.add_option("--profile", opt.profile, "profile override: smoke|full");

    auto* generate = app.add_subcommand("generate", "roll delay-free behavior datasets");
    generate->fallthrough();
    generate->add_flag("--binary", opt.binary_dataset, "write the compact binary format");
    auto* train = app.add_subcommand("train", "offline training from a generated dataset");
    train->fallthrough();
    train->add_flag("--resume", opt.resume, "continue from the existing checkpoints");
    auto* eval = app.add_subcommand("eval", "delayed evaluation across the configured grid");
    eval->fallthrough();
    auto* verify = app.add_subcommand("verify", "numerical theory suites");
    verify->fallthrough();
    verify->add_flag("--inject-w1-sign-flip", opt.inject_w1_sign_flip,
                     "fault-injection self test (suites must fail)")
        ->group("");  // hidden
    auto* bench = app.add_subcommand("belief-bench",
                                     "transformer vs ensemble accuracy/latency comparison");
    bench->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 1;
    }

    try {
        if (generate->parsed()) return cmd_generate(opt);
        if (train->parsed()) return cmd_train(opt);
        if (eval->parsed()) return cmd_eval(opt);
        if (verify->parsed()) return cmd_verify(opt);
        if (bench->parsed()) return cmd_belief_bench(opt);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "runtime error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
