#pragma once

#include <algorithm>
#include <cstdlib>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtcorl/neural_learner.hpp"
#include "dtcorl/rollout.hpp"

namespace dtcorl {

/// Sectioned key/value config text: `[section]` lines, `key = value` pairs,
/// `#` comments. Any key can be overridden through the environment as
/// DTCORL_<SECTION>_<KEY> (upper case).
class ConfigMap {
  public:
    static ConfigMap parse(const std::string& text) {
        ConfigMap cfg;
        std::istringstream in(text);
        std::string line, section;
        int line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            const auto hash = line.find('#');
            if (hash != std::string::npos) line = line.substr(0, hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw std::invalid_argument("config line " + std::to_string(line_no) +
                                                ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            ": expected key = value");
            const std::string key = trim(line.substr(0, eq));
            const std::string value = trim(line.substr(eq + 1));
            if (key.empty())
                throw std::invalid_argument("config line " + std::to_string(line_no) +
                                            ": empty key");
            cfg.values_[section + "." + key] = value;
        }
        cfg.apply_env_overrides();
        return cfg;
    }

    std::string serialize() const {
        // deterministic section/key order
        std::map<std::string, std::map<std::string, std::string>> grouped;
        for (const auto& [k, v] : values_) {
            const auto dot = k.find('.');
            grouped[k.substr(0, dot)][k.substr(dot + 1)] = v;
        }
        std::ostringstream os;
        for (const auto& [section, kv] : grouped) {
            os << '[' << section << "]\n";
            for (const auto& [k, v] : kv) os << k << " = " << v << "\n";
            os << "\n";
        }
        return os.str();
    }

    bool has(const std::string& section, const std::string& key) const {
        return values_.count(section + "." + key) > 0;
    }

    std::string get(const std::string& section, const std::string& key,
                    const std::string& fallback) const {
        auto it = values_.find(section + "." + key);
        return it == values_.end() ? fallback : it->second;
    }

    double get_double(const std::string& section, const std::string& key, double fallback) const {
        auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw std::invalid_argument("config [" + section + "] " + key + ": not a number: '" +
                                        it->second + "'");
        }
    }

    int get_int(const std::string& section, const std::string& key, int fallback) const {
        const double v = get_double(section, key, fallback);
        return static_cast<int>(v);
    }

    bool get_bool(const std::string& section, const std::string& key, bool fallback) const {
        auto it = values_.find(section + "." + key);
        if (it == values_.end()) return fallback;
        if (it->second == "true" || it->second == "1") return true;
        if (it->second == "false" || it->second == "0") return false;
        throw std::invalid_argument("config [" + section + "] " + key + ": not a boolean: '" +
                                    it->second + "'");
    }

    std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                      const std::string& fallback) const {
        std::vector<std::string> out;
        std::istringstream in(get(section, key, fallback));
        std::string item;
        while (std::getline(in, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(item);
        }
        return out;
    }

    void set(const std::string& section, const std::string& key, const std::string& value) {
        values_[section + "." + key] = value;
    }

    bool operator==(const ConfigMap& other) const { return values_ == other.values_; }

  private:
    std::map<std::string, std::string> values_;

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return "";
        const auto e = s.find_last_not_of(" \t\r\n");
        return s.substr(b, e - b + 1);
    }

    void apply_env_overrides() {
        for (auto& [k, v] : values_) {
            std::string env_key = "DTCORL_";
            for (char c : k)
                env_key.push_back(c == '.' ? '_' : static_cast<char>(std::toupper(c)));
            if (const char* override_value = std::getenv(env_key.c_str())) v = override_value;
        }
    }
};

/// Fully-typed experiment description assembled from a ConfigMap.
struct ExperimentConfig {
    // env
    std::string env_id = "pointmass1d";
    double env_sigma = 0.02;
    int episode_len = 48;
    // delay
    DelayKind delay_kind = DelayKind::Deterministic;
    int delay_max = 4;
    double delay_mean = 0.0;  // 0 -> midpoint for mean-matched kinds
    // dataset
    BehaviorKind behavior = BehaviorKind::Medium;
    int trajectories = 100;
    double fraction = 1.0;
    // belief
    std::string belief_arch = "transformer";
    TransformerConfig belief;
    EnsembleConfig ensemble;
    int belief_batch = 256;
    double belief_lr = 1e-4;
    double belief_weight_decay = 1e-4;
    int belief_pretrain_steps = 1200;
    // learner
    LearnerConfig learner;
    bool joint = true;
    std::string algo = "dtcorl";  // dtcorl | augbc
    int epochs = 30;
    int steps_per_epoch = 100;
    int eval_episodes = 10;
    // eval grid
    std::vector<int> eval_delays = {4, 8, 16};
    std::vector<DelayKind> eval_kinds = {DelayKind::Deterministic, DelayKind::Uniform};
    // verify suite
    int verify_mdps = 20;
    int verify_states = 3;
    int verify_actions = 2;
    int verify_policy_pairs = 10;
    int verify_monotone_iters = 10;
    MetricKind verify_metric = MetricKind::Index;
    // run
    std::vector<uint64_t> seeds = {1, 2, 3};
    std::string out_dir = "runs/out";
    std::string profile = "full";

    static ExperimentConfig from_map(const ConfigMap& m) {
        ExperimentConfig c;
        c.env_id = m.get("env", "id", c.env_id);
        c.env_sigma = m.get_double("env", "sigma", c.env_sigma);
        c.episode_len = m.get_int("env", "episode_len", c.episode_len);

        c.delay_kind = delay_kind_from(m.get("delay", "kind", "deterministic"));
        c.delay_max = m.get_int("delay", "max", c.delay_max);
        c.delay_mean = m.get_double("delay", "mean", c.delay_mean);

        c.behavior = behavior_kind_from(m.get("dataset", "behavior", "medium"));
        c.trajectories = m.get_int("dataset", "trajectories", c.trajectories);
        c.fraction = m.get_double("dataset", "fraction", c.fraction);

        c.belief_arch = m.get("belief", "arch", c.belief_arch);
        c.belief.mode = m.get("belief", "mode", "mse") == "mle" ? BeliefMode::Mle : BeliefMode::Mse;
        c.belief.d_model = m.get_int("belief", "d_model", c.belief.d_model);
        c.belief.n_layers = m.get_int("belief", "layers", c.belief.n_layers);
        c.belief.n_heads = m.get_int("belief", "heads", c.belief.n_heads);
        c.belief.ff_dim = m.get_int("belief", "ff", c.belief.ff_dim);
        c.belief.dropout = m.get_double("belief", "dropout", c.belief.dropout);
        c.belief.max_delay = m.get_int("belief", "max_delay", c.belief.max_delay);
        c.belief_batch = m.get_int("belief", "batch", c.belief_batch);
        c.belief_lr = m.get_double("belief", "lr", c.belief_lr);
        c.belief_weight_decay = m.get_double("belief", "weight_decay", c.belief_weight_decay);
        c.belief_pretrain_steps = m.get_int("belief", "pretrain_steps", c.belief_pretrain_steps);
        c.ensemble.mode = c.belief.mode;
        c.ensemble.n_members = m.get_int("belief", "members", c.ensemble.n_members);
        c.ensemble.max_delay = c.belief.max_delay;

        c.learner.lambda1 = m.get_double("learner", "lambda1", c.learner.lambda1);
        c.learner.lambda2 = m.get_double("learner", "lambda2", c.learner.lambda2);
        c.learner.alpha = m.get_double("learner", "alpha", c.learner.alpha);
        c.learner.alpha1 = m.get_double("learner", "alpha1", c.learner.alpha1);
        c.learner.alpha2 = m.get_double("learner", "alpha2", c.learner.alpha2);
        c.learner.gamma = m.get_double("learner", "gamma", c.learner.gamma);
        c.learner.actor_lr = m.get_double("learner", "actor_lr", c.learner.actor_lr);
        c.learner.critic_lr = m.get_double("learner", "critic_lr", c.learner.critic_lr);
        c.learner.tau_soft = m.get_double("learner", "tau", c.learner.tau_soft);
        c.learner.actor_train_freq = m.get_int("learner", "actor_freq", c.learner.actor_train_freq);
        c.learner.batch_size = m.get_int("learner", "batch", c.learner.batch_size);
        c.learner.action_noise = m.get_double("learner", "noise", c.learner.action_noise);
        c.learner.penalty_in_target = m.get_bool("learner", "penalty_in_target", false);
        {
            auto hidden = m.get_list("learner", "hidden", "64,64");
            c.learner.hidden.clear();
            for (const auto& h : hidden) c.learner.hidden.push_back(std::stoi(h));
        }
        c.joint = m.get_bool("learner", "joint", c.joint);
        c.algo = m.get("learner", "algo", c.algo);
        c.epochs = m.get_int("learner", "epochs", c.epochs);
        c.steps_per_epoch = m.get_int("learner", "steps_per_epoch", c.steps_per_epoch);
        c.eval_episodes = m.get_int("learner", "eval_episodes", c.eval_episodes);

        {
            c.eval_delays.clear();
            for (const auto& d : m.get_list("eval", "delays", "4,8,16"))
                c.eval_delays.push_back(std::stoi(d));
            c.eval_kinds.clear();
            for (const auto& k : m.get_list("eval", "kinds", "deterministic,uniform"))
                c.eval_kinds.push_back(delay_kind_from(k));
        }

        c.verify_mdps = m.get_int("verify", "mdps", c.verify_mdps);
        c.verify_states = m.get_int("verify", "states", c.verify_states);
        c.verify_actions = m.get_int("verify", "actions", c.verify_actions);
        c.verify_policy_pairs = m.get_int("verify", "policy_pairs", c.verify_policy_pairs);
        c.verify_monotone_iters = m.get_int("verify", "monotone_iters", c.verify_monotone_iters);
        {
            const std::string metric = m.get("verify", "metric", "index");
            if (metric == "discrete")
                c.verify_metric = MetricKind::Discrete;
            else if (metric == "index")
                c.verify_metric = MetricKind::Index;
            else
                throw std::invalid_argument("config [verify] metric: must be index or discrete");
        }

        {
            c.seeds.clear();
            for (const auto& s : m.get_list("run", "seeds", "1,2,3"))
                c.seeds.push_back(static_cast<uint64_t>(std::stoull(s)));
        }
        c.out_dir = m.get("run", "out", c.out_dir);
        c.profile = m.get("run", "profile", c.profile);
        if (c.profile == "smoke") c.apply_smoke_profile();
        c.validate();
        return c;
    }

    void apply_smoke_profile() {
        trajectories = std::min(trajectories, 10);
        epochs = std::min(epochs, 2);
        steps_per_epoch = std::min(steps_per_epoch, 25);
        belief_pretrain_steps = std::min(belief_pretrain_steps, 50);
        eval_episodes = std::min(eval_episodes, 2);
        belief.d_model = std::min(belief.d_model, 16);
        belief.n_layers = std::min(belief.n_layers, 1);
        belief.n_heads = std::min(belief.n_heads, 2);
        belief.ff_dim = std::min(belief.ff_dim, 32);
        learner.batch_size = std::min(learner.batch_size, 32);
        belief_batch = std::min(belief_batch, 32);
        learner.hidden = {16, 16};
        eval_delays = {delay_max};
        eval_kinds = {DelayKind::Deterministic};
    }

    void validate() const {
        if (!(fraction > 0.0 && fraction <= 1.0))
            throw std::invalid_argument("config [dataset] fraction: must lie in (0, 1]");
        if (seeds.empty()) throw std::invalid_argument("config [run] seeds: must be nonempty");
        if (delay_kind != DelayKind::Deterministic && delay_kind != DelayKind::Uniform) {
            const double mean = delay_mean > 0 ? delay_mean : (1.0 + delay_max) / 2.0;
            if (mean > delay_max)
                throw std::invalid_argument("config [delay] mean: must not exceed max");
        }
        if (trajectories < 0)
            throw std::invalid_argument("config [dataset] trajectories: must be nonnegative");
        if (algo != "dtcorl" && algo != "augbc")
            throw std::invalid_argument("config [learner] algo: unknown algorithm '" + algo + "'");
        if (belief_arch != "transformer" && belief_arch != "ensemble")
            throw std::invalid_argument("config [belief] arch: unknown architecture '" +
                                        belief_arch + "'");
        learner.validate();
    }

    DelayProcess delay_process() const {
        if (delay_kind == DelayKind::Deterministic) return DelayProcess::deterministic(delay_max);
        if (delay_kind == DelayKind::Uniform) return DelayProcess::uniform(delay_max);
        const double mean = delay_mean > 0 ? delay_mean : (1.0 + delay_max) / 2.0;
        return DelayProcess::make(delay_kind, delay_max, mean);
    }
};

}  // namespace dtcorl
