#pragma once

#include <chrono>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtcorl/autodiff.hpp"
#include "dtcorl/delayed.hpp"
#include "dtcorl/neural_learner.hpp"
#include "dtcorl/tabular.hpp"
#include "dtcorl/theory.hpp"

namespace dtcorl {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Filesystem helpers
// ---------------------------------------------------------------------------

/// Write-temp-then-rename; readers never observe partial files.
inline void atomic_write(const std::filesystem::path& path, const std::string& contents) {
    std::filesystem::create_directories(path.parent_path().empty() ? "." : path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("atomic_write: cannot open " + tmp.string());
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw std::runtime_error("atomic_write: short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_file: cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline uint64_t fnv1a64(const std::string& bytes) {
    uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline std::string hex64(uint64_t v) {
    std::ostringstream os;
    os << std::hex << v;
    return os.str();
}

// ---------------------------------------------------------------------------
// TabularMdp JSON schema
// ---------------------------------------------------------------------------

inline json mdp_to_json(const TabularMdp& mdp) {
    json j;
    j["n_states"] = mdp.n_states;
    j["n_actions"] = mdp.n_actions;
    j["transition"] = mdp.transition;
    j["reward"] = mdp.reward;
    j["gamma"] = mdp.gamma;
    j["horizon"] = mdp.horizon;
    j["rho0"] = mdp.rho0;
    j["metric"] = mdp.metric_kind == MetricKind::Discrete ? "discrete" : "index";
    return j;
}

inline TabularMdp mdp_from_json(const json& j) {
    TabularMdp mdp;
    mdp.n_states = j.at("n_states").get<int>();
    mdp.n_actions = j.at("n_actions").get<int>();
    mdp.transition = j.at("transition").get<std::vector<std::vector<Vec>>>();
    mdp.reward = j.at("reward").get<std::vector<Vec>>();
    mdp.gamma = j.at("gamma").get<double>();
    mdp.horizon = j.at("horizon").get<int>();
    mdp.rho0 = j.at("rho0").get<Vec>();
    const std::string metric = j.value("metric", "index");
    if (metric == "discrete") {
        mdp.metric_kind = MetricKind::Discrete;
        mdp.state_metric = make_discrete_metric(mdp.n_states);
        mdp.action_metric = make_discrete_metric(mdp.n_actions);
    } else if (metric == "index") {
        mdp.metric_kind = MetricKind::Index;
        mdp.state_metric = make_index_metric(mdp.n_states);
        mdp.action_metric = make_index_metric(mdp.n_actions);
    } else {
        throw std::invalid_argument("mdp_from_json: unknown metric '" + metric + "'");
    }
    mdp.validate();
    return mdp;
}

// ---------------------------------------------------------------------------
// Tuple datasets: JSON-Lines and the binary variant, interchangeable
// ---------------------------------------------------------------------------

struct DatasetHeader {
    int delay = 0;
    bool tabular = false;
    int state_dim = 0;
    int action_dim = 0;
};

struct TupleRecord {
    int episode = 0;
    int step = 0;
    ContAugTuple tuple;
};

struct TupleDataset {
    DatasetHeader header;
    std::vector<TupleRecord> records;

    /// Regroups the tuple stream into per-episode trajectories.
    std::vector<ContTrajectory> trajectories() const {
        std::vector<ContTrajectory> out;
        std::vector<ContAugTuple> episode;
        int current = records.empty() ? 0 : records[0].episode;
        auto flush = [&]() {
            if (!episode.empty()) out.push_back(reconstruct_trajectory(episode));
            episode.clear();
        };
        for (const auto& r : records) {
            if (r.episode != current) {
                flush();
                current = r.episode;
            }
            episode.push_back(r.tuple);
        }
        flush();
        return out;
    }
};

namespace detail {

inline json vec_to_json(const VecF& v) { return json(v); }

inline json aug_to_json(const ContAugState& x) {
    json j;
    j["base"] = x.base;
    j["window"] = x.window;
    j["masked"] = x.masked_prefix;
    return j;
}

inline ContAugState aug_from_json(const json& j) {
    ContAugState x;
    x.base = j.at("base").get<VecF>();
    x.window = j.at("window").get<std::vector<VecF>>();
    x.masked_prefix = j.at("masked").get<int>();
    return x;
}

}  // namespace detail

inline std::string dataset_to_jsonl(const TupleDataset& ds) {
    std::ostringstream out;
    json header;
    header["delay"] = ds.header.delay;
    header["kind"] = ds.header.tabular ? "tabular" : "continuous";
    header["state_dim"] = ds.header.state_dim;
    header["action_dim"] = ds.header.action_dim;
    out << header.dump() << "\n";
    for (const auto& r : ds.records) {
        json j;
        j["ep"] = r.episode;
        j["t"] = r.step;
        j["x"] = detail::aug_to_json(r.tuple.x);
        j["a"] = r.tuple.a;
        j["r"] = r.tuple.r;
        j["x_next"] = detail::aug_to_json(r.tuple.x_next);
        j["true_state"] = r.tuple.true_state;
        j["true_next"] = r.tuple.true_next_state;
        j["done"] = r.tuple.done;
        j["belief_only"] = r.tuple.belief_only;
        out << j.dump() << "\n";
    }
    return out.str();
}

inline TupleDataset dataset_from_jsonl(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("dataset_from_jsonl: empty file");
    json header = json::parse(line);
    TupleDataset ds;
    ds.header.delay = header.at("delay").get<int>();
    ds.header.tabular = header.at("kind").get<std::string>() == "tabular";
    ds.header.state_dim = header.at("state_dim").get<int>();
    ds.header.action_dim = header.at("action_dim").get<int>();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        TupleRecord r;
        r.episode = j.at("ep").get<int>();
        r.step = j.at("t").get<int>();
        r.tuple.x = detail::aug_from_json(j.at("x"));
        r.tuple.a = j.at("a").get<VecF>();
        r.tuple.r = j.at("r").get<double>();
        r.tuple.x_next = detail::aug_from_json(j.at("x_next"));
        r.tuple.true_state = j.at("true_state").get<VecF>();
        r.tuple.true_next_state = j.at("true_next").get<VecF>();
        r.tuple.done = j.at("done").get<bool>();
        r.tuple.belief_only = j.at("belief_only").get<bool>();
        ds.records.push_back(std::move(r));
    }
    return ds;
}

namespace detail {

struct ByteWriter {
    std::string bytes;
    void u32(uint32_t v) { raw(&v, sizeof(v)); }
    void u64(uint64_t v) { raw(&v, sizeof(v)); }
    void f64(double v) { raw(&v, sizeof(v)); }
    void u8(uint8_t v) { raw(&v, sizeof(v)); }
    void vec(const VecF& v) {
        u64(v.size());
        for (double x : v) f64(x);
    }
    void str(const std::string& s) {
        u64(s.size());
        bytes.append(s);
    }
    void raw(const void* p, size_t n) { bytes.append(reinterpret_cast<const char*>(p), n); }
};

struct ByteReader {
    const std::string& bytes;
    size_t pos = 0;
    explicit ByteReader(const std::string& b) : bytes(b) {}
    uint32_t u32() { return read<uint32_t>(); }
    uint64_t u64() { return read<uint64_t>(); }
    double f64() { return read<double>(); }
    uint8_t u8() { return read<uint8_t>(); }
    VecF vec() {
        const uint64_t n = u64();
        VecF v(n);
        for (auto& x : v) x = f64();
        return v;
    }
    std::string str() {
        const uint64_t n = u64();
        check(n);
        std::string s = bytes.substr(pos, n);
        pos += n;
        return s;
    }
    template <class T>
    T read() {
        check(sizeof(T));
        T v;
        std::memcpy(&v, bytes.data() + pos, sizeof(T));
        pos += sizeof(T);
        return v;
    }
    void check(size_t n) const {
        if (pos + n > bytes.size()) throw std::runtime_error("binary read past end of file");
    }
};

}  // namespace detail

/// Compact little-endian binary dataset ("DTCD"), accepted interchangeably
/// with the JSONL format.
inline std::string dataset_to_binary(const TupleDataset& ds) {
    detail::ByteWriter w;
    w.raw("DTCD", 4);
    w.u32(1);
    w.u32(static_cast<uint32_t>(ds.header.delay));
    w.u8(ds.header.tabular ? 1 : 0);
    w.u32(static_cast<uint32_t>(ds.header.state_dim));
    w.u32(static_cast<uint32_t>(ds.header.action_dim));
    w.u64(ds.records.size());
    for (const auto& r : ds.records) {
        w.u32(static_cast<uint32_t>(r.episode));
        w.u32(static_cast<uint32_t>(r.step));
        auto aug = [&w](const ContAugState& x) {
            w.vec(x.base);
            w.u64(x.window.size());
            for (const auto& a : x.window) w.vec(a);
            w.u32(static_cast<uint32_t>(x.masked_prefix));
        };
        aug(r.tuple.x);
        w.vec(r.tuple.a);
        w.f64(r.tuple.r);
        aug(r.tuple.x_next);
        w.vec(r.tuple.true_state);
        w.vec(r.tuple.true_next_state);
        w.u8(r.tuple.done ? 1 : 0);
        w.u8(r.tuple.belief_only ? 1 : 0);
    }
    return w.bytes;
}

inline TupleDataset dataset_from_binary(const std::string& bytes) {
    detail::ByteReader r(bytes);
    char magic[4];
    r.check(4);
    std::memcpy(magic, bytes.data(), 4);
    r.pos = 4;
    if (std::string(magic, 4) != "DTCD")
        throw std::runtime_error("dataset_from_binary: bad magic");
    if (r.u32() != 1) throw std::runtime_error("dataset_from_binary: unsupported version");
    TupleDataset ds;
    ds.header.delay = static_cast<int>(r.u32());
    ds.header.tabular = r.u8() != 0;
    ds.header.state_dim = static_cast<int>(r.u32());
    ds.header.action_dim = static_cast<int>(r.u32());
    const uint64_t count = r.u64();
    ds.records.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        TupleRecord rec;
        rec.episode = static_cast<int>(r.u32());
        rec.step = static_cast<int>(r.u32());
        auto aug = [&r]() {
            ContAugState x;
            x.base = r.vec();
            const uint64_t n = r.u64();
            for (uint64_t k = 0; k < n; ++k) x.window.push_back(r.vec());
            x.masked_prefix = static_cast<int>(r.u32());
            return x;
        };
        rec.tuple.x = aug();
        rec.tuple.a = r.vec();
        rec.tuple.r = r.f64();
        rec.tuple.x_next = aug();
        rec.tuple.true_state = r.vec();
        rec.tuple.true_next_state = r.vec();
        rec.tuple.done = r.u8() != 0;
        rec.tuple.belief_only = r.u8() != 0;
        ds.records.push_back(std::move(rec));
    }
    return ds;
}

/// Reads either format, sniffing the leading bytes.
inline TupleDataset load_dataset(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    if (bytes.size() >= 4 && bytes.compare(0, 4, "DTCD") == 0) return dataset_from_binary(bytes);
    return dataset_from_jsonl(bytes);
}

/// Builds the delay-zero tuple stream of a trajectory set (the on-disk form
/// of generated behavior data).
inline TupleDataset dataset_from_trajectories(const std::vector<ContTrajectory>& trajs) {
    TupleDataset ds;
    if (trajs.empty()) return ds;
    ds.header.delay = 0;
    ds.header.tabular = false;
    ds.header.state_dim = static_cast<int>(trajs[0].states[0].size());
    ds.header.action_dim = static_cast<int>(trajs[0].actions[0].size());
    for (size_t ep = 0; ep < trajs.size(); ++ep) {
        auto tuples = augment_trajectory(trajs[ep], 0);
        for (size_t t = 0; t < tuples.size(); ++t)
            ds.records.push_back({static_cast<int>(ep), static_cast<int>(t), std::move(tuples[t])});
    }
    return ds;
}

// ---------------------------------------------------------------------------
// Dataset manifests
// ---------------------------------------------------------------------------

struct DatasetManifest {
    std::string env;
    std::string behavior;
    int trajectories = 0;
    uint64_t seed = 0;
    std::string checksum;  // FNV-1a of the dataset file bytes, hex

    json to_json(bool with_timestamp = true) const {
        json j;
        j["env"] = env;
        j["behavior"] = behavior;
        j["trajectories"] = trajectories;
        j["seed"] = seed;
        j["checksum"] = checksum;
        if (with_timestamp) {
            const auto now = std::chrono::system_clock::now().time_since_epoch();
            j["metadata"] = {
                {"created", std::chrono::duration_cast<std::chrono::seconds>(now).count()}};
        }
        return j;
    }

    static DatasetManifest from_json(const json& j) {
        DatasetManifest m;
        m.env = j.at("env").get<std::string>();
        m.behavior = j.at("behavior").get<std::string>();
        m.trajectories = j.at("trajectories").get<int>();
        m.seed = j.at("seed").get<uint64_t>();
        m.checksum = j.at("checksum").get<std::string>();
        return m;
    }
};

/// Loads a dataset and verifies it against its manifest; checksum mismatches
/// are a hard error.
inline TupleDataset load_dataset_checked(const std::filesystem::path& data_path,
                                         const std::filesystem::path& manifest_path) {
    const std::string bytes = read_file(data_path);
    const DatasetManifest manifest =
        DatasetManifest::from_json(json::parse(read_file(manifest_path)));
    if (hex64(fnv1a64(bytes)) != manifest.checksum)
        throw std::runtime_error("dataset checksum mismatch for " + data_path.string());
    if (bytes.size() >= 4 && bytes.compare(0, 4, "DTCD") == 0) return dataset_from_binary(bytes);
    return dataset_from_jsonl(bytes);
}

// ---------------------------------------------------------------------------
// Model checkpoints: "DTCB" (belief) and "DTCP" (actor/critic) containers
// ---------------------------------------------------------------------------

inline std::string params_to_blob(const std::string& magic, const json& config_block,
                                  const std::vector<Parameter*>& params) {
    if (magic.size() != 4) throw std::invalid_argument("params_to_blob: magic must be 4 bytes");
    detail::ByteWriter w;
    w.raw(magic.data(), 4);
    w.u32(1);
    w.str(config_block.dump());
    w.u64(params.size());
    for (const Parameter* p : params) {
        w.str(p->name);
        w.u32(static_cast<uint32_t>(p->value.rows));
        w.u32(static_cast<uint32_t>(p->value.cols));
        for (double v : p->value.v) w.f64(v);
    }
    return w.bytes;
}

struct ParamBlob {
    json config;
    std::vector<std::pair<std::string, Tensor>> params;
};

inline ParamBlob params_from_blob(const std::string& magic, const std::string& bytes) {
    if (bytes.size() < 4 || bytes.compare(0, 4, magic) != 0)
        throw std::runtime_error("checkpoint magic mismatch (expected " + magic + ")");
    detail::ByteReader r(bytes);
    r.pos = 4;
    if (r.u32() != 1) throw std::runtime_error("checkpoint version unsupported");
    ParamBlob out;
    out.config = json::parse(r.str());
    const uint64_t count = r.u64();
    for (uint64_t i = 0; i < count; ++i) {
        std::string name = r.str();
        const int rows = static_cast<int>(r.u32());
        const int cols = static_cast<int>(r.u32());
        Tensor t(rows, cols);
        for (auto& v : t.v) v = r.f64();
        out.params.push_back({std::move(name), std::move(t)});
    }
    return out;
}

inline void restore_params(const ParamBlob& blob, const std::vector<Parameter*>& params) {
    if (blob.params.size() != params.size())
        throw std::runtime_error("checkpoint parameter count mismatch");
    for (size_t i = 0; i < params.size(); ++i) {
        if (blob.params[i].first != params[i]->name)
            throw std::runtime_error("checkpoint parameter name mismatch: " +
                                     blob.params[i].first + " vs " + params[i]->name);
        if (!blob.params[i].second.same_shape(params[i]->value))
            throw std::runtime_error("checkpoint parameter shape mismatch: " + params[i]->name);
        params[i]->value = blob.params[i].second;
    }
}

inline json transformer_config_json(const TransformerConfig& c) {
    return json{{"state_dim", c.state_dim}, {"action_dim", c.action_dim},
                {"max_delay", c.max_delay}, {"d_model", c.d_model},
                {"layers", c.n_layers},     {"heads", c.n_heads},
                {"ff", c.ff_dim},           {"dropout", c.dropout},
                {"mode", c.mode == BeliefMode::Mse ? "mse" : "mle"}};
}

inline TransformerConfig transformer_config_from_json(const json& j) {
    TransformerConfig c;
    c.state_dim = j.at("state_dim").get<int>();
    c.action_dim = j.at("action_dim").get<int>();
    c.max_delay = j.at("max_delay").get<int>();
    c.d_model = j.at("d_model").get<int>();
    c.n_layers = j.at("layers").get<int>();
    c.n_heads = j.at("heads").get<int>();
    c.ff_dim = j.at("ff").get<int>();
    c.dropout = j.at("dropout").get<double>();
    c.mode = j.at("mode").get<std::string>() == "mle" ? BeliefMode::Mle : BeliefMode::Mse;
    return c;
}

inline void save_belief_checkpoint(const std::filesystem::path& path, TransformerBelief& model) {
    atomic_write(path, params_to_blob("DTCB", transformer_config_json(model.cfg), model.params()));
}

/// Load rejects checkpoints whose config block differs from the expected one.
inline TransformerBelief load_belief_checkpoint(const std::filesystem::path& path,
                                                const TransformerConfig* expected = nullptr) {
    ParamBlob blob = params_from_blob("DTCB", read_file(path));
    TransformerConfig cfg = transformer_config_from_json(blob.config);
    if (expected && !(cfg == *expected))
        throw std::runtime_error("belief checkpoint config mismatch for " + path.string());
    Rng rng(1);
    TransformerBelief model(cfg, rng);
    restore_params(blob, model.params());
    return model;
}

struct PolicyCheckpoint {
    NeuralActor actor;
    NeuralCritic critic;
    int state_dim = 0;
    int action_dim = 0;
    std::vector<int> hidden;
    int epochs_done = 0;
    std::string algo = "dtcorl";
};

inline void save_policy_checkpoint(const std::filesystem::path& path, PolicyCheckpoint& ckpt) {
    json cfg;
    cfg["state_dim"] = ckpt.state_dim;
    cfg["action_dim"] = ckpt.action_dim;
    cfg["hidden"] = ckpt.hidden;
    cfg["epochs_done"] = ckpt.epochs_done;
    cfg["algo"] = ckpt.algo;
    std::vector<Parameter*> params = ckpt.actor.net.params();
    auto tgt = ckpt.actor.target.params();
    auto q1 = ckpt.critic.q1.params();
    auto q2 = ckpt.critic.q2.params();
    auto q1t = ckpt.critic.q1_target.params();
    auto q2t = ckpt.critic.q2_target.params();
    for (auto* v : tgt) params.push_back(v);
    for (auto* v : q1) params.push_back(v);
    for (auto* v : q2) params.push_back(v);
    for (auto* v : q1t) params.push_back(v);
    for (auto* v : q2t) params.push_back(v);
    atomic_write(path, params_to_blob("DTCP", cfg, params));
}

inline PolicyCheckpoint load_policy_checkpoint(const std::filesystem::path& path) {
    ParamBlob blob = params_from_blob("DTCP", read_file(path));
    PolicyCheckpoint ckpt;
    ckpt.state_dim = blob.config.at("state_dim").get<int>();
    ckpt.action_dim = blob.config.at("action_dim").get<int>();
    ckpt.hidden = blob.config.at("hidden").get<std::vector<int>>();
    ckpt.epochs_done = blob.config.at("epochs_done").get<int>();
    ckpt.algo = blob.config.value("algo", "dtcorl");
    Rng rng(1);
    ckpt.actor = NeuralActor(ckpt.state_dim, ckpt.action_dim, ckpt.hidden, rng);
    ckpt.critic = NeuralCritic(ckpt.state_dim, ckpt.action_dim, ckpt.hidden, rng);
    std::vector<Parameter*> params = ckpt.actor.net.params();
    auto tgt = ckpt.actor.target.params();
    auto q1 = ckpt.critic.q1.params();
    auto q2 = ckpt.critic.q2.params();
    auto q1t = ckpt.critic.q1_target.params();
    auto q2t = ckpt.critic.q2_target.params();
    for (auto* v : tgt) params.push_back(v);
    for (auto* v : q1) params.push_back(v);
    for (auto* v : q2) params.push_back(v);
    for (auto* v : q1t) params.push_back(v);
    for (auto* v : q2t) params.push_back(v);
    restore_params(blob, params);
    return ckpt;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

inline std::string metrics_csv_header() {
    return "epoch,critic_loss,actor_loss,belief_loss,eval_return_mean,eval_return_std,seed";
}

inline std::string metrics_row_csv(const MetricsRow& r) {
    std::ostringstream os;
    os.precision(12);
    os << r.epoch << ',' << r.critic_loss << ',' << r.actor_loss << ',' << r.belief_loss << ','
       << r.eval_return_mean << ',' << r.eval_return_std << ',' << r.seed;
    return os.str();
}

inline std::string metrics_to_csv(const std::vector<MetricsRow>& rows) {
    std::ostringstream os;
    os << metrics_csv_header() << "\n";
    for (const auto& r : rows) os << metrics_row_csv(r) << "\n";
    return os.str();
}

/// Evaluation rows extend the learner schema with the delay descriptor.
inline std::string eval_csv_header() {
    return metrics_csv_header() + ",delay_kind,delay,episodes";
}

inline std::string bound_reports_to_csv(const std::vector<BoundReport>& reports) {
    std::ostringstream os;
    os.precision(12);
    os << "instance,check_id,delay_tau,delay,lhs,rhs,slack,worst_slack,holds\n";
    for (const auto& r : reports)
        os << r.instance << ',' << r.check_id << ',' << r.delay_tau << ',' << r.delay << ','
           << r.lhs << ',' << r.rhs << ',' << r.slack << ',' << r.worst_slack << ','
           << (r.holds ? 1 : 0) << "\n";
    return os.str();
}

}  // namespace dtcorl
