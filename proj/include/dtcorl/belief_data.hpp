#pragma once

#include <stdexcept>
#include <vector>

#include "dtcorl/delayed.hpp"
#include "dtcorl/transformer.hpp"

namespace dtcorl {

/// One belief-training sample: an augmented state plus the ground-truth state
/// sequence for its window positions. Position j is labeled with the state
/// reached after window action j; masked positions carry no label.
struct BeliefSample {
    ContAugState x;
    std::vector<VecF> labels;       // delay entries (zero vectors where invalid)
    std::vector<char> label_valid;  // delay flags
};

struct BeliefDataset {
    int delay = 0;
    int state_dim = 0;
    int action_dim = 0;
    std::vector<BeliefSample> samples;
};

/// Builds belief-training samples from delay-free trajectories, including the
/// [MASK]-padded boundary samples near episode starts.
inline BeliefDataset make_belief_dataset(const std::vector<ContTrajectory>& trajectories,
                                         int delay, bool include_boundary = true) {
    if (delay <= 0) throw std::invalid_argument("make_belief_dataset: delay must be positive");
    BeliefDataset ds;
    ds.delay = delay;
    for (const auto& traj : trajectories) {
        traj.validate();
        if (traj.length() == 0) continue;
        ds.state_dim = static_cast<int>(traj.states[0].size());
        ds.action_dim = static_cast<int>(traj.actions[0].size());
        const int T = traj.length();
        for (int t = 0; t < T; ++t) {
            const int start = t - delay;
            BeliefSample s;
            s.x.masked_prefix = start < 0 ? -start : 0;
            if (s.x.masked_prefix > 0 && !include_boundary) continue;
            s.x.base = traj.states[static_cast<size_t>(std::max(start, 0))];
            for (int j = 0; j < delay; ++j) {
                const int k = start + j;
                if (k < 0) {
                    s.x.window.push_back(VecF(static_cast<size_t>(ds.action_dim), 0.0));
                    s.labels.push_back(VecF(static_cast<size_t>(ds.state_dim), 0.0));
                    s.label_valid.push_back(0);
                } else {
                    s.x.window.push_back(traj.actions[static_cast<size_t>(k)]);
                    s.labels.push_back(traj.states[static_cast<size_t>(k + 1)]);
                    s.label_valid.push_back(1);
                }
            }
            ds.samples.push_back(std::move(s));
        }
    }
    if (ds.samples.empty()) throw std::invalid_argument("make_belief_dataset: empty dataset");
    return ds;
}

/// Packs selected samples into the batched tensor layout of the belief models.
inline BeliefBatch make_belief_batch(const BeliefDataset& ds, const std::vector<int>& indices) {
    if (indices.empty()) throw std::invalid_argument("make_belief_batch: empty batch");
    BeliefBatch b;
    b.batch = static_cast<int>(indices.size());
    b.delay = ds.delay;
    b.state_dim = ds.state_dim;
    b.action_dim = ds.action_dim;
    b.base = Tensor(b.batch, ds.state_dim);
    b.labels = Tensor(b.batch * ds.delay, ds.state_dim);
    b.label_valid.assign(static_cast<size_t>(b.batch) * ds.delay, 0);
    for (int j = 0; j < ds.delay; ++j) {
        b.window.emplace_back(b.batch, ds.action_dim);
        b.mask.emplace_back(static_cast<size_t>(b.batch), 0);
    }
    for (int r = 0; r < b.batch; ++r) {
        const BeliefSample& s = ds.samples[static_cast<size_t>(indices[static_cast<size_t>(r)])];
        for (int c = 0; c < ds.state_dim; ++c) b.base.at(r, c) = s.x.base[static_cast<size_t>(c)];
        for (int j = 0; j < ds.delay; ++j) {
            b.mask[static_cast<size_t>(j)][static_cast<size_t>(r)] =
                static_cast<char>(j < s.x.masked_prefix ? 1 : 0);
            for (int c = 0; c < ds.action_dim; ++c)
                b.window[static_cast<size_t>(j)].at(r, c) = s.x.window[static_cast<size_t>(j)][static_cast<size_t>(c)];
            b.label_valid[static_cast<size_t>(r * ds.delay + j)] = s.label_valid[static_cast<size_t>(j)];
            if (s.label_valid[static_cast<size_t>(j)])
                for (int c = 0; c < ds.state_dim; ++c)
                    b.labels.at(r * ds.delay + j, c) = s.labels[static_cast<size_t>(j)][static_cast<size_t>(c)];
        }
    }
    return b;
}

inline std::vector<int> sample_indices(int count, int upper, Rng& rng) {
    std::vector<int> out(static_cast<size_t>(count));
    for (auto& i : out) i = rng.uniform_int(upper);
    return out;
}

}  // namespace dtcorl
