// SPDX-License-Identifier: MIT
#ifndef MODP_DATASET_HPP
#define MODP_DATASET_HPP

#include <array>
#include <optional>

#include "modp/env.hpp"

namespace modp {

struct Trajectory {
    int id = -1;
    VecX omega;
    MatX states;   // [T x state_dim]
    MatX actions;  // [T x action_dim]
    MatX rewards;  // [T x n_objectives]
    MatX rtg;      // [T x n_objectives], suffix sums of rewards
    VecX traj_rtg; // per-step mean of rtg rows
    VecX g_norm;   // normalized trajectory return, filled by a normalization scheme
    bool perturbed = false;

    VecX episode_return() const { return rewards.colwise().sum(); }
};

struct SliceSpec {
    std::string kind = "complete";  // complete | shattered | narrow
    double m = 0.0;                 // removal percentage
    int n_regions = 0;
    // closed intervals of removed omega_1 values, for flagging OOD preferences
    std::vector<std::array<double, 2>> removed_regions;
};

struct Manifest {
    std::string format = "modp-dataset-v1";
    EnvConfig env;
    std::string quality = "expert";
    int n_traj = 0;
    uint64_t seed = 0;
    double expert_noise = 0.02;
    double perturb_prob = 0.65;
    double perturb_width = 0.3;
    int n_perturbed = 0;
    SliceSpec slice;
    std::string normalization_json = "{}";  // filled when a scheme is applied
    std::string config_digest;
};

struct Dataset {
    std::vector<Trajectory> trajs;
    Manifest manifest;

    int n_obj() const { return manifest.env.n_objectives; }
    size_t size() const { return trajs.size(); }
};

// Suffix sums: rtg[t] = sum_{t' >= t} rewards[t']; traj_rtg = mean_t rtg[t].
void compute_rtg(Trajectory& traj);
void compute_rtg(Dataset& ds);

Dataset make_dataset(const EnvConfig& env, const CollectConfig& cc, uint64_t seed);

struct SliceResult {
    Dataset ds;
    std::vector<int> removed_ids;
};

// Removes ~m% of trajectories in n_regions equal blocks centered at evenly
// spaced positions along the preference-sorted order.
SliceResult slice_shattered(const Dataset& ds, double m, int n_regions);

// Removes floor(N*m/200) trajectories from each end of the preference-sorted
// order.
SliceResult slice_narrow(const Dataset& ds, double m);

struct Segment {
    MatX x0;  // [H x state_dim]
    VecX omega;
    VecX g;   // normalized trajectory return
    int next_state_index = 1;
};

// Window starting at `start`; windows running past the end are padded with the
// final state.
Segment make_segment(const Trajectory& traj, int start, int horizon);

// Uniform over (trajectory, valid start index). Valid starts are [0, T-H]
// so padding only occurs when H exceeds the episode length.
std::vector<Segment> batch_segments(const Dataset& ds, int horizon, int batch_size, Rng& rng);

struct StateStats {
    VecX mean;
    VecX std;

    VecX normalize(const VecX& s) const { return (s - mean).cwiseQuotient(std); }
    VecX denormalize(const VecX& s) const { return s.cwiseProduct(std) + mean; }
    MatX normalize_rows(const MatX& s) const;
    MatX denormalize_rows(const MatX& s) const;
};

StateStats compute_state_stats(const Dataset& ds);

// Matrix of all recorded preferences, one row per trajectory.
MatX dataset_preferences(const Dataset& ds);
// The same preferences as a list of vectors.
std::vector<VecX> preference_list(const Dataset& ds);
// Matrix of all episode returns, one row per trajectory.
MatX dataset_episode_returns(const Dataset& ds);

void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);
std::string dataset_digest(const std::string& dir);

bool preference_is_ood(const SliceSpec& slice, const VecX& omega);

}  // namespace modp

#endif
