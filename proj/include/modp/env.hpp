// SPDX-License-Identifier: MIT
#ifndef MODP_ENV_HPP
#define MODP_ENV_HPP

#include "modp/common.hpp"

namespace modp {

// Point-mass speed-vs-energy task. State is (position, velocity); the single
// action in [-1, 1] accelerates the mass. Reward trades achieved velocity
// against the energy cost of the action:
//   v' = clamp(0.9 v + 0.1 a, -1, 1),  p' = p + v',  r = (v', 1 - a^2).
struct EnvConfig {
    int episode_len = 32;
    int n_objectives = 2;
    int state_dim = 2;
    int action_dim = 1;
    double drag = 0.9;
    double gain = 0.1;
};

struct StepResult {
    VecX state;
    VecX reward;
};

StepResult env_step(const EnvConfig& cfg, const VecX& state, double action);

inline VecX env_reset(const EnvConfig&) { return VecX::Zero(2); }

// Scalarized steady-state reward maximizer: a* = clamp(w1 / (2 w2), 0, 1),
// with the convention a* = 1 when w2 = 0.
double expert_action(const VecX& omega);

// Uniform sample from the preference simplex.
VecX sample_preference(Rng& rng, int n_obj);

// Episode returns of constant-action rollouts from rest over an action grid;
// only non-dominated rows are kept.
MatX oracle_front(const EnvConfig& cfg, int resolution = 201);

enum class Quality { Expert, Amateur };

inline std::string quality_name(Quality q) { return q == Quality::Expert ? "expert" : "amateur"; }
inline Quality quality_from_name(const std::string& s) {
    if (s == "expert") return Quality::Expert;
    if (s == "amateur") return Quality::Amateur;
    throw ConfigError("unknown quality: " + s);
}

struct CollectConfig {
    int n_traj = 2000;
    Quality quality = Quality::Expert;
    double expert_noise = 0.02;
    double perturb_prob = 0.65;
    double perturb_width = 0.3;
};

struct RawTrajectory {
    VecX omega;       // recorded preference
    MatX states;      // [T x state_dim]
    MatX actions;     // [T x action_dim]
    MatX rewards;     // [T x n_objectives]
    bool perturbed = false;
};

std::vector<RawTrajectory> collect_trajectories(const EnvConfig& env, const CollectConfig& cc,
                                                uint64_t seed);

}  // namespace modp

#endif
