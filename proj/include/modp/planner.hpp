// SPDX-License-Identifier: MIT
#ifndef MODP_PLANNER_HPP
#define MODP_PLANNER_HPP

#include "modp/env.hpp"
#include "modp/slider.hpp"

namespace modp {

struct InvDynTrainConfig {
    InvDynConfig net;
    int grad_steps = 6000;
    int batch = 64;
    double lr = 1e-3;
    double weight_decay = 1e-5;
    uint64_t seed = 0;
};

// Inverse dynamics over raw environment states; inputs are z-scored with the
// stored statistics before entering the network.
struct TrainedInvDyn {
    InvDynConfig cfg;
    StateStats stats;
    ParamSet<Real> params;
    std::vector<double> loss_log;

    // s_pair rows: [s_t | s_t+1] in environment units.
    MatX predict(const MatX& s_pair) const;
};

TrainedInvDyn train_inverse_dynamics(const Dataset& ds, const StateStats& stats,
                                     const InvDynTrainConfig& cfg);

// Everything needed to act: frozen models, dataset statistics, and sampling
// settings. The return condition is fixed at the all-ones vector.
struct Planner {
    Denoiser<Real> net;
    ParamSet<Real> theta;
    std::optional<ParamSet<Real>> theta_star;
    TrainedInvDyn invdyn;
    StateStats stats;
    std::vector<VecX> dataset_prefs;
    NoiseSchedule sched;
    SamplerConfig sampler;
    bool use_slider = false;
    int replan_every = 1;
    double eta_scale = 1.0;
};

// Samples a state plan inpainted on the current state. Row 0 equals s_t.
MatX plan_states(const Planner& p, const VecX& s_t, const VecX& omega, Rng& rng);

// One closed-loop action: plan, then invert the first transition. plan_out,
// when given, receives the sampled plan.
double plan_action(const Planner& p, const VecX& s_t, const VecX& omega, Rng& rng,
                   MatX* plan_out = nullptr);

struct StepRecord {
    VecX state;
    double action = 0.0;
    VecX reward;
};

struct RolloutResult {
    VecX ret;
    std::vector<StepRecord> trace;
};

using Policy = std::function<double(const VecX& state, int step, Rng& rng)>;

// Closed-loop episode under an arbitrary policy.
RolloutResult rollout_policy(const EnvConfig& env, const Policy& policy, int episode_len,
                             Rng& rng);

// Closed-loop episode under the planner. A plan generated at step t supplies
// actions from its consecutive state pairs for min(replan_every, H-1) steps
// before replanning.
RolloutResult rollout(const EnvConfig& env, const Planner& p, const VecX& omega,
                      int episode_len, Rng& rng);

}  // namespace modp

#endif
