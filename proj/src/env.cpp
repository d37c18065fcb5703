// SPDX-License-Identifier: MIT
#include "modp/env.hpp"

#include <algorithm>

namespace modp {

StepResult env_step(const EnvConfig& cfg, const VecX& state, double action) {
    if (state.size() != 2) throw ConfigError("env_step: state must be (position, velocity)");
    if (action < -1.0 || action > 1.0 || !std::isfinite(action))
        throw DataError("env_step: action outside [-1, 1]");
    double v = std::clamp(cfg.drag * state(1) + cfg.gain * action, -1.0, 1.0);
    StepResult out;
    out.state = VecX(2);
    out.state << state(0) + v, v;
    out.reward = VecX(2);
    out.reward << v, 1.0 - action * action;
    return out;
}

double expert_action(const VecX& omega) {
    if (omega.size() != 2) throw ConfigError("expert_action: two objectives expected");
    if (omega(1) == 0.0) return 1.0;
    return std::clamp(omega(0) / (2.0 * omega(1)), 0.0, 1.0);
}

VecX sample_preference(Rng& rng, int n_obj) {
    if (n_obj < 2) throw ConfigError("sample_preference: need at least two objectives");
    if (n_obj == 2) {
        double w = rng.uniform();
        VecX out(2);
        out << w, 1.0 - w;
        return out;
    }
    // sorted uniform gaps give a uniform simplex sample for general n
    std::vector<double> cuts(static_cast<size_t>(n_obj) - 1);
    for (auto& c : cuts) c = rng.uniform();
    std::sort(cuts.begin(), cuts.end());
    VecX out(n_obj);
    double prev = 0.0;
    for (int i = 0; i < n_obj - 1; ++i) {
        out(i) = cuts[static_cast<size_t>(i)] - prev;
        prev = cuts[static_cast<size_t>(i)];
    }
    out(n_obj - 1) = 1.0 - prev;
    return out;
}

MatX oracle_front(const EnvConfig& cfg, int resolution) {
    if (resolution < 2) throw ConfigError("oracle_front: resolution must be >= 2");
    MatX returns(resolution, cfg.n_objectives);
    for (int i = 0; i < resolution; ++i) {
        double a = static_cast<double>(i) / (resolution - 1);
        VecX s = env_reset(cfg);
        VecX total = VecX::Zero(cfg.n_objectives);
        for (int t = 0; t < cfg.episode_len; ++t) {
            StepResult r = env_step(cfg, s, a);
            s = r.state;
            total += r.reward;
        }
        returns.row(i) = total;
    }
    // constant-action returns are mutually non-dominated here, but filter anyway
    std::vector<int> keep;
    for (int i = 0; i < resolution; ++i) {
        bool dominated = false;
        for (int j = 0; j < resolution && !dominated; ++j) {
            if (j == i) continue;
            dominated = (returns.row(j).array() > returns.row(i).array()).all();
        }
        if (!dominated) keep.push_back(i);
    }
    MatX out(static_cast<Eigen::Index>(keep.size()), cfg.n_objectives);
    for (size_t k = 0; k < keep.size(); ++k) out.row(static_cast<Eigen::Index>(k)) = returns.row(keep[k]);
    return out;
}

namespace {

VecX perturb_preference(Rng& rng, const VecX& omega, double width) {
    double shift = rng.uniform(-width / 2.0, width / 2.0);
    double w = std::clamp(omega(0) + shift, 0.0, 1.0);
    VecX out(2);
    out << w, 1.0 - w;
    return out;
}

}  // namespace

std::vector<RawTrajectory> collect_trajectories(const EnvConfig& env, const CollectConfig& cc,
                                                uint64_t seed) {
    if (cc.n_traj < 0) throw ConfigError("collect: n_traj must be non-negative");
    std::vector<RawTrajectory> out;
    out.reserve(static_cast<size_t>(cc.n_traj));
    for (int i = 0; i < cc.n_traj; ++i) {
        Rng rng(splitmix64(seed) ^ splitmix64(static_cast<uint64_t>(i) + 1));
        RawTrajectory traj;
        traj.omega = sample_preference(rng, env.n_objectives);
        VecX acting = traj.omega;
        if (cc.quality == Quality::Amateur && rng.uniform() < cc.perturb_prob) {
            acting = perturb_preference(rng, traj.omega, cc.perturb_width);
            traj.perturbed = true;
        }
        const double a_star = expert_action(acting);
        const int T = env.episode_len;
        traj.states.resize(T, env.state_dim);
        traj.actions.resize(T, env.action_dim);
        traj.rewards.resize(T, env.n_objectives);
        VecX s = env_reset(env);
        for (int t = 0; t < T; ++t) {
            double a = std::clamp(a_star + rng.normal(0.0, cc.expert_noise), -1.0, 1.0);
            traj.states.row(t) = s;
            traj.actions(t, 0) = a;
            StepResult r = env_step(env, s, a);
            traj.rewards.row(t) = r.reward;
            s = r.state;
        }
        out.push_back(std::move(traj));
    }
    return out;
}

}  // namespace modp
