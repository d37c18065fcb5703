// SPDX-License-Identifier: MIT
#include "modp/planner.hpp"

#include <string>

namespace modp {

MatX TrainedInvDyn::predict(const MatX& s_pair) const {
    const Eigen::Index sd = stats.mean.size();
    MatX z(s_pair.rows(), s_pair.cols());
    z.leftCols(sd) = stats.normalize_rows(s_pair.leftCols(sd));
    z.rightCols(sd) = stats.normalize_rows(s_pair.rightCols(sd));
    InvDyn<Real> net(cfg);
    return net.predict(params, z);
}

namespace {

// All aligned (s_t, s_t+1, a_t) rows in the dataset, states already z-scored.
void transition_pairs(const Dataset& ds, const StateStats& stats, MatX& pairs, MatX& actions) {
    Eigen::Index total = 0;
    for (const Trajectory& t : ds.trajs) total += t.states.rows() - 1;
    if (total <= 0) throw DataError("train_inverse_dynamics: no transitions");

    const Eigen::Index sd = ds.trajs.front().states.cols();
    const Eigen::Index ad = ds.trajs.front().actions.cols();
    pairs.resize(total, 2 * sd);
    actions.resize(total, ad);
    Eigen::Index row = 0;
    for (const Trajectory& t : ds.trajs) {
        MatX z = stats.normalize_rows(t.states);
        for (Eigen::Index k = 0; k + 1 < z.rows(); ++k, ++row) {
            pairs.row(row).head(sd) = z.row(k);
            pairs.row(row).tail(sd) = z.row(k + 1);
            actions.row(row) = t.actions.row(k);
        }
    }
}

}  // namespace

TrainedInvDyn train_inverse_dynamics(const Dataset& ds, const StateStats& stats,
                                     const InvDynTrainConfig& cfg) {
    MatX pairs, actions;
    transition_pairs(ds, stats, pairs, actions);

    InvDyn<Real> net(cfg.net);
    Rng rng(cfg.seed);

    TrainedInvDyn out;
    out.cfg = cfg.net;
    out.stats = stats;
    out.params = net.init_params(rng);

    AdamW<Real> opt;
    opt.lr = cfg.lr;
    opt.weight_decay = cfg.weight_decay;

    const int n = static_cast<int>(pairs.rows());
    for (int step = 0; step < cfg.grad_steps; ++step) {
        MatX bx(cfg.batch, pairs.cols()), by(cfg.batch, actions.cols());
        for (int b = 0; b < cfg.batch; ++b) {
            const int i = rng.uniform_int(0, n - 1);
            bx.row(b) = pairs.row(i);
            by.row(b) = actions.row(i);
        }
        Tape<Real> tape;
        Bound<Real> bound = bind(tape, out.params);
        Var<Real> loss = mse(net.forward(tape, bound, input(tape, bx)), by);
        const double lv = loss.val()(0, 0);
        if (!std::isfinite(lv))
            throw TrainingDivergence("inverse dynamics loss non-finite at step " +
                                     std::to_string(step));
        out.loss_log.push_back(lv);
        tape.backward(loss.id);
        opt.step(out.params, collect_grads(tape, bound));
    }
    return out;
}

MatX plan_states(const Planner& p, const VecX& s_t, const VecX& omega, Rng& rng) {
    if (p.net.cfg.horizon < 2) throw ConfigError("plan_states: horizon must be at least 2");
    if (p.use_slider && p.theta_star)
        return sliding_sample(p.net, p.theta, *p.theta_star, p.sched, p.sampler, p.stats, omega,
                              p.dataset_prefs, s_t, rng, p.eta_scale);
    return ddim_sample(p.net, p.theta, p.sched, p.sampler, p.stats, omega,
                       VecX(VecX::Ones(omega.size())), s_t, rng);
}

double plan_action(const Planner& p, const VecX& s_t, const VecX& omega, Rng& rng,
                   MatX* plan_out) {
    MatX plan = plan_states(p, s_t, omega, rng);
    MatX pair(1, 2 * plan.cols());
    pair.row(0).head(plan.cols()) = plan.row(0);
    pair.row(0).tail(plan.cols()) = plan.row(1);
    if (plan_out) *plan_out = std::move(plan);
    return p.invdyn.predict(pair)(0, 0);
}

RolloutResult rollout_policy(const EnvConfig& env, const Policy& policy, int episode_len,
                             Rng& rng) {
    RolloutResult out;
    out.ret = VecX::Zero(env.n_objectives);
    out.trace.reserve(static_cast<size_t>(episode_len));

    VecX s = env_reset(env);
    for (int t = 0; t < episode_len; ++t) {
        StepRecord rec;
        rec.state = s;
        rec.action = policy(s, t, rng);
        StepResult sr = env_step(env, s, rec.action);
        rec.reward = sr.reward;
        out.ret += sr.reward;
        out.trace.push_back(std::move(rec));
        s = sr.state;
    }
    return out;
}

RolloutResult rollout(const EnvConfig& env, const Planner& p, const VecX& omega,
                      int episode_len, Rng& rng) {
    const int per_plan = std::min(p.replan_every, p.net.cfg.horizon - 1);
    if (per_plan < 1) throw ConfigError("rollout: replan_every must be at least 1");

    MatX plan;
    int offset = 0;
    Policy policy = [&](const VecX& s, int step, Rng& r) {
        if (step % per_plan == 0) {
            plan = plan_states(p, s, omega, r);
            offset = step;
        }
        const int j = step - offset;
        MatX pair(1, 2 * plan.cols());
        pair.row(0).head(plan.cols()) = plan.row(j);
        pair.row(0).tail(plan.cols()) = plan.row(j + 1);
        return p.invdyn.predict(pair)(0, 0);
    };
    return rollout_policy(env, policy, episode_len, rng);
}

}  // namespace modp
