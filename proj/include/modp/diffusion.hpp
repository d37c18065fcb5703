// SPDX-License-Identifier: MIT
#ifndef MODP_DIFFUSION_HPP
#define MODP_DIFFUSION_HPP

#include <functional>
#include <optional>

#include "modp/dataset.hpp"
#include "modp/nets.hpp"
#include "modp/schedule.hpp"

namespace modp {

struct SamplerConfig {
    int steps = 10;
    double guidance_w = 1.5;
    double temperature = 0.5;
};

// Forward marginal: x^t = alpha(t) x0 + sigma(t) eps.
MatX add_noise(const NoiseSchedule& sched, const MatX& x0, double t, const MatX& eps);

// One training batch in tensor form. Rows of x_t/eps/weight stack B windows of
// H state rows each; cond rows that were masked hold the all-zero null token.
struct LossBatch {
    MatX x_t;
    VecX t;
    MatX cond;
    MatX eps;
    MatX weight;
};

// Draws per-sample (t, eps, mask) and assembles the batch. Segment windows
// must already be in normalized state units.
LossBatch make_loss_batch(const NoiseSchedule& sched, const std::vector<Segment>& segs,
                          double mask_prob, double next_state_weight, Rng& rng);

// Mean over elements of weight (*) (eps_hat - eps)^2.
Var<Real> diffusion_loss(Tape<Real>& tape, const Bound<Real>& bound, const Denoiser<Real>& net,
                         const LossBatch& batch);

struct DiffusionTrainConfig {
    DenoiserConfig net;
    int grad_steps = 20000;
    int batch = 64;
    double lr = 2e-4;
    double weight_decay = 1e-5;
    double ema_rate = 0.995;
    double mask_prob = 0.2;
    double next_state_weight = 10.0;
    uint64_t seed = 0;
};

struct TrainedDenoiser {
    DenoiserConfig cfg;
    ParamSet<Real> params;      // EMA snapshot used for inference
    ParamSet<Real> raw_params;  // last optimizer iterate
    std::vector<double> loss_log;
};

TrainedDenoiser train_diffusion(const Dataset& ds, const StateStats& stats,
                                const DiffusionTrainConfig& cfg);

// Classifier-free guidance: (1+w) * eps(x,t,cond) - w * eps(x,t,null).
MatX cfg_noise(const Denoiser<Real>& net, const ParamSet<Real>& params, const MatX& x_t,
               double t, const VecX& cond, double w);

// Gradient of the classifier score -||c_hat(x,t) - cond||^2 with respect to x.
MatX classifier_grad(const GuidanceClassifier<Real>& cls, const ParamSet<Real>& phi,
                     const MatX& x_t, double t, const VecX& cond);

// Classifier guidance: eps(x,t,null) - w * sigma(t) * grad_x score.
MatX cg_noise(const Denoiser<Real>& net, const ParamSet<Real>& theta,
              const GuidanceClassifier<Real>& cls, const ParamSet<Real>& phi,
              const NoiseSchedule& sched, const MatX& x_t, double t, const VecX& cond,
              double w);

// Noise prediction used by the solver at state x and time t (step index given
// for schedule-dependent conditioning).
using NoiseFn = std::function<MatX(const MatX& x, double t, int step)>;
// Mutation applied to x after the solver update to time t_next.
using PostStep = std::function<void(MatX& x, double t_next, int step)>;

// DDIM loop over the uniform grid kappa_i = i/S from 1 down to 0, in
// normalized state units. The prior draw is scaled by `temperature`; when
// fixed_s0_norm is set, row 0 is pinned to alpha(t) s0 + sigma(t) nu after
// every update, with nu the prior draw's first row.
MatX ddim_core(const NoiseSchedule& sched, const SamplerConfig& sc, int horizon, int state_dim,
               const NoiseFn& noise_fn, Rng& rng,
               const std::optional<VecX>& fixed_s0_norm = std::nullopt,
               const PostStep& post_step = nullptr);

// Runs ddim_core under an arbitrary noise prediction and maps the result back
// to environment units, inpainting fixed_s0 (environment units) when given.
MatX sample_with_noise_fn(const NoiseSchedule& sched, const SamplerConfig& sc,
                          const StateStats& stats, int horizon, int state_dim,
                          const NoiseFn& noise_fn, const std::optional<VecX>& fixed_s0,
                          Rng& rng);

// Full conditional sampler: runs ddim_core with CFG noise from cond = [omega,
// g], then maps back to environment units. A provided fixed_s0 (environment
// units) is inpainted during sampling and written back verbatim to row 0.
MatX ddim_sample(const Denoiser<Real>& net, const ParamSet<Real>& params,
                 const NoiseSchedule& sched, const SamplerConfig& sc, const StateStats& stats,
                 const VecX& omega, const VecX& g, const std::optional<VecX>& fixed_s0,
                 Rng& rng);

}  // namespace modp

#endif
