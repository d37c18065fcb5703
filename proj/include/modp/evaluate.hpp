// SPDX-License-Identifier: MIT
#ifndef MODP_EVALUATE_HPP
#define MODP_EVALUATE_HPP

#include <string>

#include "modp/metrics.hpp"
#include "modp/normalize.hpp"
#include "modp/planner.hpp"

namespace modp {

struct SolutionPoint {
    VecX omega;
    VecX ret;
    bool is_ood = false;
    bool dominated = false;
};

struct SolutionSet {
    std::vector<SolutionPoint> points;
};

// Uniform preference grid on the 2-simplex; a single point sits at the center.
std::vector<VecX> preference_grid(int n_prefs);

// Mean squared distance between achieved returns and the predictor's estimate
// at the same preference. Empty input gives 0.
double return_deviation(const std::vector<SolutionPoint>& pts, const TrainedPredictor& psi);

// One full episode for a given preference; owns its RNG stream derived from
// the per-preference seed.
using SweepPolicy = std::function<RolloutResult(const VecX& omega, uint64_t seed)>;

struct SweepConfig {
    int n_prefs = 51;
    uint64_t seed = 0;
    int threads = 4;
    VecX ref_point = VecX::Zero(2);
};

struct SweepResult {
    SolutionSet solutions;
    std::vector<std::vector<StepRecord>> traces;  // aligned with solutions
    MatX front;                                   // non-dominated achieved returns
    double hv = 0.0;
    double sp = 0.0;
    double rd = 0.0;
    int hv_excluded = 0;
};

// Rolls out the policy across the preference grid (worker threads, one
// deterministic RNG stream per preference), filters the achieved returns, and
// computes the metrics. RD covers only the preferences falling in regions the
// slice removed; it is 0 when no preference is flagged or no predictor is
// given.
SweepResult evaluate_sweep(const SweepPolicy& policy, const SliceSpec& slice,
                           const TrainedPredictor* psi_eval, const SweepConfig& cfg);

// Report artifacts.
void write_sweep_csv(const std::string& path, const SweepResult& sr);
void write_summary_json(const std::string& path, const SweepResult& sr,
                        const std::string& config_digest);
void write_front_svg(const std::string& path, const SweepResult& sr,
                     const MatX& dataset_returns);
void write_trace_jsonl(const std::string& path, const SweepResult& sr, const SweepConfig& cfg,
                       const std::string& config_digest);

}  // namespace modp

#endif
