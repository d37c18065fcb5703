// SPDX-License-Identifier: MIT
#ifndef MODP_NORMALIZE_HPP
#define MODP_NORMALIZE_HPP

#include "modp/dataset.hpp"
#include "modp/nets.hpp"

namespace modp {

// Parameters of the mapping applied to trajectory returns, recorded so that
// inference reproduces the exact transform used at training time.
struct NormParams {
    std::string kind = "global";  // global | ppn | npn
    VecX g_min;                   // global extrema
    VecX g_max;
    double epsilon = 0.0;            // npn neighborhood radius
    std::string predictor_digest;    // ppn checkpoint reference
    std::string predictor_config;    // ppn network config as JSON

    std::string to_json() const;
    static NormParams from_json(const std::string& text);
};

// Componentwise min-max over the whole dataset. Degenerate objectives
// (max = min) map to 0 with a warning on stderr.
NormParams normalize_global(Dataset& ds);

// Componentwise min-max over each trajectory's preference neighborhood
// B_eps(tau) = { tau' : ||omega' - omega||_2 <= eps }. Degenerate components
// map to 0.5 with a warning. Output always lies in [0, 1]^n.
NormParams normalize_npn(Dataset& ds, double epsilon);

struct PredictorTrainConfig {
    int steps = 4000;
    int batch = 64;
    double lr = 0.01;
    uint64_t seed = 0;
    PredictorConfig net;
};

struct TrainedPredictor {
    PredictorConfig cfg;
    ParamSet<Real> params;
    std::vector<double> loss_log;

    MatX predict(const MatX& omega) const {
        return ReturnPredictor<Real>(cfg).predict(params, omega);
    }
};

// Fits the best-achievable-return regressor on the non-dominated subset of
// (omega, traj_rtg) pairs.
TrainedPredictor train_return_predictor(const Dataset& ds, const PredictorTrainConfig& cfg);

// Componentwise division by the predicted best return for the trajectory's
// preference. Values may exceed 1 when the predictor under-predicts; they are
// intentionally not clipped.
NormParams normalize_ppn(Dataset& ds, const TrainedPredictor& predictor);

// Indices of trajectories whose traj_rtg is not strictly dominated.
std::vector<int> pareto_subset(const Dataset& ds);

// Fraction of trajectories whose normalized return is within L-infinity
// distance `tol` of the all-ones vector.
double mass_near_ones(const Dataset& ds, double tol = 0.1);

}  // namespace modp

#endif
