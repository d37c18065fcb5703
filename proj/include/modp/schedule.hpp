// SPDX-License-Identifier: MIT
#ifndef MODP_SCHEDULE_HPP
#define MODP_SCHEDULE_HPP

#include "modp/common.hpp"

namespace modp {

// Continuous-time variance-preserving schedule with a linear beta ramp:
// alpha(t) = exp(-t^2 (beta_max - beta_min)/4 - t beta_min / 2),
// sigma(t) = sqrt(1 - alpha(t)^2), so alpha(0) = 1 and sigma(0) = 0 exactly.
struct NoiseSchedule {
    double beta_min = 0.1;
    double beta_max = 20.0;

    double alpha(double t) const {
        return std::exp(-0.25 * t * t * (beta_max - beta_min) - 0.5 * t * beta_min);
    }

    double sigma(double t) const {
        double a = alpha(t);
        return std::sqrt(std::max(0.0, 1.0 - a * a));
    }
};

}  // namespace modp

#endif
