// SPDX-License-Identifier: MIT
#ifndef MODP_CHECKPOINT_HPP
#define MODP_CHECKPOINT_HPP

#include <optional>

#include "modp/params.hpp"

namespace modp {

// Self-describing training artifact. Parameter data is stored as base64 of
// raw 64-bit values so save/load round-trips bit-exactly.
struct Checkpoint {
    std::string kind;
    std::string config_json = "{}";  // network configuration
    std::string extra_json = "{}";   // run metadata: digests, stats, normalization
    ParamSet<Real> params;
    std::optional<ParamSet<Real>> ema;
    int64_t opt_step = 0;
    std::vector<MatX> opt_m;
    std::vector<MatX> opt_v;
    std::string rng_state;
};

void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::string file_digest(const std::string& path);

}  // namespace modp

#endif
