// SPDX-License-Identifier: MIT
#ifndef MODP_CONFIG_HPP
#define MODP_CONFIG_HPP

#include <map>
#include <string>

#include "modp/common.hpp"

namespace modp {

// Flat key=value run configuration. Every key carries a registered default,
// so a resolved config always lists the full settings surface; keys outside
// the registry are rejected at parse time.
struct RunConfig {
    std::map<std::string, std::string> values;

    const std::string& str(const std::string& key) const;
    int geti(const std::string& key) const;
    double getd(const std::string& key) const;
    uint64_t getu(const std::string& key) const;
    VecX getv(const std::string& key) const;  // comma-separated doubles

    // Validates the key against the registry before storing.
    void set(const std::string& key, const std::string& value);
};

RunConfig default_config();

// Parses `key = value` lines. '#' starts a comment, blank lines are skipped,
// and every key must exist in the registry.
RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

// Applies one `key=value` override.
void apply_override(RunConfig& cfg, const std::string& assignment);

// Canonical serialization (sorted keys, one per line) and its digest.
std::string config_text(const RunConfig& cfg);
std::string config_digest(const RunConfig& cfg);

// Writes the canonical form to <dir>/resolved.cfg, creating the directory.
void write_resolved_config(const RunConfig& cfg, const std::string& dir);

}  // namespace modp

#endif
