// SPDX-License-Identifier: MIT
#include "modp/config.hpp"

#include <algorithm>
#include <array>
#include <cerrno>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace modp {

namespace {

struct KeyDefault {
    const char* key;
    const char* value;
};

constexpr std::array<KeyDefault, 52> kRegistry{{
    {"seed", "0"},
    {"out", "out"},

    {"env.episode_len", "32"},
    {"env.drag", "0.9"},
    {"env.gain", "0.1"},

    {"collect.n_traj", "2000"},
    {"collect.quality", "expert"},
    {"collect.expert_noise", "0.02"},
    {"collect.perturb_prob", "0.65"},
    {"collect.perturb_width", "0.3"},

    {"slice.kind", "complete"},
    {"slice.m", "30"},
    {"slice.n_regions", "3"},

    {"normalize.scheme", "npn"},
    {"normalize.epsilon", "0.1"},

    {"predictor.hidden", "64"},
    {"predictor.grad_steps", "4000"},
    {"predictor.batch", "64"},
    {"predictor.lr", "0.01"},

    {"diffusion.arch", "auto"},
    {"diffusion.horizon", "4"},
    {"diffusion.embed_dim", "64"},
    {"diffusion.n_heads", "4"},
    {"diffusion.n_blocks", "2"},
    {"diffusion.time_embed_dim", "32"},
    {"diffusion.grad_steps", "20000"},
    {"diffusion.batch", "64"},
    {"diffusion.lr", "0.0002"},
    {"diffusion.weight_decay", "0.00001"},
    {"diffusion.ema", "0.995"},
    {"diffusion.mask_prob", "0.2"},
    {"diffusion.next_state_weight", "10"},

    {"sampler.steps", "10"},
    {"sampler.guidance_w", "1.5"},
    {"sampler.temperature", "0.5"},

    {"slider.delta_max", "0.001"},
    {"slider.grad_steps", "10000"},
    {"slider.batch", "64"},
    {"slider.lr", "0.0002"},
    {"slider.weight_decay", "0.00001"},
    {"slider.ema", "0.995"},
    {"slider.eta_scale", "1.0"},
    {"slider.max_retries", "16"},

    {"invdyn.hidden", "64"},
    {"invdyn.grad_steps", "6000"},
    {"invdyn.batch", "64"},
    {"invdyn.lr", "0.001"},
    {"invdyn.weight_decay", "0.00001"},

    {"planner.replan_every", "1"},

    {"eval.n_prefs", "51"},
    {"eval.threads", "4"},
    {"eval.ref", "0,0"},
}};

bool known_key(const std::string& key) {
    return std::any_of(kRegistry.begin(), kRegistry.end(),
                       [&](const KeyDefault& kd) { return key == kd.key; });
}

std::string trim(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

}  // namespace

const std::string& RunConfig::str(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end()) throw ConfigError("unknown config key: " + key);
    return it->second;
}

int RunConfig::geti(const std::string& key) const {
    const std::string& v = str(key);
    errno = 0;
    char* end = nullptr;
    long r = std::strtol(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        throw ConfigError("config key " + key + ": expected integer, got '" + v + "'");
    return static_cast<int>(r);
}

double RunConfig::getd(const std::string& key) const {
    const std::string& v = str(key);
    errno = 0;
    char* end = nullptr;
    double r = std::strtod(v.c_str(), &end);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        throw ConfigError("config key " + key + ": expected number, got '" + v + "'");
    return r;
}

uint64_t RunConfig::getu(const std::string& key) const {
    const std::string& v = str(key);
    errno = 0;
    char* end = nullptr;
    unsigned long long r = std::strtoull(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        throw ConfigError("config key " + key + ": expected unsigned integer, got '" + v + "'");
    return static_cast<uint64_t>(r);
}

VecX RunConfig::getv(const std::string& key) const {
    const std::string& v = str(key);
    std::vector<double> parts;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        errno = 0;
        char* end = nullptr;
        double r = std::strtod(item.c_str(), &end);
        if (errno != 0 || end == item.c_str() || *end != '\0')
            throw ConfigError("config key " + key + ": expected comma-separated numbers, got '" +
                              v + "'");
        parts.push_back(r);
    }
    if (parts.empty()) throw ConfigError("config key " + key + ": empty vector value");
    return Eigen::Map<const VecX>(parts.data(), static_cast<Eigen::Index>(parts.size()));
}

void RunConfig::set(const std::string& key, const std::string& value) {
    if (!known_key(key)) throw ConfigError("unknown config key: " + key);
    values[key] = value;
}

RunConfig default_config() {
    RunConfig cfg;
    for (const auto& kd : kRegistry) cfg.values[kd.key] = kd.value;
    return cfg;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg = default_config();
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (!known_key(key))
            throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key +
                              "'");
        cfg.values[key] = value;
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("cannot open config file: " + path);
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

void apply_override(RunConfig& cfg, const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos)
        throw ConfigError("override must be key=value, got '" + assignment + "'");
    cfg.set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

std::string config_text(const RunConfig& cfg) {
    std::string out;
    for (const auto& [key, value] : cfg.values) {
        out += key;
        out += " = ";
        out += value;
        out += "\n";
    }
    return out;
}

std::string config_digest(const RunConfig& cfg) { return fnv1a_hex(config_text(cfg)); }

void write_resolved_config(const RunConfig& cfg, const std::string& dir) {
    std::filesystem::create_directories(dir);
    const std::string path = dir + "/resolved.cfg";
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path);
    out << "# digest " << config_digest(cfg) << "\n" << config_text(cfg);
}

}  // namespace modp
