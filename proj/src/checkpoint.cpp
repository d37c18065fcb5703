// SPDX-License-Identifier: MIT
#include "modp/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include <json.hpp>

namespace modp {

using nlohmann::json;

namespace {

json mat_to_b64(const std::string& name, const MatX& m) {
    json j;
    j["name"] = name;
    j["rows"] = m.rows();
    j["cols"] = m.cols();
    j["b64"] = base64_encode(reinterpret_cast<const unsigned char*>(m.data()),
                             static_cast<size_t>(m.size()) * sizeof(double));
    return j;
}

MatX mat_from_b64(const json& j) {
    MatX m(j.at("rows").get<Eigen::Index>(), j.at("cols").get<Eigen::Index>());
    auto bytes = base64_decode(j.at("b64").get<std::string>());
    if (bytes.size() != static_cast<size_t>(m.size()) * sizeof(double))
        throw DataError("checkpoint: parameter byte count mismatch for " +
                        j.at("name").get<std::string>());
    std::memcpy(m.data(), bytes.data(), bytes.size());
    return m;
}

json params_to_json(const ParamSet<Real>& ps) {
    json arr = json::array();
    for (size_t i = 0; i < ps.size(); ++i) arr.push_back(mat_to_b64(ps.names[i], ps.values[i]));
    return arr;
}

ParamSet<Real> params_from_json(const json& arr) {
    ParamSet<Real> ps;
    for (const auto& j : arr) {
        MatX m = mat_from_b64(j);
        ps.add(j.at("name").get<std::string>(), m.rows(), m.cols()) = m;
    }
    return ps;
}

}  // namespace

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
    json j;
    j["format"] = "modp-ckpt-v1";
    j["kind"] = ck.kind;
    j["config"] = json::parse(ck.config_json);
    j["extra"] = json::parse(ck.extra_json);
    j["params"] = params_to_json(ck.params);
    if (ck.ema) j["ema"] = params_to_json(*ck.ema);
    if (ck.opt_step > 0) {
        json opt;
        opt["step"] = ck.opt_step;
        json m = json::array(), v = json::array();
        for (size_t i = 0; i < ck.opt_m.size(); ++i) {
            m.push_back(mat_to_b64(ck.params.names[i], ck.opt_m[i]));
            v.push_back(mat_to_b64(ck.params.names[i], ck.opt_v[i]));
        }
        opt["m"] = std::move(m);
        opt["v"] = std::move(v);
        j["opt"] = std::move(opt);
    }
    j["rng"] = ck.rng_state;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write checkpoint: " + path);
    out << j.dump(2) << "\n";
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("missing checkpoint: " + path);
    json j = json::parse(in);
    if (j.at("format").get<std::string>() != "modp-ckpt-v1")
        throw DataError("unsupported checkpoint format in " + path);
    Checkpoint ck;
    ck.kind = j.at("kind").get<std::string>();
    ck.config_json = j.at("config").dump();
    ck.extra_json = j.at("extra").dump();
    ck.params = params_from_json(j.at("params"));
    if (j.contains("ema")) ck.ema = params_from_json(j.at("ema"));
    if (j.contains("opt")) {
        ck.opt_step = j["opt"].at("step").get<int64_t>();
        for (const auto& m : j["opt"].at("m")) ck.opt_m.push_back(mat_from_b64(m));
        for (const auto& v : j["opt"].at("v")) ck.opt_v.push_back(mat_from_b64(v));
    }
    ck.rng_state = j.at("rng").get<std::string>();
    return ck;
}

std::string file_digest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("missing file: " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a_hex(bytes);
}

}  // namespace modp
