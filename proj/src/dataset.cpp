// SPDX-License-Identifier: MIT
#include "modp/dataset.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>

#include <json.hpp>

namespace modp {

using nlohmann::json;

void compute_rtg(Trajectory& traj) {
    const Eigen::Index T = traj.rewards.rows();
    traj.rtg.resize(T, traj.rewards.cols());
    VecX acc = VecX::Zero(traj.rewards.cols());
    for (Eigen::Index t = T - 1; t >= 0; --t) {
        acc += traj.rewards.row(t);
        traj.rtg.row(t) = acc;
    }
    traj.traj_rtg = traj.rtg.colwise().mean();
}

void compute_rtg(Dataset& ds) {
    for (auto& t : ds.trajs) compute_rtg(t);
}

Dataset make_dataset(const EnvConfig& env, const CollectConfig& cc, uint64_t seed) {
    Dataset ds;
    auto raw = collect_trajectories(env, cc, seed);
    ds.trajs.reserve(raw.size());
    int id = 0;
    int perturbed = 0;
    for (auto& r : raw) {
        Trajectory t;
        t.id = id++;
        t.omega = std::move(r.omega);
        t.states = std::move(r.states);
        t.actions = std::move(r.actions);
        t.rewards = std::move(r.rewards);
        t.perturbed = r.perturbed;
        perturbed += t.perturbed ? 1 : 0;
        compute_rtg(t);
        ds.trajs.push_back(std::move(t));
    }
    ds.manifest.env = env;
    ds.manifest.quality = quality_name(cc.quality);
    ds.manifest.n_traj = cc.n_traj;
    ds.manifest.seed = seed;
    ds.manifest.expert_noise = cc.expert_noise;
    ds.manifest.perturb_prob = cc.perturb_prob;
    ds.manifest.perturb_width = cc.perturb_width;
    ds.manifest.n_perturbed = perturbed;
    return ds;
}

namespace {

std::vector<int> sorted_by_omega1(const Dataset& ds) {
    std::vector<int> order(ds.trajs.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return ds.trajs[static_cast<size_t>(a)].omega(0) <
               ds.trajs[static_cast<size_t>(b)].omega(0);
    });
    return order;
}

SliceResult build_slice(const Dataset& ds, const std::vector<int>& order,
                        const std::vector<char>& remove, const std::string& kind, double m,
                        int n_regions) {
    SliceResult res;
    res.ds.manifest = ds.manifest;
    res.ds.manifest.slice.kind = kind;
    res.ds.manifest.slice.m = m;
    res.ds.manifest.slice.n_regions = n_regions;
    res.ds.manifest.slice.removed_regions.clear();

    // contiguous removed runs along the sorted preference axis become the
    // recorded out-of-distribution intervals
    size_t i = 0;
    while (i < order.size()) {
        if (!remove[i]) {
            ++i;
            continue;
        }
        size_t j = i;
        while (j + 1 < order.size() && remove[j + 1]) ++j;
        double lo = ds.trajs[static_cast<size_t>(order[i])].omega(0);
        double hi = ds.trajs[static_cast<size_t>(order[j])].omega(0);
        res.ds.manifest.slice.removed_regions.push_back({lo, hi});
        i = j + 1;
    }

    std::vector<char> removed_by_id(ds.trajs.size(), 0);
    for (size_t k = 0; k < order.size(); ++k) {
        if (remove[k]) {
            res.removed_ids.push_back(ds.trajs[static_cast<size_t>(order[k])].id);
            removed_by_id[static_cast<size_t>(order[k])] = 1;
        }
    }
    std::sort(res.removed_ids.begin(), res.removed_ids.end());
    for (size_t k = 0; k < ds.trajs.size(); ++k)
        if (!removed_by_id[k]) res.ds.trajs.push_back(ds.trajs[k]);
    res.ds.manifest.n_traj = static_cast<int>(res.ds.trajs.size());
    return res;
}

}  // namespace

SliceResult slice_shattered(const Dataset& ds, double m, int n_regions) {
    if (m < 0.0 || m >= 100.0) throw ConfigError("slice_shattered: m must be in [0, 100)");
    if (n_regions <= 0) throw ConfigError("slice_shattered: n_regions must be positive");
    const int N = static_cast<int>(ds.trajs.size());
    auto order = sorted_by_omega1(ds);
    std::vector<char> remove(static_cast<size_t>(N), 0);
    const int n_lack = static_cast<int>(std::llround(N * m / 100.0));
    const int per_region = n_lack / n_regions;
    for (int r = 0; r < n_regions; ++r) {
        int count = per_region + (r == n_regions - 1 ? n_lack - per_region * n_regions : 0);
        int center = static_cast<int>((r + 0.5) * N / n_regions);
        int lo = std::max(0, center - count / 2);
        int hi = std::min(N, lo + count);
        lo = std::max(0, hi - count);  // clip at the upper bound without shrinking
        for (int k = lo; k < hi; ++k) remove[static_cast<size_t>(k)] = 1;
    }
    return build_slice(ds, order, remove, "shattered", m, n_regions);
}

SliceResult slice_narrow(const Dataset& ds, double m) {
    if (m < 0.0 || m >= 100.0) throw ConfigError("slice_narrow: m must be in [0, 100)");
    const int N = static_cast<int>(ds.trajs.size());
    auto order = sorted_by_omega1(ds);
    std::vector<char> remove(static_cast<size_t>(N), 0);
    const int per_end = static_cast<int>(std::floor(N * m / 200.0));
    for (int k = 0; k < per_end && k < N; ++k) remove[static_cast<size_t>(k)] = 1;
    for (int k = 0; k < per_end && N - 1 - k >= 0; ++k) remove[static_cast<size_t>(N - 1 - k)] = 1;
    return build_slice(ds, order, remove, "narrow", m, 0);
}

Segment make_segment(const Trajectory& traj, int start, int horizon) {
    const int T = static_cast<int>(traj.states.rows());
    if (start < 0 || start >= T) throw ConfigError("make_segment: start out of range");
    Segment seg;
    seg.omega = traj.omega;
    seg.g = traj.g_norm;
    seg.x0.resize(horizon, traj.states.cols());
    for (int h = 0; h < horizon; ++h) {
        int t = std::min(start + h, T - 1);  // edge-pad with the final state
        seg.x0.row(h) = traj.states.row(t);
    }
    seg.next_state_index = 1;
    return seg;
}

std::vector<Segment> batch_segments(const Dataset& ds, int horizon, int batch_size, Rng& rng) {
    if (ds.trajs.empty()) throw ConfigError("batch_segments: empty dataset");
    if (horizon < 2) throw ConfigError("batch_segments: horizon must be >= 2");
    std::vector<Segment> out;
    out.reserve(static_cast<size_t>(batch_size));
    for (int i = 0; i < batch_size; ++i) {
        int ti = rng.uniform_int(0, static_cast<int>(ds.trajs.size()) - 1);
        const Trajectory& traj = ds.trajs[static_cast<size_t>(ti)];
        int max_start = std::max(0, static_cast<int>(traj.states.rows()) - horizon);
        int start = rng.uniform_int(0, max_start);
        if (traj.g_norm.size() == 0)
            throw ConfigError("batch_segments: dataset has no normalized returns");
        out.push_back(make_segment(traj, start, horizon));
    }
    return out;
}

MatX StateStats::normalize_rows(const MatX& s) const {
    return ((s.rowwise() - mean).array().rowwise() / std.array()).matrix();
}

MatX StateStats::denormalize_rows(const MatX& s) const {
    return (s.array().rowwise() * std.array()).matrix().rowwise() + mean;
}

StateStats compute_state_stats(const Dataset& ds) {
    if (ds.trajs.empty()) throw ConfigError("compute_state_stats: empty dataset");
    const Eigen::Index sd = ds.trajs.front().states.cols();
    StateStats st;
    st.mean = VecX::Zero(sd);
    int64_t n = 0;
    for (const auto& t : ds.trajs) {
        st.mean += t.states.colwise().sum();
        n += t.states.rows();
    }
    st.mean /= static_cast<double>(n);
    VecX var = VecX::Zero(sd);
    for (const auto& t : ds.trajs)
        var += (t.states.rowwise() - st.mean).array().square().colwise().sum().matrix();
    var /= static_cast<double>(n);
    st.std = var.array().sqrt().max(1e-8).matrix();
    return st;
}

MatX dataset_preferences(const Dataset& ds) {
    MatX out(static_cast<Eigen::Index>(ds.trajs.size()), ds.n_obj());
    for (size_t i = 0; i < ds.trajs.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = ds.trajs[i].omega;
    return out;
}

std::vector<VecX> preference_list(const Dataset& ds) {
    std::vector<VecX> out;
    out.reserve(ds.trajs.size());
    for (const Trajectory& t : ds.trajs) out.push_back(t.omega);
    return out;
}

MatX dataset_episode_returns(const Dataset& ds) {
    MatX out(static_cast<Eigen::Index>(ds.trajs.size()), ds.n_obj());
    for (size_t i = 0; i < ds.trajs.size(); ++i)
        out.row(static_cast<Eigen::Index>(i)) = ds.trajs[i].episode_return();
    return out;
}

bool preference_is_ood(const SliceSpec& slice, const VecX& omega) {
    for (const auto& r : slice.removed_regions)
        if (omega(0) >= r[0] && omega(0) <= r[1]) return true;
    return false;
}

namespace {

json mat_to_json(const MatX& m) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        json row = json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

MatX mat_from_json(const json& rows) {
    if (rows.empty()) return MatX(0, 0);
    MatX m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows[0].size()));
    for (Eigen::Index i = 0; i < m.rows(); ++i)
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)].get<double>();
    return m;
}

json manifest_to_json(const Manifest& m) {
    json j;
    j["format"] = m.format;
    j["env"] = {{"episode_len", m.env.episode_len},
                {"n_objectives", m.env.n_objectives},
                {"state_dim", m.env.state_dim},
                {"action_dim", m.env.action_dim},
                {"drag", m.env.drag},
                {"gain", m.env.gain}};
    j["quality"] = m.quality;
    j["n_traj"] = m.n_traj;
    j["seed"] = m.seed;
    j["expert_noise"] = m.expert_noise;
    j["perturb_prob"] = m.perturb_prob;
    j["perturb_width"] = m.perturb_width;
    j["n_perturbed"] = m.n_perturbed;
    j["slice"] = {{"kind", m.slice.kind},
                  {"m", m.slice.m},
                  {"n_regions", m.slice.n_regions},
                  {"removed_regions", m.slice.removed_regions}};
    j["normalization"] = json::parse(m.normalization_json);
    j["config_digest"] = m.config_digest;
    return j;
}

Manifest manifest_from_json(const json& j) {
    Manifest m;
    m.format = j.at("format").get<std::string>();
    if (m.format != "modp-dataset-v1") throw DataError("unsupported dataset format: " + m.format);
    const json& e = j.at("env");
    m.env.episode_len = e.at("episode_len").get<int>();
    m.env.n_objectives = e.at("n_objectives").get<int>();
    m.env.state_dim = e.at("state_dim").get<int>();
    m.env.action_dim = e.at("action_dim").get<int>();
    m.env.drag = e.at("drag").get<double>();
    m.env.gain = e.at("gain").get<double>();
    m.quality = j.at("quality").get<std::string>();
    m.n_traj = j.at("n_traj").get<int>();
    m.seed = j.at("seed").get<uint64_t>();
    m.expert_noise = j.at("expert_noise").get<double>();
    m.perturb_prob = j.at("perturb_prob").get<double>();
    m.perturb_width = j.at("perturb_width").get<double>();
    m.n_perturbed = j.at("n_perturbed").get<int>();
    const json& s = j.at("slice");
    m.slice.kind = s.at("kind").get<std::string>();
    m.slice.m = s.at("m").get<double>();
    m.slice.n_regions = s.at("n_regions").get<int>();
    for (const auto& r : s.at("removed_regions"))
        m.slice.removed_regions.push_back({r[0].get<double>(), r[1].get<double>()});
    m.normalization_json = j.at("normalization").dump();
    m.config_digest = j.at("config_digest").get<std::string>();
    return m;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::ofstream out(dir + "/dataset.jsonl");
    if (!out) throw DataError("cannot write " + dir + "/dataset.jsonl");
    for (const auto& t : ds.trajs) {
        json j;
        j["omega"] = std::vector<double>(t.omega.data(), t.omega.data() + t.omega.size());
        j["states"] = mat_to_json(t.states);
        j["actions"] = mat_to_json(t.actions);
        j["rewards"] = mat_to_json(t.rewards);
        j["perturbed"] = t.perturbed;
        out << j.dump() << "\n";
    }
    std::ofstream mf(dir + "/dataset.manifest.json");
    if (!mf) throw DataError("cannot write " + dir + "/dataset.manifest.json");
    mf << manifest_to_json(ds.manifest).dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
    std::ifstream mf(dir + "/dataset.manifest.json");
    if (!mf) throw MissingArtifact("missing dataset manifest: " + dir + "/dataset.manifest.json");
    json mj = json::parse(mf);
    Dataset ds;
    ds.manifest = manifest_from_json(mj);

    std::ifstream in(dir + "/dataset.jsonl");
    if (!in) throw MissingArtifact("missing dataset file: " + dir + "/dataset.jsonl");
    std::string line;
    int id = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json j = json::parse(line);
        Trajectory t;
        t.id = id++;
        auto om = j.at("omega").get<std::vector<double>>();
        t.omega = Eigen::Map<const VecX>(om.data(), static_cast<Eigen::Index>(om.size()));
        t.states = mat_from_json(j.at("states"));
        t.actions = mat_from_json(j.at("actions"));
        t.rewards = mat_from_json(j.at("rewards"));
        t.perturbed = j.value("perturbed", false);
        compute_rtg(t);
        ds.trajs.push_back(std::move(t));
    }
    return ds;
}

std::string dataset_digest(const std::string& dir) {
    std::ifstream in(dir + "/dataset.jsonl", std::ios::binary);
    if (!in) throw MissingArtifact("missing dataset file: " + dir + "/dataset.jsonl");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return fnv1a_hex(bytes);
}

}  // namespace modp
