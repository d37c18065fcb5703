// SPDX-License-Identifier: MIT
#include "modp/evaluate.hpp"

#include <fstream>
#include <json.hpp>
#include <sstream>
#include <thread>

namespace modp {

std::vector<VecX> preference_grid(int n_prefs) {
    if (n_prefs < 1) throw ConfigError("preference_grid: need at least one preference");
    std::vector<VecX> grid;
    grid.reserve(static_cast<size_t>(n_prefs));
    for (int i = 0; i < n_prefs; ++i) {
        const double w1 = n_prefs == 1 ? 0.5 : static_cast<double>(i) / (n_prefs - 1);
        VecX p(2);
        p << w1, 1.0 - w1;
        grid.push_back(std::move(p));
    }
    return grid;
}

double return_deviation(const std::vector<SolutionPoint>& pts, const TrainedPredictor& psi) {
    if (pts.empty()) return 0.0;
    double total = 0.0;
    for (const SolutionPoint& p : pts) total += (p.ret - psi.predict(p.omega)).squaredNorm();
    return total / static_cast<double>(pts.size());
}

SweepResult evaluate_sweep(const SweepPolicy& policy, const SliceSpec& slice,
                           const TrainedPredictor* psi_eval, const SweepConfig& cfg) {
    const std::vector<VecX> grid = preference_grid(cfg.n_prefs);
    const int n = static_cast<int>(grid.size());

    SweepResult sr;
    sr.solutions.points.resize(static_cast<size_t>(n));
    sr.traces.resize(static_cast<size_t>(n));

    const int workers = std::max(1, std::min(cfg.threads, n));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            for (int i = w; i < n; i += workers) {
                const uint64_t seed =
                    splitmix64(cfg.seed) ^ splitmix64(static_cast<uint64_t>(i) + 1);
                RolloutResult rr = policy(grid[static_cast<size_t>(i)], seed);
                SolutionPoint& pt = sr.solutions.points[static_cast<size_t>(i)];
                pt.omega = grid[static_cast<size_t>(i)];
                pt.ret = rr.ret;
                pt.is_ood = preference_is_ood(slice, pt.omega);
                sr.traces[static_cast<size_t>(i)] = std::move(rr.trace);
            }
        });
    }
    for (auto& t : pool) t.join();

    MatX returns(n, sr.solutions.points.front().ret.size());
    for (int i = 0; i < n; ++i) returns.row(i) = sr.solutions.points[static_cast<size_t>(i)].ret;
    for (int i = 0; i < n; ++i) {
        bool dom = false;
        for (int j = 0; j < n && !dom; ++j)
            dom = dominates<Real>(returns.row(j), returns.row(i));
        sr.solutions.points[static_cast<size_t>(i)].dominated = dom;
    }

    sr.front = non_dominated(returns);
    sr.hv = hypervolume_2d(sr.front, cfg.ref_point, &sr.hv_excluded);
    sr.sp = sparsity(sr.front);

    if (psi_eval) {
        std::vector<SolutionPoint> ood;
        for (const SolutionPoint& p : sr.solutions.points)
            if (p.is_ood) ood.push_back(p);
        sr.rd = return_deviation(ood, *psi_eval);
    }
    return sr;
}

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::vector<double> to_vec(const VecX& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

}  // namespace

void write_sweep_csv(const std::string& path, const SweepResult& sr) {
    std::ofstream out(path);
    if (!out) throw DataError("write_sweep_csv: cannot open " + path);
    const Eigen::Index n = sr.solutions.points.empty()
                               ? 0
                               : sr.solutions.points.front().omega.size();
    for (Eigen::Index k = 0; k < n; ++k) out << "omega_" << k << ",";
    for (Eigen::Index k = 0; k < n; ++k) out << "return_" << k << ",";
    out << "is_ood,dominated\n";
    for (const SolutionPoint& p : sr.solutions.points) {
        for (Eigen::Index k = 0; k < n; ++k) out << fmt(p.omega(k)) << ",";
        for (Eigen::Index k = 0; k < n; ++k) out << fmt(p.ret(k)) << ",";
        out << (p.is_ood ? 1 : 0) << "," << (p.dominated ? 1 : 0) << "\n";
    }
}

void write_summary_json(const std::string& path, const SweepResult& sr,
                        const std::string& config_digest) {
    nlohmann::json j;
    j["hv"] = sr.hv;
    j["sp"] = sr.sp;
    j["rd"] = sr.rd;
    j["hv_excluded"] = sr.hv_excluded;
    j["n_prefs"] = sr.solutions.points.size();
    j["config_digest"] = config_digest;
    std::ofstream out(path);
    if (!out) throw DataError("write_summary_json: cannot open " + path);
    out << j.dump(2) << "\n";
}

void write_front_svg(const std::string& path, const SweepResult& sr,
                     const MatX& dataset_returns) {
    const double W = 640, H = 480, M = 48;
    double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
    auto widen = [&](double x, double y) {
        x_min = std::min(x_min, x);
        x_max = std::max(x_max, x);
        y_min = std::min(y_min, y);
        y_max = std::max(y_max, y);
    };
    for (Eigen::Index i = 0; i < dataset_returns.rows(); ++i)
        widen(dataset_returns(i, 0), dataset_returns(i, 1));
    for (const SolutionPoint& p : sr.solutions.points) widen(p.ret(0), p.ret(1));
    const double sx = (W - 2 * M) / (x_max - x_min), sy = (H - 2 * M) / (y_max - y_min);
    auto px = [&](double x) { return M + (x - x_min) * sx; };
    auto py = [&](double y) { return H - M - (y - y_min) * sy; };

    std::ofstream out(path);
    if (!out) throw DataError("write_front_svg: cannot open " + path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\""
        << H - M << "\" stroke=\"black\"/>\n";
    out << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M
        << "\" stroke=\"black\"/>\n";
    for (Eigen::Index i = 0; i < dataset_returns.rows(); ++i)
        out << "<circle cx=\"" << px(dataset_returns(i, 0)) << "\" cy=\""
            << py(dataset_returns(i, 1)) << "\" r=\"2\" fill=\"#bbbbbb\"/>\n";
    for (const SolutionPoint& p : sr.solutions.points)
        out << "<circle cx=\"" << px(p.ret(0)) << "\" cy=\"" << py(p.ret(1))
            << "\" r=\"3\" fill=\"" << (p.dominated ? "#4477cc" : "#cc3311") << "\"/>\n";
    out << "</svg>\n";
}

void write_trace_jsonl(const std::string& path, const SweepResult& sr, const SweepConfig& cfg,
                       const std::string& config_digest) {
    std::ofstream out(path);
    if (!out) throw DataError("write_trace_jsonl: cannot open " + path);
    for (size_t i = 0; i < sr.solutions.points.size(); ++i) {
        const SolutionPoint& p = sr.solutions.points[i];
        nlohmann::json head;
        head["omega"] = to_vec(p.omega);
        head["seed"] = splitmix64(cfg.seed) ^ splitmix64(i + 1);
        head["config_digest"] = config_digest;
        out << head.dump() << "\n";
        for (const StepRecord& rec : sr.traces[i]) {
            nlohmann::json step;
            step["state"] = to_vec(rec.state);
            step["action"] = rec.action;
            step["reward"] = to_vec(rec.reward);
            out << step.dump() << "\n";
        }
    }
}

}  // namespace modp
