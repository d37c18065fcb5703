// SPDX-License-Identifier: MIT
#include "modp/normalize.hpp"

#include <iostream>

#include <json.hpp>

#include "modp/metrics.hpp"

namespace modp {

using nlohmann::json;

namespace {

std::vector<double> vec_to_std(const VecX& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

VecX vec_from_std(const std::vector<double>& v) {
    return Eigen::Map<const VecX>(v.data(), static_cast<Eigen::Index>(v.size()));
}

}  // namespace

std::string NormParams::to_json() const {
    json j;
    j["kind"] = kind;
    if (kind == "global") {
        j["g_min"] = vec_to_std(g_min);
        j["g_max"] = vec_to_std(g_max);
    } else if (kind == "npn") {
        j["epsilon"] = epsilon;
    } else if (kind == "ppn") {
        j["predictor_digest"] = predictor_digest;
        j["predictor_config"] = json::parse(predictor_config.empty() ? "{}" : predictor_config);
    }
    return j.dump();
}

NormParams NormParams::from_json(const std::string& text) {
    json j = json::parse(text);
    NormParams p;
    p.kind = j.at("kind").get<std::string>();
    if (p.kind == "global") {
        p.g_min = vec_from_std(j.at("g_min").get<std::vector<double>>());
        p.g_max = vec_from_std(j.at("g_max").get<std::vector<double>>());
    } else if (p.kind == "npn") {
        p.epsilon = j.at("epsilon").get<double>();
    } else if (p.kind == "ppn") {
        p.predictor_digest = j.at("predictor_digest").get<std::string>();
        p.predictor_config = j.at("predictor_config").dump();
    } else {
        throw ConfigError("unknown normalization kind: " + p.kind);
    }
    return p;
}

NormParams normalize_global(Dataset& ds) {
    if (ds.trajs.empty()) throw DataError("normalize_global: empty dataset");
    const int n = ds.n_obj();
    VecX lo = ds.trajs.front().traj_rtg;
    VecX hi = lo;
    for (const auto& t : ds.trajs) {
        lo = lo.cwiseMin(t.traj_rtg);
        hi = hi.cwiseMax(t.traj_rtg);
    }
    for (int c = 0; c < n; ++c) {
        if (hi(c) == lo(c))
            std::cerr << "warning: objective " << c
                      << " has equal extrema; normalized values set to 0\n";
    }
    for (auto& t : ds.trajs) {
        t.g_norm = VecX::Zero(n);
        for (int c = 0; c < n; ++c)
            if (hi(c) != lo(c)) t.g_norm(c) = (t.traj_rtg(c) - lo(c)) / (hi(c) - lo(c));
    }
    NormParams p;
    p.kind = "global";
    p.g_min = lo;
    p.g_max = hi;
    ds.manifest.normalization_json = p.to_json();
    return p;
}

NormParams normalize_npn(Dataset& ds, double epsilon) {
    if (ds.trajs.empty()) throw DataError("normalize_npn: empty dataset");
    if (epsilon <= 0.0) throw ConfigError("normalize_npn: epsilon must be positive");
    const int n = ds.n_obj();
    const size_t N = ds.trajs.size();
    bool warned = false;
    for (size_t i = 0; i < N; ++i) {
        Trajectory& t = ds.trajs[i];
        VecX lo = t.traj_rtg;
        VecX hi = t.traj_rtg;
        for (size_t j2 = 0; j2 < N; ++j2) {
            if ((ds.trajs[j2].omega - t.omega).norm() <= epsilon) {
                lo = lo.cwiseMin(ds.trajs[j2].traj_rtg);
                hi = hi.cwiseMax(ds.trajs[j2].traj_rtg);
            }
        }
        t.g_norm = VecX::Constant(n, 0.5);
        for (int c = 0; c < n; ++c) {
            if (hi(c) != lo(c)) {
                t.g_norm(c) = (t.traj_rtg(c) - lo(c)) / (hi(c) - lo(c));
            } else if (!warned) {
                std::cerr << "warning: flat neighborhood extrema; "
                             "normalized value set to 0.5\n";
                warned = true;
            }
        }
    }
    NormParams p;
    p.kind = "npn";
    p.epsilon = epsilon;
    ds.manifest.normalization_json = p.to_json();
    return p;
}

std::vector<int> pareto_subset(const Dataset& ds) {
    std::vector<int> keep;
    const size_t N = ds.trajs.size();
    for (size_t i = 0; i < N; ++i) {
        bool dominated = false;
        for (size_t j = 0; j < N && !dominated; ++j) {
            if (j == i) continue;
            dominated = dominates<Real>(ds.trajs[j].traj_rtg, ds.trajs[i].traj_rtg);
        }
        if (!dominated) keep.push_back(static_cast<int>(i));
    }
    return keep;
}

TrainedPredictor train_return_predictor(const Dataset& ds, const PredictorTrainConfig& cfg) {
    if (ds.trajs.empty()) throw DataError("train_return_predictor: empty dataset");
    std::vector<int> subset = pareto_subset(ds);
    if (subset.size() < 2)
        throw DataError("train_return_predictor: non-dominated subset smaller than 2");

    const int n = ds.n_obj();
    MatX omegas(static_cast<Eigen::Index>(subset.size()), n);
    MatX targets(static_cast<Eigen::Index>(subset.size()), n);
    for (size_t k = 0; k < subset.size(); ++k) {
        omegas.row(static_cast<Eigen::Index>(k)) = ds.trajs[static_cast<size_t>(subset[k])].omega;
        targets.row(static_cast<Eigen::Index>(k)) =
            ds.trajs[static_cast<size_t>(subset[k])].traj_rtg;
    }

    TrainedPredictor tp;
    tp.cfg = cfg.net;
    tp.cfg.n_obj = n;
    ReturnPredictor<Real> net(tp.cfg);
    Rng rng(cfg.seed);
    tp.params = net.init_params(rng);
    AdamW<Real> opt;
    opt.lr = cfg.lr;

    const int rows = static_cast<int>(subset.size());
    const int B = std::min(cfg.batch, rows);
    for (int step = 0; step < cfg.steps; ++step) {
        MatX om(B, n), tg(B, n);
        for (int b = 0; b < B; ++b) {
            int r = rng.uniform_int(0, rows - 1);
            om.row(b) = omegas.row(r);
            tg.row(b) = targets.row(r);
        }
        Tape<Real> tape;
        Bound<Real> bound = bind(tape, tp.params);
        Var<Real> loss = mse(net.forward(tape, bound, input(tape, om)), tg);
        tape.backward(loss.id);
        const double lv = loss.val()(0, 0);
        if (!std::isfinite(lv)) throw TrainingDivergence("return predictor loss diverged");
        tp.loss_log.push_back(lv);
        opt.step(tp.params, collect_grads(tape, bound));
    }
    return tp;
}

NormParams normalize_ppn(Dataset& ds, const TrainedPredictor& predictor) {
    if (ds.trajs.empty()) throw DataError("normalize_ppn: empty dataset");
    const int n = ds.n_obj();
    MatX preds = predictor.predict(dataset_preferences(ds));
    for (Eigen::Index i = 0; i < preds.rows(); ++i) {
        if ((preds.row(i).array() <= 0.0).any())
            throw DataError("normalize_ppn: predictor output non-positive for trajectory " +
                            std::to_string(i));
        Trajectory& t = ds.trajs[static_cast<size_t>(i)];
        t.g_norm = VecX(n);
        for (int c = 0; c < n; ++c) t.g_norm(c) = t.traj_rtg(c) / preds(i, c);
    }
    NormParams p;
    p.kind = "ppn";
    VecX flat = predictor.params.flatten();
    p.predictor_digest = fnv1a_hex(std::string_view(
        reinterpret_cast<const char*>(flat.data()), sizeof(Real) * static_cast<size_t>(flat.size())));
    {
        nlohmann::json cj;
        cj["n_obj"] = predictor.cfg.n_obj;
        cj["hidden"] = predictor.cfg.hidden;
        p.predictor_config = cj.dump();
    }
    ds.manifest.normalization_json = p.to_json();
    return p;
}

double mass_near_ones(const Dataset& ds, double tol) {
    if (ds.trajs.empty()) return 0.0;
    int hit = 0;
    for (const auto& t : ds.trajs) {
        if (t.g_norm.size() == 0) throw DataError("mass_near_ones: dataset not normalized");
        if ((t.g_norm.array() - 1.0).abs().maxCoeff() <= tol) ++hit;
    }
    return static_cast<double>(hit) / static_cast<double>(ds.trajs.size());
}

}  // namespace modp
