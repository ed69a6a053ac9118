// SPDX-License-Identifier: Apache-2.0
//
// The two benchmark studies: the four-way path-loss prediction comparison
// (test MSE, single-sample inference latency, data quantity per Rx) and the
// pilot-reduction CSI recovery study.

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "weibench/io.hpp"

namespace weibench {

// ---------------------------------------------------------------------------
// Latency

// Single-threaded wall-clock median over `reps` single-sample calls after
// `warmup` untimed calls.
template <typename T>
double measure_latency(const Model<T>& m, const Sample& s, int reps, int warmup = 10) {
    if (reps < 100) throw ConfigError("latency reps must be >= 100");
    Workspace<T> ws;
    volatile double sink = 0;
    for (int i = 0; i < warmup; ++i) sink = sink + forward(m, s, ws)[0];
    std::vector<double> t(reps);
    for (int i = 0; i < reps; ++i) {
        auto t0 = std::chrono::steady_clock::now();
        sink = sink + forward(m, s, ws)[0];
        auto t1 = std::chrono::steady_clock::now();
        t[i] = std::chrono::duration<double>(t1 - t0).count();
    }
    std::nth_element(t.begin(), t.begin() + reps / 2, t.end());
    return std::max(t[reps / 2], 1e-9);
}

// ---------------------------------------------------------------------------
// Path-loss benchmark

struct StepBenchResult {
    WeiStep step = WeiStep::S1;
    long data_quantity = 0;
    long param_count = 0;
    double test_mse_db2 = 0;
    double latency_median_s = 0;
    double final_train_loss = 0;  // normalized-space, for convergence inspection
};

struct PlBenchReport {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<StepBenchResult> steps;  // S1..S4
    double test_pl_variance_db2 = 0;
    bool mse_ordering_holds = false;      // MSE(S4) < MSE(S3) < min(MSE(S1), MSE(S2))
    bool mse_paper_ordering_holds = false;  // MSE(S4) < MSE(S3) < MSE(S1) < MSE(S2)
    bool latency_ordering_holds = false;  // t(S4) < t(S3) <= t(S2) < t(S1)
    double s1_to_s2_data_reduction = 0;   // fraction of per-Rx values removed
    double s3_to_s4_latency_saving = 0;   // fraction of inference time saved

    const StepBenchResult& at(WeiStep s) const {
        for (const auto& r : steps)
            if (r.step == s) return r;
        throw ConfigError("report lacks step");
    }
};

// One trained model per step from identical seeds; test MSE on the held-out
// split; median single-sample latency after warm-up.
inline PlBenchReport run_pl_benchmark(const Dataset& ds, const TrainConfig& train_cfg,
                                      std::uint64_t config_hash = 0, int latency_reps = 1000) {
    for (WeiStep s : {WeiStep::S1, WeiStep::S2, WeiStep::S3, WeiStep::S4})
        if (!ds.records.empty() && !ds.records.front().has(s))
            throw ConfigError(std::string("dataset lacks step ") + to_string(s));
    if (ds.train_idx.empty() || ds.test_idx.empty())
        throw ConfigError("dataset has empty train or test split");

    PlBenchReport report;
    report.config_hash = config_hash;
    report.seed = train_cfg.seed;

    long B = static_cast<long>(ds.scene.buildings.size());
    for (WeiStep step : {WeiStep::S1, WeiStep::S2, WeiStep::S3, WeiStep::S4}) {
        auto train = pl_samples(ds, step, ds.train_idx);
        auto test = pl_samples(ds, step, ds.test_idx);

        ModelSpec spec = pl_model_spec(step, derive_seed(train_cfg.seed, "pl-model-init"));
        InputShape shape;
        if (step == WeiStep::S1) {
            shape.raster_w = static_cast<int>(ds.cfg.raster_w);
            shape.raster_h = static_cast<int>(ds.cfg.raster_h);
        }
        shape.vec_len = static_cast<int>(train.front().vec.size());
        shape.out_len = 1;
        Model<float> model = build_model<float>(spec, shape);
        fit_normalization(model, std::span<const Sample>(train));

        std::vector<double> losses;
        try {
            losses = fit(model, std::span<const Sample>(train), train_cfg);
        } catch (const NonFiniteLoss& e) {
            throw NonFiniteLoss(std::string(to_string(step)) + ": " + e.what());
        }

        Workspace<float> ws;
        double se = 0;
        for (const auto& s : test) {
            double diff = static_cast<double>(forward(model, s, ws)[0]) - s.target[0];
            se += diff * diff;
        }

        StepBenchResult r;
        r.step = step;
        r.data_quantity = count_inputs(step, B, ds.cfg.raster_w, ds.cfg.raster_h);
        r.param_count = model.param_count();
        r.test_mse_db2 = se / static_cast<double>(test.size());
        r.latency_median_s = measure_latency(model, test.front(), latency_reps);
        r.final_train_loss = losses.back();
        report.steps.push_back(r);
    }

    // constant-predictor bar: variance of the test-set PL
    {
        double mean = 0, sq = 0;
        for (int i : ds.test_idx) {
            double y = ds.records[i].truth.pl_db;
            mean += y;
            sq += y * y;
        }
        double n = static_cast<double>(ds.test_idx.size());
        mean /= n;
        report.test_pl_variance_db2 = std::max(0.0, sq / n - mean * mean);
    }

    double m1 = report.at(WeiStep::S1).test_mse_db2, m2 = report.at(WeiStep::S2).test_mse_db2;
    double m3 = report.at(WeiStep::S3).test_mse_db2, m4 = report.at(WeiStep::S4).test_mse_db2;
    double t1 = report.at(WeiStep::S1).latency_median_s, t2 = report.at(WeiStep::S2).latency_median_s;
    double t3 = report.at(WeiStep::S3).latency_median_s, t4 = report.at(WeiStep::S4).latency_median_s;
    report.mse_ordering_holds = m4 < m3 && m3 < std::min(m1, m2);
    report.mse_paper_ordering_holds = m4 < m3 && m3 < m1 && m1 < m2;
    report.latency_ordering_holds = t4 < t3 && t3 <= t2 && t2 < t1;
    double q1 = static_cast<double>(report.at(WeiStep::S1).data_quantity);
    double q2 = static_cast<double>(report.at(WeiStep::S2).data_quantity);
    report.s1_to_s2_data_reduction = 1.0 - q2 / q1;
    report.s3_to_s4_latency_saving = 1.0 - t4 / t3;
    return report;
}

// ---------------------------------------------------------------------------
// CSI pilot study

struct PilotMask {
    double ratio = 1.0;
    std::vector<int> indices;  // strictly increasing positions in the flattened M*N grid
};

// Deterministic equispaced mask over the flattened antenna-major grid;
// |indices| = round(ratio*M*N).
inline PilotMask make_pilot_mask(double ratio, int antennas, int subcarriers) {
    if (ratio <= 0 || ratio > 1) throw ConfigError("pilot ratio must be in (0, 1]");
    long total = static_cast<long>(antennas) * subcarriers;
    long k = std::lround(ratio * static_cast<double>(total));
    k = std::max(1L, std::min(k, total));
    PilotMask mask;
    mask.ratio = ratio;
    mask.indices.reserve(k);
    for (long i = 0; i < k; ++i)
        mask.indices.push_back(static_cast<int>(i * total / k));
    return mask;
}

struct PilotEstimate {
    PilotMask mask;
    std::vector<std::complex<double>> values;  // LS estimate at mask.indices
};

// Observed entries = truth + circular complex Gaussian noise at `snr_db`
// relative to the mean pilot power; +inf disables noise. Deterministic in
// `seed`.
inline PilotEstimate ls_pilot_estimate(const CsiGrid& truth, const PilotMask& mask,
                                       double snr_db, std::uint64_t seed) {
    PilotEstimate est;
    est.mask = mask;
    est.values.reserve(mask.indices.size());
    double pwr = 0;
    for (int idx : mask.indices) pwr += std::norm(std::complex<double>(truth.h[idx]));
    pwr /= static_cast<double>(mask.indices.size());
    double sigma2 = std::isinf(snr_db) ? 0.0 : pwr * std::pow(10.0, -snr_db / 10.0);
    Rng rng(seed);
    double s = std::sqrt(sigma2 / 2.0);
    for (int idx : mask.indices) {
        std::complex<double> v(truth.h[idx]);
        if (sigma2 > 0) v += std::complex<double>(s * rng.gaussian(), s * rng.gaussian());
        est.values.push_back(v);
    }
    return est;
}

// Baseline recovery: per-antenna linear interpolation across subcarriers with
// nearest-pilot extension at the edges; antenna rows without any pilot copy
// the nearest filled row.
inline std::vector<std::complex<double>> interpolate_pilots(const PilotEstimate& est, int antennas,
                                                            int subcarriers) {
    std::vector<std::complex<double>> grid(static_cast<std::size_t>(antennas) * subcarriers);
    std::vector<bool> row_filled(antennas, false);
    for (int m = 0; m < antennas; ++m) {
        std::vector<int> ns;
        std::vector<std::complex<double>> vals;
        for (std::size_t i = 0; i < est.mask.indices.size(); ++i) {
            int idx = est.mask.indices[i];
            if (idx / subcarriers == m) {
                ns.push_back(idx % subcarriers);
                vals.push_back(est.values[i]);
            }
        }
        if (ns.empty()) continue;
        row_filled[m] = true;
        auto* row = grid.data() + static_cast<std::size_t>(m) * subcarriers;
        for (int n = 0; n < subcarriers; ++n) {
            if (n <= ns.front()) {
                row[n] = vals.front();
            } else if (n >= ns.back()) {
                row[n] = vals.back();
            } else {
                auto it = std::upper_bound(ns.begin(), ns.end(), n);
                std::size_t hi = static_cast<std::size_t>(it - ns.begin());
                std::size_t lo = hi - 1;
                double t = static_cast<double>(n - ns[lo]) / (ns[hi] - ns[lo]);
                row[n] = vals[lo] * (1.0 - t) + vals[hi] * t;
            }
        }
    }
    for (int m = 0; m < antennas; ++m) {
        if (row_filled[m]) continue;
        int best = -1, best_d = antennas + 1;
        for (int mm = 0; mm < antennas; ++mm)
            if (row_filled[mm] && std::abs(mm - m) < best_d) {
                best = mm;
                best_d = std::abs(mm - m);
            }
        if (best < 0) continue;  // no pilots at all (impossible: mask has >= 1 index)
        std::copy_n(grid.data() + static_cast<std::size_t>(best) * subcarriers, subcarriers,
                    grid.data() + static_cast<std::size_t>(m) * subcarriers);
    }
    return grid;
}

struct CsiConfig {
    std::vector<double> ratios{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    double target_nmse_db = -10.0;
    double snr_db = 20.0;
    int hidden = 256;   // width of the refinement network
    TrainConfig train;  // epochs default below

    CsiConfig() {
        train.epochs = 40;
        train.lr = 1e-3;
    }
};

struct CsiMethodResult {
    std::string method;
    std::vector<std::pair<double, double>> curve;  // (ratio, nmse_db)
    std::optional<double> min_ratio_at_target;
    bool target_reached = false;
};

struct CsiReport {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    double target_nmse_db = 0;
    double snr_db = 0;
    std::vector<CsiMethodResult> methods;  // baseline-interp, wei-s2, wei-s4
    std::optional<double> s4_vs_baseline_ratio_reduction;  // 1 - min_s4/min_base

    const CsiMethodResult& at(const std::string& name) const {
        for (const auto& m : methods)
            if (m.method == name) return m;
        throw ConfigError("csi report lacks method " + name);
    }
};

namespace detail {

inline double nmse_db_of(double err, double ref) {
    if (ref <= 0) return -300.0;
    if (err <= 0) return -300.0;
    return 10.0 * std::log10(err / ref);
}

struct CsiRatioData {
    PilotMask mask;
    // per record: LS values, interp-filled input grid (re/im), truth targets
    std::vector<std::vector<std::complex<double>>> ls;
    std::vector<std::vector<float>> base_input;
    std::vector<std::vector<float>> target;
};

inline CsiRatioData build_csi_ratio_data(const Dataset& ds, double ratio, double snr_db,
                                         std::uint64_t seed, std::size_t ratio_index) {
    int M = ds.cfg.array.antennas, N = ds.cfg.ofdm.subcarriers;
    CsiRatioData out;
    out.mask = make_pilot_mask(ratio, M, N);
    std::size_t n = ds.records.size();
    out.ls.resize(n);
    out.base_input.resize(n);
    out.target.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const CsiGrid& truth = ds.records[i].truth.csi;
        auto est = ls_pilot_estimate(truth, out.mask, snr_db,
                                     derive_seed(seed, "csi-noise-r" + std::to_string(ratio_index), i));
        auto interp = interpolate_pilots(est, M, N);
        out.ls[i] = std::move(est.values);
        auto& in = out.base_input[i];
        in.resize(2 * interp.size());
        for (std::size_t k = 0; k < interp.size(); ++k) {
            in[2 * k] = static_cast<float>(interp[k].real());
            in[2 * k + 1] = static_cast<float>(interp[k].imag());
        }
        auto& tg = out.target[i];
        tg.resize(2 * truth.h.size());
        for (std::size_t k = 0; k < truth.h.size(); ++k) {
            tg[2 * k] = truth.h[k].real();
            tg[2 * k + 1] = truth.h[k].imag();
        }
    }
    return out;
}

}  // namespace detail

// WEI-aided CSI recovery vs. the interpolation baseline across pilot ratios.
// The networks map [interp-expanded pilot estimates || WEI payload] to the
// full grid by predicting the interpolation residual; observed entries are
// passed through from the LS estimates, so at ratio 1 every method reduces to
// the raw observation and a zero-output network reduces to the baseline.
inline CsiReport run_csi_experiment(const Dataset& ds, const CsiConfig& cfg,
                                    std::uint64_t config_hash = 0) {
    if (cfg.ratios.empty()) throw ConfigError("csi ratios must be nonempty");
    for (std::size_t i = 0; i < cfg.ratios.size(); ++i) {
        if (cfg.ratios[i] <= 0 || cfg.ratios[i] > 1)
            throw ConfigError("pilot ratios must be in (0, 1]");
        if (i > 0 && cfg.ratios[i] <= cfg.ratios[i - 1])
            throw ConfigError("pilot ratios must be sorted ascending");
    }
    if (!ds.records.empty() &&
        (!ds.records.front().has(WeiStep::S2) || !ds.records.front().has(WeiStep::S4)))
        throw ConfigError("csi experiment needs S2 and S4 records in the dataset");

    int M = ds.cfg.array.antennas, N = ds.cfg.ofdm.subcarriers;
    CsiReport report;
    report.config_hash = config_hash;
    report.seed = cfg.train.seed;
    report.target_nmse_db = cfg.target_nmse_db;
    report.snr_db = cfg.snr_db;
    report.methods.resize(3);
    report.methods[0].method = "baseline-interp";
    report.methods[1].method = "wei-s2";
    report.methods[2].method = "wei-s4";

    for (std::size_t ri = 0; ri < cfg.ratios.size(); ++ri) {
        double ratio = cfg.ratios[ri];
        auto data = detail::build_csi_ratio_data(ds, ratio, cfg.snr_db, cfg.train.seed, ri);

        // baseline: interpolation error on the test split
        double err = 0, ref = 0;
        for (int i : ds.test_idx) {
            const auto& in = data.base_input[i];
            const auto& tg = data.target[i];
            for (std::size_t k = 0; k < tg.size(); ++k) {
                double d = static_cast<double>(in[k]) - tg[k];
                err += d * d;
                ref += static_cast<double>(tg[k]) * tg[k];
            }
        }
        report.methods[0].curve.emplace_back(ratio, detail::nmse_db_of(err, ref));

        // WEI-aided networks: learn truth - interp
        for (int mi = 1; mi <= 2; ++mi) {
            WeiStep step = mi == 1 ? WeiStep::S2 : WeiStep::S4;
            auto make_sample = [&](int i) {
                Sample s;
                const auto& w = ds.records[i].get(step).values;
                s.vec = data.base_input[i];
                s.vec.insert(s.vec.end(), w.begin(), w.end());
                s.target.resize(data.target[i].size());
                for (std::size_t k = 0; k < s.target.size(); ++k)
                    s.target[k] = data.target[i][k] - data.base_input[i][k];
                return s;
            };
            std::vector<Sample> train;
            train.reserve(ds.train_idx.size());
            for (int i : ds.train_idx) train.push_back(make_sample(i));

            TrainConfig tc = cfg.train;
            tc.seed = derive_seed(cfg.train.seed, "csi-train", ri * 16 + mi);
            ModelSpec spec = mlp_spec(cfg.hidden, 2 * M * N, derive_seed(tc.seed, "csi-model-init"));
            Model<float> model =
                build_model<float>(spec, {0, 0, static_cast<int>(train.front().vec.size()),
                                          2 * M * N});
            fit_normalization(model, std::span<const Sample>(train));
            try {
                fit(model, std::span<const Sample>(train), tc);
            } catch (const NonFiniteLoss& e) {
                throw NonFiniteLoss(report.methods[mi].method + " ratio " +
                                    std::to_string(ratio) + ": " + e.what());
            }

            Workspace<float> ws;
            double merr = 0, mref = 0;
            for (int i : ds.test_idx) {
                Sample s = make_sample(i);
                const auto& pred = forward(model, s, ws);
                std::vector<double> out(pred.size());
                for (std::size_t k = 0; k < out.size(); ++k)
                    out[k] = static_cast<double>(data.base_input[i][k]) + pred[k];
                // pass observed entries through from the LS estimates
                for (std::size_t k = 0; k < data.mask.indices.size(); ++k) {
                    int idx = data.mask.indices[k];
                    out[2 * idx] = data.ls[i][k].real();
                    out[2 * idx + 1] = data.ls[i][k].imag();
                }
                const auto& tg = data.target[i];
                for (std::size_t k = 0; k < tg.size(); ++k) {
                    double d = out[k] - tg[k];
                    merr += d * d;
                    mref += static_cast<double>(tg[k]) * tg[k];
                }
            }
            report.methods[mi].curve.emplace_back(ratio, detail::nmse_db_of(merr, mref));
        }
    }

    for (auto& m : report.methods) {
        for (const auto& [ratio, nmse] : m.curve)
            if (nmse <= cfg.target_nmse_db) {
                m.min_ratio_at_target = ratio;
                m.target_reached = true;
                break;
            }
    }
    const auto& base = report.at("baseline-interp");
    const auto& s4 = report.at("wei-s4");
    if (base.target_reached && s4.target_reached)
        report.s4_vs_baseline_ratio_reduction =
            1.0 - *s4.min_ratio_at_target / *base.min_ratio_at_target;
    return report;
}

// ---------------------------------------------------------------------------
// Report serialization (JSON + CSV)

inline json to_json(const PlBenchReport& r) {
    json j;
    j["config_hash"] = hash_hex(r.config_hash);
    j["seed"] = r.seed;
    json steps = json::array();
    for (const auto& s : r.steps) {
        steps.push_back({{"step", to_string(s.step)},
                         {"data_quantity_per_rx", s.data_quantity},
                         {"param_count", s.param_count},
                         {"test_mse_db2", s.test_mse_db2},
                         {"latency_median_s", s.latency_median_s},
                         {"final_train_loss", s.final_train_loss}});
    }
    j["steps"] = steps;
    j["test_pl_variance_db2"] = r.test_pl_variance_db2;
    j["mse_ordering_holds"] = r.mse_ordering_holds;
    j["mse_paper_ordering_holds"] = r.mse_paper_ordering_holds;
    j["latency_ordering_holds"] = r.latency_ordering_holds;
    j["s1_to_s2_data_reduction"] = r.s1_to_s2_data_reduction;
    j["s3_to_s4_latency_saving"] = r.s3_to_s4_latency_saving;
    return j;
}

inline std::string pl_report_csv(const PlBenchReport& r) {
    std::string csv = "step,data_quantity_per_rx,param_count,test_mse_db2,latency_median_s\n";
    for (const auto& s : r.steps) {
        char line[160];
        std::snprintf(line, sizeof line, "%s,%ld,%ld,%.6f,%.9f\n", to_string(s.step),
                      s.data_quantity, s.param_count, s.test_mse_db2, s.latency_median_s);
        csv += line;
    }
    return csv;
}

inline json to_json(const CsiReport& r) {
    json j;
    j["config_hash"] = hash_hex(r.config_hash);
    j["seed"] = r.seed;
    j["target_nmse_db"] = r.target_nmse_db;
    j["snr_db"] = r.snr_db;
    json methods = json::array();
    for (const auto& m : r.methods) {
        json curve = json::array();
        for (const auto& [ratio, nmse] : m.curve)
            curve.push_back({{"ratio", ratio}, {"nmse_db", nmse}});
        json jm = {{"method", m.method}, {"curve", curve}, {"target_reached", m.target_reached}};
        jm["min_ratio_at_target"] =
            m.min_ratio_at_target ? json(*m.min_ratio_at_target) : json(nullptr);
        methods.push_back(jm);
    }
    j["methods"] = methods;
    j["s4_vs_baseline_ratio_reduction"] =
        r.s4_vs_baseline_ratio_reduction ? json(*r.s4_vs_baseline_ratio_reduction) : json(nullptr);
    return j;
}

inline std::string csi_report_csv(const CsiReport& r) {
    std::string csv = "method,ratio,nmse_db\n";
    for (const auto& m : r.methods)
        for (const auto& [ratio, nmse] : m.curve) {
            char line[96];
            std::snprintf(line, sizeof line, "%s,%.4f,%.4f\n", m.method.c_str(), ratio, nmse);
            csv += line;
        }
    return csv;
}

}  // namespace weibench
