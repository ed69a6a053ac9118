// SPDX-License-Identifier: Apache-2.0
//
// Command layer: run configuration, seed derivation, and the gen-scene /
// build-dataset / bench-pl / csi / grad-check pipeline stages. The CLI binary
// in tools/ is a thin argv wrapper over these functions.

#pragma once

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "weibench/experiments.hpp"

namespace weibench {

struct RunConfig {
    SceneConfig scene;
    RxSetConfig rx;
    DatasetConfig dataset;
    TrainConfig train;
    CsiConfig csi;
    std::uint64_t master_seed = 1;
    int threads = 1;
};

// ---------------------------------------------------------------------------
// JSON <-> RunConfig. Unknown keys are rejected so typos fail loudly.

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    return j.at(key).get<T>();
}

inline void reject_unknown(const json& j, std::initializer_list<const char*> known,
                           const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const char* k : known)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
    }
}

}  // namespace detail

inline RunConfig run_config_from_json(const json& j) {
    using detail::get_or;
    detail::reject_unknown(
        j, {"seed", "threads", "scene", "rx", "dataset", "train", "csi"}, "config root");
    RunConfig c;
    c.master_seed = get_or<std::uint64_t>(j, "seed", 1);
    c.threads = get_or<int>(j, "threads", 1);

    if (j.contains("scene")) {
        const json& s = j.at("scene");
        detail::reject_unknown(s,
                               {"extent", "building_count", "footprint_min_m", "footprint_max_m",
                                "height_min_m", "height_max_m", "attenuation_min_db_per_m",
                                "attenuation_max_db_per_m", "reflection_loss_min_db",
                                "reflection_loss_max_db", "tx_height_m", "tx_x", "tx_y",
                                "carrier_freq_hz", "ground_z"},
                               "scene");
        auto& sc = c.scene;
        if (s.contains("extent")) {
            const json& e = s.at("extent");
            sc.extent = {get_or<double>(e, "min_x", 0), get_or<double>(e, "min_y", 0),
                         e.at("max_x").get<double>(), e.at("max_y").get<double>()};
        }
        sc.building_count = get_or<int>(s, "building_count", sc.building_count);
        sc.footprint_min_m = get_or<double>(s, "footprint_min_m", sc.footprint_min_m);
        sc.footprint_max_m = get_or<double>(s, "footprint_max_m", sc.footprint_max_m);
        sc.height_min_m = get_or<double>(s, "height_min_m", sc.height_min_m);
        sc.height_max_m = get_or<double>(s, "height_max_m", sc.height_max_m);
        sc.attenuation_min_db_per_m =
            get_or<double>(s, "attenuation_min_db_per_m", sc.attenuation_min_db_per_m);
        sc.attenuation_max_db_per_m =
            get_or<double>(s, "attenuation_max_db_per_m", sc.attenuation_max_db_per_m);
        sc.reflection_loss_min_db =
            get_or<double>(s, "reflection_loss_min_db", sc.reflection_loss_min_db);
        sc.reflection_loss_max_db =
            get_or<double>(s, "reflection_loss_max_db", sc.reflection_loss_max_db);
        sc.tx_height_m = get_or<double>(s, "tx_height_m", sc.tx_height_m);
        if (s.contains("tx_x")) sc.tx_x = s.at("tx_x").get<double>();
        if (s.contains("tx_y")) sc.tx_y = s.at("tx_y").get<double>();
        sc.carrier_freq_hz = get_or<double>(s, "carrier_freq_hz", sc.carrier_freq_hz);
        sc.ground_z = get_or<double>(s, "ground_z", sc.ground_z);
    }

    if (j.contains("rx")) {
        const json& r = j.at("rx");
        detail::reject_unknown(r, {"count", "layout", "height_m", "margin_m", "step_m"}, "rx");
        c.rx.count = get_or<int>(r, "count", c.rx.count);
        std::string layout = get_or<std::string>(r, "layout", "grid");
        if (layout == "grid")
            c.rx.layout = RxLayout::Grid;
        else if (layout == "trajectory")
            c.rx.layout = RxLayout::Trajectory;
        else
            throw ConfigError("rx.layout must be 'grid' or 'trajectory'");
        c.rx.height_m = get_or<double>(r, "height_m", c.rx.height_m);
        c.rx.margin_m = get_or<double>(r, "margin_m", c.rx.margin_m);
        c.rx.step_m = get_or<double>(r, "step_m", c.rx.step_m);
    }

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        detail::reject_unknown(d, {"steps", "raster", "trace", "shadow", "ofdm", "array"},
                               "dataset");
        if (d.contains("steps")) {
            c.dataset.steps.clear();
            for (const auto& s : d.at("steps"))
                c.dataset.steps.push_back(wei_step_from_string(s.get<std::string>()));
        }
        if (d.contains("raster")) {
            c.dataset.raster_w = d.at("raster").at("width").get<std::uint32_t>();
            c.dataset.raster_h = d.at("raster").at("height").get<std::uint32_t>();
        }
        if (d.contains("trace")) {
            const json& t = d.at("trace");
            c.dataset.trace.max_reflection_order =
                get_or<int>(t, "max_reflection_order", c.dataset.trace.max_reflection_order);
            c.dataset.trace.retention_db =
                get_or<double>(t, "retention_db", c.dataset.trace.retention_db);
        }
        if (d.contains("shadow")) {
            const json& sh = d.at("shadow");
            c.dataset.shadow_sigma_db = get_or<double>(sh, "sigma_db", c.dataset.shadow_sigma_db);
            c.dataset.shadow_decorr_m = get_or<double>(sh, "decorr_m", c.dataset.shadow_decorr_m);
        }
        if (d.contains("ofdm")) {
            const json& o = d.at("ofdm");
            c.dataset.ofdm.subcarriers = get_or<int>(o, "subcarriers", c.dataset.ofdm.subcarriers);
            c.dataset.ofdm.spacing_hz = get_or<double>(o, "spacing_hz", c.dataset.ofdm.spacing_hz);
        }
        if (d.contains("array"))
            c.dataset.array.antennas =
                get_or<int>(d.at("array"), "antennas", c.dataset.array.antennas);
    }

    auto parse_train = [](const json& t, TrainConfig& tc, const std::string& where) {
        detail::reject_unknown(
            t, {"lr", "batch_size", "epochs", "optimizer", "beta1", "beta2", "adam_eps"}, where);
        tc.lr = detail::get_or<double>(t, "lr", tc.lr);
        tc.batch_size = detail::get_or<int>(t, "batch_size", tc.batch_size);
        tc.epochs = detail::get_or<int>(t, "epochs", tc.epochs);
        std::string opt = detail::get_or<std::string>(t, "optimizer", "adam");
        if (opt == "adam")
            tc.optimizer = TrainConfig::Opt::Adam;
        else if (opt == "sgd")
            tc.optimizer = TrainConfig::Opt::Sgd;
        else
            throw ConfigError(where + ".optimizer must be 'adam' or 'sgd'");
        tc.beta1 = detail::get_or<double>(t, "beta1", tc.beta1);
        tc.beta2 = detail::get_or<double>(t, "beta2", tc.beta2);
        tc.adam_eps = detail::get_or<double>(t, "adam_eps", tc.adam_eps);
    };
    if (j.contains("train")) parse_train(j.at("train"), c.train, "train");

    if (j.contains("csi")) {
        const json& cs = j.at("csi");
        detail::reject_unknown(cs, {"ratios", "target_nmse_db", "snr_db", "hidden", "train"},
                               "csi");
        if (cs.contains("ratios")) c.csi.ratios = cs.at("ratios").get<std::vector<double>>();
        c.csi.target_nmse_db = get_or<double>(cs, "target_nmse_db", c.csi.target_nmse_db);
        c.csi.snr_db = get_or<double>(cs, "snr_db", c.csi.snr_db);
        c.csi.hidden = get_or<int>(cs, "hidden", c.csi.hidden);
        if (cs.contains("train")) parse_train(cs.at("train"), c.csi.train, "csi.train");
        if (c.csi.hidden < 1) throw ConfigError("csi.hidden must be >= 1");
    }

    // derived sub-seeds: one master reproduces the whole pipeline
    c.train.seed = derive_seed(c.master_seed, "train");
    c.csi.train.seed = derive_seed(c.master_seed, "csi");

    validate(c.scene);
    validate(c.dataset);
    validate(c.train);
    validate(c.csi.train);
    if (c.threads < 1) throw ConfigError("threads must be >= 1");
    return c;
}

inline json to_json(const RunConfig& c) {
    json j;
    j["seed"] = c.master_seed;
    j["threads"] = c.threads;
    json s;
    s["extent"] = {{"min_x", c.scene.extent.min_x},
                   {"min_y", c.scene.extent.min_y},
                   {"max_x", c.scene.extent.max_x},
                   {"max_y", c.scene.extent.max_y}};
    s["building_count"] = c.scene.building_count;
    s["footprint_min_m"] = c.scene.footprint_min_m;
    s["footprint_max_m"] = c.scene.footprint_max_m;
    s["height_min_m"] = c.scene.height_min_m;
    s["height_max_m"] = c.scene.height_max_m;
    s["attenuation_min_db_per_m"] = c.scene.attenuation_min_db_per_m;
    s["attenuation_max_db_per_m"] = c.scene.attenuation_max_db_per_m;
    s["reflection_loss_min_db"] = c.scene.reflection_loss_min_db;
    s["reflection_loss_max_db"] = c.scene.reflection_loss_max_db;
    s["tx_height_m"] = c.scene.tx_height_m;
    if (c.scene.tx_x) s["tx_x"] = *c.scene.tx_x;
    if (c.scene.tx_y) s["tx_y"] = *c.scene.tx_y;
    s["carrier_freq_hz"] = c.scene.carrier_freq_hz;
    s["ground_z"] = c.scene.ground_z;
    j["scene"] = s;
    j["rx"] = {{"count", c.rx.count},
               {"layout", c.rx.layout == RxLayout::Grid ? "grid" : "trajectory"},
               {"height_m", c.rx.height_m},
               {"margin_m", c.rx.margin_m},
               {"step_m", c.rx.step_m}};
    json steps = json::array();
    for (WeiStep st : c.dataset.steps) steps.push_back(to_string(st));
    j["dataset"] = {
        {"steps", steps},
        {"raster", {{"width", c.dataset.raster_w}, {"height", c.dataset.raster_h}}},
        {"trace",
         {{"max_reflection_order", c.dataset.trace.max_reflection_order},
          {"retention_db", c.dataset.trace.retention_db}}},
        {"shadow",
         {{"sigma_db", c.dataset.shadow_sigma_db}, {"decorr_m", c.dataset.shadow_decorr_m}}},
        {"ofdm",
         {{"subcarriers", c.dataset.ofdm.subcarriers}, {"spacing_hz", c.dataset.ofdm.spacing_hz}}},
        {"array", {{"antennas", c.dataset.array.antennas}}}};
    auto train_json = [](const TrainConfig& t) {
        return json{{"lr", t.lr},
                    {"batch_size", t.batch_size},
                    {"epochs", t.epochs},
                    {"optimizer", t.optimizer == TrainConfig::Opt::Adam ? "adam" : "sgd"},
                    {"beta1", t.beta1},
                    {"beta2", t.beta2},
                    {"adam_eps", t.adam_eps}};
    };
    j["train"] = train_json(c.train);
    j["csi"] = {{"ratios", c.csi.ratios},
                {"target_nmse_db", c.csi.target_nmse_db},
                {"snr_db", c.csi.snr_db},
                {"hidden", c.csi.hidden},
                {"train", train_json(c.csi.train)}};
    return j;
}

inline std::uint64_t config_hash(const RunConfig& c) { return fnv1a64(to_json(c).dump()); }

inline RunConfig load_run_config(const fs::path& path) {
    return run_config_from_json(parse_json_file(path));
}

// ---------------------------------------------------------------------------
// Commands

inline void cmd_gen_scene(const fs::path& config_path, const fs::path& out_dir,
                          std::optional<std::uint64_t> seed_override = std::nullopt,
                          std::ostream& out = std::cout) {
    RunConfig cfg = load_run_config(config_path);
    if (seed_override) cfg.master_seed = *seed_override;
    Scene scene = generate_scene(cfg.scene, derive_seed(cfg.master_seed, "scene"));
    fs::create_directories(out_dir);
    save_scene(scene, out_dir / "scene.json");
    char summary[512];
    std::snprintf(summary, sizeof summary,
                  "scene: %d buildings over %.1f m x %.1f m, tx at (%.1f, %.1f, %.1f), "
                  "carrier %.3f GHz, seed %llu\n",
                  static_cast<int>(scene.buildings.size()), scene.extent.width(),
                  scene.extent.height(), scene.tx.x, scene.tx.y, scene.tx.z,
                  scene.carrier_freq_hz / 1e9,
                  static_cast<unsigned long long>(cfg.master_seed));
    save_text(out_dir / "summary.txt", summary);
    out << summary;
    out << "wrote " << (out_dir / "scene.json").string() << "\n";
}

inline void cmd_build_dataset(const fs::path& scene_path, const fs::path& config_path,
                              const fs::path& out_dir,
                              std::optional<int> threads_override = std::nullopt,
                              std::ostream& out = std::cout) {
    RunConfig cfg = load_run_config(config_path);
    if (cfg.rx.count < 100) throw ConfigError("dataset rx count must be >= 100");
    Scene scene = load_scene(scene_path);
    RxSet rx = make_rx_set(scene, cfg.rx, derive_seed(cfg.master_seed, "rx"));
    int threads = threads_override.value_or(cfg.threads);
    Dataset ds = build_dataset(scene, rx, cfg.dataset, cfg.master_seed, threads);
    save_dataset(ds, out_dir, config_hash(cfg));
    save_text(out_dir / "run_config.json", to_json(cfg).dump(2) + "\n");
    out << "dataset: " << ds.records.size() << " records (" << ds.train_idx.size() << " train / "
        << ds.val_idx.size() << " val / " << ds.test_idx.size() << " test), "
        << ds.cfg.steps.size() << " WEI representations, rx layout " << rx.layout << "\n";
    out << "wrote " << (out_dir / "manifest.json").string() << "\n";
}

inline PlBenchReport cmd_bench_pl(const fs::path& dataset_dir, const fs::path& out_dir,
                                  std::optional<fs::path> config_override = std::nullopt,
                                  std::ostream& out = std::cout) {
    RunConfig cfg = load_run_config(config_override.value_or(dataset_dir / "run_config.json"));
    Dataset ds = load_dataset(dataset_dir);
    PlBenchReport report = run_pl_benchmark(ds, cfg.train, config_hash(cfg));
    fs::create_directories(out_dir);
    save_text(out_dir / "pl_report.json", to_json(report).dump(2) + "\n");
    save_text(out_dir / "pl_report.csv", pl_report_csv(report));

    out << "step  quantity/Rx   params    MSE (dB^2)   latency (s)\n";
    for (const auto& s : report.steps) {
        char line[160];
        std::snprintf(line, sizeof line, "%-4s  %-12ld  %-8ld  %-11.4f  %.6f\n",
                      to_string(s.step), s.data_quantity, s.param_count, s.test_mse_db2,
                      s.latency_median_s);
        out << line;
    }
    out << "test PL variance: " << report.test_pl_variance_db2 << " dB^2\n";
    out << "mse ordering S4<S3<min(S1,S2): " << (report.mse_ordering_holds ? "yes" : "no")
        << "   paper ordering S4<S3<S1<S2: " << (report.mse_paper_ordering_holds ? "yes" : "no")
        << "\n";
    out << "latency ordering S4<S3<=S2<S1: " << (report.latency_ordering_holds ? "yes" : "no")
        << "\n";
    return report;
}

inline CsiReport cmd_csi(const fs::path& dataset_dir, const fs::path& out_dir,
                         std::optional<fs::path> config_override = std::nullopt,
                         std::ostream& out = std::cout) {
    RunConfig cfg = load_run_config(config_override.value_or(dataset_dir / "run_config.json"));
    Dataset ds = load_dataset(dataset_dir);
    CsiReport report = run_csi_experiment(ds, cfg.csi, config_hash(cfg));
    fs::create_directories(out_dir);
    save_text(out_dir / "csi_report.json", to_json(report).dump(2) + "\n");
    save_text(out_dir / "csi_curves.csv", csi_report_csv(report));

    out << "target NMSE " << report.target_nmse_db << " dB at pilot SNR " << report.snr_db
        << " dB\n";
    for (const auto& m : report.methods) {
        out << "  " << m.method << ": min pilot ratio ";
        if (m.target_reached)
            out << *m.min_ratio_at_target;
        else
            out << "unreachable over tested ratios";
        out << "\n";
    }
    if (report.s4_vs_baseline_ratio_reduction)
        out << "wei-s4 pilot reduction vs baseline: "
            << 100.0 * *report.s4_vs_baseline_ratio_reduction << "%\n";
    return report;
}

inline bool cmd_grad_check(int models_per_type, std::ostream& out = std::cout) {
    auto results = grad_check_suite(models_per_type);
    bool pass = true;
    for (const auto& r : results) {
        bool ok = r.max_rel_err < 1e-3;
        pass = pass && ok;
        char line[128];
        std::snprintf(line, sizeof line, "%-7s %3d models   max rel err %.3e   %s\n",
                      r.layer_type.c_str(), r.models, r.max_rel_err, ok ? "ok" : "FAIL");
        out << line;
    }
    return pass;
}

}  // namespace weibench
