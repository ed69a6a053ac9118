// SPDX-License-Identifier: Apache-2.0
//
// Per-link dataset construction: ground-truth channel (oracle with shadow
// fading) plus the requested WEI representations, with a seeded 70/15/15
// train/val/test split.

#pragma once

#include <cstdint>
#include <vector>

#include "weibench/nn.hpp"

namespace weibench {

struct DatasetConfig {
    std::vector<WeiStep> steps{WeiStep::S1, WeiStep::S2, WeiStep::S3, WeiStep::S4};
    std::uint32_t raster_w = 128, raster_h = 128;
    TraceConfig trace;
    double shadow_sigma_db = 2.0;
    double shadow_decorr_m = 25.0;
    OfdmConfig ofdm;
    AntennaConfig array;
};

inline void validate(const DatasetConfig& c) {
    if (c.steps.empty()) throw ConfigError("dataset must request at least one WEI step");
    if (c.raster_w < 8 || c.raster_h < 8) throw ConfigError("raster dims must be >= 8");
    if (c.shadow_sigma_db < 0) throw ConfigError("shadow sigma must be >= 0");
    if (c.shadow_decorr_m <= 0) throw ConfigError("shadow decorrelation must be > 0");
}

struct LinkRecord {
    Vec3 rx;
    ChannelTruth truth;
    std::vector<WeiRecord> wei;  // ordered by requested step

    const WeiRecord& get(WeiStep step) const {
        for (const auto& r : wei)
            if (r.step == step) return r;
        throw ConfigError(std::string("dataset record lacks step ") + to_string(step));
    }
    bool has(WeiStep step) const {
        for (const auto& r : wei)
            if (r.step == step) return true;
        return false;
    }
};

struct Dataset {
    Scene scene;
    DatasetConfig cfg;
    std::uint64_t seed = 0;
    std::vector<LinkRecord> records;
    std::vector<int> train_idx, val_idx, test_idx;
};

inline LinkRecord build_link_record(const Scene& scene, const Vec3& rx, const DatasetConfig& cfg,
                                    const ShadowField& shadow) {
    LinkRecord rec;
    rec.rx = rx;
    rec.truth.components = trace_paths(scene, scene.tx, rx, cfg.trace);
    rec.truth.shadow_db = shadow.sample(rx);
    rec.truth.pl_db = path_loss(rec.truth.components, rec.truth.shadow_db);
    rec.truth.csi = synthesize_csi(rec.truth.components, cfg.array, cfg.ofdm);
    rec.wei.reserve(cfg.steps.size());
    for (WeiStep s : cfg.steps)
        rec.wei.push_back(extract_wei(scene, rx, s, cfg.raster_w, cfg.raster_h));
    return rec;
}

// Deterministic in (scene, rx_set, cfg, seed) regardless of thread count:
// links are computed independently and stored by index.
inline Dataset build_dataset(const Scene& scene, const RxSet& rx_set, const DatasetConfig& cfg,
                             std::uint64_t seed, int threads = 1) {
    validate(cfg);
    if (rx_set.points.empty()) throw ConfigError("rx set is empty");
    Dataset ds;
    ds.scene = scene;
    ds.cfg = cfg;
    ds.seed = seed;
    ds.records.resize(rx_set.points.size());
    ShadowField shadow(scene.seed, cfg.shadow_sigma_db, cfg.shadow_decorr_m);
    parallel_for(rx_set.points.size(), threads, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i)
            ds.records[i] = build_link_record(scene, rx_set.points[i], cfg, shadow);
    });

    std::vector<int> order(ds.records.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    Rng rng(derive_seed(seed, "dataset-split"));
    shuffle(order, rng);
    auto n = static_cast<long>(order.size());
    long n_train = n * 70 / 100;
    long n_val = n * 15 / 100;
    ds.train_idx.assign(order.begin(), order.begin() + n_train);
    ds.val_idx.assign(order.begin() + n_train, order.begin() + n_train + n_val);
    ds.test_idx.assign(order.begin() + n_train + n_val, order.end());
    return ds;
}

// Assemble training samples for one step: WEI payload in, PL target out.
inline std::vector<Sample> pl_samples(const Dataset& ds, WeiStep step,
                                      const std::vector<int>& indices) {
    std::vector<Sample> out;
    out.reserve(indices.size());
    for (int i : indices) {
        const LinkRecord& rec = ds.records[i];
        const WeiRecord& w = rec.get(step);
        Sample s;
        if (step == WeiStep::S1) {
            s.image.dims = {static_cast<int>(w.raster.height), static_cast<int>(w.raster.width)};
            s.image.data = w.raster.cells;
        }
        s.vec = w.values;
        s.target = {static_cast<float>(rec.truth.pl_db)};
        out.push_back(std::move(s));
    }
    return out;
}

}  // namespace weibench
