// SPDX-License-Identifier: Apache-2.0
//
// Four progressive wireless-environment-information extractors: raw sensing
// raster (S1), per-building distances (S2), effective-scatterer semantics
// (S3), and quantified propagation knowledge (S4).

#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "weibench/propagation.hpp"

namespace weibench {

enum class WeiStep : std::uint8_t { S1 = 1, S2 = 2, S3 = 3, S4 = 4 };

inline const char* to_string(WeiStep s) {
    switch (s) {
        case WeiStep::S1: return "S1";
        case WeiStep::S2: return "S2";
        case WeiStep::S3: return "S3";
        case WeiStep::S4: return "S4";
    }
    return "?";
}

inline WeiStep wei_step_from_string(const std::string& s) {
    if (s == "S1") return WeiStep::S1;
    if (s == "S2") return WeiStep::S2;
    if (s == "S3") return WeiStep::S3;
    if (s == "S4") return WeiStep::S4;
    throw ConfigError("unknown WEI step: " + s);
}

// Sentinel for "no reflector available" in the S4 payload; finite so models
// can train on it.
constexpr float kNoReflectorDb = -200.0f;

// One extracted representation for one receiver. S1 carries the raster plus
// the rx coordinates in `values`; the other steps carry only `values`.
struct WeiRecord {
    WeiStep step = WeiStep::S1;
    Raster raster;               // populated for S1 only
    std::vector<float> values;

    std::size_t data_quantity() const {
        return raster.cells.size() + values.size();
    }
};

// Per-Rx payload arity: W*H + 3 / B / 3 / 3.
inline long wei_data_quantity(WeiStep step, long building_count, long raster_w, long raster_h) {
    switch (step) {
        case WeiStep::S1: return raster_w * raster_h + 3;
        case WeiStep::S2: return building_count;
        case WeiStep::S3: return 3;
        case WeiStep::S4: return 3;
    }
    return 0;
}

// ---------------------------------------------------------------------------
// Effective scatterers

struct ScattererReason {
    bool blocker = false;    // intersects the direct segment
    bool fresnel = false;    // intrudes into the first Fresnel zone
    bool reflector = false;  // hosts a valid first-order specular reflection
};

struct EffectiveScattererSet {
    std::vector<int> indices;             // ascending building indices
    std::vector<ScattererReason> reasons; // parallel to indices

    bool contains(int building) const {
        for (int i : indices)
            if (i == building) return true;
        return false;
    }
};

// A building is effective when it blocks the direct ray, grazes the first
// Fresnel zone at its closest approach to the segment, or hosts a valid
// first-order image-method reflection.
inline EffectiveScattererSet effective_scatterers(const Scene& scene, const Vec3& tx,
                                                  const Vec3& rx) {
    EffectiveScattererSet set;
    double d = distance(tx, rx);
    double lambda = scene.wavelength();
    auto reflections = first_order_reflections(scene, tx, rx);
    for (int i = 0; i < static_cast<int>(scene.buildings.size()); ++i) {
        const Building& b = scene.buildings[i];
        ScattererReason why;
        why.blocker = ray_chord_length(tx, rx, b) > 0;
        auto [dist, t] = segment_box_distance(tx, rx, b);
        why.fresnel = dist < first_fresnel_radius(t * d, (1.0 - t) * d, lambda);
        for (const auto& sp : reflections)
            if (sp.building1 == i) why.reflector = true;
        if (why.blocker || why.fresnel || why.reflector) {
            set.indices.push_back(i);
            set.reasons.push_back(why);
        }
    }
    return set;
}

// ---------------------------------------------------------------------------
// Extractors

// S1: top-view height raster plus rx coordinates.
inline WeiRecord extract_s1(const Scene& scene, const Vec3& rx, std::uint32_t raster_w,
                            std::uint32_t raster_h) {
    WeiRecord rec;
    rec.step = WeiStep::S1;
    rec.raster = rasterize_heightmap(scene, raster_w, raster_h);
    rec.values = {static_cast<float>(rx.x), static_cast<float>(rx.y), static_cast<float>(rx.z)};
    return rec;
}

// S2: Euclidean distance from every building centroid to the rx, in building
// index order.
inline WeiRecord extract_s2(const Scene& scene, const Vec3& rx) {
    WeiRecord rec;
    rec.step = WeiStep::S2;
    rec.values.reserve(scene.buildings.size());
    for (const auto& b : scene.buildings)
        rec.values.push_back(static_cast<float>(distance(b.centroid(), rx)));
    return rec;
}

inline double s3_distance_sentinel(const Scene& scene) { return 2.0 * scene.extent.diagonal(); }

// S3: geometric semantics of the effective set — total volume, distance to the
// nearest effective scatterer, and total LoS chord length in meters.
inline WeiRecord extract_s3(const Scene& scene, const Vec3& tx, const Vec3& rx) {
    auto set = effective_scatterers(scene, tx, rx);
    double volume = 0, blockage = 0;
    double min_dist = s3_distance_sentinel(scene);
    for (std::size_t k = 0; k < set.indices.size(); ++k) {
        const Building& b = scene.buildings[set.indices[k]];
        volume += b.volume();
        min_dist = std::min(min_dist, distance(b.centroid(), rx));
        blockage += ray_chord_length(tx, rx, b);
    }
    WeiRecord rec;
    rec.step = WeiStep::S3;
    rec.values = {static_cast<float>(volume), static_cast<float>(min_dist),
                  static_cast<float>(blockage)};
    return rec;
}

// S4: quantified first-order propagation contributions.
//   refl  — power advantage (dB) of the strongest first-order reflection over
//           free space at the direct distance; the reflection loss here is
//           purely geometric (FSPL over the unfolded length plus the bounce
//           loss) so the value depends only on effective scatterers.
//   diffr — knife-edge loss of the dominant blocker, 0 for clear LoS.
//   block — through-building attenuation of the direct segment in dB.
inline WeiRecord extract_s4(const Scene& scene, const Vec3& tx, const Vec3& rx) {
    double d = distance(tx, rx);
    double direct_fspl = fspl(d, scene.carrier_freq_hz);

    double refl = kNoReflectorDb;
    for (const auto& sp : first_order_reflections(scene, tx, rx)) {
        double loss = fspl(sp.length, scene.carrier_freq_hz) +
                      scene.buildings[sp.building1].reflection_loss_db;
        refl = std::max(refl, direct_fspl - loss);
    }

    auto edge = detail::dominant_knife_edge(scene, tx, rx);
    double diffr = edge.blocked ? knife_edge_loss(edge.nu) : 0.0;

    double block = 0;
    for (const auto& b : scene.buildings)
        block += ray_chord_length(tx, rx, b) * b.attenuation_db_per_m;

    WeiRecord rec;
    rec.step = WeiStep::S4;
    rec.values = {static_cast<float>(refl), static_cast<float>(diffr),
                  static_cast<float>(block)};
    return rec;
}

inline WeiRecord extract_wei(const Scene& scene, const Vec3& rx, WeiStep step,
                             std::uint32_t raster_w, std::uint32_t raster_h) {
    switch (step) {
        case WeiStep::S1: return extract_s1(scene, rx, raster_w, raster_h);
        case WeiStep::S2: return extract_s2(scene, rx);
        case WeiStep::S3: return extract_s3(scene, scene.tx, rx);
        case WeiStep::S4: return extract_s4(scene, scene.tx, rx);
    }
    throw ConfigError("invalid WEI step");
}

}  // namespace weibench
