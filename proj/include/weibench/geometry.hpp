// SPDX-License-Identifier: Apache-2.0
//
// Scene synthesis and the geometric predicates shared by the channel oracle
// and the environment-information extractors.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "weibench/common.hpp"

namespace weibench {

// ---------------------------------------------------------------------------
// Vectors and boxes

struct Vec3 {
    double x = 0, y = 0, z = 0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }
};

inline double distance(const Vec3& a, const Vec3& b) { return (a - b).norm(); }

inline Vec3 lerp(const Vec3& a, const Vec3& b, double t) {
    return {a.x + (b.x - a.x) * t, a.y + (b.y - a.y) * t, a.z + (b.z - a.z) * t};
}

struct Extent2 {
    double min_x = 0, min_y = 0, max_x = 0, max_y = 0;

    double width() const { return max_x - min_x; }
    double height() const { return max_y - min_y; }
    double diagonal() const { return std::hypot(width(), height()); }
    bool contains(double x, double y) const {
        return x >= min_x && x <= max_x && y >= min_y && y <= max_y;
    }
};

struct Building {
    Vec3 min_corner;
    Vec3 max_corner;
    double attenuation_db_per_m = 0;  // > 0
    double reflection_loss_db = 0;    // >= 0

    Vec3 centroid() const { return lerp(min_corner, max_corner, 0.5); }
    double volume() const {
        Vec3 d = max_corner - min_corner;
        return d.x * d.y * d.z;
    }
    double top_z() const { return max_corner.z; }

    // closed-box containment; boundary points count as inside
    bool contains(const Vec3& p) const {
        return p.x >= min_corner.x && p.x <= max_corner.x && p.y >= min_corner.y &&
               p.y <= max_corner.y && p.z >= min_corner.z && p.z <= max_corner.z;
    }
    bool footprint_contains(double x, double y) const {
        return x >= min_corner.x && x <= max_corner.x && y >= min_corner.y && y <= max_corner.y;
    }
    // strict open-interval overlap in the horizontal plane; touching edges is allowed
    bool horizontal_overlaps(const Building& o) const {
        return min_corner.x < o.max_corner.x && o.min_corner.x < max_corner.x &&
               min_corner.y < o.max_corner.y && o.min_corner.y < max_corner.y;
    }
};

struct Scene {
    std::vector<Building> buildings;
    Vec3 tx;
    double ground_z = 0;
    Extent2 extent;
    double carrier_freq_hz = 3.5e9;
    std::uint64_t seed = 0;

    double wavelength() const { return 299792458.0 / carrier_freq_hz; }

    bool point_in_any_building(const Vec3& p) const {
        for (const auto& b : buildings)
            if (b.contains(p)) return true;
        return false;
    }
};

// ---------------------------------------------------------------------------
// Scene generation

struct SceneConfig {
    Extent2 extent{0, 0, 160, 160};
    int building_count = 10;
    double footprint_min_m = 16, footprint_max_m = 30;
    double height_min_m = 10, height_max_m = 24;
    double attenuation_min_db_per_m = 8, attenuation_max_db_per_m = 20;
    double reflection_loss_min_db = 4, reflection_loss_max_db = 10;
    double tx_height_m = 30;
    std::optional<double> tx_x, tx_y;  // default: extent centre
    double carrier_freq_hz = 3.5e9;
    double ground_z = 0;
    int placement_budget = 10000;  // total rejected samples before giving up
};

inline void validate(const SceneConfig& c) {
    if (c.extent.width() <= 0 || c.extent.height() <= 0)
        throw ConfigError("scene extent must have positive width and height");
    if (c.building_count < 0) throw ConfigError("building_count must be >= 0");
    if (c.footprint_min_m <= 0 || c.footprint_max_m < c.footprint_min_m)
        throw ConfigError("invalid footprint range");
    if (c.footprint_max_m > c.extent.width() || c.footprint_max_m > c.extent.height())
        throw ConfigError("footprint_max exceeds scene extent");
    if (c.height_min_m <= 0 || c.height_max_m < c.height_min_m)
        throw ConfigError("invalid height range");
    if (c.attenuation_min_db_per_m <= 0 || c.attenuation_max_db_per_m < c.attenuation_min_db_per_m)
        throw ConfigError("attenuation must be positive");
    if (c.reflection_loss_min_db < 0 || c.reflection_loss_max_db < c.reflection_loss_min_db)
        throw ConfigError("invalid reflection loss range");
    if (c.tx_height_m <= 0) throw ConfigError("tx_height must be > 0");
    if (c.carrier_freq_hz <= 0) throw ConfigError("carrier frequency must be > 0");
}

// Deterministic function of (config, seed). Buildings are rejection-sampled
// until pairwise non-overlapping; the transmitter point is kept clear so links
// never start inside a box.
inline Scene generate_scene(const SceneConfig& cfg, std::uint64_t seed) {
    validate(cfg);
    Scene scene;
    scene.ground_z = cfg.ground_z;
    scene.extent = cfg.extent;
    scene.carrier_freq_hz = cfg.carrier_freq_hz;
    scene.seed = seed;
    scene.tx = {cfg.tx_x.value_or(0.5 * (cfg.extent.min_x + cfg.extent.max_x)),
                cfg.tx_y.value_or(0.5 * (cfg.extent.min_y + cfg.extent.max_y)),
                cfg.ground_z + cfg.tx_height_m};

    Rng rng(derive_seed(seed, "scene-buildings"));
    int rejected = 0;
    while (static_cast<int>(scene.buildings.size()) < cfg.building_count) {
        double sx = rng.uniform(cfg.footprint_min_m, cfg.footprint_max_m);
        double sy = rng.uniform(cfg.footprint_min_m, cfg.footprint_max_m);
        double h = rng.uniform(cfg.height_min_m, cfg.height_max_m);
        double x0 = rng.uniform(cfg.extent.min_x, cfg.extent.max_x - sx);
        double y0 = rng.uniform(cfg.extent.min_y, cfg.extent.max_y - sy);
        Building b;
        b.min_corner = {x0, y0, cfg.ground_z};
        b.max_corner = {x0 + sx, y0 + sy, cfg.ground_z + h};
        b.attenuation_db_per_m =
            rng.uniform(cfg.attenuation_min_db_per_m, cfg.attenuation_max_db_per_m);
        b.reflection_loss_db =
            rng.uniform(cfg.reflection_loss_min_db, cfg.reflection_loss_max_db);

        bool ok = !b.contains(scene.tx);
        for (const auto& other : scene.buildings)
            if (ok && b.horizontal_overlaps(other)) ok = false;
        if (ok) {
            scene.buildings.push_back(b);
        } else if (++rejected >= cfg.placement_budget) {
            throw PlacementInfeasible(
                "could not place " + std::to_string(cfg.building_count) + " buildings after " +
                std::to_string(rejected) + " rejected samples");
        }
    }
    return scene;
}

// ---------------------------------------------------------------------------
// Ray / segment predicates

// Length of segment p1->p2 lying strictly inside box b (slab method).
inline double ray_chord_length(const Vec3& p1, const Vec3& p2, const Building& b) {
    Vec3 d = p2 - p1;
    double seg_len = d.norm();
    if (seg_len == 0) return 0;
    double t0 = 0.0, t1 = 1.0;
    const double o[3] = {p1.x, p1.y, p1.z};
    const double dir[3] = {d.x, d.y, d.z};
    const double lo[3] = {b.min_corner.x, b.min_corner.y, b.min_corner.z};
    const double hi[3] = {b.max_corner.x, b.max_corner.y, b.max_corner.z};
    for (int a = 0; a < 3; ++a) {
        if (dir[a] == 0.0) {
            if (o[a] < lo[a] || o[a] > hi[a]) return 0;
            continue;
        }
        double inv = 1.0 / dir[a];
        double ta = (lo[a] - o[a]) * inv;
        double tb = (hi[a] - o[a]) * inv;
        if (ta > tb) std::swap(ta, tb);
        t0 = std::max(t0, ta);
        t1 = std::min(t1, tb);
        if (t0 >= t1) return 0;
    }
    return (t1 - t0) * seg_len;
}

inline double point_box_distance(const Vec3& p, const Building& b) {
    double dx = std::max({b.min_corner.x - p.x, 0.0, p.x - b.max_corner.x});
    double dy = std::max({b.min_corner.y - p.y, 0.0, p.y - b.max_corner.y});
    double dz = std::max({b.min_corner.z - p.z, 0.0, p.z - b.max_corner.z});
    return std::sqrt(dx * dx + dy * dy + dz * dz);
}

struct SegmentBoxDistance {
    double dist;  // minimum distance from segment to box (0 when intersecting)
    double t;     // parameter of the closest-approach point on the segment
};

// Distance from a point moving linearly along the segment to a convex box is
// convex in t, so ternary search finds the global minimum.
inline SegmentBoxDistance segment_box_distance(const Vec3& p1, const Vec3& p2,
                                               const Building& b) {
    if (ray_chord_length(p1, p2, b) > 0) {
        // closest approach inside: use chord midpoint parameter
        Vec3 d = p2 - p1;
        double t0 = 0.0, t1 = 1.0;
        const double o[3] = {p1.x, p1.y, p1.z};
        const double dir[3] = {d.x, d.y, d.z};
        const double lo[3] = {b.min_corner.x, b.min_corner.y, b.min_corner.z};
        const double hi[3] = {b.max_corner.x, b.max_corner.y, b.max_corner.z};
        for (int a = 0; a < 3; ++a) {
            if (dir[a] == 0.0) continue;
            double inv = 1.0 / dir[a];
            double ta = (lo[a] - o[a]) * inv;
            double tb = (hi[a] - o[a]) * inv;
            if (ta > tb) std::swap(ta, tb);
            t0 = std::max(t0, ta);
            t1 = std::min(t1, tb);
        }
        return {0.0, 0.5 * (std::max(0.0, t0) + std::min(1.0, t1))};
    }
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        double m1 = lo + (hi - lo) / 3.0;
        double m2 = hi - (hi - lo) / 3.0;
        if (point_box_distance(lerp(p1, p2, m1), b) <= point_box_distance(lerp(p1, p2, m2), b))
            hi = m2;
        else
            lo = m1;
    }
    double t = 0.5 * (lo + hi);
    return {point_box_distance(lerp(p1, p2, t), b), t};
}

// First Fresnel zone radius at the point splitting the link into d1 + d2.
inline double first_fresnel_radius(double d1, double d2, double wavelength) {
    if (d1 <= 0 || d2 <= 0 || wavelength <= 0) return 0;
    return std::sqrt(wavelength * d1 * d2 / (d1 + d2));
}

// ---------------------------------------------------------------------------
// Height raster

struct Raster {
    std::uint32_t width = 0;   // columns, along x
    std::uint32_t height = 0;  // rows, along y
    std::vector<float> cells;  // row-major, cells[r*width + c]

    float at(std::uint32_t r, std::uint32_t c) const { return cells[r * width + c]; }
};

// Top-view height image over the scene extent: each cell holds the tallest
// building top above ground covering the cell centre, 0 where open ground.
inline Raster rasterize_heightmap(const Scene& scene, std::uint32_t width,
                                  std::uint32_t height) {
    if (width < 8 || height < 8) throw ConfigError("raster dims must be >= 8");
    Raster r;
    r.width = width;
    r.height = height;
    r.cells.assign(static_cast<std::size_t>(width) * height, 0.0f);
    double dx = scene.extent.width() / width;
    double dy = scene.extent.height() / height;
    for (const auto& b : scene.buildings) {
        double h = b.top_z() - scene.ground_z;
        // cell-centre coverage: centre in [min, max]
        auto c0 = static_cast<std::int64_t>(std::ceil((b.min_corner.x - scene.extent.min_x) / dx - 0.5));
        auto c1 = static_cast<std::int64_t>(std::floor((b.max_corner.x - scene.extent.min_x) / dx - 0.5));
        auto r0 = static_cast<std::int64_t>(std::ceil((b.min_corner.y - scene.extent.min_y) / dy - 0.5));
        auto r1 = static_cast<std::int64_t>(std::floor((b.max_corner.y - scene.extent.min_y) / dy - 0.5));
        c0 = std::max<std::int64_t>(c0, 0);
        r0 = std::max<std::int64_t>(r0, 0);
        c1 = std::min<std::int64_t>(c1, width - 1);
        r1 = std::min<std::int64_t>(r1, height - 1);
        for (std::int64_t row = r0; row <= r1; ++row)
            for (std::int64_t col = c0; col <= c1; ++col) {
                float& cell = r.cells[static_cast<std::size_t>(row) * width + col];
                cell = std::max(cell, static_cast<float>(h));
            }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Receiver sets

enum class RxLayout { Grid, Trajectory };

struct RxSetConfig {
    int count = 2000;
    RxLayout layout = RxLayout::Grid;
    double height_m = 1.5;
    double margin_m = 2.0;     // keep-out from the extent border
    double step_m = 2.0;       // trajectory step length
};

struct RxSet {
    std::vector<Vec3> points;
    std::string layout;
};

inline bool rx_point_valid(const Scene& scene, const Vec3& p, double margin) {
    if (p.x < scene.extent.min_x + margin || p.x > scene.extent.max_x - margin) return false;
    if (p.y < scene.extent.min_y + margin || p.y > scene.extent.max_y - margin) return false;
    if (p.z <= scene.ground_z) return false;
    return !scene.point_in_any_building(p);
}

// Regular grid over the extent, skipping points inside buildings; densifies
// until `count` free points exist, then takes the first `count` in row-major
// order.
inline RxSet make_rx_grid(const Scene& scene, const RxSetConfig& cfg) {
    double w = scene.extent.width() - 2 * cfg.margin_m;
    double h = scene.extent.height() - 2 * cfg.margin_m;
    if (w <= 0 || h <= 0) throw ConfigError("rx margin leaves no free area");
    double aspect = w / h;
    for (long target = cfg.count;; target += std::max<long>(target / 4, 16)) {
        int ny = std::max(1, static_cast<int>(std::ceil(std::sqrt(target / aspect))));
        int nx = std::max(1, static_cast<int>(std::ceil(static_cast<double>(target) / ny)));
        std::vector<Vec3> pts;
        pts.reserve(cfg.count);
        for (int iy = 0; iy < ny && static_cast<int>(pts.size()) < cfg.count; ++iy)
            for (int ix = 0; ix < nx && static_cast<int>(pts.size()) < cfg.count; ++ix) {
                Vec3 p{scene.extent.min_x + cfg.margin_m + (ix + 0.5) * w / nx,
                       scene.extent.min_y + cfg.margin_m + (iy + 0.5) * h / ny,
                       scene.ground_z + cfg.height_m};
                if (rx_point_valid(scene, p, cfg.margin_m)) pts.push_back(p);
            }
        if (static_cast<int>(pts.size()) >= cfg.count) return {std::move(pts), "grid"};
        if (target > 64L * 1024 * 1024)
            throw PlacementInfeasible("cannot place requested rx grid in free area");
    }
}

// Mobile-user walk: random headings with reflection at the margins, stepping
// around buildings.
inline RxSet make_rx_trajectory(const Scene& scene, const RxSetConfig& cfg,
                                std::uint64_t seed) {
    Rng rng(derive_seed(seed, "rx-trajectory"));
    Vec3 pos;
    int guard = 0;
    do {
        pos = {rng.uniform(scene.extent.min_x + cfg.margin_m, scene.extent.max_x - cfg.margin_m),
               rng.uniform(scene.extent.min_y + cfg.margin_m, scene.extent.max_y - cfg.margin_m),
               scene.ground_z + cfg.height_m};
        if (++guard > 10000) throw PlacementInfeasible("cannot seed rx trajectory in free area");
    } while (!rx_point_valid(scene, pos, cfg.margin_m));

    std::vector<Vec3> pts{pos};
    while (static_cast<int>(pts.size()) < cfg.count) {
        bool stepped = false;
        for (int attempt = 0; attempt < 64 && !stepped; ++attempt) {
            double heading = rng.uniform(0, 2 * M_PI);
            Vec3 next{pos.x + cfg.step_m * std::cos(heading),
                      pos.y + cfg.step_m * std::sin(heading), pos.z};
            if (rx_point_valid(scene, next, cfg.margin_m)) {
                pos = next;
                pts.push_back(pos);
                stepped = true;
            }
        }
        if (!stepped) throw PlacementInfeasible("rx trajectory boxed in");
    }
    return {std::move(pts), "trajectory"};
}

inline RxSet make_rx_set(const Scene& scene, const RxSetConfig& cfg, std::uint64_t seed) {
    if (cfg.count < 1) throw ConfigError("rx count must be >= 1");
    if (cfg.height_m <= 0) throw ConfigError("rx height must be > 0");
    return cfg.layout == RxLayout::Grid ? make_rx_grid(scene, cfg)
                                        : make_rx_trajectory(scene, cfg, seed);
}

// ---------------------------------------------------------------------------
// Image-method specular paths against vertical building facades

struct Facade {
    int building = -1;
    int axis = 0;        // 0: plane x = coord, 1: plane y = coord
    double coord = 0;
    double out_sign = 0; // outward normal direction along `axis`
    double u0 = 0, u1 = 0;  // rectangle bounds along the other horizontal axis
    double z0 = 0, z1 = 0;
};

inline std::vector<Facade> facades_of(const Scene& scene) {
    std::vector<Facade> out;
    out.reserve(scene.buildings.size() * 4);
    for (int i = 0; i < static_cast<int>(scene.buildings.size()); ++i) {
        const Building& b = scene.buildings[i];
        double z0 = b.min_corner.z, z1 = b.max_corner.z;
        out.push_back({i, 0, b.min_corner.x, -1, b.min_corner.y, b.max_corner.y, z0, z1});
        out.push_back({i, 0, b.max_corner.x, +1, b.min_corner.y, b.max_corner.y, z0, z1});
        out.push_back({i, 1, b.min_corner.y, -1, b.min_corner.x, b.max_corner.x, z0, z1});
        out.push_back({i, 1, b.max_corner.y, +1, b.min_corner.x, b.max_corner.x, z0, z1});
    }
    return out;
}

inline double facade_side(const Vec3& p, const Facade& f) {
    double c = f.axis == 0 ? p.x : p.y;
    return (c - f.coord) * f.out_sign;
}

inline Vec3 mirror_across(const Vec3& p, const Facade& f) {
    Vec3 m = p;
    if (f.axis == 0)
        m.x = 2 * f.coord - p.x;
    else
        m.y = 2 * f.coord - p.y;
    return m;
}

// Intersection of segment a->b with the facade plane; nullopt when the hit
// parameter is outside (0,1) or the hit point leaves the facade rectangle.
inline std::optional<Vec3> facade_hit(const Vec3& a, const Vec3& b, const Facade& f) {
    double ca = f.axis == 0 ? a.x : a.y;
    double cb = f.axis == 0 ? b.x : b.y;
    if (ca == cb) return std::nullopt;
    double t = (f.coord - ca) / (cb - ca);
    if (t <= 0 || t >= 1) return std::nullopt;
    Vec3 p = lerp(a, b, t);
    double u = f.axis == 0 ? p.y : p.x;
    if (u < f.u0 || u > f.u1 || p.z < f.z0 || p.z > f.z1) return std::nullopt;
    return p;
}

struct SpecularPath {
    int order = 1;
    int building1 = -1, building2 = -1;  // bounce buildings in path order
    Vec3 hit1, hit2;                     // reflection points (hit2 unused at order 1)
    double length = 0;
};

inline std::vector<SpecularPath> first_order_reflections(const Scene& scene, const Vec3& tx,
                                                         const Vec3& rx) {
    std::vector<SpecularPath> paths;
    for (const Facade& f : facades_of(scene)) {
        if (facade_side(tx, f) <= 0 || facade_side(rx, f) <= 0) continue;
        Vec3 img = mirror_across(tx, f);
        auto hit = facade_hit(img, rx, f);
        if (!hit) continue;
        SpecularPath p;
        p.order = 1;
        p.building1 = f.building;
        p.hit1 = *hit;
        p.length = distance(tx, *hit) + distance(*hit, rx);
        paths.push_back(p);
    }
    return paths;
}

inline std::vector<SpecularPath> second_order_reflections(const Scene& scene, const Vec3& tx,
                                                          const Vec3& rx) {
    std::vector<SpecularPath> paths;
    auto facades = facades_of(scene);
    for (const Facade& f1 : facades) {
        if (facade_side(tx, f1) <= 0) continue;
        Vec3 img1 = mirror_across(tx, f1);
        for (const Facade& f2 : facades) {
            if (f2.building == f1.building) continue;  // convex boxes: no self double-bounce
            if (facade_side(rx, f2) <= 0) continue;
            Vec3 img2 = mirror_across(img1, f2);
            auto hit2 = facade_hit(img2, rx, f2);
            if (!hit2) continue;
            auto hit1 = facade_hit(img1, *hit2, f1);
            if (!hit1) continue;
            // middle leg must leave facade 1 outward and reach facade 2 from outside
            if (facade_side(*hit2, f1) <= 0 || facade_side(*hit1, f2) <= 0) continue;
            SpecularPath p;
            p.order = 2;
            p.building1 = f1.building;
            p.building2 = f2.building;
            p.hit1 = *hit1;
            p.hit2 = *hit2;
            p.length = distance(tx, *hit1) + distance(*hit1, *hit2) + distance(*hit2, rx);
            paths.push_back(p);
        }
    }
    return paths;
}

}  // namespace weibench
