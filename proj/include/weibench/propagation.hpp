// SPDX-License-Identifier: Apache-2.0
//
// Ground-truth channel oracle: path enumeration per link (direct/penetration,
// image-method reflections, rooftop knife-edge diffraction), large-scale path
// loss with correlated shadow fading, and small-scale CSI synthesis.

#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "weibench/geometry.hpp"

namespace weibench {

constexpr double kSpeedOfLight = 299792458.0;

// Free-space path loss, 20*log10(4*pi*d*f/c).
inline double fspl(double distance_m, double freq_hz) {
    return 20.0 * std::log10(4.0 * M_PI * distance_m * freq_hz / kSpeedOfLight);
}

// Single knife-edge diffraction parameter; h is the edge clearance above the
// direct ray (negative when the ray clears the edge).
inline double diffraction_parameter(double h, double d1, double d2, double wavelength) {
    return h * std::sqrt(2.0 * (d1 + d2) / (wavelength * d1 * d2));
}

// ITU-style single knife-edge approximation; zero below the -0.78 branch point.
inline double knife_edge_loss(double nu) {
    if (nu <= -0.78) return 0.0;
    double s = nu - 0.1;
    return 6.9 + 20.0 * std::log10(std::sqrt(s * s + 1.0) + s);
}

enum class PathKind : std::uint8_t { Los = 0, Penetration = 1, Reflection = 2, Diffraction = 3 };

struct PathComponent {
    PathKind kind = PathKind::Los;
    int reflection_order = 0;  // 1 or 2 for reflections, 0 otherwise
    double loss_db = 0;        // total, includes FSPL over the geometric length
    double delay_s = 0;        // geometric length / c
    double azimuth_rad = 0;    // horizontal departure angle at the tx
    double phase_rad = 0;      // 2*pi*(length mod lambda)/lambda
};

struct TraceConfig {
    int max_reflection_order = 2;   // 0..2
    double retention_db = 40.0;     // drop anything this far below the strongest path
};

namespace detail {

inline double departure_azimuth(const Vec3& from, const Vec3& toward) {
    return std::atan2(toward.y - from.y, toward.x - from.x);
}

inline double geometric_phase(double length_m, double wavelength) {
    double frac = std::fmod(length_m, wavelength) / wavelength;
    double ph = 2.0 * M_PI * frac;
    if (ph >= 2.0 * M_PI) ph = 0.0;
    return ph;
}

inline double penetration_db(const Scene& scene, const Vec3& a, const Vec3& b) {
    double total = 0;
    for (const auto& bld : scene.buildings)
        total += ray_chord_length(a, b, bld) * bld.attenuation_db_per_m;
    return total;
}

struct DominantEdge {
    bool blocked = false;
    double nu = 0;
    Vec3 edge;  // rooftop point over the dominant blocker
};

// Knife-edge geometry of the blocker with the largest diffraction parameter.
// The edge sits over the mid-chord crossing at the building's roof height.
inline DominantEdge dominant_knife_edge(const Scene& scene, const Vec3& tx, const Vec3& rx) {
    DominantEdge best;
    double d = distance(tx, rx);
    double lambda = scene.wavelength();
    for (const auto& b : scene.buildings) {
        if (ray_chord_length(tx, rx, b) <= 0) continue;
        auto [dist_unused, t] = segment_box_distance(tx, rx, b);
        (void)dist_unused;
        Vec3 q = lerp(tx, rx, t);
        double h = b.top_z() - q.z;
        double d1 = t * d, d2 = (1.0 - t) * d;
        if (d1 <= 0 || d2 <= 0) continue;
        double nu = diffraction_parameter(h, d1, d2, lambda);
        if (!best.blocked || nu > best.nu) {
            best.blocked = true;
            best.nu = nu;
            best.edge = {q.x, q.y, b.top_z()};
        }
    }
    return best;
}

}  // namespace detail

// Enumerate propagation paths for one link. Output order: the direct
// (LoS or Penetration) component first, then reflections by ascending delay,
// then the rooftop diffraction. The direct component is always retained; the
// retention threshold prunes only weaker reflections/diffraction so a link is
// never left without its direct term.
inline std::vector<PathComponent> trace_paths(const Scene& scene, const Vec3& tx,
                                              const Vec3& rx, const TraceConfig& cfg = {}) {
    if (cfg.max_reflection_order < 0 || cfg.max_reflection_order > 2)
        throw ConfigError("max_reflection_order must be in 0..2");
    double lambda = scene.wavelength();
    double d = distance(tx, rx);

    std::vector<PathComponent> comps;

    // direct: LoS when nothing intersects the segment, else through-building
    double pen = detail::penetration_db(scene, tx, rx);
    PathComponent direct;
    direct.kind = pen > 0 ? PathKind::Penetration : PathKind::Los;
    direct.loss_db = fspl(d, scene.carrier_freq_hz) + pen;
    direct.delay_s = d / kSpeedOfLight;
    direct.azimuth_rad = detail::departure_azimuth(tx, rx);
    direct.phase_rad = detail::geometric_phase(d, lambda);
    comps.push_back(direct);

    // specular reflections via the image method
    std::vector<SpecularPath> specular;
    if (cfg.max_reflection_order >= 1) {
        auto r1 = first_order_reflections(scene, tx, rx);
        specular.insert(specular.end(), r1.begin(), r1.end());
    }
    if (cfg.max_reflection_order >= 2) {
        auto r2 = second_order_reflections(scene, tx, rx);
        specular.insert(specular.end(), r2.begin(), r2.end());
    }
    std::vector<PathComponent> refl;
    refl.reserve(specular.size());
    for (const auto& sp : specular) {
        PathComponent c;
        c.kind = PathKind::Reflection;
        c.reflection_order = sp.order;
        double bounce = scene.buildings[sp.building1].reflection_loss_db;
        double pen_legs;
        if (sp.order == 1) {
            pen_legs = detail::penetration_db(scene, tx, sp.hit1) +
                       detail::penetration_db(scene, sp.hit1, rx);
        } else {
            bounce += scene.buildings[sp.building2].reflection_loss_db;
            pen_legs = detail::penetration_db(scene, tx, sp.hit1) +
                       detail::penetration_db(scene, sp.hit1, sp.hit2) +
                       detail::penetration_db(scene, sp.hit2, rx);
        }
        c.loss_db = fspl(sp.length, scene.carrier_freq_hz) + bounce + pen_legs;
        c.delay_s = sp.length / kSpeedOfLight;
        c.azimuth_rad = detail::departure_azimuth(tx, sp.hit1);
        c.phase_rad = detail::geometric_phase(sp.length, lambda);
        refl.push_back(c);
    }
    std::sort(refl.begin(), refl.end(),
              [](const PathComponent& a, const PathComponent& b) { return a.delay_s < b.delay_s; });
    comps.insert(comps.end(), refl.begin(), refl.end());

    // one rooftop diffraction over the dominant blocker
    auto edge = detail::dominant_knife_edge(scene, tx, rx);
    if (edge.blocked) {
        double over = distance(tx, edge.edge) + distance(edge.edge, rx);
        PathComponent c;
        c.kind = PathKind::Diffraction;
        c.loss_db = fspl(over, scene.carrier_freq_hz) + knife_edge_loss(edge.nu);
        c.delay_s = over / kSpeedOfLight;
        c.azimuth_rad = detail::departure_azimuth(tx, edge.edge);
        c.phase_rad = detail::geometric_phase(over, lambda);
        comps.push_back(c);
    }

    double strongest = comps[0].loss_db;
    for (const auto& c : comps) strongest = std::min(strongest, c.loss_db);
    std::vector<PathComponent> kept;
    kept.reserve(comps.size());
    kept.push_back(comps[0]);
    for (std::size_t i = 1; i < comps.size(); ++i)
        if (comps[i].loss_db <= strongest + cfg.retention_db) kept.push_back(comps[i]);
    return kept;
}

// Non-coherent power sum of the retained components plus the shadow term.
inline double path_loss(const std::vector<PathComponent>& components, double shadow_db) {
    double p = 0;
    for (const auto& c : components) p += std::pow(10.0, -c.loss_db / 10.0);
    return -10.0 * std::log10(p) + shadow_db;
}

// ---------------------------------------------------------------------------
// Correlated log-normal shadow fading. Node values live on a fixed lattice of
// spacing `decorr` anchored at the coordinate origin; a sample blends the four
// surrounding nodes with bilinear weights normalized to unit variance, so the
// field is zero-mean with std exactly sigma and correlation length ~decorr.

class ShadowField {
  public:
    ShadowField(std::uint64_t scene_seed, double sigma_db, double decorr_m)
        : seed_(scene_seed), sigma_(sigma_db), decorr_(decorr_m) {
        if (sigma_db < 0) throw ConfigError("shadow sigma must be >= 0");
        if (decorr_m <= 0) throw ConfigError("shadow decorrelation distance must be > 0");
    }

    double sample(double x, double y) const {
        if (sigma_ == 0) return 0;
        double gx = x / decorr_, gy = y / decorr_;
        auto ix = static_cast<std::int64_t>(std::floor(gx));
        auto iy = static_cast<std::int64_t>(std::floor(gy));
        double fx = gx - ix, fy = gy - iy;
        double w[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
        double g[4] = {hash_gaussian(seed_, ix, iy, 0), hash_gaussian(seed_, ix + 1, iy, 0),
                       hash_gaussian(seed_, ix, iy + 1, 0), hash_gaussian(seed_, ix + 1, iy + 1, 0)};
        double num = 0, den = 0;
        for (int i = 0; i < 4; ++i) {
            num += w[i] * g[i];
            den += w[i] * w[i];
        }
        return sigma_ * num / std::sqrt(den);
    }

    double sample(const Vec3& p) const { return sample(p.x, p.y); }

  private:
    std::uint64_t seed_;
    double sigma_;
    double decorr_;
};

inline double shadow_sample(const Vec3& rx, std::uint64_t scene_seed, double sigma_db,
                            double decorr_m) {
    return ShadowField(scene_seed, sigma_db, decorr_m).sample(rx);
}

// ---------------------------------------------------------------------------
// Small-scale CSI synthesis

struct AntennaConfig {
    int antennas = 4;  // uniform linear array, half-wavelength spacing
};

struct OfdmConfig {
    int subcarriers = 64;
    double spacing_hz = 120e3;
};

struct CsiGrid {
    int antennas = 0;
    int subcarriers = 0;
    std::vector<std::complex<float>> h;  // antenna-major row-major

    std::complex<float>& at(int m, int n) { return h[static_cast<std::size_t>(m) * subcarriers + n]; }
    const std::complex<float>& at(int m, int n) const {
        return h[static_cast<std::size_t>(m) * subcarriers + n];
    }
};

// H[m,n] = sum_k g_k exp(-j 2 pi f_n tau_k) exp(j pi m sin(az_k)) exp(j phi_k),
// with g_k = 10^(-loss_k/20) and f_n = (n - N/2) * spacing (baseband offsets).
inline CsiGrid synthesize_csi(const std::vector<PathComponent>& components,
                              const AntennaConfig& array, const OfdmConfig& grid) {
    if (array.antennas < 1 || grid.subcarriers < 1) throw ConfigError("invalid csi grid dims");
    CsiGrid out;
    out.antennas = array.antennas;
    out.subcarriers = grid.subcarriers;
    out.h.assign(static_cast<std::size_t>(array.antennas) * grid.subcarriers, {0.0f, 0.0f});
    for (const auto& c : components) {
        double g = std::pow(10.0, -c.loss_db / 20.0);
        double sin_az = std::sin(c.azimuth_rad);
        for (int m = 0; m < array.antennas; ++m) {
            double base = M_PI * m * sin_az + c.phase_rad;
            for (int n = 0; n < grid.subcarriers; ++n) {
                double fn = (n - grid.subcarriers / 2) * grid.spacing_hz;
                double ph = base - 2.0 * M_PI * fn * c.delay_s;
                auto& cell = out.h[static_cast<std::size_t>(m) * grid.subcarriers + n];
                cell += std::complex<float>(static_cast<float>(g * std::cos(ph)),
                                            static_cast<float>(g * std::sin(ph)));
            }
        }
    }
    return out;
}

struct ChannelTruth {
    std::vector<PathComponent> components;
    double pl_db = 0;
    double shadow_db = 0;
    CsiGrid csi;
};

}  // namespace weibench
