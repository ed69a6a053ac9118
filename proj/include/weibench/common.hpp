// SPDX-License-Identifier: Apache-2.0
//
// weibench - urban radio scene synthesis and environment-aided channel prediction benchmark

#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace weibench {

// ---------------------------------------------------------------------------
// Error taxonomy. Validation failures map to CLI exit code 1, runtime/numeric
// failures to exit code 2 (see tools/).

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PlacementInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct SpecMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hashing and seed derivation. One master seed drives the whole pipeline;
// sub-seeds come from hashing the master with a purpose tag so adding a new
// consumer never perturbs existing streams.

inline std::uint64_t fnv1a64(const void* data, std::size_t len,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const std::uint8_t*>(data);
    for (std::size_t i = 0; i < len; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a64(const std::string& s,
                             std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a64(s.data(), s.size(), h);
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, const std::string& tag) {
    std::uint64_t h = fnv1a64(&master, sizeof master);
    h = fnv1a64(tag.data(), tag.size(), h);
    return splitmix64(h);
}

inline std::uint64_t derive_seed(std::uint64_t master, const std::string& tag,
                                 std::uint64_t index) {
    std::uint64_t h = fnv1a64(&master, sizeof master);
    h = fnv1a64(tag.data(), tag.size(), h);
    h = fnv1a64(&index, sizeof index, h);
    return splitmix64(h);
}

// ---------------------------------------------------------------------------
// Deterministic RNG. std::mt19937_64's output sequence is pinned by the
// standard, but the distributions are not, so uniform/gaussian draws are
// implemented here.

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(splitmix64(seed ^ 0x2545f4914f6cdd1dULL)) {}

    std::uint64_t next_u64() {
        // xorshift64* — compact and adequate for scene sampling
        std::uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    // uniform in [0, 1)
    double u01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // uniform integer in [0, n)
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    double gaussian() {
        // Box-Muller; u1 shifted away from zero
        double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        double u2 = u01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

  private:
    std::uint64_t state_;
};

// Counter-based standard normal: a pure function of (seed, ix, iy, k), used by
// the shadow-fading grid so field values never depend on evaluation order.
inline double hash_gaussian(std::uint64_t seed, std::int64_t ix, std::int64_t iy,
                            std::uint32_t k) {
    std::uint64_t h = fnv1a64(&seed, sizeof seed);
    h = fnv1a64(&ix, sizeof ix, h);
    h = fnv1a64(&iy, sizeof iy, h);
    h = fnv1a64(&k, sizeof k, h);
    std::uint64_t a = splitmix64(h);
    std::uint64_t b = splitmix64(a);
    double u1 = (static_cast<double>(a >> 11) + 1.0) * 0x1.0p-53;
    double u2 = static_cast<double>(b >> 11) * 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

// Deterministic Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.below(i));
        std::swap(v[i - 1], v[j]);
    }
}

// ---------------------------------------------------------------------------
// Little-endian binary I/O for the data plane. Host is assumed LE-capable;
// writes go through explicit byte packing so files are portable.

inline void write_u32(std::ostream& os, std::uint32_t v) {
    std::uint8_t b[4] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8),
                         static_cast<std::uint8_t>(v >> 16), static_cast<std::uint8_t>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& os, std::uint64_t v) {
    write_u32(os, static_cast<std::uint32_t>(v));
    write_u32(os, static_cast<std::uint32_t>(v >> 32));
}

inline void write_f32(std::ostream& os, float v) {
    std::uint32_t u;
    std::memcpy(&u, &v, 4);
    write_u32(os, u);
}

inline void write_f64(std::ostream& os, double v) {
    std::uint64_t u;
    std::memcpy(&u, &v, 8);
    write_u64(os, u);
}

inline std::uint32_t read_u32(std::istream& is) {
    std::uint8_t b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("unexpected end of stream while reading u32");
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t lo = read_u32(is);
    std::uint64_t hi = read_u32(is);
    return lo | (hi << 32);
}

inline float read_f32(std::istream& is) {
    std::uint32_t u = read_u32(is);
    float v;
    std::memcpy(&v, &u, 4);
    return v;
}

inline double read_f64(std::istream& is) {
    std::uint64_t u = read_u64(is);
    double v;
    std::memcpy(&v, &u, 8);
    return v;
}

// ---------------------------------------------------------------------------
// Minimal fork-join helper for per-link work. Chunks are fixed by (n, threads)
// so the partition is deterministic; callers write results by index.

inline void parallel_for(std::size_t n, int threads,
                         const std::function<void(std::size_t, std::size_t)>& body) {
    if (threads <= 1 || n < 2) {
        body(0, n);
        return;
    }
    std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
    std::size_t chunk = (n + nt - 1) / nt;
    std::vector<std::thread> pool;
    pool.reserve(nt);
    for (std::size_t t = 0; t < nt; ++t) {
        std::size_t lo = t * chunk;
        std::size_t hi = std::min(n, lo + chunk);
        if (lo >= hi) break;
        pool.emplace_back([&body, lo, hi] { body(lo, hi); });
    }
    for (auto& th : pool) th.join();
}

}  // namespace weibench
