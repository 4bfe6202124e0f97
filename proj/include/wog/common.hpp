#pragma once

// Shared plumbing: seeded RNG, checksums, error types.

#include <cmath>
#include <cstdint>
#include <cstring>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace wog {

struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValueError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TrainError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// container load failures, split by cause so callers can tell them apart
struct SerializationError : std::runtime_error {
    enum class Kind { version, checksum, truncated, stage };
    Kind kind;
    SerializationError(Kind k, const std::string& what) : std::runtime_error(what), kind(k) {}
};

// splitmix64; used to derive decorrelated child seeds from a master seed.
inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline uint64_t derive_seed(uint64_t master, uint64_t tag) {
    return splitmix64(master ^ splitmix64(tag + 0x51ed2701c3a4d9b5ull));
}

// mt19937_64 core (output sequence is pinned by the standard) with hand-rolled
// distributions, since std:: distribution objects are implementation-defined.
class Rng {
  public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    // Box-Muller with cached spare.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stdev) { return mean + stdev * normal(); }

    // uniform integer in [0, n)
    int index(int n) {
        if (n <= 0) throw ValueError("Rng::index: n must be positive");
        return static_cast<int>(next_u64() % static_cast<uint64_t>(n));
    }

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a, 64-bit. Used for cache/checkpoint integrity and freeze checksums.
inline uint64_t fnv1a64(const void* bytes, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(bytes);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline uint64_t fnv1a64(const std::vector<double>& v, uint64_t h = 0xcbf29ce484222325ull) {
    return v.empty() ? h : fnv1a64(v.data(), v.size() * sizeof(double), h);
}

std::string hex64(uint64_t v);

}  // namespace wog
