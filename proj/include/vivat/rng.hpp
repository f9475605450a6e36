#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>

#include "vivat/common.hpp"

namespace vivat {

inline uint64_t splitmix64(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed, e.g. per dataset item or per epoch.
inline uint64_t derive_seed(uint64_t seed, uint64_t index) {
    uint64_t x = seed ^ (0x632be59bd9b4e019ULL + index * 0x9e3779b97f4a7c15ULL);
    splitmix64(x);
    return splitmix64(x);
}

// xoshiro256++ with explicit, serializable state. std::normal_distribution is
// implementation-defined, so normal() is computed here from raw uniforms.
class Rng {
public:
    Rng() : Rng(0) {}
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& w : s_) w = splitmix64(x);
    }

    uint64_t next() {
        const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in (0,1), never exactly 0 or 1
    double u01() { return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // uniform integer in [lo, hi] inclusive
    int64_t uniform_int(int64_t lo, int64_t hi) {
        if (hi < lo) throw ValidationError("uniform_int: empty range");
        uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(next() % span);
    }

    // standard normal via Box-Muller; consumes two uniforms per value so the
    // state stays self-contained (no cached second sample to serialize)
    double normal() {
        double u = u01();
        double v = u01();
        return std::sqrt(-2.0 * std::log(u)) * std::cos(2.0 * M_PI * v);
    }

    std::array<uint64_t, 4> state() const { return s_; }
    void set_state(const std::array<uint64_t, 4>& s) { s_ = s; }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::array<uint64_t, 4> s_{};
};

}  // namespace vivat
