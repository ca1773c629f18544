/*
 * rng.hpp — counter-derived random substreams.
 *
 * Every stochastic draw in the project comes from a Stream derived from
 * (master seed, purpose tag, index); there is no global RNG state, so any
 * artifact can be regenerated in isolation and runs parallelize without
 * ordering effects.  Generator is xoshiro256**, seeded through splitmix64.
 */
#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace mesofrac::rng {

inline std::uint64_t splitmix64(std::uint64_t& x) {
    std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// FNV-1a over the tag bytes; keeps purpose-separated streams disjoint.
inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : tag) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class Stream {
  public:
    Stream() : Stream(0, "default", 0) {}

    Stream(std::uint64_t master, std::string_view purpose, std::uint64_t index) {
        std::uint64_t x = master;
        x ^= hash_tag(purpose);
        (void)splitmix64(x);
        x += 0x9e3779b97f4a7c15ULL * (index + 1);
        for (auto& w : s_) w = splitmix64(x);
        if ((s_[0] | s_[1] | s_[2] | s_[3]) == 0) s_[0] = 1;
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0,1), 53-bit resolution
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform01(); }

    // standard normal, Box-Muller (cos branch only; stateless between calls)
    double normal() {
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    std::uint64_t uniform_index(std::uint64_t n) { return n ? next_u64() % n : 0; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

inline Stream derive(std::uint64_t master, std::string_view purpose, std::uint64_t index) {
    return Stream(master, purpose, index);
}

} // namespace mesofrac::rng
