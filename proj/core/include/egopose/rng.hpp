// Copyright (c) 2026 the egopose authors.
// Licensed under the Apache License, Version 2.0.

#pragma once

#include <cstdint>
#include <cmath>
#include <string>
#include <string_view>

namespace egopose {

// Deterministic counter-based RNG. All randomness in the project flows from a
// single root seed through named sub-streams so that runs are reproducible
// byte-for-byte and ablations can share noise streams.
//
// Gaussian draws use Box-Muller on explicit 53-bit uniforms rather than
// std::normal_distribution, whose output is implementation-defined.
class RngStream {
public:
    RngStream(uint64_t root_seed, std::string_view stream_name, uint64_t index = 0) {
        uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a over the stream name
        for (char c : stream_name) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        state_ = splitmix(root_seed ^ splitmix(h ^ splitmix(index + 0x9e3779b97f4a7c15ULL)));
        if (state_ == 0) state_ = 0x4d595df4d0f33173ULL;
    }

    uint64_t next_u64() {
        // xorshift64* core; state advanced once per draw.
        uint64_t x = state_;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        state_ = x;
        return x * 0x2545f4914f6cdd1dULL;
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    uint64_t uniform_index(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Standard normal. Always consumes exactly two uniforms (no cached spare),
    // keeping stream consumption order trivially predictable.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

private:
    static uint64_t splitmix(uint64_t x) {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    uint64_t state_;
};

// FNV-1a checksum over raw bytes; used for dataset manifests.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace egopose
