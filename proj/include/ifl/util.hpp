// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "ifl/errors.hpp"

namespace ifl {

/// Numerically stable logistic sigmoid.
inline double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// Inverse of sigmoid. Arguments must lie strictly inside (0,1).
inline double logit(double p) {
    if (!(p > 0.0 && p < 1.0))
        throw InvalidParameter("logit: argument must be in (0,1), got " + std::to_string(p));
    return std::log(p / (1.0 - p));
}

inline double sigmoid_derivative(double s) { return s * (1.0 - s); }

/// Deterministic seeded RNG. The engine is std::mt19937_64 (bit-exact by
/// the standard); the variate transforms below are ours so the byte
/// streams do not depend on the standard library implementation.
class SeededRng {
public:
    explicit SeededRng(uint64_t seed) : gen_(seed) {}

    /// Uniform double in [0,1) with 53 random bits.
    double uniform01() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo,hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Standard normal via Box-Muller; draws are generated in pairs.
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        double u2 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    /// Uniform integer in [0, n). Rejection sampling, unbiased.
    uint64_t below(uint64_t n) {
        if (n == 0) throw InvalidParameter("SeededRng::below: n must be positive");
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t x = gen_();
        while (x >= limit) x = gen_();
        return x % n;
    }

private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

/// Global worker-thread count used by the voxel loops. 1 (the default)
/// is the bit-exact mode; values > 1 chunk the iteration space into a
/// fixed partition so results do not depend on scheduling.
void set_threads(int n);
int get_threads();

/// Runs fn(begin, end) over a fixed partition of [0, n) into
/// get_threads() contiguous chunks. Writes must be disjoint per index.
void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn);

/// Sums fn(i) over [0, n). Partial sums are accumulated per chunk and
/// combined in chunk order, so a given thread count always produces the
/// same bits; different thread counts agree to roundoff.
double parallel_sum(size_t n, const std::function<double(size_t)>& fn);

/// FNV-1a 64-bit hash, hex-encoded. Used for config provenance digests.
std::string fnv1a_hex(std::string_view bytes);

/// Shortest-lossless decimal for a double (17 significant digits).
inline std::string format_g17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace ifl
