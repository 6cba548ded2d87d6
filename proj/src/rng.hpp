#ifndef VXR_RNG_HPP
#define VXR_RNG_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "errors.hpp"

namespace vxr {

// mt19937_64 with hand-written distributions so every draw sequence is fixed
// by this file, not by the standard library's unspecified algorithms. The
// engine state round-trips through text, which is what checkpoints store.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : eng_(seed) {}

    std::uint64_t next_u64() { return eng_(); }

    // Unbiased integer in [0, n) via rejection sampling.
    std::int64_t uniform_below(std::int64_t n) {
        VXR_CHECK(n > 0, "uniform_below requires n > 0, got " << n);
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x;
        do {
            x = eng_();
        } while (x >= limit);
        return static_cast<std::int64_t>(x % un);
    }

    // [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller without a cached spare so the engine state alone is the
    // full generator state.
    double normal() {
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    std::string state() const {
        std::ostringstream oss;
        oss << eng_;
        return oss.str();
    }

    void restore(const std::string& s) {
        std::istringstream iss(s);
        iss >> eng_;
        VXR_CHECK_DATA(!iss.fail(), "malformed RNG state string");
    }

private:
    std::mt19937_64 eng_;
};

}  // namespace vxr

#endif
