#ifndef ROBUSTEDGE_RNG_HPP
#define ROBUSTEDGE_RNG_HPP

#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "robustedge/common.hpp"

namespace robustedge {

// Deterministic random source. std::mt19937_64 output is specified by the
// standard, and the distributions below are hand-rolled on top of the raw
// 64-bit stream, so identical seeds reproduce identical values on any
// platform (std::*_distribution would not guarantee that).
class Rng {
    std::mt19937_64 eng_;
    bool has_spare_ = false;
    double spare_ = 0.0;

public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    // Independent substream keyed by (seed, stream). Used so per-sample /
    // per-purpose randomness does not depend on evaluation order.
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32)};
        Rng r(0);
        r.eng_.seed(seq);
        return r;
    }

    std::uint64_t bits() { return eng_(); }

    // Uniform in [0,1) with 53 bits of precision.
    double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Box-Muller; spare value cached so draws stay cheap.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Unbiased integer in [0, n).
    std::int64_t below(std::int64_t n) {
        require(n > 0, "Rng::below: n must be positive, got ", n);
        const auto un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t x = eng_();
        while (x >= limit) x = eng_();
        return static_cast<std::int64_t>(x % un);
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::int64_t i = static_cast<std::int64_t>(v.size()) - 1; i > 0; --i) {
            std::swap(v[static_cast<std::size_t>(i)], v[static_cast<std::size_t>(below(i + 1))]);
        }
    }

    // k distinct indices from [0, n), via partial Fisher-Yates.
    std::vector<std::int64_t> sample_without_replacement(std::int64_t n, std::int64_t k) {
        require(k >= 0 && k <= n, "sample_without_replacement: requested ", k, " from a set of ", n);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        for (std::int64_t i = 0; i < k; ++i) {
            const std::int64_t j = i + below(n - i);
            std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
        }
        idx.resize(static_cast<std::size_t>(k));
        return idx;
    }
};

}  // namespace robustedge

#endif  // ROBUSTEDGE_RNG_HPP
