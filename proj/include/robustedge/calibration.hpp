#ifndef ROBUSTEDGE_CALIBRATION_HPP
#define ROBUSTEDGE_CALIBRATION_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "robustedge/detector.hpp"
#include "robustedge/tensor.hpp"

namespace robustedge {

struct EnergyDistribution {
    int layer_index = 0;                  // 1-based
    std::vector<double> sorted_energies;  // ascending

    static EnergyDistribution from_samples(int layer_index, std::vector<double> energies) {
        require(!energies.empty(), "EnergyDistribution: empty sample set for layer ", layer_index);
        std::sort(energies.begin(), energies.end());
        return EnergyDistribution{layer_index, std::move(energies)};
    }
};

// Nearest-rank percentile: the value at 1-based index ceil(p/100 * N); p = 0
// maps to the minimum. Integer p is computed with integer arithmetic so grid
// points never drift across the ceiling.
inline double percentile(const EnergyDistribution& dist, double p) {
    require(p >= 0.0 && p <= 100.0, "percentile: p must be in [0,100], got ", p);
    require(!dist.sorted_energies.empty(), "percentile: empty distribution");
    const std::int64_t n = static_cast<std::int64_t>(dist.sorted_energies.size());
    std::int64_t rank;
    if (p == 0.0) {
        rank = 1;
    } else if (p == std::floor(p)) {
        const std::int64_t ip = static_cast<std::int64_t>(p);
        rank = (ip * n + 99) / 100;
    } else {
        rank = static_cast<std::int64_t>(std::ceil(p * static_cast<double>(n) / 100.0));
    }
    rank = std::clamp<std::int64_t>(rank, 1, n);
    return dist.sorted_energies[static_cast<std::size_t>(rank - 1)];
}

// Per-layer confidence band [E_L, E_U] for early exit, plus the final-layer
// threshold E_Th.
struct BoundarySet {
    struct Band {
        double lower = 0.0;
        double upper = 0.0;
    };
    std::vector<Band> bands;      // layers 1..n-1
    double final_threshold = 0.0;  // layer n
    int K = 0, L = 0, U = 0;
    int bits = 0;
    std::string detector_hash;
    std::string sample_fingerprint;

    int depth() const { return static_cast<int>(bands.size()) + 1; }
};

inline void validate_klu(int K, int L, int U) {
    require(K >= 0 && K <= 100, "K must be in [0,100], got ", K);
    require(L >= 0 && U >= 0, "L and U must be >= 0, got L=", L, " U=", U);
    require(K - L >= 0, "K - L must be >= 0, got ", K - L);
    require(K + U <= 100, "K + U must be <= 100, got ", K + U);
}

// Pad or crop spatially to (h, w), centered; used when transfer targets are
// shaped differently from the detector input.
inline Tensor4 center_fit(const Tensor4& x, std::int64_t h, std::int64_t w) {
    const auto [B, C, H, W] = x.shape();
    if (H == h && W == w) return x;
    Tensor4 out = Tensor4::zeros({B, C, h, w});
    const std::int64_t dy = (h - H) / 2;  // negative -> crop
    const std::int64_t dx = (w - W) / 2;
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t c = 0; c < C; ++c)
            for (std::int64_t i = 0; i < h; ++i) {
                const std::int64_t src_i = i - dy;
                if (src_i < 0 || src_i >= H) continue;
                for (std::int64_t j = 0; j < w; ++j) {
                    const std::int64_t src_j = j - dx;
                    if (src_j < 0 || src_j >= W) continue;
                    out.at(b, c, i, j) = x.at(b, c, src_i, src_j);
                }
            }
    return out;
}

// Confidence boundary generation: full-depth forward over the calibration
// naturals, then nearest-rank percentiles of each layer's distribution.
inline BoundarySet generate_boundaries(const DetectorState& d, const Tensor4& s_nat, int K, int L, int U) {
    require(s_nat.shape().n > 0, "generate_boundaries: empty calibration sample");
    validate_klu(K, L, U);
    const ForwardResult fwd = forward_with_energies(d, s_nat, d.depth());

    BoundarySet b;
    b.K = K;
    b.L = L;
    b.U = U;
    b.bits = d.quant.empty() ? 0 : d.quant.front().bits;
    b.detector_hash = d.weight_hash();
    {
        Fnv1a h;
        h.update(tensor_fingerprint(s_nat));
        h.update_value(K);
        h.update_value(L);
        h.update_value(U);
        b.sample_fingerprint = h.hex();
    }
    for (int i = 1; i <= d.depth(); ++i) {
        auto dist = EnergyDistribution::from_samples(i, fwd.sample_energies[static_cast<std::size_t>(i - 1)]);
        if (i < d.depth()) {
            b.bands.push_back({percentile(dist, K - L), percentile(dist, K + U)});
        } else {
            b.final_threshold = percentile(dist, K);
        }
    }
    return b;
}

// Cross-dataset transfer: same computation on target-domain naturals, with
// the weights untouched. Target samples are center padded/cropped to the
// detector's training input size when it is recorded and differs.
inline BoundarySet recalibrate_for_transfer(const DetectorState& d, const Tensor4& s_nat_target, int K, int L,
                                            int U) {
    require(s_nat_target.shape().c == d.spec.layers.front().in_channels,
            "recalibrate_for_transfer: target has ", s_nat_target.shape().c, " channels, detector expects ",
            d.spec.layers.front().in_channels);
    Tensor4 fitted = s_nat_target;
    bool resized = false;
    const auto ih = d.metadata.find("input_h");
    const auto iw = d.metadata.find("input_w");
    if (ih != d.metadata.end() && iw != d.metadata.end()) {
        const std::int64_t h = std::stoll(ih->second);
        const std::int64_t w = std::stoll(iw->second);
        if (h != s_nat_target.shape().h || w != s_nat_target.shape().w) {
            fitted = center_fit(s_nat_target, h, w);
            resized = true;
        }
    }
    BoundarySet b = generate_boundaries(d, fitted, K, L, U);
    if (resized) {
        Fnv1a h;
        h.update(b.sample_fingerprint);
        h.update("center_fit");
        b.sample_fingerprint = h.hex();
    }
    return b;
}

}  // namespace robustedge

#endif  // ROBUSTEDGE_CALIBRATION_HPP
