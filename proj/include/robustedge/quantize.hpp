#ifndef ROBUSTEDGE_QUANTIZE_HPP
#define ROBUSTEDGE_QUANTIZE_HPP

#include <cmath>
#include <cstdint>

#include "robustedge/tensor.hpp"

namespace robustedge {

// Symmetric uniform fake quantization. bits == 0 means full precision
// (identity); scale == 0 means "derive from the tensor being quantized"
// (training-time behavior), a positive scale is a frozen export-time scale.
struct QuantSpec {
    int bits = 0;
    double scale = 0.0;

    bool enabled() const { return bits > 0; }
    std::int64_t levels_half() const { return (std::int64_t{1} << (bits - 1)) - 1; }
};

// The accelerator's energy table covers exactly these precisions.
inline bool is_table_precision(int bits) {
    return bits == 4 || bits == 6 || bits == 8 || bits == 12 || bits == 16;
}

inline void require_table_precision(int bits) {
    require(is_table_precision(bits), "bit width ", bits, " is not one of the supported precisions {4,6,8,12,16}");
}

namespace detail {
inline void quantize_span(const double* in, double* out, std::int64_t n, double scale, std::int64_t qmax) {
    if (scale <= 0.0) {  // all-zero span: identity by convention
        for (std::int64_t i = 0; i < n; ++i) out[i] = in[i];
        return;
    }
    const double fq = static_cast<double>(qmax);
    for (std::int64_t i = 0; i < n; ++i) {
        double q = std::round(in[i] / scale);
        if (q > fq) q = fq;
        if (q < -fq) q = -fq;
        out[i] = q * scale;
    }
}
}  // namespace detail

// Values land on the uniform grid {-(2^{k-1}-1) .. 2^{k-1}-1} * scale with
// scale = max|t| / (2^{k-1}-1), so the max-abs entry is reproduced exactly.
inline Tensor4 quantize_tensor(const Tensor4& t, const QuantSpec& spec) {
    if (!spec.enabled() || t.empty()) return t;
    require(spec.bits >= 2, "quantize_tensor: need at least 2 bits, got ", spec.bits);
    const std::int64_t qmax = spec.levels_half();
    const double scale = spec.scale > 0.0 ? spec.scale : max_abs(t) / static_cast<double>(qmax);
    Tensor4 out = Tensor4::zeros(t.shape());
    detail::quantize_span(t.data(), out.data(), t.size(), scale, qmax);
    return out;
}

// Activation variant: one dynamic scale per batch element, so batched
// evaluation matches single-sample evaluation exactly.
inline Tensor4 quantize_per_sample(const Tensor4& t, int bits) {
    if (bits <= 0 || t.empty()) return t;
    require(bits >= 2, "quantize_per_sample: need at least 2 bits, got ", bits);
    const std::int64_t qmax = (std::int64_t{1} << (bits - 1)) - 1;
    const std::int64_t B = t.shape().n;
    const std::int64_t per = t.size() / B;
    Tensor4 out = Tensor4::zeros(t.shape());
    for (std::int64_t b = 0; b < B; ++b) {
        const double* p = t.data() + b * per;
        double m = 0.0;
        for (std::int64_t i = 0; i < per; ++i) m = std::max(m, std::abs(p[i]));
        detail::quantize_span(p, out.data() + b * per, per, m / static_cast<double>(qmax), qmax);
    }
    return out;
}

inline double quantization_mse(const Tensor4& t, int bits) {
    const Tensor4 q = quantize_tensor(t, QuantSpec{bits});
    double acc = 0.0;
    for (std::int64_t i = 0; i < t.size(); ++i) {
        const double d = t[i] - q[i];
        acc += d * d;
    }
    return acc / static_cast<double>(t.size());
}

}  // namespace robustedge

#endif  // ROBUSTEDGE_QUANTIZE_HPP
