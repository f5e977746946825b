#ifndef ROBUSTEDGE_TENSOR_HPP
#define ROBUSTEDGE_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "robustedge/common.hpp"
#include "robustedge/rng.hpp"

namespace robustedge {

struct Shape4 {
    std::int64_t n = 0, c = 0, h = 0, w = 0;

    std::int64_t count() const { return n * c * h * w; }
    bool operator==(const Shape4&) const = default;
};

inline std::string to_string(const Shape4& s) {
    return cat("(", s.n, ",", s.c, ",", s.h, ",", s.w, ")");
}

// Batched 4-D array (batch, channels, height, width), contiguous row-major,
// double storage. Value-semantic; ops below are pure functions.
class Tensor4 {
    Shape4 shape_;
    std::vector<double> v_;

    Tensor4(const Shape4& s, std::vector<double> data) : shape_(s), v_(std::move(data)) {}

public:
    Tensor4() = default;

    static Tensor4 zeros(const Shape4& s) {
        require(s.n >= 0 && s.c >= 0 && s.h >= 0 && s.w >= 0, "Tensor4: negative dim in ", to_string(s));
        return Tensor4(s, std::vector<double>(static_cast<std::size_t>(s.count()), 0.0));
    }

    static Tensor4 full(const Shape4& s, double value) {
        Tensor4 t = zeros(s);
        std::fill(t.v_.begin(), t.v_.end(), value);
        return t;
    }

    // Public entry point for external data; rejects NaN/Inf.
    static Tensor4 from_vector(const Shape4& s, std::vector<double> data) {
        require(static_cast<std::int64_t>(data.size()) == s.count(), "Tensor4: data length ", data.size(),
                " does not match shape ", to_string(s), " (", s.count(), " elements)");
        for (std::size_t i = 0; i < data.size(); ++i) {
            require(std::isfinite(data[i]), "Tensor4: non-finite value at flat index ", i);
        }
        return Tensor4(s, std::move(data));
    }

    // Internal fast path; callers guarantee finiteness.
    static Tensor4 wrap(const Shape4& s, std::vector<double> data) { return Tensor4(s, std::move(data)); }

    const Shape4& shape() const { return shape_; }
    std::int64_t size() const { return static_cast<std::int64_t>(v_.size()); }
    bool empty() const { return v_.empty(); }

    double* data() { return v_.data(); }
    const double* data() const { return v_.data(); }
    std::vector<double>& vec() { return v_; }
    const std::vector<double>& vec() const { return v_; }

    std::int64_t index(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return ((n * shape_.c + c) * shape_.h + h) * shape_.w + w;
    }
    double& at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) {
        return v_[static_cast<std::size_t>(index(n, c, h, w))];
    }
    double at(std::int64_t n, std::int64_t c, std::int64_t h, std::int64_t w) const {
        return v_[static_cast<std::size_t>(index(n, c, h, w))];
    }
    double& operator[](std::int64_t i) { return v_[static_cast<std::size_t>(i)]; }
    double operator[](std::int64_t i) const { return v_[static_cast<std::size_t>(i)]; }

    // One sample as a (1,c,h,w) view copy.
    Tensor4 slice_sample(std::int64_t b) const {
        require(b >= 0 && b < shape_.n, "slice_sample: index ", b, " out of batch of ", shape_.n);
        const std::int64_t per = shape_.c * shape_.h * shape_.w;
        std::vector<double> out(v_.begin() + static_cast<std::ptrdiff_t>(b * per),
                                v_.begin() + static_cast<std::ptrdiff_t>((b + 1) * per));
        return Tensor4({1, shape_.c, shape_.h, shape_.w}, std::move(out));
    }

    // New tensor from selected batch indices, in the given order.
    Tensor4 gather_samples(const std::vector<std::int64_t>& indices) const {
        Tensor4 out = zeros({static_cast<std::int64_t>(indices.size()), shape_.c, shape_.h, shape_.w});
        const std::int64_t per = shape_.c * shape_.h * shape_.w;
        for (std::size_t i = 0; i < indices.size(); ++i) {
            const std::int64_t b = indices[i];
            require(b >= 0 && b < shape_.n, "gather_samples: index ", b, " out of batch of ", shape_.n);
            std::copy_n(v_.begin() + static_cast<std::ptrdiff_t>(b * per), per,
                        out.v_.begin() + static_cast<std::ptrdiff_t>(static_cast<std::int64_t>(i) * per));
        }
        return out;
    }

    bool all_finite() const {
        for (double x : v_)
            if (!std::isfinite(x)) return false;
        return true;
    }
};

// ---- elementwise ops -------------------------------------------------------

namespace ew {
template <typename F>
Tensor4 map(const Tensor4& t, F f) {
    std::vector<double> out(t.vec().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(t.vec()[i]);
    return Tensor4::wrap(t.shape(), std::move(out));
}
template <typename F>
Tensor4 zip(const Tensor4& a, const Tensor4& b, F f) {
    require(a.shape() == b.shape(), "elementwise op: shape mismatch ", to_string(a.shape()), " vs ",
            to_string(b.shape()));
    std::vector<double> out(a.vec().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(a.vec()[i], b.vec()[i]);
    return Tensor4::wrap(a.shape(), std::move(out));
}
}  // namespace ew

inline Tensor4 relu(const Tensor4& t) {
    return ew::map(t, [](double x) { return x > 0.0 ? x : 0.0; });
}

inline Tensor4 sign(const Tensor4& t) {
    return ew::map(t, [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); });
}

inline Tensor4 clamp(const Tensor4& t, double lo, double hi) {
    require(lo <= hi, "clamp: lo ", lo, " > hi ", hi);
    return ew::map(t, [lo, hi](double x) { return std::min(hi, std::max(lo, x)); });
}

inline Tensor4 add(const Tensor4& a, const Tensor4& b) {
    return ew::zip(a, b, [](double x, double y) { return x + y; });
}

inline Tensor4 sub(const Tensor4& a, const Tensor4& b) {
    return ew::zip(a, b, [](double x, double y) { return x - y; });
}

inline Tensor4 scale(const Tensor4& t, double s) {
    return ew::map(t, [s](double x) { return s * x; });
}

inline double l2_norm(const Tensor4& t) {
    double acc = 0.0;
    for (double x : t.vec()) acc += x * x;
    return std::sqrt(acc);
}

inline double linf_norm(const Tensor4& t) {
    double m = 0.0;
    for (double x : t.vec()) m = std::max(m, std::abs(x));
    return m;
}

inline double max_abs(const Tensor4& t) { return linf_norm(t); }

inline double mean(const Tensor4& t) {
    require(!t.empty(), "mean: empty tensor");
    double acc = 0.0;
    for (double x : t.vec()) acc += x;
    return acc / static_cast<double>(t.size());
}

// Additive N(0, sigma^2) noise, deterministic per rng state.
inline Tensor4 gaussian_noise(const Tensor4& t, double sigma, Rng& rng) {
    require(sigma >= 0.0, "gaussian_noise: sigma must be >= 0, got ", sigma);
    std::vector<double> out(t.vec().size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = t.vec()[i] + rng.normal(0.0, sigma);
    return Tensor4::wrap(t.shape(), std::move(out));
}

inline std::string tensor_fingerprint(const Tensor4& t) {
    Fnv1a h;
    h.update_value(t.shape().n);
    h.update_value(t.shape().c);
    h.update_value(t.shape().h);
    h.update_value(t.shape().w);
    h.update(t.data(), t.vec().size() * sizeof(double));
    return h.hex();
}

}  // namespace robustedge

#endif  // ROBUSTEDGE_TENSOR_HPP
