#ifndef ROBUSTEDGE_SYNTH_HPP
#define ROBUSTEDGE_SYNTH_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "robustedge/rng.hpp"
#include "robustedge/tensor.hpp"

namespace robustedge::synth {

// Seeded image-classification data at CIFAR shape. Classes are smooth,
// low-frequency patterns (gratings or blobs) with per-sample shift,
// amplitude and pixel-noise jitter, so a small CNN learns them while the
// images stay smooth enough for energy-based detection to have headroom.
struct SynthSpec {
    std::string family = "waves";  // "waves" | "blobs"
    std::int64_t classes = 10;
    std::int64_t count = 1000;
    std::int64_t channels = 3;
    std::int64_t height = 32;
    std::int64_t width = 32;
    double pixel_noise = 0.02;
    double contrast = 0.32;
    int max_shift = 4;
    // template_seed fixes the class definitions (0 = derived from family and
    // geometry), seed draws the samples; train/test splits share templates
    // and differ only in seed
    std::uint64_t template_seed = 0;
    std::uint64_t seed = 1;

    std::uint64_t effective_template_seed() const {
        if (template_seed != 0) return template_seed;
        Fnv1a h;
        h.update(family);
        h.update_value(classes);
        h.update_value(height);
        h.update_value(width);
        return h.value();
    }
};

struct SynthDataset {
    Tensor4 images;           // snapped to the 8-bit grid, values in [0,1]
    std::vector<int> labels;
};

namespace detail {

// one template per (class, channel), max-normalized to [-1, 1]
inline std::vector<std::vector<double>> class_templates(const SynthSpec& s) {
    Rng rng = Rng::stream(s.effective_template_seed(), 0x74656d706cull);
    const std::int64_t hw = s.height * s.width;
    std::vector<std::vector<double>> t(static_cast<std::size_t>(s.classes * s.channels),
                                       std::vector<double>(static_cast<std::size_t>(hw), 0.0));
    const double tau = 2.0 * 3.14159265358979323846;
    for (std::int64_t c = 0; c < s.classes; ++c) {
        for (std::int64_t ch = 0; ch < s.channels; ++ch) {
            auto& img = t[static_cast<std::size_t>(c * s.channels + ch)];
            if (s.family == "waves") {
                for (int k = 0; k < 3; ++k) {
                    const double fx = static_cast<double>(rng.below(4));
                    const double fy = static_cast<double>(1 + rng.below(3));
                    const double phase = rng.uniform(0.0, tau);
                    const double amp = rng.uniform(0.4, 1.0);
                    for (std::int64_t y = 0; y < s.height; ++y)
                        for (std::int64_t x = 0; x < s.width; ++x)
                            img[static_cast<std::size_t>(y * s.width + x)] +=
                                amp * std::cos(tau * (fx * static_cast<double>(x) / static_cast<double>(s.width) +
                                                      fy * static_cast<double>(y) / static_cast<double>(s.height)) +
                                               phase);
                }
            } else if (s.family == "blobs") {
                for (int k = 0; k < 4; ++k) {
                    const double cx = rng.uniform(0.15, 0.85) * static_cast<double>(s.width);
                    const double cy = rng.uniform(0.15, 0.85) * static_cast<double>(s.height);
                    const double sg = rng.uniform(0.15, 0.30) * static_cast<double>(s.width);
                    const double amp = rng.uniform(-1.0, 1.0);
                    for (std::int64_t y = 0; y < s.height; ++y)
                        for (std::int64_t x = 0; x < s.width; ++x) {
                            const double dx = (static_cast<double>(x) - cx) / sg;
                            const double dy = (static_cast<double>(y) - cy) / sg;
                            img[static_cast<std::size_t>(y * s.width + x)] +=
                                amp * std::exp(-0.5 * (dx * dx + dy * dy));
                        }
                }
            } else {
                fail("unknown synthetic family '", s.family, "' (expected waves or blobs)");
            }
            double m = 0.0;
            for (double v : img) m = std::max(m, std::abs(v));
            if (m > 0.0)
                for (double& v : img) v /= m;
        }
    }
    return t;
}

}  // namespace detail

namespace detail {
// circular 3x3 binomial blur; keeps the naturals certifiably low-pass so
// high-frequency adversarial perturbations stand out
inline void blur_inplace(std::vector<double>& img, std::int64_t h, std::int64_t w) {
    std::vector<double> tmp(img.size());
    for (std::int64_t y = 0; y < h; ++y) {
        const std::int64_t ym = (y + h - 1) % h, yp = (y + 1) % h;
        for (std::int64_t x = 0; x < w; ++x)
            tmp[static_cast<std::size_t>(y * w + x)] =
                0.25 * img[static_cast<std::size_t>(ym * w + x)] +
                0.5 * img[static_cast<std::size_t>(y * w + x)] +
                0.25 * img[static_cast<std::size_t>(yp * w + x)];
    }
    for (std::int64_t y = 0; y < h; ++y)
        for (std::int64_t x = 0; x < w; ++x) {
            const std::int64_t xm = (x + w - 1) % w, xp = (x + 1) % w;
            img[static_cast<std::size_t>(y * w + x)] = 0.25 * tmp[static_cast<std::size_t>(y * w + xm)] +
                                                       0.5 * tmp[static_cast<std::size_t>(y * w + x)] +
                                                       0.25 * tmp[static_cast<std::size_t>(y * w + xp)];
        }
}
}  // namespace detail

inline SynthDataset make_dataset(const SynthSpec& s) {
    require(s.classes >= 2, "make_dataset: need at least 2 classes");
    require(s.count >= 1, "make_dataset: need at least 1 sample");
    const auto templates = detail::class_templates(s);
    Rng rng = Rng::stream(s.seed, 0x73616d706cull);

    SynthDataset out;
    out.images = Tensor4::zeros({s.count, s.channels, s.height, s.width});
    out.labels.resize(static_cast<std::size_t>(s.count));
    std::vector<double> plane(static_cast<std::size_t>(s.height * s.width));
    for (std::int64_t i = 0; i < s.count; ++i) {
        const int label = static_cast<int>(i % s.classes);
        out.labels[static_cast<std::size_t>(i)] = label;
        const double amp = s.contrast * rng.uniform(0.75, 1.25);
        const std::int64_t dy = rng.below(2 * s.max_shift + 1) - s.max_shift;
        const std::int64_t dx = rng.below(2 * s.max_shift + 1) - s.max_shift;
        for (std::int64_t ch = 0; ch < s.channels; ++ch) {
            const auto& tmpl = templates[static_cast<std::size_t>(label * s.channels + ch)];
            for (std::int64_t y = 0; y < s.height; ++y) {
                const std::int64_t sy = ((y + dy) % s.height + s.height) % s.height;
                for (std::int64_t x = 0; x < s.width; ++x) {
                    const std::int64_t sx = ((x + dx) % s.width + s.width) % s.width;
                    plane[static_cast<std::size_t>(y * s.width + x)] =
                        0.5 + amp * tmpl[static_cast<std::size_t>(sy * s.width + sx)];
                }
            }
            detail::blur_inplace(plane, s.height, s.width);
            for (std::int64_t y = 0; y < s.height; ++y)
                for (std::int64_t x = 0; x < s.width; ++x) {
                    double v = plane[static_cast<std::size_t>(y * s.width + x)] + rng.normal(0.0, s.pixel_noise);
                    v = std::min(1.0, std::max(0.0, v));
                    // snap to the 8-bit grid, matching real image sources
                    v = std::round(v * 255.0) / 255.0;
                    out.images.at(i, ch, y, x) = v;
                }
        }
    }
    return out;
}

}  // namespace robustedge::synth

#endif  // ROBUSTEDGE_SYNTH_HPP
