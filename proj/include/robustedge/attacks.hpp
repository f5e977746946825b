#ifndef ROBUSTEDGE_ATTACKS_HPP
#define ROBUSTEDGE_ATTACKS_HPP

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "robustedge/classifier.hpp"
#include "robustedge/rng.hpp"
#include "robustedge/tensor.hpp"

namespace robustedge::attacks {

enum class Kind { FGSM, FFGSM, BIM, PGD, PGD_L2, MIFGSM, DIFGSM, TPGD, CW, GN };

inline Kind kind_from_string(const std::string& s) {
    if (s == "fgsm") return Kind::FGSM;
    if (s == "ffgsm") return Kind::FFGSM;
    if (s == "bim") return Kind::BIM;
    if (s == "pgd") return Kind::PGD;
    if (s == "pgd-l2" || s == "pgdl2") return Kind::PGD_L2;
    if (s == "mifgsm") return Kind::MIFGSM;
    if (s == "difgsm") return Kind::DIFGSM;
    if (s == "tpgd") return Kind::TPGD;
    if (s == "cw") return Kind::CW;
    if (s == "gn") return Kind::GN;
    fail("unknown attack kind '", s, "'");
}

inline const char* to_string(Kind k) {
    switch (k) {
        case Kind::FGSM: return "fgsm";
        case Kind::FFGSM: return "ffgsm";
        case Kind::BIM: return "bim";
        case Kind::PGD: return "pgd";
        case Kind::PGD_L2: return "pgd-l2";
        case Kind::MIFGSM: return "mifgsm";
        case Kind::DIFGSM: return "difgsm";
        case Kind::TPGD: return "tpgd";
        case Kind::CW: return "cw";
        case Kind::GN: return "gn";
    }
    return "?";
}

struct AttackConfig {
    Kind kind = Kind::PGD;
    double eps = 8.0 / 255.0;   // L-inf budget (L2 radius for pgd-l2), pixel units
    int steps = 10;
    double alpha = 0.0;         // 0 -> eps/4 for iterative kinds, 1.25*eps for ffgsm
    double momentum_decay = 1.0;  // mifgsm
    double di_prob = 0.5;         // difgsm transform probability
    int di_delta = 4;             // difgsm max pad
    double sigma = 0.1;           // gn
    double cw_c = 100.0;
    double cw_kappa = 0.0;
    double cw_lr = 0.01;
    int target_class = -1;        // tpgd; -1 -> (label+1) mod classes
    std::uint64_t seed = 1;

    double step_size() const {
        if (alpha > 0.0) return alpha;
        return kind == Kind::FFGSM ? 1.25 * eps : eps / 4.0;
    }
    void validate() const {
        require(eps >= 0.0, "attack: eps must be >= 0, got ", eps);
        require(steps >= 1, "attack: steps must be >= 1, got ", steps);
        require(sigma >= 0.0, "attack: sigma must be >= 0, got ", sigma);
    }
};

namespace detail {

// d(mean CE)/dx for the batch; per-sample gradients up to the common 1/B.
inline Tensor4 ce_input_grad(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels) {
    ad::Tape tape;
    ad::Var xv = tape.leaf(x, true);
    ad::Var logits = classifier_logits(tape, c, xv);
    ad::Var loss = tape.cross_entropy_mean(logits, labels);
    tape.backward(loss);
    return tape.grad(xv);
}

inline void clamp01_(Tensor4& t) {
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = std::min(1.0, std::max(0.0, t[i]));
}

inline void project_linf_(Tensor4& x, const Tensor4& x0, double eps) {
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const double lo = x0[i] - eps, hi = x0[i] + eps;
        x[i] = std::min(hi, std::max(lo, x[i]));
    }
}

inline void project_l2_per_sample_(Tensor4& x, const Tensor4& x0, double eps) {
    const std::int64_t B = x.shape().n;
    const std::int64_t per = x.size() / B;
    for (std::int64_t b = 0; b < B; ++b) {
        double norm2 = 0.0;
        for (std::int64_t i = 0; i < per; ++i) {
            const double d = x[b * per + i] - x0[b * per + i];
            norm2 += d * d;
        }
        const double norm = std::sqrt(norm2);
        if (norm > eps && norm > 0.0) {
            const double s = eps / norm;
            for (std::int64_t i = 0; i < per; ++i)
                x[b * per + i] = x0[b * per + i] + s * (x[b * per + i] - x0[b * per + i]);
        }
    }
}

inline void check_pixel_range(const Tensor4& x) {
    for (std::int64_t i = 0; i < x.size(); ++i)
        require(x[i] >= 0.0 && x[i] <= 1.0, "attack: input pixel out of [0,1] at flat index ", i);
}

}  // namespace detail

// One-step sign-gradient attack.
inline Tensor4 fgsm(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels, double eps) {
    detail::check_pixel_range(x);
    const Tensor4 g = detail::ce_input_grad(c, x, labels);
    Tensor4 out = add(x, scale(sign(g), eps));
    detail::clamp01_(out);
    return out;
}

// Iterative sign-gradient ascent with L-inf projection each step. BIM is
// random_start = false.
inline Tensor4 pgd(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels, double eps,
                   double alpha, int steps, bool random_start, std::uint64_t seed = 1) {
    detail::check_pixel_range(x);
    require(alpha > 0.0, "pgd: alpha must be > 0, got ", alpha);
    Tensor4 xt = x;
    if (random_start) {
        Rng rng = Rng::stream(seed, 0x706764ull);
        for (std::int64_t i = 0; i < xt.size(); ++i) xt[i] += rng.uniform(-eps, eps);
        detail::clamp01_(xt);
    }
    for (int s = 0; s < steps; ++s) {
        const Tensor4 g = detail::ce_input_grad(c, xt, labels);
        for (std::int64_t i = 0; i < xt.size(); ++i)
            xt[i] += alpha * (g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0));
        detail::project_linf_(xt, x, eps);
        detail::clamp01_(xt);
    }
    return xt;
}

inline Tensor4 bim(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels, double eps,
                   double alpha, int steps) {
    return pgd(c, x, labels, eps, alpha, steps, false);
}

// Momentum-accumulated iterative attack; decay 0 reduces to BIM.
inline Tensor4 mifgsm(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels, double eps,
                      double alpha, int steps, double decay) {
    detail::check_pixel_range(x);
    Tensor4 xt = x;
    Tensor4 g_acc = Tensor4::zeros(x.shape());
    const std::int64_t B = x.shape().n;
    const std::int64_t per = x.size() / B;
    for (int s = 0; s < steps; ++s) {
        const Tensor4 g = detail::ce_input_grad(c, xt, labels);
        for (std::int64_t b = 0; b < B; ++b) {
            double l1 = 0.0;
            for (std::int64_t i = 0; i < per; ++i) l1 += std::abs(g[b * per + i]);
            const double inv = l1 > 0.0 ? 1.0 / l1 : 0.0;
            for (std::int64_t i = 0; i < per; ++i)
                g_acc[b * per + i] = decay * g_acc[b * per + i] + g[b * per + i] * inv;
        }
        for (std::int64_t i = 0; i < xt.size(); ++i)
            xt[i] += alpha * (g_acc[i] > 0.0 ? 1.0 : (g_acc[i] < 0.0 ? -1.0 : 0.0));
        detail::project_linf_(xt, x, eps);
        detail::clamp01_(xt);
    }
    return xt;
}

// Random init in the eps-ball, then a single FGSM step.
inline Tensor4 ffgsm(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels, double eps,
                     double alpha, std::uint64_t seed) {
    detail::check_pixel_range(x);
    Tensor4 xt = x;
    Rng rng = Rng::stream(seed, 0x666667736dull);
    for (std::int64_t i = 0; i < xt.size(); ++i) xt[i] += rng.uniform(-eps, eps);
    detail::clamp01_(xt);
    const Tensor4 g = detail::ce_input_grad(c, xt, labels);
    for (std::int64_t i = 0; i < xt.size(); ++i)
        xt[i] += alpha * (g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0));
    detail::project_linf_(xt, x, eps);
    detail::clamp01_(xt);
    return xt;
}

// Input-diversified BIM: with probability di_prob the gradient is taken
// through a random zero-padded shift (pad to H+delta then crop back).
inline Tensor4 difgsm(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels, double eps,
                      double alpha, int steps, double prob, int delta, std::uint64_t seed) {
    detail::check_pixel_range(x);
    Tensor4 xt = x;
    Rng rng = Rng::stream(seed, 0x646966ull);
    for (int s = 0; s < steps; ++s) {
        Tensor4 g = Tensor4::zeros(x.shape());
        if (rng.uniform() < prob) {
            const int dy = static_cast<int>(rng.below(2 * delta + 1)) - delta;
            const int dx = static_cast<int>(rng.below(2 * delta + 1)) - delta;
            ad::Tape tape;
            ad::Var xv = tape.leaf(xt, true);
            ad::Var shifted = tape.shift2d(xv, dy, dx);
            ad::Var logits = classifier_logits(tape, c, shifted);
            ad::Var loss = tape.cross_entropy_mean(logits, labels);
            tape.backward(loss);
            g = tape.grad(xv);
        } else {
            g = detail::ce_input_grad(c, xt, labels);
        }
        for (std::int64_t i = 0; i < xt.size(); ++i)
            xt[i] += alpha * (g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0));
        detail::project_linf_(xt, x, eps);
        detail::clamp01_(xt);
    }
    return xt;
}

// Targeted PGD: descends the cross-entropy of the chosen target class.
// target_class < 0 picks (label+1) mod num_classes per sample.
inline Tensor4 tpgd(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels, double eps,
                    double alpha, int steps, int target_class, std::uint64_t seed = 1) {
    detail::check_pixel_range(x);
    std::vector<int> targets(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        targets[i] = target_class >= 0 ? target_class
                                       : (labels[i] + 1) % static_cast<int>(c.spec.num_classes);
    Tensor4 xt = x;
    Rng rng = Rng::stream(seed, 0x74706764ull);
    for (std::int64_t i = 0; i < xt.size(); ++i) xt[i] += rng.uniform(-eps, eps);
    detail::clamp01_(xt);
    for (int s = 0; s < steps; ++s) {
        const Tensor4 g = detail::ce_input_grad(c, xt, targets);
        // descend: move against the gradient of the target-class loss
        for (std::int64_t i = 0; i < xt.size(); ++i)
            xt[i] -= alpha * (g[i] > 0.0 ? 1.0 : (g[i] < 0.0 ? -1.0 : 0.0));
        detail::project_linf_(xt, x, eps);
        detail::clamp01_(xt);
    }
    return xt;
}

// L2-ball PGD: per-sample normalized gradient steps, projection onto the
// eps L2 ball.
inline Tensor4 pgd_l2(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels, double eps,
                      double alpha, int steps, bool random_start, std::uint64_t seed = 1) {
    detail::check_pixel_range(x);
    Tensor4 xt = x;
    const std::int64_t B = x.shape().n;
    const std::int64_t per = x.size() / B;
    if (random_start) {
        Rng rng = Rng::stream(seed, 0x7064676c32ull);
        for (std::int64_t i = 0; i < xt.size(); ++i) xt[i] += rng.normal(0.0, eps / std::sqrt(static_cast<double>(per)));
        detail::project_l2_per_sample_(xt, x, eps);
        detail::clamp01_(xt);
    }
    for (int s = 0; s < steps; ++s) {
        const Tensor4 g = detail::ce_input_grad(c, xt, labels);
        for (std::int64_t b = 0; b < B; ++b) {
            double norm2 = 0.0;
            for (std::int64_t i = 0; i < per; ++i) norm2 += g[b * per + i] * g[b * per + i];
            const double norm = std::sqrt(norm2);
            if (norm == 0.0) continue;
            for (std::int64_t i = 0; i < per; ++i) xt[b * per + i] += alpha * g[b * per + i] / norm;
        }
        detail::project_l2_per_sample_(xt, x, eps);
        detail::clamp01_(xt);
    }
    return xt;
}

// Carlini-Wagner L2 on the tanh-space variable with an Adam loop; c trades
// off distance against the margin term, kappa is the confidence.
inline Tensor4 cw(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels, double cw_c,
                  double kappa, int steps, double lr) {
    detail::check_pixel_range(x);
    const double lim = 1.0 - 1e-6;
    Tensor4 w = Tensor4::zeros(x.shape());
    for (std::int64_t i = 0; i < x.size(); ++i) {
        const double v = std::min(lim, std::max(-lim, 2.0 * x[i] - 1.0));
        w[i] = std::atanh(v);
    }
    Tensor4 m = Tensor4::zeros(x.shape());
    Tensor4 v2 = Tensor4::zeros(x.shape());
    const double b1 = 0.9, b2 = 0.999, eps_adam = 1e-8;
    const std::int64_t B = x.shape().n;
    for (int s = 1; s <= steps; ++s) {
        ad::Tape tape;
        ad::Var wv = tape.leaf(w, true);
        ad::Var xadv = tape.scale(tape.add(tape.tanh_op(wv), tape.leaf(Tensor4::full(x.shape(), 1.0))), 0.5);
        ad::Var dist = tape.sum_squares_to(xadv, x);
        ad::Var margin = tape.cw_margin_mean(classifier_logits(tape, c, xadv), labels, kappa, false);
        // margin is a batch mean; scale back to a sum to match the distance term
        ad::Var loss = tape.add(dist, tape.scale(margin, cw_c * static_cast<double>(B)));
        tape.backward(loss);
        const Tensor4 g = tape.grad(wv);
        const double bc1 = 1.0 - std::pow(b1, s), bc2 = 1.0 - std::pow(b2, s);
        for (std::int64_t i = 0; i < w.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v2[i] = b2 * v2[i] + (1.0 - b2) * g[i] * g[i];
            w[i] -= lr * (m[i] / bc1) / (std::sqrt(v2[i] / bc2) + eps_adam);
        }
    }
    Tensor4 out = ew::map(w, [](double t) { return 0.5 * (std::tanh(t) + 1.0); });
    detail::clamp01_(out);
    return out;
}

// Gaussian noise "attack": x + N(0, sigma^2), clamped.
inline Tensor4 gn(const Tensor4& x, double sigma, std::uint64_t seed) {
    require(sigma >= 0.0, "gn: sigma must be >= 0, got ", sigma);
    Rng rng = Rng::stream(seed, 0x676eull);
    Tensor4 out = gaussian_noise(x, sigma, rng);
    detail::clamp01_(out);
    return out;
}

inline Tensor4 run_attack(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels,
                          const AttackConfig& cfg) {
    cfg.validate();
    const double a = cfg.step_size();
    switch (cfg.kind) {
        case Kind::FGSM: return fgsm(c, x, labels, cfg.eps);
        case Kind::FFGSM: return ffgsm(c, x, labels, cfg.eps, a, cfg.seed);
        case Kind::BIM: return bim(c, x, labels, cfg.eps, a, cfg.steps);
        case Kind::PGD: return pgd(c, x, labels, cfg.eps, a, cfg.steps, true, cfg.seed);
        case Kind::PGD_L2: return pgd_l2(c, x, labels, cfg.eps, cfg.alpha > 0.0 ? cfg.alpha : cfg.eps / 4.0,
                                         cfg.steps, true, cfg.seed);
        case Kind::MIFGSM: return mifgsm(c, x, labels, cfg.eps, a, cfg.steps, cfg.momentum_decay);
        case Kind::DIFGSM:
            return difgsm(c, x, labels, cfg.eps, a, cfg.steps, cfg.di_prob, cfg.di_delta, cfg.seed);
        case Kind::TPGD: return tpgd(c, x, labels, cfg.eps, a, cfg.steps, cfg.target_class, cfg.seed);
        case Kind::CW: return cw(c, x, labels, cfg.cw_c, cfg.cw_kappa, cfg.steps, cfg.cw_lr);
        case Kind::GN: return gn(x, cfg.sigma, cfg.seed);
    }
    fail("run_attack: unhandled attack kind");
}

}  // namespace robustedge::attacks

#endif  // ROBUSTEDGE_ATTACKS_HPP
