#include <gtest/gtest.h>

#include <cmath>

#include "robustedge/attacks.hpp"
#include "robustedge/rng.hpp"

using namespace robustedge;
namespace atk = robustedge::attacks;

namespace {

// Classifier with no conv stack: logits are a linear map of the pooled
// channels, so input gradients have a known sign structure.
ClassifierState linear_toy(double a0, double a1, double b1 = 0.0) {
    ClassifierState c;
    c.spec.name = "toy";
    c.spec.num_classes = 2;
    c.head_w = Tensor4::zeros({2, 3, 1, 1});
    for (std::int64_t i = 0; i < 3; ++i) {
        c.head_w[i] = a0;       // class 0 row
        c.head_w[3 + i] = a1;   // class 1 row
    }
    c.head_b = Tensor4::zeros({1, 2, 1, 1});
    c.head_b[1] = b1;
    return c;
}

ClassifierState small_random(std::uint64_t seed, std::int64_t classes = 4) {
    return ClassifierState::random_init(ClassifierSpec::preset("small", classes), seed);
}

Tensor4 random_images(std::uint64_t seed, std::int64_t n, std::int64_t hw = 8) {
    Rng rng(seed);
    Tensor4 t = Tensor4::zeros({n, 3, hw, hw});
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(0.0, 1.0);
    return t;
}

std::vector<int> zero_labels(std::int64_t n) { return std::vector<int>(static_cast<std::size_t>(n), 0); }

}  // namespace

TEST(Fgsm, ZeroEpsilonIsIdentity) {
    const ClassifierState c = small_random(3);
    const Tensor4 x = random_images(5, 2);
    const Tensor4 adv = atk::fgsm(c, x, zero_labels(2), 0.0);
    for (std::int64_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(adv[i], x[i]);
}

TEST(Fgsm, PositiveGradientPushesEveryPixelUp) {
    // class-0 logit grows with every pixel; true label 0 means the CE
    // gradient w.r.t. x is positive everywhere, so x_adv = x + eps
    const ClassifierState c = linear_toy(-5.0, 5.0);
    const Tensor4 x = Tensor4::full({1, 3, 4, 4}, 0.5);
    const double eps = 8.0 / 255.0;
    const Tensor4 adv = atk::fgsm(c, x, zero_labels(1), eps);
    for (std::int64_t i = 0; i < adv.size(); ++i) EXPECT_DOUBLE_EQ(adv[i], 0.5 + eps);
}

TEST(Fgsm, RejectsOutOfRangeInput) {
    const ClassifierState c = small_random(7);
    Tensor4 x = Tensor4::full({1, 3, 8, 8}, 1.5);
    EXPECT_THROW(atk::fgsm(c, x, zero_labels(1), 0.1), Error);
}

TEST(Pgd, SingleStepNoRestartEqualsFgsm) {
    const ClassifierState c = small_random(11);
    const Tensor4 x = random_images(13, 3);
    const auto labels = zero_labels(3);
    const double eps = 8.0 / 255.0;
    const Tensor4 a = atk::pgd(c, x, labels, eps, eps, 1, false);
    const Tensor4 b = atk::fgsm(c, x, labels, eps);
    for (std::int64_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
}

TEST(Pgd, ConstantLogitsLeaveInputUnchanged) {
    // zero weights -> constant logits -> zero gradient
    ClassifierState c = small_random(17);
    for (auto& w : c.conv_w)
        for (std::int64_t i = 0; i < w.size(); ++i) w[i] = 0.0;
    for (std::int64_t i = 0; i < c.head_w.size(); ++i) c.head_w[i] = 0.0;
    const Tensor4 x = random_images(19, 2);
    const Tensor4 adv = atk::pgd(c, x, zero_labels(2), 8.0 / 255.0, 2.0 / 255.0, 5, false);
    for (std::int64_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(adv[i], x[i]);
}

// L-inf budget and [0,1] range over 1e3 random inputs for the whole
// sign-gradient family.
TEST(AttackProperties, LinfBudgetAndPixelRange) {
    const ClassifierState c = small_random(23);
    const double eps = 8.0 / 255.0;
    const std::int64_t n = 1000;
    const Tensor4 x = random_images(29, n);
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = static_cast<int>(i % 4);

    atk::AttackConfig cfg;
    cfg.eps = eps;
    cfg.steps = 5;
    for (const atk::Kind kind : {atk::Kind::FGSM, atk::Kind::FFGSM, atk::Kind::BIM, atk::Kind::PGD,
                                 atk::Kind::MIFGSM, atk::Kind::DIFGSM, atk::Kind::TPGD}) {
        cfg.kind = kind;
        const Tensor4 adv = atk::run_attack(c, x, labels, cfg);
        double worst = 0.0;
        for (std::int64_t i = 0; i < x.size(); ++i) {
            worst = std::max(worst, std::abs(adv[i] - x[i]));
            ASSERT_GE(adv[i], 0.0) << atk::to_string(kind);
            ASSERT_LE(adv[i], 1.0) << atk::to_string(kind);
        }
        EXPECT_LE(worst, eps + 1e-12) << atk::to_string(kind);
    }
}

TEST(AttackProperties, L2BudgetForPgdL2) {
    const ClassifierState c = small_random(31);
    const std::int64_t n = 200;
    const Tensor4 x = random_images(37, n);
    const double eps = 1.0;
    const Tensor4 adv = atk::pgd_l2(c, x, zero_labels(n), eps, 0.25, 5, true, 7);
    const std::int64_t per = x.size() / n;
    for (std::int64_t b = 0; b < n; ++b) {
        double norm2 = 0.0;
        for (std::int64_t i = 0; i < per; ++i) {
            const double d = adv[b * per + i] - x[b * per + i];
            norm2 += d * d;
        }
        ASSERT_LE(std::sqrt(norm2), eps + 1e-9);
    }
}

TEST(Mifgsm, ZeroDecayEqualsBim) {
    const ClassifierState c = small_random(41);
    const Tensor4 x = random_images(43, 3);
    const auto labels = zero_labels(3);
    const double eps = 8.0 / 255.0, alpha = 2.0 / 255.0;
    const Tensor4 a = atk::mifgsm(c, x, labels, eps, alpha, 4, 0.0);
    const Tensor4 b = atk::bim(c, x, labels, eps, alpha, 4);
    for (std::int64_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(a[i], b[i]);
}

TEST(Tpgd, TowardOwnClassKeepsCorrectPrediction) {
    // pushing toward the label's own class never flips a correct prediction
    const ClassifierState c = linear_toy(4.0, -4.0);
    const std::int64_t n = 100;
    Tensor4 x = random_images(47, n);
    std::vector<int> labels;
    for (std::int64_t b = 0; b < n; ++b) {
        // brighten class-0 samples so they are confidently classified
        for (std::int64_t i = 0; i < x.size() / n; ++i)
            x[b * (x.size() / n) + i] = std::min(1.0, 0.6 + 0.4 * x[b * (x.size() / n) + i]);
        labels.push_back(0);
    }
    ASSERT_EQ(predict_batch(c, x), labels);
    const Tensor4 adv = atk::tpgd(c, x, labels, 8.0 / 255.0, 2.0 / 255.0, 5, 0, 3);
    EXPECT_EQ(predict_batch(c, adv), labels);
}

TEST(Cw, ZeroTradeoffReducesToDistanceMinimization) {
    const ClassifierState c = small_random(53);
    Rng rng(59);
    Tensor4 x = Tensor4::zeros({2, 3, 8, 8});
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(0.2, 0.8);
    const Tensor4 adv = atk::cw(c, x, zero_labels(2), 0.0, 0.0, 50, 0.01);
    // Adam dithers around the optimum at sub-pixel scale; x_adv stays well
    // under one 8-bit pixel step from x
    EXPECT_LE(linf_norm(sub(adv, x)), 1e-3);
}

TEST(Cw, FlipsLinearToyPrediction) {
    // class 1 wins once the mean pixel drops below (bias / 6), reachable
    // inside [0,1]
    const ClassifierState c = linear_toy(3.0, -3.0, 4.0);
    const Tensor4 x = Tensor4::full({1, 3, 4, 4}, 0.6);
    const auto labels = zero_labels(1);
    ASSERT_EQ(predict_batch(c, x)[0], 0);
    const Tensor4 adv = atk::cw(c, x, labels, 100.0, 0.5, 100, 0.02);
    EXPECT_EQ(predict_batch(c, adv)[0], 1);
    for (std::int64_t i = 0; i < adv.size(); ++i) {
        ASSERT_GE(adv[i], 0.0);
        ASSERT_LE(adv[i], 1.0);
    }
}

TEST(Gn, ZeroSigmaIsIdentity) {
    const Tensor4 x = random_images(61, 2);
    const Tensor4 adv = atk::gn(x, 0.0, 9);
    for (std::int64_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(adv[i], x[i]);
}

TEST(Gn, OutputAlwaysInRange) {
    const Tensor4 x = random_images(67, 10);
    const Tensor4 adv = atk::gn(x, 0.5, 11);
    for (std::int64_t i = 0; i < adv.size(); ++i) {
        ASSERT_GE(adv[i], 0.0);
        ASSERT_LE(adv[i], 1.0);
    }
}

TEST(Gn, MonteCarloPreClampStd) {
    // pre-clamp noise std over 1e6 draws within [0.099, 0.101] at sigma 0.1
    const Tensor4 x = Tensor4::full({1, 1, 1000, 1000}, 0.5);  // 0.5 keeps clamp inactive at sigma 0.1 for nearly all draws
    const Tensor4 adv = atk::gn(x, 0.1, 13);
    double sum = 0.0, sum2 = 0.0;
    for (std::int64_t i = 0; i < adv.size(); ++i) {
        const double d = adv[i] - 0.5;
        sum += d;
        sum2 += d * d;
    }
    const double n = static_cast<double>(adv.size());
    const double stddev = std::sqrt(sum2 / n - (sum / n) * (sum / n));
    EXPECT_GE(stddev, 0.099);
    EXPECT_LE(stddev, 0.101);
}

TEST(Attacks, StochasticKindsDeterministicPerSeed) {
    const ClassifierState c = small_random(71);
    const Tensor4 x = random_images(73, 4);
    const auto labels = zero_labels(4);
    atk::AttackConfig cfg;
    cfg.steps = 3;
    for (const atk::Kind kind : {atk::Kind::PGD, atk::Kind::FFGSM, atk::Kind::DIFGSM, atk::Kind::GN}) {
        cfg.kind = kind;
        cfg.seed = 5;
        const Tensor4 a = atk::run_attack(c, x, labels, cfg);
        const Tensor4 b = atk::run_attack(c, x, labels, cfg);
        EXPECT_EQ(tensor_fingerprint(a), tensor_fingerprint(b)) << atk::to_string(kind);
        cfg.seed = 6;
        const Tensor4 d = atk::run_attack(c, x, labels, cfg);
        EXPECT_NE(tensor_fingerprint(a), tensor_fingerprint(d)) << atk::to_string(kind);
    }
}

TEST(AttackConfig, Validation) {
    atk::AttackConfig cfg;
    cfg.eps = -0.1;
    EXPECT_THROW(cfg.validate(), Error);
    cfg.eps = 0.1;
    cfg.steps = 0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg.steps = 1;
    cfg.sigma = -1.0;
    EXPECT_THROW(cfg.validate(), Error);
}

TEST(AttackConfig, KindParsing) {
    EXPECT_EQ(atk::kind_from_string("pgd"), atk::Kind::PGD);
    EXPECT_EQ(atk::kind_from_string("pgd-l2"), atk::Kind::PGD_L2);
    EXPECT_EQ(atk::kind_from_string("cw"), atk::Kind::CW);
    EXPECT_THROW(atk::kind_from_string("apgd"), Error);
}
