#include <gtest/gtest.h>

#include <cmath>

#include "robustedge/calibration.hpp"
#include "robustedge/early_exit.hpp"
#include "robustedge/rng.hpp"

using namespace robustedge;

namespace {
Tensor4 random_images(std::uint64_t seed, std::int64_t n, std::int64_t hw = 16) {
    Rng rng(seed);
    Tensor4 t = Tensor4::zeros({n, 3, hw, hw});
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(0.0, 1.0);
    return t;
}

// boundary set with hand-chosen bands, fingerprinted for this detector
BoundarySet manual_boundaries(const DetectorState& d, double l1, double u1, double l2, double u2, double th) {
    BoundarySet b;
    b.K = 92;
    b.L = 30;
    b.U = 5;
    b.bands = {{l1, u1}, {l2, u2}};
    b.final_threshold = th;
    b.detector_hash = d.weight_hash();
    b.sample_fingerprint = "manual";
    return b;
}
}  // namespace

TEST(Detect, NaturalExitAtLayerOneSkipsDeeperLayers) {
    const DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 3);
    const Tensor4 x = random_images(5, 1);
    const auto fwd = forward_with_energies(d, x, 3);
    // lower band above E^1: immediate natural exit
    const BoundarySet b = manual_boundaries(d, fwd.batch_energies[0] + 1.0, fwd.batch_energies[0] + 2.0, 0.0,
                                            1.0, 0.5);
    const DetectionOutcome o = detect(d, b, x);
    EXPECT_EQ(o.verdict, Verdict::natural);
    EXPECT_EQ(o.exit_layer, 1);
    EXPECT_EQ(o.energies.size(), 1u);
    EXPECT_EQ(o.layer_counts.size(), 1u);
}

TEST(Detect, AdversarialExitAtLayerTwo) {
    const DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 7);
    const Tensor4 x = random_images(11, 1);
    const auto fwd = forward_with_energies(d, x, 3);
    // layer 1 band straddles E^1 (continue); layer 2 upper bound below E^2
    const BoundarySet b = manual_boundaries(d, fwd.batch_energies[0] - 0.1, fwd.batch_energies[0] + 0.1,
                                            fwd.batch_energies[1] - 0.2, fwd.batch_energies[1] - 0.1, 0.5);
    const DetectionOutcome o = detect(d, b, x);
    EXPECT_EQ(o.verdict, Verdict::adversarial);
    EXPECT_EQ(o.exit_layer, 2);
    EXPECT_EQ(o.energies.size(), 2u);
    EXPECT_DOUBLE_EQ(o.energies[0], fwd.batch_energies[0]);
    EXPECT_DOUBLE_EQ(o.energies[1], fwd.batch_energies[1]);
}

TEST(Detect, TieOnBandForwardsToNextLayer) {
    const DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 13);
    const Tensor4 x = random_images(17, 1);
    const auto fwd = forward_with_energies(d, x, 3);
    // E^1 exactly on the lower bound: must continue, not exit natural
    const BoundarySet b = manual_boundaries(d, fwd.batch_energies[0], fwd.batch_energies[0], 0.0,
                                            1e9, 1e9);
    const DetectionOutcome o = detect(d, b, x);
    EXPECT_GT(o.exit_layer, 1);
}

TEST(Detect, FinalLayerTieIsNatural) {
    const DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 19);
    const Tensor4 x = random_images(23, 1);
    const auto fwd = forward_with_energies(d, x, 3);
    // wide bands force reaching the final layer; threshold set exactly to E^n
    const BoundarySet b = manual_boundaries(d, -1.0, 1e9, -1.0, 1e9, fwd.batch_energies[2]);
    const DetectionOutcome o = detect(d, b, x);
    EXPECT_EQ(o.exit_layer, 3);
    EXPECT_EQ(o.verdict, Verdict::natural);
}

TEST(Detect, FingerprintMismatchRejected) {
    const DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 29);
    BoundarySet b = manual_boundaries(d, 0.0, 1.0, 0.0, 1.0, 0.5);
    b.detector_hash = "0000000000000000";
    EXPECT_THROW(detect(d, b, random_images(31, 1)), Error);
}

TEST(Detect, BatchInputRejected) {
    const DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 37);
    const BoundarySet b = manual_boundaries(d, 0.0, 1.0, 0.0, 1.0, 0.5);
    EXPECT_THROW(detect(d, b, random_images(41, 2)), Error);
}

TEST(Score, AllZeroWeightsScoreZero) {
    DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 43);
    for (auto& w : d.weights)
        for (std::int64_t i = 0; i < w.size(); ++i) w[i] = 0.0;
    EXPECT_DOUBLE_EQ(score(d, random_images(47, 1)), 0.0);
}

TEST(Score, EqualsFullDepthFinalEnergyAndIgnoresBoundaries) {
    const DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 53);
    const Tensor4 x = random_images(59, 1);
    const auto fwd = forward_with_energies(d, x, 3);
    EXPECT_DOUBLE_EQ(score(d, x), fwd.batch_energies[2]);
    const auto batch = scores(d, random_images(61, 5));
    EXPECT_EQ(batch.size(), 5u);
}

TEST(Detect, AgreementWithScoreWhenNoEarlyExitFires) {
    const DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 67);
    const Tensor4 samples = random_images(71, 20);
    // bands so wide nothing exits early
    BoundarySet b = manual_boundaries(d, -1e9, 1e9, -1e9, 1e9, 0.0);
    const auto fwd = forward_with_energies(d, samples, 3);
    b.final_threshold = EnergyDistribution::from_samples(3, fwd.sample_energies[2]).sorted_energies[10];
    for (std::int64_t i = 0; i < 20; ++i) {
        const Tensor4 x = samples.slice_sample(i);
        const DetectionOutcome o = detect(d, b, x);
        EXPECT_EQ(o.exit_layer, 3);
        const bool adversarial = score(d, x) > b.final_threshold;
        EXPECT_EQ(o.verdict == Verdict::adversarial, adversarial);
    }
}

TEST(Detect, MonotoneComputeAndFullDepthCountsMatchNetwork) {
    const DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 73);
    const Tensor4 samples = random_images(79, 30, 32);
    const BoundarySet tight = generate_boundaries(d, samples, 92, 30, 5);
    const auto network_counts = count_network(d.spec, 32, 32);
    for (std::int64_t i = 0; i < samples.shape().n; ++i) {
        const DetectionOutcome o = detect(d, tight, samples.slice_sample(i));
        ASSERT_EQ(o.layer_counts.size(), static_cast<std::size_t>(o.exit_layer));
        std::int64_t prev = 0;
        std::int64_t cum = 0;
        for (const auto& c : o.layer_counts) {
            cum += c.total_ops();
            EXPECT_GT(cum, prev);
            prev = cum;
        }
        for (int l = 0; l < o.exit_layer; ++l) {
            EXPECT_EQ(o.layer_counts[static_cast<std::size_t>(l)].n_mac,
                      network_counts[static_cast<std::size_t>(l)].n_mac);
            EXPECT_EQ(o.layer_counts[static_cast<std::size_t>(l)].r_dram,
                      network_counts[static_cast<std::size_t>(l)].r_dram);
        }
    }
}

TEST(Detect, CalibrationConsistencyBound) {
    // on the calibration set itself, the share of naturals flagged at the
    // final layer stays within (100-K)% + 1/N
    const DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 83);
    const std::int64_t n = 111;
    const Tensor4 s_nat = random_images(89, n);
    const int K = 92;
    const BoundarySet b = generate_boundaries(d, s_nat, K, 30, 5);
    std::int64_t flagged_final = 0;
    for (std::int64_t i = 0; i < n; ++i) {
        const DetectionOutcome o = detect(d, b, s_nat.slice_sample(i));
        if (o.exit_layer == 3 && o.verdict == Verdict::adversarial) ++flagged_final;
    }
    EXPECT_LE(static_cast<double>(flagged_final) / static_cast<double>(n),
              (100.0 - K) / 100.0 + 1.0 / static_cast<double>(n));
}

TEST(Detect, PerSampleEnergiesMatchBatchForward) {
    // detect() on each sample sees the same energies as the batched forward,
    // so calibration and deployment agree
    const DetectorState d = [] {
        DetectorState state = DetectorState::random_init(DetectorSpec::preset("D1"), 97);
        state.quant.assign(3, QuantSpec{16, 0.0});
        return state;
    }();
    const Tensor4 samples = random_images(101, 6);
    const auto fwd = forward_with_energies(d, samples, 3);
    BoundarySet wide = manual_boundaries(d, -1e9, 1e9, -1e9, 1e9, 1e9);
    for (std::int64_t i = 0; i < 6; ++i) {
        const DetectionOutcome o = detect(d, wide, samples.slice_sample(i));
        for (int l = 0; l < 3; ++l)
            EXPECT_DOUBLE_EQ(o.energies[static_cast<std::size_t>(l)],
                             fwd.sample_energies[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)]);
    }
}
