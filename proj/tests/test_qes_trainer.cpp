#include <gtest/gtest.h>

#include <cmath>

#include "robustedge/qes_trainer.hpp"
#include "robustedge/rng.hpp"

using namespace robustedge;

namespace {
Tensor4 random_images(std::uint64_t seed, std::int64_t n, std::int64_t hw = 16, double hi = 0.5) {
    Rng rng(seed);
    Tensor4 t = Tensor4::zeros({n, 3, hw, hw});
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = rng.uniform(0.0, hi);
    return t;
}

std::string layer_hash(const DetectorState& d, int layer) {
    const auto& w = d.weights[static_cast<std::size_t>(layer - 1)];
    return hash_bytes(w.data(), w.vec().size() * sizeof(double));
}

TrainConfig quick_config(int epochs, std::int64_t batch = 8) {
    TrainConfig cfg = TrainConfig::defaults_for_depth(3);
    cfg.epochs_per_layer = epochs;
    cfg.batch_size = batch;
    return cfg;
}
}  // namespace

TEST(QesLoss, HandValues) {
    EXPECT_DOUBLE_EQ(qes_loss(0.1, 0.0, 0.1, 0.9, 1), 0.0);
    EXPECT_DOUBLE_EQ(qes_loss(0.0, 0.9, 0.1, 0.9, 0), 0.0);
    EXPECT_DOUBLE_EQ(qes_loss(0.0, 0.4, 0.1, 0.9, 0), 0.25);  // (0.5)^2
    EXPECT_DOUBLE_EQ(qes_loss(0.3, 0.4, 0.1, 0.9, 1), 0.04);  // (0.2)^2
    EXPECT_THROW(qes_loss(0.1, 0.2, 0.1, 0.9, 2), Error);
}

TEST(TrainConfig, LambdaOrderingValidatedBeforeAnyEpoch) {
    DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 3);
    const Tensor4 x = random_images(5, 8);
    TrainConfig cfg = quick_config(1);
    cfg.lambda_adv = {0.9, 0.8, 2.0};  // not increasing
    const std::string before = layer_hash(d, 1);
    EXPECT_THROW(train_layer(d, 1, x, x, cfg), Error);
    EXPECT_EQ(layer_hash(d, 1), before);  // nothing ran

    cfg = quick_config(1);
    cfg.lambda_nat = {0.95, 0.1, 0.1};  // lambda_a[1] not > lambda_n[1]
    EXPECT_THROW(train_layer(d, 1, x, x, cfg), Error);
}

TEST(TrainLayer, ZeroEpochsLeaveWeightsUnchanged) {
    DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 7);
    const Tensor4 x = random_images(9, 8);
    const std::string before = layer_hash(d, 1);
    train_layer(d, 1, x, x, quick_config(0));
    EXPECT_EQ(layer_hash(d, 1), before);
}

TEST(TrainLayer, ZeroLearningRateLeavesWeightsUnchanged) {
    DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 11);
    const Tensor4 x = random_images(13, 8);
    TrainConfig cfg = quick_config(3);
    cfg.learning_rates = {0.0, 0.0, 0.0};
    const std::string before = layer_hash(d, 1);
    train_layer(d, 1, x, x, cfg);
    EXPECT_EQ(layer_hash(d, 1), before);
}

TEST(TrainLayer, MismatchedDatasetLengthsRejected) {
    DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 17);
    EXPECT_THROW(train_layer(d, 1, random_images(1, 8), random_images(2, 6), quick_config(1)), Error);
}

TEST(TrainLayer, SeparableEnergiesOrderAfterTraining) {
    // x_adv = 2 * x_nat: after training layer 1 the adversarial batch energy
    // must exceed the natural one
    DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 19);
    d.quant[0] = QuantSpec{16, 0.0};
    const Tensor4 x_nat = random_images(23, 32, 16, 0.5);
    const Tensor4 x_adv = scale(x_nat, 2.0);
    TrainConfig cfg = quick_config(50, 16);
    const LayerTrainStats stats = train_layer(d, 1, x_nat, x_adv, cfg);
    const double e_nat = forward_with_energies(d, x_nat, 1).batch_energies[0];
    const double e_adv = forward_with_energies(d, x_adv, 1).batch_energies[0];
    EXPECT_GT(e_adv, e_nat);
    // non-divergence contract: running epoch loss at the end <= epoch 1
    ASSERT_GE(stats.epoch_losses.size(), 2u);
    EXPECT_LE(stats.epoch_losses.back(), stats.epoch_losses.front());
}

TEST(TrainLayer, FreezingPreservesEarlierLayersBitExactly) {
    DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 29);
    const Tensor4 x_nat = random_images(31, 16);
    const Tensor4 x_adv = random_images(37, 16);
    TrainConfig cfg = quick_config(2);

    // replicate the Algorithm-1 schedule layer by layer
    for (int i = 1; i <= 3; ++i) {
        for (int j = 0; j < i; ++j) d.quant[static_cast<std::size_t>(j)] = QuantSpec{cfg.bits, 0.0};
        for (int j = 0; j + 1 < i; ++j) d.frozen[static_cast<std::size_t>(j)] = true;
        std::vector<std::string> before;
        for (int j = 1; j < i; ++j) before.push_back(layer_hash(d, j));
        const std::string trained_before = layer_hash(d, i);
        train_layer(d, i, x_nat, x_adv, cfg);
        for (int j = 1; j < i; ++j)
            EXPECT_EQ(layer_hash(d, j), before[static_cast<std::size_t>(j - 1)]) << "layer " << j;
        EXPECT_NE(layer_hash(d, i), trained_before) << "layer " << i << " should have moved";
        for (int j = i + 1; j <= 3; ++j) EXPECT_EQ(d.quant[static_cast<std::size_t>(j - 1)].bits, 0);
    }
}

TEST(TrainLayer, RefusesFrozenLayer) {
    DetectorState d = DetectorState::random_init(DetectorSpec::preset("D1"), 41);
    d.frozen[0] = true;
    EXPECT_THROW(train_layer(d, 1, random_images(43, 4), random_images(47, 4), quick_config(1)), Error);
}

TEST(QesTrain, SingleLayerDetectorReducesToTrainLayer) {
    const DetectorSpec spec = DetectorSpec::from_channels("S1", {3, 8});
    const DetectorState d0 = DetectorState::random_init(spec, 53);
    const Tensor4 x_nat = random_images(59, 12);
    const Tensor4 x_adv = random_images(61, 12);
    TrainConfig cfg;
    cfg.lambda_nat = {0.1};
    cfg.lambda_adv = {0.9};
    cfg.learning_rates = {0.005};
    cfg.epochs_per_layer = 3;
    cfg.batch_size = 6;

    const QesTrainResult full = qes_train(d0, x_nat, x_adv, cfg);

    DetectorState manual = d0;
    manual.quantize_activations = cfg.quantize_activations;
    manual.quant[0] = QuantSpec{cfg.bits, 0.0};
    train_layer(manual, 1, x_nat, x_adv, cfg);
    EXPECT_EQ(layer_hash(full.detector, 1), layer_hash(manual, 1));
}

TEST(QesTrain, DeterministicPerSeed) {
    const DetectorState d0 = DetectorState::random_init(DetectorSpec::preset("D1"), 67);
    const Tensor4 x_nat = random_images(71, 12);
    const Tensor4 x_adv = random_images(73, 12);
    const TrainConfig cfg = quick_config(2, 6);
    const QesTrainResult a = qes_train(d0, x_nat, x_adv, cfg);
    const QesTrainResult b = qes_train(d0, x_nat, x_adv, cfg);
    EXPECT_EQ(a.detector.weight_hash(), b.detector.weight_hash());
}

TEST(QesTrain, FinalStateFullyQuantizedAndFrozen) {
    const DetectorState d0 = DetectorState::random_init(DetectorSpec::preset("D1"), 79);
    const Tensor4 x = random_images(83, 8);
    TrainConfig cfg = quick_config(1, 4);
    cfg.bits = 12;
    const DetectorState d = qes_train(d0, x, scale(x, 1.5), cfg).detector;
    for (int i = 0; i < 3; ++i) {
        EXPECT_EQ(d.quant[static_cast<std::size_t>(i)].bits, 12);
        EXPECT_GT(d.quant[static_cast<std::size_t>(i)].scale, 0.0);  // frozen at export
        EXPECT_TRUE(d.frozen[static_cast<std::size_t>(i)]);
    }
    EXPECT_EQ(d.metadata.at("bits"), "12");
    EXPECT_EQ(d.metadata.at("input_h"), "16");
}

TEST(QesTrain, TrainingOrderIsLayerOneToN) {
    // layer stats come back in order 1..n and every layer actually moved
    const DetectorState d0 = DetectorState::random_init(DetectorSpec::preset("D1"), 89);
    const Tensor4 x = random_images(97, 8);
    const QesTrainResult r = qes_train(d0, x, scale(x, 1.7), quick_config(2, 4));
    ASSERT_EQ(r.layer_stats.size(), 3u);
    for (int i = 1; i <= 3; ++i)
        EXPECT_NE(layer_hash(r.detector, i), layer_hash(d0, i)) << "layer " << i;
}

TEST(QesTrain, QuantizedForwardUsedDuringTraining) {
    // a 4-bit run and a 16-bit run from the same init land on different
    // weights, so the quantized path is live inside the loss
    const DetectorState d0 = DetectorState::random_init(DetectorSpec::preset("D1"), 101);
    const Tensor4 x = random_images(103, 8);
    TrainConfig a = quick_config(2, 4);
    a.bits = 4;
    TrainConfig b = quick_config(2, 4);
    b.bits = 16;
    const DetectorState da = qes_train(d0, x, scale(x, 1.5), a).detector;
    const DetectorState db = qes_train(d0, x, scale(x, 1.5), b).detector;
    EXPECT_NE(layer_hash(da, 1), layer_hash(db, 1));
}
