#include <gtest/gtest.h>

#include <cmath>

#include "robustedge/classifier.hpp"
#include "robustedge/rng.hpp"
#include "robustedge/synth.hpp"

using namespace robustedge;

namespace {
// two linearly separable blobs rendered as flat color images
std::pair<Tensor4, std::vector<int>> two_blobs(std::int64_t n, std::uint64_t seed) {
    Rng rng(seed);
    Tensor4 images = Tensor4::zeros({n, 3, 8, 8});
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) {
        const int label = static_cast<int>(i % 2);
        labels[static_cast<std::size_t>(i)] = label;
        const double base = label == 0 ? 0.25 : 0.75;
        for (std::int64_t j = 0; j < 3 * 8 * 8; ++j)
            images[i * 3 * 8 * 8 + j] = std::min(1.0, std::max(0.0, base + rng.normal(0.0, 0.05)));
    }
    return {std::move(images), std::move(labels)};
}
}  // namespace

TEST(Classifier, UntrainedAccuracyNearChance) {
    synth::SynthSpec s;
    s.count = 400;
    s.classes = 10;
    const auto ds = synth::make_dataset(s);
    const ClassifierState c = ClassifierState::random_init(ClassifierSpec::preset("small", 10), 5);
    const double acc = accuracy(c, ds.images, ds.labels);
    // binomial CI around 0.1 for n=400 (about 4.5 sigma)
    EXPECT_LT(acc, 0.1 + 4.5 * std::sqrt(0.1 * 0.9 / 400.0));
}

TEST(Classifier, LearnsSeparableBlobs) {
    // >= 99% within 20 epochs on linearly separable data
    const auto [images, labels] = two_blobs(200, 3);
    ClassifierTrainOpts opts;
    opts.epochs = 20;
    opts.lr = 0.05;
    opts.batch_size = 20;
    opts.seed = 7;
    ClassifierTrainReport report;
    const ClassifierState c = train_classifier(images, labels, ClassifierSpec::preset("small", 2), opts, &report);
    EXPECT_GE(report.final_train_accuracy, 0.99);
}

TEST(Classifier, TrainReportsMatchAccuracy) {
    const auto [images, labels] = two_blobs(100, 11);
    ClassifierTrainOpts opts;
    opts.epochs = 5;
    opts.batch_size = 25;
    ClassifierTrainReport report;
    const ClassifierState c = train_classifier(images, labels, ClassifierSpec::preset("small", 2), opts, &report);
    EXPECT_DOUBLE_EQ(report.final_train_accuracy, accuracy(c, images, labels));
}

TEST(Classifier, DeterministicPerSeed) {
    const auto [images, labels] = two_blobs(60, 13);
    ClassifierTrainOpts opts;
    opts.epochs = 2;
    opts.batch_size = 20;
    opts.seed = 21;
    const ClassifierState a = train_classifier(images, labels, ClassifierSpec::preset("small", 2), opts);
    const ClassifierState b = train_classifier(images, labels, ClassifierSpec::preset("small", 2), opts);
    EXPECT_EQ(a.weight_hash(), b.weight_hash());
}

TEST(Predict, TieBreaksLowestIndex) {
    ClassifierState c = ClassifierState::random_init(ClassifierSpec::preset("small", 10), 1);
    for (auto& w : c.conv_w)
        for (std::int64_t i = 0; i < w.size(); ++i) w[i] = 0.0;
    for (std::int64_t i = 0; i < c.head_w.size(); ++i) c.head_w[i] = 0.0;
    for (std::int64_t i = 0; i < c.head_b.size(); ++i) c.head_b[i] = 0.0;
    const Tensor4 x = Tensor4::full({1, 3, 8, 8}, 0.5);
    const auto [cls, logits] = predict(c, x);
    EXPECT_EQ(cls, 0);
    for (const double l : logits) EXPECT_DOUBLE_EQ(l, logits[0]);
}

TEST(Predict, InvariantUnderLogitShift) {
    Rng rng(17);
    ClassifierState c = ClassifierState::random_init(ClassifierSpec::preset("small", 6), 19);
    Tensor4 x = Tensor4::zeros({1, 3, 8, 8});
    for (std::int64_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(0.0, 1.0);
    const auto before = predict(c, x);
    for (std::int64_t i = 0; i < c.head_b.size(); ++i) c.head_b[i] += 3.7;  // shift every logit
    const auto after = predict(c, x);
    EXPECT_EQ(before.first, after.first);
}

TEST(Classifier, LabelValidation) {
    const auto [images, labels] = two_blobs(10, 23);
    std::vector<int> bad = labels;
    bad[0] = 5;
    ClassifierTrainOpts opts;
    opts.epochs = 1;
    EXPECT_THROW(train_classifier(images, bad, ClassifierSpec::preset("small", 2), opts), Error);
}

TEST(Classifier, PresetsDiffer) {
    const ClassifierSpec a = ClassifierSpec::preset("small", 10);
    const ClassifierSpec b = ClassifierSpec::preset("wide", 10);
    EXPECT_NE(a.convs[0].out_channels, b.convs[0].out_channels);
    EXPECT_THROW(ClassifierSpec::preset("huge", 10), Error);
}
