#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "robustedge/io.hpp"
#include "robustedge/qes_trainer.hpp"
#include "robustedge/synth.hpp"

using namespace robustedge;
namespace fs = std::filesystem;

namespace {
struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("robustedge_test_" + hash_bytes(this, sizeof(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

std::vector<unsigned char> slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}
}  // namespace

TEST(RawTensor, RoundTrip) {
    TempDir tmp;
    io::RawTensor t;
    t.dtype = io::Dtype::f32;
    t.shape = {2, 3, 4, 5};
    t.bytes.resize(2 * 3 * 4 * 5 * 4);
    for (std::size_t i = 0; i < t.bytes.size(); ++i) t.bytes[i] = static_cast<unsigned char>(i % 251);
    const fs::path p = tmp.path / "t.bin";
    io::write_raw_tensor(p, t);
    const io::RawTensor r = io::read_raw_tensor(p);
    EXPECT_EQ(r.dtype, t.dtype);
    EXPECT_EQ(r.shape, t.shape);
    EXPECT_EQ(r.bytes, t.bytes);
}

TEST(RawTensor, TruncatedPayloadNamesSizes) {
    TempDir tmp;
    io::RawTensor t;
    t.dtype = io::Dtype::u8;
    t.shape = {4, 3, 32, 32};
    t.bytes.resize(4 * 3 * 32 * 32);
    const fs::path p = tmp.path / "t.bin";
    io::write_raw_tensor(p, t);
    // chop one byte off
    fs::resize_file(p, fs::file_size(p) - 1);
    try {
        io::read_raw_tensor(p);
        FAIL() << "expected size mismatch";
    } catch (const Error& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("12287"), std::string::npos);  // actual
        EXPECT_NE(msg.find("12288"), std::string::npos);  // expected
    }
}

TEST(Dataset, ManifestShapeArithmetic) {
    TempDir tmp;
    // 4 samples of 3x32x32 as u8
    Tensor4 images = Tensor4::full({4, 3, 32, 32}, 1.0);
    const std::vector<int> labels{0, 1, 2, 3};
    const fs::path mpath = io::write_dataset(tmp.path, "tiny", images, labels, 4, io::Dtype::u8);
    const io::Dataset d = io::load_dataset(mpath);
    EXPECT_EQ(d.images.shape(), (Shape4{4, 3, 32, 32}));
    // all-255 source pixels scale to exactly 1.0
    for (std::int64_t i = 0; i < d.images.size(); ++i) ASSERT_DOUBLE_EQ(d.images[i], 1.0);
    EXPECT_EQ(d.labels, labels);
}

TEST(Dataset, OutOfRangeLabelRejected) {
    TempDir tmp;
    Tensor4 images = Tensor4::full({2, 3, 8, 8}, 0.5);
    const fs::path mpath = io::write_dataset(tmp.path, "bad", images, {0, 7}, 4, io::Dtype::u8);
    EXPECT_THROW(io::load_dataset(mpath), Error);
}

TEST(Dataset, TwoLoadsBitIdentical) {
    TempDir tmp;
    synth::SynthSpec spec;
    spec.count = 20;
    spec.seed = 9;
    const auto ds = synth::make_dataset(spec);
    const fs::path mpath = io::write_dataset(tmp.path, "synth", ds.images, ds.labels, spec.classes, io::Dtype::u8);
    const io::Dataset a = io::load_dataset(mpath);
    const io::Dataset b = io::load_dataset(mpath);
    EXPECT_EQ(tensor_fingerprint(a.images), tensor_fingerprint(b.images));
    EXPECT_EQ(a.labels, b.labels);
}

TEST(Dataset, U8RoundTripPreservesGridValues) {
    TempDir tmp;
    synth::SynthSpec spec;
    spec.count = 10;
    const auto ds = synth::make_dataset(spec);  // synth output is already on the u8 grid
    const fs::path mpath = io::write_dataset(tmp.path, "grid", ds.images, ds.labels, spec.classes, io::Dtype::u8);
    const io::Dataset d = io::load_dataset(mpath);
    for (std::int64_t i = 0; i < d.images.size(); ++i) ASSERT_DOUBLE_EQ(d.images[i], ds.images[i]);
}

TEST(Dataset, GrayscaleChannelTripled) {
    TempDir tmp;
    Tensor4 gray = Tensor4::zeros({2, 1, 4, 4});
    for (std::int64_t i = 0; i < gray.size(); ++i) gray[i] = static_cast<double>(i % 255) / 255.0;
    const fs::path mpath = io::write_dataset(tmp.path, "gray", gray, {0, 1}, 2, io::Dtype::f32);
    const io::Dataset d = io::load_dataset(mpath);
    EXPECT_EQ(d.images.shape().c, 3);
    for (std::int64_t b = 0; b < 2; ++b)
        for (std::int64_t i = 0; i < 16; ++i) {
            const double v = d.images[b * 48 + i];
            EXPECT_DOUBLE_EQ(d.images[b * 48 + 16 + i], v);
            EXPECT_DOUBLE_EQ(d.images[b * 48 + 32 + i], v);
        }
}

TEST(Dataset, AttackMetadataRoundTrip) {
    TempDir tmp;
    Tensor4 images = Tensor4::full({2, 3, 8, 8}, 0.25);
    io::AttackMeta attack;
    attack.kind = "pgd";
    attack.eps = 8.0 / 255.0;
    attack.source_classifier_hash = "deadbeefdeadbeef";
    const fs::path mpath = io::write_dataset(tmp.path, "adv", images, {0, 1}, 2, io::Dtype::f32, &attack);
    const io::DatasetManifest m = io::load_manifest(mpath);
    EXPECT_TRUE(m.has_attack);
    EXPECT_EQ(m.attack.kind, "pgd");
    EXPECT_DOUBLE_EQ(m.attack.eps, 8.0 / 255.0);
    EXPECT_EQ(m.attack.source_classifier_hash, "deadbeefdeadbeef");
}

TEST(SampleNat, DistinctAndDeterministic) {
    Tensor4 images = Tensor4::zeros({50, 1, 1, 1});
    for (std::int64_t i = 0; i < 50; ++i) images[i] = static_cast<double>(i);
    const Tensor4 a = io::sample_nat(images, 20, 77);
    const Tensor4 b = io::sample_nat(images, 20, 77);
    EXPECT_EQ(tensor_fingerprint(a), tensor_fingerprint(b));
    std::vector<bool> seen(50, false);
    for (std::int64_t i = 0; i < 20; ++i) {
        const auto v = static_cast<std::size_t>(a[i]);
        EXPECT_FALSE(seen[v]);
        seen[v] = true;
    }
    EXPECT_THROW(io::sample_nat(images, 51, 1), Error);
}

TEST(SampleNat, FullCountIsPermutation) {
    Tensor4 images = Tensor4::zeros({10, 1, 1, 1});
    for (std::int64_t i = 0; i < 10; ++i) images[i] = static_cast<double>(i);
    const Tensor4 s = io::sample_nat(images, 10, 5);
    std::vector<double> v(s.vec());
    std::sort(v.begin(), v.end());
    for (std::int64_t i = 0; i < 10; ++i) EXPECT_DOUBLE_EQ(v[static_cast<std::size_t>(i)], static_cast<double>(i));
}

TEST(Checkpoint, DetectorRoundTripBitExact) {
    TempDir tmp;
    synth::SynthSpec sspec;
    sspec.count = 8;
    const auto ds = synth::make_dataset(sspec);
    DetectorState d0 = DetectorState::random_init(DetectorSpec::preset("D1"), 3);
    TrainConfig cfg = TrainConfig::defaults_for_depth(3);
    cfg.epochs_per_layer = 1;
    cfg.batch_size = 4;
    const DetectorState d = qes_train(d0, ds.images, ds.images, cfg).detector;

    const fs::path p1 = tmp.path / "det.ckpt";
    io::save_detector(p1, d);
    const DetectorState loaded = io::load_detector(p1);
    const fs::path p2 = tmp.path / "det2.ckpt";
    io::save_detector(p2, loaded);
    EXPECT_EQ(slurp(p1), slurp(p2));  // save -> load -> save is identity

    EXPECT_EQ(loaded.spec.name, d.spec.name);
    EXPECT_EQ(loaded.quant.size(), d.quant.size());
    for (std::size_t i = 0; i < d.quant.size(); ++i) EXPECT_EQ(loaded.quant[i].bits, d.quant[i].bits);
    EXPECT_EQ(loaded.metadata.at("bits"), "16");

    // load(save(load(x))) == load(x)
    const DetectorState again = io::load_detector(p2);
    EXPECT_EQ(again.weight_hash(), loaded.weight_hash());
}

TEST(Checkpoint, ClassifierRoundTripBitExact) {
    TempDir tmp;
    const ClassifierState c = ClassifierState::random_init(ClassifierSpec::preset("small", 10), 11);
    const fs::path p1 = tmp.path / "clf.ckpt";
    io::save_classifier(p1, c);
    const ClassifierState loaded = io::load_classifier(p1);
    const fs::path p2 = tmp.path / "clf2.ckpt";
    io::save_classifier(p2, loaded);
    EXPECT_EQ(slurp(p1), slurp(p2));
    EXPECT_EQ(loaded.spec.num_classes, 10);
    EXPECT_EQ(loaded.conv_w.size(), c.conv_w.size());
}

TEST(Checkpoint, KindMismatchRejected) {
    TempDir tmp;
    const ClassifierState c = ClassifierState::random_init(ClassifierSpec::preset("small", 4), 1);
    const fs::path p = tmp.path / "clf.ckpt";
    io::save_classifier(p, c);
    EXPECT_THROW(io::load_detector(p), Error);
}

TEST(Boundaries, FileRoundTrip) {
    TempDir tmp;
    BoundarySet b;
    b.K = 92;
    b.L = 30;
    b.U = 5;
    b.bits = 16;
    b.detector_hash = "0123456789abcdef";
    b.sample_fingerprint = "fedcba9876543210";
    b.bands = {{0.1, 0.2}, {0.3, 0.4}};
    b.final_threshold = 0.25;
    const fs::path p = tmp.path / "b.json";
    io::save_boundaries(p, b);
    const BoundarySet r = io::load_boundaries(p);
    EXPECT_EQ(r.K, 92);
    EXPECT_EQ(r.depth(), 3);
    EXPECT_DOUBLE_EQ(r.final_threshold, 0.25);
    EXPECT_DOUBLE_EQ(r.bands[1].upper, 0.4);
    EXPECT_EQ(r.detector_hash, b.detector_hash);
}

TEST(Outcomes, FileRoundTrip) {
    TempDir tmp;
    DetectionOutcome o;
    o.verdict = Verdict::adversarial;
    o.exit_layer = 2;
    o.energies = {0.5, 1.5};
    AccessCounts c;
    c.n_mac = 55296;
    c.r_dram = 3072;
    o.layer_counts = {c, c};
    const fs::path p = tmp.path / "o.json";
    io::save_outcomes(p, {o, o}, "hashhash");
    std::string hash;
    const auto loaded = io::load_outcomes(p, &hash);
    EXPECT_EQ(hash, "hashhash");
    ASSERT_EQ(loaded.size(), 2u);
    EXPECT_EQ(loaded[0].verdict, Verdict::adversarial);
    EXPECT_EQ(loaded[0].exit_layer, 2);
    EXPECT_EQ(loaded[0].layer_counts[1].n_mac, 55296);
    EXPECT_DOUBLE_EQ(loaded[1].energies[1], 1.5);
}

TEST(Profile, RoundTripPreservesUnits) {
    TempDir tmp;
    const HardwareProfile p = HardwareProfile::cmos45_default();
    const fs::path path = tmp.path / "profile.json";
    io::save_profile(path, p);
    const HardwareProfile r = io::load_profile(path);
    EXPECT_EQ(r.mac(16), p.mac(16));
    EXPECT_EQ(r.mac(4), p.mac(4));
    EXPECT_EQ(r.acc(12), p.acc(12));
    EXPECT_EQ(r.dram_per_read, p.dram_per_read);
    EXPECT_EQ(r.transmit_per_image, p.transmit_per_image);
}
