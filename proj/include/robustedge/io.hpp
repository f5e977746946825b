#ifndef ROBUSTEDGE_IO_HPP
#define ROBUSTEDGE_IO_HPP

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "robustedge/calibration.hpp"
#include "robustedge/classifier.hpp"
#include "robustedge/detector.hpp"
#include "robustedge/early_exit.hpp"
#include "robustedge/energy_model.hpp"
#include "robustedge/metrics.hpp"
#include "robustedge/tensor.hpp"

namespace robustedge::io {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// ---- raw tensor container ---------------------------------------------------
// Little-endian payload behind an 8-byte magic, a dtype byte and four i64
// dims. The sidecar manifest (JSON) carries the dataset-level description.

enum class Dtype : std::uint8_t { u8 = 0, f32 = 1, f64 = 2, i32 = 3 };

inline std::size_t dtype_size(Dtype d) {
    switch (d) {
        case Dtype::u8: return 1;
        case Dtype::f32: return 4;
        case Dtype::f64: return 8;
        case Dtype::i32: return 4;
    }
    fail("unknown dtype code ", static_cast<int>(d));
}

struct RawTensor {
    Dtype dtype = Dtype::f64;
    Shape4 shape;
    std::vector<unsigned char> bytes;
};

inline constexpr char kTensorMagic[8] = {'R', 'E', 'D', 'G', 'T', 'N', 'S', '1'};

inline void write_raw_tensor(const fs::path& path, const RawTensor& t) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    f.write(kTensorMagic, 8);
    const auto d = static_cast<std::uint8_t>(t.dtype);
    f.write(reinterpret_cast<const char*>(&d), 1);
    const std::int64_t dims[4] = {t.shape.n, t.shape.c, t.shape.h, t.shape.w};
    f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
    f.write(reinterpret_cast<const char*>(t.bytes.data()), static_cast<std::streamsize>(t.bytes.size()));
    require(f.good(), "write failed for '", path.string(), "'");
}

inline RawTensor read_raw_tensor(const fs::path& path) {
    std::ifstream f(path, std::ios::binary | std::ios::ate);
    require(f.good(), "cannot open '", path.string(), "'");
    const std::int64_t file_size = static_cast<std::int64_t>(f.tellg());
    f.seekg(0);
    char magic[8];
    f.read(magic, 8);
    require(f.good() && std::memcmp(magic, kTensorMagic, 8) == 0, "'", path.string(),
            "' is not a tensor file (bad magic)");
    std::uint8_t d = 0;
    f.read(reinterpret_cast<char*>(&d), 1);
    require(d <= 3, "'", path.string(), "': unknown dtype code ", static_cast<int>(d));
    RawTensor t;
    t.dtype = static_cast<Dtype>(d);
    std::int64_t dims[4];
    f.read(reinterpret_cast<char*>(dims), sizeof(dims));
    t.shape = {dims[0], dims[1], dims[2], dims[3]};
    require(t.shape.n >= 0 && t.shape.c >= 0 && t.shape.h >= 0 && t.shape.w >= 0, "'", path.string(),
            "': negative dimension in header");
    const std::int64_t header = 8 + 1 + 32;
    const std::int64_t expected = t.shape.count() * static_cast<std::int64_t>(dtype_size(t.dtype));
    require(file_size - header == expected, "'", path.string(), "': payload is ", file_size - header,
            " bytes but header declares ", expected, " (", t.shape.count(), " elements of ",
            dtype_size(t.dtype), " bytes after a ", header, "-byte header)");
    t.bytes.resize(static_cast<std::size_t>(expected));
    f.read(reinterpret_cast<char*>(t.bytes.data()), expected);
    require(f.good(), "read failed for '", path.string(), "'");
    return t;
}

inline std::string file_hash(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot open '", path.string(), "' for hashing");
    Fnv1a h;
    char buf[65536];
    while (f.read(buf, sizeof(buf)) || f.gcount() > 0) h.update(buf, static_cast<std::size_t>(f.gcount()));
    return h.hex();
}

// ---- datasets ---------------------------------------------------------------

struct AttackMeta {
    std::string kind;
    double eps = 0.0;
    std::string source_classifier_hash;
    json extra;
};

struct DatasetManifest {
    std::string name;
    std::int64_t channels = 3, height = 32, width = 32;
    std::int64_t count = 0;
    std::int64_t num_classes = 0;
    double range_lo = 0.0, range_hi = 1.0;
    std::string images_file;  // relative to the manifest's directory
    std::string labels_file;
    bool has_attack = false;
    AttackMeta attack;
    json provenance;
    fs::path base_dir;  // set on load

    fs::path images_path() const { return base_dir / images_file; }
    fs::path labels_path() const { return base_dir / labels_file; }
};

inline void save_manifest(const fs::path& path, const DatasetManifest& m) {
    json j;
    j["format_version"] = 1;
    j["name"] = m.name;
    j["shape"] = {m.channels, m.height, m.width};
    j["count"] = m.count;
    j["num_classes"] = m.num_classes;
    j["range"] = {m.range_lo, m.range_hi};
    j["images_file"] = m.images_file;
    j["labels_file"] = m.labels_file;
    if (m.has_attack) {
        json a;
        a["kind"] = m.attack.kind;
        a["eps"] = m.attack.eps;
        a["source_classifier_hash"] = m.attack.source_classifier_hash;
        if (!m.attack.extra.is_null()) a["params"] = m.attack.extra;
        j["attack"] = a;
    }
    if (!m.provenance.is_null()) j["provenance"] = m.provenance;
    std::ofstream f(path);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    f << j.dump(2) << "\n";
}

inline DatasetManifest load_manifest(const fs::path& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open manifest '", path.string(), "'");
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail("manifest '", path.string(), "' is not valid JSON: ", e.what());
    }
    DatasetManifest m;
    m.name = j.at("name").get<std::string>();
    const auto shape = j.at("shape");
    require(shape.size() == 3, "manifest '", path.string(), "': shape must be [C,H,W]");
    m.channels = shape[0].get<std::int64_t>();
    m.height = shape[1].get<std::int64_t>();
    m.width = shape[2].get<std::int64_t>();
    m.count = j.at("count").get<std::int64_t>();
    m.num_classes = j.at("num_classes").get<std::int64_t>();
    if (j.contains("range")) {
        m.range_lo = j["range"][0].get<double>();
        m.range_hi = j["range"][1].get<double>();
    }
    m.images_file = j.at("images_file").get<std::string>();
    m.labels_file = j.at("labels_file").get<std::string>();
    if (j.contains("attack")) {
        m.has_attack = true;
        m.attack.kind = j["attack"].value("kind", "");
        m.attack.eps = j["attack"].value("eps", 0.0);
        m.attack.source_classifier_hash = j["attack"].value("source_classifier_hash", "");
        if (j["attack"].contains("params")) m.attack.extra = j["attack"]["params"];
    }
    if (j.contains("provenance")) m.provenance = j["provenance"];
    m.base_dir = path.parent_path();
    return m;
}

struct Dataset {
    Tensor4 images;           // scaled to [0,1]
    std::vector<int> labels;
    DatasetManifest manifest;
};

// Loads and validates a dataset: byte sizes against the manifest, labels
// against [0, num_classes), and pixel values into [0,1] (u8 sources scaled
// by 1/255, float sources validated).
inline Dataset load_dataset(const DatasetManifest& m) {
    Dataset d;
    d.manifest = m;
    const RawTensor imgs = read_raw_tensor(m.images_path());
    require(imgs.shape.n == m.count && imgs.shape.c == m.channels && imgs.shape.h == m.height &&
                imgs.shape.w == m.width,
            "dataset '", m.name, "': image file shape ", to_string(imgs.shape), " does not match manifest (",
            m.count, ",", m.channels, ",", m.height, ",", m.width, ")");
    std::vector<double> v(static_cast<std::size_t>(imgs.shape.count()));
    if (imgs.dtype == Dtype::u8) {
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(imgs.bytes[i]) / 255.0;
    } else if (imgs.dtype == Dtype::f32) {
        const float* p = reinterpret_cast<const float*>(imgs.bytes.data());
        for (std::size_t i = 0; i < v.size(); ++i) {
            v[i] = static_cast<double>(p[i]);
            require(v[i] >= 0.0 && v[i] <= 1.0, "dataset '", m.name, "': pixel ", v[i],
                    " outside [0,1] at byte offset ", 41 + i * 4, " of '", m.images_path().string(), "'");
        }
    } else {
        fail("dataset '", m.name, "': images must be u8 or f32, got dtype code ",
             static_cast<int>(imgs.dtype));
    }
    d.images = Tensor4::from_vector(imgs.shape, std::move(v));
    if (m.channels == 1) {
        // grayscale sources are channel-tripled; the detector front is RGB
        Tensor4 rgb = Tensor4::zeros({m.count, 3, m.height, m.width});
        const std::int64_t hw = m.height * m.width;
        for (std::int64_t i = 0; i < m.count; ++i)
            for (std::int64_t ch = 0; ch < 3; ++ch)
                std::copy_n(d.images.data() + i * hw, hw, rgb.data() + (i * 3 + ch) * hw);
        d.images = std::move(rgb);
    }

    const RawTensor lbl = read_raw_tensor(m.labels_path());
    require(lbl.dtype == Dtype::i32, "dataset '", m.name, "': labels must be i32");
    require(lbl.shape.count() == m.count, "dataset '", m.name, "': ", lbl.shape.count(), " labels for ",
            m.count, " samples");
    const std::int32_t* lp = reinterpret_cast<const std::int32_t*>(lbl.bytes.data());
    d.labels.resize(static_cast<std::size_t>(m.count));
    for (std::int64_t i = 0; i < m.count; ++i) {
        require(lp[i] >= 0 && lp[i] < m.num_classes, "dataset '", m.name, "': label ", lp[i], " out of [0,",
                m.num_classes, ") at index ", i, " (byte offset ", 41 + i * 4, " of '",
                m.labels_path().string(), "')");
        d.labels[static_cast<std::size_t>(i)] = lp[i];
    }
    return d;
}

inline Dataset load_dataset(const fs::path& manifest_path) { return load_dataset(load_manifest(manifest_path)); }

// Writes images (+labels) as a dataset directory entry and returns the
// manifest path. dtype u8 snaps pixels to the 8-bit grid; f32 keeps them.
inline fs::path write_dataset(const fs::path& dir, const std::string& name, const Tensor4& images,
                              const std::vector<int>& labels, std::int64_t num_classes, Dtype dtype,
                              const AttackMeta* attack = nullptr, const json& provenance = {}) {
    require(dtype == Dtype::u8 || dtype == Dtype::f32, "write_dataset: images must be u8 or f32");
    require(static_cast<std::int64_t>(labels.size()) == images.shape().n, "write_dataset: ", labels.size(),
            " labels for ", images.shape().n, " images");
    fs::create_directories(dir);

    RawTensor imgs;
    imgs.dtype = dtype;
    imgs.shape = images.shape();
    if (dtype == Dtype::u8) {
        imgs.bytes.resize(static_cast<std::size_t>(images.size()));
        for (std::int64_t i = 0; i < images.size(); ++i) {
            const double x = std::min(1.0, std::max(0.0, images[i]));
            imgs.bytes[static_cast<std::size_t>(i)] = static_cast<unsigned char>(std::lround(x * 255.0));
        }
    } else {
        imgs.bytes.resize(static_cast<std::size_t>(images.size()) * 4);
        float* p = reinterpret_cast<float*>(imgs.bytes.data());
        for (std::int64_t i = 0; i < images.size(); ++i)
            p[i] = static_cast<float>(std::min(1.0, std::max(0.0, images[i])));
    }
    write_raw_tensor(dir / (name + ".images.bin"), imgs);

    RawTensor lbl;
    lbl.dtype = Dtype::i32;
    lbl.shape = {images.shape().n, 1, 1, 1};
    lbl.bytes.resize(labels.size() * 4);
    std::int32_t* lp = reinterpret_cast<std::int32_t*>(lbl.bytes.data());
    for (std::size_t i = 0; i < labels.size(); ++i) lp[i] = labels[i];
    write_raw_tensor(dir / (name + ".labels.bin"), lbl);

    DatasetManifest m;
    m.name = name;
    m.channels = images.shape().c;
    m.height = images.shape().h;
    m.width = images.shape().w;
    m.count = images.shape().n;
    m.num_classes = num_classes;
    m.images_file = name + ".images.bin";
    m.labels_file = name + ".labels.bin";
    if (attack) {
        m.has_attack = true;
        m.attack = *attack;
    }
    m.provenance = provenance;
    const fs::path mpath = dir / (name + ".manifest.json");
    save_manifest(mpath, m);
    return mpath;
}

// s_nat sampling: `count` distinct samples, deterministic per seed.
inline Tensor4 sample_nat(const Tensor4& train_images, std::int64_t count, std::uint64_t seed) {
    require(count >= 1, "sample_nat: count must be >= 1, got ", count);
    require(count <= train_images.shape().n, "sample_nat: requested ", count, " samples from a set of ",
            train_images.shape().n);
    Rng rng = Rng::stream(seed, 0x735f6e6174ull);
    const auto idx = rng.sample_without_replacement(train_images.shape().n, count);
    return train_images.gather_samples(idx);
}

// ---- checkpoints ------------------------------------------------------------
// One binary container for both model kinds: magic, JSON descriptor, f32
// payload. f32 storage makes round trips bit-exact once weights were saved.

inline constexpr char kCkptMagic[8] = {'R', 'E', 'D', 'G', 'C', 'K', 'P', '1'};

namespace detail {

inline void write_ckpt(const fs::path& path, const json& meta, const std::vector<float>& payload) {
    std::ofstream f(path, std::ios::binary);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    f.write(kCkptMagic, 8);
    const std::string m = meta.dump();
    const std::uint64_t mlen = m.size();
    const std::uint64_t plen = payload.size();
    f.write(reinterpret_cast<const char*>(&mlen), 8);
    f.write(m.data(), static_cast<std::streamsize>(m.size()));
    f.write(reinterpret_cast<const char*>(&plen), 8);
    f.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * 4));
    require(f.good(), "write failed for '", path.string(), "'");
}

inline std::pair<json, std::vector<float>> read_ckpt(const fs::path& path) {
    std::ifstream f(path, std::ios::binary);
    require(f.good(), "cannot open checkpoint '", path.string(), "'");
    char magic[8];
    f.read(magic, 8);
    require(f.good() && std::memcmp(magic, kCkptMagic, 8) == 0, "'", path.string(),
            "' is not a checkpoint (bad magic)");
    std::uint64_t mlen = 0;
    f.read(reinterpret_cast<char*>(&mlen), 8);
    std::string m(mlen, '\0');
    f.read(m.data(), static_cast<std::streamsize>(mlen));
    std::uint64_t plen = 0;
    f.read(reinterpret_cast<char*>(&plen), 8);
    std::vector<float> payload(plen);
    f.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(plen * 4));
    require(f.good(), "checkpoint '", path.string(), "' is truncated");
    json meta;
    try {
        meta = json::parse(m);
    } catch (const std::exception& e) {
        fail("checkpoint '", path.string(), "': bad metadata: ", e.what());
    }
    return {std::move(meta), std::move(payload)};
}

inline void append_weights(std::vector<float>& payload, const Tensor4& t) {
    for (std::int64_t i = 0; i < t.size(); ++i) payload.push_back(static_cast<float>(t[i]));
}

inline Tensor4 take_weights(const std::vector<float>& payload, std::size_t& pos, const Shape4& shape) {
    const auto n = static_cast<std::size_t>(shape.count());
    require(pos + n <= payload.size(), "checkpoint payload too short: need ", pos + n, " floats, have ",
            payload.size());
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(payload[pos + i]);
    pos += n;
    return Tensor4::from_vector(shape, std::move(v));
}

inline json meta_to_json(const std::map<std::string, std::string>& m) {
    json j = json::object();
    for (const auto& [k, v] : m) j[k] = v;
    return j;
}

inline std::map<std::string, std::string> meta_from_json(const json& j) {
    std::map<std::string, std::string> m;
    if (j.is_object())
        for (const auto& [k, v] : j.items()) m[k] = v.get<std::string>();
    return m;
}

}  // namespace detail

inline void save_detector(const fs::path& path, const DetectorState& d) {
    json meta;
    meta["format_version"] = 1;
    meta["kind"] = "detector";
    json spec;
    spec["name"] = d.spec.name;
    json layers = json::array();
    for (const auto& l : d.spec.layers)
        layers.push_back({{"in", l.in_channels},
                          {"out", l.out_channels},
                          {"kernel", l.kernel},
                          {"stride", l.stride},
                          {"padding", l.padding},
                          {"relu_after", l.relu_after}});
    spec["layers"] = layers;
    meta["spec"] = spec;
    json quant = json::array();
    for (const auto& q : d.quant) quant.push_back({{"bits", q.bits}, {"scale", q.scale}});
    meta["quant"] = quant;
    meta["frozen"] = d.frozen;
    meta["quantize_activations"] = d.quantize_activations;
    meta["metadata"] = detail::meta_to_json(d.metadata);

    std::vector<float> payload;
    for (const auto& w : d.weights) detail::append_weights(payload, w);
    detail::write_ckpt(path, meta, payload);
}

inline DetectorState load_detector(const fs::path& path) {
    auto [meta, payload] = detail::read_ckpt(path);
    require(meta.value("kind", "") == "detector", "'", path.string(), "' is not a detector checkpoint (kind='",
            meta.value("kind", ""), "')");
    DetectorState d;
    d.spec.name = meta["spec"]["name"].get<std::string>();
    for (const auto& l : meta["spec"]["layers"]) {
        DetectorLayerSpec ls;
        ls.in_channels = l["in"].get<std::int64_t>();
        ls.out_channels = l["out"].get<std::int64_t>();
        ls.kernel = l["kernel"].get<int>();
        ls.stride = l["stride"].get<int>();
        ls.padding = l["padding"].get<int>();
        ls.relu_after = l["relu_after"].get<bool>();
        d.spec.layers.push_back(ls);
    }
    d.spec.validate();
    for (const auto& q : meta["quant"]) d.quant.push_back(QuantSpec{q["bits"].get<int>(), q["scale"].get<double>()});
    d.frozen = meta["frozen"].get<std::vector<bool>>();
    d.quantize_activations = meta["quantize_activations"].get<bool>();
    d.metadata = detail::meta_from_json(meta["metadata"]);
    std::size_t pos = 0;
    for (const auto& l : d.spec.layers)
        d.weights.push_back(detail::take_weights(payload, pos, {l.out_channels, l.in_channels, l.kernel, l.kernel}));
    require(pos == payload.size(), "detector checkpoint '", path.string(), "': ", payload.size() - pos,
            " trailing floats");
    return d;
}

inline void save_classifier(const fs::path& path, const ClassifierState& c) {
    json meta;
    meta["format_version"] = 1;
    meta["kind"] = "classifier";
    json spec;
    spec["name"] = c.spec.name;
    spec["num_classes"] = c.spec.num_classes;
    json convs = json::array();
    for (const auto& l : c.spec.convs)
        convs.push_back({{"in", l.in_channels},
                         {"out", l.out_channels},
                         {"kernel", l.kernel},
                         {"stride", l.stride},
                         {"padding", l.padding}});
    spec["convs"] = convs;
    meta["spec"] = spec;
    meta["metadata"] = detail::meta_to_json(c.metadata);
    std::vector<float> payload;
    for (std::size_t i = 0; i < c.conv_w.size(); ++i) {
        detail::append_weights(payload, c.conv_w[i]);
        detail::append_weights(payload, c.conv_b[i]);
    }
    detail::append_weights(payload, c.head_w);
    detail::append_weights(payload, c.head_b);
    detail::write_ckpt(path, meta, payload);
}

inline ClassifierState load_classifier(const fs::path& path) {
    auto [meta, payload] = detail::read_ckpt(path);
    require(meta.value("kind", "") == "classifier", "'", path.string(),
            "' is not a classifier checkpoint (kind='", meta.value("kind", ""), "')");
    ClassifierState c;
    c.spec.name = meta["spec"]["name"].get<std::string>();
    c.spec.num_classes = meta["spec"]["num_classes"].get<std::int64_t>();
    for (const auto& l : meta["spec"]["convs"]) {
        ConvLayerSpec ls;
        ls.in_channels = l["in"].get<std::int64_t>();
        ls.out_channels = l["out"].get<std::int64_t>();
        ls.kernel = l["kernel"].get<int>();
        ls.stride = l["stride"].get<int>();
        ls.padding = l["padding"].get<int>();
        c.spec.convs.push_back(ls);
    }
    c.metadata = detail::meta_from_json(meta["metadata"]);
    std::size_t pos = 0;
    for (const auto& l : c.spec.convs) {
        c.conv_w.push_back(detail::take_weights(payload, pos, {l.out_channels, l.in_channels, l.kernel, l.kernel}));
        c.conv_b.push_back(detail::take_weights(payload, pos, {1, l.out_channels, 1, 1}));
    }
    const std::int64_t feat = c.spec.convs.back().out_channels;
    c.head_w = detail::take_weights(payload, pos, {c.spec.num_classes, feat, 1, 1});
    c.head_b = detail::take_weights(payload, pos, {1, c.spec.num_classes, 1, 1});
    require(pos == payload.size(), "classifier checkpoint '", path.string(), "': ", payload.size() - pos,
            " trailing floats");
    return c;
}

// ---- boundary sets ----------------------------------------------------------

inline void save_boundaries(const fs::path& path, const BoundarySet& b, const json& provenance = {}) {
    json j;
    j["format_version"] = 1;
    j["K"] = b.K;
    j["L"] = b.L;
    j["U"] = b.U;
    j["bits"] = b.bits;
    j["detector_hash"] = b.detector_hash;
    j["sample_fingerprint"] = b.sample_fingerprint;
    json bands = json::array();
    for (const auto& band : b.bands) bands.push_back({band.lower, band.upper});
    j["bands"] = bands;
    j["final_threshold"] = b.final_threshold;
    if (!provenance.is_null()) j["provenance"] = provenance;
    std::ofstream f(path);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    f << j.dump(2) << "\n";
}

inline BoundarySet load_boundaries(const fs::path& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open boundary file '", path.string(), "'");
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail("boundary file '", path.string(), "' is not valid JSON: ", e.what());
    }
    BoundarySet b;
    b.K = j.at("K").get<int>();
    b.L = j.at("L").get<int>();
    b.U = j.at("U").get<int>();
    b.bits = j.value("bits", 0);
    b.detector_hash = j.at("detector_hash").get<std::string>();
    b.sample_fingerprint = j.value("sample_fingerprint", "");
    for (const auto& band : j.at("bands")) b.bands.push_back({band[0].get<double>(), band[1].get<double>()});
    b.final_threshold = j.at("final_threshold").get<double>();
    return b;
}

// ---- detection outcomes -----------------------------------------------------

inline void save_outcomes(const fs::path& path, const std::vector<DetectionOutcome>& outcomes,
                          const std::string& detector_hash, const json& provenance = {}) {
    json j;
    j["format_version"] = 1;
    j["detector_hash"] = detector_hash;
    json items = json::array();
    for (const auto& o : outcomes) {
        json it;
        it["verdict"] = to_string(o.verdict);
        it["exit_layer"] = o.exit_layer;
        it["energies"] = o.energies;
        json counts = json::array();
        for (const auto& c : o.layer_counts)
            counts.push_back({{"r_dram", c.r_dram},
                              {"r_cache", c.r_cache},
                              {"r_spad", c.r_spad},
                              {"n_mac", c.n_mac},
                              {"n_acc", c.n_acc}});
        it["counts"] = counts;
        items.push_back(std::move(it));
    }
    j["outcomes"] = std::move(items);
    if (!provenance.is_null()) j["provenance"] = provenance;
    std::ofstream f(path);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    f << j.dump() << "\n";
}

inline std::vector<DetectionOutcome> load_outcomes(const fs::path& path, std::string* detector_hash = nullptr) {
    std::ifstream f(path);
    require(f.good(), "cannot open outcome file '", path.string(), "'");
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail("outcome file '", path.string(), "' is not valid JSON: ", e.what());
    }
    if (detector_hash) *detector_hash = j.value("detector_hash", "");
    std::vector<DetectionOutcome> out;
    for (const auto& it : j.at("outcomes")) {
        DetectionOutcome o;
        o.verdict = it.at("verdict").get<std::string>() == "adversarial" ? Verdict::adversarial : Verdict::natural;
        o.exit_layer = it.at("exit_layer").get<int>();
        o.energies = it.at("energies").get<std::vector<double>>();
        for (const auto& c : it.at("counts")) {
            AccessCounts a;
            a.r_dram = c.at("r_dram").get<std::int64_t>();
            a.r_cache = c.at("r_cache").get<std::int64_t>();
            a.r_spad = c.at("r_spad").get<std::int64_t>();
            a.n_mac = c.at("n_mac").get<std::int64_t>();
            a.n_acc = c.at("n_acc").get<std::int64_t>();
            o.layer_counts.push_back(a);
        }
        out.push_back(std::move(o));
    }
    return out;
}

// ---- hardware profiles ------------------------------------------------------

inline void save_profile(const fs::path& path, const HardwareProfile& p) {
    json j;
    j["format_version"] = 1;
    j["technology"] = p.technology;
    j["pe_array_size"] = p.pe_array_size;
    j["word_bits"] = p.word_bits;
    json mac = json::object(), acc = json::object();
    for (const auto& [bits, u] : p.mac_per_op) mac[cat(bits)] = static_cast<double>(u) / 1.0e4;
    for (const auto& [bits, u] : p.acc_per_op) acc[cat(bits)] = static_cast<double>(u) / 1.0e4;
    j["e_mac_pj"] = mac;
    j["e_acc_pj"] = acc;
    j["e_dram_pj"] = static_cast<double>(p.dram_per_read) / 1.0e4;
    j["e_cache_pj"] = static_cast<double>(p.cache_per_read) / 1.0e4;
    j["e_spad_pj"] = static_cast<double>(p.spad_per_read) / 1.0e4;
    j["e_transmit_mj"] = static_cast<double>(p.transmit_per_image) / 1.0e13;
    j["amortize_weights"] = p.amortize_weights;
    j["include_weight_dram"] = p.include_weight_dram;
    std::ofstream f(path);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    f << j.dump(2) << "\n";
}

inline HardwareProfile load_profile(const fs::path& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open profile '", path.string(), "'");
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail("profile '", path.string(), "' is not valid JSON: ", e.what());
    }
    HardwareProfile p;
    p.technology = j.value("technology", "unspecified");
    p.pe_array_size = j.value("pe_array_size", 32);
    p.word_bits = j.value("word_bits", 16);
    for (const auto& [k, v] : j.at("e_mac_pj").items()) p.mac_per_op[std::stoi(k)] = units_from_pj(v.get<double>());
    for (const auto& [k, v] : j.at("e_acc_pj").items()) p.acc_per_op[std::stoi(k)] = units_from_pj(v.get<double>());
    p.dram_per_read = units_from_pj(j.at("e_dram_pj").get<double>());
    p.cache_per_read = units_from_pj(j.at("e_cache_pj").get<double>());
    p.spad_per_read = units_from_pj(j.at("e_spad_pj").get<double>());
    p.transmit_per_image = units_from_mj(j.at("e_transmit_mj").get<double>());
    p.amortize_weights = j.value("amortize_weights", true);
    p.include_weight_dram = j.value("include_weight_dram", false);
    for (const auto& [bits, u] : p.mac_per_op)
        require(u > 0, "profile '", path.string(), "': non-positive MAC energy for ", bits, " bits");
    require(p.dram_per_read > 0 && p.cache_per_read > 0 && p.spad_per_read > 0 && p.transmit_per_image > 0,
            "profile '", path.string(), "': all energies must be positive");
    return p;
}

// ---- reports ----------------------------------------------------------------

inline json energy_report_json(const EnergyReport& r) {
    json j;
    j["baseline"] = r.baseline;
    j["bits"] = r.bits;
    j["n_nat"] = r.n_nat;
    j["n_adv"] = r.n_adv;
    j["transmitted_nat"] = r.transmitted_nat;
    j["transmitted_adv"] = r.transmitted_adv;
    j["p"] = r.p;
    j["q"] = r.q;
    j["e_tn_joules"] = r.e_tn_joules;
    j["e_ta_joules"] = r.e_ta_joules;
    j["e_d_joules"] = r.e_d_joules;
    j["total_joules"] = r.total_joules;
    j["e_tn_units"] = r.e_tn_units;
    j["e_ta_units"] = r.e_ta_units;
    j["e_d_units"] = r.e_d_units;
    j["e_d_breakdown_units"] = {{"dram", r.d_dram}, {"cache", r.d_cache}, {"spad", r.d_spad},
                                {"mac", r.d_mac},   {"acc", r.d_acc}};
    if (r.has_task_metrics) {
        j["error_pct"] = r.error_pct;
        j["accuracy_pct"] = r.accuracy_pct;
    }
    return j;
}

inline json eval_report_json(const EvalReport& r) {
    json j;
    j["auc"] = r.auc;
    j["f1"] = r.f1;
    j["error_pct"] = r.error_pct;
    j["accuracy_pct"] = r.accuracy_pct;
    j["confusion"] = {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}};
    j["positive_class"] = "adversarial";
    return j;
}

inline void write_json(const fs::path& path, const json& j) {
    std::ofstream f(path);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    f << j.dump(2) << "\n";
}

inline json read_json(const fs::path& path) {
    std::ifstream f(path);
    require(f.good(), "cannot open '", path.string(), "'");
    json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        fail("'", path.string(), "' is not valid JSON: ", e.what());
    }
    return j;
}

}  // namespace robustedge::io

#endif  // ROBUSTEDGE_IO_HPP
