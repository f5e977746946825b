// robustedge: end-to-end driver for energy-separation adversarial detection
// at the edge. Subcommands cover the whole workflow: synthesize or import a
// dataset, train the cloud classifier, generate attacks, QES-train the
// detector, calibrate confidence boundaries, detect/evaluate, and produce
// energy reports, plus ablation and transfer drivers.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <string>
#include <vector>

#include "robustedge/attacks.hpp"
#include "robustedge/calibration.hpp"
#include "robustedge/classifier.hpp"
#include "robustedge/detector.hpp"
#include "robustedge/early_exit.hpp"
#include "robustedge/energy_model.hpp"
#include "robustedge/io.hpp"
#include "robustedge/metrics.hpp"
#include "robustedge/qes_trainer.hpp"
#include "robustedge/synth.hpp"

namespace fs = std::filesystem;
using json = robustedge::io::json;
using namespace robustedge;

namespace {

std::string g_command_line;

// eps accepted as a rational string ("8/255") or a decimal
double parse_eps(const std::string& s) {
    const auto slash = s.find('/');
    if (slash != std::string::npos) {
        const double num = std::stod(s.substr(0, slash));
        const double den = std::stod(s.substr(slash + 1));
        require(den != 0.0, "eps '", s, "': zero denominator");
        return num / den;
    }
    return std::stod(s);
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto comma = s.find(',', pos);
        out.push_back(std::stod(s.substr(pos, comma - pos)));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return out;
}

// "80..96" or "80..96:4" or "80,84,92"
std::vector<int> parse_int_list_or_range(const std::string& s) {
    const auto dots = s.find("..");
    if (dots != std::string::npos) {
        const int lo = std::stoi(s.substr(0, dots));
        const auto colon = s.find(':', dots);
        const int hi = std::stoi(s.substr(dots + 2, colon - dots - 2));
        const int step = colon == std::string::npos ? 1 : std::stoi(s.substr(colon + 1));
        require(step > 0 && hi >= lo, "bad range '", s, "'");
        std::vector<int> out;
        for (int v = lo; v <= hi; v += step) out.push_back(v);
        return out;
    }
    std::vector<int> out;
    for (const double v : parse_double_list(s)) out.push_back(static_cast<int>(v));
    return out;
}

json provenance(const std::string& command, std::uint64_t seed,
                const std::vector<fs::path>& inputs = {}) {
    json p;
    p["tool"] = "robustedge";
    p["version"] = kVersion;
    p["command"] = command;
    p["seed"] = seed;
    {
        Fnv1a h;
        h.update(g_command_line);
        p["config_hash"] = h.hex();
    }
    if (!inputs.empty()) {
        json in = json::object();
        for (const auto& path : inputs) in[path.string()] = io::file_hash(path);
        p["inputs"] = in;
    }
    return p;
}

HardwareProfile profile_from(const std::string& path) {
    if (path.empty()) return HardwareProfile::cmos45_default();
    return io::load_profile(path);
}

std::vector<bool> verdict_flags(const std::vector<DetectionOutcome>& outcomes) {
    std::vector<bool> out(outcomes.size());
    for (std::size_t i = 0; i < outcomes.size(); ++i) out[i] = outcomes[i].verdict == Verdict::adversarial;
    return out;
}

std::vector<bool> correctness(const ClassifierState& c, const Tensor4& images, const std::vector<int>& labels) {
    const auto pred = predict_batch(c, images);
    std::vector<bool> out(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) out[i] = pred[i] == labels[i];
    return out;
}

EvalReport evaluate_sets(const DetectorState& det, const BoundarySet& bounds, const ClassifierState& clf,
                         const io::Dataset& nat, const io::Dataset& adv) {
    EvalReport r;
    r.scores_nat = scores(det, nat.images);
    r.scores_adv = scores(det, adv.images);
    r.auc = auc(r.scores_nat, r.scores_adv);

    const auto out_nat = detect_all(det, bounds, nat.images);
    const auto out_adv = detect_all(det, bounds, adv.images);
    std::vector<bool> verdicts = verdict_flags(out_nat);
    const auto adv_verdicts = verdict_flags(out_adv);
    verdicts.insert(verdicts.end(), adv_verdicts.begin(), adv_verdicts.end());
    std::vector<bool> truth(out_nat.size(), false);
    truth.insert(truth.end(), out_adv.size(), true);
    r.confusion = confusion(verdicts, truth);
    r.f1 = f1_from_confusion(r.confusion);

    const auto ea = error_accuracy(adv_verdicts, correctness(clf, adv.images, adv.labels),
                                   verdict_flags(out_nat), correctness(clf, nat.images, nat.labels));
    r.error_pct = ea.error_pct;
    r.accuracy_pct = ea.accuracy_pct;
    return r;
}

// Fig.-4 style grouped bars (E_TA / E_TN / E_D per system), emitted as SVG.
void write_energy_svg(const fs::path& path, const std::vector<std::pair<std::string, EnergyReport>>& systems) {
    double emax = 1e-12;
    for (const auto& [name, r] : systems)
        emax = std::max({emax, r.e_ta_joules, r.e_tn_joules, r.e_d_joules});
    const int W = 160 * static_cast<int>(systems.size()) + 80;
    const int H = 300, base = 250, plot_h = 200;
    std::ofstream f(path);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    f << "<svg xmlns='http://www.w3.org/2000/svg' width='" << W << "' height='" << H << "'>\n";
    f << "<style>text{font-family:sans-serif;font-size:11px}</style>\n";
    const char* colors[3] = {"#c0392b", "#2980b9", "#27ae60"};
    const char* labels[3] = {"E_TA", "E_TN", "E_D"};
    for (std::size_t s = 0; s < systems.size(); ++s) {
        const auto& [name, r] = systems[s];
        const double vals[3] = {r.e_ta_joules, r.e_tn_joules, r.e_d_joules};
        const int x0 = 60 + static_cast<int>(s) * 160;
        for (int k = 0; k < 3; ++k) {
            const int h = static_cast<int>(plot_h * vals[k] / emax);
            f << "<rect x='" << x0 + k * 36 << "' y='" << base - h << "' width='28' height='" << h
              << "' fill='" << colors[k] << "'/>\n";
            f << "<text x='" << x0 + k * 36 << "' y='" << base - h - 4 << "'>" << std::setprecision(3)
              << vals[k] << "</text>\n";
        }
        f << "<text x='" << x0 << "' y='" << base + 16 << "'>" << name << "</text>\n";
    }
    for (int k = 0; k < 3; ++k)
        f << "<rect x='" << 60 + k * 70 << "' y='270' width='10' height='10' fill='" << colors[k]
          << "'/><text x='" << 74 + k * 70 << "' y='280'>" << labels[k] << " (J)</text>\n";
    f << "</svg>\n";
}

void write_roc_csv(const fs::path& path, const std::vector<RocPoint>& pts) {
    std::ofstream f(path);
    require(f.good(), "cannot open '", path.string(), "' for writing");
    f << "threshold,fpr,tpr\n";
    for (const auto& p : pts) f << p.threshold << "," << p.fpr << "," << p.tpr << "\n";
}

TrainConfig qes_config_from_flags(int depth, int bits, int epochs, std::int64_t batch, std::uint64_t seed,
                                  const std::string& lambda_adv, const std::string& lambda_nat,
                                  const std::string& lrs, bool no_quant_act) {
    TrainConfig cfg = TrainConfig::defaults_for_depth(depth);
    if (!lambda_adv.empty()) cfg.lambda_adv = parse_double_list(lambda_adv);
    if (!lambda_nat.empty()) cfg.lambda_nat = parse_double_list(lambda_nat);
    if (!lrs.empty()) cfg.learning_rates = parse_double_list(lrs);
    require(!cfg.lambda_adv.empty(), "no lambda_adv defaults for depth ", depth,
            "; pass --lambda-adv explicitly");
    require(!cfg.learning_rates.empty(), "no learning-rate defaults for depth ", depth,
            "; pass --lr explicitly");
    cfg.bits = bits;
    cfg.epochs_per_layer = epochs;
    cfg.batch_size = batch;
    cfg.seed = seed;
    cfg.quantize_activations = !no_quant_act;
    return cfg;
}

// aligned subsample of a natural/adversarial pair (limited-training-data runs)
std::pair<Tensor4, Tensor4> subsample_pair(const Tensor4& nat, const Tensor4& adv, double fraction,
                                           std::uint64_t seed) {
    require(fraction > 0.0 && fraction <= 1.0, "data fraction must be in (0,1], got ", fraction);
    const auto n = static_cast<std::int64_t>(std::llround(fraction * static_cast<double>(nat.shape().n)));
    Rng rng = Rng::stream(seed, 0x66726163ull);
    const auto idx = rng.sample_without_replacement(nat.shape().n, std::max<std::int64_t>(n, 1));
    return {nat.gather_samples(idx), adv.gather_samples(idx)};
}

int run_cli(int argc, char** argv) {
    CLI::App app{"RobustEdge: quantization-enabled energy-separation adversarial detection"};
    app.require_subcommand(1);

    // ---- make-dataset -------------------------------------------------------
    auto* mk = app.add_subcommand("make-dataset", "generate a seeded synthetic image dataset");
    struct {
        std::string family = "waves", out, name = "synth";
        std::int64_t classes = 10, count = 1000, height = 32, width = 32;
        double noise = 0.02;
        std::uint64_t seed = 1, template_seed = 0;
    } mko;
    mk->add_option("--family", mko.family, "waves | blobs");
    mk->add_option("--classes", mko.classes);
    mk->add_option("--count", mko.count);
    mk->add_option("--height", mko.height);
    mk->add_option("--width", mko.width);
    mk->add_option("--noise", mko.noise, "pixel noise std");
    mk->add_option("--seed", mko.seed, "sample-draw seed");
    mk->add_option("--template-seed", mko.template_seed,
                   "class-template seed (0 = derived from family/geometry)");
    mk->add_option("--name", mko.name);
    mk->add_option("--out", mko.out, "output directory")->required();
    mk->callback([&] {
        synth::SynthSpec s;
        s.family = mko.family;
        s.classes = mko.classes;
        s.count = mko.count;
        s.height = mko.height;
        s.width = mko.width;
        s.pixel_noise = mko.noise;
        s.seed = mko.seed;
        s.template_seed = mko.template_seed;
        const auto ds = synth::make_dataset(s);
        const fs::path mpath = io::write_dataset(mko.out, mko.name, ds.images, ds.labels, s.classes,
                                                 io::Dtype::u8, nullptr, provenance("make-dataset", s.seed));
        std::cout << "wrote " << mpath.string() << " (" << s.count << " samples, " << s.classes
                  << " classes)\n";
    });

    // ---- import-cifar -------------------------------------------------------
    auto* imp = app.add_subcommand("import-cifar", "convert CIFAR-10 binary batches into a dataset");
    struct {
        std::string dir, out, name = "cifar10", split = "train";
    } impo;
    imp->add_option("--dir", impo.dir, "directory with data_batch_*.bin / test_batch.bin")->required();
    imp->add_option("--split", impo.split, "train | test");
    imp->add_option("--name", impo.name);
    imp->add_option("--out", impo.out)->required();
    imp->callback([&] {
        std::vector<std::string> files;
        if (impo.split == "train") {
            for (int i = 1; i <= 5; ++i) files.push_back("data_batch_" + std::to_string(i) + ".bin");
        } else if (impo.split == "test") {
            files.push_back("test_batch.bin");
        } else {
            fail("--split must be train or test, got '", impo.split, "'");
        }
        std::vector<double> pixels;
        std::vector<int> labels;
        constexpr std::int64_t rec = 3073;
        for (const auto& name : files) {
            const fs::path p = fs::path(impo.dir) / name;
            std::ifstream f(p, std::ios::binary | std::ios::ate);
            require(f.good(), "cannot open '", p.string(), "'");
            const std::int64_t size = static_cast<std::int64_t>(f.tellg());
            require(size % rec == 0, "'", p.string(), "': size ", size, " not a multiple of ", rec);
            f.seekg(0);
            std::vector<unsigned char> buf(static_cast<std::size_t>(size));
            f.read(reinterpret_cast<char*>(buf.data()), size);
            for (std::int64_t r = 0; r < size / rec; ++r) {
                labels.push_back(buf[static_cast<std::size_t>(r * rec)]);
                for (std::int64_t i = 0; i < 3072; ++i)
                    pixels.push_back(static_cast<double>(buf[static_cast<std::size_t>(r * rec + 1 + i)]) / 255.0);
            }
        }
        const auto n = static_cast<std::int64_t>(labels.size());
        const Tensor4 images = Tensor4::from_vector({n, 3, 32, 32}, std::move(pixels));
        const fs::path mpath = io::write_dataset(impo.out, impo.name + "_" + impo.split, images, labels, 10,
                                                 io::Dtype::u8, nullptr, provenance("import-cifar", 0));
        std::cout << "wrote " << mpath.string() << " (" << n << " samples)\n";
    });

    // ---- train-classifier ---------------------------------------------------
    auto* tc = app.add_subcommand("train-classifier", "train the cloud classifier on natural data");
    struct {
        std::string data, test, preset = "small", out;
        int epochs = 30;
        double lr = 0.04;
        std::int64_t batch = 100;
        std::uint64_t seed = 1;
    } tco;
    tc->add_option("--data", tco.data, "training dataset manifest")->required();
    tc->add_option("--test", tco.test, "test dataset manifest (reports test accuracy)");
    tc->add_option("--preset", tco.preset, "small | wide");
    tc->add_option("--epochs", tco.epochs);
    tc->add_option("--lr", tco.lr);
    tc->add_option("--batch", tco.batch);
    tc->add_option("--seed", tco.seed);
    tc->add_option("--out", tco.out, "checkpoint path")->required();
    tc->callback([&] {
        const io::Dataset train = io::load_dataset(fs::path(tco.data));
        ClassifierTrainOpts opts;
        opts.epochs = tco.epochs;
        opts.lr = tco.lr;
        opts.batch_size = tco.batch;
        opts.seed = tco.seed;
        ClassifierTrainReport report;
        ClassifierState c = train_classifier(
            train.images, train.labels, ClassifierSpec::preset(tco.preset, train.manifest.num_classes), opts,
            &report);
        c.metadata["train_accuracy"] = cat(report.final_train_accuracy);
        std::cout << "train accuracy: " << 100.0 * report.final_train_accuracy << "%\n";
        if (!tco.test.empty()) {
            const io::Dataset test = io::load_dataset(fs::path(tco.test));
            const double acc = accuracy(c, test.images, test.labels);
            c.metadata["test_accuracy"] = cat(acc);
            std::cout << "test accuracy:  " << 100.0 * acc << "%\n";
        }
        io::save_classifier(tco.out, c);
        std::cout << "wrote " << tco.out << " (hash " << c.weight_hash() << ")\n";
    });

    // ---- gen-attacks --------------------------------------------------------
    auto* ga = app.add_subcommand("gen-attacks", "generate an adversarial dataset from a classifier");
    struct {
        std::string classifier, data, out, name, attack = "pgd", eps = "8/255";
        int steps = 10;
        double alpha = 0.0, sigma = 0.1, cw_c = 100.0, cw_kappa = 0.0;
        int target = -1;
        std::uint64_t seed = 1;
    } gao;
    ga->add_option("--classifier", gao.classifier)->required();
    ga->add_option("--data", gao.data, "natural dataset manifest")->required();
    ga->add_option("--attack", gao.attack, "fgsm|ffgsm|bim|pgd|pgd-l2|mifgsm|difgsm|tpgd|cw|gn");
    ga->add_option("--eps", gao.eps, "budget, rational ('8/255') or decimal");
    ga->add_option("--steps", gao.steps);
    ga->add_option("--alpha", gao.alpha, "step size (0 = default eps/4)");
    ga->add_option("--sigma", gao.sigma, "gn noise std");
    ga->add_option("--cw-c", gao.cw_c);
    ga->add_option("--cw-kappa", gao.cw_kappa);
    ga->add_option("--target", gao.target, "tpgd target class (-1 = label+1)");
    ga->add_option("--seed", gao.seed);
    ga->add_option("--name", gao.name, "output dataset name (default <data>_<attack>)");
    ga->add_option("--out", gao.out, "output directory")->required();
    ga->callback([&] {
        const ClassifierState c = io::load_classifier(gao.classifier);
        const io::Dataset data = io::load_dataset(fs::path(gao.data));
        attacks::AttackConfig cfg;
        cfg.kind = attacks::kind_from_string(gao.attack);
        cfg.eps = parse_eps(gao.eps);
        cfg.steps = gao.steps;
        cfg.alpha = gao.alpha;
        cfg.sigma = gao.sigma;
        cfg.cw_c = gao.cw_c;
        cfg.cw_kappa = gao.cw_kappa;
        cfg.target_class = gao.target;
        cfg.seed = gao.seed;
        const Tensor4 adv = attacks::run_attack(c, data.images, data.labels, cfg);

        io::AttackMeta meta;
        meta.kind = gao.attack;
        meta.eps = cfg.eps;
        meta.source_classifier_hash = c.weight_hash();
        meta.extra = {{"steps", cfg.steps}, {"alpha", cfg.step_size()}, {"sigma", cfg.sigma}, {"seed", cfg.seed}};
        const std::string name = gao.name.empty() ? data.manifest.name + "_" + gao.attack : gao.name;
        const fs::path mpath =
            io::write_dataset(gao.out, name, adv, data.labels, data.manifest.num_classes, io::Dtype::f32,
                              &meta, provenance("gen-attacks", gao.seed, {fs::path(gao.data)}));
        const double acc_nat = accuracy(c, data.images, data.labels);
        const double acc_adv = accuracy(c, adv, data.labels);
        std::cout << "classifier accuracy natural " << 100.0 * acc_nat << "% -> adversarial "
                  << 100.0 * acc_adv << "%\n";
        if (cfg.kind == attacks::Kind::CW) {
            double l2 = 0.0;
            for (std::int64_t i = 0; i < adv.shape().n; ++i)
                l2 += l2_norm(sub(adv.slice_sample(i), data.images.slice_sample(i)));
            std::cout << "mean achieved L2 " << l2 / static_cast<double>(adv.shape().n) << "\n";
        }
        std::cout << "wrote " << mpath.string() << "\n";
    });

    // ---- qes-train ----------------------------------------------------------
    auto* qt = app.add_subcommand("qes-train", "train the detector with layer-wise energy separation");
    struct {
        std::string nat, adv, preset = "D1", out, lambda_adv, lambda_nat, lrs;
        int bits = 16, epochs = 100;
        std::int64_t batch = 200;
        std::uint64_t seed = 1;
        double data_fraction = 1.0;
        bool no_quant_act = false;
    } qto;
    qt->add_option("--nat", qto.nat, "natural training manifest")->required();
    qt->add_option("--adv", qto.adv, "adversarial training manifest (aligned with --nat)")->required();
    qt->add_option("--preset", qto.preset, "D1 | D2 | D3");
    qt->add_option("--bits", qto.bits, "quantization width: 4|6|8|12|16");
    qt->add_option("--epochs", qto.epochs, "epochs per layer");
    qt->add_option("--batch", qto.batch);
    qt->add_option("--seed", qto.seed);
    qt->add_option("--lambda-adv", qto.lambda_adv, "per-layer adversarial energy targets, comma list");
    qt->add_option("--lambda-nat", qto.lambda_nat, "per-layer natural energy targets, comma list");
    qt->add_option("--lr", qto.lrs, "per-layer learning rates, comma list");
    qt->add_option("--data-fraction", qto.data_fraction, "train on a random fraction of the data");
    qt->add_flag("--no-quantize-activations", qto.no_quant_act);
    qt->add_option("--out", qto.out, "detector checkpoint path")->required();
    qt->callback([&] {
        const io::Dataset nat = io::load_dataset(fs::path(qto.nat));
        const io::Dataset adv = io::load_dataset(fs::path(qto.adv));
        require(nat.images.shape().n == adv.images.shape().n,
                "natural and adversarial manifests must align: ", nat.images.shape().n, " vs ",
                adv.images.shape().n);
        const DetectorSpec spec = DetectorSpec::preset(qto.preset);
        TrainConfig cfg = qes_config_from_flags(spec.depth(), qto.bits, qto.epochs, qto.batch, qto.seed,
                                                qto.lambda_adv, qto.lambda_nat, qto.lrs, qto.no_quant_act);
        Tensor4 xn = nat.images, xa = adv.images;
        if (qto.data_fraction < 1.0) std::tie(xn, xa) = subsample_pair(xn, xa, qto.data_fraction, qto.seed);
        const DetectorState d0 = DetectorState::random_init(spec, cfg.seed);
        QesTrainResult result = qes_train(d0, xn, xa, cfg);
        for (std::size_t i = 0; i < result.layer_stats.size(); ++i) {
            const auto& losses = result.layer_stats[i].epoch_losses;
            if (!losses.empty())
                std::cout << "layer " << i + 1 << ": epoch loss " << losses.front() << " -> " << losses.back()
                          << "\n";
        }
        result.detector.metadata["nat_manifest_hash"] = io::file_hash(qto.nat);
        result.detector.metadata["adv_manifest_hash"] = io::file_hash(qto.adv);
        io::save_detector(qto.out, result.detector);
        std::cout << "wrote " << qto.out << " (hash " << result.detector.weight_hash() << ")\n";
    });

    // ---- calibrate ----------------------------------------------------------
    auto* cal = app.add_subcommand("calibrate", "generate confidence boundaries from natural samples");
    struct {
        std::string detector, sample_nat, out;
        int K = 92, L = 30, U = 5;
        std::int64_t samples = 1000;
        std::uint64_t seed = 1;
        bool transfer = false;
    } calo;
    cal->add_option("--detector", calo.detector)->required();
    cal->add_option("--sample-nat", calo.sample_nat, "natural dataset manifest to sample s_nat from")->required();
    cal->add_option("--samples", calo.samples, "s_nat size (drawn without replacement)");
    cal->add_option("--K", calo.K);
    cal->add_option("--L", calo.L);
    cal->add_option("--U", calo.U);
    cal->add_option("--seed", calo.seed);
    cal->add_flag("--transfer", calo.transfer, "treat samples as a transfer target domain");
    cal->add_option("--out", calo.out, "boundary file path")->required();
    cal->callback([&] {
        const DetectorState d = io::load_detector(calo.detector);
        const io::Dataset data = io::load_dataset(fs::path(calo.sample_nat));
        const Tensor4 s_nat = io::sample_nat(data.images, std::min(calo.samples, data.images.shape().n),
                                             calo.seed);
        const BoundarySet b = calo.transfer ? recalibrate_for_transfer(d, s_nat, calo.K, calo.L, calo.U)
                                            : generate_boundaries(d, s_nat, calo.K, calo.L, calo.U);
        io::save_boundaries(calo.out, b,
                            provenance("calibrate", calo.seed, {fs::path(calo.detector), fs::path(calo.sample_nat)}));
        std::cout << "wrote " << calo.out << " (final threshold " << b.final_threshold << ")\n";
    });

    // ---- detect -------------------------------------------------------------
    auto* det = app.add_subcommand("detect", "run early-exit detection over a dataset");
    struct {
        std::string detector, boundaries, input, out;
        bool no_early_exit = false;
    } deto;
    det->add_option("--detector", deto.detector)->required();
    det->add_option("--boundaries", deto.boundaries)->required();
    det->add_option("--input", deto.input, "dataset manifest")->required();
    det->add_flag("--no-early-exit", deto.no_early_exit, "always run full depth");
    det->add_option("--out", deto.out, "outcome file path")->required();
    det->callback([&] {
        const DetectorState d = io::load_detector(deto.detector);
        const BoundarySet b = io::load_boundaries(deto.boundaries);
        const io::Dataset data = io::load_dataset(fs::path(deto.input));
        const auto outcomes = detect_all(d, b, data.images, !deto.no_early_exit);
        std::int64_t adv = 0;
        for (const auto& o : outcomes)
            if (o.verdict == Verdict::adversarial) ++adv;
        io::save_outcomes(deto.out, outcomes, d.weight_hash(),
                          provenance("detect", 0, {fs::path(deto.detector), fs::path(deto.boundaries),
                                                   fs::path(deto.input)}));
        std::cout << adv << "/" << outcomes.size() << " flagged adversarial; wrote " << deto.out << "\n";
    });

    // ---- evaluate -----------------------------------------------------------
    auto* ev = app.add_subcommand("evaluate", "AUC / F1 / Error / Accuracy for a detector+classifier pair");
    struct {
        std::string detector, boundaries, classifier, nat, adv, out, roc;
    } evo;
    ev->add_option("--detector", evo.detector)->required();
    ev->add_option("--boundaries", evo.boundaries)->required();
    ev->add_option("--classifier", evo.classifier)->required();
    ev->add_option("--nat", evo.nat, "natural evaluation manifest")->required();
    ev->add_option("--adv", evo.adv, "adversarial evaluation manifest")->required();
    ev->add_option("--roc", evo.roc, "optional ROC points CSV path");
    ev->add_option("--out", evo.out, "report path")->required();
    ev->callback([&] {
        const DetectorState d = io::load_detector(evo.detector);
        const BoundarySet b = io::load_boundaries(evo.boundaries);
        const ClassifierState c = io::load_classifier(evo.classifier);
        const io::Dataset nat = io::load_dataset(fs::path(evo.nat));
        const io::Dataset adv = io::load_dataset(fs::path(evo.adv));
        const EvalReport r = evaluate_sets(d, b, c, nat, adv);
        json j = io::eval_report_json(r);
        j["provenance"] = provenance("evaluate", 0,
                                     {fs::path(evo.detector), fs::path(evo.boundaries), fs::path(evo.classifier),
                                      fs::path(evo.nat), fs::path(evo.adv)});
        io::write_json(evo.out, j);
        if (!evo.roc.empty()) write_roc_csv(evo.roc, roc_points(r.scores_nat, r.scores_adv));
        std::cout << "AUC " << r.auc << "  F1 " << r.f1 << "  Error " << r.error_pct << "%  Accuracy "
                  << r.accuracy_pct << "%\n";
        std::cout << "wrote " << evo.out << "\n";
    });

    // ---- energy-report ------------------------------------------------------
    auto* er = app.add_subcommand("energy-report", "transmission + detection energy accounting");
    struct {
        std::string profile, outcomes_nat, outcomes_adv, out, svg;
        int bits = 16;
        bool baseline = false;
        std::int64_t n_nat = 0, n_adv = 0;
    } ero;
    er->add_option("--profile", ero.profile, "hardware profile JSON (default: built-in 45nm table)");
    er->add_option("--outcomes-nat", ero.outcomes_nat);
    er->add_option("--outcomes-adv", ero.outcomes_adv);
    er->add_option("--bits", ero.bits);
    er->add_flag("--baseline", ero.baseline, "no-detector baseline (p=1, q=1, E_D=0)");
    er->add_option("--n-nat", ero.n_nat, "sample counts for --baseline");
    er->add_option("--n-adv", ero.n_adv);
    er->add_option("--svg", ero.svg, "optional bar-chart SVG path");
    er->add_option("--out", ero.out, "report path")->required();
    er->callback([&] {
        const HardwareProfile prof = profile_from(ero.profile);
        EnergyReport report;
        std::vector<std::pair<std::string, EnergyReport>> systems;
        if (ero.baseline) {
            require(ero.n_nat > 0 || ero.n_adv > 0, "--baseline needs --n-nat/--n-adv");
            report = baseline_report(ero.n_nat, ero.n_adv, prof);
            systems.push_back({"Baseline", report});
        } else {
            require(!ero.outcomes_nat.empty() && !ero.outcomes_adv.empty(),
                    "need --outcomes-nat and --outcomes-adv (or --baseline)");
            const auto nat = io::load_outcomes(ero.outcomes_nat);
            const auto adv = io::load_outcomes(ero.outcomes_adv);
            report = make_report(nat, adv, {}, {}, prof, ero.bits);
            systems.push_back({"RobustEdge", report});
            systems.push_back(
                {"Baseline", baseline_report(static_cast<std::int64_t>(nat.size()),
                                             static_cast<std::int64_t>(adv.size()), prof)});
        }
        json j = io::energy_report_json(report);
        j["provenance"] = provenance("energy-report", 0);
        io::write_json(ero.out, j);
        if (!ero.svg.empty()) write_energy_svg(ero.svg, systems);
        std::cout << "E_TN " << report.e_tn_joules << " J, E_TA " << report.e_ta_joules << " J, E_D "
                  << report.e_d_joules << " J, total " << report.total_joules << " J\n";
        std::cout << "wrote " << ero.out << "\n";
    });

    // ---- model-info ---------------------------------------------------------
    auto* mi = app.add_subcommand("model-info", "architecture and footprint of a detector");
    struct {
        std::string detector, preset;
    } mio;
    mi->add_option("--detector", mio.detector, "checkpoint path");
    mi->add_option("--preset", mio.preset, "D1 | D2 | D3 (no checkpoint needed)");
    mi->callback([&] {
        DetectorSpec spec;
        std::string hash = "-";
        int bits = 0;
        if (!mio.detector.empty()) {
            const DetectorState d = io::load_detector(mio.detector);
            spec = d.spec;
            hash = d.weight_hash();
            bits = d.quant.empty() ? 0 : d.quant.front().bits;
        } else if (!mio.preset.empty()) {
            spec = DetectorSpec::preset(mio.preset);
        } else {
            fail("model-info: pass --detector or --preset");
        }
        std::cout << "detector " << spec.name << " (" << spec.depth() << " layers)\n";
        for (const auto& l : spec.layers)
            std::cout << "  C(" << l.in_channels << "," << l.out_channels << ") k" << l.kernel << " s"
                      << l.stride << " p" << l.padding << (l.relu_after ? " +ReLU" : "") << "\n";
        const std::int64_t params = spec.parameter_count();
        std::cout << "parameters: " << params << "\n";
        for (const int b : {4, 6, 8, 12, 16})
            std::cout << "  " << b << "-bit weights: " << std::fixed << std::setprecision(2)
                      << static_cast<double>(params * b) / 8.0 / 1024.0 << " KiB\n";
        std::cout.unsetf(std::ios::fixed);
        if (bits > 0) std::cout << "checkpoint bit width: " << bits << "\n";
        std::cout << "checkpoint hash: " << hash << "\n";
        const auto counts = count_network(spec, 32, 32);
        std::int64_t macs = 0;
        for (const auto& c : counts) macs += c.n_mac;
        std::cout << "full-depth MACs per 32x32 sample: " << macs << "\n";
    });

    // ---- ablate -------------------------------------------------------------
    auto* ab = app.add_subcommand("ablate", "K/L/U, lambda, preset and data-fraction sweeps");
    struct {
        std::string sweep, detector, classifier, sample_nat, nat, adv, out;
        std::string Ks = "80..96:4", Ls = "5,10,20,30,40", Us = "5";
        std::string lambdas = "0.5,0.7,0.9,1.1,1.3", presets = "D1,D2,D3", fractions = "0.1,0.4,0.6,1.0";
        std::string train_nat, train_adv;
        int bits = 16, epochs = 20;
        std::int64_t batch = 200, samples = 1000;
        std::uint64_t seed = 1;
    } abo;
    ab->add_option("--sweep", abo.sweep, "KLU | lambda | preset | data-fraction")->required();
    ab->add_option("--detector", abo.detector, "trained detector (KLU sweep)");
    ab->add_option("--classifier", abo.classifier, "classifier for Error/Accuracy columns");
    ab->add_option("--sample-nat", abo.sample_nat, "calibration manifest");
    ab->add_option("--nat", abo.nat, "natural evaluation manifest");
    ab->add_option("--adv", abo.adv, "adversarial evaluation manifest");
    ab->add_option("--train-nat", abo.train_nat, "training manifest (retraining sweeps)");
    ab->add_option("--train-adv", abo.train_adv);
    ab->add_option("--K", abo.Ks, "list or range, e.g. 80..96:4");
    ab->add_option("--L", abo.Ls);
    ab->add_option("--U", abo.Us);
    ab->add_option("--lambda-a1", abo.lambdas, "layer-1 adversarial targets; layers 2,3 add +0.4/+1.1");
    ab->add_option("--presets", abo.presets);
    ab->add_option("--fractions", abo.fractions);
    ab->add_option("--bits", abo.bits);
    ab->add_option("--epochs", abo.epochs, "epochs per layer for retraining sweeps");
    ab->add_option("--batch", abo.batch);
    ab->add_option("--samples", abo.samples, "s_nat size");
    ab->add_option("--seed", abo.seed);
    ab->add_option("--out", abo.out, "sweep report path")->required();
    ab->callback([&] {
        const HardwareProfile prof = HardwareProfile::cmos45_default();
        json rows = json::array();
        require(!abo.nat.empty() && !abo.adv.empty(), "ablate needs --nat and --adv evaluation manifests");
        const io::Dataset nat = io::load_dataset(fs::path(abo.nat));
        const io::Dataset adv = io::load_dataset(fs::path(abo.adv));

        auto row_for = [&](const DetectorState& d, const BoundarySet& b) {
            const auto out_nat = detect_all(d, b, nat.images);
            const auto out_adv = detect_all(d, b, adv.images);
            const double a = auc(scores(d, nat.images), scores(d, adv.images));
            std::vector<bool> verdicts = verdict_flags(out_nat);
            const auto adv_verdicts = verdict_flags(out_adv);
            verdicts.insert(verdicts.end(), adv_verdicts.begin(), adv_verdicts.end());
            std::vector<bool> truth(out_nat.size(), false);
            truth.insert(truth.end(), out_adv.size(), true);
            const EnergyReport er2 = make_report(out_nat, out_adv, {}, {}, prof,
                                                 d.quant.empty() || d.quant.front().bits == 0
                                                     ? 16
                                                     : d.quant.front().bits);
            json row;
            row["auc"] = a;
            row["f1"] = f1(verdicts, truth);
            row["p"] = er2.p;
            row["q"] = er2.q;
            row["e_d_joules"] = er2.e_d_joules;
            return row;
        };

        if (abo.sweep == "KLU") {
            require(!abo.detector.empty() && !abo.sample_nat.empty(),
                    "KLU sweep needs --detector and --sample-nat");
            const DetectorState d = io::load_detector(abo.detector);
            const io::Dataset caldata = io::load_dataset(fs::path(abo.sample_nat));
            const Tensor4 s_nat =
                io::sample_nat(caldata.images, std::min(abo.samples, caldata.images.shape().n), abo.seed);
            for (const int K : parse_int_list_or_range(abo.Ks))
                for (const int L : parse_int_list_or_range(abo.Ls))
                    for (const int U : parse_int_list_or_range(abo.Us)) {
                        if (K - L < 0 || K + U > 100) continue;
                        const BoundarySet b = generate_boundaries(d, s_nat, K, L, U);
                        json row = row_for(d, b);
                        row["K"] = K;
                        row["L"] = L;
                        row["U"] = U;
                        rows.push_back(row);
                        std::cout << "K=" << K << " L=" << L << " U=" << U << " auc=" << row["auc"]
                                  << " E_D=" << row["e_d_joules"] << " J\n";
                    }
        } else {
            require(!abo.train_nat.empty() && !abo.train_adv.empty(),
                    "retraining sweeps need --train-nat and --train-adv");
            const io::Dataset tnat = io::load_dataset(fs::path(abo.train_nat));
            const io::Dataset tadv = io::load_dataset(fs::path(abo.train_adv));
            const Tensor4 s_nat = io::sample_nat(tnat.images, std::min(abo.samples, tnat.images.shape().n),
                                                 abo.seed);
            auto train_and_row = [&](const DetectorSpec& spec, TrainConfig cfg, const Tensor4& xn,
                                     const Tensor4& xa) {
                const DetectorState d0 = DetectorState::random_init(spec, cfg.seed);
                const DetectorState d = qes_train(d0, xn, xa, cfg).detector;
                const BoundarySet b = generate_boundaries(d, s_nat, 92, 30, 5);
                return row_for(d, b);
            };
            if (abo.sweep == "lambda") {
                for (const double a1 : parse_double_list(abo.lambdas)) {
                    TrainConfig cfg = TrainConfig::defaults_for_depth(3);
                    cfg.lambda_adv = {a1, a1 + 0.4, a1 + 1.1};  // layer increments
                    cfg.bits = abo.bits;
                    cfg.epochs_per_layer = abo.epochs;
                    cfg.batch_size = abo.batch;
                    cfg.seed = abo.seed;
                    json row = train_and_row(DetectorSpec::preset("D1"), cfg, tnat.images, tadv.images);
                    row["lambda_a1"] = a1;
                    rows.push_back(row);
                    std::cout << "lambda_a1=" << a1 << " auc=" << row["auc"] << "\n";
                }
            } else if (abo.sweep == "preset") {
                std::size_t pos = 0;
                std::string list = abo.presets;
                while (pos < list.size()) {
                    const auto comma = list.find(',', pos);
                    const std::string preset = list.substr(pos, comma - pos);
                    TrainConfig cfg = TrainConfig::defaults_for_depth(3);
                    cfg.bits = abo.bits;
                    cfg.epochs_per_layer = abo.epochs;
                    cfg.batch_size = abo.batch;
                    cfg.seed = abo.seed;
                    json row = train_and_row(DetectorSpec::preset(preset), cfg, tnat.images, tadv.images);
                    row["preset"] = preset;
                    rows.push_back(row);
                    std::cout << "preset=" << preset << " auc=" << row["auc"] << " E_D=" << row["e_d_joules"]
                              << " J\n";
                    if (comma == std::string::npos) break;
                    pos = comma + 1;
                }
            } else if (abo.sweep == "data-fraction") {
                for (const double frac : parse_double_list(abo.fractions)) {
                    auto [xn, xa] = subsample_pair(tnat.images, tadv.images, frac, abo.seed);
                    TrainConfig cfg = TrainConfig::defaults_for_depth(3);
                    cfg.bits = abo.bits;
                    cfg.epochs_per_layer = abo.epochs;
                    cfg.batch_size = std::min<std::int64_t>(abo.batch, xn.shape().n);
                    cfg.seed = abo.seed;
                    json row = train_and_row(DetectorSpec::preset("D1"), cfg, xn, xa);
                    row["fraction"] = frac;
                    rows.push_back(row);
                    std::cout << "fraction=" << frac << " auc=" << row["auc"] << "\n";
                }
            } else {
                fail("unknown sweep '", abo.sweep, "' (expected KLU, lambda, preset or data-fraction)");
            }
        }
        json j;
        j["sweep"] = abo.sweep;
        j["rows"] = rows;
        j["provenance"] = provenance("ablate", abo.seed);
        io::write_json(abo.out, j);
        std::cout << "wrote " << abo.out << "\n";
    });

    // ---- transfer -----------------------------------------------------------
    auto* tr = app.add_subcommand("transfer", "recalibrate a detector for a target dataset");
    struct {
        std::string detector, source_nat, source_adv, target_nat, out, preset = "D1";
        std::vector<std::string> target_adv;
        int K = 92, L = 30, U = 5, bits = 16, epochs = 20;
        std::int64_t samples = 200, batch = 200;
        std::uint64_t seed = 1;
    } tro;
    tr->add_option("--detector", tro.detector, "trained source detector (skips source training)");
    tr->add_option("--source-nat", tro.source_nat, "source training manifest (trains if no --detector)");
    tr->add_option("--source-adv", tro.source_adv);
    tr->add_option("--target-nat", tro.target_nat, "target natural manifest")->required();
    tr->add_option("--target-adv", tro.target_adv, "target adversarial manifest(s)")->required();
    tr->add_option("--samples", tro.samples, "target calibration sample count");
    tr->add_option("--K", tro.K);
    tr->add_option("--L", tro.L);
    tr->add_option("--U", tro.U);
    tr->add_option("--preset", tro.preset);
    tr->add_option("--bits", tro.bits);
    tr->add_option("--epochs", tro.epochs);
    tr->add_option("--batch", tro.batch);
    tr->add_option("--seed", tro.seed);
    tr->add_option("--out", tro.out, "report path")->required();
    tr->callback([&] {
        DetectorState d;
        if (!tro.detector.empty()) {
            d = io::load_detector(tro.detector);
        } else {
            require(!tro.source_nat.empty() && !tro.source_adv.empty(),
                    "transfer: pass --detector or --source-nat/--source-adv");
            const io::Dataset snat = io::load_dataset(fs::path(tro.source_nat));
            const io::Dataset sadv = io::load_dataset(fs::path(tro.source_adv));
            TrainConfig cfg = TrainConfig::defaults_for_depth(DetectorSpec::preset(tro.preset).depth());
            cfg.bits = tro.bits;
            cfg.epochs_per_layer = tro.epochs;
            cfg.batch_size = tro.batch;
            cfg.seed = tro.seed;
            d = qes_train(DetectorState::random_init(DetectorSpec::preset(tro.preset), cfg.seed), snat.images,
                          sadv.images, cfg)
                    .detector;
        }
        const io::Dataset tnat = io::load_dataset(fs::path(tro.target_nat));
        const Tensor4 s_target = io::sample_nat(tnat.images, std::min(tro.samples, tnat.images.shape().n),
                                                tro.seed);
        const BoundarySet b = recalibrate_for_transfer(d, s_target, tro.K, tro.L, tro.U);

        const auto nat_scores = scores(d, tnat.images);
        const auto out_nat = detect_all(d, b, tnat.images);
        json per_attack = json::array();
        for (const auto& advpath : tro.target_adv) {
            const io::Dataset tadv = io::load_dataset(fs::path(advpath));
            const auto adv_scores = scores(d, tadv.images);
            const auto out_adv = detect_all(d, b, tadv.images);
            std::vector<bool> verdicts = verdict_flags(out_nat);
            const auto adv_verdicts = verdict_flags(out_adv);
            verdicts.insert(verdicts.end(), adv_verdicts.begin(), adv_verdicts.end());
            std::vector<bool> truth(out_nat.size(), false);
            truth.insert(truth.end(), out_adv.size(), true);
            json row;
            row["attack"] = tadv.manifest.has_attack ? tadv.manifest.attack.kind : tadv.manifest.name;
            row["auc"] = auc(nat_scores, adv_scores);
            row["f1"] = f1(verdicts, truth);
            per_attack.push_back(row);
            std::cout << row["attack"] << ": auc " << row["auc"] << "  f1 " << row["f1"] << "\n";
        }
        json j;
        j["samples"] = tro.samples;
        j["K"] = tro.K;
        j["L"] = tro.L;
        j["U"] = tro.U;
        j["detector_hash"] = d.weight_hash();
        j["per_attack"] = per_attack;
        j["provenance"] = provenance("transfer", tro.seed);
        io::write_json(tro.out, j);
        std::cout << "wrote " << tro.out << "\n";
    });

    CLI11_PARSE(app, argc, argv);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    for (int i = 0; i < argc; ++i) {
        if (i) g_command_line += ' ';
        g_command_line += argv[i];
    }
    try {
        return run_cli(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
