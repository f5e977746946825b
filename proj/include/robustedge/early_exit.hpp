#ifndef ROBUSTEDGE_EARLY_EXIT_HPP
#define ROBUSTEDGE_EARLY_EXIT_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "robustedge/calibration.hpp"
#include "robustedge/detector.hpp"
#include "robustedge/energy_model.hpp"

namespace robustedge {

enum class Verdict { natural, adversarial };

inline const char* to_string(Verdict v) { return v == Verdict::natural ? "natural" : "adversarial"; }

struct DetectionOutcome {
    Verdict verdict = Verdict::natural;
    int exit_layer = 0;                       // 1-based
    LayerEnergies energies;                   // E^1..E^exit_layer
    std::vector<AccessCounts> layer_counts;   // counts for executed layers only
};

// Early detection and exit over a single sample. Layer i < n: energy below
// the band exits natural, above exits adversarial, inside forwards to the
// next layer. Ties sit with the band (forward / natural at the final layer)
// so the behavior is deterministic. early_exit = false runs full depth and
// decides from the final threshold alone.
inline DetectionOutcome detect(const DetectorState& d, const BoundarySet& b, const Tensor4& x,
                               bool early_exit = true) {
    require(x.shape().n == 1, "detect: expected a single sample, got batch of ", x.shape().n);
    require(b.depth() == d.depth(), "detect: boundary set covers ", b.depth(), " layers, detector has ",
            d.depth());
    require(b.detector_hash == d.weight_hash(),
            "detect: boundary set was calibrated for a different detector (fingerprint ", b.detector_hash,
            " vs ", d.weight_hash(), ")");

    DetectionOutcome out;
    Tensor4 act = x;
    std::int64_t h = x.shape().h, w = x.shape().w;
    const int n = d.depth();
    for (int i = 1; i <= n; ++i) {
        const auto& l = d.spec.layers[static_cast<std::size_t>(i - 1)];
        const QuantSpec& q = d.quant[static_cast<std::size_t>(i - 1)];
        const Tensor4 wq = d.effective_weights(i - 1);
        const Tensor4 a = d.quantize_activations && q.enabled() ? quantize_per_sample(act, q.bits) : act;
        Tensor4 z = kernels::conv2d_forward(a, wq, nullptr, l.stride, l.padding);
        const double e = energy_signature(z);
        out.energies.push_back(e);
        out.layer_counts.push_back(count_layer(l, h, w, i == 1));
        out.exit_layer = i;
        if (i < n) {
            if (early_exit) {
                if (e < b.bands[static_cast<std::size_t>(i - 1)].lower) {
                    out.verdict = Verdict::natural;
                    return out;
                }
                if (e > b.bands[static_cast<std::size_t>(i - 1)].upper) {
                    out.verdict = Verdict::adversarial;
                    return out;
                }
            }
            h = z.shape().h;
            w = z.shape().w;
            act = l.relu_after ? relu(z) : std::move(z);
        } else {
            out.verdict = e > b.final_threshold ? Verdict::adversarial : Verdict::natural;
        }
    }
    return out;
}

// Continuous detection score: the final-layer energy of a full-depth forward
// (no early exit). This is what AUC is computed from.
inline double score(const DetectorState& d, const Tensor4& x) {
    const ForwardResult r = forward_with_energies(d, x, d.depth());
    return r.batch_energies.back();
}

// Batched scores, one full-depth forward for the lot.
inline std::vector<double> scores(const DetectorState& d, const Tensor4& x) {
    const ForwardResult r = forward_with_energies(d, x, d.depth());
    return r.sample_energies.back();
}

inline std::vector<DetectionOutcome> detect_all(const DetectorState& d, const BoundarySet& b,
                                                const Tensor4& samples, bool early_exit = true) {
    std::vector<DetectionOutcome> out(static_cast<std::size_t>(samples.shape().n));
    for (std::int64_t i = 0; i < samples.shape().n; ++i)
        out[static_cast<std::size_t>(i)] = detect(d, b, samples.slice_sample(i), early_exit);
    return out;
}

// ---- energy report over detection outcomes ---------------------------------

// p = fraction of naturals the detector passed to the cloud, q = fraction of
// adversarials passed; E = E_TN + E_TA + E_D by construction.
// classifier_correct_* may be empty; when given they must align with the
// outcome lists and enable Error / Accuracy in the report.
inline EnergyReport make_report(const std::vector<DetectionOutcome>& outcomes_nat,
                                const std::vector<DetectionOutcome>& outcomes_adv,
                                const std::vector<bool>& classifier_correct_nat,
                                const std::vector<bool>& classifier_correct_adv, const HardwareProfile& prof,
                                int bits) {
    require(classifier_correct_nat.empty() || classifier_correct_nat.size() == outcomes_nat.size(),
            "make_report: ", classifier_correct_nat.size(), " natural classifier verdicts for ",
            outcomes_nat.size(), " outcomes");
    require(classifier_correct_adv.empty() || classifier_correct_adv.size() == outcomes_adv.size(),
            "make_report: ", classifier_correct_adv.size(), " adversarial classifier verdicts for ",
            outcomes_adv.size(), " outcomes");

    EnergyReport r;
    r.bits = bits;
    r.n_nat = static_cast<std::int64_t>(outcomes_nat.size());
    r.n_adv = static_cast<std::int64_t>(outcomes_adv.size());
    for (const auto& o : outcomes_nat)
        if (o.verdict == Verdict::natural) ++r.transmitted_nat;
    for (const auto& o : outcomes_adv)
        if (o.verdict == Verdict::natural) ++r.transmitted_adv;
    r.p = r.n_nat > 0 ? static_cast<double>(r.transmitted_nat) / static_cast<double>(r.n_nat) : 0.0;
    r.q = r.n_adv > 0 ? static_cast<double>(r.transmitted_adv) / static_cast<double>(r.n_adv) : 0.0;

    r.e_tn_units = r.transmitted_nat * prof.transmit_per_image;
    r.e_ta_units = r.transmitted_adv * prof.transmit_per_image;

    auto add_counts = [&](const std::vector<DetectionOutcome>& v) {
        for (const auto& o : v)
            for (const auto& c : o.layer_counts) {
                r.d_dram += prof.dram_per_read * c.r_dram;
                r.d_cache += prof.cache_per_read * c.r_cache;
                r.d_spad += prof.spad_per_read * c.r_spad;
                r.d_mac += prof.mac(bits) * c.n_mac;
                r.d_acc += prof.acc(bits) * c.n_acc;
            }
    };
    add_counts(outcomes_nat);
    add_counts(outcomes_adv);
    r.e_d_units = r.d_dram + r.d_cache + r.d_spad + r.d_mac + r.d_acc;

    r.e_tn_joules = units_to_joules(r.e_tn_units);
    r.e_ta_joules = units_to_joules(r.e_ta_units);
    r.e_d_joules = units_to_joules(r.e_d_units);
    r.total_joules = r.e_tn_joules + r.e_ta_joules + r.e_d_joules;

    if (!classifier_correct_nat.empty() && !classifier_correct_adv.empty()) {
        r.has_task_metrics = true;
        std::int64_t err = 0, acc = 0;
        for (std::size_t i = 0; i < outcomes_adv.size(); ++i)
            if (outcomes_adv[i].verdict == Verdict::natural && !classifier_correct_adv[i]) ++err;
        for (std::size_t i = 0; i < outcomes_nat.size(); ++i)
            if (outcomes_nat[i].verdict == Verdict::natural && classifier_correct_nat[i]) ++acc;
        r.error_pct = 100.0 * static_cast<double>(err) / static_cast<double>(r.n_adv);
        r.accuracy_pct = 100.0 * static_cast<double>(acc) / static_cast<double>(r.n_nat);
    }
    return r;
}

// "Baseline" system: no detector anywhere, everything transmitted.
inline EnergyReport baseline_report(std::int64_t n_nat, std::int64_t n_adv, const HardwareProfile& prof) {
    EnergyReport r;
    r.baseline = true;
    r.n_nat = n_nat;
    r.n_adv = n_adv;
    r.transmitted_nat = n_nat;
    r.transmitted_adv = n_adv;
    r.p = 1.0;
    r.q = 1.0;
    r.e_tn_units = n_nat * prof.transmit_per_image;
    r.e_ta_units = n_adv * prof.transmit_per_image;
    r.e_d_units = 0;
    r.e_tn_joules = units_to_joules(r.e_tn_units);
    r.e_ta_joules = units_to_joules(r.e_ta_units);
    r.e_d_joules = 0.0;
    r.total_joules = r.e_tn_joules + r.e_ta_joules + r.e_d_joules;
    return r;
}

}  // namespace robustedge

#endif  // ROBUSTEDGE_EARLY_EXIT_HPP
