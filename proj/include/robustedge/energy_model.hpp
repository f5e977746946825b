#ifndef ROBUSTEDGE_ENERGY_MODEL_HPP
#define ROBUSTEDGE_ENERGY_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "robustedge/detector.hpp"

namespace robustedge {

// All energy bookkeeping is fixed point in units of 1e-16 J (= 1e-4 pJ), so
// every table constant is an exact integer and sums carry no rounding.
// int64 holds ~922 J at this resolution, far beyond any modeled scenario.
using EnergyUnits = std::int64_t;
inline constexpr double kJoulePerUnit = 1e-16;

inline double units_to_joules(EnergyUnits u) {
    // dividing by an exactly-representable power of ten keeps integer unit
    // totals like 68 J bit-exact
    return static_cast<double>(u) / 1.0e16;
}

inline EnergyUnits units_from_pj(double pj) { return std::llround(pj * 1.0e4); }
inline EnergyUnits units_from_mj(double mj) { return std::llround(mj * 1.0e13); }

// Accelerator constants: per-op MAC/ACC energy by precision, per-16-bit-word
// read energy for each memory level, and the radio cost per image.
struct HardwareProfile {
    std::map<int, EnergyUnits> mac_per_op;   // by bit width
    std::map<int, EnergyUnits> acc_per_op;
    EnergyUnits dram_per_read = 0;
    EnergyUnits cache_per_read = 0;
    EnergyUnits spad_per_read = 0;
    EnergyUnits transmit_per_image = 0;
    int pe_array_size = 32;
    int word_bits = 16;
    bool amortize_weights = true;       // weight DRAM traffic not charged per image
    bool include_weight_dram = false;   // charge it once per session instead
    std::string technology = "45nm CMOS";

    static HardwareProfile cmos45_default() {
        HardwareProfile p;
        p.mac_per_op = {{4, units_from_pj(0.0575)},
                        {6, units_from_pj(0.129)},
                        {8, units_from_pj(0.23)},
                        {12, units_from_pj(0.52)},
                        {16, units_from_pj(0.92)}};
        p.acc_per_op = {{4, units_from_pj(0.017)},
                        {6, units_from_pj(0.038)},
                        {8, units_from_pj(0.07)},
                        {12, units_from_pj(0.15)},
                        {16, units_from_pj(0.27)}};
        p.dram_per_read = units_from_pj(184.0);
        p.cache_per_read = units_from_pj(10.0);
        p.spad_per_read = units_from_pj(1.7);
        p.transmit_per_image = units_from_mj(6.8);  // 32x32 image; 64x64 doubles it
        return p;
    }

    EnergyUnits mac(int bits) const {
        const auto it = mac_per_op.find(bits);
        require(it != mac_per_op.end(), "HardwareProfile: no MAC energy for ", bits, "-bit ops");
        return it->second;
    }
    EnergyUnits acc(int bits) const {
        const auto it = acc_per_op.find(bits);
        require(it != acc_per_op.end(), "HardwareProfile: no ACC energy for ", bits, "-bit ops");
        return it->second;
    }
};

// Per-sample, per-layer access and op counts. Words are 16-bit regardless of
// compute precision.
struct AccessCounts {
    std::int64_t r_dram = 0;
    std::int64_t r_cache = 0;
    std::int64_t r_spad = 0;
    std::int64_t n_mac = 0;
    std::int64_t n_acc = 0;

    AccessCounts& operator+=(const AccessCounts& o) {
        r_dram += o.r_dram;
        r_cache += o.r_cache;
        r_spad += o.r_spad;
        n_mac += o.n_mac;
        n_acc += o.n_acc;
        return *this;
    }
    std::int64_t total_ops() const { return r_dram + r_cache + r_spad + n_mac + n_acc; }
};

// First-order access model for one detector layer on the row-stationary
// array:
//   N_MAC = Cout*Hout*Wout*Cin*K^2        (the convolution itself)
//   N_ACC = Cout*Hout*Wout                (EC engine accumulating the outputs)
//   R_D   = input words, first layer only (weights amortized into the cache)
//   R_C   = input words * K (row reuse) + weight words + output words
//   R_S   = 3 * N_MAC                     (two operand reads + one PSum access)
inline AccessCounts count_layer(const DetectorLayerSpec& l, std::int64_t in_h, std::int64_t in_w,
                                bool first_layer) {
    const std::int64_t out_h = kernels::conv_out_dim(in_h, l.kernel, l.stride, l.padding);
    const std::int64_t out_w = kernels::conv_out_dim(in_w, l.kernel, l.stride, l.padding);
    const std::int64_t k2 = static_cast<std::int64_t>(l.kernel) * l.kernel;
    const std::int64_t input_words = l.in_channels * in_h * in_w;
    const std::int64_t weight_words = l.out_channels * l.in_channels * k2;
    const std::int64_t output_words = l.out_channels * out_h * out_w;

    AccessCounts c;
    c.n_mac = output_words * l.in_channels * k2;
    c.n_acc = output_words;
    c.r_dram = first_layer ? input_words : 0;
    c.r_cache = input_words * l.kernel + weight_words + output_words;
    c.r_spad = 3 * c.n_mac;
    return c;
}

inline std::vector<AccessCounts> count_network(const DetectorSpec& spec, std::int64_t in_h, std::int64_t in_w) {
    std::vector<AccessCounts> out;
    std::int64_t h = in_h, w = in_w;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const auto& l = spec.layers[i];
        out.push_back(count_layer(l, h, w, i == 0));
        h = kernels::conv_out_dim(h, l.kernel, l.stride, l.padding);
        w = kernels::conv_out_dim(w, l.kernel, l.stride, l.padding);
    }
    return out;
}

inline EnergyUnits counts_energy_units(const AccessCounts& c, const HardwareProfile& p, int bits) {
    return p.dram_per_read * c.r_dram + p.cache_per_read * c.r_cache + p.spad_per_read * c.r_spad +
           p.mac(bits) * c.n_mac + p.acc(bits) * c.n_acc;
}

// Detection energy over a set of per-sample count lists (each truncated at
// that sample's exit layer).
inline EnergyUnits detection_energy_units(const std::vector<std::vector<AccessCounts>>& per_sample_counts,
                                          const HardwareProfile& p, int bits) {
    EnergyUnits total = 0;
    for (const auto& layers : per_sample_counts)
        for (const auto& c : layers) total += counts_energy_units(c, p, bits);
    return total;
}

inline double detection_energy(const std::vector<std::vector<AccessCounts>>& per_sample_counts,
                               const HardwareProfile& p, int bits) {
    return units_to_joules(detection_energy_units(per_sample_counts, p, bits));
}

// Eq.-style transmission split: E_TN = p*N_nat*E_transmit, E_TA likewise.
struct TransmissionEnergy {
    double e_tn_joules = 0.0;
    double e_ta_joules = 0.0;
};

inline TransmissionEnergy transmission_energy(std::int64_t n_nat, std::int64_t n_adv, double p, double q,
                                              const HardwareProfile& prof) {
    require(p >= 0.0 && p <= 1.0, "transmission_energy: p must be in [0,1], got ", p);
    require(q >= 0.0 && q <= 1.0, "transmission_energy: q must be in [0,1], got ", q);
    TransmissionEnergy e;
    e.e_tn_joules = p * static_cast<double>(n_nat) * static_cast<double>(prof.transmit_per_image) / 1.0e16;
    e.e_ta_joules = q * static_cast<double>(n_adv) * static_cast<double>(prof.transmit_per_image) / 1.0e16;
    return e;
}

struct EnergyReport {
    std::int64_t n_nat = 0, n_adv = 0;
    std::int64_t transmitted_nat = 0, transmitted_adv = 0;
    double p = 0.0, q = 0.0;
    double e_tn_joules = 0.0;
    double e_ta_joules = 0.0;
    double e_d_joules = 0.0;
    double total_joules = 0.0;
    EnergyUnits e_tn_units = 0, e_ta_units = 0, e_d_units = 0;
    // per-component detection breakdown
    EnergyUnits d_dram = 0, d_cache = 0, d_spad = 0, d_mac = 0, d_acc = 0;
    int bits = 0;
    bool baseline = false;
    // present when classifier verdicts were supplied
    bool has_task_metrics = false;
    double error_pct = 0.0, accuracy_pct = 0.0;
};

}  // namespace robustedge

#endif  // ROBUSTEDGE_ENERGY_MODEL_HPP
