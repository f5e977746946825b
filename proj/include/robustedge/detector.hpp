#ifndef ROBUSTEDGE_DETECTOR_HPP
#define ROBUSTEDGE_DETECTOR_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "robustedge/autograd.hpp"
#include "robustedge/quantize.hpp"
#include "robustedge/rng.hpp"
#include "robustedge/tensor.hpp"

namespace robustedge {

struct DetectorLayerSpec {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    int kernel = 3;
    int stride = 2;
    int padding = 1;
    bool relu_after = true;
};

// Three-layer conv stacks from the architecture ablation; all convolutions
// are 3x3 stride-2 pad-1 and carry no bias.
struct DetectorSpec {
    std::string name;
    std::vector<DetectorLayerSpec> layers;

    int depth() const { return static_cast<int>(layers.size()); }

    static DetectorSpec from_channels(const std::string& name, const std::vector<std::int64_t>& channels) {
        require(channels.size() >= 2, "DetectorSpec: need at least one layer");
        DetectorSpec spec;
        spec.name = name;
        for (std::size_t i = 0; i + 1 < channels.size(); ++i) {
            DetectorLayerSpec l;
            l.in_channels = channels[i];
            l.out_channels = channels[i + 1];
            l.relu_after = (i + 2 < channels.size());  // no ReLU after the last layer
            spec.layers.push_back(l);
        }
        return spec;
    }

    static DetectorSpec preset(const std::string& name) {
        if (name == "D1") return from_channels("D1", {3, 8, 16, 32});
        if (name == "D2") return from_channels("D2", {3, 16, 32, 64});
        if (name == "D3") return from_channels("D3", {3, 32, 32, 64});
        fail("unknown detector preset '", name, "' (expected D1, D2 or D3)");
    }

    void validate() const {
        for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
            require(layers[i].out_channels == layers[i + 1].in_channels, "DetectorSpec '", name, "': layer ",
                    i + 1, " emits ", layers[i].out_channels, " channels but layer ", i + 2, " expects ",
                    layers[i + 1].in_channels);
        }
    }

    std::int64_t parameter_count() const {
        std::int64_t total = 0;
        for (const auto& l : layers) total += l.out_channels * l.in_channels * l.kernel * l.kernel;
        return total;
    }
};

// Per-layer scalar energies E^1..E^n, for a batch or a single sample.
using LayerEnergies = std::vector<double>;

struct DetectorState {
    DetectorSpec spec;
    std::vector<Tensor4> weights;          // (out,in,k,k) per layer
    std::vector<QuantSpec> quant;          // bits=0 -> full precision
    std::vector<bool> frozen;
    bool quantize_activations = true;
    std::map<std::string, std::string> metadata;

    int depth() const { return spec.depth(); }

    // Uniform +-1/sqrt(fan_in) init. zero_sum_kernels removes each 3x3
    // slice's mean so layer responses start orthogonal to locally-constant
    // content; without it the separation loss starts at a symmetric saddle
    // (both energies equal) whose escape directions carry no first-order
    // gradient, and training stalls there.
    static DetectorState random_init(const DetectorSpec& spec, std::uint64_t seed,
                                     bool zero_sum_kernels = true) {
        spec.validate();
        DetectorState d;
        d.spec = spec;
        d.quant.assign(spec.layers.size(), QuantSpec{});
        d.frozen.assign(spec.layers.size(), false);
        Rng rng = Rng::stream(seed, 0x6465746563746f72ull);
        for (const auto& l : spec.layers) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(l.in_channels * l.kernel * l.kernel));
            Tensor4 w = Tensor4::zeros({l.out_channels, l.in_channels, l.kernel, l.kernel});
            for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
            if (zero_sum_kernels) {
                const std::int64_t k2 = static_cast<std::int64_t>(l.kernel) * l.kernel;
                for (std::int64_t slice = 0; slice < l.out_channels * l.in_channels; ++slice) {
                    double m = 0.0;
                    for (std::int64_t i = 0; i < k2; ++i) m += w[slice * k2 + i];
                    m /= static_cast<double>(k2);
                    for (std::int64_t i = 0; i < k2; ++i) w[slice * k2 + i] -= m;
                }
            }
            d.weights.push_back(std::move(w));
        }
        d.metadata["seed"] = cat(seed);
        d.metadata["zero_sum_init"] = zero_sum_kernels ? "1" : "0";
        d.metadata["input_normalization"] = "raw01";  // raw [0,1] pixels, no mean/std
        return d;
    }

    std::string weight_hash() const {
        Fnv1a h;
        h.update(spec.name);
        for (const auto& w : weights) h.update(w.data(), w.vec().size() * sizeof(double));
        for (const auto& q : quant) {
            h.update_value(q.bits);
            h.update_value(q.scale);
        }
        h.update_value(static_cast<int>(quantize_activations));
        return h.hex();
    }

    // Quantized weights for layer i as used by every forward pass.
    Tensor4 effective_weights(int layer) const {
        return quantize_tensor(weights[static_cast<std::size_t>(layer)], quant[static_cast<std::size_t>(layer)]);
    }
};

// Eq.-style energy signature: mean of |pre-activation| over batch, channel
// and space. Defined on the conv output before ReLU.
inline double energy_signature(const Tensor4& pre_activation) {
    require(!pre_activation.empty(), "energy_signature: empty tensor");
    // mean over batch of per-sample means, so batch energy is exactly the
    // arithmetic mean of per-sample energies
    const std::int64_t B = pre_activation.shape().n;
    const std::int64_t per = pre_activation.size() / B;
    double acc = 0.0;
    for (std::int64_t b = 0; b < B; ++b) {
        const double* p = pre_activation.data() + b * per;
        double s = 0.0;
        for (std::int64_t i = 0; i < per; ++i) s += std::abs(p[i]);
        acc += s / static_cast<double>(per);
    }
    return acc / static_cast<double>(B);
}

inline LayerEnergies per_sample_energy(const Tensor4& pre_activation) {
    require(!pre_activation.empty(), "energy_signature: empty tensor");
    const std::int64_t B = pre_activation.shape().n;
    const std::int64_t per = pre_activation.size() / B;
    LayerEnergies out(static_cast<std::size_t>(B));
    for (std::int64_t b = 0; b < B; ++b) {
        const double* p = pre_activation.data() + b * per;
        double s = 0.0;
        for (std::int64_t i = 0; i < per; ++i) s += std::abs(p[i]);
        out[static_cast<std::size_t>(b)] = s / static_cast<double>(per);
    }
    return out;
}

// Optional probe invoked per executed layer; tests use it to assert the
// quantization schedule during training.
struct ForwardHooks {
    std::function<void(int layer, int weight_bits, int activation_bits)> on_layer;
};

struct ForwardResult {
    LayerEnergies batch_energies;                 // E^i, one per executed layer
    std::vector<LayerEnergies> sample_energies;   // [layer][sample]
    Tensor4 last_pre_activation;
};

// Tape-less forward through layers 1..upto_layer, recording energies from
// each pre-ReLU conv output.
inline ForwardResult forward_with_energies(const DetectorState& d, const Tensor4& x, int upto_layer,
                                           const ForwardHooks& hooks = {}) {
    require(upto_layer >= 1 && upto_layer <= d.depth(), "forward_with_energies: layer ", upto_layer,
            " out of [1,", d.depth(), "]");
    require(x.shape().c == d.spec.layers.front().in_channels, "forward_with_energies: input has ", x.shape().c,
            " channels, detector expects ", d.spec.layers.front().in_channels);
    ForwardResult r;
    Tensor4 act = x;
    for (int i = 0; i < upto_layer; ++i) {
        const auto& l = d.spec.layers[static_cast<std::size_t>(i)];
        const QuantSpec& q = d.quant[static_cast<std::size_t>(i)];
        const Tensor4 w = d.effective_weights(i);
        const Tensor4 a = d.quantize_activations && q.enabled() ? quantize_per_sample(act, q.bits) : act;
        if (hooks.on_layer)
            hooks.on_layer(i + 1, q.bits, d.quantize_activations && q.enabled() ? q.bits : 0);
        Tensor4 z = kernels::conv2d_forward(a, w, nullptr, l.stride, l.padding);
        r.batch_energies.push_back(energy_signature(z));
        r.sample_energies.push_back(per_sample_energy(z));
        if (i + 1 < upto_layer) {
            act = l.relu_after ? relu(z) : std::move(z);
        } else {
            r.last_pre_activation = std::move(z);
        }
    }
    return r;
}

// Activation that feeds `layer` (1-based): applies layers 1..layer-1 with
// their quantization and ReLU. With earlier layers frozen, the trainer
// computes this once per layer phase and re-batches from it.
inline Tensor4 prefix_activation(const DetectorState& d, const Tensor4& x, int layer) {
    require(layer >= 1 && layer <= d.depth(), "prefix_activation: bad layer ", layer);
    Tensor4 act = x;
    for (int i = 0; i + 1 < layer; ++i) {
        const auto& l = d.spec.layers[static_cast<std::size_t>(i)];
        const QuantSpec& q = d.quant[static_cast<std::size_t>(i)];
        const Tensor4 w = d.effective_weights(i);
        const Tensor4 a = d.quantize_activations && q.enabled() ? quantize_per_sample(act, q.bits) : act;
        Tensor4 z = kernels::conv2d_forward(a, w, nullptr, l.stride, l.padding);
        act = l.relu_after ? relu(z) : std::move(z);
    }
    return act;
}

// Taped single-layer energy for training: `input` is the (frozen-prefix)
// activation feeding the layer; only that layer's weights are tracked.
struct TapedEnergy {
    ad::Var energy;   // scalar
    ad::Var weights;  // leaf for the trained layer
};

inline TapedEnergy taped_layer_energy(ad::Tape& tape, const DetectorState& d, const Tensor4& input,
                                      int layer) {
    require(layer >= 1 && layer <= d.depth(), "taped_layer_energy: bad layer ", layer);
    const auto& l = d.spec.layers[static_cast<std::size_t>(layer - 1)];
    const QuantSpec& q = d.quant[static_cast<std::size_t>(layer - 1)];
    ad::Var w = tape.leaf(d.weights[static_cast<std::size_t>(layer - 1)], true);
    TapedEnergy out;
    out.weights = w;
    if (q.enabled()) w = tape.fake_quant(w, q.bits, false);
    ad::Var a = tape.leaf(input, false);
    if (d.quantize_activations && q.enabled()) a = tape.fake_quant(a, q.bits, true);
    const ad::Var z = tape.conv2d(a, w, l.stride, l.padding);
    out.energy = tape.mean_batch(tape.mean_abs_per_sample(z));
    return out;
}

}  // namespace robustedge

#endif  // ROBUSTEDGE_DETECTOR_HPP
