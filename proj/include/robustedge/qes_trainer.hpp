#ifndef ROBUSTEDGE_QES_TRAINER_HPP
#define ROBUSTEDGE_QES_TRAINER_HPP

#include <cstdint>
#include <numeric>
#include <vector>

#include "robustedge/detector.hpp"
#include "robustedge/quantize.hpp"
#include "robustedge/rng.hpp"

namespace robustedge {

struct TrainConfig {
    std::vector<double> lambda_nat;   // per layer; defaults to 0.1 everywhere
    std::vector<double> lambda_adv;   // per layer; strictly increasing
    std::vector<double> learning_rates;
    int epochs_per_layer = 500;
    std::int64_t batch_size = 200;
    int bits = 16;
    bool quantize_activations = true;
    double momentum = 0.0;            // plain SGD by default
    std::uint64_t seed = 1;

    static TrainConfig defaults_for_depth(int n) {
        TrainConfig cfg;
        cfg.lambda_nat.assign(static_cast<std::size_t>(n), 0.1);
        if (n == 3) {
            cfg.lambda_adv = {0.9, 1.3, 2.0};
            cfg.learning_rates = {0.005, 0.002, 0.002};
        }
        return cfg;
    }

    void validate(int depth) const {
        require(static_cast<int>(lambda_nat.size()) == depth, "TrainConfig: ", lambda_nat.size(),
                " lambda_nat values for a ", depth, "-layer detector");
        require(static_cast<int>(lambda_adv.size()) == depth, "TrainConfig: ", lambda_adv.size(),
                " lambda_adv values for a ", depth, "-layer detector");
        require(static_cast<int>(learning_rates.size()) == depth, "TrainConfig: ", learning_rates.size(),
                " learning rates for a ", depth, "-layer detector");
        for (int i = 0; i < depth; ++i) {
            require(lambda_adv[static_cast<std::size_t>(i)] > lambda_nat[static_cast<std::size_t>(i)],
                    "TrainConfig: lambda_adv[", i + 1, "]=", lambda_adv[static_cast<std::size_t>(i)],
                    " must exceed lambda_nat[", i + 1, "]=", lambda_nat[static_cast<std::size_t>(i)]);
        }
        for (int i = 1; i < depth; ++i) {
            require(lambda_adv[static_cast<std::size_t>(i)] > lambda_adv[static_cast<std::size_t>(i - 1)],
                    "TrainConfig: lambda_adv must be strictly increasing across layers (",
                    lambda_adv[static_cast<std::size_t>(i - 1)], " -> ",
                    lambda_adv[static_cast<std::size_t>(i)], " at layer ", i + 1, ")");
        }
        require(epochs_per_layer >= 0, "TrainConfig: negative epoch count");
        require(batch_size >= 1, "TrainConfig: batch size must be >= 1");
        require_table_precision(bits);
    }
};

// Separation loss on batch energies: y * (e_nat - l_n)^2 + (1-y) * (e_adv - l_a)^2.
inline double qes_loss(double e_nat, double e_adv, double lambda_n, double lambda_a, int y) {
    require(y == 0 || y == 1, "qes_loss: y must be 0 or 1, got ", y);
    const double dn = e_nat - lambda_n;
    const double da = e_adv - lambda_a;
    return y * dn * dn + (1 - y) * da * da;
}

struct LayerTrainStats {
    std::vector<double> epoch_losses;  // running mean per epoch
};

// One pass of Algorithm-1 weight training for layer `layer` (1-based).
// Precondition (established by qes_train): layers 1..layer are at k-bit,
// layers before `layer` frozen, deeper layers untouched/full precision.
// Both loss terms are applied each step: one natural and one adversarial
// mini-batch drawn over the same shuffled index stream.
inline LayerTrainStats train_layer(DetectorState& d, int layer, const Tensor4& x_nat, const Tensor4& x_adv,
                                   const TrainConfig& cfg) {
    cfg.validate(d.depth());
    require(layer >= 1 && layer <= d.depth(), "train_layer: layer ", layer, " out of range");
    require(x_nat.shape().n == x_adv.shape().n, "train_layer: natural and adversarial sets must align (",
            x_nat.shape().n, " vs ", x_adv.shape().n, ")");
    require(!d.frozen[static_cast<std::size_t>(layer - 1)], "train_layer: layer ", layer, " is frozen");

    const double lam_n = cfg.lambda_nat[static_cast<std::size_t>(layer - 1)];
    const double lam_a = cfg.lambda_adv[static_cast<std::size_t>(layer - 1)];
    const double lr = cfg.learning_rates[static_cast<std::size_t>(layer - 1)];

    const std::int64_t n = x_nat.shape().n;
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng = Rng::stream(cfg.seed, 0x1000u + static_cast<std::uint64_t>(layer));

    // layers before `layer` are frozen, so their outputs over the dataset are
    // fixed for the whole phase
    const Tensor4 nat_in = prefix_activation(d, x_nat, layer);
    const Tensor4 adv_in = prefix_activation(d, x_adv, layer);

    Tensor4& w = d.weights[static_cast<std::size_t>(layer - 1)];
    Tensor4 velocity = Tensor4::zeros(w.shape());

    LayerTrainStats stats;
    for (int epoch = 1; epoch <= cfg.epochs_per_layer; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        std::int64_t steps = 0;
        for (std::int64_t start = 0; start < n; start += cfg.batch_size) {
            const std::int64_t bs = std::min(cfg.batch_size, n - start);
            std::vector<std::int64_t> idx(order.begin() + start, order.begin() + start + bs);
            const Tensor4 xb_nat = nat_in.gather_samples(idx);
            const Tensor4 xb_adv = adv_in.gather_samples(idx);

            ad::Tape tape;
            const TapedEnergy nat = taped_layer_energy(tape, d, xb_nat, layer);
            const TapedEnergy adv = taped_layer_energy(tape, d, xb_adv, layer);
            ad::Var loss = tape.add(tape.mse_to(nat.energy, lam_n), tape.mse_to(adv.energy, lam_a));
            epoch_loss += tape.scalar(loss);
            require(std::isfinite(epoch_loss), "train_layer: loss diverged at layer ", layer, ", epoch ",
                    epoch);
            ++steps;
            tape.backward(loss);

            const Tensor4 g_nat = tape.grad(nat.weights);
            const Tensor4 g_adv = tape.grad(adv.weights);
            for (std::int64_t i = 0; i < w.size(); ++i) {
                const double g = g_nat[i] + g_adv[i];
                velocity[i] = cfg.momentum * velocity[i] + g;
                w[i] -= lr * velocity[i];
            }
        }
        stats.epoch_losses.push_back(steps > 0 ? epoch_loss / static_cast<double>(steps) : 0.0);
    }
    return stats;
}

struct QesTrainResult {
    DetectorState detector;
    std::vector<LayerTrainStats> layer_stats;
};

// Algorithm-1 outer loop: for i = 1..n quantize layers [1,i] to k-bit,
// freeze layers [1,i-1], optimize layer i. Returns the trained detector with
// all layers quantized at k bits and frozen scales.
inline QesTrainResult qes_train(const DetectorState& d0, const Tensor4& x_nat, const Tensor4& x_adv,
                                const TrainConfig& cfg) {
    cfg.validate(d0.depth());
    require(x_nat.shape().n == x_adv.shape().n, "qes_train: natural and adversarial sets must align (",
            x_nat.shape().n, " vs ", x_adv.shape().n, ")");

    QesTrainResult result;
    DetectorState& d = result.detector;
    d = d0;
    d.quantize_activations = cfg.quantize_activations;
    d.frozen.assign(static_cast<std::size_t>(d.depth()), false);
    for (auto& q : d.quant) q = QuantSpec{};  // start full precision

    for (int i = 1; i <= d.depth(); ++i) {
        // quantize layers [1, i] (dynamic scale while weights move)
        for (int j = 0; j < i; ++j) d.quant[static_cast<std::size_t>(j)] = QuantSpec{cfg.bits, 0.0};
        // freeze layers [1, i-1]
        for (int j = 0; j + 1 < i; ++j) d.frozen[static_cast<std::size_t>(j)] = true;
        result.layer_stats.push_back(train_layer(d, i, x_nat, x_adv, cfg));
    }
    d.frozen.assign(static_cast<std::size_t>(d.depth()), true);

    // freeze per-layer weight scales at export
    for (int i = 0; i < d.depth(); ++i) {
        auto& q = d.quant[static_cast<std::size_t>(i)];
        const double m = max_abs(d.weights[static_cast<std::size_t>(i)]);
        q.scale = m > 0.0 ? m / static_cast<double>(q.levels_half()) : 0.0;
    }

    d.metadata["bits"] = cat(cfg.bits);
    d.metadata["seed"] = cat(cfg.seed);
    d.metadata["epochs_per_layer"] = cat(cfg.epochs_per_layer);
    d.metadata["batch_size"] = cat(cfg.batch_size);
    d.metadata["quantize_activations"] = cfg.quantize_activations ? "1" : "0";
    d.metadata["input_h"] = cat(x_nat.shape().h);
    d.metadata["input_w"] = cat(x_nat.shape().w);
    for (int i = 0; i < d.depth(); ++i) {
        d.metadata[cat("lambda_nat_", i + 1)] = cat(cfg.lambda_nat[static_cast<std::size_t>(i)]);
        d.metadata[cat("lambda_adv_", i + 1)] = cat(cfg.lambda_adv[static_cast<std::size_t>(i)]);
        d.metadata[cat("lr_", i + 1)] = cat(cfg.learning_rates[static_cast<std::size_t>(i)]);
    }
    return result;
}

}  // namespace robustedge

#endif  // ROBUSTEDGE_QES_TRAINER_HPP
