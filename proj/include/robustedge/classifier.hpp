#ifndef ROBUSTEDGE_CLASSIFIER_HPP
#define ROBUSTEDGE_CLASSIFIER_HPP

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "robustedge/autograd.hpp"
#include "robustedge/rng.hpp"
#include "robustedge/tensor.hpp"

namespace robustedge {

struct ConvLayerSpec {
    std::int64_t in_channels = 0;
    std::int64_t out_channels = 0;
    int kernel = 3;
    int stride = 1;
    int padding = 1;
};

// Small conv stack + global average pool + linear head. Stands in for the
// cloud classifier; two widths give a white-box / black-box pair.
struct ClassifierSpec {
    std::string name;
    std::vector<ConvLayerSpec> convs;
    std::int64_t num_classes = 10;

    static ClassifierSpec preset(const std::string& name, std::int64_t num_classes) {
        ClassifierSpec s;
        s.name = name;
        s.num_classes = num_classes;
        auto stack = [&](const std::vector<std::int64_t>& ch) {
            for (std::size_t i = 0; i + 1 < ch.size(); ++i)
                s.convs.push_back(ConvLayerSpec{ch[i], ch[i + 1], 3, 2, 1});
        };
        if (name == "small") {
            stack({3, 16, 32, 64, 96});
        } else if (name == "wide") {
            stack({3, 24, 48, 96, 128});
        } else {
            fail("unknown classifier preset '", name, "' (expected small or wide)");
        }
        return s;
    }
};

struct ClassifierState {
    ClassifierSpec spec;
    std::vector<Tensor4> conv_w;   // (out,in,k,k)
    std::vector<Tensor4> conv_b;   // (1,out,1,1)
    Tensor4 head_w;                // (classes, feat, 1, 1) as a 1x1 conv
    Tensor4 head_b;                // (1, classes, 1, 1)
    std::map<std::string, std::string> metadata;

    static ClassifierState random_init(const ClassifierSpec& spec, std::uint64_t seed) {
        ClassifierState c;
        c.spec = spec;
        Rng rng = Rng::stream(seed, 0x636c617373ull);
        for (const auto& l : spec.convs) {
            const double bound = std::sqrt(6.0 / static_cast<double>(l.in_channels * l.kernel * l.kernel));
            Tensor4 w = Tensor4::zeros({l.out_channels, l.in_channels, l.kernel, l.kernel});
            for (std::int64_t i = 0; i < w.size(); ++i) w[i] = rng.uniform(-bound, bound);
            c.conv_w.push_back(std::move(w));
            c.conv_b.push_back(Tensor4::zeros({1, l.out_channels, 1, 1}));
        }
        const std::int64_t feat = spec.convs.back().out_channels;
        const double bound = std::sqrt(6.0 / static_cast<double>(feat));
        c.head_w = Tensor4::zeros({spec.num_classes, feat, 1, 1});
        for (std::int64_t i = 0; i < c.head_w.size(); ++i) c.head_w[i] = rng.uniform(-bound, bound);
        c.head_b = Tensor4::zeros({1, spec.num_classes, 1, 1});
        c.metadata["seed"] = cat(seed);
        return c;
    }

    std::string weight_hash() const {
        Fnv1a h;
        h.update(spec.name);
        for (const auto& w : conv_w) h.update(w.data(), w.vec().size() * sizeof(double));
        for (const auto& b : conv_b) h.update(b.data(), b.vec().size() * sizeof(double));
        h.update(head_w.data(), head_w.vec().size() * sizeof(double));
        h.update(head_b.data(), head_b.vec().size() * sizeof(double));
        return h.hex();
    }
};

// Taped forward to the logits; x_leaf already lives on the tape (attacks
// track it, training does not).
inline ad::Var classifier_logits(ad::Tape& tape, const ClassifierState& c, ad::Var x,
                                 std::vector<ad::Var>* param_vars = nullptr, bool track_params = false) {
    ad::Var act = x;
    for (std::size_t i = 0; i < c.conv_w.size(); ++i) {
        ad::Var w = tape.leaf(c.conv_w[i], track_params);
        ad::Var b = tape.leaf(c.conv_b[i], track_params);
        if (param_vars) {
            param_vars->push_back(w);
            param_vars->push_back(b);
        }
        const auto& l = c.spec.convs[i];
        act = tape.relu(tape.conv2d_bias(act, w, b, l.stride, l.padding));
    }
    act = tape.global_avg_pool(act);
    ad::Var hw = tape.leaf(c.head_w, track_params);
    ad::Var hb = tape.leaf(c.head_b, track_params);
    if (param_vars) {
        param_vars->push_back(hw);
        param_vars->push_back(hb);
    }
    return tape.conv2d_bias(act, hw, hb, 1, 0);
}

// Plain inference logits (no tape).
inline Tensor4 classifier_forward(const ClassifierState& c, const Tensor4& x) {
    Tensor4 act = x;
    for (std::size_t i = 0; i < c.conv_w.size(); ++i) {
        const auto& l = c.spec.convs[i];
        act = relu(kernels::conv2d_forward(act, c.conv_w[i], c.conv_b[i].data(), l.stride, l.padding));
    }
    // global average pool
    const auto [B, C, H, W] = act.shape();
    Tensor4 pooled = Tensor4::zeros({B, C, 1, 1});
    for (std::int64_t b = 0; b < B; ++b)
        for (std::int64_t ch = 0; ch < C; ++ch) {
            double s = 0.0;
            const double* p = act.data() + (b * C + ch) * H * W;
            for (std::int64_t i = 0; i < H * W; ++i) s += p[i];
            pooled[b * C + ch] = s / static_cast<double>(H * W);
        }
    return kernels::conv2d_forward(pooled, c.head_w, c.head_b.data(), 1, 0);
}

// Argmax with ties broken toward the lowest class index.
inline int argmax_class(const double* logits, std::int64_t k) {
    int best = 0;
    for (std::int64_t i = 1; i < k; ++i)
        if (logits[i] > logits[best]) best = static_cast<int>(i);
    return best;
}

inline std::pair<int, std::vector<double>> predict(const ClassifierState& c, const Tensor4& sample) {
    require(sample.shape().n == 1, "predict: expected single sample, got batch of ", sample.shape().n);
    const Tensor4 logits = classifier_forward(c, sample);
    std::vector<double> l(logits.vec());
    return {argmax_class(l.data(), c.spec.num_classes), std::move(l)};
}

inline std::vector<int> predict_batch(const ClassifierState& c, const Tensor4& x) {
    const Tensor4 logits = classifier_forward(c, x);
    const std::int64_t K = c.spec.num_classes;
    std::vector<int> out(static_cast<std::size_t>(x.shape().n));
    for (std::int64_t b = 0; b < x.shape().n; ++b)
        out[static_cast<std::size_t>(b)] = argmax_class(logits.data() + b * K, K);
    return out;
}

inline double accuracy(const ClassifierState& c, const Tensor4& x, const std::vector<int>& labels) {
    const auto pred = predict_batch(c, x);
    std::int64_t hits = 0;
    for (std::size_t i = 0; i < pred.size(); ++i)
        if (pred[i] == labels[i]) ++hits;
    return static_cast<double>(hits) / static_cast<double>(pred.size());
}

struct ClassifierTrainOpts {
    int epochs = 30;
    double lr = 0.04;
    double momentum = 0.9;
    std::int64_t batch_size = 100;
    std::uint64_t seed = 1;
    // simple step schedule: lr multiplied by decay at each milestone fraction
    double lr_decay = 0.2;
    std::vector<double> milestones = {0.6, 0.85};
};

struct ClassifierTrainReport {
    std::vector<double> epoch_losses;
    double final_train_accuracy = 0.0;
};

// Cross-entropy SGD with momentum. Deterministic per seed; throws if the
// loss goes non-finite, naming the epoch.
inline ClassifierState train_classifier(const Tensor4& images, const std::vector<int>& labels,
                                        const ClassifierSpec& spec, const ClassifierTrainOpts& opts,
                                        ClassifierTrainReport* report = nullptr) {
    require(static_cast<std::int64_t>(labels.size()) == images.shape().n, "train_classifier: ", labels.size(),
            " labels for ", images.shape().n, " images");
    for (std::size_t i = 0; i < labels.size(); ++i)
        require(labels[i] >= 0 && labels[i] < spec.num_classes, "train_classifier: label ", labels[i],
                " out of [0,", spec.num_classes, ") at index ", i);

    ClassifierState c = ClassifierState::random_init(spec, opts.seed);
    std::vector<Tensor4> velocity;  // matches param order from classifier_logits
    Rng shuffle_rng = Rng::stream(opts.seed, 0x7368756666ull);

    const std::int64_t n = images.shape().n;
    std::vector<std::int64_t> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);

    double lr = opts.lr;
    std::vector<int> applied(opts.milestones.size(), 0);

    for (int epoch = 1; epoch <= opts.epochs; ++epoch) {
        for (std::size_t m = 0; m < opts.milestones.size(); ++m) {
            if (!applied[m] && epoch > static_cast<int>(opts.milestones[m] * opts.epochs)) {
                lr *= opts.lr_decay;
                applied[m] = 1;
            }
        }
        shuffle_rng.shuffle(order);
        double epoch_loss = 0.0;
        std::int64_t steps = 0;
        for (std::int64_t start = 0; start < n; start += opts.batch_size) {
            const std::int64_t bs = std::min(opts.batch_size, n - start);
            std::vector<std::int64_t> idx(order.begin() + start, order.begin() + start + bs);
            const Tensor4 xb = images.gather_samples(idx);
            std::vector<int> yb(static_cast<std::size_t>(bs));
            for (std::int64_t i = 0; i < bs; ++i)
                yb[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(i)])];

            ad::Tape tape;
            std::vector<ad::Var> params;
            ad::Var x = tape.leaf(xb, false);
            ad::Var logits = classifier_logits(tape, c, x, &params, true);
            ad::Var loss = tape.cross_entropy_mean(logits, yb);
            const double lval = tape.scalar(loss);
            require(std::isfinite(lval), "train_classifier: loss diverged (non-finite) at epoch ", epoch);
            epoch_loss += lval;
            ++steps;
            tape.backward(loss);

            if (velocity.empty()) {
                for (const auto& p : params) velocity.push_back(Tensor4::zeros(tape.value(p).shape()));
            }
            // params order: conv w/b pairs then head w/b
            std::vector<Tensor4*> targets;
            for (std::size_t i = 0; i < c.conv_w.size(); ++i) {
                targets.push_back(&c.conv_w[i]);
                targets.push_back(&c.conv_b[i]);
            }
            targets.push_back(&c.head_w);
            targets.push_back(&c.head_b);
            for (std::size_t i = 0; i < params.size(); ++i) {
                const Tensor4 g = tape.grad(params[i]);
                Tensor4& v = velocity[i];
                Tensor4& wref = *targets[i];
                for (std::int64_t j = 0; j < g.size(); ++j) {
                    v[j] = opts.momentum * v[j] + g[j];
                    wref[j] -= lr * v[j];
                }
            }
        }
        if (report) report->epoch_losses.push_back(epoch_loss / static_cast<double>(steps));
    }
    if (report) report->final_train_accuracy = accuracy(c, images, labels);
    c.metadata["epochs"] = cat(opts.epochs);
    c.metadata["lr"] = cat(opts.lr);
    c.metadata["momentum"] = cat(opts.momentum);
    c.metadata["batch_size"] = cat(opts.batch_size);
    return c;
}

}  // namespace robustedge

#endif  // ROBUSTEDGE_CLASSIFIER_HPP
