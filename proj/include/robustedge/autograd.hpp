#ifndef ROBUSTEDGE_AUTOGRAD_HPP
#define ROBUSTEDGE_AUTOGRAD_HPP

#include <cmath>
#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "robustedge/quantize.hpp"
#include "robustedge/tensor.hpp"

namespace robustedge {

// ---- raw kernels, shared by taped and tape-less forward paths --------------

namespace kernels {

inline std::int64_t conv_out_dim(std::int64_t in, std::int64_t k, std::int64_t stride, std::int64_t pad) {
    return (in + 2 * pad - k) / stride + 1;
}

inline void check_conv_shapes(const Shape4& x, const Shape4& w, int stride, int pad) {
    require(stride >= 1, "conv2d: stride must be >= 1, got ", stride);
    require(pad >= 0, "conv2d: padding must be >= 0, got ", pad);
    require(w.c == x.c, "conv2d: kernel expects ", w.c, " input channels but input has ", x.c, " (input ",
            to_string(x), ", kernel ", to_string(w), ")");
    require(w.h == w.w, "conv2d: only square kernels supported, got ", to_string(w));
    require(x.h + 2 * pad >= w.h && x.w + 2 * pad >= w.w, "conv2d: kernel ", to_string(w),
            " larger than padded input ", to_string(x), " with pad ", pad);
}

// Direct convolution. bias may be null (detector layers carry none).
inline Tensor4 conv2d_forward(const Tensor4& x, const Tensor4& w, const double* bias, int stride, int pad) {
    check_conv_shapes(x.shape(), w.shape(), stride, pad);
    const auto [B, Ci, H, W] = x.shape();
    const std::int64_t Co = w.shape().n, K = w.shape().h;
    const std::int64_t Ho = conv_out_dim(H, K, stride, pad);
    const std::int64_t Wo = conv_out_dim(W, K, stride, pad);
    Tensor4 out = Tensor4::zeros({B, Co, Ho, Wo});

    const double* xp = x.data();
    const double* wp = w.data();
    double* op = out.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t co = 0; co < Co; ++co) {
            double* orow = op + (b * Co + co) * Ho * Wo;
            const double bval = bias ? bias[co] : 0.0;
            for (std::int64_t i = 0; i < Ho * Wo; ++i) orow[i] = bval;
            for (std::int64_t ci = 0; ci < Ci; ++ci) {
                const double* xch = xp + (b * Ci + ci) * H * W;
                const double* wch = wp + (co * Ci + ci) * K * K;
                for (std::int64_t kh = 0; kh < K; ++kh) {
                    for (std::int64_t ho = 0; ho < Ho; ++ho) {
                        const std::int64_t hi = ho * stride - pad + kh;
                        if (hi < 0 || hi >= H) continue;
                        const double* xrow = xch + hi * W;
                        double* out_row = orow + ho * Wo;
                        for (std::int64_t kw = 0; kw < K; ++kw) {
                            const double wv = wch[kh * K + kw];
                            if (wv == 0.0) continue;
                            const std::int64_t wi0 = -pad + kw;
                            std::int64_t wo_lo = 0, wo_hi = Wo;
                            if (wi0 < 0) wo_lo = (-wi0 + stride - 1) / stride;
                            if (wi0 + (Wo - 1) * stride >= W) wo_hi = (W - wi0 + stride - 1) / stride;
                            const double* xq = xrow + wi0 + wo_lo * stride;
                            double* oq = out_row + wo_lo;
                            for (std::int64_t i = 0; i < wo_hi - wo_lo; ++i) oq[i] += wv * xq[i * stride];
                        }
                    }
                }
            }
        }
    }
    return out;
}

inline Tensor4 conv2d_backward_input(const Tensor4& gout, const Tensor4& w, const Shape4& xshape, int stride,
                                     int pad) {
    const auto [B, Ci, H, W] = xshape;
    const std::int64_t Co = w.shape().n, K = w.shape().h;
    const std::int64_t Ho = gout.shape().h, Wo = gout.shape().w;
    Tensor4 gx = Tensor4::zeros(xshape);
    const double* gp = gout.data();
    const double* wp = w.data();
    double* gxp = gx.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t b = 0; b < B; ++b) {
        for (std::int64_t ci = 0; ci < Ci; ++ci) {
            double* gxch = gxp + (b * Ci + ci) * H * W;
            for (std::int64_t co = 0; co < Co; ++co) {
                const double* gch = gp + (b * Co + co) * Ho * Wo;
                const double* wch = wp + (co * Ci + ci) * K * K;
                for (std::int64_t kh = 0; kh < K; ++kh) {
                    for (std::int64_t ho = 0; ho < Ho; ++ho) {
                        const std::int64_t hi = ho * stride - pad + kh;
                        if (hi < 0 || hi >= H) continue;
                        double* gxrow = gxch + hi * W;
                        const double* grow = gch + ho * Wo;
                        for (std::int64_t kw = 0; kw < K; ++kw) {
                            const double wv = wch[kh * K + kw];
                            if (wv == 0.0) continue;
                            const std::int64_t wi0 = -pad + kw;
                            std::int64_t wo_lo = 0, wo_hi = Wo;
                            if (wi0 < 0) wo_lo = (-wi0 + stride - 1) / stride;
                            if (wi0 + (Wo - 1) * stride >= W) wo_hi = (W - wi0 + stride - 1) / stride;
                            for (std::int64_t wo = wo_lo; wo < wo_hi; ++wo)
                                gxrow[wi0 + wo * stride] += wv * grow[wo];
                        }
                    }
                }
            }
        }
    }
    return gx;
}

inline Tensor4 conv2d_backward_weight(const Tensor4& gout, const Tensor4& x, const Shape4& wshape, int stride,
                                      int pad) {
    const auto [B, Ci, H, W] = x.shape();
    const std::int64_t Co = wshape.n, K = wshape.h;
    const std::int64_t Ho = gout.shape().h, Wo = gout.shape().w;
    Tensor4 gw = Tensor4::zeros(wshape);
    const double* gp = gout.data();
    const double* xp = x.data();
    double* gwp = gw.data();
#pragma omp parallel for collapse(2) schedule(static)
    for (std::int64_t co = 0; co < Co; ++co) {
        for (std::int64_t ci = 0; ci < Ci; ++ci) {
            double* gwch = gwp + (co * Ci + ci) * K * K;
            for (std::int64_t kh = 0; kh < K; ++kh) {
                for (std::int64_t kw = 0; kw < K; ++kw) {
                    double acc = 0.0;
                    for (std::int64_t b = 0; b < B; ++b) {
                        const double* gch = gp + (b * Co + co) * Ho * Wo;
                        const double* xch = xp + (b * Ci + ci) * H * W;
                        for (std::int64_t ho = 0; ho < Ho; ++ho) {
                            const std::int64_t hi = ho * stride - pad + kh;
                            if (hi < 0 || hi >= H) continue;
                            const double* xrow = xch + hi * W;
                            const double* grow = gch + ho * Wo;
                            const std::int64_t wi0 = -pad + kw;
                            std::int64_t wo_lo = 0, wo_hi = Wo;
                            if (wi0 < 0) wo_lo = (-wi0 + stride - 1) / stride;
                            if (wi0 + (Wo - 1) * stride >= W) wo_hi = (W - wi0 + stride - 1) / stride;
                            for (std::int64_t wo = wo_lo; wo < wo_hi; ++wo)
                                acc += grow[wo] * xrow[wi0 + wo * stride];
                        }
                    }
                    gwch[kh * K + kw] = acc;
                }
            }
        }
    }
    return gw;
}

inline void conv2d_backward_bias(const Tensor4& gout, double* gb) {
    const auto [B, Co, Ho, Wo] = gout.shape();
    for (std::int64_t co = 0; co < Co; ++co) {
        double acc = 0.0;
        for (std::int64_t b = 0; b < B; ++b) {
            const double* gch = gout.data() + (b * Co + co) * Ho * Wo;
            for (std::int64_t i = 0; i < Ho * Wo; ++i) acc += gch[i];
        }
        gb[co] += acc;
    }
}

}  // namespace kernels

// ---- reverse-mode tape ------------------------------------------------------

namespace ad {

struct Var {
    int id = -1;
    bool valid() const { return id >= 0; }
};

class Tape {
    struct Node {
        Tensor4 value;
        bool requires_grad = false;
        std::function<void(Tape&, const Tensor4& g, const Node& self)> backward;  // null for leaves
    };

    std::vector<Node> nodes_;
    std::vector<Tensor4> grads_;

    Var push(Tensor4 value, bool requires_grad,
             std::function<void(Tape&, const Tensor4&, const Node&)> backward = nullptr) {
        nodes_.push_back(Node{std::move(value), requires_grad, std::move(backward)});
        return Var{static_cast<int>(nodes_.size()) - 1};
    }

    void accumulate(Var v, const Tensor4& g) {
        auto& slot = grads_[static_cast<std::size_t>(v.id)];
        if (slot.empty()) {
            slot = g;
        } else {
            for (std::int64_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
        }
    }

    void accumulate_move(Var v, Tensor4&& g) {
        auto& slot = grads_[static_cast<std::size_t>(v.id)];
        if (slot.empty()) {
            slot = std::move(g);
        } else {
            for (std::int64_t i = 0; i < slot.size(); ++i) slot[i] += g[i];
        }
    }

public:
    const Tensor4& value(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].value; }
    double scalar(Var v) const {
        require(value(v).size() == 1, "scalar: node holds ", to_string(value(v).shape()));
        return value(v)[0];
    }
    bool requires_grad(Var v) const { return nodes_[static_cast<std::size_t>(v.id)].requires_grad; }

    Var leaf(Tensor4 value, bool requires_grad = false) { return push(std::move(value), requires_grad); }

    Var conv2d(Var x, Var w, int stride, int pad) { return conv2d_impl(x, w, Var{}, stride, pad); }
    Var conv2d_bias(Var x, Var w, Var b, int stride, int pad) { return conv2d_impl(x, w, b, stride, pad); }

    Var relu(Var x) {
        Tensor4 out = robustedge::relu(value(x));
        return push(std::move(out), requires_grad(x), [x](Tape& t, const Tensor4& g, const Node& self) {
            if (!t.requires_grad(x)) return;
            const Tensor4& y = self.value;
            std::vector<double> gx(g.vec().size());
            for (std::size_t i = 0; i < gx.size(); ++i)
                gx[i] = y.vec()[i] > 0.0 ? g.vec()[i] : 0.0;
            t.accumulate_move(x, Tensor4::wrap(g.shape(), std::move(gx)));
        });
    }

    Var tanh_op(Var x) {
        Tensor4 out = ew::map(value(x), [](double v) { return std::tanh(v); });
        return push(std::move(out), requires_grad(x), [x](Tape& t, const Tensor4& g, const Node& self) {
            if (!t.requires_grad(x)) return;
            const Tensor4& y = self.value;
            std::vector<double> gx(g.vec().size());
            for (std::size_t i = 0; i < gx.size(); ++i) gx[i] = g.vec()[i] * (1.0 - y.vec()[i] * y.vec()[i]);
            t.accumulate_move(x, Tensor4::wrap(g.shape(), std::move(gx)));
        });
    }

    Var add(Var a, Var b) {
        Tensor4 out = robustedge::add(value(a), value(b));
        return push(std::move(out), requires_grad(a) || requires_grad(b),
                    [a, b](Tape& t, const Tensor4& g, const Node&) {
                        if (t.requires_grad(a)) t.accumulate(a, g);
                        if (t.requires_grad(b)) t.accumulate(b, g);
                    });
    }

    Var sub(Var a, Var b) {
        Tensor4 out = robustedge::sub(value(a), value(b));
        return push(std::move(out), requires_grad(a) || requires_grad(b),
                    [a, b](Tape& t, const Tensor4& g, const Node&) {
                        if (t.requires_grad(a)) t.accumulate(a, g);
                        if (t.requires_grad(b)) t.accumulate_move(b, robustedge::scale(g, -1.0));
                    });
    }

    Var scale(Var x, double s) {
        Tensor4 out = robustedge::scale(value(x), s);
        return push(std::move(out), requires_grad(x), [x, s](Tape& t, const Tensor4& g, const Node&) {
            if (t.requires_grad(x)) t.accumulate_move(x, robustedge::scale(g, s));
        });
    }

    // Mean of |z| per sample: (B,C,H,W) -> (B,1,1,1). The detector's energy
    // signature composes this with mean_batch.
    Var mean_abs_per_sample(Var x) {
        const Tensor4& v = value(x);
        require(!v.empty(), "mean_abs_per_sample: empty tensor");
        const auto [B, C, H, W] = v.shape();
        const std::int64_t per = C * H * W;
        Tensor4 out = Tensor4::zeros({B, 1, 1, 1});
        for (std::int64_t b = 0; b < B; ++b) {
            double acc = 0.0;
            const double* p = v.data() + b * per;
            for (std::int64_t i = 0; i < per; ++i) acc += std::abs(p[i]);
            out[b] = acc / static_cast<double>(per);
        }
        return push(std::move(out), requires_grad(x), [x, per](Tape& t, const Tensor4& g, const Node&) {
            if (!t.requires_grad(x)) return;
            const Tensor4& v = t.value(x);
            std::vector<double> gx(v.vec().size());
            const double inv = 1.0 / static_cast<double>(per);
            for (std::int64_t b = 0; b < v.shape().n; ++b) {
                const double gb = g[b] * inv;
                const double* p = v.data() + b * per;
                double* q = gx.data() + b * per;
                for (std::int64_t i = 0; i < per; ++i)
                    q[i] = p[i] > 0.0 ? gb : (p[i] < 0.0 ? -gb : 0.0);
            }
            t.accumulate_move(x, Tensor4::wrap(v.shape(), std::move(gx)));
        });
    }

    // (B,1,1,1) -> scalar mean over the batch axis.
    Var mean_batch(Var x) {
        const Tensor4& v = value(x);
        require(v.shape().c == 1 && v.shape().h == 1 && v.shape().w == 1,
                "mean_batch: expected (B,1,1,1), got ", to_string(v.shape()));
        require(!v.empty(), "mean_batch: empty tensor");
        double acc = 0.0;
        for (double e : v.vec()) acc += e;
        Tensor4 out = Tensor4::full({1, 1, 1, 1}, acc / static_cast<double>(v.size()));
        return push(std::move(out), requires_grad(x), [x](Tape& t, const Tensor4& g, const Node&) {
            if (!t.requires_grad(x)) return;
            const Shape4 s = t.value(x).shape();
            const double gb = g[0] / static_cast<double>(s.n);
            t.accumulate_move(x, Tensor4::full(s, gb));
        });
    }

    Var mean_all(Var x) {
        const Tensor4& v = value(x);
        require(!v.empty(), "mean_all: empty tensor");
        Tensor4 out = Tensor4::full({1, 1, 1, 1}, robustedge::mean(v));
        return push(std::move(out), requires_grad(x), [x](Tape& t, const Tensor4& g, const Node&) {
            if (!t.requires_grad(x)) return;
            const Shape4 s = t.value(x).shape();
            t.accumulate_move(x, Tensor4::full(s, g[0] / static_cast<double>(s.count())));
        });
    }

    // (e - target)^2 on a scalar node.
    Var mse_to(Var e, double target) {
        const double d = scalar(e) - target;
        Tensor4 out = Tensor4::full({1, 1, 1, 1}, d * d);
        return push(std::move(out), requires_grad(e), [e, d](Tape& t, const Tensor4& g, const Node&) {
            if (t.requires_grad(e)) t.accumulate_move(e, Tensor4::full({1, 1, 1, 1}, 2.0 * d * g[0]));
        });
    }

    // Sum of squared differences to a constant reference (C&W distance term).
    Var sum_squares_to(Var x, const Tensor4& ref) {
        const Tensor4& v = value(x);
        require(v.shape() == ref.shape(), "sum_squares_to: shape mismatch");
        double acc = 0.0;
        for (std::int64_t i = 0; i < v.size(); ++i) {
            const double d = v[i] - ref[i];
            acc += d * d;
        }
        Tensor4 out = Tensor4::full({1, 1, 1, 1}, acc);
        Tensor4 refcopy = ref;
        return push(std::move(out), requires_grad(x),
                    [x, refcopy](Tape& t, const Tensor4& g, const Node&) {
                        if (!t.requires_grad(x)) return;
                        const Tensor4& v = t.value(x);
                        std::vector<double> gx(v.vec().size());
                        for (std::size_t i = 0; i < gx.size(); ++i)
                            gx[i] = 2.0 * (v.vec()[i] - refcopy.vec()[i]) * g[0];
                        t.accumulate_move(x, Tensor4::wrap(v.shape(), std::move(gx)));
                    });
    }

    Var global_avg_pool(Var x) {
        const Tensor4& v = value(x);
        const auto [B, C, H, W] = v.shape();
        Tensor4 out = Tensor4::zeros({B, C, 1, 1});
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t c = 0; c < C; ++c) {
                double acc = 0.0;
                const double* p = v.data() + (b * C + c) * H * W;
                for (std::int64_t i = 0; i < H * W; ++i) acc += p[i];
                out[b * C + c] = acc / static_cast<double>(H * W);
            }
        return push(std::move(out), requires_grad(x), [x](Tape& t, const Tensor4& g, const Node&) {
            if (!t.requires_grad(x)) return;
            const Shape4 s = t.value(x).shape();
            Tensor4 gx = Tensor4::zeros(s);
            const double inv = 1.0 / static_cast<double>(s.h * s.w);
            for (std::int64_t b = 0; b < s.n; ++b)
                for (std::int64_t c = 0; c < s.c; ++c) {
                    const double gv = g[b * s.c + c] * inv;
                    double* p = gx.data() + (b * s.c + c) * s.h * s.w;
                    for (std::int64_t i = 0; i < s.h * s.w; ++i) p[i] = gv;
                }
            t.accumulate_move(x, std::move(gx));
        });
    }

    // Mean softmax cross-entropy over the batch; logits (B,K,1,1).
    Var cross_entropy_mean(Var logits, const std::vector<int>& labels) {
        const Tensor4& z = value(logits);
        const auto [B, K, H, W] = z.shape();
        require(H == 1 && W == 1, "cross_entropy_mean: logits must be (B,K,1,1), got ", to_string(z.shape()));
        require(static_cast<std::int64_t>(labels.size()) == B, "cross_entropy_mean: ", labels.size(),
                " labels for batch of ", B);
        // softmax probabilities stored for the backward pass
        Tensor4 probs = Tensor4::zeros(z.shape());
        double loss = 0.0;
        for (std::int64_t b = 0; b < B; ++b) {
            require(labels[static_cast<std::size_t>(b)] >= 0 && labels[static_cast<std::size_t>(b)] < K,
                    "cross_entropy_mean: label ", labels[static_cast<std::size_t>(b)], " out of [0,", K, ")");
            const double* zb = z.data() + b * K;
            double m = zb[0];
            for (std::int64_t k = 1; k < K; ++k) m = std::max(m, zb[k]);
            double denom = 0.0;
            for (std::int64_t k = 0; k < K; ++k) denom += std::exp(zb[k] - m);
            const double logdenom = std::log(denom);
            for (std::int64_t k = 0; k < K; ++k)
                probs[b * K + k] = std::exp(zb[k] - m - logdenom);
            loss -= (zb[labels[static_cast<std::size_t>(b)]] - m - logdenom);
        }
        Tensor4 out = Tensor4::full({1, 1, 1, 1}, loss / static_cast<double>(B));
        auto labels_copy = labels;
        auto probs_ptr = std::make_shared<Tensor4>(std::move(probs));
        return push(std::move(out), requires_grad(logits),
                    [logits, labels_copy, probs_ptr](Tape& t, const Tensor4& g, const Node&) {
                        if (!t.requires_grad(logits)) return;
                        const Shape4 s = t.value(logits).shape();
                        Tensor4 gz = *probs_ptr;
                        const double gv = g[0] / static_cast<double>(s.n);
                        for (std::int64_t b = 0; b < s.n; ++b) {
                            gz[b * s.c + labels_copy[static_cast<std::size_t>(b)]] -= 1.0;
                        }
                        for (std::int64_t i = 0; i < gz.size(); ++i) gz[i] *= gv;
                        t.accumulate_move(logits, std::move(gz));
                    });
    }

    // C&W margin, mean over batch. Untargeted: max(Z_y - max_{j!=y} Z_j, -kappa);
    // targeted: max(max_{j!=target} Z_j - Z_target, -kappa).
    Var cw_margin_mean(Var logits, const std::vector<int>& cls, double kappa, bool targeted) {
        const Tensor4& z = value(logits);
        const auto B = z.shape().n, K = z.shape().c;
        require(static_cast<std::int64_t>(cls.size()) == B, "cw_margin_mean: class list size mismatch");
        auto best_other = [&](std::int64_t b, int self) {
            const double* zb = z.data() + b * K;
            int arg = -1;
            double best = 0.0;
            for (int k = 0; k < K; ++k) {
                if (k == self) continue;
                if (arg < 0 || zb[k] > best) {
                    best = zb[k];
                    arg = k;
                }
            }
            return std::pair<int, double>{arg, best};
        };
        double loss = 0.0;
        std::vector<int> other(static_cast<std::size_t>(B));
        std::vector<char> active(static_cast<std::size_t>(B));
        for (std::int64_t b = 0; b < B; ++b) {
            const int self = cls[static_cast<std::size_t>(b)];
            auto [arg, best] = best_other(b, self);
            const double zself = z[b * K + self];
            const double margin = targeted ? best - zself : zself - best;
            other[static_cast<std::size_t>(b)] = arg;
            active[static_cast<std::size_t>(b)] = margin > -kappa;
            loss += std::max(margin, -kappa);
        }
        Tensor4 out = Tensor4::full({1, 1, 1, 1}, loss / static_cast<double>(B));
        auto cls_copy = cls;
        return push(std::move(out), requires_grad(logits),
                    [logits, cls_copy, other, active, targeted](Tape& t, const Tensor4& g, const Node&) {
                        if (!t.requires_grad(logits)) return;
                        const Shape4 s = t.value(logits).shape();
                        Tensor4 gz = Tensor4::zeros(s);
                        const double gv = g[0] / static_cast<double>(s.n);
                        for (std::int64_t b = 0; b < s.n; ++b) {
                            if (!active[static_cast<std::size_t>(b)]) continue;
                            const int self = cls_copy[static_cast<std::size_t>(b)];
                            const int oth = other[static_cast<std::size_t>(b)];
                            const double sgn = targeted ? -1.0 : 1.0;
                            gz[b * s.c + self] += sgn * gv;
                            if (oth >= 0) gz[b * s.c + oth] -= sgn * gv;
                        }
                        t.accumulate_move(logits, std::move(gz));
                    });
    }

    // Fake quantization with straight-through gradients: identity inside the
    // representable range, zero outside. per_sample picks one scale per batch
    // element (activations) instead of one per tensor (weights).
    Var fake_quant(Var x, int bits, bool per_sample) {
        const Tensor4& v = value(x);
        Tensor4 out = per_sample ? quantize_per_sample(v, bits) : quantize_tensor(v, QuantSpec{bits});
        // pass-through mask: |x| <= representable max for the applicable scale
        const auto B = v.shape().n;
        const std::int64_t per = v.size() / std::max<std::int64_t>(B, 1);
        std::vector<double> qmax(static_cast<std::size_t>(per_sample ? B : 1));
        if (per_sample) {
            for (std::int64_t b = 0; b < B; ++b) {
                double m = 0.0;
                const double* p = v.data() + b * per;
                for (std::int64_t i = 0; i < per; ++i) m = std::max(m, std::abs(p[i]));
                qmax[static_cast<std::size_t>(b)] = m;
            }
        } else {
            qmax[0] = max_abs(v);
        }
        return push(std::move(out), requires_grad(x),
                    [x, qmax, per, per_sample](Tape& t, const Tensor4& g, const Node&) {
                        if (!t.requires_grad(x)) return;
                        const Tensor4& v = t.value(x);
                        std::vector<double> gx(v.vec().size());
                        for (std::int64_t i = 0; i < v.size(); ++i) {
                            const double m = qmax[per_sample ? static_cast<std::size_t>(i / per) : 0];
                            gx[static_cast<std::size_t>(i)] = std::abs(v[i]) <= m ? g[i] : 0.0;
                        }
                        t.accumulate_move(x, Tensor4::wrap(v.shape(), std::move(gx)));
                    });
    }

    // Zero-filled spatial shift (the pad-then-crop input transform used by
    // diverse-input attacks). out[h][w] = in[h+dy][w+dx].
    Var shift2d(Var x, int dy, int dx) {
        const Tensor4& v = value(x);
        const auto [B, C, H, W] = v.shape();
        Tensor4 out = Tensor4::zeros(v.shape());
        for (std::int64_t b = 0; b < B; ++b)
            for (std::int64_t c = 0; c < C; ++c)
                for (std::int64_t h = 0; h < H; ++h) {
                    const std::int64_t hs = h + dy;
                    if (hs < 0 || hs >= H) continue;
                    for (std::int64_t w = 0; w < W; ++w) {
                        const std::int64_t ws = w + dx;
                        if (ws < 0 || ws >= W) continue;
                        out.at(b, c, h, w) = v.at(b, c, hs, ws);
                    }
                }
        return push(std::move(out), requires_grad(x), [x, dy, dx](Tape& t, const Tensor4& g, const Node&) {
            if (!t.requires_grad(x)) return;
            const Shape4 s = t.value(x).shape();
            Tensor4 gx = Tensor4::zeros(s);
            for (std::int64_t b = 0; b < s.n; ++b)
                for (std::int64_t c = 0; c < s.c; ++c)
                    for (std::int64_t h = 0; h < s.h; ++h) {
                        const std::int64_t hs = h + dy;
                        if (hs < 0 || hs >= s.h) continue;
                        for (std::int64_t w = 0; w < s.w; ++w) {
                            const std::int64_t ws = w + dx;
                            if (ws < 0 || ws >= s.w) continue;
                            gx.at(b, c, hs, ws) += g.at(b, c, h, w);
                        }
                    }
            t.accumulate_move(x, std::move(gx));
        });
    }

    // Backward from a scalar loss (seed gradient 1).
    void backward(Var loss) {
        require(value(loss).size() == 1, "backward: loss must be scalar, got ",
                to_string(value(loss).shape()));
        backward_seed(loss, Tensor4::full({1, 1, 1, 1}, 1.0));
    }

    // Backward from an arbitrary node with an explicit output gradient.
    void backward_seed(Var from, const Tensor4& seed) {
        require(from.valid() && from.id < static_cast<int>(nodes_.size()), "backward: invalid var");
        require(seed.shape() == value(from).shape(), "backward: seed shape mismatch");
        grads_.assign(nodes_.size(), Tensor4{});
        accumulate(from, seed);
        for (int i = from.id; i >= 0; --i) {
            const Node& node = nodes_[static_cast<std::size_t>(i)];
            if (!node.backward) continue;
            const Tensor4& g = grads_[static_cast<std::size_t>(i)];
            if (g.empty()) continue;
            node.backward(*this, g, node);
        }
    }

    // Gradient of the last backward() w.r.t. v; zeros if v never received one
    // (e.g. a tape with no recorded ops).
    Tensor4 grad(Var v) const {
        if (grads_.empty() || grads_[static_cast<std::size_t>(v.id)].empty())
            return Tensor4::zeros(value(v).shape());
        return grads_[static_cast<std::size_t>(v.id)];
    }

private:
    Var conv2d_impl(Var x, Var w, Var b, int stride, int pad) {
        const double* bias = b.valid() ? value(b).data() : nullptr;
        Tensor4 out = kernels::conv2d_forward(value(x), value(w), bias, stride, pad);
        const bool rg = requires_grad(x) || requires_grad(w) || (b.valid() && requires_grad(b));
        return push(std::move(out), rg, [x, w, b, stride, pad](Tape& t, const Tensor4& g, const Node&) {
            if (t.requires_grad(x))
                t.accumulate_move(
                    x, kernels::conv2d_backward_input(g, t.value(w), t.value(x).shape(), stride, pad));
            if (t.requires_grad(w))
                t.accumulate_move(
                    w, kernels::conv2d_backward_weight(g, t.value(x), t.value(w).shape(), stride, pad));
            if (b.valid() && t.requires_grad(b)) {
                Tensor4 gb = Tensor4::zeros(t.value(b).shape());
                kernels::conv2d_backward_bias(g, gb.data());
                t.accumulate_move(b, std::move(gb));
            }
        });
    }
};

}  // namespace ad
}  // namespace robustedge

#endif  // ROBUSTEDGE_AUTOGRAD_HPP
