#include <gtest/gtest.h>

#include <cmath>

#include "robustedge/quantize.hpp"
#include "robustedge/rng.hpp"

using namespace robustedge;

namespace {
Tensor4 random_tensor(Rng& rng, std::int64_t n, double scale = 1.0) {
    Tensor4 t = Tensor4::zeros({1, 1, 1, n});
    for (std::int64_t i = 0; i < n; ++i) t[i] = rng.uniform(-scale, scale);
    return t;
}
}  // namespace

TEST(Quantize, AllZeroTensorUnchanged) {
    const Tensor4 z = Tensor4::zeros({1, 2, 3, 4});
    for (int bits : {4, 6, 8, 12, 16}) {
        const Tensor4 q = quantize_tensor(z, QuantSpec{bits});
        for (std::int64_t i = 0; i < q.size(); ++i) EXPECT_EQ(q[i], 0.0);
    }
}

TEST(Quantize, EndpointsAreGridPoints) {
    const Tensor4 t = Tensor4::from_vector({1, 1, 1, 2}, {-1.0, 1.0});
    const Tensor4 q = quantize_tensor(t, QuantSpec{16});
    EXPECT_DOUBLE_EQ(q[0], -1.0);
    EXPECT_DOUBLE_EQ(q[1], 1.0);
}

TEST(Quantize, TwoBitGridHandArithmetic) {
    // levels {-1, 0, 1}: scale = 1.0, 0.3 -> 0.0, 1.0 -> 1.0
    const Tensor4 t = Tensor4::from_vector({1, 1, 1, 2}, {0.3, 1.0});
    const Tensor4 q = quantize_tensor(t, QuantSpec{2});
    EXPECT_DOUBLE_EQ(q[0], 0.0);
    EXPECT_DOUBLE_EQ(q[1], 1.0);
}

TEST(Quantize, MaxAbsPreserved) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const Tensor4 t = random_tensor(rng, 64, 2.5);
        for (int bits : {4, 8, 16}) {
            const Tensor4 q = quantize_tensor(t, QuantSpec{bits});
            EXPECT_DOUBLE_EQ(max_abs(q), max_abs(t));
        }
    }
}

// Property suites over 1e3 random tensors: idempotence, monotone fidelity,
// sign preservation.
TEST(QuantizeProperties, IdempotenceMonotoneFidelitySignPreservation) {
    Rng rng(13);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::int64_t n = 8 + rng.below(56);
        const Tensor4 t = random_tensor(rng, n, rng.uniform(0.1, 4.0));

        double prev_mse = -1.0;
        bool first = true;
        for (int bits : {4, 6, 8, 12, 16}) {
            const Tensor4 q = quantize_tensor(t, QuantSpec{bits});
            const Tensor4 qq = quantize_tensor(q, QuantSpec{bits});
            for (std::int64_t i = 0; i < n; ++i) {
                EXPECT_DOUBLE_EQ(q[i], qq[i]);  // idempotence
                if (q[i] != 0.0) {
                    EXPECT_GT(q[i] * t[i], 0.0);  // sign preservation
                }
            }
            const double mse = quantization_mse(t, bits);
            if (!first) EXPECT_LE(mse, prev_mse + 1e-18);  // monotone fidelity in k
            prev_mse = mse;
            first = false;
        }
    }
}

TEST(Quantize, PerSampleMatchesSingleSample) {
    Rng rng(17);
    Tensor4 batch = Tensor4::zeros({4, 2, 3, 3});
    for (std::int64_t i = 0; i < batch.size(); ++i) batch[i] = rng.uniform(-3.0, 3.0);
    const Tensor4 q = quantize_per_sample(batch, 8);
    for (std::int64_t b = 0; b < 4; ++b) {
        const Tensor4 single = quantize_per_sample(batch.slice_sample(b), 8);
        for (std::int64_t i = 0; i < single.size(); ++i) EXPECT_DOUBLE_EQ(single[i], q[b * single.size() + i]);
    }
}

TEST(Quantize, FullPrecisionSpecIsIdentity) {
    Rng rng(19);
    const Tensor4 t = random_tensor(rng, 32);
    const Tensor4 q = quantize_tensor(t, QuantSpec{});
    for (std::int64_t i = 0; i < t.size(); ++i) EXPECT_EQ(q[i], t[i]);
}

TEST(Quantize, TablePrecisionCheck) {
    EXPECT_NO_THROW(require_table_precision(12));
    EXPECT_THROW(require_table_precision(5), Error);
    EXPECT_THROW(require_table_precision(32), Error);
}
