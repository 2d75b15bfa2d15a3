#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "core/quantizer.hpp"
#include "quant_reference.hpp"

using namespace moesim;

TEST_CASE("all-zero rows use the unit-scale convention") {
    RealMatrix x = RealMatrix::zeros(3, 4);
    auto q = quantize_per_token(x);
    for (auto scale : q.scales) CHECK(scale == 1.0);
    for (auto code : q.codes) CHECK(code == 0);
}

TEST_CASE("integer rows in [-127, 127] round-trip exactly") {
    RealMatrix x = RealMatrix::zeros(1, 255);
    for (int c = 0; c < 255; ++c) x.at(0, c) = static_cast<double>(c - 127);
    auto q = quantize_per_token(x);
    CHECK(q.scales[0] == doctest::Approx(1.0));
    for (int c = 0; c < 255; ++c) CHECK(q.dequant_at(0, c) == doctest::Approx(x.at(0, c)));
}

TEST_CASE("per-token round-trip error stays within half a scale step") {
    Rng rng(2);
    for (int trial = 0; trial < 100; ++trial) {
        RealMatrix x = random_matrix(4, 8, rng, 10.0);
        auto q = quantize_per_token(x);
        for (int r = 0; r < x.rows; ++r)
            for (int c = 0; c < x.cols; ++c)
                CHECK(std::fabs(q.dequant_at(r, c) - x.at(r, c)) <=
                      q.scales[static_cast<std::size_t>(r)] / 2.0 + 1e-15);
    }
}

TEST_CASE("per-channel quantization of the identity") {
    RealMatrix eye = RealMatrix::zeros(4, 4);
    for (int i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
    auto q = quantize_per_channel(eye);
    for (auto scale : q.scales) CHECK(scale == doctest::Approx(1.0 / 127.0));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) CHECK(q.code_at(i, j) == (i == j ? 127 : 0));
}

TEST_CASE("column scaling changes only the scale, not the codes") {
    Rng rng(3);
    RealMatrix w = random_matrix(8, 8, rng);
    auto base = quantize_per_channel(w);
    double c = 3.75;
    RealMatrix scaled = w;
    for (int r = 0; r < 8; ++r) scaled.at(r, 2) *= c;
    auto q = quantize_per_channel(scaled);
    CHECK(q.scales[2] == doctest::Approx(base.scales[2] * c));
    for (int r = 0; r < 8; ++r) CHECK(q.code_at(r, 2) == base.code_at(r, 2));
}

TEST_CASE("per-channel round-trip error stays within half a scale step") {
    Rng rng(4);
    for (int trial = 0; trial < 100; ++trial) {
        RealMatrix w = random_matrix(8, 8, rng, 5.0);
        auto q = quantize_per_channel(w);
        for (int r = 0; r < w.rows; ++r)
            for (int c = 0; c < w.cols; ++c)
                CHECK(std::fabs(q.dequant_at(r, c) - w.at(r, c)) <=
                      q.scales[static_cast<std::size_t>(c)] / 2.0 + 1e-15);
    }
}

TEST_CASE("reference integer matmul dequantizes through wide accumulation") {
    RealMatrix eye = RealMatrix::zeros(4, 4);
    for (int i = 0; i < 4; ++i) eye.at(i, i) = 1.0;
    auto result = int8_matmul_reference(quantize_per_token(eye), quantize_per_channel(eye));
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j)
            CHECK(std::fabs(result.at(i, j) - (i == j ? 1.0 : 0.0)) <= 1.0 / 127.0);

    RealMatrix zero = RealMatrix::zeros(3, 4);
    Rng rng(5);
    auto anything = random_matrix(4, 2, rng);
    auto zeros = int8_matmul_reference(quantize_per_token(zero), quantize_per_channel(anything));
    for (double v : zeros.values) CHECK(v == 0.0);

    CHECK_THROWS_AS(int8_matmul_reference(quantize_per_channel(eye), quantize_per_channel(eye)),
                    Error);
}

TEST_CASE("integer matmul error respects the propagated half-step bound") {
    Rng rng(6);
    for (int trial = 0; trial < 25; ++trial) {
        RealMatrix x = random_matrix(8, 8, rng, 4.0);
        RealMatrix w = random_matrix(8, 8, rng, 4.0);
        auto xq = quantize_per_token(x);
        auto wq = quantize_per_channel(w);
        auto approx = int8_matmul_reference(xq, wq);
        auto exact = matmul(x, w);

        // |x^ w^ - x w| <= sum_k sx/2 * (|w| + sw/2) + |x| * sw/2, elementwise.
        double bound_sq = 0.0;
        for (int i = 0; i < 8; ++i) {
            for (int j = 0; j < 8; ++j) {
                double b = 0.0;
                for (int k = 0; k < 8; ++k) {
                    double sx = xq.scales[static_cast<std::size_t>(i)] / 2.0;
                    double sw = wq.scales[static_cast<std::size_t>(j)] / 2.0;
                    b += sx * (std::fabs(w.at(k, j)) + sw) + std::fabs(x.at(i, k)) * sw;
                }
                bound_sq += b * b;
            }
        }
        CHECK(frobenius_diff(approx, exact) <= std::sqrt(bound_sq) + 1e-12);
    }
}

TEST_CASE("scale search finds the zero-loss point for representable inputs") {
    RealMatrix x = RealMatrix::zeros(2, 2);
    x.at(0, 0) = 127.0;
    x.at(1, 1) = 64.0;
    RealMatrix w = RealMatrix::zeros(2, 2);
    w.at(0, 0) = 127.0;
    w.at(1, 1) = 127.0;
    auto result = scale_search(x, w, {0.5, 1.0, 2.0});
    CHECK(result.best_scale == doctest::Approx(1.0));
    CHECK(result.best_loss == doctest::Approx(0.0));
}

TEST_CASE("singleton grids are returned unchanged") {
    Rng rng(7);
    RealMatrix x = random_matrix(4, 4, rng);
    RealMatrix w = random_matrix(4, 4, rng);
    CHECK(scale_search(x, w, {1.0}).best_scale == 1.0);
    CHECK(block_clip_search(w, x, {1.0}).best_alpha == 1.0);
    CHECK_THROWS_AS(scale_search(x, w, {}), Error);
    CHECK_THROWS_AS(block_clip_search(w, x, {}), Error);
}

TEST_CASE("the default grid contains one exactly; searched loss never beats it") {
    auto grid = default_scale_grid();
    CHECK(grid.size() == 65);
    bool has_one = false;
    for (double s : grid) has_one = has_one || s == 1.0;
    CHECK(has_one);

    Rng rng(8);
    RealMatrix x = random_matrix(6, 6, rng, 3.0);
    RealMatrix w = random_matrix(6, 6, rng, 3.0);
    auto result = scale_search(x, w, grid);
    CHECK(result.best_loss <= quant_loss(x, w, 1.0) + 1e-12);
}

TEST_CASE("scale search agrees with an independent exhaustive oracle") {
    auto grid = default_scale_grid();
    Rng rng(9);
    for (int seed = 0; seed < 30; ++seed) {
        RealMatrix x = random_matrix(8, 8, rng, 2.0 + seed * 0.1);
        RealMatrix w = random_matrix(8, 4, rng, 1.0 + seed * 0.2);
        auto result = scale_search(x, w, grid);
        CHECK(result.best_scale == doctest::Approx(ref_scale_argmin(x, w, grid)).epsilon(1e-12));
    }
}

TEST_CASE("clipping a uniform block only hurts") {
    RealMatrix w = RealMatrix::zeros(8, 8);
    for (double& v : w.values) v = 0.7;
    Rng rng(10);
    RealMatrix x = random_matrix(4, 8, rng);
    std::vector<double> grid{0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
    CHECK(block_clip_search(w, x, grid).best_alpha == doctest::Approx(1.0));
}

TEST_CASE("clipping rescues a block dominated by one outlier") {
    // 63 small positive weights share the block scale with one 100x outlier
    // that feeds a near-silent activation channel.
    Rng rng(11);
    RealMatrix w = RealMatrix::zeros(8, 8);
    for (double& v : w.values) v = 0.01 + 0.04 * rng.next_double();
    w.at(3, 3) = 5.0;
    RealMatrix x = random_matrix(4, 8, rng, 1.0);
    for (int r = 0; r < 4; ++r) x.at(r, 3) *= 0.001;

    std::vector<double> grid;
    for (int i = 1; i <= 20; ++i) grid.push_back(i / 20.0);
    auto result = block_clip_search(w, x, grid);
    CHECK(result.best_alpha < 1.0);
    CHECK(result.best_loss < result.loss_curve.back().second);  // strictly beats alpha = 1
}

TEST_CASE("clip search agrees with an independent exhaustive oracle") {
    std::vector<double> grid;
    for (int i = 1; i <= 16; ++i) grid.push_back(i / 16.0);
    Rng rng(12);
    for (int seed = 0; seed < 30; ++seed) {
        RealMatrix w = random_matrix(8, 8, rng, 0.1);
        if (seed % 2 == 0) w.at(seed % 8, (seed * 3) % 8) = 4.0;  // sprinkle outliers
        RealMatrix x = random_matrix(4, 8, rng);
        auto result = block_clip_search(w, x, grid);
        CHECK(result.best_alpha == doctest::Approx(ref_clip_argmin(w, x, grid)).epsilon(1e-12));
        CHECK(result.best_loss == doctest::Approx(ref_clip_loss(x, w, result.best_alpha)));
    }
}

TEST_CASE("balanced inputs produce the identity smoothing transform") {
    RealMatrix x = RealMatrix::zeros(2, 2);
    RealMatrix w = RealMatrix::zeros(2, 2);
    x.at(0, 0) = x.at(1, 1) = 1.0;
    w.at(0, 0) = w.at(1, 1) = 1.0;
    auto result = outlier_suppress(x, w);
    for (double d : result.d) CHECK(d == doctest::Approx(1.0));
}

TEST_CASE("smoothing shrinks activation outliers without changing the product") {
    Rng rng(13);
    RealMatrix x = random_matrix(8, 8, rng, 1.0);
    for (int r = 0; r < 8; ++r) x.at(r, 5) *= 1000.0;  // one hot activation channel
    RealMatrix w = random_matrix(8, 8, rng, 1.0);

    auto result = outlier_suppress(x, w);
    auto before = matmul(x, w);
    auto after = matmul(result.x, result.w);
    CHECK(frobenius_diff(before, after) <= 1e-12 * frobenius(before));

    auto col_peak = [](const RealMatrix& m, int col) {
        double peak = 0.0;
        for (int r = 0; r < m.rows; ++r) peak = std::max(peak, std::fabs(m.at(r, col)));
        return peak;
    };
    CHECK(col_peak(result.x, 5) < col_peak(x, 5));
    // Per-channel range product never grows.
    for (int j = 0; j < 8; ++j) {
        auto row_peak = [&](const RealMatrix& m) {
            double peak = 0.0;
            for (int c = 0; c < m.cols; ++c) peak = std::max(peak, std::fabs(m.at(j, c)));
            return peak;
        };
        CHECK(col_peak(result.x, j) * row_peak(result.w) <=
              col_peak(x, j) * row_peak(w) * (1.0 + 1e-12));
    }

    // And the quantized product improves on this instance.
    double err_before = quant_loss(x, w, 1.0);
    double err_after = quant_loss(result.x, result.w, 1.0);
    CHECK(err_after <= err_before);
}

TEST_CASE("dead channels keep a unit smoothing factor") {
    RealMatrix x = RealMatrix::zeros(4, 3);
    RealMatrix w = RealMatrix::zeros(3, 2);
    x.at(0, 0) = 2.0;
    w.at(0, 0) = 1.0;  // channels 1 and 2 are all-zero
    auto result = outlier_suppress(x, w);
    CHECK(result.d[1] == 1.0);
    CHECK(result.d[2] == 1.0);
}

TEST_CASE("operator classification routes heavy matmuls to int8") {
    std::vector<OperatorInfo> ops{
        {"ffn_gemm", OpClass::MatmulFfn, 900.0, false},
        {"attn_gemm", OpClass::MatmulAttention, 500.0, false},
        {"rmsnorm", OpClass::Normalization, 0.5, true},
        {"router_gate", OpClass::Gating, 0.2, true},
    };
    auto scheme = classify_operators(ops);
    REQUIRE(scheme.assignment.size() == 4);
    CHECK(scheme.assignment[0].second == OpPath::INT8_PATH);
    CHECK(scheme.assignment[1].second == OpPath::INT8_PATH);
    CHECK(scheme.assignment[2].second == OpPath::HIGH_PRECISION_PATH);
    CHECK(scheme.assignment[3].second == OpPath::HIGH_PRECISION_PATH);

    CHECK(classify_operators({}).assignment.empty());
    CHECK_THROWS_AS(op_class_from_string("mystery"), Error);
    CHECK(op_class_from_string("matmul_ffn") == OpClass::MatmulFfn);
}

TEST_CASE("suppress + clip + search never loses to search alone or naive max-abs") {
    // Synthetic outlier corpus: heavy activation channels plus weight spikes.
    Rng rng(14);
    auto grid = default_scale_grid();
    std::vector<double> alpha_grid;
    for (int i = 1; i <= 16; ++i) alpha_grid.push_back(i / 16.0);

    for (int seed = 0; seed < 20; ++seed) {
        RealMatrix x = random_matrix(8, 8, rng, 1.0);
        RealMatrix w = random_matrix(8, 8, rng, 0.1);
        x.at(seed % 8, seed % 8) *= 500.0;
        w.at((seed * 5) % 8, (seed * 3) % 8) = 3.0;

        double naive = quant_loss(x, w, 1.0);
        double searched = scale_search(x, w, grid).best_loss;

        // Offline pipeline: smooth, then jointly grid the clip factor and the
        // lattice scale (alpha = 1 makes the searched loss an upper bound).
        auto smoothed = outlier_suppress(x, w);
        double combined = std::numeric_limits<double>::infinity();
        for (double alpha : alpha_grid) {
            RealMatrix clipped = clip_block(smoothed.w, alpha);
            combined = std::min(combined, scale_search(smoothed.x, clipped, grid).best_loss);
        }

        CHECK(searched <= naive + 1e-12);
        CHECK(combined <= searched + 1e-12);
    }
}
