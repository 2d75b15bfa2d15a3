#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"

namespace moesim {

// Row-major real matrix; finite values only.
struct RealMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> values;

    static RealMatrix zeros(int rows, int cols);
    double at(int r, int c) const { return values[static_cast<std::size_t>(r) * cols + c]; }
    double& at(int r, int c) { return values[static_cast<std::size_t>(r) * cols + c]; }
    void validate() const;
};

RealMatrix matmul(const RealMatrix& a, const RealMatrix& b);
double frobenius(const RealMatrix& m);
double frobenius_diff(const RealMatrix& a, const RealMatrix& b);

enum class Granularity { PER_TOKEN, PER_CHANNEL };

// Symmetric INT8 codes in [-127, 127]; all-zero slices use scale 1 with zero
// codes. PER_TOKEN scales rows (activations), PER_CHANNEL scales columns
// (weights, per output channel).
struct QuantizedTensor {
    int rows = 0;
    int cols = 0;
    Granularity granularity = Granularity::PER_TOKEN;
    std::vector<std::int8_t> codes;  // row-major
    std::vector<double> scales;      // one per row (PER_TOKEN) or per column (PER_CHANNEL)

    std::int8_t code_at(int r, int c) const { return codes[static_cast<std::size_t>(r) * cols + c]; }
    double dequant_at(int r, int c) const;
    RealMatrix dequantize() const;
};

QuantizedTensor quantize_per_token(const RealMatrix& x);
QuantizedTensor quantize_per_channel(const RealMatrix& w);

// Integer accumulation in int64, dequantized with scale_token * scale_channel.
// Requires PER_TOKEN activations x PER_CHANNEL weights.
RealMatrix int8_matmul_reference(const QuantizedTensor& xq, const QuantizedTensor& wq);

// Per-channel weight quantization with the integer lattice rescaled by s
// relative to the max-abs baseline: s = 1 is exactly quantize_per_channel,
// s > 1 trades clipping of channel extremes for finer resolution, s < 1 the
// reverse. The inverse factor lands in the dequantization scales, preserving
// operand magnitudes.
QuantizedTensor quantize_per_channel_scaled(const RealMatrix& w, double s);

// Quantization error of the full reference path (per-token activations times
// per-channel weights on the s-rescaled lattice) against the exact product.
double quant_loss(const RealMatrix& x, const RealMatrix& w, double s);

struct ScaleSearchResult {
    double best_scale = 1.0;
    double best_loss = 0.0;
    std::vector<std::pair<double, double>> loss_curve;  // (s, loss) in grid order
};

// Grid argmin of quant_loss; ties resolve toward the smaller s. The default
// grid (65 log-spaced points over [2^-4, 2^4]) contains s = 1 exactly, which
// makes the searched loss never worse than the naive path.
ScaleSearchResult scale_search(const RealMatrix& x, const RealMatrix& w,
                               const std::vector<double>& grid);

std::vector<double> default_scale_grid();

struct ClipSearchResult {
    double best_alpha = 1.0;
    double best_loss = 0.0;
    std::vector<std::pair<double, double>> loss_curve;
};

RealMatrix clip_block(const RealMatrix& w, double alpha);

// Round-trip through the block's single shared INT8 scale (block granularity:
// one scale per block, unlike the per-channel path).
RealMatrix quantize_block_scalar(const RealMatrix& w);

// Block-level clipping: clip W to [alpha*min, alpha*max], quantize at block
// granularity, and pick the alpha minimizing the block output error against
// the original weights; ties prefer the larger alpha (more preserved range).
ClipSearchResult block_clip_search(const RealMatrix& w_block, const RealMatrix& x,
                                   const std::vector<double>& alpha_grid);

struct SuppressResult {
    RealMatrix w;               // diag(d) * W  (rows scaled)
    RealMatrix x;               // X * diag(d)^-1 (columns scaled)
    std::vector<double> d;      // per inner-channel smoothing factors
};

// Diagonal smoothing: d_j = sqrt(max|X_:j| / max|W_j:|) balances activation
// and weight ranges per inner channel while preserving X W exactly.
SuppressResult outlier_suppress(const RealMatrix& x, const RealMatrix& w);

enum class OpPath { INT8_PATH, HIGH_PRECISION_PATH };

enum class OpClass { MatmulFfn, MatmulAttention, Normalization, Gating, Embedding, Activation };

struct OperatorInfo {
    std::string name;
    OpClass op_class = OpClass::MatmulFfn;
    double gflops = 0.0;
    bool sensitive = false;
};

struct QuantScheme {
    std::vector<std::pair<std::string, OpPath>> assignment;
};

OpClass op_class_from_string(const std::string& s);

// Heavy matmuls take the INT8 path; normalization and gating stay in high
// precision. Every operator is classified exactly once.
QuantScheme classify_operators(const std::vector<OperatorInfo>& ops);

}  // namespace moesim
