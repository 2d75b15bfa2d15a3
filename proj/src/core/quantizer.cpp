#include "quantizer.hpp"

#include <algorithm>
#include <cmath>

namespace moesim {

RealMatrix RealMatrix::zeros(int rows, int cols) {
    RealMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.values.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0);
    return m;
}

void RealMatrix::validate() const {
    if (rows <= 0 || cols <= 0)
        throw_error(ErrorCode::Validation, "matrix dimensions must be positive");
    if (values.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols))
        throw_error(ErrorCode::Validation, "matrix storage does not match its shape");
    for (double v : values)
        if (!std::isfinite(v)) throw_error(ErrorCode::Validation, "matrix contains non-finite values");
}

RealMatrix matmul(const RealMatrix& a, const RealMatrix& b) {
    if (a.cols != b.rows)
        throw_error(ErrorCode::InvalidArgument, "matmul: inner dimensions do not match");
    RealMatrix out = RealMatrix::zeros(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i) {
        for (int k = 0; k < a.cols; ++k) {
            double aik = a.at(i, k);
            if (aik == 0.0) continue;
            for (int j = 0; j < b.cols; ++j) out.at(i, j) += aik * b.at(k, j);
        }
    }
    return out;
}

double frobenius(const RealMatrix& m) {
    double sum = 0.0;
    for (double v : m.values) sum += v * v;
    return std::sqrt(sum);
}

double frobenius_diff(const RealMatrix& a, const RealMatrix& b) {
    if (a.rows != b.rows || a.cols != b.cols)
        throw_error(ErrorCode::InvalidArgument, "frobenius_diff: shape mismatch");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        double d = a.values[i] - b.values[i];
        sum += d * d;
    }
    return std::sqrt(sum);
}

double QuantizedTensor::dequant_at(int r, int c) const {
    double scale = granularity == Granularity::PER_TOKEN ? scales[static_cast<std::size_t>(r)]
                                                         : scales[static_cast<std::size_t>(c)];
    return static_cast<double>(code_at(r, c)) * scale;
}

RealMatrix QuantizedTensor::dequantize() const {
    RealMatrix m = RealMatrix::zeros(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m.at(r, c) = dequant_at(r, c);
    return m;
}

namespace {

std::int8_t code_of(double value, double scale) {
    double q = std::round(value / scale);
    q = std::clamp(q, -127.0, 127.0);
    return static_cast<std::int8_t>(q);
}

}  // namespace

QuantizedTensor quantize_per_token(const RealMatrix& x) {
    x.validate();
    QuantizedTensor q;
    q.rows = x.rows;
    q.cols = x.cols;
    q.granularity = Granularity::PER_TOKEN;
    q.codes.resize(x.values.size());
    q.scales.resize(static_cast<std::size_t>(x.rows));
    for (int r = 0; r < x.rows; ++r) {
        double peak = 0.0;
        for (int c = 0; c < x.cols; ++c) peak = std::max(peak, std::fabs(x.at(r, c)));
        double scale = peak > 0.0 ? peak / 127.0 : 1.0;  // all-zero row convention
        q.scales[static_cast<std::size_t>(r)] = scale;
        for (int c = 0; c < x.cols; ++c)
            q.codes[static_cast<std::size_t>(r) * x.cols + c] = code_of(x.at(r, c), scale);
    }
    return q;
}

QuantizedTensor quantize_per_channel(const RealMatrix& w) {
    w.validate();
    QuantizedTensor q;
    q.rows = w.rows;
    q.cols = w.cols;
    q.granularity = Granularity::PER_CHANNEL;
    q.codes.resize(w.values.size());
    q.scales.resize(static_cast<std::size_t>(w.cols));
    for (int c = 0; c < w.cols; ++c) {
        double peak = 0.0;
        for (int r = 0; r < w.rows; ++r) peak = std::max(peak, std::fabs(w.at(r, c)));
        double scale = peak > 0.0 ? peak / 127.0 : 1.0;
        q.scales[static_cast<std::size_t>(c)] = scale;
        for (int r = 0; r < w.rows; ++r)
            q.codes[static_cast<std::size_t>(r) * w.cols + c] = code_of(w.at(r, c), scale);
    }
    return q;
}

RealMatrix int8_matmul_reference(const QuantizedTensor& xq, const QuantizedTensor& wq) {
    if (xq.granularity != Granularity::PER_TOKEN || wq.granularity != Granularity::PER_CHANNEL)
        throw_error(ErrorCode::InvalidArgument,
                    "int8_matmul_reference: needs PER_TOKEN activations x PER_CHANNEL weights");
    if (xq.cols != wq.rows)
        throw_error(ErrorCode::InvalidArgument, "int8_matmul_reference: inner dimensions differ");

    RealMatrix out = RealMatrix::zeros(xq.rows, wq.cols);
    for (int i = 0; i < xq.rows; ++i) {
        for (int j = 0; j < wq.cols; ++j) {
            std::int64_t acc = 0;  // wide accumulate, then one dequant multiply
            for (int k = 0; k < xq.cols; ++k)
                acc += static_cast<std::int64_t>(xq.code_at(i, k)) *
                       static_cast<std::int64_t>(wq.code_at(k, j));
            out.at(i, j) = static_cast<double>(acc) * xq.scales[static_cast<std::size_t>(i)] *
                           wq.scales[static_cast<std::size_t>(j)];
        }
    }
    return out;
}

QuantizedTensor quantize_per_channel_scaled(const RealMatrix& w, double s) {
    if (s <= 0.0) throw_error(ErrorCode::InvalidArgument, "quantize: scale factor must be positive");
    w.validate();
    QuantizedTensor q;
    q.rows = w.rows;
    q.cols = w.cols;
    q.granularity = Granularity::PER_CHANNEL;
    q.codes.resize(w.values.size());
    q.scales.resize(static_cast<std::size_t>(w.cols));
    for (int c = 0; c < w.cols; ++c) {
        double peak = 0.0;
        for (int r = 0; r < w.rows; ++r) peak = std::max(peak, std::fabs(w.at(r, c)));
        // s rescales the integer lattice around the max-abs baseline: s > 1
        // clips the channel's extremes, s < 1 coarsens its resolution. The
        // inverse factor rides along in the dequantization scale, so operand
        // magnitudes are preserved.
        double scale = peak > 0.0 ? peak / (127.0 * s) : 1.0;
        q.scales[static_cast<std::size_t>(c)] = scale;
        for (int r = 0; r < w.rows; ++r)
            q.codes[static_cast<std::size_t>(r) * w.cols + c] = code_of(w.at(r, c), scale);
    }
    return q;
}

double quant_loss(const RealMatrix& x, const RealMatrix& w, double s) {
    RealMatrix approx =
        int8_matmul_reference(quantize_per_token(x), quantize_per_channel_scaled(w, s));
    return frobenius_diff(approx, matmul(x, w));
}

std::vector<double> default_scale_grid() {
    std::vector<double> grid;
    grid.reserve(65);
    for (int i = 0; i <= 64; ++i)  // 2^(i/8 - 4); i == 32 lands exactly on 1.0
        grid.push_back(std::exp2(static_cast<double>(i) / 8.0 - 4.0));
    return grid;
}

ScaleSearchResult scale_search(const RealMatrix& x, const RealMatrix& w,
                               const std::vector<double>& grid) {
    if (grid.empty()) throw_error(ErrorCode::InvalidArgument, "scale_search: empty grid");
    for (double s : grid)
        if (s <= 0.0) throw_error(ErrorCode::InvalidArgument, "scale_search: grid entries must be positive");
    if (x.cols != w.rows)
        throw_error(ErrorCode::InvalidArgument, "scale_search: shapes are not composable");

    ScaleSearchResult result;
    bool first = true;
    for (double s : grid) {
        double loss = quant_loss(x, w, s);
        result.loss_curve.emplace_back(s, loss);
        if (first || loss < result.best_loss ||
            (loss == result.best_loss && s < result.best_scale)) {
            result.best_loss = loss;
            result.best_scale = s;
            first = false;
        }
    }
    return result;
}

RealMatrix clip_block(const RealMatrix& w, double alpha) {
    double lo = w.values.front(), hi = w.values.front();
    for (double v : w.values) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    // Clip range [alpha*min, alpha*max] as stated; values outside saturate.
    RealMatrix out = w;
    for (double& v : out.values) v = std::clamp(v, alpha * lo, alpha * hi);
    return out;
}

RealMatrix quantize_block_scalar(const RealMatrix& w) {
    // Block granularity: one shared symmetric scale for the whole block, so a
    // single outlier inflates the step size of every element in it.
    double peak = 0.0;
    for (double v : w.values) peak = std::max(peak, std::fabs(v));
    double scale = peak > 0.0 ? peak / 127.0 : 1.0;
    RealMatrix out = w;
    for (double& v : out.values)
        v = static_cast<double>(code_of(v, scale)) * scale;
    return out;
}

ClipSearchResult block_clip_search(const RealMatrix& w_block, const RealMatrix& x,
                                   const std::vector<double>& alpha_grid) {
    if (alpha_grid.empty()) throw_error(ErrorCode::InvalidArgument, "block_clip_search: empty grid");
    for (double a : alpha_grid)
        if (a <= 0.0 || a > 1.0)
            throw_error(ErrorCode::InvalidArgument, "block_clip_search: alpha must lie in (0, 1]");

    // Block output error against the unclipped, unquantized weights.
    RealMatrix exact = matmul(x, w_block);
    ClipSearchResult result;
    bool first = true;
    for (double alpha : alpha_grid) {
        RealMatrix approx = matmul(x, quantize_block_scalar(clip_block(w_block, alpha)));
        double loss = frobenius_diff(approx, exact);
        result.loss_curve.emplace_back(alpha, loss);
        if (first || loss < result.best_loss ||
            (loss == result.best_loss && alpha > result.best_alpha)) {  // keep more range on ties
            result.best_loss = loss;
            result.best_alpha = alpha;
            first = false;
        }
    }
    return result;
}

SuppressResult outlier_suppress(const RealMatrix& x, const RealMatrix& w) {
    if (x.cols != w.rows)
        throw_error(ErrorCode::InvalidArgument, "outlier_suppress: shapes are not composable");

    SuppressResult result;
    result.x = x;
    result.w = w;
    result.d.assign(static_cast<std::size_t>(x.cols), 1.0);
    for (int j = 0; j < x.cols; ++j) {
        double ax = 0.0, aw = 0.0;
        for (int r = 0; r < x.rows; ++r) ax = std::max(ax, std::fabs(x.at(r, j)));
        for (int c = 0; c < w.cols; ++c) aw = std::max(aw, std::fabs(w.at(j, c)));
        if (ax <= 0.0 || aw <= 0.0) continue;  // dead channel keeps d_j = 1
        double d = std::sqrt(ax / aw);
        result.d[static_cast<std::size_t>(j)] = d;
        for (int r = 0; r < x.rows; ++r) result.x.at(r, j) /= d;
        for (int c = 0; c < w.cols; ++c) result.w.at(j, c) *= d;
    }
    return result;
}

OpClass op_class_from_string(const std::string& s) {
    if (s == "matmul_ffn") return OpClass::MatmulFfn;
    if (s == "matmul_attention") return OpClass::MatmulAttention;
    if (s == "normalization") return OpClass::Normalization;
    if (s == "gating") return OpClass::Gating;
    if (s == "embedding") return OpClass::Embedding;
    if (s == "activation") return OpClass::Activation;
    throw_error(ErrorCode::InvalidArgument, "unknown operator class: " + s);
}

QuantScheme classify_operators(const std::vector<OperatorInfo>& ops) {
    QuantScheme scheme;
    for (const auto& op : ops) {
        OpPath path = OpPath::HIGH_PRECISION_PATH;
        switch (op.op_class) {
            case OpClass::MatmulFfn:
            case OpClass::MatmulAttention:
            case OpClass::Embedding:
                path = OpPath::INT8_PATH;
                break;
            case OpClass::Normalization:
            case OpClass::Gating:
                path = OpPath::HIGH_PRECISION_PATH;
                break;
            case OpClass::Activation:
                path = op.sensitive ? OpPath::HIGH_PRECISION_PATH : OpPath::INT8_PATH;
                break;
        }
        scheme.assignment.emplace_back(op.name, path);
    }
    return scheme;
}

}  // namespace moesim
