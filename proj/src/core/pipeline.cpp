#include "pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "rng.hpp"

namespace moesim {

void EventLoop::schedule(std::int64_t time_us, const std::string& kind, std::int64_t a,
                         std::int64_t b) {
    if (time_us < now_us_)
        throw_error(ErrorCode::InvalidArgument,
                    "event scheduled in the past: " + std::to_string(time_us) + " < " +
                        std::to_string(now_us_));
    Event event;
    event.time_us = time_us;
    event.sequence = next_sequence_++;
    event.kind = kind;
    event.a = a;
    event.b = b;
    queue_.push(std::move(event));
}

void EventLoop::set_handler(const std::string& kind, Handler handler) {
    handlers_[kind] = std::move(handler);
}

const std::vector<TraceRecord>& EventLoop::run(std::int64_t horizon_us) {
    while (!queue_.empty()) {
        Event event = queue_.top();
        if (horizon_us >= 0 && event.time_us > horizon_us) break;
        queue_.pop();
        now_us_ = event.time_us;
        trace_.push_back({event.time_us, event.sequence, event.kind, event.a, event.b});
        auto it = handlers_.find(event.kind);
        if (it != handlers_.end()) it->second(*this, event);
    }
    return trace_;
}

std::uint64_t EventLoop::trace_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& r : trace_) {
        h = hash_combine(h, static_cast<std::uint64_t>(r.time_us));
        h = hash_combine(h, r.sequence);
        h = hash_combine(h, hash_bytes(r.kind));
        h = hash_combine(h, static_cast<std::uint64_t>(r.a));
        h = hash_combine(h, static_cast<std::uint64_t>(r.b));
    }
    return h;
}

double resource_scaling(double base_latency_us, int base_resources, int new_resources,
                        double serial_fraction) {
    if (base_resources <= 0 || new_resources <= 0)
        throw_error(ErrorCode::InvalidArgument, "resource_scaling: resource counts must be positive");
    if (serial_fraction < 0.0 || serial_fraction > 1.0)
        throw_error(ErrorCode::InvalidArgument, "resource_scaling: serial fraction must lie in [0, 1]");
    return base_latency_us *
           (serial_fraction + (1.0 - serial_fraction) * static_cast<double>(base_resources) /
                                  static_cast<double>(new_resources));
}

double stream_latency_us(const StreamSpec& stream, int reference_aic, double serial_fraction) {
    double total = 0.0;
    for (const Stage& stage : stream.stages) {
        if (stage.kind == StageKind::Comm)
            total += stage.base_latency_us;
        else
            total += resource_scaling(stage.base_latency_us, reference_aic, stream.aic,
                                      serial_fraction);
    }
    return total;
}

double decode_layer_latency_us(const DecodePipelineSpec& spec, bool microbatched) {
    if (!microbatched) {
        // Full-resource single stream: attention then MoE back to back.
        double total = 0.0;
        for (const StreamSpec* stream : {&spec.stream0, &spec.stream1}) {
            for (const Stage& stage : stream->stages) {
                if (stage.kind == StageKind::Comm)
                    total += stage.base_latency_us;
                else
                    total += resource_scaling(stage.base_latency_us, spec.reference_aic,
                                              spec.die_aic, spec.serial_fraction);
            }
        }
        return total;
    }
    if (spec.stream0.aic + spec.stream1.aic > spec.die_aic ||
        spec.stream0.aiv + spec.stream1.aiv > spec.die_aiv)
        throw_error(ErrorCode::Validation, "decode streams oversubscribe the die's engines");
    double s0 = stream_latency_us(spec.stream0, spec.reference_aic, spec.serial_fraction);
    double s1 = stream_latency_us(spec.stream1, spec.reference_aic, spec.serial_fraction);
    return std::max(s0, s1);  // steady state of the two interleaved microbatches
}

double prefill_layer_latency_us(const PrefillStageTable& table, bool microbatched) {
    if (table.aic.empty() && table.aiv.empty() && table.sdma.empty())
        throw_error(ErrorCode::InvalidArgument, "prefill stage table is empty");
    auto busy = [](const std::vector<Stage>& stages) {
        double total = 0.0;
        for (const Stage& s : stages) total += s.base_latency_us;
        return total;
    };
    double aic = busy(table.aic);
    double aiv = busy(table.aiv);
    double sdma = busy(table.sdma);
    if (!microbatched) return aic + aiv + sdma;
    return std::max({aic, aiv, sdma});
}

void MtpConfig::validate() const {
    if (k < 0) throw_error(ErrorCode::Validation, "mtp.k must be nonnegative");
    if (accept_prob < 0.0 || accept_prob > 1.0)
        throw_error(ErrorCode::Validation, "mtp.accept_prob must lie in [0, 1]");
    if (graph_launch_overhead_us < 0.0)
        throw_error(ErrorCode::Validation, "mtp.graph_launch_overhead must be nonnegative");
}

MtpResult simulate_mtp(const MtpConfig& cfg, double base_iter_latency_us,
                       double mtp_iter_latency_us, std::int64_t iterations, std::uint64_t seed) {
    cfg.validate();
    if (iterations < 1) throw_error(ErrorCode::InvalidArgument, "simulate_mtp: iterations must be >= 1");

    Rng rng(seed);
    std::int64_t accepted = 0;
    for (std::int64_t i = 0; i < iterations; ++i)
        for (int j = 0; j < cfg.k; ++j)
            if (rng.bernoulli(cfg.accept_prob)) ++accepted;

    MtpResult result;
    result.expected_tokens_per_iteration = cfg.expected_tokens_per_iteration();
    result.empirical_tokens_per_iteration =
        1.0 + static_cast<double>(accepted) / static_cast<double>(iterations);
    result.mtp_iteration_latency_us = mtp_iter_latency_us;
    if (!cfg.pipelined)
        result.mtp_iteration_latency_us += (cfg.k + 1) * cfg.graph_launch_overhead_us;

    double base_rate = 1.0 / base_iter_latency_us;
    result.throughput_ratio =
        (result.expected_tokens_per_iteration / result.mtp_iteration_latency_us) / base_rate;
    result.empirical_throughput_ratio =
        (result.empirical_tokens_per_iteration / result.mtp_iteration_latency_us) / base_rate;
    return result;
}

DecodeLatencyModel calibrate_decode_model(const TpotAnchor& a, const TpotAnchor& b,
                                          double tokens_per_iteration, int num_layers,
                                          double iteration_overhead_us) {
    if (a.batch == b.batch)
        throw_error(ErrorCode::InvalidArgument, "calibrate_decode_model: anchors need distinct batches");
    if (num_layers <= 0 || tokens_per_iteration <= 0.0)
        throw_error(ErrorCode::InvalidArgument, "calibrate_decode_model: bad layer/token parameters");

    // TPOT = iteration / tokens_per_iteration, iteration affine in batch.
    double it_a = a.tpot_ms * 1000.0 * tokens_per_iteration;
    double it_b = b.tpot_ms * 1000.0 * tokens_per_iteration;
    double slope = (it_a - it_b) / static_cast<double>(a.batch - b.batch);
    double intercept = it_a - slope * static_cast<double>(a.batch);

    DecodeLatencyModel model;
    model.num_layers = num_layers;
    model.iteration_overhead_us = iteration_overhead_us;
    model.per_layer_per_batch_us = slope / num_layers;
    model.per_layer_base_us = (intercept - iteration_overhead_us) / num_layers;
    if (model.per_layer_base_us < 0.0)
        throw_error(ErrorCode::Validation,
                    "calibrate_decode_model: overhead exceeds the fitted intercept");
    return model;
}

DecodeIterationResult tpot_and_throughput(std::int64_t batch, const DecodeLatencyModel& model,
                                          const MtpConfig& mtp) {
    mtp.validate();
    if (batch <= 0) throw_error(ErrorCode::InvalidArgument, "tpot_and_throughput: batch must be positive");

    DecodeIterationResult result;
    result.per_layer_latency_us = model.per_layer_us(batch);
    result.iteration_latency_us = model.iteration_us(batch);
    if (!mtp.pipelined)
        result.iteration_latency_us += (mtp.k + 1) * mtp.graph_launch_overhead_us;
    result.tokens_emitted = mtp.expected_tokens_per_iteration();
    result.tpot_ms = result.iteration_latency_us / result.tokens_emitted / 1000.0;
    result.throughput_tokens_per_s_per_die =
        static_cast<double>(batch) * result.tokens_emitted / (result.iteration_latency_us / 1e6);
    return result;
}

}  // namespace moesim
