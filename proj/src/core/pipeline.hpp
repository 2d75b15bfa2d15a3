#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"

namespace moesim {

// ---------------------------------------------------------------------------
// Deterministic discrete-event engine. Times are integer microseconds; equal
// times dequeue in scheduling order.

struct Event {
    std::int64_t time_us = 0;
    std::uint64_t sequence = 0;
    std::string kind;
    std::int64_t a = 0, b = 0;  // operation-specific payload
};

struct TraceRecord {
    std::int64_t time_us = 0;
    std::uint64_t sequence = 0;
    std::string kind;
    std::int64_t a = 0, b = 0;
};

class EventLoop {
public:
    using Handler = std::function<void(EventLoop&, const Event&)>;

    void schedule(std::int64_t time_us, const std::string& kind, std::int64_t a = 0,
                  std::int64_t b = 0);
    void set_handler(const std::string& kind, Handler handler);
    // Runs until the queue drains or `horizon_us` is passed (< 0: unbounded).
    const std::vector<TraceRecord>& run(std::int64_t horizon_us = -1);

    std::int64_t now_us() const { return now_us_; }
    const std::vector<TraceRecord>& trace() const { return trace_; }
    std::uint64_t trace_hash() const;

private:
    struct Later {
        bool operator()(const Event& a, const Event& b) const {
            if (a.time_us != b.time_us) return a.time_us > b.time_us;
            return a.sequence > b.sequence;
        }
    };

    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::vector<TraceRecord> trace_;
    std::unordered_map<std::string, Handler> handlers_;
    std::int64_t now_us_ = 0;
    std::uint64_t next_sequence_ = 0;
};

// ---------------------------------------------------------------------------
// Resource scaling: compute-bound stage latency under a different engine
// allocation, with an Amdahl-style serial floor. Communication stages do not
// scale with engine counts.
//   scaled = base * (serial_fraction + (1 - serial_fraction) * base_res / new_res)
double resource_scaling(double base_latency_us, int base_resources, int new_resources,
                        double serial_fraction = 0.1);

enum class StageKind { Compute, Comm };

struct Stage {
    std::string name;
    double base_latency_us = 0.0;  // at the reference resource allocation
    StageKind kind = StageKind::Compute;
};

struct StreamSpec {
    int aic = 0;
    int aiv = 0;
    std::vector<Stage> stages;  // base latencies at reference resources
};

struct DecodePipelineSpec {
    int reference_aic = 24;
    int reference_aiv = 48;
    int die_aic = 24;
    int die_aiv = 48;
    double serial_fraction = 0.1;
    StreamSpec stream0;  // attention path
    StreamSpec stream1;  // MoE path
};

// Sum of a stream's stage times with compute stages rescaled from the
// reference allocation to the stream's own.
double stream_latency_us(const StreamSpec& stream, int reference_aic, double serial_fraction);

// Microbatched: steady-state per-layer latency is the slower of the two
// overlapped streams at their partitioned resources. Non-microbatched: one
// stream at full die resources runs everything sequentially.
double decode_layer_latency_us(const DecodePipelineSpec& spec, bool microbatched);

struct PrefillStageTable {
    std::vector<Stage> aic;   // primary compute
    std::vector<Stage> aiv;   // auxiliary compute offloaded from the AICs
    std::vector<Stage> sdma;  // bulk transfers
};

// Microbatched: the three engine classes run concurrently on interleaved
// microbatches, so the busiest class bounds the steady state. Otherwise all
// stages serialize.
double prefill_layer_latency_us(const PrefillStageTable& table, bool microbatched);

// ---------------------------------------------------------------------------
// MTP economics.

struct MtpConfig {
    int k = 1;                      // speculative tokens per step
    double accept_prob = 0.70;
    double graph_launch_overhead_us = 700.0;  // per graph, naive mode only
    bool pipelined = true;

    void validate() const;
    double expected_tokens_per_iteration() const { return 1.0 + k * accept_prob; }
};

struct MtpResult {
    double empirical_tokens_per_iteration = 0.0;
    double expected_tokens_per_iteration = 0.0;
    double throughput_ratio = 0.0;           // expected-token basis
    double empirical_throughput_ratio = 0.0;
    double mtp_iteration_latency_us = 0.0;   // includes launch overheads in naive mode
};

MtpResult simulate_mtp(const MtpConfig& cfg, double base_iter_latency_us,
                       double mtp_iter_latency_us, std::int64_t iterations, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Decode latency model and TPOT/throughput arithmetic.

struct DecodeLatencyModel {
    int num_layers = 61;
    double per_layer_base_us = 151.93;      // affine in batch: base + slope * batch
    double per_layer_per_batch_us = 10.926;
    double iteration_overhead_us = 10730.0; // scheduler + sampling + MTP module residual

    double per_layer_us(std::int64_t batch) const {
        return per_layer_base_us + per_layer_per_batch_us * static_cast<double>(batch);
    }
    double iteration_us(std::int64_t batch) const {
        return num_layers * per_layer_us(batch) + iteration_overhead_us;
    }
};

struct TpotAnchor {
    std::int64_t batch = 0;
    double tpot_ms = 0.0;
};

// Two-point calibration: iteration latency is affine in batch size, and the
// fixed overhead is the configured residual.
DecodeLatencyModel calibrate_decode_model(const TpotAnchor& a, const TpotAnchor& b,
                                          double tokens_per_iteration, int num_layers,
                                          double iteration_overhead_us);

struct DecodeIterationResult {
    double per_layer_latency_us = 0.0;
    double iteration_latency_us = 0.0;
    double tokens_emitted = 1.0;       // expected tokens per request per iteration
    double tpot_ms = 0.0;
    double throughput_tokens_per_s_per_die = 0.0;
};

DecodeIterationResult tpot_and_throughput(std::int64_t batch, const DecodeLatencyModel& model,
                                          const MtpConfig& mtp);

}  // namespace moesim
