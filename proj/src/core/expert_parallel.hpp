#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "interconnect.hpp"

namespace moesim {

// Expert ids: [0, router_count) are router experts, kSharedExpert marks a
// shared-expert copy (served locally via DP replication, excluded from
// all-to-all accounting).
inline constexpr int kSharedExpert = -1;

struct ExpertPlacement {
    int ep_degree = 0;       // rank_num
    int experts_per_die = 0;
    int shared_copies = 0;
    int router_count = 0;
    int redundant_count = 0;
    std::vector<std::vector<int>> assignment;      // rank -> expert ids
    std::map<int, std::vector<int>> replica_ranks; // router expert -> hosting ranks

    int replica_count(int expert) const {
        auto it = replica_ranks.find(expert);
        return it == replica_ranks.end() ? 0 : static_cast<int>(it->second.size());
    }
};

// Deterministic layout: shared copies stride-distributed, router experts
// round-robin over the remaining slots, redundant replicas duplicating the
// lowest-id (initially uniformly loaded) experts.
ExpertPlacement build_placement(int ep_degree, int shared_copies, int router_count,
                                int redundant_count);

inline constexpr std::int64_t kDispatchMsgBytes = 7680;   // 7 KB INT8 payload + 512 B scale slot
inline constexpr std::int64_t kCombineMsgBytes = 14336;   // 14 KB unquantized combine

struct BufferPlan {
    int rank_num = 0;
    std::int64_t max_tokens = 0;  // local_batch * min(topK, experts_per_die)
    std::int64_t dispatch_msg_size = kDispatchMsgBytes;
    std::int64_t combine_msg_size = kCombineMsgBytes;
    std::int64_t dispatch_buffer_bytes = 0;  // rank_num * max_tokens * msg_size
    std::int64_t combine_buffer_bytes = 0;
    bool double_buffered = true;

    std::int64_t total_bytes() const { return dispatch_buffer_bytes + combine_buffer_bytes; }
};

BufferPlan plan_buffers(int rank_num, std::int64_t local_batch, int top_k, int experts_per_die,
                        std::int64_t dispatch_msg_size = kDispatchMsgBytes,
                        std::int64_t combine_msg_size = kCombineMsgBytes);

struct TokenRoute {
    int source_rank = 0;
    std::vector<int> experts;  // topK distinct router experts
    std::vector<int> ranks;    // chosen replica rank per expert
    std::vector<double> weights;
};

struct RoutingBatch {
    int top_k = 0;
    std::int64_t tokens_per_rank = 0;  // local_batch
    std::vector<TokenRoute> routes;
    std::vector<std::int64_t> rank_arrivals;  // tokens received per rank
};

// Top-K selection with ties broken toward the lower expert id; replicated
// experts take arrivals round-robin per source rank.
RoutingBatch route_tokens(const std::vector<std::vector<double>>& gate_scores,
                          const ExpertPlacement& placement, int top_k,
                          std::int64_t tokens_per_rank = 0);

struct PipelineStageTimes {
    double copy_us_per_token = 0.02;      // stage 1: local UBuffer copy
    double quantize_us_per_token = 0.03;  // stage 2: offset compute + INT8 quantize
    double write_us_per_token = 0.04;     // stage 3: remote write issue
};

struct DispatchStats {
    std::int64_t tokens_sent = 0;          // total expert messages (== tokens * topK)
    std::int64_t remote_bytes = 0;
    std::vector<std::int64_t> per_rank_received;
    std::vector<std::int64_t> per_token_contributions;  // must reach topK in combine
    std::vector<double> per_rank_latency_us;
    double max_latency_us = 0.0;
};

// Pre-allocated double buffers; dispatch and combine must never write the
// same one. Writes are byte-accounted so aliasing is detectable.
class DoubleBuffer {
public:
    explicit DoubleBuffer(const BufferPlan& plan) : plan_(plan) {}

    void begin_dispatch();
    void begin_combine();
    void write_dispatch(int rank, std::int64_t bytes);
    void write_combine(int rank, std::int64_t bytes);
    void end_dispatch();
    void end_combine();

private:
    BufferPlan plan_;
    bool dispatch_active_ = false;
    bool combine_active_ = false;
    std::int64_t dispatch_bytes_ = 0;
    std::int64_t combine_bytes_ = 0;
};

// Three-stage data-sending pipeline + fused all-to-all cost over the plane.
// Per-peer token counts above plan.max_tokens signal an Eq.2 violation.
DispatchStats simulate_dispatch(const RoutingBatch& batch, const BufferPlan& plan,
                                const PlaneSpec& plane, DoubleBuffer* buffers = nullptr,
                                const PipelineStageTimes& stages = {});

struct CombineResult {
    std::vector<std::int64_t> per_rank_outputs;  // == original local batch per rank
    std::vector<double> per_rank_latency_us;
    double max_latency_us = 0.0;
};

CombineResult simulate_combine(const RoutingBatch& batch, const DispatchStats& stats,
                               const BufferPlan& plan, const PlaneSpec& plane,
                               DoubleBuffer* buffers = nullptr,
                               const PipelineStageTimes& stages = {});

// Greedy EPLB: repeatedly duplicate the expert with the highest per-replica
// load (ties toward the lower expert id). Returns expert -> replica count
// (>= 1 for every expert present in the histogram).
std::map<int, int> eplb_rebalance(const std::map<int, double>& load_histogram,
                                  int redundant_count);

double max_effective_load(const std::map<int, double>& load_histogram,
                          const std::map<int, int>& replicas);

}  // namespace moesim
