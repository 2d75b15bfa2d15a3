#pragma once

#include <cstdint>
#include <vector>

#include "interconnect.hpp"
#include "pipeline.hpp"

namespace moesim {

struct Segment {
    std::int64_t request_id = 0;
    std::int64_t token_begin = 0;  // range within the request's prompt
    std::int64_t token_end = 0;
};

struct PackedBatch {
    std::vector<std::pair<std::int64_t, std::int64_t>> requests;  // (id, prompt_len)
    std::vector<std::int64_t> rank_token_counts;
    std::vector<std::vector<Segment>> segment_map;  // per rank

    std::int64_t total_tokens() const;
};

// Sequence packing: concatenate prompts and hand out contiguous segments so
// per-rank token counts differ by at most one. Request order is preserved.
PackedBatch pack_sequences(const std::vector<std::pair<std::int64_t, std::int64_t>>& requests,
                           int num_ranks);

struct ImbalanceReport {
    double dp_imbalance = 0.0;      // max/mean per-rank load under one-request-per-rank DP
    double hybrid_imbalance = 0.0;  // max/mean per-rank tokens after packing
    int dp_idle_ranks = 0;          // DP ranks left without work (requests < ranks)
};

ImbalanceReport compare_dp_vs_hybrid(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& requests, int num_ranks);

struct StagePlan {
    int tp_degree = 0;
    std::vector<int> heads_per_rank;       // differ by at most one
    std::int64_t all_gather_bytes_per_rank = 0;
    std::int64_t all_to_all_bytes_per_rank = 0;
    double all_gather_latency_us = 0.0;
    double all_to_all_latency_us = 0.0;
    double collective_latency_us = 0.0;
};

struct MlaWidths {
    int reduced_width = 2112;  // post-down-projection width (latent + rope)
    int head_dim = 128;
    int bytes_per_element = 2;
};

// SP -> TP -> SP staging: an all-gather redistributes the reduced activations
// for the head-parallel stage, an all-to-all re-shards back to sequence
// parallelism. tp_degree == 1 needs no redistribution.
StagePlan plan_mla_stages(const PackedBatch& packed, int tp_degree, int hidden_dim, int num_heads,
                          const PlaneSpec& plane, const MlaWidths& widths = {});

struct PdConnection {
    int prefill_tp_size = 0;
    int decode_tp_size = 0;
    int decode_dp_size = 0;
    int ratio = 0;       // prefill_tp / decode_tp
    int group_size = 0;  // decode_dp / ratio
    // mapping[dp_rank * decode_tp_size + tp_rank] -> prefill tp rank
    std::vector<int> mapping;

    int lookup(int decode_dp_rank, int decode_tp_rank) const {
        return mapping[static_cast<std::size_t>(decode_dp_rank * decode_tp_size + decode_tp_rank)];
    }
    std::vector<int> per_prefill_rank_load() const;
};

// Deterministic group connection:
//   group_id = floor(decode_dp_rank / group_size)
//   prefill_tp_rank = group_id * decode_tp_size + decode_tp_rank
// Non-divisible configurations are rejected, naming the violated constraint.
PdConnection map_connections(int prefill_tp_size, int decode_tp_size, int decode_dp_size);

struct KvTransferPlan {
    std::int64_t bytes = 0;
    double latency_us = 0.0;
    std::int64_t start_us = 0;
    std::int64_t complete_us = 0;
};

// Byte ledger per network plane; KV handoff must account zero UB bytes.
struct PlaneLedger {
    std::int64_t ub_bytes = 0;
    std::int64_t rdma_bytes = 0;
    std::int64_t vpc_bytes = 0;
};

// Emits the three-step transfer (buffer allocation, prefill dispatch, RDMA
// copy) into the engine. The transfer is asynchronous: nothing here extends
// decode-side events.
KvTransferPlan schedule_kv_transfer(EventLoop& loop, PlaneLedger& ledger, std::int64_t request_id,
                                    std::int64_t kv_bytes, const PlaneSpec& rdma_plane,
                                    std::int64_t ready_time_us);

}  // namespace moesim
