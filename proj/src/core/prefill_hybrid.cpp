#include "prefill_hybrid.hpp"

#include <algorithm>
#include <cmath>

namespace moesim {

std::int64_t PackedBatch::total_tokens() const {
    std::int64_t total = 0;
    for (auto count : rank_token_counts) total += count;
    return total;
}

PackedBatch pack_sequences(const std::vector<std::pair<std::int64_t, std::int64_t>>& requests,
                           int num_ranks) {
    if (requests.empty()) throw_error(ErrorCode::InvalidArgument, "pack_sequences: no requests");
    if (num_ranks < 1) throw_error(ErrorCode::InvalidArgument, "pack_sequences: num_ranks must be >= 1");
    for (const auto& [id, len] : requests)
        if (len <= 0) throw_error(ErrorCode::Validation, "pack_sequences: prompt lengths must be positive");

    PackedBatch packed;
    packed.requests = requests;
    packed.rank_token_counts.assign(static_cast<std::size_t>(num_ranks), 0);
    packed.segment_map.resize(static_cast<std::size_t>(num_ranks));

    std::int64_t total = 0;
    for (const auto& [id, len] : requests) total += len;
    std::int64_t base = total / num_ranks;
    std::int64_t remainder = total % num_ranks;

    // Walk the packed super-sequence, cutting contiguous per-rank slices.
    std::size_t req = 0;
    std::int64_t offset = 0;  // inside requests[req]
    for (int rank = 0; rank < num_ranks; ++rank) {
        std::int64_t want = base + (rank < remainder ? 1 : 0);
        packed.rank_token_counts[static_cast<std::size_t>(rank)] = want;
        while (want > 0 && req < requests.size()) {
            std::int64_t available = requests[req].second - offset;
            std::int64_t take = std::min(want, available);
            packed.segment_map[static_cast<std::size_t>(rank)].push_back(
                {requests[req].first, offset, offset + take});
            want -= take;
            offset += take;
            if (offset == requests[req].second) {
                ++req;
                offset = 0;
            }
        }
    }
    return packed;
}

ImbalanceReport compare_dp_vs_hybrid(
    const std::vector<std::pair<std::int64_t, std::int64_t>>& requests, int num_ranks) {
    ImbalanceReport report;
    if (requests.empty() || num_ranks < 1) return report;

    // Pure DP: whole requests land on ranks (round-robin past num_ranks).
    std::vector<std::int64_t> dp_load(static_cast<std::size_t>(num_ranks), 0);
    for (std::size_t i = 0; i < requests.size(); ++i)
        dp_load[i % static_cast<std::size_t>(num_ranks)] += requests[i].second;
    std::int64_t total = 0, dp_max = 0;
    for (auto load : dp_load) {
        total += load;
        dp_max = std::max(dp_max, load);
    }
    double mean = static_cast<double>(total) / num_ranks;
    report.dp_imbalance = mean > 0.0 ? static_cast<double>(dp_max) / mean : 0.0;
    report.dp_idle_ranks = static_cast<int>(std::count(dp_load.begin(), dp_load.end(), 0));

    PackedBatch packed = pack_sequences(requests, num_ranks);
    std::int64_t hybrid_max = 0;
    for (auto count : packed.rank_token_counts) hybrid_max = std::max(hybrid_max, count);
    report.hybrid_imbalance = mean > 0.0 ? static_cast<double>(hybrid_max) / mean : 0.0;
    return report;
}

std::vector<int> PdConnection::per_prefill_rank_load() const {
    std::vector<int> load(static_cast<std::size_t>(prefill_tp_size), 0);
    for (int rank : mapping) load[static_cast<std::size_t>(rank)]++;
    return load;
}

StagePlan plan_mla_stages(const PackedBatch& packed, int tp_degree, int hidden_dim, int num_heads,
                          const PlaneSpec& plane, const MlaWidths& widths) {
    if (tp_degree < 1) throw_error(ErrorCode::InvalidArgument, "plan_mla_stages: tp_degree must be >= 1");
    if (tp_degree > num_heads)
        throw_error(ErrorCode::Validation, "plan_mla_stages: tp_degree exceeds head count");
    if (hidden_dim <= 0) throw_error(ErrorCode::Validation, "plan_mla_stages: hidden_dim must be positive");

    StagePlan plan;
    plan.tp_degree = tp_degree;
    int base = num_heads / tp_degree;
    int extra = num_heads % tp_degree;
    for (int r = 0; r < tp_degree; ++r)
        plan.heads_per_rank.push_back(base + (r < extra ? 1 : 0));

    if (tp_degree == 1) return plan;  // layouts coincide; collectives are skipped

    std::int64_t tokens = packed.total_tokens();
    std::int64_t per_rank_tokens = (tokens + tp_degree - 1) / tp_degree;
    // Stage 1 -> 2: gather every rank's reduced-width segment everywhere.
    plan.all_gather_bytes_per_rank =
        per_rank_tokens * widths.reduced_width * widths.bytes_per_element;
    // Stage 2 -> 3: re-shard the head-parallel attention output.
    int max_heads = *std::max_element(plan.heads_per_rank.begin(), plan.heads_per_rank.end());
    plan.all_to_all_bytes_per_rank = tokens * static_cast<std::int64_t>(max_heads) *
                                     widths.head_dim * widths.bytes_per_element;

    plan.all_gather_latency_us =
        estimate_collective(CollectiveKind::ALL_GATHER, tp_degree, plan.all_gather_bytes_per_rank,
                            plane)
            .latency_us;
    plan.all_to_all_latency_us =
        estimate_collective(CollectiveKind::ALL_TO_ALL, tp_degree, plan.all_to_all_bytes_per_rank,
                            plane)
            .latency_us;
    plan.collective_latency_us = plan.all_gather_latency_us + plan.all_to_all_latency_us;
    return plan;
}

PdConnection map_connections(int prefill_tp_size, int decode_tp_size, int decode_dp_size) {
    if (prefill_tp_size <= 0 || decode_tp_size <= 0 || decode_dp_size <= 0)
        throw_error(ErrorCode::Validation, "map_connections: sizes must be positive");
    if (prefill_tp_size % decode_tp_size != 0)
        throw_error(ErrorCode::Validation,
                    "map_connections: prefill_tp_size (" + std::to_string(prefill_tp_size) +
                        ") must be divisible by decode_tp_size (" + std::to_string(decode_tp_size) +
                        ")");
    int ratio = prefill_tp_size / decode_tp_size;
    if (decode_dp_size % ratio != 0)
        throw_error(ErrorCode::Validation,
                    "map_connections: decode_dp_size (" + std::to_string(decode_dp_size) +
                        ") must be divisible by ratio (" + std::to_string(ratio) + ")");

    PdConnection conn;
    conn.prefill_tp_size = prefill_tp_size;
    conn.decode_tp_size = decode_tp_size;
    conn.decode_dp_size = decode_dp_size;
    conn.ratio = ratio;
    conn.group_size = decode_dp_size / ratio;
    conn.mapping.resize(static_cast<std::size_t>(decode_dp_size * decode_tp_size));
    for (int dp = 0; dp < decode_dp_size; ++dp) {
        int group_id = dp / conn.group_size;
        for (int tp = 0; tp < decode_tp_size; ++tp) {
            conn.mapping[static_cast<std::size_t>(dp * decode_tp_size + tp)] =
                group_id * decode_tp_size + tp;
        }
    }
    return conn;
}

KvTransferPlan schedule_kv_transfer(EventLoop& loop, PlaneLedger& ledger, std::int64_t request_id,
                                    std::int64_t kv_bytes, const PlaneSpec& rdma_plane,
                                    std::int64_t ready_time_us) {
    if (kv_bytes < 0) throw_error(ErrorCode::InvalidArgument, "schedule_kv_transfer: negative KV size");

    KvTransferPlan plan;
    plan.bytes = kv_bytes;
    plan.latency_us = rdma_plane.sdma_startup_us + rdma_plane.base_latency_inter_us +
                      static_cast<double>(kv_bytes) / bytes_per_us(rdma_plane.link_bandwidth_gbps);
    plan.start_us = ready_time_us;
    plan.complete_us = ready_time_us + static_cast<std::int64_t>(std::llround(plan.latency_us));

    // Step order: (i) destination buffer allocation, (ii) prefill dispatch,
    // (iii) RDMA copy start/finish. All bytes stay on the RDMA plane.
    loop.schedule(ready_time_us, "kv_buffer_alloc", request_id, kv_bytes);
    loop.schedule(ready_time_us, "kv_prefill_dispatch", request_id);
    loop.schedule(ready_time_us, "kv_transfer_start", request_id, kv_bytes);
    loop.schedule(plan.complete_us, "kv_transfer_done", request_id, kv_bytes);
    ledger.rdma_bytes += kv_bytes;
    return plan;
}

}  // namespace moesim
