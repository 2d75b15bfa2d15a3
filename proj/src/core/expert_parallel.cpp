#include "expert_parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace moesim {

ExpertPlacement build_placement(int ep_degree, int shared_copies, int router_count,
                                int redundant_count) {
    if (ep_degree <= 0 || router_count <= 0 || shared_copies < 0 || redundant_count < 0)
        throw_error(ErrorCode::Validation, "build_placement: counts must be nonnegative, ep/router positive");
    int total = shared_copies + router_count + redundant_count;
    if (total % ep_degree != 0)
        throw_error(ErrorCode::Validation,
                    "build_placement: shared + router + redundant (" + std::to_string(total) +
                        ") must fill ep_degree * experts_per_die exactly");
    int experts_per_die = total / ep_degree;

    ExpertPlacement placement;
    placement.ep_degree = ep_degree;
    placement.experts_per_die = experts_per_die;
    placement.shared_copies = shared_copies;
    placement.router_count = router_count;
    placement.redundant_count = redundant_count;
    placement.assignment.resize(static_cast<std::size_t>(ep_degree));

    // Shared copies first, stride-distributed across ranks.
    if (shared_copies > 0) {
        if (shared_copies > ep_degree)
            throw_error(ErrorCode::Validation, "build_placement: more shared copies than ranks");
        int stride = ep_degree / shared_copies;
        for (int i = 0; i < shared_copies; ++i)
            placement.assignment[static_cast<std::size_t>(i * stride)].push_back(kSharedExpert);
    }

    // Router experts round-robin over ranks with free slots.
    auto free_slots = [&](int rank) {
        return experts_per_die - static_cast<int>(placement.assignment[static_cast<std::size_t>(rank)].size());
    };
    int rank = 0;
    for (int e = 0; e < router_count; ++e) {
        while (free_slots(rank) == 0) rank = (rank + 1) % ep_degree;
        placement.assignment[static_cast<std::size_t>(rank)].push_back(e);
        placement.replica_ranks[e].push_back(rank);
        rank = (rank + 1) % ep_degree;
    }

    // Redundant replicas duplicate the most-loaded experts; at build time the
    // load is uniform, so the tie rule picks experts 0..redundant-1.
    for (int r = 0; r < redundant_count; ++r) {
        int expert = r % router_count;
        while (free_slots(rank) == 0) rank = (rank + 1) % ep_degree;
        placement.assignment[static_cast<std::size_t>(rank)].push_back(expert);
        placement.replica_ranks[expert].push_back(rank);
        rank = (rank + 1) % ep_degree;
    }

    for (int i = 0; i < ep_degree; ++i) {
        if (static_cast<int>(placement.assignment[static_cast<std::size_t>(i)].size()) != experts_per_die)
            throw_error(ErrorCode::Internal, "build_placement: uneven rank fill");
    }
    return placement;
}

BufferPlan plan_buffers(int rank_num, std::int64_t local_batch, int top_k, int experts_per_die,
                        std::int64_t dispatch_msg_size, std::int64_t combine_msg_size) {
    if (rank_num <= 0 || top_k <= 0 || experts_per_die <= 0)
        throw_error(ErrorCode::Validation, "plan_buffers: counts must be positive");
    if (local_batch < 0)
        throw_error(ErrorCode::Validation, "plan_buffers: local_batch must be nonnegative");

    BufferPlan plan;
    plan.rank_num = rank_num;
    plan.dispatch_msg_size = dispatch_msg_size;
    plan.combine_msg_size = combine_msg_size;
    plan.max_tokens = local_batch * std::min<std::int64_t>(top_k, experts_per_die);
    plan.dispatch_buffer_bytes = static_cast<std::int64_t>(rank_num) * plan.max_tokens * dispatch_msg_size;
    plan.combine_buffer_bytes = static_cast<std::int64_t>(rank_num) * plan.max_tokens * combine_msg_size;
    return plan;
}

RoutingBatch route_tokens(const std::vector<std::vector<double>>& gate_scores,
                          const ExpertPlacement& placement, int top_k,
                          std::int64_t tokens_per_rank) {
    if (top_k > placement.router_count)
        throw_error(ErrorCode::Validation, "route_tokens: topK exceeds router expert count");
    for (const auto& row : gate_scores)
        if (static_cast<int>(row.size()) != placement.router_count)
            throw_error(ErrorCode::Validation, "route_tokens: gate score row width != router count");

    RoutingBatch batch;
    batch.top_k = top_k;
    batch.tokens_per_rank =
        tokens_per_rank > 0
            ? tokens_per_rank
            : (static_cast<std::int64_t>(gate_scores.size()) + placement.ep_degree - 1) /
                  placement.ep_degree;
    batch.rank_arrivals.assign(static_cast<std::size_t>(placement.ep_degree), 0);

    // Round-robin replica cursor per (source rank, expert).
    std::map<std::pair<int, int>, int> cursors;

    std::vector<int> order(static_cast<std::size_t>(placement.router_count));
    for (std::size_t t = 0; t < gate_scores.size(); ++t) {
        const auto& scores = gate_scores[t];
        std::iota(order.begin(), order.end(), 0);
        std::partial_sort(order.begin(), order.begin() + top_k, order.end(),
                          [&](int a, int b) {
                              if (scores[static_cast<std::size_t>(a)] != scores[static_cast<std::size_t>(b)])
                                  return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
                              return a < b;  // tie rule: lower expert id wins
                          });

        TokenRoute route;
        route.source_rank = static_cast<int>(t / static_cast<std::size_t>(batch.tokens_per_rank)) %
                            placement.ep_degree;
        for (int k = 0; k < top_k; ++k) {
            int expert = order[static_cast<std::size_t>(k)];
            const auto& ranks = placement.replica_ranks.at(expert);
            auto& cursor = cursors[{route.source_rank, expert}];
            int target = ranks[static_cast<std::size_t>(cursor % static_cast<int>(ranks.size()))];
            cursor++;
            route.experts.push_back(expert);
            route.ranks.push_back(target);
            route.weights.push_back(std::max(0.0, scores[static_cast<std::size_t>(expert)]));
            batch.rank_arrivals[static_cast<std::size_t>(target)]++;
        }
        batch.routes.push_back(std::move(route));
    }
    return batch;
}

void DoubleBuffer::begin_dispatch() {
    if (dispatch_active_) throw_error(ErrorCode::Internal, "dispatch buffer already active");
    dispatch_active_ = true;
    dispatch_bytes_ = 0;
}

void DoubleBuffer::begin_combine() {
    if (combine_active_) throw_error(ErrorCode::Internal, "combine buffer already active");
    combine_active_ = true;
    combine_bytes_ = 0;
}

void DoubleBuffer::write_dispatch(int, std::int64_t bytes) {
    if (!dispatch_active_) throw_error(ErrorCode::Internal, "write outside dispatch window");
    dispatch_bytes_ += bytes;
    if (dispatch_bytes_ > plan_.dispatch_buffer_bytes * plan_.rank_num)
        throw_error(ErrorCode::Capacity, "dispatch buffer aliased or overflowed");
}

void DoubleBuffer::write_combine(int, std::int64_t bytes) {
    if (!combine_active_) throw_error(ErrorCode::Internal, "write outside combine window");
    combine_bytes_ += bytes;
    if (combine_bytes_ > plan_.combine_buffer_bytes * plan_.rank_num)
        throw_error(ErrorCode::Capacity, "combine buffer aliased or overflowed");
}

void DoubleBuffer::end_dispatch() { dispatch_active_ = false; }
void DoubleBuffer::end_combine() { combine_active_ = false; }

namespace {

double pipeline_time_us(std::int64_t tokens, const PipelineStageTimes& stages) {
    if (tokens <= 0) return 0.0;
    // Software pipeline: fill with one pass through all stages, then the
    // slowest stage bounds the steady state.
    double fill = stages.copy_us_per_token + stages.quantize_us_per_token + stages.write_us_per_token;
    double bottleneck =
        std::max({stages.copy_us_per_token, stages.quantize_us_per_token, stages.write_us_per_token});
    return fill + bottleneck * static_cast<double>(tokens - 1);
}

double barrier_flag_us(const PlaneSpec& plane, int ranks) {
    return plane.aiv_direct_startup_us * std::log2(std::max(1.0, static_cast<double>(ranks)));
}

}  // namespace

DispatchStats simulate_dispatch(const RoutingBatch& batch, const BufferPlan& plan,
                                const PlaneSpec& plane, DoubleBuffer* buffers,
                                const PipelineStageTimes& stages) {
    int ranks = plan.rank_num;
    DispatchStats stats;
    stats.per_rank_received.assign(static_cast<std::size_t>(ranks), 0);
    stats.per_token_contributions.assign(batch.routes.size(), 0);

    // Per (src, dst) message counts; Eq.2 bounds each cell.
    std::vector<std::int64_t> matrix(static_cast<std::size_t>(ranks) * static_cast<std::size_t>(ranks), 0);
    for (std::size_t t = 0; t < batch.routes.size(); ++t) {
        const TokenRoute& route = batch.routes[t];
        for (int target : route.ranks) {
            matrix[static_cast<std::size_t>(route.source_rank) * static_cast<std::size_t>(ranks) +
                   static_cast<std::size_t>(target)]++;
            stats.per_rank_received[static_cast<std::size_t>(target)]++;
            stats.per_token_contributions[t]++;
            stats.tokens_sent++;
        }
    }
    for (int src = 0; src < ranks; ++src) {
        for (int dst = 0; dst < ranks; ++dst) {
            std::int64_t count = matrix[static_cast<std::size_t>(src) * static_cast<std::size_t>(ranks) +
                                        static_cast<std::size_t>(dst)];
            if (count > plan.max_tokens)
                throw_error(ErrorCode::Capacity,
                            "dispatch buffer overflow: rank " + std::to_string(src) + " sends " +
                                std::to_string(count) + " tokens to rank " + std::to_string(dst) +
                                " (max_tokens " + std::to_string(plan.max_tokens) + ")");
        }
    }

    if (buffers != nullptr) buffers->begin_dispatch();
    stats.per_rank_latency_us.assign(static_cast<std::size_t>(ranks), 0.0);
    for (int src = 0; src < ranks; ++src) {
        std::int64_t sent = 0;
        std::int64_t remote = 0;
        for (int dst = 0; dst < ranks; ++dst) {
            std::int64_t count = matrix[static_cast<std::size_t>(src) * static_cast<std::size_t>(ranks) +
                                        static_cast<std::size_t>(dst)];
            sent += count;
            if (dst != src) remote += count;
            if (buffers != nullptr && count > 0)
                buffers->write_dispatch(dst, count * plan.dispatch_msg_size);
        }
        stats.remote_bytes += remote * plan.dispatch_msg_size;
        // The pipeline overlaps the writes it issues; the slower of the two
        // bounds the send phase. The fused-op law covers the flag exchange for
        // nonempty sends; an empty rank still pays the barrier.
        double comm = sent > 0 ? fused_ep_latency_us(plane, ranks, sent * plan.dispatch_msg_size)
                               : barrier_flag_us(plane, ranks);
        double lat = std::max(pipeline_time_us(sent, stages), comm);
        stats.per_rank_latency_us[static_cast<std::size_t>(src)] = lat;
        stats.max_latency_us = std::max(stats.max_latency_us, lat);
    }
    if (buffers != nullptr) buffers->end_dispatch();
    return stats;
}

CombineResult simulate_combine(const RoutingBatch& batch, const DispatchStats& stats,
                               const BufferPlan& plan, const PlaneSpec& plane,
                               DoubleBuffer* buffers, const PipelineStageTimes& stages) {
    int ranks = plan.rank_num;
    if (static_cast<int>(stats.per_rank_received.size()) != ranks)
        throw_error(ErrorCode::InvalidArgument, "simulate_combine: stats do not match plan");
    for (std::size_t t = 0; t < stats.per_token_contributions.size(); ++t) {
        if (stats.per_token_contributions[t] != batch.top_k)
            throw_error(ErrorCode::Validation,
                        "combine: token " + std::to_string(t) + " has " +
                            std::to_string(stats.per_token_contributions[t]) +
                            " contributions, expected topK=" + std::to_string(batch.top_k));
    }

    CombineResult result;
    result.per_rank_outputs.assign(static_cast<std::size_t>(ranks), 0);
    result.per_rank_latency_us.assign(static_cast<std::size_t>(ranks), 0.0);

    // Expert ranks send FFN results back to each token's source rank.
    std::vector<std::int64_t> returns(static_cast<std::size_t>(ranks) * static_cast<std::size_t>(ranks), 0);
    for (const TokenRoute& route : batch.routes) {
        result.per_rank_outputs[static_cast<std::size_t>(route.source_rank)]++;
        for (int target : route.ranks)
            returns[static_cast<std::size_t>(target) * static_cast<std::size_t>(ranks) +
                    static_cast<std::size_t>(route.source_rank)]++;
    }

    if (buffers != nullptr) buffers->begin_combine();
    for (int src = 0; src < ranks; ++src) {
        std::int64_t sent = 0;
        for (int dst = 0; dst < ranks; ++dst) {
            std::int64_t count = returns[static_cast<std::size_t>(src) * static_cast<std::size_t>(ranks) +
                                         static_cast<std::size_t>(dst)];
            sent += count;
            if (buffers != nullptr && count > 0)
                buffers->write_combine(dst, count * plan.combine_msg_size);
        }
        double comm = sent > 0 ? fused_ep_latency_us(plane, ranks, sent * plan.combine_msg_size)
                               : barrier_flag_us(plane, ranks);
        double lat = std::max(pipeline_time_us(sent, stages), comm);
        result.per_rank_latency_us[static_cast<std::size_t>(src)] = lat;
        result.max_latency_us = std::max(result.max_latency_us, lat);
    }
    if (buffers != nullptr) buffers->end_combine();
    return result;
}

std::map<int, int> eplb_rebalance(const std::map<int, double>& load_histogram,
                                  int redundant_count) {
    if (redundant_count < 0)
        throw_error(ErrorCode::InvalidArgument, "eplb_rebalance: negative redundant count");
    std::map<int, int> replicas;
    if (load_histogram.empty() || redundant_count == 0) return replicas;
    for (const auto& [expert, load] : load_histogram) replicas[expert] = 1;
    for (int r = 0; r < redundant_count; ++r) {
        int best = -1;
        double best_load = -1.0;
        for (const auto& [expert, load] : load_histogram) {
            double effective = load / static_cast<double>(replicas[expert]);
            if (effective > best_load) {  // ties keep the lowest expert id
                best_load = effective;
                best = expert;
            }
        }
        replicas[best]++;
    }
    return replicas;
}

double max_effective_load(const std::map<int, double>& load_histogram,
                          const std::map<int, int>& replicas) {
    double worst = 0.0;
    for (const auto& [expert, load] : load_histogram) {
        auto it = replicas.find(expert);
        int count = it == replicas.end() ? 1 : it->second;
        worst = std::max(worst, load / static_cast<double>(count));
    }
    return worst;
}

}  // namespace moesim
