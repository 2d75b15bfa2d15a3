#include "model_cache.hpp"

#include <algorithm>
#include <map>

#include "rng.hpp"

namespace moesim {

ModelBlockSet ModelBlockSet::make(const std::string& model_id, int version,
                                  std::int64_t total_bytes, std::int64_t block_size_bytes) {
    if (total_bytes <= 0 || block_size_bytes <= 0)
        throw_error(ErrorCode::Validation, "model block set sizes must be positive");
    ModelBlockSet set;
    set.model_id = model_id;
    set.version = version;
    set.total_bytes = total_bytes;
    set.block_size_bytes = block_size_bytes;
    std::int64_t num_blocks = (total_bytes + block_size_bytes - 1) / block_size_bytes;
    std::uint64_t base = hash_bytes(model_id, static_cast<std::uint64_t>(version));
    set.block_keys.reserve(static_cast<std::size_t>(num_blocks));
    for (std::int64_t i = 0; i < num_blocks; ++i)
        set.block_keys.push_back(hash_combine(base, static_cast<std::uint64_t>(i)));
    return set;
}

std::int64_t ModelBlockSet::block_bytes(std::size_t index) const {
    auto num_blocks = block_keys.size();
    if (index + 1 < num_blocks) return block_size_bytes;
    std::int64_t tail = total_bytes - static_cast<std::int64_t>(num_blocks - 1) * block_size_bytes;
    return tail > 0 ? tail : block_size_bytes;
}

void LoadScenario::validate() const {
    if (num_instances <= 0) throw_error(ErrorCode::Validation, "num_instances must be positive");
    if (obs_bandwidth_gbps <= 0.0) throw_error(ErrorCode::Validation, "obs_bandwidth must be positive");
    if (obs_efficiency <= 0.0 || obs_efficiency > 1.0)
        throw_error(ErrorCode::Validation, "obs_efficiency must lie in (0, 1]");
    if (num_active_models <= 0)
        throw_error(ErrorCode::Validation, "num_active_models must be positive");
}

double cold_start_latency_s(const LoadScenario& s, const ModelBlockSet& m) {
    s.validate();
    double effective = s.obs_bandwidth_gbps * s.obs_efficiency;  // GB/s
    double gb = static_cast<double>(m.total_bytes) / 1e9;
    switch (s.strategy) {
        case LoadStrategy::NO_CACHE:
        case LoadStrategy::LOCAL_DRAM:
            // Every instance pulls the full model through the shared bucket.
            return gb / (effective / static_cast<double>(s.num_instances));
        case LoadStrategy::EMS_POOL:
            return gb / effective;  // one shared fetch
    }
    return 0.0;
}

double avg_switch_latency_s(double hit_rate, double warm_s, double miss_s) {
    if (hit_rate < 0.0 || hit_rate > 1.0)
        throw_error(ErrorCode::InvalidArgument, "hit_rate must lie in [0, 1]");
    return hit_rate * warm_s + (1.0 - hit_rate) * miss_s;
}

double dram_overhead_x(LoadStrategy strategy, int num_instances) {
    switch (strategy) {
        case LoadStrategy::NO_CACHE: return 0.0;
        case LoadStrategy::LOCAL_DRAM: return static_cast<double>(num_instances);
        case LoadStrategy::EMS_POOL: return 1.0;
    }
    return 0.0;
}

double switch_hit_rate(LoadStrategy strategy, int num_active_models, int ems_capacity_models) {
    if (num_active_models < 1)
        throw_error(ErrorCode::InvalidArgument, "num_active_models must be >= 1");
    switch (strategy) {
        case LoadStrategy::NO_CACHE: return 0.0;
        case LoadStrategy::LOCAL_DRAM: return 1.0 / static_cast<double>(num_active_models);
        case LoadStrategy::EMS_POOL:
            return ems_capacity_models >= num_active_models
                       ? 1.0
                       : static_cast<double>(ems_capacity_models) /
                             static_cast<double>(num_active_models);
    }
    return 0.0;
}

LoadTimeline prefetch_and_load(MemoryPool& pool, std::int64_t ns, const ModelBlockSet& model,
                               int target_dies, const PrefetchParams& params) {
    if (model.block_keys.empty())
        throw_error(ErrorCode::InvalidArgument, "model version has no registered blocks");
    if (target_dies <= 0) throw_error(ErrorCode::InvalidArgument, "target_dies must be positive");

    LoadTimeline timeline;
    timeline.source_tier = Tier::DRAM;

    std::map<int, std::int64_t> per_server;
    for (std::size_t i = 0; i < model.block_keys.size(); ++i) {
        std::uint64_t key = model.block_keys[i];
        std::int64_t bytes = model.block_bytes(i);
        if (!pool.contains(ns, key)) pool.put(ns, key, bytes);
        GetResult got = pool.get(ns, key);
        if (!got.found)
            throw_error(ErrorCode::Internal, "model block lost during prefetch");
        if (got.tier == Tier::SSD) timeline.source_tier = Tier::SSD;
        per_server[pool.owner_of(key)] += bytes;
    }
    timeline.bytes_per_server.assign(per_server.begin(), per_server.end());

    double per_server_bw = timeline.source_tier == Tier::DRAM
                               ? params.dram_tier_bw_per_server_gbps
                               : params.ssd_tier_bw_per_server_gbps;
    double source_bw = 0.0;
    for (const auto& [id, bytes] : per_server) source_bw += per_server_bw;
    timeline.aggregate_source_bandwidth_gbps = source_bw;
    timeline.ingest_bandwidth_gbps = params.ingest_bandwidth_gbps;

    double total_gb = static_cast<double>(model.total_bytes) / 1e9;
    double rate = std::min(source_bw, params.ingest_bandwidth_gbps);
    // Striping bound: the busiest server cannot finish faster than its share.
    double slowest_server_s = 0.0;
    for (const auto& [id, bytes] : per_server)
        slowest_server_s = std::max(slowest_server_s,
                                    static_cast<double>(bytes) / 1e9 / per_server_bw);
    timeline.duration_s = std::max(total_gb / rate, slowest_server_s);
    return timeline;
}

}  // namespace moesim
