#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mempool.hpp"

namespace moesim {

struct ModelBlockSet {
    std::string model_id;
    int version = 1;
    std::int64_t total_bytes = 671LL * 1000000000LL;  // 671 GB weights
    std::int64_t block_size_bytes = 512LL << 20;
    std::vector<std::uint64_t> block_keys;            // derived; last block may be short

    static ModelBlockSet make(const std::string& model_id, int version, std::int64_t total_bytes,
                              std::int64_t block_size_bytes);
    std::int64_t block_bytes(std::size_t index) const;
};

enum class LoadStrategy { NO_CACHE, LOCAL_DRAM, EMS_POOL };

struct LoadScenario {
    LoadStrategy strategy = LoadStrategy::EMS_POOL;
    int num_instances = 8;
    double obs_bandwidth_gbps = 2.5;
    double obs_efficiency = 0.839;  // calibration constant: nominal 2.5 GB/s reads ~2.1 effective
    double warm_load_latency_s = 5.0;
    int num_active_models = 8;

    void validate() const;
};

// Cold start from persistent object storage. Without a shared pool the
// concurrent instances contend for the same bucket bandwidth.
double cold_start_latency_s(const LoadScenario& s, const ModelBlockSet& m);

double avg_switch_latency_s(double hit_rate, double warm_s, double miss_s);

// DRAM footprint as a multiple of model size: {0, N, 1}.
double dram_overhead_x(LoadStrategy strategy, int num_instances);

// Uniform random switch among num_active_models; one model cached locally vs
// all of them pooled.
double switch_hit_rate(LoadStrategy strategy, int num_active_models, int ems_capacity_models);

struct LoadTimeline {
    double duration_s = 0.0;
    Tier source_tier = Tier::DRAM;
    double aggregate_source_bandwidth_gbps = 0.0;
    double ingest_bandwidth_gbps = 0.0;
    std::vector<std::pair<int, std::int64_t>> bytes_per_server;  // sorted by server id
};

struct PrefetchParams {
    double dram_tier_bw_per_server_gbps = 100.0;
    double ssd_tier_bw_per_server_gbps = 50.0;  // 400 Gbps EVS path per node
    double ingest_bandwidth_gbps = 134.2;       // target-side load rate; warm 671 GB ~ 5 s
};

// Registers the model's blocks if absent, then computes the fetch timeline:
// blocks stripe across pool servers by placement hash, and the aggregate rate
// is min(sum of per-server tier bandwidth, target ingest bandwidth).
LoadTimeline prefetch_and_load(MemoryPool& pool, std::int64_t ns, const ModelBlockSet& model,
                               int target_dies, const PrefetchParams& params);

}  // namespace moesim
