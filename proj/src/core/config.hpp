#pragma once

#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "expert_parallel.hpp"
#include "interconnect.hpp"
#include "mempool.hpp"
#include "model_cache.hpp"
#include "pipeline.hpp"
#include "workload.hpp"

namespace moesim {

// Fitted fused-EP operator parameters; defaults reproduce the reference
// endpoint measurements (EP8/EP256) exactly under the latency law.
struct EpFit {
    double startup_us = 7.2;
    double eff_bandwidth_gbps = 87.0988;
    std::int64_t ref_tokens_per_rank = 128;

    PlaneSpec as_plane(const PlaneSpec& base) const {
        PlaneSpec p = base;
        p.aiv_direct_startup_us = startup_us;
        p.link_bandwidth_gbps = eff_bandwidth_gbps;
        return p;
    }
};

struct DeploymentConfig {
    int prefill_instances = 1;
    int prefill_dies_per_instance = 32;
    int prefill_tp = 16;
    int decode_ep_degree = 320;
    int decode_batch_per_die = 96;
    int shared_expert_copies = 32;
    int redundant_experts = 32;
    int decode_tp = 1;
    int decode_dp = 320;
};

struct PipelineConfig {
    DecodePipelineSpec decode;
    PrefillStageTable prefill;
    std::int64_t prefill_reference_tokens = 16384;  // per die, matching the stage table
};

struct DecodeCalibrationConfig {
    TpotAnchor anchor_a{96, 49.4};
    TpotAnchor anchor_b{8, 14.9};
    double iteration_overhead_us = 10730.0;
};

struct CacheConfig {
    int block_size_tokens = 128;
    std::int64_t context_quota_bytes = 4LL << 40;
    std::int64_t model_quota_bytes = 8LL << 40;
    double dram_service_us = 2.0;
    double ssd_service_us = 150.0;
    std::string pool_plane = "ub";  // "vpc" is the fallback fabric
    int vnodes_per_server = 128;
    std::int64_t allocation_rounding = 2LL << 20;
    double pool_dram_fraction = 0.5;  // share of cpu_dram_per_node contributed to the pool
    std::string decode_model_kind = "reasoning";
    bool approx_reuse = false;
    bool kv_transfers_enabled = true;
};

struct ModelCacheConfig {
    double obs_bandwidth_gbps = 2.5;
    double obs_efficiency = 0.839;
    double warm_load_latency_s = 5.0;
    int num_instances = 8;
    int num_active_models = 8;
    std::int64_t model_total_bytes = 671LL * 1000000000LL;
    std::int64_t model_block_bytes = 512LL << 20;
    PrefetchParams prefetch;
};

struct ScenarioConfig {
    int schema_version = 1;
    std::uint64_t seed = 42;
    std::string scenario_id = "default";
    MoeModelSpec model;
    ClusterSpec cluster;
    WorkloadSpec workload;
    std::map<std::string, PlaneSpec> planes;  // ub, rdma, vpc
    EpFit dispatch_fit;
    EpFit combine_fit{6.2, 154.9296, 128};
    DeploymentConfig deployment;
    PipelineConfig pipeline;
    MtpConfig mtp;
    DecodeCalibrationConfig decode_calibration;
    CacheConfig cache;
    ModelCacheConfig model_cache;

    const PlaneSpec& plane(const std::string& name) const;
    void validate() const;  // throws Error(Validation) naming the first offending field
};

ScenarioConfig default_config();

// Strict parsing: unknown keys anywhere are errors, every present key is
// type-checked, and the result is validated. Missing keys take defaults.
ScenarioConfig parse_config_json(const nlohmann::json& j);
ScenarioConfig parse_config_file(const std::string& path);

nlohmann::json config_to_json(const ScenarioConfig& cfg);

// Sets a numeric field addressed as a dotted path ("workload.reuse_rate") on
// the fully-serialized config. Unknown paths are errors.
nlohmann::json apply_axis(const nlohmann::json& full_config, const std::string& axis, double value);

}  // namespace moesim
