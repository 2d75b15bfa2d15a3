#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"

namespace moesim {

struct MoeModelSpec {
    int num_layers = 61;
    int hidden_dim = 7168;
    int num_router_experts = 256;
    int top_k = 8;
    int num_shared_experts = 1;
    double total_params = 671e9;
    double active_params = 37e9;
    int bytes_per_param = 1;                 // INT8 weights
    std::int64_t kv_bytes_per_token = 70272; // all layers, compressed-latent cache
};

struct ClusterSpec {
    int num_nodes = 48;
    int npus_per_node = 8;
    int dies_per_npu = 2;
    int aic_per_die = 24;
    int aiv_per_die = 48;
    std::int64_t cpu_dram_per_node = 1536LL << 30;
    std::int64_t ssd_per_node = 8192LL << 30;

    int total_dies() const { return num_nodes * npus_per_node * dies_per_npu; }
    int dies_per_node() const { return npus_per_node * dies_per_npu; }
    int node_of_die(int die) const { return die / dies_per_node(); }
};

enum class DistKind { Constant, Uniform, LogNormal };

struct LengthDist {
    DistKind kind = DistKind::Constant;
    std::int64_t value = 4096;   // Constant
    std::int64_t lo = 0, hi = 0; // Uniform (inclusive); also truncation bounds for LogNormal
    double log_mean = 0.0, log_sigma = 0.0;

    double mean() const;
    void validate(const std::string& name) const;
};

enum class ArrivalKind { ClosedLoop, Poisson };

struct ArrivalSpec {
    ArrivalKind kind = ArrivalKind::ClosedLoop;
    double rate_per_s = 0.0; // Poisson only
};

struct WorkloadSpec {
    ArrivalSpec arrival;
    LengthDist prompt_len;
    LengthDist output_len{DistKind::Constant, 256};
    double reuse_rate = 0.0;
    std::int64_t num_requests = 0;
    std::uint64_t seed = 0;
    int reuse_block_size = 128; // context-cache block granularity for prefixes
};

struct Request {
    std::int64_t id = 0;
    std::int64_t arrival_time_us = 0;
    std::int64_t prompt_len = 0;
    std::int64_t output_len = 0;
    std::int64_t reused_prefix_len = 0; // multiple of reuse_block_size
    std::int64_t reuse_source = -1;     // id of the request whose prompt is shared
    std::vector<std::uint64_t> token_hashes;

    bool operator==(const Request&) const = default;
};

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

// ep_degree <= 0 skips the deployment-feasibility check.
ValidationReport validate_specs(const MoeModelSpec& model, const ClusterSpec& cluster,
                                int ep_degree = 0);

// Deterministic for a given spec: same seed produces an identical request list.
std::vector<Request> generate_workload(const WorkloadSpec& spec);

}  // namespace moesim
