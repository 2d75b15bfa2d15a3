#include "config.hpp"

#include <cmath>
#include <fstream>
#include <set>

namespace moesim {

namespace {

using nlohmann::json;

void require_keys(const json& obj, const std::string& path, const std::set<std::string>& allowed) {
    if (!obj.is_object())
        throw_error(ErrorCode::Config, "config: expected an object at " + path);
    for (const auto& [key, value] : obj.items()) {
        if (allowed.count(key) == 0)
            throw_error(ErrorCode::Config, "config: unknown key '" + path + "." + key + "'");
    }
}

template <typename T>
void read(const json& obj, const std::string& path, const char* key, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception&) {
        throw_error(ErrorCode::Config, "config: bad value type at '" + path + "." + key + "'");
    }
}

LengthDist parse_dist(const json& j, const std::string& path) {
    require_keys(j, path, {"kind", "value", "lo", "hi", "log_mean", "log_sigma"});
    LengthDist dist;
    std::string kind = "constant";
    read(j, path, "kind", kind);
    if (kind == "constant")
        dist.kind = DistKind::Constant;
    else if (kind == "uniform")
        dist.kind = DistKind::Uniform;
    else if (kind == "lognormal")
        dist.kind = DistKind::LogNormal;
    else
        throw_error(ErrorCode::Config, "config: unknown distribution kind at " + path);
    read(j, path, "value", dist.value);
    read(j, path, "lo", dist.lo);
    read(j, path, "hi", dist.hi);
    read(j, path, "log_mean", dist.log_mean);
    read(j, path, "log_sigma", dist.log_sigma);
    return dist;
}

json dist_to_json(const LengthDist& dist) {
    json j;
    switch (dist.kind) {
        case DistKind::Constant: j["kind"] = "constant"; break;
        case DistKind::Uniform: j["kind"] = "uniform"; break;
        case DistKind::LogNormal: j["kind"] = "lognormal"; break;
    }
    j["value"] = dist.value;
    j["lo"] = dist.lo;
    j["hi"] = dist.hi;
    j["log_mean"] = dist.log_mean;
    j["log_sigma"] = dist.log_sigma;
    return j;
}

PlaneSpec parse_plane(const json& j, const std::string& path, PlaneSpec base) {
    require_keys(j, path,
                 {"kind", "link_bandwidth_gbps", "base_latency_intra_us", "base_latency_inter_us",
                  "inter_node_bw_penalty", "sdma_startup_us", "aiv_direct_startup_us"});
    std::string kind;
    read(j, path, "kind", kind);
    if (!kind.empty()) {
        if (kind == "ub")
            base.kind = PlaneKind::UB;
        else if (kind == "rdma")
            base.kind = PlaneKind::RDMA;
        else if (kind == "vpc")
            base.kind = PlaneKind::VPC;
        else
            throw_error(ErrorCode::Config, "config: unknown plane kind at " + path);
    }
    read(j, path, "link_bandwidth_gbps", base.link_bandwidth_gbps);
    read(j, path, "base_latency_intra_us", base.base_latency_intra_us);
    read(j, path, "base_latency_inter_us", base.base_latency_inter_us);
    read(j, path, "inter_node_bw_penalty", base.inter_node_bw_penalty);
    read(j, path, "sdma_startup_us", base.sdma_startup_us);
    read(j, path, "aiv_direct_startup_us", base.aiv_direct_startup_us);
    return base;
}

json plane_to_json(const PlaneSpec& p) {
    json j;
    switch (p.kind) {
        case PlaneKind::UB: j["kind"] = "ub"; break;
        case PlaneKind::RDMA: j["kind"] = "rdma"; break;
        case PlaneKind::VPC: j["kind"] = "vpc"; break;
    }
    j["link_bandwidth_gbps"] = p.link_bandwidth_gbps;
    j["base_latency_intra_us"] = p.base_latency_intra_us;
    j["base_latency_inter_us"] = p.base_latency_inter_us;
    j["inter_node_bw_penalty"] = p.inter_node_bw_penalty;
    j["sdma_startup_us"] = p.sdma_startup_us;
    j["aiv_direct_startup_us"] = p.aiv_direct_startup_us;
    return j;
}

std::vector<Stage> parse_stages(const json& j, const std::string& path, StageKind default_kind) {
    if (!j.is_array()) throw_error(ErrorCode::Config, "config: expected an array at " + path);
    std::vector<Stage> stages;
    for (const auto& entry : j) {
        // [name, latency_us] or [name, latency_us, "compute"|"comm"]
        if (!entry.is_array() || entry.size() < 2 || entry.size() > 3)
            throw_error(ErrorCode::Config, "config: stage entries at " + path +
                                               " are [name, latency_us(, kind)] triples");
        Stage stage;
        stage.name = entry[0].get<std::string>();
        stage.base_latency_us = entry[1].get<double>();
        stage.kind = default_kind;
        if (entry.size() == 3) {
            std::string kind = entry[2].get<std::string>();
            if (kind == "compute")
                stage.kind = StageKind::Compute;
            else if (kind == "comm")
                stage.kind = StageKind::Comm;
            else
                throw_error(ErrorCode::Config, "config: unknown stage kind at " + path);
        }
        stages.push_back(std::move(stage));
    }
    return stages;
}

json stages_to_json(const std::vector<Stage>& stages) {
    json arr = json::array();
    for (const auto& s : stages) {
        json entry = json::array();
        entry.push_back(s.name);
        entry.push_back(s.base_latency_us);
        entry.push_back(s.kind == StageKind::Comm ? "comm" : "compute");
        arr.push_back(entry);
    }
    return arr;
}

StreamSpec parse_stream(const json& j, const std::string& path) {
    require_keys(j, path, {"aic", "aiv", "stages"});
    StreamSpec stream;
    read(j, path, "aic", stream.aic);
    read(j, path, "aiv", stream.aiv);
    if (j.contains("stages")) stream.stages = parse_stages(j["stages"], path + ".stages", StageKind::Compute);
    return stream;
}

json stream_to_json(const StreamSpec& s) {
    json j;
    j["aic"] = s.aic;
    j["aiv"] = s.aiv;
    j["stages"] = stages_to_json(s.stages);
    return j;
}

}  // namespace

const PlaneSpec& ScenarioConfig::plane(const std::string& name) const {
    auto it = planes.find(name);
    if (it == planes.end())
        throw_error(ErrorCode::Config, "config: plane '" + name + "' is not defined");
    return it->second;
}

ScenarioConfig default_config() {
    ScenarioConfig cfg;
    cfg.scenario_id = "deepseek_r1_default";

    cfg.workload.arrival.kind = ArrivalKind::ClosedLoop;
    cfg.workload.prompt_len = {DistKind::Constant, 4096};
    cfg.workload.output_len = {DistKind::Constant, 256};
    cfg.workload.num_requests = 64;
    cfg.workload.seed = cfg.seed;

    PlaneSpec ub;
    ub.kind = PlaneKind::UB;
    // Effective per-die streaming bandwidth for pool access, not raw link rate.
    ub.link_bandwidth_gbps = 19.0;
    ub.base_latency_intra_us = 0.5;
    ub.base_latency_inter_us = 1.0;
    ub.inter_node_bw_penalty = 0.03;
    ub.sdma_startup_us = 10.0;
    ub.aiv_direct_startup_us = 0.8;
    cfg.planes["ub"] = ub;

    PlaneSpec rdma;
    rdma.kind = PlaneKind::RDMA;
    rdma.link_bandwidth_gbps = 25.0;
    rdma.base_latency_intra_us = 2.0;
    rdma.base_latency_inter_us = 3.0;
    rdma.inter_node_bw_penalty = 0.0;
    rdma.sdma_startup_us = 12.0;
    rdma.aiv_direct_startup_us = 12.0;
    cfg.planes["rdma"] = rdma;

    PlaneSpec vpc;
    vpc.kind = PlaneKind::VPC;
    vpc.link_bandwidth_gbps = 8.0;
    vpc.base_latency_intra_us = 5.0;
    vpc.base_latency_inter_us = 10.0;
    vpc.inter_node_bw_penalty = 0.03;
    vpc.sdma_startup_us = 25.0;
    vpc.aiv_direct_startup_us = 25.0;
    cfg.planes["vpc"] = vpc;

    // Decode streams: stage times at full-die resources (24 AIC / 48 AIV) for
    // the reference decode workload (batch 96/die, 4K KV, speculative token on).
    cfg.pipeline.decode.reference_aic = 24;
    cfg.pipeline.decode.reference_aiv = 48;
    cfg.pipeline.decode.die_aic = 24;
    cfg.pipeline.decode.die_aiv = 48;
    cfg.pipeline.decode.serial_fraction = 0.1;
    cfg.pipeline.decode.stream0.aic = 16;
    cfg.pipeline.decode.stream0.aiv = 32;
    cfg.pipeline.decode.stream0.stages = {
        {"mla_prolog", 104.0, StageKind::Compute},
        {"fused_attention", 207.0, StageKind::Compute},
        {"o_proj", 103.0, StageKind::Compute},
    };
    cfg.pipeline.decode.stream1.aic = 8;
    cfg.pipeline.decode.stream1.aiv = 16;
    cfg.pipeline.decode.stream1.stages = {
        {"gate", 39.0, StageKind::Compute},
        {"dispatch", 33.0, StageKind::Comm},
        {"mlp", 154.0, StageKind::Compute},
        {"combine", 27.0, StageKind::Comm},
    };

    // Prefill engine busy times per layer at 16K tokens per die.
    cfg.pipeline.prefill.aic = {
        {"attention", 1260.0, StageKind::Compute},
        {"ffn", 1390.0, StageKind::Compute},
    };
    cfg.pipeline.prefill.aiv = {
        {"dispatch_compute", 230.0, StageKind::Compute},
        {"combine_compute", 220.0, StageKind::Compute},
    };
    cfg.pipeline.prefill.sdma = {
        {"dispatch_transfer", 200.0, StageKind::Comm},
        {"combine_transfer", 190.0, StageKind::Comm},
    };

    return cfg;
}

void ScenarioConfig::validate() const {
    ValidationReport report = validate_specs(model, cluster, deployment.decode_ep_degree);
    if (!report.ok())
        throw_error(ErrorCode::Validation, "config: " + report.violations.front());

    for (const auto& [name, plane] : planes) plane.validate("planes." + name);
    for (const char* required : {"ub", "rdma", "vpc"})
        if (planes.count(required) == 0)
            throw_error(ErrorCode::Validation, std::string("config: missing plane '") + required + "'");

    if (workload.num_requests < 0)
        throw_error(ErrorCode::Validation, "config: workload.num_requests must be nonnegative");
    if (workload.reuse_rate < 0.0 || workload.reuse_rate > 1.0)
        throw_error(ErrorCode::Validation, "config: workload.reuse_rate must lie in [0, 1]");
    workload.prompt_len.validate("config: workload.prompt_len");
    workload.output_len.validate("config: workload.output_len");

    if (deployment.decode_batch_per_die <= 0)
        throw_error(ErrorCode::Validation, "config: deployment.decode_batch_per_die must be positive");

    if (cache.block_size_tokens < 128 || cache.block_size_tokens > 512)
        throw_error(ErrorCode::Validation, "config: cache.block_size_tokens must lie in [128, 512]");
    if (cache.pool_plane != "ub" && cache.pool_plane != "vpc")
        throw_error(ErrorCode::Validation, "config: cache.pool_plane must be 'ub' or 'vpc'");
    if (cache.decode_model_kind != "reasoning" && cache.decode_model_kind != "non_reasoning")
        throw_error(ErrorCode::Validation,
                    "config: cache.decode_model_kind must be 'reasoning' or 'non_reasoning'");
    if (cache.pool_dram_fraction <= 0.0 || cache.pool_dram_fraction > 1.0)
        throw_error(ErrorCode::Validation, "config: cache.pool_dram_fraction must lie in (0, 1]");

    mtp.validate();
    if (dispatch_fit.startup_us < 0.0 || dispatch_fit.eff_bandwidth_gbps <= 0.0 ||
        combine_fit.startup_us < 0.0 || combine_fit.eff_bandwidth_gbps <= 0.0)
        throw_error(ErrorCode::Validation, "config: ep_calibration parameters must be positive");
    if (decode_calibration.anchor_a.batch == decode_calibration.anchor_b.batch)
        throw_error(ErrorCode::Validation, "config: decode_calibration anchors need distinct batches");

    LoadScenario scenario;
    scenario.num_instances = model_cache.num_instances;
    scenario.obs_bandwidth_gbps = model_cache.obs_bandwidth_gbps;
    scenario.obs_efficiency = model_cache.obs_efficiency;
    scenario.num_active_models = model_cache.num_active_models;
    scenario.validate();
}

ScenarioConfig parse_config_json(const nlohmann::json& j) {
    ScenarioConfig cfg = default_config();
    require_keys(j, "$",
                 {"schema_version", "seed", "scenario_id", "model", "cluster", "workload", "planes",
                  "ep_calibration", "deployment", "pipeline", "mtp", "decode_calibration", "cache",
                  "model_cache"});

    read(j, "$", "schema_version", cfg.schema_version);
    if (cfg.schema_version != 1)
        throw_error(ErrorCode::Config, "config: unsupported schema_version");
    read(j, "$", "seed", cfg.seed);
    read(j, "$", "scenario_id", cfg.scenario_id);

    if (j.contains("model")) {
        const auto& m = j["model"];
        require_keys(m, "model",
                     {"num_layers", "hidden_dim", "num_router_experts", "top_k",
                      "num_shared_experts", "total_params", "active_params", "bytes_per_param",
                      "kv_bytes_per_token"});
        read(m, "model", "num_layers", cfg.model.num_layers);
        read(m, "model", "hidden_dim", cfg.model.hidden_dim);
        read(m, "model", "num_router_experts", cfg.model.num_router_experts);
        read(m, "model", "top_k", cfg.model.top_k);
        read(m, "model", "num_shared_experts", cfg.model.num_shared_experts);
        read(m, "model", "total_params", cfg.model.total_params);
        read(m, "model", "active_params", cfg.model.active_params);
        read(m, "model", "bytes_per_param", cfg.model.bytes_per_param);
        read(m, "model", "kv_bytes_per_token", cfg.model.kv_bytes_per_token);
    }
    if (j.contains("cluster")) {
        const auto& c = j["cluster"];
        require_keys(c, "cluster",
                     {"num_nodes", "npus_per_node", "dies_per_npu", "aic_per_die", "aiv_per_die",
                      "cpu_dram_per_node", "ssd_per_node"});
        read(c, "cluster", "num_nodes", cfg.cluster.num_nodes);
        read(c, "cluster", "npus_per_node", cfg.cluster.npus_per_node);
        read(c, "cluster", "dies_per_npu", cfg.cluster.dies_per_npu);
        read(c, "cluster", "aic_per_die", cfg.cluster.aic_per_die);
        read(c, "cluster", "aiv_per_die", cfg.cluster.aiv_per_die);
        read(c, "cluster", "cpu_dram_per_node", cfg.cluster.cpu_dram_per_node);
        read(c, "cluster", "ssd_per_node", cfg.cluster.ssd_per_node);
    }
    if (j.contains("workload")) {
        const auto& w = j["workload"];
        require_keys(w, "workload",
                     {"arrival", "prompt_len", "output_len", "reuse_rate", "num_requests", "seed"});
        if (w.contains("arrival")) {
            const auto& a = w["arrival"];
            require_keys(a, "workload.arrival", {"kind", "rate_per_s"});
            std::string kind = "closed_loop";
            read(a, "workload.arrival", "kind", kind);
            if (kind == "closed_loop")
                cfg.workload.arrival.kind = ArrivalKind::ClosedLoop;
            else if (kind == "poisson")
                cfg.workload.arrival.kind = ArrivalKind::Poisson;
            else
                throw_error(ErrorCode::Config, "config: unknown arrival kind");
            read(a, "workload.arrival", "rate_per_s", cfg.workload.arrival.rate_per_s);
        }
        if (w.contains("prompt_len")) cfg.workload.prompt_len = parse_dist(w["prompt_len"], "workload.prompt_len");
        if (w.contains("output_len")) cfg.workload.output_len = parse_dist(w["output_len"], "workload.output_len");
        read(w, "workload", "reuse_rate", cfg.workload.reuse_rate);
        read(w, "workload", "num_requests", cfg.workload.num_requests);
        bool seed_set = w.contains("seed");
        read(w, "workload", "seed", cfg.workload.seed);
        if (!seed_set) cfg.workload.seed = cfg.seed;
    } else {
        cfg.workload.seed = cfg.seed;
    }
    cfg.workload.reuse_block_size = cfg.cache.block_size_tokens;

    if (j.contains("planes")) {
        require_keys(j["planes"], "planes", {"ub", "rdma", "vpc"});
        for (const char* name : {"ub", "rdma", "vpc"}) {
            if (j["planes"].contains(name))
                cfg.planes[name] =
                    parse_plane(j["planes"][name], std::string("planes.") + name, cfg.planes[name]);
        }
    }
    if (j.contains("ep_calibration")) {
        const auto& e = j["ep_calibration"];
        require_keys(e, "ep_calibration", {"dispatch", "combine"});
        auto parse_fit = [&](const json& f, const std::string& path, EpFit& fit) {
            require_keys(f, path, {"startup_us", "eff_bandwidth_gbps", "ref_tokens_per_rank"});
            read(f, path, "startup_us", fit.startup_us);
            read(f, path, "eff_bandwidth_gbps", fit.eff_bandwidth_gbps);
            read(f, path, "ref_tokens_per_rank", fit.ref_tokens_per_rank);
        };
        if (e.contains("dispatch")) parse_fit(e["dispatch"], "ep_calibration.dispatch", cfg.dispatch_fit);
        if (e.contains("combine")) parse_fit(e["combine"], "ep_calibration.combine", cfg.combine_fit);
    }
    if (j.contains("deployment")) {
        const auto& d = j["deployment"];
        require_keys(d, "deployment",
                     {"prefill_instances", "prefill_dies_per_instance", "prefill_tp",
                      "decode_ep_degree", "decode_batch_per_die", "shared_expert_copies",
                      "redundant_experts", "decode_tp", "decode_dp"});
        read(d, "deployment", "prefill_instances", cfg.deployment.prefill_instances);
        read(d, "deployment", "prefill_dies_per_instance", cfg.deployment.prefill_dies_per_instance);
        read(d, "deployment", "prefill_tp", cfg.deployment.prefill_tp);
        read(d, "deployment", "decode_ep_degree", cfg.deployment.decode_ep_degree);
        read(d, "deployment", "decode_batch_per_die", cfg.deployment.decode_batch_per_die);
        read(d, "deployment", "shared_expert_copies", cfg.deployment.shared_expert_copies);
        read(d, "deployment", "redundant_experts", cfg.deployment.redundant_experts);
        read(d, "deployment", "decode_tp", cfg.deployment.decode_tp);
        read(d, "deployment", "decode_dp", cfg.deployment.decode_dp);
    }
    if (j.contains("pipeline")) {
        const auto& p = j["pipeline"];
        require_keys(p, "pipeline",
                     {"decode_streams", "prefill_stages", "serial_fraction",
                      "prefill_reference_tokens"});
        if (p.contains("decode_streams")) {
            const auto& ds = p["decode_streams"];
            require_keys(ds, "pipeline.decode_streams",
                         {"reference_aic", "reference_aiv", "stream0", "stream1"});
            read(ds, "pipeline.decode_streams", "reference_aic", cfg.pipeline.decode.reference_aic);
            read(ds, "pipeline.decode_streams", "reference_aiv", cfg.pipeline.decode.reference_aiv);
            if (ds.contains("stream0"))
                cfg.pipeline.decode.stream0 = parse_stream(ds["stream0"], "pipeline.decode_streams.stream0");
            if (ds.contains("stream1"))
                cfg.pipeline.decode.stream1 = parse_stream(ds["stream1"], "pipeline.decode_streams.stream1");
        }
        if (p.contains("prefill_stages")) {
            const auto& ps = p["prefill_stages"];
            require_keys(ps, "pipeline.prefill_stages", {"aic", "aiv", "sdma"});
            if (ps.contains("aic"))
                cfg.pipeline.prefill.aic = parse_stages(ps["aic"], "pipeline.prefill_stages.aic", StageKind::Compute);
            if (ps.contains("aiv"))
                cfg.pipeline.prefill.aiv = parse_stages(ps["aiv"], "pipeline.prefill_stages.aiv", StageKind::Compute);
            if (ps.contains("sdma"))
                cfg.pipeline.prefill.sdma = parse_stages(ps["sdma"], "pipeline.prefill_stages.sdma", StageKind::Comm);
        }
        read(p, "pipeline", "serial_fraction", cfg.pipeline.decode.serial_fraction);
        read(p, "pipeline", "prefill_reference_tokens", cfg.pipeline.prefill_reference_tokens);
    }
    cfg.pipeline.decode.die_aic = cfg.cluster.aic_per_die;
    cfg.pipeline.decode.die_aiv = cfg.cluster.aiv_per_die;

    if (j.contains("mtp")) {
        const auto& m = j["mtp"];
        require_keys(m, "mtp", {"k", "accept_prob", "graph_launch_overhead_us", "pipelined"});
        read(m, "mtp", "k", cfg.mtp.k);
        read(m, "mtp", "accept_prob", cfg.mtp.accept_prob);
        read(m, "mtp", "graph_launch_overhead_us", cfg.mtp.graph_launch_overhead_us);
        read(m, "mtp", "pipelined", cfg.mtp.pipelined);
    }
    if (j.contains("decode_calibration")) {
        const auto& d = j["decode_calibration"];
        require_keys(d, "decode_calibration",
                     {"anchor_a_batch", "anchor_a_tpot_ms", "anchor_b_batch", "anchor_b_tpot_ms",
                      "iteration_overhead_us"});
        read(d, "decode_calibration", "anchor_a_batch", cfg.decode_calibration.anchor_a.batch);
        read(d, "decode_calibration", "anchor_a_tpot_ms", cfg.decode_calibration.anchor_a.tpot_ms);
        read(d, "decode_calibration", "anchor_b_batch", cfg.decode_calibration.anchor_b.batch);
        read(d, "decode_calibration", "anchor_b_tpot_ms", cfg.decode_calibration.anchor_b.tpot_ms);
        read(d, "decode_calibration", "iteration_overhead_us",
             cfg.decode_calibration.iteration_overhead_us);
    }
    if (j.contains("cache")) {
        const auto& c = j["cache"];
        require_keys(c, "cache",
                     {"block_size_tokens", "context_quota_bytes", "model_quota_bytes",
                      "dram_service_us", "ssd_service_us", "pool_plane", "vnodes_per_server",
                      "allocation_rounding", "pool_dram_fraction", "decode_model_kind",
                      "approx_reuse", "kv_transfers_enabled"});
        read(c, "cache", "block_size_tokens", cfg.cache.block_size_tokens);
        read(c, "cache", "context_quota_bytes", cfg.cache.context_quota_bytes);
        read(c, "cache", "model_quota_bytes", cfg.cache.model_quota_bytes);
        read(c, "cache", "dram_service_us", cfg.cache.dram_service_us);
        read(c, "cache", "ssd_service_us", cfg.cache.ssd_service_us);
        read(c, "cache", "pool_plane", cfg.cache.pool_plane);
        read(c, "cache", "vnodes_per_server", cfg.cache.vnodes_per_server);
        read(c, "cache", "allocation_rounding", cfg.cache.allocation_rounding);
        read(c, "cache", "pool_dram_fraction", cfg.cache.pool_dram_fraction);
        read(c, "cache", "decode_model_kind", cfg.cache.decode_model_kind);
        read(c, "cache", "approx_reuse", cfg.cache.approx_reuse);
        read(c, "cache", "kv_transfers_enabled", cfg.cache.kv_transfers_enabled);
        cfg.workload.reuse_block_size = cfg.cache.block_size_tokens;
    }
    if (j.contains("model_cache")) {
        const auto& m = j["model_cache"];
        require_keys(m, "model_cache",
                     {"obs_bandwidth_gbps", "obs_efficiency", "warm_load_latency_s",
                      "num_instances", "num_active_models", "model_total_bytes",
                      "model_block_bytes", "dram_tier_bw_per_server_gbps",
                      "ssd_tier_bw_per_server_gbps", "ingest_bandwidth_gbps"});
        read(m, "model_cache", "obs_bandwidth_gbps", cfg.model_cache.obs_bandwidth_gbps);
        read(m, "model_cache", "obs_efficiency", cfg.model_cache.obs_efficiency);
        read(m, "model_cache", "warm_load_latency_s", cfg.model_cache.warm_load_latency_s);
        read(m, "model_cache", "num_instances", cfg.model_cache.num_instances);
        read(m, "model_cache", "num_active_models", cfg.model_cache.num_active_models);
        read(m, "model_cache", "model_total_bytes", cfg.model_cache.model_total_bytes);
        read(m, "model_cache", "model_block_bytes", cfg.model_cache.model_block_bytes);
        read(m, "model_cache", "dram_tier_bw_per_server_gbps",
             cfg.model_cache.prefetch.dram_tier_bw_per_server_gbps);
        read(m, "model_cache", "ssd_tier_bw_per_server_gbps",
             cfg.model_cache.prefetch.ssd_tier_bw_per_server_gbps);
        read(m, "model_cache", "ingest_bandwidth_gbps",
             cfg.model_cache.prefetch.ingest_bandwidth_gbps);
    }

    cfg.validate();
    return cfg;
}

ScenarioConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_error(ErrorCode::Config, "config file not found: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw_error(ErrorCode::Config, "config parse error in " + path + ": " + e.what());
    }
    return parse_config_json(j);
}

nlohmann::json config_to_json(const ScenarioConfig& cfg) {
    nlohmann::json j;
    j["schema_version"] = cfg.schema_version;
    j["seed"] = cfg.seed;
    j["scenario_id"] = cfg.scenario_id;

    j["model"] = {{"num_layers", cfg.model.num_layers},
                  {"hidden_dim", cfg.model.hidden_dim},
                  {"num_router_experts", cfg.model.num_router_experts},
                  {"top_k", cfg.model.top_k},
                  {"num_shared_experts", cfg.model.num_shared_experts},
                  {"total_params", cfg.model.total_params},
                  {"active_params", cfg.model.active_params},
                  {"bytes_per_param", cfg.model.bytes_per_param},
                  {"kv_bytes_per_token", cfg.model.kv_bytes_per_token}};
    j["cluster"] = {{"num_nodes", cfg.cluster.num_nodes},
                    {"npus_per_node", cfg.cluster.npus_per_node},
                    {"dies_per_npu", cfg.cluster.dies_per_npu},
                    {"aic_per_die", cfg.cluster.aic_per_die},
                    {"aiv_per_die", cfg.cluster.aiv_per_die},
                    {"cpu_dram_per_node", cfg.cluster.cpu_dram_per_node},
                    {"ssd_per_node", cfg.cluster.ssd_per_node}};
    j["workload"] = {
        {"arrival",
         {{"kind", cfg.workload.arrival.kind == ArrivalKind::Poisson ? "poisson" : "closed_loop"},
          {"rate_per_s", cfg.workload.arrival.rate_per_s}}},
        {"prompt_len", dist_to_json(cfg.workload.prompt_len)},
        {"output_len", dist_to_json(cfg.workload.output_len)},
        {"reuse_rate", cfg.workload.reuse_rate},
        {"num_requests", cfg.workload.num_requests},
        {"seed", cfg.workload.seed}};
    j["planes"] = {{"ub", plane_to_json(cfg.plane("ub"))},
                   {"rdma", plane_to_json(cfg.plane("rdma"))},
                   {"vpc", plane_to_json(cfg.plane("vpc"))}};
    j["ep_calibration"] = {{"dispatch",
                            {{"startup_us", cfg.dispatch_fit.startup_us},
                             {"eff_bandwidth_gbps", cfg.dispatch_fit.eff_bandwidth_gbps},
                             {"ref_tokens_per_rank", cfg.dispatch_fit.ref_tokens_per_rank}}},
                           {"combine",
                            {{"startup_us", cfg.combine_fit.startup_us},
                             {"eff_bandwidth_gbps", cfg.combine_fit.eff_bandwidth_gbps},
                             {"ref_tokens_per_rank", cfg.combine_fit.ref_tokens_per_rank}}}};
    j["deployment"] = {{"prefill_instances", cfg.deployment.prefill_instances},
                       {"prefill_dies_per_instance", cfg.deployment.prefill_dies_per_instance},
                       {"prefill_tp", cfg.deployment.prefill_tp},
                       {"decode_ep_degree", cfg.deployment.decode_ep_degree},
                       {"decode_batch_per_die", cfg.deployment.decode_batch_per_die},
                       {"shared_expert_copies", cfg.deployment.shared_expert_copies},
                       {"redundant_experts", cfg.deployment.redundant_experts},
                       {"decode_tp", cfg.deployment.decode_tp},
                       {"decode_dp", cfg.deployment.decode_dp}};
    j["pipeline"] = {{"decode_streams",
                      {{"reference_aic", cfg.pipeline.decode.reference_aic},
                       {"reference_aiv", cfg.pipeline.decode.reference_aiv},
                       {"stream0", stream_to_json(cfg.pipeline.decode.stream0)},
                       {"stream1", stream_to_json(cfg.pipeline.decode.stream1)}}},
                     {"prefill_stages",
                      {{"aic", stages_to_json(cfg.pipeline.prefill.aic)},
                       {"aiv", stages_to_json(cfg.pipeline.prefill.aiv)},
                       {"sdma", stages_to_json(cfg.pipeline.prefill.sdma)}}},
                     {"serial_fraction", cfg.pipeline.decode.serial_fraction},
                     {"prefill_reference_tokens", cfg.pipeline.prefill_reference_tokens}};
    j["mtp"] = {{"k", cfg.mtp.k},
                {"accept_prob", cfg.mtp.accept_prob},
                {"graph_launch_overhead_us", cfg.mtp.graph_launch_overhead_us},
                {"pipelined", cfg.mtp.pipelined}};
    j["decode_calibration"] = {{"anchor_a_batch", cfg.decode_calibration.anchor_a.batch},
                               {"anchor_a_tpot_ms", cfg.decode_calibration.anchor_a.tpot_ms},
                               {"anchor_b_batch", cfg.decode_calibration.anchor_b.batch},
                               {"anchor_b_tpot_ms", cfg.decode_calibration.anchor_b.tpot_ms},
                               {"iteration_overhead_us", cfg.decode_calibration.iteration_overhead_us}};
    j["cache"] = {{"block_size_tokens", cfg.cache.block_size_tokens},
                  {"context_quota_bytes", cfg.cache.context_quota_bytes},
                  {"model_quota_bytes", cfg.cache.model_quota_bytes},
                  {"dram_service_us", cfg.cache.dram_service_us},
                  {"ssd_service_us", cfg.cache.ssd_service_us},
                  {"pool_plane", cfg.cache.pool_plane},
                  {"vnodes_per_server", cfg.cache.vnodes_per_server},
                  {"allocation_rounding", cfg.cache.allocation_rounding},
                  {"pool_dram_fraction", cfg.cache.pool_dram_fraction},
                  {"decode_model_kind", cfg.cache.decode_model_kind},
                  {"approx_reuse", cfg.cache.approx_reuse},
                  {"kv_transfers_enabled", cfg.cache.kv_transfers_enabled}};
    j["model_cache"] = {
        {"obs_bandwidth_gbps", cfg.model_cache.obs_bandwidth_gbps},
        {"obs_efficiency", cfg.model_cache.obs_efficiency},
        {"warm_load_latency_s", cfg.model_cache.warm_load_latency_s},
        {"num_instances", cfg.model_cache.num_instances},
        {"num_active_models", cfg.model_cache.num_active_models},
        {"model_total_bytes", cfg.model_cache.model_total_bytes},
        {"model_block_bytes", cfg.model_cache.model_block_bytes},
        {"dram_tier_bw_per_server_gbps", cfg.model_cache.prefetch.dram_tier_bw_per_server_gbps},
        {"ssd_tier_bw_per_server_gbps", cfg.model_cache.prefetch.ssd_tier_bw_per_server_gbps},
        {"ingest_bandwidth_gbps", cfg.model_cache.prefetch.ingest_bandwidth_gbps}};
    return j;
}

nlohmann::json apply_axis(const nlohmann::json& full_config, const std::string& axis,
                          double value) {
    std::string pointer = "/" + axis;
    for (auto& c : pointer)
        if (c == '.') c = '/';
    nlohmann::json out = full_config;
    nlohmann::json::json_pointer ptr(pointer);
    if (!out.contains(ptr))
        throw_error(ErrorCode::Config, "sweep: unknown axis '" + axis + "'");
    const auto& current = out.at(ptr);
    if (current.is_number_integer() || current.is_number_unsigned())
        out[ptr] = static_cast<std::int64_t>(std::llround(value));
    else if (current.is_number_float())
        out[ptr] = value;
    else
        throw_error(ErrorCode::Config, "sweep: axis '" + axis + "' is not numeric");
    return out;
}

}  // namespace moesim
