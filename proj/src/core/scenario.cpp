#include "scenario.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <set>
#include <sstream>

#include "prefill_hybrid.hpp"

namespace moesim {

void MetricReport::add(const std::string& name, double value, const std::string& unit) {
    rows.push_back({name, value, unit});
}

double MetricReport::value(const std::string& name) const {
    for (const auto& row : rows)
        if (row.name == name) return row.value;
    throw_error(ErrorCode::InvalidArgument, "report has no metric '" + name + "'");
}

bool MetricReport::has(const std::string& name) const {
    for (const auto& row : rows)
        if (row.name == name) return true;
    return false;
}

nlohmann::json MetricReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = schema_version;
    j["scenario_id"] = scenario_id;
    if (axis_value) j["axis_value"] = *axis_value;
    nlohmann::json metrics = nlohmann::json::array();
    for (const auto& row : rows)
        metrics.push_back({{"name", row.name}, {"value", row.value}, {"unit", row.unit}});
    j["metrics"] = metrics;

    nlohmann::json reuse_rows = nlohmann::json::array();
    for (const auto& r : reuse)
        reuse_rows.push_back({{"request_id", r.request_id},
                              {"blocks_total", r.blocks_total},
                              {"blocks_hit", r.blocks_hit},
                              {"tokens_reused", r.tokens_reused},
                              {"bytes_dram", r.bytes_dram},
                              {"bytes_ssd", r.bytes_ssd}});
    j["reuse"] = reuse_rows;

    nlohmann::json pool_rows = nlohmann::json::array();
    for (const auto& s : pool)
        pool_rows.push_back({{"server", s.id},
                             {"failed", s.failed},
                             {"dram_used", s.dram_used},
                             {"ssd_used", s.ssd_used},
                             {"objects_dram", s.objects_dram},
                             {"objects_ssd", s.objects_ssd},
                             {"dram_hits", s.dram_hits},
                             {"ssd_hits", s.ssd_hits},
                             {"misses", s.misses},
                             {"demotions", s.demotions},
                             {"ssd_evictions", s.ssd_evictions}});
    j["pool"] = pool_rows;
    j["trace_hash"] = trace_hash;
    return j;
}

std::string MetricReport::to_json_text() const { return to_json().dump(2) + "\n"; }

namespace {

struct PrefillInstance {
    std::int64_t free_at_us = 0;
    int home_die = 0;
};

}  // namespace

MetricReport run_scenario(const ScenarioConfig& cfg) {
    MetricReport report;
    report.scenario_id = cfg.scenario_id;
    if (cfg.workload.num_requests == 0) return report;  // empty workload, empty metrics

    // --- derived models -----------------------------------------------------
    DecodeLatencyModel decode_model = calibrate_decode_model(
        cfg.decode_calibration.anchor_a, cfg.decode_calibration.anchor_b,
        cfg.mtp.expected_tokens_per_iteration(), cfg.model.num_layers,
        cfg.decode_calibration.iteration_overhead_us);
    DecodeIterationResult decode =
        tpot_and_throughput(cfg.deployment.decode_batch_per_die, decode_model, cfg.mtp);

    double layer_microbatch = decode_layer_latency_us(cfg.pipeline.decode, true);
    double layer_serial = decode_layer_latency_us(cfg.pipeline.decode, false);
    double prefill_layer_mb = prefill_layer_latency_us(cfg.pipeline.prefill, true);
    double prefill_layer_serial = prefill_layer_latency_us(cfg.pipeline.prefill, false);

    PlaneSpec dispatch_plane = cfg.dispatch_fit.as_plane(cfg.plane("ub"));
    PlaneSpec combine_plane = cfg.combine_fit.as_plane(cfg.plane("ub"));
    std::int64_t dispatch_bytes = static_cast<std::int64_t>(cfg.deployment.decode_batch_per_die) *
                                  cfg.model.top_k * kDispatchMsgBytes;
    std::int64_t combine_bytes = static_cast<std::int64_t>(cfg.deployment.decode_batch_per_die) *
                                 cfg.model.top_k * kCombineMsgBytes;
    double dispatch_us =
        fused_ep_latency_us(dispatch_plane, cfg.deployment.decode_ep_degree, dispatch_bytes);
    double combine_us =
        fused_ep_latency_us(combine_plane, cfg.deployment.decode_ep_degree, combine_bytes);

    // Per-token prefill compute cost from the calibrated stage table.
    double prefill_us_per_token = prefill_layer_mb * cfg.model.num_layers /
                                  static_cast<double>(cfg.pipeline.prefill_reference_tokens);

    // --- pool and cache -----------------------------------------------------
    std::vector<PoolServerSpec> servers;
    for (int n = 0; n < cfg.cluster.num_nodes; ++n) {
        PoolServerSpec spec;
        spec.id = n;
        spec.dram_capacity = static_cast<std::int64_t>(
            cfg.cache.pool_dram_fraction * static_cast<double>(cfg.cluster.cpu_dram_per_node));
        spec.ssd_capacity = cfg.cluster.ssd_per_node;
        servers.push_back(spec);
    }
    PoolConfig pool_config;
    pool_config.vnodes_per_server = cfg.cache.vnodes_per_server;
    pool_config.allocation_rounding = cfg.cache.allocation_rounding;
    pool_config.dram_service_us = cfg.cache.dram_service_us;
    pool_config.ssd_service_us = cfg.cache.ssd_service_us;
    pool_config.materialize_payloads = false;  // synthetic payloads at scale
    MemoryPool pool(servers, pool_config);
    constexpr std::int64_t kContextNs = 1;
    pool.create_namespace(kContextNs, cfg.cache.context_quota_bytes);
    ContextCacheIndex index(&pool, kContextNs);

    const PlaneSpec& pool_plane = cfg.plane(cfg.cache.pool_plane);
    AccessContext access;
    access.plane = &pool_plane;
    access.cluster = &cfg.cluster;
    access.mechanism = Mechanism::SDMA;

    // --- workload ------------------------------------------------------------
    std::vector<Request> requests = generate_workload(cfg.workload);

    EventLoop loop;
    PlaneLedger ledger;

    std::vector<PrefillInstance> instances(
        static_cast<std::size_t>(std::max(1, cfg.deployment.prefill_instances)));
    for (std::size_t i = 0; i < instances.size(); ++i)
        instances[i].home_die =
            static_cast<int>(i) * cfg.deployment.prefill_dies_per_instance % cfg.cluster.total_dies();

    std::int64_t total_prompt_tokens = 0;
    std::int64_t total_output_tokens = 0;
    std::int64_t tokens_reused = 0;
    std::int64_t bytes_dram = 0, bytes_ssd = 0;
    std::int64_t blocks_total = 0, blocks_hit = 0;
    double ttft_sum_us = 0.0;
    std::int64_t prefill_finish_max = 0;
    std::int64_t e2e_finish_max = 0;

    for (const Request& req : requests) {
        total_prompt_tokens += req.prompt_len;
        total_output_tokens += req.output_len;

        auto blocks = make_blocks(req.token_hashes, cfg.cache.block_size_tokens,
                                  cfg.model.kv_bytes_per_token);
        std::vector<BlockKey> keys;
        keys.reserve(blocks.size());
        for (const auto& b : blocks) keys.push_back(b.key);

        ReuseRow row;
        row.request_id = req.id;
        row.blocks_total = static_cast<int>(blocks.size());

        // Earliest-free prefill instance (FIFO by arrival order).
        std::size_t best = 0;
        for (std::size_t i = 1; i < instances.size(); ++i)
            if (instances[i].free_at_us < instances[best].free_at_us) best = i;
        access.requester_die = instances[best].home_die;

        int hits = index.lookup_prefix(keys);
        double load_us = 0.0;
        for (int h = 0; h < hits; ++h) {
            AccessContext ctx = access;
            GetResult got = pool.get(kContextNs, keys[static_cast<std::size_t>(h)].combined, &ctx);
            if (!got.found) break;  // evicted between lookup and fetch
            load_us += got.latency_us;
            if (got.tier == Tier::DRAM)
                row.bytes_dram += blocks[static_cast<std::size_t>(h)].size_bytes;
            else
                row.bytes_ssd += blocks[static_cast<std::size_t>(h)].size_bytes;
            row.blocks_hit++;
        }
        row.tokens_reused = std::min<std::int64_t>(
            static_cast<std::int64_t>(row.blocks_hit) * cfg.cache.block_size_tokens, req.prompt_len);

        std::int64_t new_tokens = req.prompt_len - row.tokens_reused;
        double prefill_us = static_cast<double>(new_tokens) * prefill_us_per_token + load_us;

        std::int64_t start = std::max(req.arrival_time_us, instances[best].free_at_us);
        std::int64_t finish = start + static_cast<std::int64_t>(std::llround(prefill_us));
        instances[best].free_at_us = finish;

        // New blocks are stored asynchronously; no prefill critical-path time.
        index.store_blocks(keys, blocks);

        ttft_sum_us += static_cast<double>(finish - req.arrival_time_us);
        prefill_finish_max = std::max(prefill_finish_max, finish);

        std::int64_t decode_start = finish;
        if (cfg.cache.kv_transfers_enabled) {
            std::int64_t kv_bytes = req.prompt_len * cfg.model.kv_bytes_per_token;
            KvTransferPlan plan = schedule_kv_transfer(loop, ledger, req.id, kv_bytes,
                                                       cfg.plane("rdma"), finish);
            decode_start = plan.complete_us;
        }
        double iterations = static_cast<double>(req.output_len) /
                            cfg.mtp.expected_tokens_per_iteration();
        std::int64_t decode_finish =
            decode_start +
            static_cast<std::int64_t>(std::llround(iterations * decode.iteration_latency_us));
        e2e_finish_max = std::max(e2e_finish_max, decode_finish);

        tokens_reused += row.tokens_reused;
        blocks_total += row.blocks_total;
        blocks_hit += row.blocks_hit;
        bytes_dram += row.bytes_dram;
        bytes_ssd += row.bytes_ssd;
        report.reuse.push_back(row);
    }

    loop.run();

    // MTP economics at the configured acceptance probability; fixed substream
    // of the scenario seed keeps the empirical mean reproducible.
    MtpResult mtp = simulate_mtp(cfg.mtp, decode.iteration_latency_us, decode.iteration_latency_us,
                                 10000, hash_combine(cfg.seed, 0x6d7470ULL));

    double makespan_us = static_cast<double>(prefill_finish_max);
    std::int64_t n = cfg.workload.num_requests;

    report.add("requests", static_cast<double>(n), "count");
    report.add("total_prompt_tokens", static_cast<double>(total_prompt_tokens), "tokens");
    report.add("total_output_tokens", static_cast<double>(total_output_tokens), "tokens");
    report.add("prefill_makespan_ms", makespan_us / 1000.0, "ms");
    report.add("prefill_throughput_tokens_per_s",
               makespan_us > 0.0 ? static_cast<double>(total_prompt_tokens) / (makespan_us / 1e6)
                                 : 0.0,
               "tokens/s");
    report.add("ttft_ms_mean", ttft_sum_us / static_cast<double>(n) / 1000.0, "ms");
    report.add("tpot_ms", decode.tpot_ms, "ms");
    report.add("throughput_tokens_per_s_per_die", decode.throughput_tokens_per_s_per_die,
               "tokens/s");
    report.add("decode_iteration_us", decode.iteration_latency_us, "us");
    report.add("decode_per_layer_us", decode.per_layer_latency_us, "us");
    report.add("decode_layer_microbatch_us", layer_microbatch, "us");
    report.add("decode_layer_serial_us", layer_serial, "us");
    report.add("decode_microbatch_reduction_pct", (1.0 - layer_microbatch / layer_serial) * 100.0,
               "%");
    report.add("prefill_layer_microbatch_us", prefill_layer_mb, "us");
    report.add("prefill_layer_serial_us", prefill_layer_serial, "us");
    report.add("prefill_microbatch_reduction_pct",
               (1.0 - prefill_layer_mb / prefill_layer_serial) * 100.0, "%");
    report.add("dispatch_us", dispatch_us, "us");
    report.add("combine_us", combine_us, "us");
    report.add("mtp_tokens_per_iteration", mtp.empirical_tokens_per_iteration, "tokens");
    report.add("mtp_tokens_per_iteration_expected", mtp.expected_tokens_per_iteration, "tokens");
    report.add("reuse_block_hit_rate",
               blocks_total > 0 ? static_cast<double>(blocks_hit) / blocks_total : 0.0, "fraction");
    report.add("reuse_token_rate",
               total_prompt_tokens > 0
                   ? static_cast<double>(tokens_reused) / static_cast<double>(total_prompt_tokens)
                   : 0.0,
               "fraction");
    report.add("prefill_tokens_avoided", static_cast<double>(tokens_reused), "tokens");
    report.add("cache_bytes_dram", static_cast<double>(bytes_dram), "bytes");
    report.add("cache_bytes_ssd", static_cast<double>(bytes_ssd), "bytes");
    report.add("kv_rdma_bytes", static_cast<double>(ledger.rdma_bytes), "bytes");
    report.add("kv_ub_bytes", static_cast<double>(ledger.ub_bytes), "bytes");
    report.add("e2e_makespan_ms", static_cast<double>(e2e_finish_max) / 1000.0, "ms");

    std::int64_t pool_hits_dram = 0, pool_hits_ssd = 0, pool_misses = 0;
    report.pool = pool.stats();
    for (const auto& s : report.pool) {
        pool_hits_dram += s.dram_hits;
        pool_hits_ssd += s.ssd_hits;
        pool_misses += s.misses;
    }
    std::int64_t lookups = pool_hits_dram + pool_hits_ssd + pool_misses;
    report.add("pool_dram_hit_rate",
               lookups > 0 ? static_cast<double>(pool_hits_dram) / lookups : 0.0, "fraction");
    report.add("pool_ssd_hit_rate",
               lookups > 0 ? static_cast<double>(pool_hits_ssd) / lookups : 0.0, "fraction");

    report.trace_hash = loop.trace_hash();
    return report;
}

std::vector<MetricReport> sweep(const ScenarioConfig& base, const std::string& axis,
                                const std::vector<double>& values, bool parallel) {
    nlohmann::json base_json = config_to_json(base);
    if (!values.empty()) (void)apply_axis(base_json, axis, values.front());  // fail fast

    auto run_point = [&base_json, &axis](double value) {
        ScenarioConfig cfg = parse_config_json(apply_axis(base_json, axis, value));
        cfg.scenario_id += "/" + axis + "=" + std::to_string(value);
        MetricReport report = run_scenario(cfg);
        report.axis_value = value;
        return report;
    };

    std::vector<MetricReport> reports(values.size());
    if (parallel) {
        std::vector<std::future<MetricReport>> futures;
        futures.reserve(values.size());
        for (double v : values)
            futures.push_back(std::async(std::launch::async, run_point, v));
        for (std::size_t i = 0; i < futures.size(); ++i) reports[i] = futures[i].get();
    } else {
        for (std::size_t i = 0; i < values.size(); ++i) reports[i] = run_point(values[i]);
    }
    return reports;
}

std::string sweep_csv(const std::string& axis, const std::vector<MetricReport>& reports) {
    std::ostringstream out;
    out << "schema_version,axis,axis_value";
    std::vector<std::string> columns;
    std::set<std::string> seen;
    for (const auto& r : reports)
        for (const auto& row : r.rows)
            if (seen.insert(row.name).second) columns.push_back(row.name);
    for (const auto& c : columns) out << "," << c;
    out << "\n";
    for (const auto& r : reports) {
        out << r.schema_version << "," << axis << ",";
        if (r.axis_value) out << *r.axis_value;
        for (const auto& c : columns) {
            out << ",";
            if (r.has(c)) {
                std::ostringstream cell;
                cell.precision(10);
                cell << r.value(c);
                out << cell.str();
            }
        }
        out << "\n";
    }
    return out.str();
}

}  // namespace moesim
