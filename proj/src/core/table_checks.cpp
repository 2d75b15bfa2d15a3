#include "table_checks.hpp"

#include <cmath>
#include <sstream>

#include "expert_parallel.hpp"
#include "model_cache.hpp"
#include "prefill_hybrid.hpp"

namespace moesim {

namespace {

void check_rel(TableCheckReport& report, const std::string& name, double expected, double actual,
               double rel_tol, const std::string& unit) {
    TableCheck c{name, expected, actual, unit, rel_tol, false, false};
    c.passed = std::fabs(actual - expected) <= rel_tol * std::fabs(expected);
    report.checks.push_back(c);
}

void check_abs(TableCheckReport& report, const std::string& name, double expected, double actual,
               double abs_tol, const std::string& unit) {
    TableCheck c{name, expected, actual, unit, abs_tol, true, false};
    c.passed = std::fabs(actual - expected) <= abs_tol;
    report.checks.push_back(c);
}

// Reference endpoint + interpolation rows for the fused EP operators:
// (ep_degree, latency_us, per-rank bandwidth GB/s) at a 128-token batch.
const std::vector<EpMeasurement> kDispatchRows = {
    {8, 116.0, 71.0}, {16, 131.0, 63.0},  {32, 133.0, 62.0},
    {64, 141.0, 58.0}, {128, 152.0, 54.0}, {256, 152.0, 54.0},
};
const std::vector<EpMeasurement> kCombineRows = {
    {8, 118.0, 131.0}, {16, 132.0, 117.0}, {32, 146.0, 105.0},
    {64, 150.0, 103.0}, {128, 150.0, 103.0}, {256, 149.0, 103.0},
};

void check_ep_fit(TableCheckReport& report, const std::string& op,
                  const std::vector<EpMeasurement>& rows, const PlaneSpec& base) {
    CalibrationReport fit = calibrate_plane({rows.front(), rows.back()}, base);
    auto bytes = static_cast<std::int64_t>(std::llround(fit.ref_bytes_per_rank));
    for (const auto& row : rows) {
        double predicted = fused_ep_latency_us(fit.plane, row.ep_degree, bytes);
        bool endpoint = row.ep_degree == rows.front().ep_degree ||
                        row.ep_degree == rows.back().ep_degree;
        check_rel(report, op + "_ep" + std::to_string(row.ep_degree) + "_us", row.latency_us,
                  predicted, endpoint ? 0.01 : 0.15, "us");
    }
}

}  // namespace

bool TableCheckReport::all_passed() const {
    for (const auto& c : checks)
        if (!c.passed) return false;
    return true;
}

std::string TableCheckReport::to_text() const {
    std::ostringstream out;
    for (const auto& c : checks) {
        out << (c.passed ? "PASS" : "FAIL") << "  " << c.name << ": expected " << c.expected << " "
            << c.unit << ", computed " << c.actual << " " << c.unit << " (tol "
            << (c.absolute ? "+/-" : "+/-") << c.tolerance << (c.absolute ? " abs" : " rel") << ")\n";
    }
    int passed = 0;
    for (const auto& c : checks) passed += c.passed ? 1 : 0;
    out << passed << "/" << checks.size() << " checks passed\n";
    return out.str();
}

TableCheckReport validate_tables(const ScenarioConfig& cfg) {
    TableCheckReport report;

    // Pre-allocated buffer arithmetic: EP320, 96-token local batch, top-8,
    // one expert per die. Exact to the byte (225 / 420 / 645 MiB).
    BufferPlan plan = plan_buffers(320, 96, 8, 1);
    check_abs(report, "dispatch_buffer_mib", 225.0,
              static_cast<double>(plan.dispatch_buffer_bytes) / (1 << 20), 0.0005, "MiB");
    check_abs(report, "combine_buffer_mib", 420.0,
              static_cast<double>(plan.combine_buffer_bytes) / (1 << 20), 0.0005, "MiB");
    check_abs(report, "total_buffer_mib", 645.0,
              static_cast<double>(plan.total_bytes()) / (1 << 20), 0.0005, "MiB");

    // Model caching table: cold/warm starts, DRAM overhead, hit rates, and
    // average switch latency under the three strategies.
    ModelBlockSet model = ModelBlockSet::make("table-model", 1, cfg.model_cache.model_total_bytes,
                                              cfg.model_cache.model_block_bytes);
    LoadScenario pooled;
    pooled.strategy = LoadStrategy::EMS_POOL;
    pooled.num_instances = cfg.model_cache.num_instances;
    pooled.obs_bandwidth_gbps = cfg.model_cache.obs_bandwidth_gbps;
    pooled.obs_efficiency = cfg.model_cache.obs_efficiency;
    pooled.num_active_models = cfg.model_cache.num_active_models;
    LoadScenario no_cache = pooled;
    no_cache.strategy = LoadStrategy::NO_CACHE;
    LoadScenario local = pooled;
    local.strategy = LoadStrategy::LOCAL_DRAM;

    double cold_pool = cold_start_latency_s(pooled, model);
    double cold_none = cold_start_latency_s(no_cache, model);
    double cold_local = cold_start_latency_s(local, model);
    check_rel(report, "cold_start_pooled_s", 320.0, cold_pool, 0.01, "s");
    check_rel(report, "cold_start_no_cache_s", 2560.0, cold_none, 0.01, "s");
    check_rel(report, "cold_start_local_dram_s", 2560.0, cold_local, 0.01, "s");
    check_abs(report, "warm_start_s", 5.0, cfg.model_cache.warm_load_latency_s, 1e-9, "s");

    check_abs(report, "dram_overhead_no_cache", 0.0, dram_overhead_x(LoadStrategy::NO_CACHE, 8),
              1e-12, "x");
    check_abs(report, "dram_overhead_local", 8.0, dram_overhead_x(LoadStrategy::LOCAL_DRAM, 8),
              1e-12, "x");
    check_abs(report, "dram_overhead_pooled", 1.0, dram_overhead_x(LoadStrategy::EMS_POOL, 8),
              1e-12, "x");

    double hit_none = switch_hit_rate(LoadStrategy::NO_CACHE, 8, 8);
    double hit_local = switch_hit_rate(LoadStrategy::LOCAL_DRAM, 8, 8);
    double hit_pool = switch_hit_rate(LoadStrategy::EMS_POOL, 8, 8);
    check_abs(report, "switch_hit_rate_no_cache", 0.0, hit_none, 1e-12, "fraction");
    check_abs(report, "switch_hit_rate_local", 0.125, hit_local, 1e-12, "fraction");
    check_abs(report, "switch_hit_rate_pooled", 1.0, hit_pool, 1e-12, "fraction");

    double warm = cfg.model_cache.warm_load_latency_s;
    check_rel(report, "avg_switch_local_s", 281.0, avg_switch_latency_s(hit_local, warm, cold_pool),
              0.01, "s");
    check_abs(report, "avg_switch_local_arith_s", 280.625, avg_switch_latency_s(0.125, 5.0, 320.0),
              1e-9, "s");
    check_rel(report, "avg_switch_no_cache_s", 320.0, avg_switch_latency_s(hit_none, warm, cold_pool),
              0.01, "s");
    check_abs(report, "avg_switch_pooled_s", 5.0, avg_switch_latency_s(hit_pool, warm, cold_pool),
              1e-9, "s");

    // Deterministic prefill->decode connection mapping.
    PdConnection conn = map_connections(16, 4, 8);
    check_abs(report, "pd_map_spot_dp5_tp3", 11.0, static_cast<double>(conn.lookup(5, 3)), 0.0,
              "rank");
    auto load = conn.per_prefill_rank_load();
    int uniform = load.front();
    bool balanced = true;
    for (int l : load) balanced = balanced && l == uniform;
    check_abs(report, "pd_map_16_4_8_uniform", 1.0, balanced ? 1.0 : 0.0, 0.0, "bool");
    PdConnection wide = map_connections(32, 4, 32);
    auto wide_load = wide.per_prefill_rank_load();
    bool wide_balanced = true;
    for (int l : wide_load) wide_balanced = wide_balanced && l == wide_load.front();
    check_abs(report, "pd_map_32_4_32_uniform", 1.0, wide_balanced ? 1.0 : 0.0, 0.0, "bool");

    // Speculative-token economics: empirical tokens/iteration and the derived
    // throughput ratio at the measured 874 -> 1260 us iteration latencies.
    MtpConfig mtp;
    mtp.k = 1;
    mtp.accept_prob = 0.70;
    MtpResult mtp_result = simulate_mtp(mtp, 874.0, 1260.0, 10000, 20250612);
    check_abs(report, "mtp_tokens_per_iteration", 1.7, mtp_result.empirical_tokens_per_iteration,
              0.02, "tokens");
    check_abs(report, "mtp_throughput_ratio", 1.179, mtp_result.throughput_ratio, 0.001, "ratio");

    // Microbatch overlap: the max-law on two 600 us streams, then the shipped
    // calibrated stage tables against the ablation reductions.
    DecodePipelineSpec even;
    even.stream0 = {16, 32, {{"attn", 600.0, StageKind::Comm}}};
    even.stream1 = {8, 16, {{"moe", 600.0, StageKind::Comm}}};
    check_abs(report, "overlap_two_600us_streams_us", 600.0,
              decode_layer_latency_us(even, true), 1e-9, "us");

    double mb = decode_layer_latency_us(cfg.pipeline.decode, true);
    double serial = decode_layer_latency_us(cfg.pipeline.decode, false);
    check_abs(report, "decode_microbatch_reduction_pct", 10.0, (1.0 - mb / serial) * 100.0, 3.0,
              "%");
    double pre_mb = prefill_layer_latency_us(cfg.pipeline.prefill, true);
    double pre_serial = prefill_layer_latency_us(cfg.pipeline.prefill, false);
    check_abs(report, "prefill_microbatch_reduction_pct", 24.0,
              (1.0 - pre_mb / pre_serial) * 100.0, 4.0, "%");

    // Decode latency model: calibrate on the batch-96/batch-8 rows, predict
    // the batch-24 row, and reproduce the batch-96 throughput.
    DecodeLatencyModel decode_model = calibrate_decode_model(
        cfg.decode_calibration.anchor_a, cfg.decode_calibration.anchor_b,
        cfg.mtp.expected_tokens_per_iteration(), cfg.model.num_layers,
        cfg.decode_calibration.iteration_overhead_us);
    DecodeIterationResult at24 = tpot_and_throughput(24, decode_model, cfg.mtp);
    check_rel(report, "tpot_batch24_ms", 24.6, at24.tpot_ms, 0.20, "ms");
    check_rel(report, "throughput_batch24_tokens_per_s", 974.0,
              at24.throughput_tokens_per_s_per_die, 0.20, "tokens/s");
    DecodeIterationResult at96 = tpot_and_throughput(96, decode_model, cfg.mtp);
    check_rel(report, "tpot_batch96_ms", 49.4, at96.tpot_ms, 0.005, "ms");
    check_rel(report, "throughput_batch96_tokens_per_s", 1943.0,
              at96.throughput_tokens_per_s_per_die, 0.005, "tokens/s");
    DecodeIterationResult at8 = tpot_and_throughput(8, decode_model, cfg.mtp);
    check_rel(report, "tpot_batch8_ms", 14.9, at8.tpot_ms, 0.005, "ms");

    // Plane calibration against the reference EP endpoint rows, interpolating
    // the intermediate degrees within +/-15%.
    check_ep_fit(report, "dispatch", kDispatchRows, cfg.plane("ub"));
    check_ep_fit(report, "combine", kCombineRows, cfg.plane("ub"));

    return report;
}

}  // namespace moesim
