// moesim command-line front end. Talks to the core exclusively through the
// C API in moesim.h, the same surface other language bindings would use.

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "moesim.h"

namespace {

int g_verbosity = 1;  // 0 quiet, 1 normal, 2 debug; MOESIM_LOG overrides

void init_verbosity() {
    const char* env = std::getenv("MOESIM_LOG");
    if (env == nullptr) return;
    std::string level(env);
    if (level == "quiet")
        g_verbosity = 0;
    else if (level == "debug")
        g_verbosity = 2;
}

void log_info(const std::string& message) {
    if (g_verbosity >= 1) std::cerr << message << "\n";
}

int exit_code_for(moesim_status status) {
    switch (status) {
        case MOESIM_OK: return 0;
        case MOESIM_ERR_VALIDATION: return 1;
        case MOESIM_ERR_CONFIG: return 2;
        case MOESIM_ERR_IO: return 2;
        default: return 1;
    }
}

int fail(moesim_status status) {
    std::cerr << "error: " << moesim_last_error() << "\n";
    return exit_code_for(status);
}

struct StringOut {
    char* value = nullptr;
    ~StringOut() { moesim_string_free(value); }
};

int emit(const char* text, const std::string& out_path) {
    if (out_path.empty()) {
        std::fputs(text, stdout);
        return 0;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "error: cannot write " << out_path << "\n";
        return 2;
    }
    out << text;
    log_info("wrote " + out_path);
    return 0;
}

struct ConfigHandle {
    moesim_config* cfg = nullptr;
    ~ConfigHandle() { moesim_config_free(cfg); }
};

struct ReportHandle {
    moesim_report* report = nullptr;
    ~ReportHandle() { moesim_report_free(report); }
};

}  // namespace

int main(int argc, char** argv) {
    init_verbosity();

    CLI::App app{"deterministic simulator for disaggregated MoE serving"};
    app.require_subcommand(1);

    // --- run -----------------------------------------------------------------
    std::string run_config, run_out;
    auto* run_cmd = app.add_subcommand("run", "run one scenario and emit a JSON report");
    run_cmd->add_option("config", run_config, "scenario config file")->required();
    run_cmd->add_option("--out", run_out, "output path (default stdout)");

    // --- sweep -----------------------------------------------------------------
    std::string sweep_config, sweep_axis, sweep_out;
    std::vector<double> sweep_values;
    bool sweep_parallel = false;
    auto* sweep_cmd = app.add_subcommand("sweep", "run a scenario per axis value, emit CSV");
    sweep_cmd->add_option("config", sweep_config, "scenario config file")->required();
    sweep_cmd->add_option("--axis", sweep_axis, "dotted config field, e.g. workload.reuse_rate")
        ->required();
    sweep_cmd->add_option("--values", sweep_values, "axis values")->required()->expected(-1);
    sweep_cmd->add_flag("--parallel", sweep_parallel, "run sweep points concurrently");
    sweep_cmd->add_option("--out", sweep_out, "output path (default stdout)");

    // --- plan pd-map -----------------------------------------------------------
    auto* plan_cmd = app.add_subcommand("plan", "planning helpers");
    plan_cmd->require_subcommand(1);
    int map_prefill_tp = 16, map_decode_tp = 4, map_decode_dp = 8;
    std::string map_out;
    auto* pdmap_cmd = plan_cmd->add_subcommand("pd-map", "print the prefill->decode connection map");
    pdmap_cmd->add_option("--prefill-tp", map_prefill_tp, "prefill TP size")->required();
    pdmap_cmd->add_option("--decode-tp", map_decode_tp, "decode TP size")->required();
    pdmap_cmd->add_option("--decode-dp", map_decode_dp, "decode DP size")->required();
    pdmap_cmd->add_option("--out", map_out, "output path (default stdout)");

    // --- quantize ----------------------------------------------------------------
    std::string quant_matrix, quant_granularity = "token", quant_out;
    auto* quant_cmd = app.add_subcommand("quantize", "quantize a matrix file, emit codes + scales");
    quant_cmd->add_option("matrix", quant_matrix, "matrix file ('rows cols' header, row-major values)")
        ->required();
    quant_cmd->add_option("--granularity", quant_granularity, "token | channel")
        ->check(CLI::IsMember({"token", "channel"}));
    quant_cmd->add_option("--out", quant_out, "output path (default stdout)");

    // --- validate tables ----------------------------------------------------------
    auto* validate_cmd = app.add_subcommand("validate", "validation suites");
    validate_cmd->require_subcommand(1);
    std::string validate_config;
    auto* tables_cmd =
        validate_cmd->add_subcommand("tables", "reproduce the closed-form reference tables");
    tables_cmd->add_option("--config", validate_config, "scenario config (defaults when omitted)");

    // --- calibrate plane ------------------------------------------------------------
    auto* calibrate_cmd = app.add_subcommand("calibrate", "calibration helpers");
    calibrate_cmd->require_subcommand(1);
    std::string calibrate_csv, calibrate_out;
    auto* plane_cmd = calibrate_cmd->add_subcommand(
        "plane", "fit startup + effective bandwidth to EP measurements");
    plane_cmd->add_option("csv", calibrate_csv, "CSV of ep_degree,latency_us,bandwidth_gbps")
        ->required();
    plane_cmd->add_option("--out", calibrate_out, "output path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    if (run_cmd->parsed()) {
        ConfigHandle cfg;
        moesim_status status = moesim_config_load(run_config.c_str(), &cfg.cfg);
        if (status != MOESIM_OK) return fail(status);
        ReportHandle report;
        status = moesim_run(cfg.cfg, &report.report);
        if (status != MOESIM_OK) return fail(status);
        StringOut json;
        status = moesim_report_json(report.report, &json.value);
        if (status != MOESIM_OK) return fail(status);
        return emit(json.value, run_out);
    }

    if (sweep_cmd->parsed()) {
        ConfigHandle cfg;
        moesim_status status = moesim_config_load(sweep_config.c_str(), &cfg.cfg);
        if (status != MOESIM_OK) return fail(status);
        ReportHandle report;
        status = moesim_sweep(cfg.cfg, sweep_axis.c_str(), sweep_values.data(),
                              sweep_values.size(), sweep_parallel ? 1 : 0, &report.report);
        if (status != MOESIM_OK) return fail(status);
        StringOut csv;
        status = moesim_report_csv(report.report, &csv.value);
        if (status != MOESIM_OK) return fail(status);
        return emit(csv.value, sweep_out);
    }

    if (pdmap_cmd->parsed()) {
        StringOut csv;
        moesim_status status =
            moesim_pd_map(map_prefill_tp, map_decode_tp, map_decode_dp, &csv.value);
        if (status != MOESIM_OK) return fail(status);
        return emit(csv.value, map_out);
    }

    if (quant_cmd->parsed()) {
        StringOut json;
        moesim_status status =
            moesim_quantize_file(quant_matrix.c_str(), quant_granularity.c_str(), &json.value);
        if (status != MOESIM_OK) return fail(status);
        return emit(json.value, quant_out);
    }

    if (tables_cmd->parsed()) {
        ConfigHandle cfg;
        if (!validate_config.empty()) {
            moesim_status status = moesim_config_load(validate_config.c_str(), &cfg.cfg);
            if (status != MOESIM_OK) return fail(status);
        }
        StringOut text;
        int all_passed = 0;
        moesim_status status = moesim_validate_tables(cfg.cfg, &text.value, &all_passed);
        if (status != MOESIM_OK) return fail(status);
        std::fputs(text.value, stdout);
        return all_passed ? 0 : 1;
    }

    if (plane_cmd->parsed()) {
        StringOut json;
        moesim_status status = moesim_calibrate_plane_csv(calibrate_csv.c_str(), &json.value);
        if (status != MOESIM_OK) return fail(status);
        return emit(json.value, calibrate_out);
    }

    return 0;
}
