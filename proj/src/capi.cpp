#include "moesim.h"

#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "core/config.hpp"
#include "core/matrix_io.hpp"
#include "core/prefill_hybrid.hpp"
#include "core/scenario.hpp"
#include "core/table_checks.hpp"

using namespace moesim;

struct moesim_config {
    ScenarioConfig cfg;
};

struct moesim_report {
    std::vector<MetricReport> reports;  // single runs hold exactly one
    std::string axis;
};

namespace {

thread_local std::string g_last_error;

moesim_status status_of(ErrorCode code) {
    switch (code) {
        case ErrorCode::Validation: return MOESIM_ERR_VALIDATION;
        case ErrorCode::Config: return MOESIM_ERR_CONFIG;
        case ErrorCode::Io: return MOESIM_ERR_IO;
        case ErrorCode::InvalidArgument: return MOESIM_ERR_INVALID_ARG;
        case ErrorCode::Capacity:
        case ErrorCode::Quota: return MOESIM_ERR_VALIDATION;
        case ErrorCode::Internal: return MOESIM_ERR_INTERNAL;
    }
    return MOESIM_ERR_INTERNAL;
}

template <typename F>
moesim_status guarded(F&& fn) {
    try {
        fn();
        return MOESIM_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return MOESIM_ERR_INTERNAL;
    }
}

char* dup_string(const std::string& s) {
    char* out = new char[s.size() + 1];
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

}  // namespace

extern "C" {

const char* moesim_version(void) { return "1.0.0"; }

const char* moesim_last_error(void) { return g_last_error.c_str(); }

moesim_status moesim_config_load(const char* path, moesim_config** out) {
    if (path == nullptr || out == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] { *out = new moesim_config{parse_config_file(path)}; });
}

moesim_status moesim_config_parse(const char* json_text, moesim_config** out) {
    if (json_text == nullptr || out == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] {
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(json_text);
        } catch (const nlohmann::json::exception& e) {
            throw_error(ErrorCode::Config, std::string("config parse error: ") + e.what());
        }
        *out = new moesim_config{parse_config_json(j)};
    });
}

moesim_status moesim_config_default(moesim_config** out) {
    if (out == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] { *out = new moesim_config{default_config()}; });
}

moesim_status moesim_config_dump(const moesim_config* cfg, char** json_out) {
    if (cfg == nullptr || json_out == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] { *json_out = dup_string(config_to_json(cfg->cfg).dump(2) + "\n"); });
}

void moesim_config_free(moesim_config* cfg) { delete cfg; }

moesim_status moesim_run(const moesim_config* cfg, moesim_report** out) {
    if (cfg == nullptr || out == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] {
        auto* report = new moesim_report;
        report->reports.push_back(run_scenario(cfg->cfg));
        *out = report;
    });
}

moesim_status moesim_sweep(const moesim_config* cfg, const char* axis, const double* values,
                           size_t num_values, int parallel, moesim_report** out) {
    if (cfg == nullptr || axis == nullptr || out == nullptr ||
        (values == nullptr && num_values > 0)) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] {
        auto* report = new moesim_report;
        report->axis = axis;
        report->reports = sweep(cfg->cfg, axis, {values, values + num_values}, parallel != 0);
        *out = report;
    });
}

moesim_status moesim_report_json(const moesim_report* report, char** json_out) {
    if (report == nullptr || json_out == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] {
        if (report->reports.size() == 1 && report->axis.empty()) {
            *json_out = dup_string(report->reports.front().to_json_text());
            return;
        }
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : report->reports) arr.push_back(r.to_json());
        *json_out = dup_string(arr.dump(2) + "\n");
    });
}

moesim_status moesim_report_csv(const moesim_report* report, char** csv_out) {
    if (report == nullptr || csv_out == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] {
        *csv_out = dup_string(sweep_csv(report->axis.empty() ? "none" : report->axis,
                                        report->reports));
    });
}

void moesim_report_free(moesim_report* report) { delete report; }

moesim_status moesim_pd_map(int prefill_tp, int decode_tp, int decode_dp, char** csv_out) {
    if (csv_out == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] {
        PdConnection conn = map_connections(prefill_tp, decode_tp, decode_dp);
        std::ostringstream out;
        out << "decode_dp_rank,decode_tp_rank,prefill_tp_rank\n";
        for (int dp = 0; dp < conn.decode_dp_size; ++dp)
            for (int tp = 0; tp < conn.decode_tp_size; ++tp)
                out << dp << "," << tp << "," << conn.lookup(dp, tp) << "\n";
        out << "\nprefill_tp_rank,decode_rank_count\n";
        auto load = conn.per_prefill_rank_load();
        for (std::size_t r = 0; r < load.size(); ++r) out << r << "," << load[r] << "\n";
        *csv_out = dup_string(out.str());
    });
}

moesim_status moesim_quantize_file(const char* matrix_path, const char* granularity,
                                   char** json_out) {
    if (matrix_path == nullptr || granularity == nullptr || json_out == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] {
        *json_out = dup_string(quantize_file_report(matrix_path, granularity).dump(2) + "\n");
    });
}

moesim_status moesim_calibrate_plane_csv(const char* csv_path, char** json_out) {
    if (csv_path == nullptr || json_out == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] {
        std::ifstream in(csv_path);
        if (!in) throw_error(ErrorCode::Io, std::string("calibration CSV not found: ") + csv_path);
        std::vector<EpMeasurement> rows;
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty() || line.front() == '#') continue;
            for (auto& c : line)
                if (c == ',') c = ' ';
            std::istringstream fields(line);
            EpMeasurement m;
            if (fields >> m.ep_degree >> m.latency_us >> m.bandwidth_gbps) rows.push_back(m);
        }
        CalibrationReport fit = calibrate_plane(rows);
        nlohmann::json j;
        j["startup_us"] = fit.startup_us;
        j["eff_bandwidth_gbps"] = fit.effective_bandwidth_gbps;
        j["ref_bytes_per_rank"] = fit.ref_bytes_per_rank;
        nlohmann::json preds = nlohmann::json::array();
        for (const auto& m : rows) {
            double predicted = fused_ep_latency_us(
                fit.plane, m.ep_degree, static_cast<std::int64_t>(fit.ref_bytes_per_rank));
            preds.push_back({{"ep_degree", m.ep_degree},
                             {"measured_us", m.latency_us},
                             {"predicted_us", predicted}});
        }
        j["predictions"] = preds;
        *json_out = dup_string(j.dump(2) + "\n");
    });
}

moesim_status moesim_validate_tables(const moesim_config* cfg_or_null, char** text_out,
                                     int* all_passed) {
    if (text_out == nullptr || all_passed == nullptr) {
        g_last_error = "null argument";
        return MOESIM_ERR_INVALID_ARG;
    }
    return guarded([&] {
        ScenarioConfig cfg = cfg_or_null != nullptr ? cfg_or_null->cfg : default_config();
        TableCheckReport report = validate_tables(cfg);
        *text_out = dup_string(report.to_text());
        *all_passed = report.all_passed() ? 1 : 0;
    });
}

void moesim_string_free(char* s) { delete[] s; }

}  // extern "C"
