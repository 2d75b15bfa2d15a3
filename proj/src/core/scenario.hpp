#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "context_cache.hpp"

namespace moesim {

struct MetricRow {
    std::string name;
    double value = 0.0;
    std::string unit;
};

struct MetricReport {
    int schema_version = 1;
    std::string scenario_id;
    std::optional<double> axis_value;
    std::vector<MetricRow> rows;
    std::vector<ReuseRow> reuse;
    std::vector<ServerStats> pool;
    std::uint64_t trace_hash = 0;

    void add(const std::string& name, double value, const std::string& unit);
    double value(const std::string& name) const;  // throws if absent
    bool has(const std::string& name) const;

    nlohmann::json to_json() const;
    std::string to_json_text() const;  // byte-stable for a given report
};

// End-to-end deterministic run: workload -> prefill with context-cache reuse
// -> RDMA KV handoff -> decode economics, with pool-backed caching.
MetricReport run_scenario(const ScenarioConfig& cfg);

// One report per axis value, in input order. `parallel` runs scenario points
// on separate threads; results are merged by index so the output is identical
// either way.
std::vector<MetricReport> sweep(const ScenarioConfig& base, const std::string& axis,
                                const std::vector<double>& values, bool parallel = false);

std::string sweep_csv(const std::string& axis, const std::vector<MetricReport>& reports);

}  // namespace moesim
