#pragma once

#include <string>
#include <vector>

#include "config.hpp"

namespace moesim {

struct TableCheck {
    std::string name;
    double expected = 0.0;
    double actual = 0.0;
    std::string unit;
    double tolerance = 0.0;   // relative unless absolute is set
    bool absolute = false;
    bool passed = false;
};

struct TableCheckReport {
    std::vector<TableCheck> checks;
    bool all_passed() const;
    std::string to_text() const;  // one line per check, expected vs computed
};

// Closed-form reproduction suite: buffer sizing, model-caching table,
// connection mapping, speculative-token economics, microbatch overlap, and
// the two-point latency/plane calibrations with their interpolation checks.
TableCheckReport validate_tables(const ScenarioConfig& cfg);

}  // namespace moesim
