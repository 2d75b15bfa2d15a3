#pragma once

#include <string>

#include <json.hpp>

#include "quantizer.hpp"

namespace moesim {

// Text matrix layout: a "rows cols" header line, then row-major values
// separated by whitespace. Lines starting with '#' are ignored.
RealMatrix read_matrix_file(const std::string& path);
void write_matrix_file(const std::string& path, const RealMatrix& m);

// Quantizes a matrix file and reports codes, scales, and the round-trip
// error bounds as JSON.
nlohmann::json quantize_file_report(const std::string& path, const std::string& granularity);

}  // namespace moesim
