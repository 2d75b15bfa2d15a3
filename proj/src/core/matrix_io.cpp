#include "matrix_io.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace moesim {

RealMatrix read_matrix_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw_error(ErrorCode::Io, "matrix file not found: " + path);

    std::string line;
    std::vector<double> numbers;
    while (std::getline(in, line)) {
        if (!line.empty() && line.front() == '#') continue;
        std::istringstream row(line);
        double v;
        while (row >> v) numbers.push_back(v);
    }
    if (numbers.size() < 2)
        throw_error(ErrorCode::Io, "matrix file needs a 'rows cols' header: " + path);

    RealMatrix m;
    m.rows = static_cast<int>(numbers[0]);
    m.cols = static_cast<int>(numbers[1]);
    if (m.rows <= 0 || m.cols <= 0)
        throw_error(ErrorCode::Io, "matrix header must be positive: " + path);
    if (numbers.size() - 2 != static_cast<std::size_t>(m.rows) * static_cast<std::size_t>(m.cols))
        throw_error(ErrorCode::Io, "matrix file value count does not match its header: " + path);
    m.values.assign(numbers.begin() + 2, numbers.end());
    m.validate();
    return m;
}

void write_matrix_file(const std::string& path, const RealMatrix& m) {
    std::ofstream out(path);
    if (!out) throw_error(ErrorCode::Io, "cannot write matrix file: " + path);
    out << m.rows << " " << m.cols << "\n";
    out.precision(17);
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) out << (c > 0 ? " " : "") << m.at(r, c);
        out << "\n";
    }
}

nlohmann::json quantize_file_report(const std::string& path, const std::string& granularity) {
    RealMatrix m = read_matrix_file(path);
    QuantizedTensor q;
    if (granularity == "token")
        q = quantize_per_token(m);
    else if (granularity == "channel")
        q = quantize_per_channel(m);
    else
        throw_error(ErrorCode::InvalidArgument, "granularity must be 'token' or 'channel'");

    double max_abs_err = 0.0;
    double max_scale = 0.0;
    bool bound_ok = true;
    for (int r = 0; r < m.rows; ++r) {
        for (int c = 0; c < m.cols; ++c) {
            double scale = granularity == "token" ? q.scales[static_cast<std::size_t>(r)]
                                                  : q.scales[static_cast<std::size_t>(c)];
            double err = std::fabs(q.dequant_at(r, c) - m.at(r, c));
            max_abs_err = std::max(max_abs_err, err);
            max_scale = std::max(max_scale, scale);
            if (err > scale / 2.0 + 1e-12) bound_ok = false;
        }
    }
    RealMatrix dq = q.dequantize();
    double rel = frobenius(m) > 0.0 ? frobenius_diff(dq, m) / frobenius(m) : 0.0;

    nlohmann::json j;
    j["rows"] = m.rows;
    j["cols"] = m.cols;
    j["granularity"] = granularity;
    nlohmann::json codes = nlohmann::json::array();
    for (auto code : q.codes) codes.push_back(static_cast<int>(code));
    j["codes"] = codes;
    j["scales"] = q.scales;
    j["error_report"] = {{"max_abs_error", max_abs_err},
                         {"max_scale", max_scale},
                         {"relative_frobenius_error", rel},
                         {"half_scale_bound_satisfied", bound_ok}};
    return j;
}

}  // namespace moesim
