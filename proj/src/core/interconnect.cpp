#include "interconnect.hpp"

#include <cmath>

namespace moesim {

void PlaneSpec::validate(const std::string& name) const {
    if (link_bandwidth_gbps <= 0.0)
        throw_error(ErrorCode::Validation, name + ": link_bandwidth must be positive");
    if (base_latency_inter_us < base_latency_intra_us)
        throw_error(ErrorCode::Validation, name + ": base_latency_inter must be >= base_latency_intra");
    if (inter_node_bw_penalty < 0.0 || inter_node_bw_penalty >= 1.0)
        throw_error(ErrorCode::Validation, name + ": inter_node_bw_penalty must lie in [0, 1)");
    if (sdma_startup_us < 0.0 || aiv_direct_startup_us < 0.0)
        throw_error(ErrorCode::Validation, name + ": startup costs must be nonnegative");
}

TransferEstimate estimate_transfer(int src_die, int dst_die, std::int64_t bytes,
                                   const PlaneSpec& plane, Mechanism mechanism,
                                   const ClusterSpec& cluster) {
    if (src_die < 0 || src_die >= cluster.total_dies() || dst_die < 0 ||
        dst_die >= cluster.total_dies())
        throw_error(ErrorCode::InvalidArgument, "estimate_transfer: unknown die identifier");
    if (bytes < 0) throw_error(ErrorCode::InvalidArgument, "estimate_transfer: negative byte count");
    if (src_die == dst_die && bytes != 0)
        throw_error(ErrorCode::InvalidArgument, "estimate_transfer: src == dst requires bytes == 0");

    bool inter = cluster.node_of_die(src_die) != cluster.node_of_die(dst_die);
    double bw = plane.link_bandwidth_gbps * (inter ? 1.0 - plane.inter_node_bw_penalty : 1.0);
    double base = inter ? plane.base_latency_inter_us : plane.base_latency_intra_us;

    TransferEstimate est;
    est.effective_bandwidth_gbps = bw;
    est.latency_us = plane.startup_us(mechanism) + base +
                     static_cast<double>(bytes) / bytes_per_us(bw);
    return est;
}

TransferEstimate estimate_collective(CollectiveKind kind, int participants,
                                     std::int64_t bytes_per_rank, const PlaneSpec& plane) {
    if (participants < 1)
        throw_error(ErrorCode::InvalidArgument, "estimate_collective: participants must be >= 1");
    if (bytes_per_rank < 0)
        throw_error(ErrorCode::InvalidArgument, "estimate_collective: negative byte count");

    TransferEstimate est;
    est.effective_bandwidth_gbps = plane.link_bandwidth_gbps;
    if (participants == 1) return est;

    double bw = bytes_per_us(plane.link_bandwidth_gbps);
    double p = static_cast<double>(participants);
    switch (kind) {
        case CollectiveKind::ALL_GATHER:
        case CollectiveKind::ALL_TO_ALL:
            est.latency_us = plane.sdma_startup_us +
                             (p - 1.0) * (static_cast<double>(bytes_per_rank) / p) / bw;
            break;
        case CollectiveKind::BROADCAST: {
            double rounds = std::ceil(std::log2(p));
            est.latency_us = rounds * (plane.sdma_startup_us +
                                       static_cast<double>(bytes_per_rank) / bw);
            break;
        }
    }
    return est;
}

double fused_ep_latency_us(const PlaneSpec& plane, int participants,
                           std::int64_t bytes_per_rank) {
    if (participants < 1)
        throw_error(ErrorCode::InvalidArgument, "fused_ep_latency: participants must be >= 1");
    return plane.aiv_direct_startup_us * std::log2(static_cast<double>(participants)) +
           static_cast<double>(bytes_per_rank) / bytes_per_us(plane.link_bandwidth_gbps);
}

CalibrationReport calibrate_plane(const std::vector<EpMeasurement>& measurements,
                                  const PlaneSpec& base) {
    if (measurements.size() < 2)
        throw_error(ErrorCode::InvalidArgument, "calibrate_plane: need at least 2 measurements");
    for (const auto& m : measurements) {
        if (m.ep_degree < 1 || m.latency_us <= 0.0 || m.bandwidth_gbps <= 0.0)
            throw_error(ErrorCode::InvalidArgument, "calibrate_plane: malformed measurement row");
    }
    bool all_same = true;
    for (std::size_t i = 1; i < measurements.size(); ++i)
        if (measurements[i].ep_degree != measurements[0].ep_degree) all_same = false;
    if (all_same)
        throw_error(ErrorCode::InvalidArgument,
                    "calibrate_plane: measurements are degenerate (identical EP degrees)");

    // Model: t_i = s * log2(P_i) + c, least squares in (s, c). The measured
    // per-rank volume t_i * bw_i converts c into an effective bandwidth.
    double sxx = 0.0, sx = 0.0, sxy = 0.0, sy = 0.0;
    double ref_bytes = 0.0;
    auto n = static_cast<double>(measurements.size());
    for (const auto& m : measurements) {
        double x = std::log2(static_cast<double>(m.ep_degree));
        sxx += x * x;
        sx += x;
        sxy += x * m.latency_us;
        sy += m.latency_us;
        ref_bytes += m.latency_us * bytes_per_us(m.bandwidth_gbps);
    }
    ref_bytes /= n;
    double det = n * sxx - sx * sx;
    double startup = (n * sxy - sx * sy) / det;
    double payload_time = (sy - startup * sx) / n;
    if (startup < 0.0 || payload_time <= 0.0)
        throw_error(ErrorCode::Validation, "calibrate_plane: fit produced a non-physical model");

    CalibrationReport report;
    report.startup_us = startup;
    report.ref_bytes_per_rank = ref_bytes;
    report.effective_bandwidth_gbps = ref_bytes / payload_time / 1000.0;
    report.plane = base;
    report.plane.aiv_direct_startup_us = startup;
    report.plane.link_bandwidth_gbps = report.effective_bandwidth_gbps;
    for (const auto& m : measurements) {
        double predicted = fused_ep_latency_us(report.plane, m.ep_degree,
                                               static_cast<std::int64_t>(ref_bytes));
        report.residuals_us.push_back(predicted - m.latency_us);
    }
    return report;
}

}  // namespace moesim
