#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "error.hpp"
#include "workload.hpp"

namespace moesim {

enum class PlaneKind { UB, RDMA, VPC };
enum class Mechanism { SDMA, AIV_DIRECT };
enum class CollectiveKind { ALL_GATHER, ALL_TO_ALL, BROADCAST };

struct PlaneSpec {
    PlaneKind kind = PlaneKind::UB;
    double link_bandwidth_gbps = 150.0;  // unidirectional, per die
    double base_latency_intra_us = 0.5;
    double base_latency_inter_us = 1.0;  // under 1us above intra on the scale-up fabric
    double inter_node_bw_penalty = 0.03;
    double sdma_startup_us = 10.0;
    double aiv_direct_startup_us = 0.8;

    void validate(const std::string& name) const;
    double startup_us(Mechanism mech) const {
        return mech == Mechanism::SDMA ? sdma_startup_us : aiv_direct_startup_us;
    }
};

struct TransferEstimate {
    double latency_us = 0.0;
    double effective_bandwidth_gbps = 0.0;  // payload-term bandwidth for the route
};

// 1 GB/s == 1000 bytes/us throughout.
inline double bytes_per_us(double gbps) { return gbps * 1000.0; }

// Point-to-point cost: startup + base latency + payload time. The only
// topology distinction is intra- vs inter-node membership of the two dies.
TransferEstimate estimate_transfer(int src_die, int dst_die, std::int64_t bytes,
                                   const PlaneSpec& plane, Mechanism mechanism,
                                   const ClusterSpec& cluster);

// Pairwise-exchange model for ALL_GATHER / ALL_TO_ALL:
//   latency = startup + (P - 1) * (bytes_per_rank / P) / bandwidth
// BROADCAST uses a binary tree: ceil(log2 P) * (startup + bytes / bandwidth).
// A single participant always costs zero.
TransferEstimate estimate_collective(CollectiveKind kind, int participants,
                                     std::int64_t bytes_per_rank, const PlaneSpec& plane);

// Fused expert-parallel all-to-all (dispatch/combine) latency law:
//   latency(P, B) = startup * log2(P) + B / bandwidth
// with a log-phase startup term. The pair (startup, bandwidth) is what
// calibrate_plane fits; it lands in aiv_direct_startup_us / link_bandwidth_gbps
// of the returned spec.
double fused_ep_latency_us(const PlaneSpec& plane, int participants,
                           std::int64_t bytes_per_rank);

struct EpMeasurement {
    int ep_degree = 0;
    double latency_us = 0.0;
    double bandwidth_gbps = 0.0;  // achieved per-rank bandwidth
};

struct CalibrationReport {
    PlaneSpec plane;                 // fitted startup + effective bandwidth
    double startup_us = 0.0;
    double effective_bandwidth_gbps = 0.0;
    double ref_bytes_per_rank = 0.0; // mean measured per-rank volume
    std::vector<double> residuals_us;
};

// Least-squares fit of (startup, effective bandwidth) against the fused-EP
// latency law. Needs >= 2 distinct EP degrees; with exactly two measurements
// the fit passes through both endpoints.
CalibrationReport calibrate_plane(const std::vector<EpMeasurement>& measurements,
                                  const PlaneSpec& base = PlaneSpec{});

}  // namespace moesim
