#include "workload.hpp"

#include <algorithm>
#include <cmath>

#include "rng.hpp"

namespace moesim {

double LengthDist::mean() const {
    switch (kind) {
        case DistKind::Constant: return static_cast<double>(value);
        case DistKind::Uniform: return 0.5 * static_cast<double>(lo + hi);
        case DistKind::LogNormal:
            // Untruncated mean; callers keep truncation bounds wide enough
            // that the difference is inside the generator's 5% tolerance.
            return std::exp(log_mean + 0.5 * log_sigma * log_sigma);
    }
    return 0.0;
}

void LengthDist::validate(const std::string& name) const {
    switch (kind) {
        case DistKind::Constant:
            if (value <= 0) throw_error(ErrorCode::Validation, name + ": length must be positive");
            break;
        case DistKind::Uniform:
            if (lo <= 0 || hi < lo)
                throw_error(ErrorCode::Validation, name + ": uniform bounds require 0 < lo <= hi");
            break;
        case DistKind::LogNormal:
            if (log_sigma < 0.0)
                throw_error(ErrorCode::Validation, name + ": log_sigma must be nonnegative");
            if (lo <= 0 || hi < lo)
                throw_error(ErrorCode::Validation, name + ": truncation bounds require 0 < lo <= hi");
            break;
    }
}

ValidationReport validate_specs(const MoeModelSpec& model, const ClusterSpec& cluster,
                                int ep_degree) {
    ValidationReport report;
    auto require = [&](bool cond, const std::string& message) {
        if (!cond) report.violations.push_back(message);
    };

    require(model.num_layers > 0, "num_layers must be positive");
    require(model.hidden_dim > 0, "hidden_dim must be positive");
    require(model.num_router_experts > 0, "num_router_experts must be positive");
    require(model.top_k > 0, "top_k must be positive");
    require(model.top_k <= model.num_router_experts, "top_k must not exceed num_router_experts");
    require(model.num_shared_experts >= 0, "num_shared_experts must be nonnegative");
    require(model.total_params > 0, "total_params must be positive");
    require(model.active_params > 0, "active_params must be positive");
    require(model.active_params <= model.total_params, "active_params must not exceed total_params");
    require(model.bytes_per_param > 0, "bytes_per_param must be positive");
    require(model.kv_bytes_per_token > 0, "kv_bytes_per_token must be positive");

    require(cluster.num_nodes > 0, "num_nodes must be positive");
    require(cluster.npus_per_node > 0, "npus_per_node must be positive");
    require(cluster.dies_per_npu > 0, "dies_per_npu must be positive");
    require(cluster.aic_per_die > 0, "aic_per_die must be positive");
    require(cluster.aiv_per_die > 0, "aiv_per_die must be positive");

    if (ep_degree > 0 && cluster.num_nodes > 0 && cluster.npus_per_node > 0 &&
        cluster.dies_per_npu > 0 && ep_degree > cluster.total_dies()) {
        report.violations.push_back("placement infeasible: ep_degree " + std::to_string(ep_degree) +
                                    " exceeds " + std::to_string(cluster.total_dies()) + " dies");
    }
    return report;
}

namespace {

std::int64_t sample_length(const LengthDist& dist, Rng& rng) {
    switch (dist.kind) {
        case DistKind::Constant: return dist.value;
        case DistKind::Uniform: return rng.next_in(dist.lo, dist.hi);
        case DistKind::LogNormal: {
            // Resample a few times before clamping so the truncated mean stays
            // close to the analytic one.
            for (int attempt = 0; attempt < 8; ++attempt) {
                double v = std::exp(dist.log_mean + dist.log_sigma * rng.next_normal());
                auto len = static_cast<std::int64_t>(std::llround(v));
                if (len >= dist.lo && len <= dist.hi) return len;
            }
            double v = std::exp(dist.log_mean + dist.log_sigma * rng.next_normal());
            return std::clamp(static_cast<std::int64_t>(std::llround(v)), dist.lo, dist.hi);
        }
    }
    return 1;
}

}  // namespace

std::vector<Request> generate_workload(const WorkloadSpec& spec) {
    if (spec.num_requests <= 0)
        throw_error(ErrorCode::Validation, "num_requests must be positive");
    if (spec.reuse_rate < 0.0 || spec.reuse_rate > 1.0)
        throw_error(ErrorCode::Validation, "reuse_rate must lie in [0, 1]");
    if (spec.reuse_block_size <= 0)
        throw_error(ErrorCode::Validation, "reuse_block_size must be positive");
    spec.prompt_len.validate("prompt_len");
    spec.output_len.validate("output_len");
    if (spec.arrival.kind == ArrivalKind::Poisson && spec.arrival.rate_per_s <= 0.0)
        throw_error(ErrorCode::Validation, "poisson arrival requires rate_per_s > 0");

    Rng root(spec.seed);
    std::vector<Request> requests;
    requests.reserve(static_cast<std::size_t>(spec.num_requests));

    double clock_us = 0.0;
    for (std::int64_t i = 0; i < spec.num_requests; ++i) {
        Rng stream = root.fork(static_cast<std::uint64_t>(i));
        Request req;
        req.id = i;

        if (spec.arrival.kind == ArrivalKind::Poisson) {
            clock_us += stream.next_exponential(spec.arrival.rate_per_s / 1e6);
            req.arrival_time_us = static_cast<std::int64_t>(std::llround(clock_us));
        }

        req.prompt_len = sample_length(spec.prompt_len, stream);
        req.output_len = sample_length(spec.output_len, stream);

        // Reused requests replay the block-aligned prefix of an earlier prompt,
        // which makes the token reuse rate directly controllable.
        bool reuse = i > 0 && stream.bernoulli(spec.reuse_rate);
        if (reuse) {
            const Request& base =
                requests[stream.next_below(static_cast<std::uint64_t>(i))];
            std::int64_t shared = std::min(req.prompt_len, base.prompt_len);
            shared -= shared % spec.reuse_block_size;
            if (shared > 0) {
                req.reused_prefix_len = shared;
                req.reuse_source = base.id;
                req.token_hashes.assign(base.token_hashes.begin(),
                                        base.token_hashes.begin() + shared);
            }
        }
        for (std::int64_t pos = req.reused_prefix_len; pos < req.prompt_len; ++pos) {
            req.token_hashes.push_back(
                hash_combine(mix64(spec.seed ^ static_cast<std::uint64_t>(i + 1)),
                             static_cast<std::uint64_t>(pos)));
        }
        requests.push_back(std::move(req));
    }

    std::stable_sort(requests.begin(), requests.end(),
                     [](const Request& a, const Request& b) {
                         return a.arrival_time_us < b.arrival_time_us;
                     });
    return requests;
}

}  // namespace moesim
