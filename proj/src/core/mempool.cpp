#include "mempool.hpp"

#include <algorithm>

namespace moesim {

void HashRing::add_server(int server_id) {
    if (std::find(servers_.begin(), servers_.end(), server_id) != servers_.end())
        throw_error(ErrorCode::InvalidArgument, "hash ring: duplicate server id");
    servers_.push_back(server_id);
    std::uint64_t base = mix64(static_cast<std::uint64_t>(server_id) + 1);
    for (int v = 0; v < vnodes_per_server_; ++v) {
        std::uint64_t point = hash_combine(base, static_cast<std::uint64_t>(v));
        // Keep ring points unique; collisions are vanishingly rare but would
        // silently drop a vnode.
        while (points_.count(point) != 0) point = mix64(point);
        points_.emplace(point, server_id);
    }
}

void HashRing::remove_server(int server_id) {
    auto it = std::find(servers_.begin(), servers_.end(), server_id);
    if (it == servers_.end())
        throw_error(ErrorCode::InvalidArgument, "hash ring: unknown server id");
    servers_.erase(it);
    for (auto point = points_.begin(); point != points_.end();) {
        if (point->second == server_id)
            point = points_.erase(point);
        else
            ++point;
    }
}

int HashRing::lookup(std::uint64_t key) const {
    if (points_.empty()) throw_error(ErrorCode::InvalidArgument, "hash ring is empty");
    auto it = points_.lower_bound(key);
    if (it == points_.end()) it = points_.begin();  // wrap around
    return it->second;
}

void MemoryPool::LruTier::touch(const ObjectKey& k) {
    auto it = entries.find(k);
    order.splice(order.end(), order, it->second.order_it);
}

void MemoryPool::LruTier::insert(const ObjectKey& k, std::int64_t size, std::int64_t rounded,
                                 std::string payload) {
    auto it = entries.find(k);
    if (it != entries.end()) {
        used -= it->second.rounded;
        order.erase(it->second.order_it);
        entries.erase(it);
    }
    order.push_back(k);
    Entry entry;
    entry.size = size;
    entry.rounded = rounded;
    entry.payload = std::move(payload);
    entry.order_it = std::prev(order.end());
    entries.emplace(k, std::move(entry));
    used += rounded;
}

void MemoryPool::LruTier::remove(const ObjectKey& k) {
    auto it = entries.find(k);
    if (it == entries.end()) return;
    used -= it->second.rounded;
    order.erase(it->second.order_it);
    entries.erase(it);
}

std::optional<ObjectKey> MemoryPool::LruTier::victim(std::int64_t ns,
                                                     const ObjectKey& exclude) const {
    for (const auto& k : order)
        if (k.ns == ns && !(k == exclude)) return k;
    for (const auto& k : order)
        if (!(k == exclude)) return k;
    return std::nullopt;
}

void MemoryPool::LruTier::clear() {
    order.clear();
    entries.clear();
    used = 0;
}

MemoryPool::MemoryPool(const std::vector<PoolServerSpec>& servers, PoolConfig config)
    : config_(config), ring_(config.vnodes_per_server) {
    if (servers.empty()) throw_error(ErrorCode::InvalidArgument, "memory pool needs servers");
    if (config_.allocation_rounding <= 0)
        throw_error(ErrorCode::InvalidArgument, "allocation_rounding must be positive");
    for (const auto& spec : servers) {
        if (spec.dram_capacity < 0 || spec.ssd_capacity <= 0)
            throw_error(ErrorCode::InvalidArgument, "pool server capacities must be positive");
        Server server;
        server.spec = spec;
        server.dram.capacity = spec.dram_capacity;
        server.ssd.capacity = spec.ssd_capacity;
        server.stats.id = spec.id;
        servers_.emplace(spec.id, std::move(server));
        ring_.add_server(spec.id);
    }
}

void MemoryPool::create_namespace(std::int64_t ns, std::int64_t quota_bytes) {
    if (quota_bytes <= 0) throw_error(ErrorCode::Validation, "namespace quota must be positive");
    if (namespaces_.count(ns) != 0)
        throw_error(ErrorCode::InvalidArgument, "namespace already exists");
    namespaces_[ns] = quota_bytes;
    namespace_usage_[ns] = 0;
}

std::int64_t MemoryPool::namespace_usage(std::int64_t ns) const {
    auto it = namespace_usage_.find(ns);
    if (it == namespace_usage_.end()) throw_error(ErrorCode::InvalidArgument, "unknown namespace");
    return it->second;
}

std::int64_t MemoryPool::rounded_size(std::int64_t size) const {
    std::int64_t unit = config_.allocation_rounding;
    return (size + unit - 1) / unit * unit;
}

MemoryPool::Server& MemoryPool::owner_server(std::uint64_t key) {
    return servers_.at(ring_.lookup(mix64(key)));
}

double MemoryPool::access_latency(const Server& server, Tier tier, std::int64_t bytes,
                                  const AccessContext* ctx) const {
    double latency = tier == Tier::DRAM ? config_.dram_service_us : config_.ssd_service_us;
    if (ctx != nullptr && ctx->plane != nullptr && ctx->cluster != nullptr) {
        // The pool server id doubles as its node id; its "home die" is the
        // node's first die for intra/inter classification.
        int home_die = server.spec.id * ctx->cluster->dies_per_node();
        if (home_die != ctx->requester_die) {
            latency += estimate_transfer(ctx->requester_die, home_die, bytes, *ctx->plane,
                                         ctx->mechanism, *ctx->cluster)
                           .latency_us;
        }
    }
    return latency;
}

void MemoryPool::demote_from_dram(Server& server, const ObjectKey& k) {
    server.dram.remove(k);  // SSD copy persists; the object stays readable
    server.stats.demotions++;
}

void MemoryPool::evict_from_ssd(Server& server, const ObjectKey& k) {
    auto it = server.ssd.entries.find(k);
    if (it == server.ssd.entries.end()) return;
    namespace_usage_[k.ns] -= it->second.rounded;
    server.ssd.remove(k);
    server.dram.remove(k);  // without the persistent copy the object is gone
    server.stats.ssd_evictions++;
}

PutResult MemoryPool::put(std::int64_t ns, std::uint64_t key, std::int64_t size,
                          std::string_view payload, const AccessContext* ctx) {
    if (namespaces_.count(ns) == 0) throw_error(ErrorCode::InvalidArgument, "unknown namespace");
    if (size <= 0) throw_error(ErrorCode::Validation, "object size must be positive");
    if (config_.materialize_payloads && !payload.empty() &&
        static_cast<std::int64_t>(payload.size()) != size)
        throw_error(ErrorCode::Validation, "payload length must equal object size");

    ObjectKey k{ns, key};
    Server& server = owner_server(key);
    if (server.failed) throw_error(ErrorCode::InvalidArgument, "pool server is down");

    std::int64_t rounded = rounded_size(size);
    if (rounded > server.ssd.capacity)
        throw_error(ErrorCode::Capacity, "object exceeds SSD tier capacity");

    std::int64_t existing = 0;
    if (auto it = server.ssd.entries.find(k); it != server.ssd.entries.end())
        existing = it->second.rounded;
    if (namespace_usage_[ns] - existing + rounded > namespaces_[ns])
        throw_error(ErrorCode::Quota, "namespace quota exceeded");

    // Persistent copy first, then the hot copy. LRU victims come from the
    // writing namespace before any other.
    while (server.ssd.used - existing + rounded > server.ssd.capacity) {
        auto victim = server.ssd.victim(ns, k);
        if (!victim) break;
        evict_from_ssd(server, *victim);
    }
    namespace_usage_[ns] -= existing;
    std::string stored(config_.materialize_payloads ? payload : std::string_view{});
    server.ssd.insert(k, size, rounded, stored);
    namespace_usage_[ns] += rounded;

    if (rounded <= server.dram.capacity) {
        std::int64_t resident = 0;
        if (auto dit = server.dram.entries.find(k); dit != server.dram.entries.end())
            resident = dit->second.rounded;
        while (server.dram.used - resident + rounded > server.dram.capacity) {
            auto victim = server.dram.victim(ns, k);
            if (!victim) break;
            demote_from_dram(server, *victim);
        }
        server.dram.insert(k, size, rounded, std::move(stored));
    }

    server.stats.objects_dram = static_cast<std::int64_t>(server.dram.entries.size());
    server.stats.objects_ssd = static_cast<std::int64_t>(server.ssd.entries.size());

    PutResult result;
    result.latency_us = access_latency(server, Tier::SSD, size, ctx);
    return result;
}

GetResult MemoryPool::get(std::int64_t ns, std::uint64_t key, const AccessContext* ctx) {
    if (namespaces_.count(ns) == 0) throw_error(ErrorCode::InvalidArgument, "unknown namespace");
    ObjectKey k{ns, key};
    Server& server = owner_server(key);

    GetResult result;
    if (server.failed) {
        if (config_.fail_mode == FailMode::Error)
            throw_error(ErrorCode::InvalidArgument, "pool server is down");
        server.stats.misses++;
        return result;
    }

    if (auto it = server.dram.entries.find(k); it != server.dram.entries.end()) {
        result.found = true;
        result.tier = Tier::DRAM;
        result.size = it->second.size;
        result.payload = it->second.payload;
        server.dram.touch(k);
        server.ssd.touch(k);
        server.stats.dram_hits++;
        result.latency_us = access_latency(server, Tier::DRAM, result.size, ctx);
        return result;
    }
    if (auto it = server.ssd.entries.find(k); it != server.ssd.entries.end()) {
        result.found = true;
        result.tier = Tier::SSD;
        result.size = it->second.size;
        result.payload = it->second.payload;
        std::int64_t rounded = it->second.rounded;
        server.ssd.touch(k);
        server.stats.ssd_hits++;
        // Promote the hot copy, possibly demoting colder DRAM residents.
        if (rounded <= server.dram.capacity) {
            while (server.dram.used + rounded > server.dram.capacity) {
                auto victim = server.dram.victim(ns, k);
                if (!victim) break;
                demote_from_dram(server, *victim);
            }
            server.dram.insert(k, result.size, rounded, result.payload);
            server.stats.objects_dram = static_cast<std::int64_t>(server.dram.entries.size());
        }
        result.latency_us = access_latency(server, Tier::SSD, result.size, ctx);
        return result;
    }
    server.stats.misses++;
    return result;
}

bool MemoryPool::erase(std::int64_t ns, std::uint64_t key) {
    if (namespaces_.count(ns) == 0) throw_error(ErrorCode::InvalidArgument, "unknown namespace");
    ObjectKey k{ns, key};
    Server& server = owner_server(key);
    auto it = server.ssd.entries.find(k);
    bool found = it != server.ssd.entries.end() || server.dram.contains(k);
    if (it != server.ssd.entries.end()) {
        namespace_usage_[ns] -= it->second.rounded;
        server.ssd.remove(k);
    }
    server.dram.remove(k);
    server.stats.objects_dram = static_cast<std::int64_t>(server.dram.entries.size());
    server.stats.objects_ssd = static_cast<std::int64_t>(server.ssd.entries.size());
    return found;
}

bool MemoryPool::contains(std::int64_t ns, std::uint64_t key) const {
    ObjectKey k{ns, key};
    const Server& server = servers_.at(ring_.lookup(mix64(key)));
    if (server.failed) return false;
    return server.dram.contains(k) || server.ssd.contains(k);
}

void MemoryPool::fail_server(int server_id) {
    auto it = servers_.find(server_id);
    if (it == servers_.end()) throw_error(ErrorCode::InvalidArgument, "unknown server");
    it->second.failed = true;
    it->second.dram.clear();  // DRAM is volatile; the SSD tier survives
    it->second.stats.failed = true;
    it->second.stats.objects_dram = 0;
}

void MemoryPool::recover_server(int server_id) {
    auto it = servers_.find(server_id);
    if (it == servers_.end()) throw_error(ErrorCode::InvalidArgument, "unknown server");
    it->second.failed = false;
    it->second.stats.failed = false;
}

std::vector<ServerStats> MemoryPool::stats() const {
    std::vector<ServerStats> out;
    for (const auto& [id, server] : servers_) {
        ServerStats s = server.stats;
        s.dram_used = server.dram.used;
        s.ssd_used = server.ssd.used;
        s.objects_dram = static_cast<std::int64_t>(server.dram.entries.size());
        s.objects_ssd = static_cast<std::int64_t>(server.ssd.entries.size());
        out.push_back(s);
    }
    return out;
}

std::vector<ObjectKey> MemoryPool::tier_contents(int server_id, Tier tier) const {
    auto it = servers_.find(server_id);
    if (it == servers_.end()) throw_error(ErrorCode::InvalidArgument, "unknown server");
    const LruTier& t = tier == Tier::DRAM ? it->second.dram : it->second.ssd;
    return {t.order.begin(), t.order.end()};
}

double MemoryPool::aggregate_tier_bandwidth_gbps(Tier, double per_server_gbps) const {
    double total = 0.0;
    for (const auto& [id, server] : servers_)
        if (!server.failed) total += per_server_gbps;
    return total;
}

}  // namespace moesim
