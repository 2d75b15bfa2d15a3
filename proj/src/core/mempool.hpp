#pragma once

#include <cstdint>
#include <list>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "error.hpp"
#include "interconnect.hpp"
#include "rng.hpp"

namespace moesim {

// Consistent-hash ring with virtual nodes. Placement is a pure function of
// the documented 64-bit hash, so layouts replay identically everywhere.
class HashRing {
public:
    explicit HashRing(int vnodes_per_server = 128) : vnodes_per_server_(vnodes_per_server) {
        if (vnodes_per_server <= 0)
            throw_error(ErrorCode::InvalidArgument, "vnodes_per_server must be positive");
    }

    void add_server(int server_id);
    void remove_server(int server_id);
    bool empty() const { return points_.empty(); }
    int vnodes_per_server() const { return vnodes_per_server_; }
    const std::vector<int>& servers() const { return servers_; }

    // Owner of the first ring point clockwise from hash(key).
    int lookup(std::uint64_t key) const;

private:
    int vnodes_per_server_;
    std::vector<int> servers_;
    std::map<std::uint64_t, int> points_;  // ring position -> server id
};

struct ObjectKey {
    std::int64_t ns = 0;
    std::uint64_t key = 0;
    bool operator==(const ObjectKey&) const = default;
};

struct ObjectKeyHash {
    std::size_t operator()(const ObjectKey& k) const {
        return static_cast<std::size_t>(hash_combine(static_cast<std::uint64_t>(k.ns), k.key));
    }
};

enum class Tier { DRAM, SSD };
enum class FailMode { Miss, Error };

struct PoolServerSpec {
    int id = 0;
    std::int64_t dram_capacity = 0;
    std::int64_t ssd_capacity = 0;
};

struct PoolConfig {
    int vnodes_per_server = 128;
    std::int64_t allocation_rounding = 2LL << 20;  // huge-page-style accounting unit
    double dram_service_us = 2.0;
    double ssd_service_us = 150.0;
    bool materialize_payloads = true;
    FailMode fail_mode = FailMode::Miss;
};

struct GetResult {
    bool found = false;
    Tier tier = Tier::DRAM;
    std::int64_t size = 0;
    std::string payload;  // empty in synthetic mode
    double latency_us = 0.0;
};

struct PutResult {
    double latency_us = 0.0;
};

struct ServerStats {
    int id = 0;
    bool failed = false;
    std::int64_t dram_used = 0;
    std::int64_t ssd_used = 0;
    std::int64_t objects_dram = 0;
    std::int64_t objects_ssd = 0;
    std::int64_t dram_hits = 0;
    std::int64_t ssd_hits = 0;
    std::int64_t misses = 0;
    std::int64_t demotions = 0;
    std::int64_t ssd_evictions = 0;
};

// Remote-access parameters for latency composition; optional, pure calculators
// still work without it.
struct AccessContext {
    const PlaneSpec* plane = nullptr;
    const ClusterSpec* cluster = nullptr;
    int requester_die = 0;
    Mechanism mechanism = Mechanism::SDMA;
};

// Disaggregated memory pool: one logical state machine, mutations serialized
// by the caller. Every object lives persistently in its owner's SSD tier with
// an optional hot copy in DRAM; both tiers run LRU with namespace-scoped
// victim selection (cross-namespace eviction only on per-server overflow).
class MemoryPool {
public:
    MemoryPool(const std::vector<PoolServerSpec>& servers, PoolConfig config = {});

    void create_namespace(std::int64_t ns, std::int64_t quota_bytes);
    bool has_namespace(std::int64_t ns) const { return namespaces_.count(ns) != 0; }
    std::int64_t namespace_usage(std::int64_t ns) const;

    PutResult put(std::int64_t ns, std::uint64_t key, std::int64_t size,
                  std::string_view payload = {}, const AccessContext* ctx = nullptr);
    GetResult get(std::int64_t ns, std::uint64_t key, const AccessContext* ctx = nullptr);
    bool erase(std::int64_t ns, std::uint64_t key);
    // Presence probe; does not refresh recency.
    bool contains(std::int64_t ns, std::uint64_t key) const;

    void fail_server(int server_id);
    void recover_server(int server_id);

    int owner_of(std::uint64_t key) const { return ring_.lookup(mix64(key)); }
    const HashRing& ring() const { return ring_; }
    std::vector<ServerStats> stats() const;

    // Tier snapshots for oracle-equivalence tests: keys in recency order
    // (least recent first).
    std::vector<ObjectKey> tier_contents(int server_id, Tier tier) const;

    double aggregate_tier_bandwidth_gbps(Tier tier, double per_server_gbps) const;

private:
    struct Entry {
        std::int64_t size = 0;
        std::int64_t rounded = 0;
        std::string payload;
        std::list<ObjectKey>::iterator order_it;
    };

    struct LruTier {
        std::int64_t capacity = 0;
        std::int64_t used = 0;
        std::list<ObjectKey> order;  // front = least recently used
        std::unordered_map<ObjectKey, Entry, ObjectKeyHash> entries;

        bool contains(const ObjectKey& k) const { return entries.count(k) != 0; }
        void touch(const ObjectKey& k);
        void insert(const ObjectKey& k, std::int64_t size, std::int64_t rounded,
                    std::string payload);
        void remove(const ObjectKey& k);
        // LRU victim, preferring objects of `ns`; falls back to any namespace.
        // Never selects `exclude` (the object being written).
        std::optional<ObjectKey> victim(std::int64_t ns, const ObjectKey& exclude) const;
        void clear();
    };

    struct Server {
        PoolServerSpec spec;
        bool failed = false;
        LruTier dram;
        LruTier ssd;
        ServerStats stats;
    };

    std::int64_t rounded_size(std::int64_t size) const;
    Server& owner_server(std::uint64_t key);
    double access_latency(const Server& server, Tier tier, std::int64_t bytes,
                          const AccessContext* ctx) const;
    void demote_from_dram(Server& server, const ObjectKey& k);
    void evict_from_ssd(Server& server, const ObjectKey& k);

    PoolConfig config_;
    HashRing ring_;
    std::map<int, Server> servers_;
    std::map<std::int64_t, std::int64_t> namespaces_;       // ns -> quota
    std::map<std::int64_t, std::int64_t> namespace_usage_;  // ns -> rounded SSD bytes
};

}  // namespace moesim
