#pragma once

// Brute-force reference model of the pool's tiering policy, kept deliberately
// dumb: plain vectors, linear scans, and the documented rules only. Used to
// check the real pool's tier contents op-by-op.

#include <algorithm>
#include <cstdint>
#include <optional>
#include <vector>

struct RefObject {
    std::int64_t ns = 0;
    std::uint64_t key = 0;
    std::int64_t rounded = 0;
};

struct RefTier {
    std::int64_t capacity = 0;
    std::vector<RefObject> order;  // least recently used first

    bool contains(std::int64_t ns, std::uint64_t key) const {
        for (const auto& o : order)
            if (o.ns == ns && o.key == key) return true;
        return false;
    }
    std::int64_t used() const {
        std::int64_t total = 0;
        for (const auto& o : order) total += o.rounded;
        return total;
    }
    std::int64_t rounded_of(std::int64_t ns, std::uint64_t key) const {
        for (const auto& o : order)
            if (o.ns == ns && o.key == key) return o.rounded;
        return 0;
    }
    void remove(std::int64_t ns, std::uint64_t key) {
        for (std::size_t i = 0; i < order.size(); ++i) {
            if (order[i].ns == ns && order[i].key == key) {
                order.erase(order.begin() + static_cast<std::ptrdiff_t>(i));
                return;
            }
        }
    }
    void insert_mru(std::int64_t ns, std::uint64_t key, std::int64_t rounded) {
        remove(ns, key);
        order.push_back({ns, key, rounded});
    }
    void touch(std::int64_t ns, std::uint64_t key) {
        std::int64_t rounded = rounded_of(ns, key);
        if (rounded == 0 && !contains(ns, key)) return;
        remove(ns, key);
        order.push_back({ns, key, rounded});
    }
    // LRU victim preferring `ns`, never `exclude_key` of that namespace.
    std::optional<RefObject> victim(std::int64_t ns, std::uint64_t exclude_key) const {
        for (const auto& o : order)
            if (o.ns == ns && o.key != exclude_key) return o;
        for (const auto& o : order)
            if (!(o.ns == ns && o.key == exclude_key)) return o;
        return std::nullopt;
    }
};

// Single-server reference pool.
struct RefPool {
    std::int64_t rounding = 1;
    RefTier dram;
    RefTier ssd;

    std::int64_t rounded(std::int64_t size) const {
        return (size + rounding - 1) / rounding * rounding;
    }

    void put(std::int64_t ns, std::uint64_t key, std::int64_t size) {
        std::int64_t r = rounded(size);
        std::int64_t existing = ssd.rounded_of(ns, key);
        while (ssd.used() - existing + r > ssd.capacity) {
            auto victim = ssd.victim(ns, key);
            if (!victim) break;
            ssd.remove(victim->ns, victim->key);
            dram.remove(victim->ns, victim->key);  // evicted objects vanish entirely
        }
        ssd.insert_mru(ns, key, r);
        if (r <= dram.capacity) {
            std::int64_t resident = dram.rounded_of(ns, key);
            while (dram.used() - resident + r > dram.capacity) {
                auto victim = dram.victim(ns, key);
                if (!victim) break;
                dram.remove(victim->ns, victim->key);  // demotion: SSD copy persists
            }
            dram.insert_mru(ns, key, r);
        }
    }

    // Returns true on a hit (either tier).
    bool get(std::int64_t ns, std::uint64_t key) {
        if (dram.contains(ns, key)) {
            dram.touch(ns, key);
            ssd.touch(ns, key);
            return true;
        }
        if (ssd.contains(ns, key)) {
            std::int64_t r = ssd.rounded_of(ns, key);
            ssd.touch(ns, key);
            if (r <= dram.capacity) {
                while (dram.used() + r > dram.capacity) {
                    auto victim = dram.victim(ns, key);
                    if (!victim) break;
                    dram.remove(victim->ns, victim->key);
                }
                dram.insert_mru(ns, key, r);
            }
            return true;
        }
        return false;
    }

    void erase(std::int64_t ns, std::uint64_t key) {
        dram.remove(ns, key);
        ssd.remove(ns, key);
    }
};
