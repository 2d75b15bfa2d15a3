#pragma once

#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

#include "mempool.hpp"

namespace moesim {

// Chained block key: prefix_hash covers all preceding blocks, block_hash the
// block's own tokens, and combined is the single pool key. Two prompts with an
// identical token prefix produce identical key chains up to the divergence.
struct BlockKey {
    std::uint64_t prefix_hash = 0;
    std::uint64_t block_hash = 0;
    std::uint64_t combined = 0;
    bool operator==(const BlockKey&) const = default;
};

struct KVBlock {
    BlockKey key;
    int num_tokens = 0;  // == block_size except possibly the last block
    std::int64_t size_bytes = 0;
};

inline constexpr int kMinBlockSize = 128;
inline constexpr int kMaxBlockSize = 512;
inline constexpr std::uint64_t kPrefixChainSeed = 0x70726566ULL;

std::vector<BlockKey> split_into_blocks(std::span<const std::uint64_t> token_hashes,
                                        int block_size);

std::vector<KVBlock> make_blocks(std::span<const std::uint64_t> token_hashes, int block_size,
                                 std::int64_t kv_bytes_per_token);

enum class ModelKind { REASONING, NON_REASONING };
enum class StorePolicy { NONE, ALL, FINAL_RESPONSE_ONLY };

// Decode-phase storage rule: reasoning models skip decode-generated blocks
// unless approximate reuse is on, in which case only final-response blocks
// are kept.
StorePolicy decode_storage_policy(ModelKind model_kind, bool approx_reuse_enabled);

struct StoreReport {
    int stored = 0;
    int deduplicated = 0;
    int failed = 0;        // quota exhaustion; store is partial
    std::int64_t bytes_written = 0;
};

struct ReuseRow {
    std::int64_t request_id = 0;
    int blocks_total = 0;
    int blocks_hit = 0;
    std::int64_t tokens_reused = 0;
    std::int64_t bytes_dram = 0;
    std::int64_t bytes_ssd = 0;
};

// Prefix index over the pool's context-cache namespace. Lookups are read-only
// between mutations; stores go through the pool under `ns`.
class ContextCacheIndex {
public:
    ContextCacheIndex(MemoryPool* pool, std::int64_t ns) : pool_(pool), ns_(ns) {}

    // Length of the longest stored prefix of `block_keys`; stops at the first
    // miss. Entries whose pool object has been evicted are dropped lazily.
    int lookup_prefix(std::span<const BlockKey> block_keys);

    // Dedups against the index, then Puts new blocks. Storage is asynchronous
    // with respect to the prefill timeline: callers attribute zero critical-
    // path time to it.
    StoreReport store_blocks(std::span<const BlockKey> block_keys, std::span<const KVBlock> blocks);

    bool contains(const BlockKey& key) const { return known_.count(key.combined) != 0; }
    std::size_t size() const { return known_.size(); }
    std::int64_t ns() const { return ns_; }

private:
    MemoryPool* pool_;
    std::int64_t ns_;
    std::unordered_set<std::uint64_t> known_;
};

}  // namespace moesim
