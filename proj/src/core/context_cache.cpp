#include "context_cache.hpp"

#include "rng.hpp"

namespace moesim {

std::vector<BlockKey> split_into_blocks(std::span<const std::uint64_t> token_hashes,
                                        int block_size) {
    if (token_hashes.empty())
        throw_error(ErrorCode::InvalidArgument, "split_into_blocks: empty token list");
    if (block_size < kMinBlockSize || block_size > kMaxBlockSize)
        throw_error(ErrorCode::InvalidArgument, "split_into_blocks: block_size out of range");

    std::vector<BlockKey> keys;
    keys.reserve((token_hashes.size() + block_size - 1) / block_size);
    std::uint64_t prefix = kPrefixChainSeed;
    for (std::size_t start = 0; start < token_hashes.size();
         start += static_cast<std::size_t>(block_size)) {
        std::size_t end = std::min(token_hashes.size(), start + static_cast<std::size_t>(block_size));
        std::uint64_t block_hash = mix64(static_cast<std::uint64_t>(end - start));
        for (std::size_t i = start; i < end; ++i) block_hash = hash_combine(block_hash, token_hashes[i]);

        BlockKey key;
        key.prefix_hash = prefix;
        key.block_hash = block_hash;
        key.combined = hash_combine(prefix, block_hash);
        keys.push_back(key);

        prefix = hash_combine(prefix, block_hash);
    }
    return keys;
}

std::vector<KVBlock> make_blocks(std::span<const std::uint64_t> token_hashes, int block_size,
                                 std::int64_t kv_bytes_per_token) {
    auto keys = split_into_blocks(token_hashes, block_size);
    std::vector<KVBlock> blocks;
    blocks.reserve(keys.size());
    std::size_t remaining = token_hashes.size();
    for (const auto& key : keys) {
        KVBlock block;
        block.key = key;
        block.num_tokens = static_cast<int>(std::min<std::size_t>(remaining, block_size));
        block.size_bytes = static_cast<std::int64_t>(block.num_tokens) * kv_bytes_per_token;
        blocks.push_back(block);
        remaining -= static_cast<std::size_t>(block.num_tokens);
    }
    return blocks;
}

StorePolicy decode_storage_policy(ModelKind model_kind, bool approx_reuse_enabled) {
    if (model_kind == ModelKind::NON_REASONING) return StorePolicy::ALL;
    return approx_reuse_enabled ? StorePolicy::FINAL_RESPONSE_ONLY : StorePolicy::NONE;
}

int ContextCacheIndex::lookup_prefix(std::span<const BlockKey> block_keys) {
    int hits = 0;
    for (const auto& key : block_keys) {
        auto it = known_.find(key.combined);
        if (it == known_.end()) break;
        if (!pool_->contains(ns_, key.combined)) {
            known_.erase(it);  // evicted underneath us
            break;
        }
        ++hits;
    }
    return hits;
}

StoreReport ContextCacheIndex::store_blocks(std::span<const BlockKey> block_keys,
                                            std::span<const KVBlock> blocks) {
    if (block_keys.size() != blocks.size())
        throw_error(ErrorCode::InvalidArgument, "store_blocks: keys and blocks misaligned");
    StoreReport report;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        if (!(blocks[i].key == block_keys[i]))
            throw_error(ErrorCode::InvalidArgument, "store_blocks: keys and blocks misaligned");
        if (known_.count(block_keys[i].combined) != 0 &&
            pool_->contains(ns_, block_keys[i].combined)) {
            report.deduplicated++;
            continue;
        }
        try {
            pool_->put(ns_, block_keys[i].combined, blocks[i].size_bytes);
            known_.insert(block_keys[i].combined);
            report.stored++;
            report.bytes_written += blocks[i].size_bytes;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::Quota || e.code() == ErrorCode::Capacity) {
                report.failed++;  // partial store; the report carries the shortfall
            } else {
                throw;
            }
        }
    }
    return report;
}

}  // namespace moesim
