#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "core/context_cache.hpp"
#include "core/rng.hpp"

using namespace moesim;

namespace {

std::vector<std::uint64_t> tokens(int n, std::uint64_t seed = 1) {
    Rng rng(seed);
    std::vector<std::uint64_t> out(static_cast<std::size_t>(n));
    for (auto& t : out) t = rng.next_u64();
    return out;
}

// Hand-rolled chain recomputation, mirroring the documented key derivation.
std::vector<BlockKey> oracle_chain(const std::vector<std::uint64_t>& toks, int bs) {
    std::vector<BlockKey> keys;
    std::uint64_t prefix = kPrefixChainSeed;
    for (std::size_t start = 0; start < toks.size(); start += static_cast<std::size_t>(bs)) {
        std::size_t end = std::min(toks.size(), start + static_cast<std::size_t>(bs));
        std::uint64_t bh = mix64(static_cast<std::uint64_t>(end - start));
        for (std::size_t i = start; i < end; ++i) bh = hash_combine(bh, toks[i]);
        keys.push_back({prefix, bh, hash_combine(prefix, bh)});
        prefix = hash_combine(prefix, bh);
    }
    return keys;
}

struct Fixture {
    MemoryPool pool;
    ContextCacheIndex index;

    explicit Fixture(std::int64_t quota = 1LL << 40)
        : pool({{0, 1LL << 30, 1LL << 32}},
               [] {
                   PoolConfig cfg;
                   cfg.allocation_rounding = 1;
                   cfg.materialize_payloads = false;
                   return cfg;
               }()),
          index(&pool, 1) {
        pool.create_namespace(1, quota);
    }
};

}  // namespace

TEST_CASE("block counts follow ceil division") {
    auto exact = split_into_blocks(tokens(256), 128);
    CHECK(exact.size() == 2);

    auto blocks = make_blocks(tokens(300), 128, 100);
    REQUIRE(blocks.size() == 3);
    CHECK(blocks[0].num_tokens == 128);
    CHECK(blocks[1].num_tokens == 128);
    CHECK(blocks[2].num_tokens == 44);
    CHECK(blocks[2].size_bytes == 4400);
}

TEST_CASE("invalid splits are rejected") {
    CHECK_THROWS_AS(split_into_blocks({}, 128), Error);
    CHECK_THROWS_AS(split_into_blocks(tokens(10), 64), Error);
    CHECK_THROWS_AS(split_into_blocks(tokens(10), 1024), Error);
}

TEST_CASE("keys match a hand-rolled chain recomputation") {
    auto toks = tokens(700, 9);
    auto keys = split_into_blocks(toks, 256);
    auto expected = oracle_chain(toks, 256);
    REQUIRE(keys.size() == expected.size());
    for (std::size_t i = 0; i < keys.size(); ++i) CHECK(keys[i] == expected[i]);
}

TEST_CASE("divergence after a shared block keeps the shared key and changes the rest") {
    auto a = tokens(256, 5);
    auto b = a;
    b[128] = ~b[128];  // first token of the second block differs
    auto ka = split_into_blocks(a, 128);
    auto kb = split_into_blocks(b, 128);
    CHECK(ka[0] == kb[0]);
    CHECK(ka[1].block_hash != kb[1].block_hash);
    CHECK(ka[1].combined != kb[1].combined);
}

TEST_CASE("divergence at any token changes all subsequent keys") {
    auto a = tokens(512, 6);
    auto b = a;
    b[77] = ~b[77];
    auto ka = split_into_blocks(a, 128);
    auto kb = split_into_blocks(b, 128);
    for (std::size_t i = 0; i < ka.size(); ++i) {
        if (i == 0)
            CHECK(ka[i].combined != kb[i].combined);  // divergence inside block 0
        else
            CHECK(ka[i].prefix_hash != kb[i].prefix_hash);
    }
}

TEST_CASE("lookup walks the stored prefix and stops at the first miss") {
    Fixture f;
    auto toks = tokens(128 * 5, 11);
    auto blocks = make_blocks(toks, 128, 64);
    std::vector<BlockKey> keys;
    for (const auto& b : blocks) keys.push_back(b.key);

    CHECK(f.index.lookup_prefix(keys) == 0);  // empty index

    f.index.store_blocks(keys, blocks);
    CHECK(f.index.lookup_prefix(keys) == 5);  // fully stored

    // A prompt diverging inside block 3 (1-indexed) hits exactly 2.
    auto diverged = toks;
    diverged[300] = ~diverged[300];
    auto dkeys = split_into_blocks(diverged, 128);
    CHECK(f.index.lookup_prefix(dkeys) == 2);
}

TEST_CASE("prefix hit counts obey the chain recurrence on enumerated subsets") {
    Fixture f;
    auto toks = tokens(128 * 4, 13);
    auto blocks = make_blocks(toks, 128, 64);
    std::vector<BlockKey> keys;
    for (const auto& b : blocks) keys.push_back(b.key);
    // Store only the first two blocks.
    f.index.store_blocks({keys.data(), 2}, {blocks.data(), 2});

    for (std::size_t n = 1; n <= keys.size(); ++n) {
        int full = f.index.lookup_prefix({keys.data(), n});
        int shorter = f.index.lookup_prefix({keys.data(), n - 1});
        bool present = f.index.contains(keys[n - 1]);
        int expected = std::min<int>(shorter + (shorter == static_cast<int>(n - 1) && present ? 1 : 0),
                                     static_cast<int>(n));
        CHECK(full == expected);
        CHECK(full >= shorter);
    }
}

TEST_CASE("storing the same prompt twice writes nothing new") {
    Fixture f;
    auto blocks = make_blocks(tokens(128 * 3, 17), 128, 64);
    std::vector<BlockKey> keys;
    for (const auto& b : blocks) keys.push_back(b.key);

    auto first = f.index.store_blocks(keys, blocks);
    CHECK(first.stored == 3);
    auto second = f.index.store_blocks(keys, blocks);
    CHECK(second.stored == 0);
    CHECK(second.deduplicated == 3);
    CHECK(f.index.size() == 3);
}

TEST_CASE("shared prefixes are stored once") {
    Fixture f;
    auto a = tokens(128 * 4, 19);
    auto b = a;
    for (std::size_t i = 256; i < b.size(); ++i) b[i] = ~b[i];  // diverge after 2 blocks

    auto ba = make_blocks(a, 128, 64);
    auto bb = make_blocks(b, 128, 64);
    std::vector<BlockKey> ka, kb;
    for (const auto& x : ba) ka.push_back(x.key);
    for (const auto& x : bb) kb.push_back(x.key);

    f.index.store_blocks(ka, ba);
    auto report = f.index.store_blocks(kb, bb);
    CHECK(report.deduplicated == 2);
    CHECK(report.stored == 2);

    std::set<std::uint64_t> unique;
    for (const auto& k : ka) unique.insert(k.combined);
    for (const auto& k : kb) unique.insert(k.combined);
    CHECK(f.index.size() == unique.size());
}

TEST_CASE("quota exhaustion yields a partial store with a report") {
    Fixture f(/*quota=*/64 * 128 + 1);  // room for exactly one full block
    auto blocks = make_blocks(tokens(128 * 3, 23), 128, 64);
    std::vector<BlockKey> keys;
    for (const auto& b : blocks) keys.push_back(b.key);
    auto report = f.index.store_blocks(keys, blocks);
    CHECK(report.stored == 1);
    CHECK(report.failed == 2);
    CHECK(f.index.lookup_prefix(keys) == 1);
}

TEST_CASE("evicted blocks stop counting as prefix hits") {
    Fixture f;
    auto blocks = make_blocks(tokens(128 * 2, 29), 128, 64);
    std::vector<BlockKey> keys;
    for (const auto& b : blocks) keys.push_back(b.key);
    f.index.store_blocks(keys, blocks);
    f.pool.erase(1, keys[0].combined);  // evicted underneath the index
    CHECK(f.index.lookup_prefix(keys) == 0);
}

TEST_CASE("decode storage policy follows the model kind") {
    CHECK(decode_storage_policy(ModelKind::REASONING, false) == StorePolicy::NONE);
    CHECK(decode_storage_policy(ModelKind::NON_REASONING, false) == StorePolicy::ALL);
    CHECK(decode_storage_policy(ModelKind::NON_REASONING, true) == StorePolicy::ALL);
    CHECK(decode_storage_policy(ModelKind::REASONING, true) == StorePolicy::FINAL_RESPONSE_ONLY);
}
