#include <doctest.h>

#include <algorithm>
#include <optional>

#include "adb/binio.hpp"
#include "adb/chunkstore.hpp"
#include "helpers.hpp"

using namespace adb;
using adbtest::Rng;
using adbtest::TempDir;

namespace {

struct StoreFixture {
    TempDir dir;
    ChunkStore store;
    ArraySchema schema;

    StoreFixture(const std::string& tag, ArraySchema s, int shards = 1)
        : dir(tag), store(dir.path()), schema(std::move(s)) {
        store.register_array("arr", schema, "arrays/a1_arr", ShardMap(schema, shards));
        store.create_initial_version("arr");
    }
};

ArraySchema schema_1d(Coord lo, Coord hi, std::int64_t chunk_len, std::int64_t overlap,
                      ValueType type = ValueType::uint8) {
    return ArraySchema({{"val", type}}, {{"x", lo, hi, chunk_len, overlap}});
}

// Builds a random but structurally valid chunk: sorted unique core cells
// inside the core region (dense when full), halo cells inside the
// extended-but-not-core region.
Chunk random_chunk(Rng& rng, const ArraySchema& schema, const Ordinals& ords, bool force_full) {
    Region core = core_region(schema, ords);
    Region ext = extended_region(schema, ords);
    const std::size_t nd = schema.ndims();
    Chunk c = make_empty_chunk(schema, ChunkId{"arr", ords});

    std::uint64_t capacity = core.volume();
    std::uint64_t count = force_full ? capacity : adbtest::rand_int(rng, 0, capacity);
    std::vector<std::uint64_t> ranks(capacity);
    for (std::uint64_t i = 0; i < capacity; ++i) ranks[i] = i;
    std::shuffle(ranks.begin(), ranks.end(), rng);
    ranks.resize(count);
    std::sort(ranks.begin(), ranks.end());

    std::vector<Coord> coords(nd);
    for (auto r : ranks) {
        core.coords_of(r, coords);
        for (std::size_t d = 0; d < nd; ++d) {
            c.coords.push_back(static_cast<std::uint32_t>(coords[d] - schema.dim(d).lo));
        }
        c.values.push_back(adbtest::random_value(rng, schema.value_type()));
    }
    if (count == capacity && capacity > 0) c = densified(schema, std::move(c));

    // Halo cells: pick from the extended region, skipping the core.
    std::vector<std::uint64_t> ext_ranks;
    std::vector<Coord> cur(nd);
    for (std::uint64_t r = 0; r < ext.volume(); ++r) {
        ext.coords_of(r, cur);
        if (!core.contains(cur)) ext_ranks.push_back(r);
    }
    std::shuffle(ext_ranks.begin(), ext_ranks.end(), rng);
    std::uint64_t halo_count = adbtest::rand_int(rng, 0, std::min<std::uint64_t>(ext_ranks.size(), 12));
    ext_ranks.resize(halo_count);
    std::sort(ext_ranks.begin(), ext_ranks.end());
    for (auto r : ext_ranks) {
        ext.coords_of(r, cur);
        for (std::size_t d = 0; d < nd; ++d) {
            c.halo_coords.push_back(static_cast<std::uint32_t>(cur[d] - schema.dim(d).lo));
        }
        c.halo_values.push_back(adbtest::random_value(rng, schema.value_type()));
    }
    return c;
}

bool chunks_equal(const Chunk& a, const Chunk& b) {
    return a.dense == b.dense && a.coords == b.coords && a.values == b.values &&
           a.halo_coords == b.halo_coords && a.halo_values == b.halo_values;
}

std::optional<Value> core_value_at(const ArraySchema& schema, const Chunk& chunk,
                                   std::span<const Coord> coords) {
    Region core = core_region(schema, chunk.id.ordinals);
    if (!core.contains(coords)) return std::nullopt;
    if (chunk.dense) return chunk.values.get(static_cast<std::size_t>(core.rank(coords)));
    const std::size_t nd = schema.ndims();
    for (std::size_t i = 0; i < chunk.core_count(); ++i) {
        bool match = true;
        for (std::size_t d = 0; d < nd; ++d) {
            if (schema.dim(d).lo + static_cast<Coord>(chunk.coords[i * nd + d]) != coords[d]) {
                match = false;
                break;
            }
        }
        if (match) return chunk.values.get(i);
    }
    return std::nullopt;
}

// Full-scan halo check: every halo cell equals the core cell of its owning
// chunk, and every core cell within overlap reach appears in each neighbor
// chunk's halo.
void check_halo_coherence(const ChunkStore& store, const std::string& array,
                          const ArraySchema& schema, const VersionPtr& version) {
    const std::size_t nd = schema.ndims();
    std::map<Ordinals, Chunk> cache;
    auto chunk_at = [&](const Ordinals& ords) -> const Chunk& {
        auto it = cache.find(ords);
        if (it == cache.end()) {
            it = cache.emplace(ords, store.read_chunk(array, *version, ords, true)).first;
        }
        return it->second;
    };

    std::vector<Coord> coords(nd);
    for (const auto& [ords, ref] : version->manifest) {
        const Chunk& chunk = chunk_at(ords);

        // Coherence: halo cells mirror their owner's core.
        for (std::size_t i = 0; i < chunk.halo_count(); ++i) {
            for (std::size_t d = 0; d < nd; ++d) {
                coords[d] = schema.dim(d).lo + static_cast<Coord>(chunk.halo_coords[i * nd + d]);
            }
            Ordinals owner = schema.chunk_ordinals(coords);
            REQUIRE(owner != ords);
            auto owned = core_value_at(schema, chunk_at(owner), coords);
            REQUIRE(owned.has_value());
            CHECK(*owned == chunk.halo_values.get(i));
        }

        // Completeness: core cells replicate into every neighbor whose
        // extended region contains them.
        for (std::size_t i = 0; i < chunk.core_count(); ++i) {
            if (chunk.dense) {
                Region core = core_region(schema, ords);
                core.coords_of(i, coords);
            } else {
                for (std::size_t d = 0; d < nd; ++d) {
                    coords[d] = schema.dim(d).lo + static_cast<Coord>(chunk.coords[i * nd + d]);
                }
            }
            std::vector<std::vector<std::int64_t>> per_dim(nd);
            for (std::size_t d = 0; d < nd; ++d) {
                per_dim[d] = halo_chunks(schema.dim(d), coords[d]);
            }
            std::vector<std::size_t> pick(nd, 0);
            for (;;) {
                Ordinals nbr(nd);
                for (std::size_t d = 0; d < nd; ++d) nbr[d] = per_dim[d][pick[d]];
                if (nbr != ords) {
                    const Chunk& neighbor = chunk_at(nbr);
                    bool found = false;
                    for (std::size_t h = 0; h < neighbor.halo_count(); ++h) {
                        bool match = true;
                        for (std::size_t d = 0; d < nd; ++d) {
                            if (schema.dim(d).lo +
                                    static_cast<Coord>(neighbor.halo_coords[h * nd + d]) !=
                                coords[d]) {
                                match = false;
                                break;
                            }
                        }
                        if (match) {
                            found = true;
                            CHECK(neighbor.halo_values.get(h) == chunk.values.get(i));
                            break;
                        }
                    }
                    CHECK(found);
                }
                std::size_t d = 0;
                while (d < nd && ++pick[d] == per_dim[d].size()) {
                    pick[d] = 0;
                    ++d;
                }
                if (d == nd) break;
            }
        }
    }
}

}  // namespace

TEST_CASE("chunk encode/decode round-trips on random chunks") {
    Rng rng(8101);
    for (int iter = 0; iter < 150; ++iter) {
        auto type = static_cast<ValueType>(adbtest::rand_int(rng, 0, 3));
        ArraySchema schema = adbtest::random_schema(rng, 3, type);
        Ordinals ords(schema.ndims());
        for (std::size_t d = 0; d < schema.ndims(); ++d) {
            ords[d] = adbtest::rand_int(rng, 0, schema.dim(d).chunk_count() - 1);
        }
        bool force_full = iter % 3 == 0;
        Chunk chunk = random_chunk(rng, schema, ords, force_full);

        auto bytes = encode_chunk(schema, chunk);
        auto bytes2 = encode_chunk(schema, chunk);
        CHECK(bytes == bytes2);  // byte-stable encoding

        Chunk back = decode_chunk(schema, chunk.id, bytes, true, "test");
        CHECK(chunks_equal(chunk, back));

        Chunk core_only = decode_chunk(schema, chunk.id, bytes, false, "test");
        CHECK(core_only.halo_count() == 0);
        CHECK(core_only.values == chunk.values);
    }
}

TEST_CASE("densify/sparsify preserve the cell set exactly") {
    Rng rng(8102);
    for (int iter = 0; iter < 50; ++iter) {
        ArraySchema schema = adbtest::random_schema(rng, 2, ValueType::int64);
        Ordinals ords(schema.ndims(), 0);
        Chunk full = random_chunk(rng, schema, ords, /*force_full=*/true);
        REQUIRE(full.dense);

        Chunk sparse = sparsified(schema, full);
        CHECK_FALSE(sparse.dense);
        CHECK(sparse.core_count() == full.core_count());
        Chunk dense_again = densified(schema, sparse);
        CHECK(chunks_equal(full, dense_again));

        // Both encodings decode to the same cell set.
        auto a = decode_chunk(schema, full.id, encode_chunk(schema, full), true, "t");
        auto b = decode_chunk(schema, sparse.id, encode_chunk(schema, sparse), true, "t");
        CHECK(sparsified(schema, a).coords == sparsified(schema, b).coords);
        CHECK(sparsified(schema, a).values == sparsified(schema, b).values);
    }
}

TEST_CASE("densify rejects partially filled chunks") {
    ArraySchema schema = schema_1d(1, 10, 5, 0);
    Chunk c = make_empty_chunk(schema, ChunkId{"arr", {0}});
    c.coords = {0};
    c.values.push_back(std::uint8_t{7});
    CHECK_THROWS_AS(densified(schema, c), ValidationError);
}

TEST_CASE("corrupting any payload byte is detected") {
    Rng rng(8103);
    ArraySchema schema = schema_1d(1, 40, 8, 2, ValueType::int64);
    Chunk chunk = random_chunk(rng, schema, {2}, false);
    auto bytes = encode_chunk(schema, chunk);
    for (std::size_t pos = 0; pos < bytes.size(); ++pos) {
        auto copy = bytes;
        copy[pos] ^= 0x5a;
        CHECK_THROWS_AS(decode_chunk(schema, chunk.id, copy, true, "t"), CorruptionError);
    }
}

TEST_CASE("write then read round-trips a batch") {
    Rng rng(8104);
    StoreFixture fx("roundtrip", adbtest::random_schema(rng, 3, ValueType::float64));
    CellBatch batch = adbtest::random_cells(rng, fx.schema, 500);
    adbtest::CellModel model;
    adbtest::apply_batch(model, batch);

    auto base = fx.store.latest("arr");
    auto v = fx.store.write_chunks("arr", base, batch);
    CHECK(v->number == 2);

    // Gather every core cell back out of every chunk and compare to the model.
    adbtest::CellModel seen;
    for (const auto& [ords, ref] : v->manifest) {
        Chunk c = fx.store.read_chunk("arr", *v, ords, false);
        Chunk sc = sparsified(fx.schema, c);
        const std::size_t nd = fx.schema.ndims();
        for (std::size_t i = 0; i < sc.core_count(); ++i) {
            adbtest::CellKey key(nd);
            for (std::size_t d = 0; d < nd; ++d) {
                key[d] = fx.schema.dim(d).lo + static_cast<Coord>(sc.coords[i * nd + d]);
            }
            CHECK(!seen.count(key));
            seen[key] = sc.values.get(i);
        }
    }
    CHECK(seen == model);
}

TEST_CASE("empty batch commits a version with an identical manifest") {
    StoreFixture fx("empty", schema_1d(1, 100, 10, 0));
    auto v1 = fx.store.latest("arr");
    CellBatch some(1, ValueType::uint8);
    some.append(std::vector<Coord>{5}, std::uint8_t{9});
    auto v2 = fx.store.write_chunks("arr", v1, some);
    auto v3 = fx.store.write_chunks("arr", v2, CellBatch{});
    CHECK(v3->number == 3);
    CHECK(v3->manifest.size() == v2->manifest.size());
    for (const auto& [ords, ref] : v2->manifest) {
        CHECK(v3->manifest.at(ords).path == ref.path);
        CHECK(v3->manifest.at(ords).digest == ref.digest);
    }
}

TEST_CASE("a full-plane slice write touches exactly one chunk") {
    // Reduced-extent analogue of the 3d volume schema: one slice per chunk.
    auto [name, schema] =
        parse_schema("v<val:uint8>[row=1:64,64,0,col=1:64,64,0,slice=1:20,1,0]");
    TempDir dir("slice");
    ChunkStore store(dir.path());
    store.register_array("v", schema, "arrays/a1_v", ShardMap(schema, 4));
    auto base = store.create_initial_version("v");

    CellBatch batch(3, ValueType::uint8);
    batch.reserve(64 * 64);
    for (Coord r = 1; r <= 64; ++r) {
        for (Coord c = 1; c <= 64; ++c) {
            batch.append(std::vector<Coord>{r, c, 15}, static_cast<std::uint8_t>((r * c) & 0xff));
        }
    }
    auto v = store.write_chunks("v", base, batch);
    CHECK(v->manifest.size() == 1);
    CHECK(v->manifest.begin()->first == Ordinals{0, 0, 14});

    Chunk chunk = store.read_chunk("v", *v, {0, 0, 14}, false);
    CHECK(chunk.dense);  // complete plane is stored dense
    CHECK(chunk.core_count() == 64 * 64);
}

TEST_CASE("boundary write updates the neighbor halo") {
    // x=95 lands in chunk 0's core and chunk 1's halo (extended region 91..210).
    StoreFixture fx("halo", schema_1d(1, 200, 100, 10));
    CellBatch batch(1, ValueType::uint8);
    batch.append(std::vector<Coord>{95}, std::uint8_t{42});
    auto v = fx.store.write_chunks("arr", fx.store.latest("arr"), batch);

    REQUIRE(v->manifest.count(Ordinals{0}));
    REQUIRE(v->manifest.count(Ordinals{1}));

    auto& stats = fx.store.stats();
    auto reads_before = stats.chunk_reads.load();
    Chunk c1 = fx.store.read_chunk("arr", *v, {1}, true);
    CHECK(stats.chunk_reads.load() - reads_before == 1);  // no second chunk touched
    CHECK(c1.core_count() == 0);
    REQUIRE(c1.halo_count() == 1);
    CHECK(c1.halo_coords == std::vector<std::uint32_t>{94});
    CHECK(c1.halo_values.get(0) == Value(std::uint8_t{42}));

    Chunk c0 = fx.store.read_chunk("arr", *v, {0}, false);
    CHECK(c0.core_count() == 1);
}

TEST_CASE("read of a never-written chunk is empty") {
    StoreFixture fx("absent", schema_1d(1, 100, 10, 2));
    auto v = fx.store.latest("arr");
    Chunk c = fx.store.read_chunk("arr", *v, {3}, true);
    CHECK_FALSE(c.dense);
    CHECK(c.core_count() == 0);
    CHECK(c.halo_count() == 0);
    CHECK_THROWS_AS(fx.store.read_chunk("arr", *v, {10}, true), RangeError);
}

TEST_CASE("out-of-bounds batch leaves no trace") {
    StoreFixture fx("oob", schema_1d(1, 50, 10, 0));
    CellBatch bad(1, ValueType::uint8);
    bad.append(std::vector<Coord>{10}, std::uint8_t{1});
    bad.append(std::vector<Coord>{51}, std::uint8_t{2});
    auto before = fx.store.list_versions("arr");
    CHECK_THROWS_AS(fx.store.write_chunks("arr", fx.store.latest("arr"), bad), RangeError);
    CHECK(fx.store.list_versions("arr").size() == before.size());
}

TEST_CASE("list_versions counts and keeps every version readable") {
    Rng rng(8105);
    StoreFixture fx("versions", schema_1d(0, 99, 7, 2, ValueType::int64));
    CHECK(fx.store.list_versions("arr").size() == 1);
    CHECK(fx.store.latest("arr")->number == 1);

    adbtest::CellModel model;
    std::vector<adbtest::CellModel> snapshots{model};  // snapshot per version
    const int k = 6;
    for (int i = 0; i < k; ++i) {
        CellBatch batch = adbtest::random_cells(rng, fx.schema, 40);
        adbtest::apply_batch(model, batch);
        fx.store.write_chunks("arr", fx.store.latest("arr"), batch);
        snapshots.push_back(model);
    }
    auto versions = fx.store.list_versions("arr");
    REQUIRE(versions.size() == k + 1);
    for (std::size_t i = 0; i < versions.size(); ++i) {
        CHECK(versions[i]->number == i + 1);

        // Replay the retained snapshot against the stored version.
        adbtest::CellModel seen;
        for (const auto& [ords, ref] : versions[i]->manifest) {
            Chunk c = fx.store.read_chunk("arr", *versions[i], ords, false);
            Chunk sc = sparsified(fx.schema, c);
            for (std::size_t j = 0; j < sc.core_count(); ++j) {
                adbtest::CellKey key{fx.schema.dim(0).lo + static_cast<Coord>(sc.coords[j])};
                seen[key] = sc.values.get(j);
            }
        }
        CHECK(seen == snapshots[i]);
    }
    CHECK_THROWS_AS(fx.store.version("arr", 99), VersionError);
}

TEST_CASE("copy-on-write: committed chunk digests never change") {
    Rng rng(8106);
    StoreFixture fx("cow", adbtest::random_schema(rng, 2, ValueType::uint8));
    auto v2 = fx.store.write_chunks("arr", fx.store.latest("arr"),
                                    adbtest::random_cells(rng, fx.schema, 300));
    auto retained = v2->manifest;

    for (int i = 0; i < 4; ++i) {
        fx.store.write_chunks("arr", fx.store.latest("arr"),
                              adbtest::random_cells(rng, fx.schema, 120));
    }
    // The old manifest still points at untouched files with intact digests.
    for (const auto& [ords, ref] : retained) {
        CHECK(v2->manifest.at(ords).digest == ref.digest);
        Chunk c = fx.store.read_chunk("arr", *v2, ords, true);  // digest re-verified on read
        CHECK(c.id.ordinals == ords);
    }
}

TEST_CASE("halo coherence holds across randomized overlapping writes") {
    Rng rng(8107);
    for (int iter = 0; iter < 12; ++iter) {
        ArraySchema schema = adbtest::random_schema(rng, 2, ValueType::int64);
        TempDir dir("coherence");
        ChunkStore store(dir.path());
        store.register_array("arr", schema, "arrays/a1_arr", ShardMap(schema, 3));
        store.create_initial_version("arr");
        for (int b = 0; b < 3; ++b) {
            store.write_chunks("arr", store.latest("arr"),
                               adbtest::random_cells(rng, schema, 150));
        }
        for (const auto& v : store.list_versions("arr")) {
            check_halo_coherence(store, "arr", schema, v);
        }
    }
}

TEST_CASE("store read detects a corrupted file via the manifest digest") {
    StoreFixture fx("storecorrupt", schema_1d(1, 16, 4, 0));
    CellBatch batch(1, ValueType::uint8);
    batch.append(std::vector<Coord>{3}, std::uint8_t{7});
    auto v = fx.store.write_chunks("arr", fx.store.latest("arr"), batch);
    auto ref = v->manifest.begin()->second;

    auto path = fx.dir.path() / ref.path;
    auto bytes = read_file_bytes(path);
    bytes[bytes.size() / 2] ^= 0xff;
    write_file_bytes(path, bytes);
    CHECK_THROWS_AS(fx.store.read_chunk("arr", *v, v->manifest.begin()->first, false),
                    CorruptionError);
}

TEST_CASE("storage format limits are validated at registration") {
    TempDir dir("limits");
    ChunkStore store(dir.path());
    ArraySchema wide({{"v", ValueType::uint8}}, {{"x", 0, 1LL << 33, 1LL << 33, 0}});
    CHECK_THROWS_AS(store.register_array("w", wide, "arrays/a1_w", ShardMap(wide, 1)),
                    ValidationError);
}

TEST_CASE("shard map is deterministic, covering, and stable") {
    auto [name, schema] = parse_schema("v<val:uint8>[r=1:40,10,0,c=1:30,10,0]");
    ShardMap a(schema, 16);
    ShardMap b(schema, 16);
    std::map<int, int> population;
    for (std::int64_t i = 0; i < schema.dim(0).chunk_count(); ++i) {
        for (std::int64_t j = 0; j < schema.dim(1).chunk_count(); ++j) {
            int s = a.shard_of(Ordinals{i, j});
            CHECK(s == b.shard_of(Ordinals{i, j}));
            CHECK(s >= 0);
            CHECK(s < 16);
            population[s]++;
        }
    }
    CHECK(population.size() == 12u);  // 12 chunks spread over distinct shards
}
