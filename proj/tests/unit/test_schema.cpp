#include <doctest.h>

#include "adb/schema.hpp"
#include "helpers.hpp"

using namespace adb;
using adbtest::Rng;

namespace {

const char* kVol3d = "vol3d<val:uint8>[row=1:4096,4096,0,col=1:4096,4096,0,slice=1:1000,1,0]";

}  // namespace

TEST_CASE("parse_schema handles the vol3d declaration") {
    auto [name, schema] = parse_schema(kVol3d);
    CHECK(name == "vol3d");
    REQUIRE(schema.attributes().size() == 1);
    CHECK(schema.attributes()[0].name == "val");
    CHECK(schema.attributes()[0].value_type == ValueType::uint8);
    REQUIRE(schema.ndims() == 3);
    CHECK(schema.dim(0) == DimensionSpec{"row", 1, 4096, 4096, 0});
    CHECK(schema.dim(1) == DimensionSpec{"col", 1, 4096, 4096, 0});
    CHECK(schema.dim(2) == DimensionSpec{"slice", 1, 1000, 1, 0});
    CHECK(schema.dim(2).chunk_count() == 1000);
    CHECK(schema.total_chunks() == 1000);
}

TEST_CASE("parse_schema is whitespace-insensitive") {
    auto a = parse_schema(kVol3d);
    auto b = parse_schema(" vol3d < val : uint8 > [ row = 1 : 4096 , 4096 , 0 ,"
                          " col = 1:4096,4096,0, slice = 1:1000, 1, 0 ] ");
    CHECK(a.name == b.name);
    CHECK(a.schema == b.schema);
}

TEST_CASE("one-cell schema parses to a single chunk") {
    auto [name, schema] = parse_schema("a<v:uint8>[x=1:1,1,0]");
    CHECK(name == "a");
    CHECK(schema.dim(0).extent() == 1);
    CHECK(schema.total_chunks() == 1);
    CHECK(schema.total_cells() == 1);
}

TEST_CASE("overlap >= chunk_len is a validation error naming the dimension") {
    CHECK_THROWS_WITH_AS(parse_schema("a<v:uint8>[x=1:100,100,200]"),
                         doctest::Contains("'x'"), ValidationError);
}

TEST_CASE("grammar failures carry byte offsets") {
    CHECK_THROWS_AS(parse_schema(""), ParseError);
    try {
        parse_schema("a<v uint8>[x=1:1,1,0]");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 4);  // first non-space character where ':' was expected
    }
    CHECK_THROWS_AS(parse_schema("a<v:uint8>[x=1:1,1,0] junk"), ParseError);
    CHECK_THROWS_AS(parse_schema("a<v:float32>[x=1:1,1,0]"), ParseError);
    CHECK_THROWS_AS(parse_schema("a<v:uint8>[x=1:,1,0]"), ParseError);
}

TEST_CASE("schema invariants are enforced") {
    CHECK_THROWS_AS(parse_schema("a<v:uint8>[x=5:4,1,0]"), ValidationError);   // lo > hi
    CHECK_THROWS_AS(parse_schema("a<v:uint8>[x=1:4,0,0]"), ValidationError);   // chunk_len 0
    CHECK_THROWS_AS(parse_schema("a<v:uint8>[x=1:4,2,-1]"), ValidationError);  // overlap < 0
    CHECK_THROWS_AS(parse_schema("a<v:uint8>[x=1:4,2,0,x=1:4,2,0]"), ValidationError);
    CHECK_THROWS_AS(parse_schema("a<v:uint8,v:int64>[x=1:4,2,0]"), ValidationError);
}

TEST_CASE("format_schema reproduces the vol3d listing token for token") {
    auto [name, schema] = parse_schema(kVol3d);
    CHECK(format_schema(schema, name) == kVol3d);
}

TEST_CASE("format of the one-cell schema") {
    auto [name, schema] = parse_schema("a < v : uint8 > [ x = 1:1, 1, 0 ]");
    CHECK(format_schema(schema, name) == "a<v:uint8>[x=1:1,1,0]");
}

TEST_CASE("parse/format round-trip on random schemas") {
    Rng rng(7001);
    for (int iter = 0; iter < 300; ++iter) {
        auto type = static_cast<ValueType>(adbtest::rand_int(rng, 0, 3));
        ArraySchema schema = adbtest::random_schema(rng, 4, type);
        std::string text = format_schema(schema, "arr");
        auto [name, reparsed] = parse_schema(text);
        CHECK(name == "arr");
        CHECK(reparsed == schema);
        CHECK(format_schema(reparsed, name) == text);
    }
}

TEST_CASE("chunk_of: single-chunk dimension maps the last coordinate") {
    DimensionSpec row{"row", 1, 4096, 4096, 0};
    CHECK(chunk_of(row, 4096) == ChunkSlot{0, 4095});
    CHECK(chunk_of(row, 1) == ChunkSlot{0, 0});
}

TEST_CASE("chunk_of: chunk_len 1 forces ordinal = coord - lo") {
    DimensionSpec slice{"slice", 1, 1000, 1, 0};
    CHECK(chunk_of(slice, 15) == ChunkSlot{14, 0});
    CHECK(chunk_of(slice, 1000) == ChunkSlot{999, 0});
}

TEST_CASE("chunk_of: overlap dimension example") {
    DimensionSpec x{"x", 1, 1000, 100, 10};
    CHECK(chunk_of(x, 105) == ChunkSlot{1, 4});
    // 105 also sits inside chunk 0's halo (its extended region reaches 110).
    CHECK(halo_chunks(x, 105) == std::vector<std::int64_t>{0, 1});
    CHECK(halo_chunks(x, 150) == std::vector<std::int64_t>{1});
}

TEST_CASE("chunk_of rejects out-of-bounds coordinates") {
    DimensionSpec x{"x", 1, 10, 4, 0};
    CHECK_THROWS_WITH_AS(chunk_of(x, 0), doctest::Contains("'x'"), RangeError);
    CHECK_THROWS_AS(chunk_of(x, 11), RangeError);
    CHECK_THROWS_AS(halo_chunks(x, 11), RangeError);
}

TEST_CASE("zero overlap gives a singleton halo set") {
    DimensionSpec x{"x", 0, 99, 10, 0};
    for (Coord c = 0; c <= 99; ++c) {
        CHECK(halo_chunks(x, c) == std::vector<std::int64_t>{chunk_of(x, c).ordinal});
    }
}

TEST_CASE("partition property: primary chunks tile the dimension") {
    Rng rng(7002);
    for (int iter = 0; iter < 60; ++iter) {
        DimensionSpec dim;
        dim.name = "x";
        dim.lo = adbtest::rand_int(rng, -50, 50);
        dim.hi = dim.lo + adbtest::rand_int(rng, 0, 9999);
        dim.chunk_len = adbtest::rand_int(rng, 1, dim.extent() + 2);
        dim.overlap = adbtest::rand_int(rng, 0, std::min<std::int64_t>(dim.chunk_len - 1, 7));

        std::int64_t count = dim.chunk_count();
        std::int64_t covered = 0;
        for (std::int64_t k = 0; k < count; ++k) {
            CHECK(dim.core_lo(k) <= dim.core_hi(k));
            covered += dim.core_hi(k) - dim.core_lo(k) + 1;
        }
        CHECK(covered == dim.extent());  // cores tile [lo, hi] with no gaps

        for (Coord c = dim.lo; c <= dim.hi; ++c) {
            auto slot = chunk_of(dim, c);
            CHECK(slot.ordinal >= 0);
            CHECK(slot.ordinal < count);
            CHECK(slot.offset >= 0);
            CHECK(slot.offset < dim.chunk_len);
            CHECK(dim.core_lo(slot.ordinal) + slot.offset == c);
        }
    }
}

TEST_CASE("halo property matches brute-force region enumeration") {
    Rng rng(7003);
    for (int iter = 0; iter < 60; ++iter) {
        DimensionSpec dim;
        dim.name = "x";
        dim.lo = adbtest::rand_int(rng, -20, 20);
        dim.hi = dim.lo + adbtest::rand_int(rng, 0, 2000);
        dim.chunk_len = adbtest::rand_int(rng, 1, dim.extent() + 2);
        dim.overlap = adbtest::rand_int(rng, 0, std::min<std::int64_t>(dim.chunk_len - 1, 9));

        for (Coord c = dim.lo; c <= dim.hi; ++c) {
            auto expected = adbtest::oracle_halo_chunks(dim, c);
            CHECK(halo_chunks(dim, c) == expected);
            // A cell replicates into at most 2 chunks per dimension.
            CHECK(expected.size() <= 2);
        }
    }
}

TEST_CASE("total cell arithmetic for the desk-scale bench volume") {
    auto [name, schema] = parse_schema("v<val:uint8>[r=1:512,512,0,c=1:512,512,0,s=1:64,1,0]");
    CHECK(schema.total_cells() == 16777216);
    CHECK(schema.total_chunks() == 64);
}
