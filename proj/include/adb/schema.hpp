#ifndef ADB_SCHEMA_HPP
#define ADB_SCHEMA_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adb/errors.hpp"
#include "adb/value.hpp"

namespace adb {

using Coord = std::int64_t;

// One dimension of an array declaration: `name=lo:hi,chunk_len,overlap`.
struct DimensionSpec {
    std::string name;
    Coord lo = 0;
    Coord hi = 0;
    std::int64_t chunk_len = 1;
    std::int64_t overlap = 0;

    Coord extent() const { return hi - lo + 1; }
    std::int64_t chunk_count() const { return (extent() + chunk_len - 1) / chunk_len; }

    // Core region of chunk `ord`, clipped to the dimension bounds.
    Coord core_lo(std::int64_t ord) const { return lo + ord * chunk_len; }
    Coord core_hi(std::int64_t ord) const {
        Coord h = lo + (ord + 1) * chunk_len - 1;
        return h < hi ? h : hi;
    }
    // Core region widened by the overlap halo on both sides, clipped.
    Coord ext_lo(std::int64_t ord) const {
        Coord l = lo + ord * chunk_len - overlap;
        return l > lo ? l : lo;
    }
    Coord ext_hi(std::int64_t ord) const {
        Coord h = lo + (ord + 1) * chunk_len - 1 + overlap;
        return h < hi ? h : hi;
    }

    bool contains(Coord c) const { return c >= lo && c <= hi; }

    bool operator==(const DimensionSpec&) const = default;
};

struct AttributeSpec {
    std::string name;
    ValueType value_type = ValueType::uint8;

    bool operator==(const AttributeSpec&) const = default;
};

// Where a coordinate lands inside its primary chunk.
struct ChunkSlot {
    std::int64_t ordinal = 0;
    std::int64_t offset = 0;  // coord - core_lo(ordinal), always < chunk_len

    bool operator==(const ChunkSlot&) const = default;
};

ChunkSlot chunk_of(const DimensionSpec& dim, Coord coord);

// The primary chunk plus every neighbor whose overlap halo contains `coord`,
// sorted ascending.
std::vector<std::int64_t> halo_chunks(const DimensionSpec& dim, Coord coord);

// A validated array declaration. Construction enforces all invariants and
// throws ValidationError naming the offending dimension or attribute.
class ArraySchema {
public:
    ArraySchema() = default;
    ArraySchema(std::vector<AttributeSpec> attributes, std::vector<DimensionSpec> dimensions);

    std::size_t ndims() const { return dims_.size(); }
    const DimensionSpec& dim(std::size_t i) const { return dims_[i]; }
    const std::vector<DimensionSpec>& dims() const { return dims_; }
    const std::vector<AttributeSpec>& attributes() const { return attrs_; }

    // The engine stores one attribute per array; the first one is it.
    ValueType value_type() const { return attrs_.front().value_type; }

    bool in_bounds(std::span<const Coord> coords) const;
    // Throws RangeError naming the dimension and coordinate.
    void check_bounds(std::span<const Coord> coords) const;

    // Per-dimension primary chunk ordinals for an in-bounds coordinate tuple.
    std::vector<std::int64_t> chunk_ordinals(std::span<const Coord> coords) const;

    std::uint64_t total_cells() const;   // throws ValidationError on u64 overflow
    std::uint64_t total_chunks() const;  // likewise

    bool operator==(const ArraySchema&) const = default;

private:
    std::vector<AttributeSpec> attrs_;
    std::vector<DimensionSpec> dims_;
};

struct NamedSchema {
    std::string name;
    ArraySchema schema;
};

// Parses `NAME<attr:type,...>[dim=lo:hi,chunk,overlap,...]`. Whitespace is
// ignored between tokens. Grammar failures throw ParseError with a byte
// offset; invariant violations throw ValidationError.
NamedSchema parse_schema(std::string_view text);

// Canonical single-token-separator form; parse_schema(format_schema(s, n))
// reproduces (n, s) exactly.
std::string format_schema(const ArraySchema& schema, const std::string& name);

// Digest of the canonical schema text without the array name; stamped into
// chunk and manifest files so readers can detect schema drift.
std::uint64_t schema_digest(const ArraySchema& schema);

}  // namespace adb

#endif  // ADB_SCHEMA_HPP
