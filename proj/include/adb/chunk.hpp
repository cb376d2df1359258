#ifndef ADB_CHUNK_HPP
#define ADB_CHUNK_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adb/schema.hpp"
#include "adb/value.hpp"

namespace adb {

using Ordinals = std::vector<std::int64_t>;

// A batch of cells in structure-of-arrays form: `coords` holds ndims
// coordinates per cell, `values` the matching attribute values.
struct CellBatch {
    std::size_t ndims = 0;
    std::vector<Coord> coords;
    ValueArray values;

    CellBatch() = default;
    CellBatch(std::size_t nd, ValueType t) : ndims(nd), values(t) {}

    std::size_t size() const { return values.size(); }
    bool empty() const { return values.empty(); }

    std::span<const Coord> cell(std::size_t i) const {
        return std::span<const Coord>(coords.data() + i * ndims, ndims);
    }

    void reserve(std::size_t n) {
        coords.reserve(n * ndims);
        values.reserve(n);
    }

    void append(std::span<const Coord> c, const Value& v) {
        coords.insert(coords.end(), c.begin(), c.end());
        values.push_back(v);
    }
};

// An axis-aligned block of coordinates with row-major addressing.
struct Region {
    std::vector<Coord> lo;
    std::vector<std::int64_t> extents;

    std::size_t ndims() const { return lo.size(); }
    std::uint64_t volume() const;
    bool contains(std::span<const Coord> coords) const;
    std::uint64_t rank(std::span<const Coord> coords) const;
    void coords_of(std::uint64_t rank, std::span<Coord> out) const;
};

Region core_region(const ArraySchema& schema, std::span<const std::int64_t> ordinals);
Region extended_region(const ArraySchema& schema, std::span<const std::int64_t> ordinals);

struct ChunkId {
    std::string array;
    Ordinals ordinals;
};

// A decoded chunk. Core cells use either a dense row-major layout over the
// clipped core region (only when every core cell is present) or sorted
// sparse records; halo replicas are always sparse. Sparse coordinates are
// stored lo-relative as u32 and sorted in row-major order.
struct Chunk {
    ChunkId id;
    bool dense = false;
    std::vector<std::uint32_t> coords;  // empty when dense
    ValueArray values;
    std::vector<std::uint32_t> halo_coords;
    ValueArray halo_values;

    std::size_t ndims() const { return id.ordinals.size(); }
    std::uint64_t core_count() const {
        return dense ? values.size() : (ndims() ? coords.size() / ndims() : 0);
    }
    std::uint64_t halo_count() const { return halo_values.size(); }
};

Chunk make_empty_chunk(const ArraySchema& schema, ChunkId id);

// Conversions between the two core encodings. Densify requires the chunk to
// be completely full; both preserve the cell set exactly.
Chunk densified(const ArraySchema& schema, Chunk chunk);
Chunk sparsified(const ArraySchema& schema, Chunk chunk);

/*
 * Chunk file layout (little-endian, digest-checked):
 *
 *   magic "ADBC"            4 bytes
 *   format version          u16
 *   schema digest           u64
 *   ordinals count          u8
 *   ordinals                u32 each
 *   encoding                u8   (0 = dense, 1 = sparse-coo)
 *   core cell count         u64
 *   halo cell count         u64
 *   core payload            dense:  values in row-major core order
 *                           sparse: per cell, u32 lo-relative coordinate per
 *                                   dimension followed by the value
 *   halo payload            sparse records as above
 *   digest                  u64 FNV-1a over all preceding bytes
 *
 * Values: uint8 1 byte; int64/float64 8 bytes; string u32 length + bytes.
 */
std::vector<std::uint8_t> encode_chunk(const ArraySchema& schema, const Chunk& chunk);
Chunk decode_chunk(const ArraySchema& schema, ChunkId id, std::span<const std::uint8_t> bytes,
                   bool include_halo, const std::string& context);

// Lexicographic (= row-major) comparison of two coordinate tuples.
bool coords_less(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b);

// Sorted-merge of two sorted duplicate-free cell lists; `upd` wins where both
// define the same coordinate.
void merge_cell_lists(std::size_t ndims, const std::vector<std::uint32_t>& base_coords,
                      const ValueArray& base_vals, const std::vector<std::uint32_t>& upd_coords,
                      const ValueArray& upd_vals, std::vector<std::uint32_t>& out_coords,
                      ValueArray& out_vals);

}  // namespace adb

#endif  // ADB_CHUNK_HPP
