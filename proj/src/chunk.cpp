#include "adb/chunk.hpp"

#include <algorithm>
#include <cstring>

#include "adb/binio.hpp"

namespace adb {

namespace {

constexpr std::uint8_t kChunkMagic[4] = {'A', 'D', 'B', 'C'};
constexpr std::uint16_t kChunkFormatVersion = 1;
constexpr std::uint8_t kEncodingDense = 0;
constexpr std::uint8_t kEncodingSparse = 1;

void encode_values(BufWriter& w, const ValueArray& vals, std::size_t i) {
    switch (vals.type()) {
        case ValueType::uint8: w.put_u8(vals.vec<std::uint8_t>()[i]); break;
        case ValueType::int64: w.put_i64(vals.vec<std::int64_t>()[i]); break;
        case ValueType::float64: w.put_f64(vals.vec<double>()[i]); break;
        case ValueType::string: w.put_string32(vals.vec<std::string>()[i]); break;
    }
}

void decode_value(BufReader& r, ValueArray& out) {
    switch (out.type()) {
        case ValueType::uint8: out.vec<std::uint8_t>().push_back(r.get_u8()); break;
        case ValueType::int64: out.vec<std::int64_t>().push_back(r.get_i64()); break;
        case ValueType::float64: out.vec<double>().push_back(r.get_f64()); break;
        case ValueType::string: out.vec<std::string>().push_back(r.get_string32()); break;
    }
}

void encode_sparse_records(BufWriter& w, std::size_t ndims,
                           const std::vector<std::uint32_t>& coords, const ValueArray& vals) {
    for (std::size_t i = 0; i < vals.size(); ++i) {
        for (std::size_t d = 0; d < ndims; ++d) w.put_u32(coords[i * ndims + d]);
        encode_values(w, vals, i);
    }
}

void decode_sparse_records(BufReader& r, std::size_t ndims, std::uint64_t count,
                           std::vector<std::uint32_t>& coords, ValueArray& vals) {
    coords.reserve(coords.size() + count * ndims);
    vals.reserve(vals.size() + count);
    for (std::uint64_t i = 0; i < count; ++i) {
        for (std::size_t d = 0; d < ndims; ++d) coords.push_back(r.get_u32());
        decode_value(r, vals);
    }
}

}  // namespace

std::uint64_t Region::volume() const {
    std::uint64_t v = 1;
    for (auto e : extents) v *= static_cast<std::uint64_t>(e);
    return v;
}

bool Region::contains(std::span<const Coord> coords) const {
    for (std::size_t d = 0; d < lo.size(); ++d) {
        if (coords[d] < lo[d] || coords[d] >= lo[d] + extents[d]) return false;
    }
    return true;
}

std::uint64_t Region::rank(std::span<const Coord> coords) const {
    std::uint64_t r = 0;
    for (std::size_t d = 0; d < lo.size(); ++d) {
        r = r * static_cast<std::uint64_t>(extents[d]) +
            static_cast<std::uint64_t>(coords[d] - lo[d]);
    }
    return r;
}

void Region::coords_of(std::uint64_t rank, std::span<Coord> out) const {
    for (std::size_t d = lo.size(); d-- > 0;) {
        auto e = static_cast<std::uint64_t>(extents[d]);
        out[d] = lo[d] + static_cast<Coord>(rank % e);
        rank /= e;
    }
}

Region core_region(const ArraySchema& schema, std::span<const std::int64_t> ordinals) {
    Region r;
    r.lo.resize(schema.ndims());
    r.extents.resize(schema.ndims());
    for (std::size_t d = 0; d < schema.ndims(); ++d) {
        const auto& dim = schema.dim(d);
        r.lo[d] = dim.core_lo(ordinals[d]);
        r.extents[d] = dim.core_hi(ordinals[d]) - r.lo[d] + 1;
    }
    return r;
}

Region extended_region(const ArraySchema& schema, std::span<const std::int64_t> ordinals) {
    Region r;
    r.lo.resize(schema.ndims());
    r.extents.resize(schema.ndims());
    for (std::size_t d = 0; d < schema.ndims(); ++d) {
        const auto& dim = schema.dim(d);
        r.lo[d] = dim.ext_lo(ordinals[d]);
        r.extents[d] = dim.ext_hi(ordinals[d]) - r.lo[d] + 1;
    }
    return r;
}

Chunk make_empty_chunk(const ArraySchema& schema, ChunkId id) {
    Chunk c;
    c.id = std::move(id);
    c.dense = false;
    c.values = ValueArray(schema.value_type());
    c.halo_values = ValueArray(schema.value_type());
    return c;
}

Chunk densified(const ArraySchema& schema, Chunk chunk) {
    if (chunk.dense) return chunk;
    Region core = core_region(schema, chunk.id.ordinals);
    if (chunk.core_count() != core.volume()) {
        throw ValidationError("cannot densify a partially filled chunk");
    }
    // Sparse cells are sorted row-major, which is exactly the dense rank
    // order when the chunk is full.
    chunk.dense = true;
    chunk.coords.clear();
    chunk.coords.shrink_to_fit();
    return chunk;
}

Chunk sparsified(const ArraySchema& schema, Chunk chunk) {
    if (!chunk.dense) return chunk;
    Region core = core_region(schema, chunk.id.ordinals);
    const std::size_t nd = chunk.ndims();
    std::vector<std::uint32_t> coords;
    coords.reserve(chunk.values.size() * nd);
    std::vector<Coord> cur(nd);
    for (std::uint64_t r = 0; r < core.volume(); ++r) {
        core.coords_of(r, cur);
        for (std::size_t d = 0; d < nd; ++d) {
            coords.push_back(static_cast<std::uint32_t>(cur[d] - schema.dim(d).lo));
        }
    }
    chunk.dense = false;
    chunk.coords = std::move(coords);
    return chunk;
}

std::vector<std::uint8_t> encode_chunk(const ArraySchema& schema, const Chunk& chunk) {
    BufWriter w;
    w.put_bytes(kChunkMagic);
    w.put_u16(kChunkFormatVersion);
    w.put_u64(schema_digest(schema));
    w.put_u8(static_cast<std::uint8_t>(chunk.ndims()));
    for (auto o : chunk.id.ordinals) w.put_u32(static_cast<std::uint32_t>(o));
    w.put_u8(chunk.dense ? kEncodingDense : kEncodingSparse);
    w.put_u64(chunk.core_count());
    w.put_u64(chunk.halo_count());

    if (chunk.dense) {
        if (chunk.values.type() == ValueType::uint8) {
            w.put_bytes(chunk.values.vec<std::uint8_t>());
        } else {
            for (std::size_t i = 0; i < chunk.values.size(); ++i) {
                encode_values(w, chunk.values, i);
            }
        }
    } else {
        encode_sparse_records(w, chunk.ndims(), chunk.coords, chunk.values);
    }
    encode_sparse_records(w, chunk.ndims(), chunk.halo_coords, chunk.halo_values);

    std::uint64_t digest = w.digest();
    w.put_u64(digest);
    return w.take();
}

Chunk decode_chunk(const ArraySchema& schema, ChunkId id, std::span<const std::uint8_t> bytes,
                   bool include_halo, const std::string& context) {
    if (bytes.size() < sizeof(kChunkMagic) + 8) {
        throw CorruptionError(context + ": file too short");
    }
    // Verify the trailing digest before trusting any field.
    std::uint64_t stored = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        stored |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
    }
    std::uint64_t actual = fnv1a64(bytes.subspan(0, bytes.size() - 8));
    if (stored != actual) {
        throw CorruptionError(context + ": payload digest mismatch");
    }

    BufReader r(bytes.subspan(0, bytes.size() - 8), context);
    auto magic = r.get_bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kChunkMagic)) {
        throw CorruptionError(context + ": bad magic");
    }
    if (std::uint16_t ver = r.get_u16(); ver != kChunkFormatVersion) {
        throw CorruptionError(context + ": unsupported format version " + std::to_string(ver));
    }
    if (std::uint64_t sd = r.get_u64(); sd != schema_digest(schema)) {
        throw CorruptionError(context + ": schema digest mismatch");
    }
    std::uint8_t nd = r.get_u8();
    if (nd != schema.ndims() || nd != id.ordinals.size()) {
        throw CorruptionError(context + ": dimension count mismatch");
    }
    for (std::size_t d = 0; d < nd; ++d) {
        std::uint32_t o = r.get_u32();
        if (static_cast<std::int64_t>(o) != id.ordinals[d]) {
            throw CorruptionError(context + ": chunk ordinal mismatch");
        }
    }
    std::uint8_t encoding = r.get_u8();
    if (encoding != kEncodingDense && encoding != kEncodingSparse) {
        throw CorruptionError(context + ": unknown encoding " + std::to_string(encoding));
    }
    std::uint64_t core_count = r.get_u64();
    std::uint64_t halo_count = r.get_u64();

    Chunk c = make_empty_chunk(schema, std::move(id));
    if (encoding == kEncodingDense) {
        Region core = core_region(schema, c.id.ordinals);
        if (core_count != core.volume()) {
            throw CorruptionError(context + ": dense cell count does not fill the chunk");
        }
        c.dense = true;
        if (schema.value_type() == ValueType::uint8) {
            auto raw = r.get_bytes(core_count);
            c.values.vec<std::uint8_t>().assign(raw.begin(), raw.end());
        } else {
            c.values.reserve(core_count);
            for (std::uint64_t i = 0; i < core_count; ++i) decode_value(r, c.values);
        }
    } else {
        decode_sparse_records(r, nd, core_count, c.coords, c.values);
    }
    decode_sparse_records(r, nd, halo_count, c.halo_coords, c.halo_values);
    r.expect_end();

    if (!include_halo) {
        c.halo_coords.clear();
        c.halo_values = ValueArray(schema.value_type());
    }
    return c;
}

bool coords_less(std::span<const std::uint32_t> a, std::span<const std::uint32_t> b) {
    return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

void merge_cell_lists(std::size_t ndims, const std::vector<std::uint32_t>& base_coords,
                      const ValueArray& base_vals, const std::vector<std::uint32_t>& upd_coords,
                      const ValueArray& upd_vals, std::vector<std::uint32_t>& out_coords,
                      ValueArray& out_vals) {
    const std::size_t nb = base_vals.size();
    const std::size_t nu = upd_vals.size();
    out_coords.clear();
    out_coords.reserve((nb + nu) * ndims);
    out_vals.clear();
    out_vals.reserve(nb + nu);

    auto base_at = [&](std::size_t i) {
        return std::span<const std::uint32_t>(base_coords.data() + i * ndims, ndims);
    };
    auto upd_at = [&](std::size_t i) {
        return std::span<const std::uint32_t>(upd_coords.data() + i * ndims, ndims);
    };

    std::size_t i = 0, j = 0;
    while (i < nb || j < nu) {
        bool take_base;
        bool drop_base = false;
        if (i == nb) {
            take_base = false;
        } else if (j == nu) {
            take_base = true;
        } else if (coords_less(base_at(i), upd_at(j))) {
            take_base = true;
        } else if (coords_less(upd_at(j), base_at(i))) {
            take_base = false;
        } else {
            take_base = false;  // equal coordinate: the update wins
            drop_base = true;
        }
        if (take_base) {
            auto c = base_at(i);
            out_coords.insert(out_coords.end(), c.begin(), c.end());
            out_vals.append_from(base_vals, i);
            ++i;
        } else {
            auto c = upd_at(j);
            out_coords.insert(out_coords.end(), c.begin(), c.end());
            out_vals.append_from(upd_vals, j);
            ++j;
            if (drop_base) ++i;
        }
    }
}

}  // namespace adb
