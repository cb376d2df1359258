#include "adb/chunkstore.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include "adb/binio.hpp"

namespace adb {

namespace {

constexpr std::uint8_t kManifestMagic[4] = {'A', 'D', 'B', 'M'};
constexpr std::uint16_t kManifestFormatVersion = 1;

std::uint64_t trailing_digest(std::span<const std::uint8_t> bytes) {
    std::uint64_t d = 0;
    for (std::size_t i = 0; i < 8; ++i) {
        d |= static_cast<std::uint64_t>(bytes[bytes.size() - 8 + i]) << (8 * i);
    }
    return d;
}

void check_storage_limits(const ArraySchema& schema) {
    if (schema.ndims() > 255) {
        throw ValidationError("storage format supports at most 255 dimensions");
    }
    for (const auto& d : schema.dims()) {
        if (d.extent() > static_cast<Coord>(std::numeric_limits<std::uint32_t>::max())) {
            throw ValidationError("dimension '" + d.name +
                                  "': extent exceeds the storage format's u32 coordinate range");
        }
    }
    schema.total_chunks();  // throws on overflow
}

}  // namespace

ShardMap::ShardMap(const ArraySchema& schema, int total_shards) : total_(total_shards) {
    if (total_shards < 1) throw ValidationError("shard count must be >= 1");
    chunk_counts_.reserve(schema.ndims());
    for (const auto& d : schema.dims()) chunk_counts_.push_back(d.chunk_count());
}

int ShardMap::shard_of(std::span<const std::int64_t> ordinals) const {
    std::uint64_t flat = 0;
    for (std::size_t d = 0; d < chunk_counts_.size(); ++d) {
        flat = flat * static_cast<std::uint64_t>(chunk_counts_[d]) +
               static_cast<std::uint64_t>(ordinals[d]);
    }
    return static_cast<int>(flat % static_cast<std::uint64_t>(total_));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw IoError("cannot open " + p.string());
    in.seekg(0, std::ios::end);
    auto n = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<std::uint8_t> bytes(n);
    if (n > 0) in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(n));
    if (!in) throw IoError("short read from " + p.string());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& p, std::span<const std::uint8_t> bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + p.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + p.string());
}

ChunkStore::ChunkStore(std::filesystem::path root) : root_(std::move(root)) {
    std::filesystem::create_directories(root_);
}

void ChunkStore::fire(std::string_view event, std::string_view array) const {
    if (on_event) on_event(event, array);
}

void ChunkStore::register_array(const std::string& name, ArraySchema schema, std::string dir,
                                ShardMap shards) {
    check_storage_limits(schema);
    auto e = std::make_shared<ArrayEntry>();
    e->schema = std::move(schema);
    e->dir = std::move(dir);
    e->shards = std::move(shards);
    std::filesystem::create_directories(root_ / e->dir / "chunks");

    std::unique_lock lk(registry_mu_);
    if (!arrays_.emplace(name, std::move(e)).second) {
        throw ConflictError("array '" + name + "' already registered");
    }
}

void ChunkStore::load_versions(const std::string& name, std::span<const std::uint64_t> numbers) {
    auto e = entry(name);
    std::lock_guard lk(e->versions_mu);
    for (auto n : numbers) e->versions.push_back(read_manifest_file(*e, n));
}

void ChunkStore::unregister_array(const std::string& name, bool delete_manifests) {
    std::shared_ptr<ArrayEntry> e;
    {
        std::unique_lock lk(registry_mu_);
        auto it = arrays_.find(name);
        if (it == arrays_.end()) throw NotFoundError("array '" + name + "' not registered");
        e = it->second;
        arrays_.erase(it);
    }
    if (delete_manifests) {
        std::lock_guard lk(e->versions_mu);
        for (const auto& v : e->versions) {
            std::error_code ec;
            std::filesystem::remove(root_ / e->dir / ("v" + std::to_string(v->number) + ".manifest"),
                                    ec);
        }
    }
}

bool ChunkStore::is_registered(const std::string& name) const {
    std::shared_lock lk(registry_mu_);
    return arrays_.count(name) != 0;
}

std::shared_ptr<ChunkStore::ArrayEntry> ChunkStore::entry(const std::string& name) const {
    std::shared_lock lk(registry_mu_);
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw NotFoundError("array '" + name + "' not registered");
    return it->second;
}

VersionPtr ChunkStore::append_version(ArrayEntry& e, std::shared_ptr<ArrayVersion> v) {
    write_manifest_file(e, *v);
    VersionPtr ptr = std::move(v);
    std::lock_guard lk(e.versions_mu);
    e.versions.push_back(ptr);
    return ptr;
}

VersionPtr ChunkStore::create_initial_version(const std::string& array) {
    auto e = entry(array);
    auto v = std::make_shared<ArrayVersion>();
    v->number = 1;
    v->parent = 0;
    return append_version(*e, std::move(v));
}

std::string ChunkStore::chunk_rel_path(const ArrayEntry& e, const Ordinals& ordinals,
                                       std::uint64_t version_number) const {
    std::string p = e.dir + "/chunks/s" + std::to_string(e.shards.shard_of(ordinals)) + "/c";
    for (std::size_t d = 0; d < ordinals.size(); ++d) {
        if (d) p += '_';
        p += std::to_string(ordinals[d]);
    }
    p += "_v" + std::to_string(version_number) + ".chunk";
    return p;
}

VersionPtr ChunkStore::write_chunks(const std::string& array, const VersionPtr& base,
                                    const CellBatch& cells) {
    auto e = entry(array);
    const ArraySchema& schema = e->schema;
    const std::size_t nd = schema.ndims();
    if (!cells.empty() && cells.ndims != nd) {
        throw ValidationError("batch dimensionality " + std::to_string(cells.ndims) +
                              " does not match schema (" + std::to_string(nd) + ")");
    }
    if (!cells.empty() && cells.values.type() != schema.value_type()) {
        throw TypeError("batch value type does not match the array attribute");
    }
    // Validate everything up front: a bad coordinate must leave no trace.
    const std::size_t n = cells.size();
    for (std::size_t i = 0; i < n; ++i) schema.check_bounds(cells.cell(i));

    fire("write_chunks:start", array);

    const std::uint64_t newver = base ? base->number + 1 : 1;
    bool any_overlap = false;
    for (const auto& d : schema.dims()) any_overlap |= d.overlap > 0;

    // Group cells by primary chunk (stable, so batch order survives within a
    // group and "last occurrence wins" falls out of the dedupe below).
    std::vector<std::uint64_t> flat_of(n);
    for (std::size_t i = 0; i < n; ++i) {
        auto c = cells.cell(i);
        std::uint64_t flat = 0;
        for (std::size_t d = 0; d < nd; ++d) {
            const auto& dim = schema.dim(d);
            flat = flat * static_cast<std::uint64_t>(dim.chunk_count()) +
                   static_cast<std::uint64_t>((c[d] - dim.lo) / dim.chunk_len);
        }
        flat_of[i] = flat;
    }
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return flat_of[a] < flat_of[b]; });

    struct Working {
        Chunk chunk;
    };
    std::map<Ordinals, Working> touched;
    auto working = [&](const Ordinals& ords) -> Chunk& {
        auto it = touched.find(ords);
        if (it == touched.end()) {
            Chunk c = base && base->manifest.count(ords)
                          ? read_chunk(array, *base, ords, /*include_halo=*/true)
                          : make_empty_chunk(schema, ChunkId{array, ords});
            it = touched.emplace(ords, Working{std::move(c)}).first;
        }
        return it->second.chunk;
    };

    // Halo contributions discovered while processing core groups, keyed by
    // the neighbor chunk. Cells are appended in sorted coordinate order.
    std::map<Ordinals, std::pair<std::vector<std::uint32_t>, ValueArray>> halo_adds;

    std::size_t g = 0;
    while (g < n) {
        std::size_t g_end = g;
        while (g_end < n && flat_of[order[g_end]] == flat_of[order[g]]) ++g_end;

        Ordinals ords(nd);
        {
            auto c = cells.cell(order[g]);
            for (std::size_t d = 0; d < nd; ++d) {
                ords[d] = (c[d] - schema.dim(d).lo) / schema.dim(d).chunk_len;
            }
        }
        Region core = core_region(schema, ords);

        // Dedupe within the batch: last occurrence of a coordinate wins.
        const std::size_t m = g_end - g;
        std::vector<std::uint64_t> rank(m);
        for (std::size_t k = 0; k < m; ++k) rank[k] = core.rank(cells.cell(order[g + k]));
        std::vector<std::uint32_t> keep;  // indices into the group, ascending rank
        keep.reserve(m);
        bool presorted = true;
        for (std::size_t k = 1; k < m; ++k) {
            if (rank[k] <= rank[k - 1]) {
                presorted = false;
                break;
            }
        }
        if (presorted) {
            for (std::size_t k = 0; k < m; ++k) keep.push_back(static_cast<std::uint32_t>(k));
        } else {
            std::vector<std::uint32_t> idx(m);
            for (std::size_t k = 0; k < m; ++k) idx[k] = static_cast<std::uint32_t>(k);
            std::sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) {
                return rank[a] != rank[b] ? rank[a] < rank[b] : a < b;
            });
            for (std::size_t k = 0; k < m; ++k) {
                if (k + 1 < m && rank[idx[k]] == rank[idx[k + 1]]) continue;
                keep.push_back(idx[k]);
            }
        }

        std::vector<std::uint32_t> upd_coords;
        upd_coords.reserve(keep.size() * nd);
        std::vector<std::size_t> batch_idx;
        batch_idx.reserve(keep.size());
        for (auto k : keep) {
            auto c = cells.cell(order[g + k]);
            for (std::size_t d = 0; d < nd; ++d) {
                upd_coords.push_back(static_cast<std::uint32_t>(c[d] - schema.dim(d).lo));
            }
            batch_idx.push_back(order[g + k]);
        }
        ValueArray upd_vals = ValueArray::gather(cells.values, batch_idx);

        Chunk& chunk = working(ords);
        if (chunk.dense) {
            // A dense chunk is full by invariant, so every write is an
            // in-place overwrite.
            for (std::size_t k = 0; k < keep.size(); ++k) {
                chunk.values.set_from(rank[keep[k]], upd_vals, k);
            }
        } else if (chunk.core_count() == 0) {
            chunk.coords = std::move(upd_coords);
            chunk.values = upd_vals;
        } else {
            std::vector<std::uint32_t> merged_coords;
            ValueArray merged_vals(schema.value_type());
            merge_cell_lists(nd, chunk.coords, chunk.values, upd_coords, upd_vals, merged_coords,
                             merged_vals);
            chunk.coords = std::move(merged_coords);
            chunk.values = std::move(merged_vals);
        }
        if (!chunk.dense && chunk.core_count() == core.volume()) {
            chunk = densified(schema, std::move(chunk));
        }

        if (any_overlap) {
            // Replicate boundary cells into every neighbor whose extended
            // region contains them. keep is rank-sorted, so each neighbor's
            // contribution list comes out sorted as well.
            std::vector<std::vector<int>> dim_deltas(nd);
            for (std::size_t k = 0; k < keep.size(); ++k) {
                auto c = cells.cell(batch_idx[k]);
                bool near_boundary = false;
                for (std::size_t d = 0; d < nd; ++d) {
                    const auto& dim = schema.dim(d);
                    auto& opts = dim_deltas[d];
                    opts.clear();
                    opts.push_back(0);
                    Coord off = (c[d] - dim.lo) - ords[d] * dim.chunk_len;
                    if (ords[d] > 0 && off < dim.overlap) {
                        opts.push_back(-1);
                        near_boundary = true;
                    }
                    if (ords[d] + 1 < dim.chunk_count() && off >= dim.chunk_len - dim.overlap) {
                        opts.push_back(1);
                        near_boundary = true;
                    }
                }
                if (!near_boundary) continue;
                std::vector<std::size_t> pick(nd, 0);
                Ordinals nbr(nd);
                for (;;) {
                    bool all_zero = true;
                    for (std::size_t d = 0; d < nd; ++d) {
                        nbr[d] = ords[d] + dim_deltas[d][pick[d]];
                        all_zero &= dim_deltas[d][pick[d]] == 0;
                    }
                    if (!all_zero) {
                        auto& [hc, hv] = halo_adds
                                             .try_emplace(nbr, std::vector<std::uint32_t>{},
                                                          ValueArray(schema.value_type()))
                                             .first->second;
                        for (std::size_t d = 0; d < nd; ++d) {
                            hc.push_back(static_cast<std::uint32_t>(c[d] - schema.dim(d).lo));
                        }
                        hv.append_from(upd_vals, k);
                    }
                    std::size_t d = 0;
                    while (d < nd && ++pick[d] == dim_deltas[d].size()) {
                        pick[d] = 0;
                        ++d;
                    }
                    if (d == nd) break;
                }
            }
        }
        g = g_end;
    }

    for (auto& [ords, add] : halo_adds) {
        // Contributions arrive grouped by primary chunk; across groups the
        // coordinate order is not globally sorted, so restore it first.
        // Coordinates are unique (each cell has one primary).
        auto& [add_coords, add_vals] = add;
        const std::size_t m = add_vals.size();
        bool sorted = true;
        for (std::size_t i = 1; i < m && sorted; ++i) {
            sorted = coords_less(std::span(add_coords).subspan((i - 1) * nd, nd),
                                 std::span(add_coords).subspan(i * nd, nd));
        }
        if (!sorted) {
            std::vector<std::size_t> idx(m);
            for (std::size_t i = 0; i < m; ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                return coords_less(std::span(add_coords).subspan(a * nd, nd),
                                   std::span(add_coords).subspan(b * nd, nd));
            });
            std::vector<std::uint32_t> sc;
            sc.reserve(add_coords.size());
            for (auto i : idx) {
                sc.insert(sc.end(), add_coords.begin() + static_cast<std::ptrdiff_t>(i * nd),
                          add_coords.begin() + static_cast<std::ptrdiff_t>((i + 1) * nd));
            }
            add_coords = std::move(sc);
            add_vals = ValueArray::gather(add_vals, idx);
        }

        Chunk& chunk = working(ords);
        std::vector<std::uint32_t> merged_coords;
        ValueArray merged_vals(schema.value_type());
        merge_cell_lists(nd, chunk.halo_coords, chunk.halo_values, add_coords, add_vals,
                         merged_coords, merged_vals);
        chunk.halo_coords = std::move(merged_coords);
        chunk.halo_values = std::move(merged_vals);
    }

    // Persist: chunk files first, manifest last. A failure mid-way leaves
    // only unreferenced files behind, never a new version.
    auto v = std::make_shared<ArrayVersion>();
    v->number = newver;
    v->parent = base ? base->number : 0;
    if (base) v->manifest = base->manifest;
    for (auto& [ords, w] : touched) {
        v->manifest[ords] = write_chunk_file(array, newver, w.chunk);
    }
    auto out = append_version(*e, std::move(v));
    fire("write_chunks:committed", array);
    return out;
}

ChunkRef ChunkStore::write_chunk_file(const std::string& array, std::uint64_t version_number,
                                      const Chunk& chunk) {
    auto e = entry(array);
    auto bytes = encode_chunk(e->schema, chunk);
    std::string rel = chunk_rel_path(*e, chunk.id.ordinals, version_number);
    auto abs = root_ / rel;
    std::filesystem::create_directories(abs.parent_path());
    write_file_bytes(abs, bytes);
    stats_.chunk_writes.fetch_add(1, std::memory_order_relaxed);
    return ChunkRef{rel, trailing_digest(bytes)};
}

Chunk ChunkStore::read_chunk(const std::string& array, const ArrayVersion& version,
                             const Ordinals& ordinals, bool include_halo) const {
    auto e = entry(array);
    const ArraySchema& schema = e->schema;
    if (ordinals.size() != schema.ndims()) {
        throw ValidationError("chunk ordinal tuple has wrong dimensionality");
    }
    for (std::size_t d = 0; d < schema.ndims(); ++d) {
        if (ordinals[d] < 0 || ordinals[d] >= schema.dim(d).chunk_count()) {
            throw RangeError("chunk ordinal " + std::to_string(ordinals[d]) +
                             " out of range for dimension '" + schema.dim(d).name + "'");
        }
    }
    auto it = version.manifest.find(ordinals);
    if (it == version.manifest.end()) {
        return make_empty_chunk(schema, ChunkId{array, ordinals});
    }
    fire("read_chunk", array);
    auto abs = root_ / it->second.path;
    auto bytes = read_file_bytes(abs);
    stats_.chunk_reads.fetch_add(1, std::memory_order_relaxed);
    if (bytes.size() < 8 || trailing_digest(bytes) != it->second.digest) {
        throw CorruptionError(it->second.path + ": content digest does not match manifest");
    }
    return decode_chunk(schema, ChunkId{array, ordinals}, bytes, include_halo, it->second.path);
}

std::vector<VersionPtr> ChunkStore::list_versions(const std::string& array) const {
    auto e = entry(array);
    std::lock_guard lk(e->versions_mu);
    return e->versions;
}

VersionPtr ChunkStore::version(const std::string& array, std::uint64_t number) const {
    auto e = entry(array);
    std::lock_guard lk(e->versions_mu);
    for (const auto& v : e->versions) {
        if (v->number == number) return v;
    }
    throw VersionError("array '" + array + "' has no version " + std::to_string(number));
}

VersionPtr ChunkStore::latest(const std::string& array) const {
    auto e = entry(array);
    std::lock_guard lk(e->versions_mu);
    if (e->versions.empty()) throw VersionError("array '" + array + "' has no versions");
    return e->versions.back();
}

VersionPtr ChunkStore::commit_manifest(const std::string& array,
                                       std::map<Ordinals, ChunkRef> manifest,
                                       std::uint64_t parent) {
    auto e = entry(array);
    auto v = std::make_shared<ArrayVersion>();
    v->parent = parent;
    v->number = parent + 1;
    v->manifest = std::move(manifest);
    return append_version(*e, std::move(v));
}

void ChunkStore::write_manifest_file(const ArrayEntry& e, const ArrayVersion& v) const {
    BufWriter w;
    w.put_bytes(kManifestMagic);
    w.put_u16(kManifestFormatVersion);
    w.put_u64(schema_digest(e.schema));
    w.put_u64(v.number);
    w.put_u64(v.parent);
    w.put_u64(v.manifest.size());
    for (const auto& [ords, ref] : v.manifest) {
        w.put_u8(static_cast<std::uint8_t>(ords.size()));
        for (auto o : ords) w.put_u32(static_cast<std::uint32_t>(o));
        w.put_string32(ref.path);
        w.put_u64(ref.digest);
    }
    w.put_u64(w.digest());
    write_file_bytes(root_ / e.dir / ("v" + std::to_string(v.number) + ".manifest"), w.bytes());
    stats_.manifest_writes.fetch_add(1, std::memory_order_relaxed);
}

std::shared_ptr<ArrayVersion> ChunkStore::read_manifest_file(const ArrayEntry& e,
                                                             std::uint64_t number) const {
    std::string rel = e.dir + "/v" + std::to_string(number) + ".manifest";
    auto bytes = read_file_bytes(root_ / rel);
    std::span<const std::uint8_t> body(bytes.data(), bytes.size() >= 8 ? bytes.size() - 8 : 0);
    if (bytes.size() < 8 || trailing_digest(bytes) != fnv1a64(body)) {
        throw CorruptionError(rel + ": manifest digest mismatch");
    }
    BufReader r(body, rel);
    auto magic = r.get_bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kManifestMagic)) {
        throw CorruptionError(rel + ": bad magic");
    }
    if (auto ver = r.get_u16(); ver != kManifestFormatVersion) {
        throw CorruptionError(rel + ": unsupported format version " + std::to_string(ver));
    }
    if (auto sd = r.get_u64(); sd != schema_digest(e.schema)) {
        throw CorruptionError(rel + ": schema digest mismatch");
    }
    auto v = std::make_shared<ArrayVersion>();
    v->number = r.get_u64();
    v->parent = r.get_u64();
    if (v->number != number) throw CorruptionError(rel + ": version number mismatch");
    std::uint64_t count = r.get_u64();
    for (std::uint64_t i = 0; i < count; ++i) {
        std::uint8_t nd = r.get_u8();
        Ordinals ords(nd);
        for (std::size_t d = 0; d < nd; ++d) ords[d] = r.get_u32();
        ChunkRef ref;
        ref.path = r.get_string32();
        ref.digest = r.get_u64();
        v->manifest.emplace(std::move(ords), std::move(ref));
    }
    r.expect_end();
    return v;
}

const ArraySchema& ChunkStore::schema_of(const std::string& array) const {
    return entry(array)->schema;
}

const ShardMap& ChunkStore::shards_of(const std::string& array) const {
    return entry(array)->shards;
}

const std::string& ChunkStore::dir_of(const std::string& array) const {
    return entry(array)->dir;
}

std::set<std::string> ChunkStore::referenced_paths() const {
    std::vector<std::shared_ptr<ArrayEntry>> entries;
    {
        std::shared_lock lk(registry_mu_);
        for (const auto& [name, e] : arrays_) entries.push_back(e);
    }
    std::set<std::string> out;
    for (const auto& e : entries) {
        std::lock_guard lk(e->versions_mu);
        for (const auto& v : e->versions) {
            for (const auto& [ords, ref] : v->manifest) out.insert(ref.path);
        }
    }
    return out;
}

}  // namespace adb
