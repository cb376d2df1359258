#include "adb/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>

#include "adb/binio.hpp"

namespace adb {

namespace {

constexpr std::uint8_t kCatalogMagic[4] = {'A', 'D', 'B', 'T'};
constexpr std::uint16_t kCatalogFormatVersion = 1;

constexpr std::uint8_t kRecArrayCreated = 1;
constexpr std::uint8_t kRecVersionCommitted = 2;
constexpr std::uint8_t kRecArrayDropped = 3;

bool is_identifier(const std::string& s) {
    if (s.empty()) return false;
    auto head = [](char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_'; };
    auto tail = [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; };
    if (!head(s[0])) return false;
    return std::all_of(s.begin() + 1, s.end(), tail);
}

Region intersect(const Region& a, const CellBox& box) {
    Region out;
    out.lo.resize(a.ndims());
    out.extents.resize(a.ndims());
    for (std::size_t d = 0; d < a.ndims(); ++d) {
        Coord lo = std::max(a.lo[d], box.low[d]);
        Coord hi = std::min(a.lo[d] + a.extents[d] - 1, box.high[d]);
        out.lo[d] = lo;
        out.extents[d] = hi - lo + 1;  // callers guarantee a nonempty intersection
    }
    return out;
}

}  // namespace

struct ArrayHandle::State {
    std::string name;
    ArraySchema schema;
    std::atomic<bool> dropped{false};
    std::mutex commit_mu;
    mutable std::mutex writers_mu;
    std::set<std::thread::id> writers;
};

const std::string& ArrayHandle::name() const { return state_->name; }
const ArraySchema& ArrayHandle::schema() const { return state_->schema; }

CellBox full_box(const ArraySchema& schema) {
    CellBox box;
    for (const auto& d : schema.dims()) {
        box.low.push_back(d.lo);
        box.high.push_back(d.hi);
    }
    return box;
}

std::uint64_t DenseBlock::volume() const {
    std::uint64_t v = 1;
    for (auto e : extents) v *= static_cast<std::uint64_t>(e);
    return v;
}

// ---------------------------------------------------------------------------
// CellStream

struct CellStream::Cursor {
    Chunk chunk;
    Region core;
    Region sel;  // box ∩ core, used for dense iteration
    bool dense = false;
    std::uint64_t sel_pos = 0;
    std::uint64_t sel_vol = 0;
    std::size_t sparse_pos = 0;
    std::size_t value_index = 0;
    std::vector<Coord> cur;
    std::vector<Coord> dim_lo;
    std::shared_ptr<const CellBox> box;

    bool position_first() {
        if (dense) {
            sel_vol = sel.volume();
            if (sel_vol == 0) return false;
            sel_pos = 0;
            sel.coords_of(0, cur);
            value_index = static_cast<std::size_t>(core.rank(cur));
            return true;
        }
        sparse_pos = 0;
        return seek_sparse();
    }

    bool advance() {
        if (dense) {
            if (++sel_pos >= sel_vol) return false;
            sel.coords_of(sel_pos, cur);
            value_index = static_cast<std::size_t>(core.rank(cur));
            return true;
        }
        ++sparse_pos;
        return seek_sparse();
    }

private:
    bool seek_sparse() {
        const std::size_t nd = cur.size();
        const std::size_t count = chunk.values.size();
        while (sparse_pos < count) {
            bool inside = true;
            for (std::size_t d = 0; d < nd; ++d) {
                Coord c = dim_lo[d] + static_cast<Coord>(chunk.coords[sparse_pos * nd + d]);
                cur[d] = c;
                if (c < box->low[d] || c > box->high[d]) {
                    inside = false;
                    break;
                }
            }
            if (inside) {
                value_index = sparse_pos;
                return true;
            }
            ++sparse_pos;
        }
        return false;
    }
};

void CellStream::push_heap_item(std::size_t idx) {
    heap_.push_back(idx);
    std::push_heap(heap_.begin(), heap_.end(), [this](std::size_t a, std::size_t b) {
        // std::push_heap builds a max-heap; invert to keep the minimum on top.
        return std::lexicographical_compare(cursors_[b]->cur.begin(), cursors_[b]->cur.end(),
                                            cursors_[a]->cur.begin(), cursors_[a]->cur.end());
    });
}

std::size_t CellStream::pop_min() {
    std::pop_heap(heap_.begin(), heap_.end(), [this](std::size_t a, std::size_t b) {
        return std::lexicographical_compare(cursors_[b]->cur.begin(), cursors_[b]->cur.end(),
                                            cursors_[a]->cur.begin(), cursors_[a]->cur.end());
    });
    std::size_t i = heap_.back();
    heap_.pop_back();
    return i;
}

bool CellStream::next(std::vector<Coord>& coords, Value& value) {
    if (heap_.empty()) return false;
    std::size_t i = pop_min();
    Cursor& c = *cursors_[i];
    coords = c.cur;
    value = c.chunk.values.get(c.value_index);
    if (c.advance()) push_heap_item(i);
    return true;
}

CellBatch CellStream::collect() && {
    CellBatch out;
    std::vector<Coord> coords;
    Value v;
    bool first = true;
    while (next(coords, v)) {
        if (first) {
            out.ndims = coords.size();
            out.values = ValueArray(value_type_of(v));
            first = false;
        }
        out.append(coords, v);
    }
    return out;
}

std::uint64_t CellStream::count() && {
    std::uint64_t n = 0;
    std::vector<Coord> coords;
    Value v;
    while (next(coords, v)) ++n;
    return n;
}

// ---------------------------------------------------------------------------
// Engine

Engine::Engine(EngineConfig config) : config_(std::move(config)), store_(config_.data_root) {
    if (config_.nodes < 1 || config_.workers_per_node < 1) {
        throw ValidationError("engine requires nodes >= 1 and workers_per_node >= 1");
    }
    auto catalog_path = config_.data_root / "catalog.bin";
    if (std::filesystem::exists(catalog_path)) {
        replay_catalog();
    } else {
        BufWriter w;
        w.put_bytes(kCatalogMagic);
        w.put_u16(kCatalogFormatVersion);
        write_file_bytes(catalog_path, w.bytes());
    }
    catalog_out_.open(catalog_path, std::ios::binary | std::ios::app);
    if (!catalog_out_) throw IoError("cannot open catalog " + catalog_path.string());
}

Engine::~Engine() = default;

void Engine::fire(std::string_view point, std::string_view array) const {
    if (hooks_.on_point) hooks_.on_point(point, array);
}

void Engine::journal_append(std::span<const std::uint8_t> body) {
    BufWriter w;
    w.put_u32(static_cast<std::uint32_t>(body.size()));
    w.put_bytes(body);
    w.put_u64(fnv1a64(body));
    std::lock_guard lk(catalog_mu_);
    catalog_out_.write(reinterpret_cast<const char*>(w.bytes().data()),
                       static_cast<std::streamsize>(w.size()));
    catalog_out_.flush();
    if (!catalog_out_) throw IoError("catalog append failed");
}

void Engine::journal_created(const std::string& name, const ArraySchema& schema,
                             const std::string& dir, std::uint64_t uid) {
    BufWriter b;
    b.put_u8(kRecArrayCreated);
    b.put_string32(name);
    b.put_string32(format_schema(schema, name));
    b.put_string32(dir);
    b.put_u64(uid);
    journal_append(b.bytes());
}

void Engine::journal_committed(const std::string& name, std::uint64_t version) {
    BufWriter b;
    b.put_u8(kRecVersionCommitted);
    b.put_string32(name);
    b.put_u64(version);
    journal_append(b.bytes());
}

void Engine::journal_dropped(const std::string& name) {
    BufWriter b;
    b.put_u8(kRecArrayDropped);
    b.put_string32(name);
    journal_append(b.bytes());
}

void Engine::replay_catalog() {
    auto catalog_path = config_.data_root / "catalog.bin";
    auto bytes = read_file_bytes(catalog_path);
    BufReader r(bytes, "catalog.bin");
    auto magic = r.get_bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kCatalogMagic)) {
        throw CorruptionError("catalog.bin: bad magic");
    }
    if (auto ver = r.get_u16(); ver != kCatalogFormatVersion) {
        throw CorruptionError("catalog.bin: unsupported format version " + std::to_string(ver));
    }

    struct Pending {
        ArraySchema schema;
        std::string dir;
        std::uint64_t uid = 0;
        std::vector<std::uint64_t> versions;
    };
    std::map<std::string, Pending> live;
    std::uint64_t max_uid = 0;

    while (!r.at_end()) {
        std::uint32_t len = r.get_u32();
        auto body = r.get_bytes(len);
        std::uint64_t digest = r.get_u64();
        if (fnv1a64(body) != digest) throw CorruptionError("catalog.bin: record digest mismatch");
        BufReader rec(body, "catalog.bin record");
        std::uint8_t type = rec.get_u8();
        if (type == kRecArrayCreated) {
            std::string name = rec.get_string32();
            std::string schema_text = rec.get_string32();
            std::string dir = rec.get_string32();
            std::uint64_t uid = rec.get_u64();
            auto parsed = parse_schema(schema_text);
            if (parsed.name != name) throw CorruptionError("catalog.bin: name mismatch in record");
            live[name] = Pending{std::move(parsed.schema), std::move(dir), uid, {}};
            max_uid = std::max(max_uid, uid);
        } else if (type == kRecVersionCommitted) {
            std::string name = rec.get_string32();
            std::uint64_t number = rec.get_u64();
            auto it = live.find(name);
            if (it == live.end()) {
                throw CorruptionError("catalog.bin: version for unknown array '" + name + "'");
            }
            it->second.versions.push_back(number);
        } else if (type == kRecArrayDropped) {
            live.erase(rec.get_string32());
        } else {
            throw CorruptionError("catalog.bin: unknown record type " + std::to_string(type));
        }
    }

    for (auto& [name, p] : live) {
        store_.register_array(name, p.schema, p.dir, ShardMap(p.schema, config_.total_shards()));
        store_.load_versions(name, p.versions);
        auto st = std::make_shared<ArrayHandle::State>();
        st->name = name;
        st->schema = p.schema;
        arrays_[name] = std::move(st);
    }
    next_uid_ = max_uid + 1;
}

std::shared_ptr<ArrayHandle::State> Engine::state_of(const ArrayHandle& h) const {
    if (!h.valid()) throw ValidationError("invalid array handle");
    if (h.state_->dropped.load()) throw NotFoundError("array '" + h.state_->name + "' was dropped");
    return h.state_;
}

ArrayHandle Engine::create_array(const std::string& name, const ArraySchema& schema) {
    std::unique_lock lk(registry_mu_);
    return create_array_locked(name, schema);
}

ArrayHandle Engine::create_array_locked(const std::string& name, const ArraySchema& schema) {
    if (!is_identifier(name)) {
        throw ValidationError("array name '" + name + "' is not a valid identifier");
    }
    if (arrays_.count(name)) throw ConflictError("array '" + name + "' already exists");
    std::uint64_t uid = next_uid_++;
    std::string dir = "arrays/a" + std::to_string(uid) + "_" + name;
    store_.register_array(name, schema, dir, ShardMap(schema, config_.total_shards()));
    try {
        journal_created(name, schema, dir, uid);
        store_.create_initial_version(name);
        journal_committed(name, 1);
    } catch (...) {
        store_.unregister_array(name, false);
        throw;
    }
    auto st = std::make_shared<ArrayHandle::State>();
    st->name = name;
    st->schema = schema;
    arrays_[name] = st;
    return ArrayHandle(st);
}

ArrayHandle Engine::open_array(const std::string& name) const {
    std::shared_lock lk(registry_mu_);
    auto it = arrays_.find(name);
    if (it == arrays_.end()) throw NotFoundError("array '" + name + "' does not exist");
    return ArrayHandle(it->second);
}

bool Engine::has_array(const std::string& name) const {
    std::shared_lock lk(registry_mu_);
    return arrays_.count(name) != 0;
}

std::vector<std::string> Engine::array_names() const {
    std::shared_lock lk(registry_mu_);
    std::vector<std::string> out;
    out.reserve(arrays_.size());
    for (const auto& [name, st] : arrays_) out.push_back(name);
    return out;
}

void Engine::drop_array(const std::string& name) {
    std::shared_ptr<ArrayHandle::State> st;
    {
        std::unique_lock lk(registry_mu_);
        auto it = arrays_.find(name);
        if (it == arrays_.end()) throw NotFoundError("array '" + name + "' does not exist");
        st = it->second;
        arrays_.erase(it);
    }
    st->dropped.store(true);
    store_.unregister_array(name, /*delete_manifests=*/true);
    journal_dropped(name);
}

std::uint64_t Engine::gc() {
    auto referenced = store_.referenced_paths();
    auto arrays_dir = config_.data_root / "arrays";
    std::uint64_t removed = 0;
    if (std::filesystem::exists(arrays_dir)) {
        for (auto it = std::filesystem::recursive_directory_iterator(arrays_dir);
             it != std::filesystem::recursive_directory_iterator(); ++it) {
            if (!it->is_regular_file() || it->path().extension() != ".chunk") continue;
            auto rel = std::filesystem::relative(it->path(), config_.data_root).generic_string();
            if (!referenced.count(rel)) {
                std::filesystem::remove(it->path());
                ++removed;
            }
        }
        // Sweep empty directories left behind (depth-first).
        std::vector<std::filesystem::path> dirs;
        for (auto it = std::filesystem::recursive_directory_iterator(arrays_dir);
             it != std::filesystem::recursive_directory_iterator(); ++it) {
            if (it->is_directory()) dirs.push_back(it->path());
        }
        std::sort(dirs.begin(), dirs.end(), [](const auto& a, const auto& b) {
            return a.native().size() > b.native().size();
        });
        for (const auto& d : dirs) {
            std::error_code ec;
            if (std::filesystem::is_empty(d, ec) && !ec) std::filesystem::remove(d, ec);
        }
    }
    return removed;
}

VersionPtr Engine::insert(const ArrayHandle& array, const CellBatch& cells) {
    auto st = state_of(array);
    fire("insert:enter", st->name);
    std::lock_guard lk(st->commit_mu);
    if (st->dropped.load()) throw NotFoundError("array '" + st->name + "' was dropped");
    fire("insert:locked", st->name);
    auto base = store_.latest(st->name);
    auto v = store_.write_chunks(st->name, base, cells);
    journal_committed(st->name, v->number);
    {
        std::lock_guard wlk(st->writers_mu);
        st->writers.insert(std::this_thread::get_id());
    }
    fire("insert:committed", st->name);
    return v;
}

VersionPtr Engine::latest(const ArrayHandle& array) const {
    return store_.latest(state_of(array)->name);
}

VersionPtr Engine::version(const ArrayHandle& array, std::uint64_t number) const {
    return store_.version(state_of(array)->name, number);
}

std::vector<VersionPtr> Engine::list_versions(const ArrayHandle& array) const {
    return store_.list_versions(state_of(array)->name);
}

void Engine::check_box(const ArraySchema& schema, const CellBox& box) const {
    if (box.low.size() != schema.ndims() || box.high.size() != schema.ndims()) {
        throw ValidationError("box dimensionality does not match schema");
    }
    for (std::size_t d = 0; d < schema.ndims(); ++d) {
        if (box.low[d] > box.high[d]) {
            throw ValidationError("box is empty in dimension '" + schema.dim(d).name + "'");
        }
    }
    schema.check_bounds(box.low);
    schema.check_bounds(box.high);
}

std::vector<Ordinals> Engine::chunks_intersecting(const ArraySchema& schema,
                                                  const CellBox& box) const {
    const std::size_t nd = schema.ndims();
    std::vector<std::int64_t> lo(nd), hi(nd);
    for (std::size_t d = 0; d < nd; ++d) {
        lo[d] = chunk_of(schema.dim(d), box.low[d]).ordinal;
        hi[d] = chunk_of(schema.dim(d), box.high[d]).ordinal;
    }
    std::vector<Ordinals> out;
    Ordinals cur(lo);
    for (;;) {
        out.push_back(cur);
        std::size_t d = nd;
        while (d-- > 0) {
            if (++cur[d] <= hi[d]) break;
            cur[d] = lo[d];
            if (d == 0) return out;
        }
    }
}

CellStream Engine::between(const ArrayHandle& array, const VersionPtr& version,
                           const CellBox& box) const {
    auto st = state_of(array);
    if (!version) throw VersionError("null version");
    check_box(st->schema, box);

    CellStream s;
    auto box_copy = std::make_shared<const CellBox>(box);
    std::vector<Coord> dim_lo;
    for (const auto& d : st->schema.dims()) dim_lo.push_back(d.lo);

    for (const auto& ords : chunks_intersecting(st->schema, box)) {
        if (!version->manifest.count(ords)) continue;
        auto cursor = std::make_shared<CellStream::Cursor>();
        cursor->chunk = store_.read_chunk(st->name, *version, ords, /*include_halo=*/false);
        cursor->core = core_region(st->schema, ords);
        cursor->sel = intersect(cursor->core, box);
        cursor->dense = cursor->chunk.dense;
        cursor->cur.resize(st->schema.ndims());
        cursor->dim_lo = dim_lo;
        cursor->box = box_copy;
        if (cursor->position_first()) {
            s.cursors_.push_back(std::move(cursor));
            s.push_heap_item(s.cursors_.size() - 1);
        }
    }
    return s;
}

CellStream Engine::scan(const ArrayHandle& array, const VersionPtr& version) const {
    return between(array, version, full_box(state_of(array)->schema));
}

DenseBlock Engine::read_box(const ArrayHandle& array, const VersionPtr& version,
                            const CellBox& box) const {
    auto st = state_of(array);
    if (!version) throw VersionError("null version");
    check_box(st->schema, box);
    const ArraySchema& schema = st->schema;
    const std::size_t nd = schema.ndims();

    DenseBlock block;
    block.origin = box.low;
    block.extents.resize(nd);
    for (std::size_t d = 0; d < nd; ++d) block.extents[d] = box.high[d] - box.low[d] + 1;
    block.values = ValueArray(schema.value_type());
    block.values.resize_zero(block.volume());
    Region breg = block.region();

    for (const auto& ords : chunks_intersecting(schema, box)) {
        if (!version->manifest.count(ords)) continue;
        Chunk chunk = store_.read_chunk(st->name, *version, ords, /*include_halo=*/false);
        Region core = core_region(schema, ords);
        if (chunk.dense) {
            Region sel = intersect(core, box);
            // Copy innermost-dimension runs; they are contiguous in both the
            // chunk's core order and the block's row-major order.
            const auto run = static_cast<std::size_t>(sel.extents[nd - 1]);
            std::uint64_t outer = 1;
            for (std::size_t d = 0; d + 1 < nd; ++d) {
                outer *= static_cast<std::uint64_t>(sel.extents[d]);
            }
            std::vector<Coord> cur(sel.lo);
            chunk.values.visit([&](const auto& src) {
                using V = std::decay_t<decltype(src)>;
                auto& dst = block.values.vec<typename V::value_type>();
                for (std::uint64_t o = 0; o < outer; ++o) {
                    auto s0 = static_cast<std::size_t>(core.rank(cur));
                    auto d0 = static_cast<std::size_t>(breg.rank(cur));
                    std::copy(src.begin() + s0, src.begin() + s0 + run, dst.begin() + d0);
                    for (std::size_t d = nd - 1; d-- > 0;) {
                        if (++cur[d] < sel.lo[d] + sel.extents[d]) break;
                        cur[d] = sel.lo[d];
                    }
                }
            });
            block.filled += sel.volume();
        } else {
            const std::size_t count = chunk.values.size();
            std::vector<Coord> cur(nd);
            for (std::size_t i = 0; i < count; ++i) {
                bool inside = true;
                for (std::size_t d = 0; d < nd; ++d) {
                    cur[d] = schema.dim(d).lo + static_cast<Coord>(chunk.coords[i * nd + d]);
                    if (cur[d] < box.low[d] || cur[d] > box.high[d]) {
                        inside = false;
                        break;
                    }
                }
                if (!inside) continue;
                block.values.set_from(static_cast<std::size_t>(breg.rank(cur)), chunk.values, i);
                ++block.filled;
            }
        }
    }
    return block;
}

ArrayHandle Engine::merge(const std::string& target, std::span<const ArrayHandle> sources) {
    if (sources.empty()) throw ValidationError("merge requires at least one source");
    std::vector<std::shared_ptr<ArrayHandle::State>> src_states;
    for (const auto& s : sources) src_states.push_back(state_of(s));
    const ArraySchema& schema = src_states.front()->schema;
    for (const auto& st : src_states) {
        if (!(st->schema == schema)) {
            throw ValidationError("merge sources must share an identical schema (array '" +
                                  st->name + "' differs)");
        }
    }

    std::vector<VersionPtr> src_versions;
    for (const auto& st : src_states) src_versions.push_back(store_.latest(st->name));

    ArrayHandle handle;
    {
        std::unique_lock lk(registry_mu_);
        handle = create_array_locked(target, schema);
    }
    auto tgt = handle.state_;
    std::lock_guard commit_lk(tgt->commit_mu);

    // Source order is priority order: the earlier source wins a collision.
    std::map<Ordinals, std::vector<std::size_t>> owners;
    for (std::size_t i = 0; i < src_versions.size(); ++i) {
        for (const auto& [ords, ref] : src_versions[i]->manifest) owners[ords].push_back(i);
    }

    const std::size_t nd = schema.ndims();
    bool any_overlap = false;
    for (const auto& d : schema.dims()) any_overlap |= d.overlap > 0;

    auto neighbors = [&](const Ordinals& ords) {
        std::vector<Ordinals> out;
        if (!any_overlap) return out;
        std::vector<std::vector<std::int64_t>> opts(nd);
        for (std::size_t d = 0; d < nd; ++d) {
            opts[d].push_back(0);
            if (schema.dim(d).overlap > 0) {
                if (ords[d] > 0) opts[d].push_back(-1);
                if (ords[d] + 1 < schema.dim(d).chunk_count()) opts[d].push_back(1);
            }
        }
        std::vector<std::size_t> pick(nd, 0);
        for (;;) {
            Ordinals nbr(nd);
            bool all_zero = true;
            for (std::size_t d = 0; d < nd; ++d) {
                nbr[d] = ords[d] + opts[d][pick[d]];
                all_zero &= opts[d][pick[d]] == 0;
            }
            if (!all_zero) out.push_back(std::move(nbr));
            std::size_t d = 0;
            while (d < nd && ++pick[d] == opts[d].size()) {
                pick[d] = 0;
                ++d;
            }
            if (d == nd) break;
        }
        return out;
    };

    // Merged core cells (sparse form) per chunk, first source wins.
    std::map<Ordinals, std::pair<std::vector<std::uint32_t>, ValueArray>> core_memo;
    auto final_core = [&](const Ordinals& ords)
        -> const std::pair<std::vector<std::uint32_t>, ValueArray>& {
        auto it = core_memo.find(ords);
        if (it != core_memo.end()) return it->second;
        const auto& own = owners.at(ords);
        std::vector<std::uint32_t> acc_coords;
        ValueArray acc_vals(schema.value_type());
        for (std::size_t k = own.size(); k-- > 0;) {
            std::size_t src = own[k];
            Chunk c = store_.read_chunk(src_states[src]->name, *src_versions[src], ords, false);
            c = sparsified(schema, std::move(c));
            if (acc_vals.empty()) {
                acc_coords = std::move(c.coords);
                acc_vals = std::move(c.values);
            } else {
                std::vector<std::uint32_t> mc;
                ValueArray mv(schema.value_type());
                merge_cell_lists(nd, acc_coords, acc_vals, c.coords, c.values, mc, mv);
                acc_coords = std::move(mc);
                acc_vals = std::move(mv);
            }
        }
        it = core_memo.emplace(ords, std::make_pair(std::move(acc_coords), std::move(acc_vals)))
                 .first;
        return it->second;
    };

    std::map<Ordinals, ChunkRef> manifest;
    for (const auto& [ords, own] : owners) {
        bool rewrite = own.size() > 1;
        if (!rewrite) {
            for (const auto& nbr : neighbors(ords)) {
                auto it = owners.find(nbr);
                if (it != owners.end() && it->second != own) {
                    rewrite = true;
                    break;
                }
            }
        }
        if (!rewrite) {
            manifest[ords] = src_versions[own.front()]->manifest.at(ords);
            continue;
        }

        Chunk out = make_empty_chunk(schema, ChunkId{target, ords});
        const auto& [core_coords, core_vals] = final_core(ords);
        out.coords = core_coords;
        out.values = core_vals;

        // Rebuild the halo from the merged cores of the owning neighbors.
        Region ext = extended_region(schema, ords);
        std::vector<std::size_t> order;
        std::vector<std::uint32_t> hc;
        ValueArray hv(schema.value_type());
        for (const auto& nbr : neighbors(ords)) {
            if (!owners.count(nbr)) continue;
            const auto& [ncoords, nvals] = final_core(nbr);
            for (std::size_t i = 0; i < nvals.size(); ++i) {
                bool inside = true;
                for (std::size_t d = 0; d < nd; ++d) {
                    Coord c = schema.dim(d).lo + static_cast<Coord>(ncoords[i * nd + d]);
                    if (c < ext.lo[d] || c >= ext.lo[d] + ext.extents[d]) {
                        inside = false;
                        break;
                    }
                }
                if (!inside) continue;
                for (std::size_t d = 0; d < nd; ++d) hc.push_back(ncoords[i * nd + d]);
                hv.append_from(nvals, i);
            }
        }
        if (!hv.empty()) {
            std::vector<std::size_t> idx(hv.size());
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
                return coords_less(std::span(hc).subspan(a * nd, nd),
                                   std::span(hc).subspan(b * nd, nd));
            });
            std::vector<std::uint32_t> sc;
            sc.reserve(hc.size());
            for (auto i : idx) {
                sc.insert(sc.end(), hc.begin() + i * nd, hc.begin() + (i + 1) * nd);
            }
            out.halo_coords = std::move(sc);
            out.halo_values = ValueArray::gather(hv, idx);
        }

        Region core = core_region(schema, ords);
        if (out.core_count() == core.volume()) out = densified(schema, std::move(out));
        manifest[ords] = store_.write_chunk_file(target, 2, out);
    }

    store_.commit_manifest(target, std::move(manifest), 1);
    journal_committed(target, 2);
    fire("merge:committed", target);
    return handle;
}

Chunk Engine::read_chunk(const ArrayHandle& array, const VersionPtr& version,
                         const Ordinals& ordinals, bool include_halo) const {
    auto st = state_of(array);
    if (!version) throw VersionError("null version");
    return store_.read_chunk(st->name, *version, ordinals, include_halo);
}

int Engine::shard_of(const ArrayHandle& array, const Ordinals& ordinals) const {
    return store_.shards_of(state_of(array)->name).shard_of(ordinals);
}

std::size_t Engine::writer_count(const ArrayHandle& array) const {
    auto st = state_of(array);
    std::lock_guard lk(st->writers_mu);
    return st->writers.size();
}

}  // namespace adb
