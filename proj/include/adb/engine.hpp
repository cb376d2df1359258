#ifndef ADB_ENGINE_HPP
#define ADB_ENGINE_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "adb/chunk.hpp"
#include "adb/chunkstore.hpp"
#include "adb/schema.hpp"

namespace adb {

struct EngineConfig {
    int nodes = 1;
    int workers_per_node = 1;
    std::filesystem::path data_root;

    int total_shards() const { return nodes * workers_per_node; }
};

// Inclusive axis-aligned coordinate box.
struct CellBox {
    std::vector<Coord> low;
    std::vector<Coord> high;
};

CellBox full_box(const ArraySchema& schema);

// A dense extraction result: row-major values over `extents`, absent cells
// hold the attribute type's zero. `filled` counts the cells actually stored.
struct DenseBlock {
    std::vector<Coord> origin;
    std::vector<std::int64_t> extents;
    ValueArray values;
    std::uint64_t filled = 0;

    std::uint64_t volume() const;
    Region region() const { return Region{origin, extents}; }
};

class Engine;

class ArrayHandle {
public:
    ArrayHandle() = default;
    const std::string& name() const;
    const ArraySchema& schema() const;
    bool valid() const { return state_ != nullptr; }

private:
    friend class Engine;
    struct State;
    explicit ArrayHandle(std::shared_ptr<State> s) : state_(std::move(s)) {}
    std::shared_ptr<State> state_;
};

// Streams cells of one version in row-major coordinate order by merging the
// per-chunk cursors of every box-intersecting chunk. Core cells only; halo
// replicas never appear in query results.
class CellStream {
public:
    bool next(std::vector<Coord>& coords, Value& value);

    CellBatch collect() &&;
    std::uint64_t count() &&;

private:
    friend class Engine;
    struct Cursor;
    CellStream() = default;

    void push_heap_item(std::size_t idx);
    std::size_t pop_min();

    std::vector<std::shared_ptr<Cursor>> cursors_;
    std::vector<std::size_t> heap_;
};

struct EngineHooks {
    // Schedule-observation points for tests: "insert:enter", "insert:locked",
    // "insert:committed", "merge:committed".
    std::function<void(std::string_view point, std::string_view array)> on_point;
};

/*
 * Embedded array engine over a single data root.
 *
 * Catalog layout:
 *   <root>/catalog.bin            append-only journal of array events
 *   <root>/arrays/a<uid>_<name>/  manifests + chunk files per array
 *
 * Concurrency: any number of concurrent readers on committed versions;
 * inserts to one array serialize on that array's commit lock; inserts to
 * different arrays proceed independently. One Engine instance per data root.
 */
class Engine {
public:
    explicit Engine(EngineConfig config);
    ~Engine();

    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    const EngineConfig& config() const { return config_; }

    ArrayHandle create_array(const std::string& name, const ArraySchema& schema);
    ArrayHandle open_array(const std::string& name) const;
    bool has_array(const std::string& name) const;
    std::vector<std::string> array_names() const;
    void drop_array(const std::string& name);

    // Deletes chunk files no version of any live array references.
    std::uint64_t gc();

    VersionPtr insert(const ArrayHandle& array, const CellBatch& cells);

    VersionPtr latest(const ArrayHandle& array) const;
    VersionPtr version(const ArrayHandle& array, std::uint64_t number) const;
    std::vector<VersionPtr> list_versions(const ArrayHandle& array) const;

    CellStream between(const ArrayHandle& array, const VersionPtr& version,
                       const CellBox& box) const;
    CellStream scan(const ArrayHandle& array, const VersionPtr& version) const;
    DenseBlock read_box(const ArrayHandle& array, const VersionPtr& version,
                        const CellBox& box) const;

    // Combines same-schema sources into a new array; where sources collide on
    // a coordinate the earlier source wins. Chunks owned by a single source
    // whose neighborhood is untouched by other sources are referenced at the
    // manifest level without decoding.
    ArrayHandle merge(const std::string& target, std::span<const ArrayHandle> sources);

    Chunk read_chunk(const ArrayHandle& array, const VersionPtr& version, const Ordinals& ordinals,
                     bool include_halo) const;

    int shard_of(const ArrayHandle& array, const Ordinals& ordinals) const;

    // Number of distinct threads that have committed inserts to this array.
    std::size_t writer_count(const ArrayHandle& array) const;

    ChunkStore& store() { return store_; }
    const ChunkStore& store() const { return store_; }
    EngineHooks& hooks() { return hooks_; }

    // Chunks whose core region intersects the box; `box` must be valid.
    std::vector<Ordinals> chunks_intersecting(const ArraySchema& schema, const CellBox& box) const;

private:
    friend class ArrayHandle;

    std::shared_ptr<ArrayHandle::State> state_of(const ArrayHandle& h) const;
    void check_box(const ArraySchema& schema, const CellBox& box) const;
    ArrayHandle create_array_locked(const std::string& name, const ArraySchema& schema);
    void journal_append(std::span<const std::uint8_t> body);
    void journal_created(const std::string& name, const ArraySchema& schema,
                         const std::string& dir, std::uint64_t uid);
    void journal_committed(const std::string& name, std::uint64_t version);
    void journal_dropped(const std::string& name);
    void replay_catalog();
    void fire(std::string_view point, std::string_view array) const;

    EngineConfig config_;
    ChunkStore store_;
    EngineHooks hooks_;

    mutable std::shared_mutex registry_mu_;
    std::map<std::string, std::shared_ptr<ArrayHandle::State>> arrays_;
    std::uint64_t next_uid_ = 1;

    std::mutex catalog_mu_;
    std::ofstream catalog_out_;
};

}  // namespace adb

#endif  // ADB_ENGINE_HPP
