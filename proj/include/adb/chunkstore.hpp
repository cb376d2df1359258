#ifndef ADB_CHUNKSTORE_HPP
#define ADB_CHUNKSTORE_HPP

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adb/chunk.hpp"
#include "adb/schema.hpp"

namespace adb {

// Deterministic chunk-to-shard assignment: round-robin by flattened chunk
// ordinal. Stable for a fixed (schema, shard count).
class ShardMap {
public:
    ShardMap() = default;
    ShardMap(const ArraySchema& schema, int total_shards);

    int shard_of(std::span<const std::int64_t> ordinals) const;
    int total_shards() const { return total_; }

private:
    std::vector<std::int64_t> chunk_counts_;
    int total_ = 1;
};

struct ChunkRef {
    std::string path;  // relative to the store root; may live under another array's directory
    std::uint64_t digest = 0;
};

// An immutable snapshot of one array version. Never modified after commit.
struct ArrayVersion {
    std::uint64_t number = 0;
    std::uint64_t parent = 0;  // 0 = none
    std::map<Ordinals, ChunkRef> manifest;
};

using VersionPtr = std::shared_ptr<const ArrayVersion>;

struct StoreStats {
    std::atomic<std::uint64_t> chunk_reads{0};
    std::atomic<std::uint64_t> chunk_writes{0};
    std::atomic<std::uint64_t> manifest_writes{0};
};

// On-disk chunk storage with append-only versioning. Reads of committed
// versions are safe from any thread; writes to a single array must be
// serialized by the caller (the engine holds a per-array commit lock).
class ChunkStore {
public:
    explicit ChunkStore(std::filesystem::path root);

    void register_array(const std::string& name, ArraySchema schema, std::string dir,
                        ShardMap shards);
    // Loads v<N>.manifest for each number, in the order given.
    void load_versions(const std::string& name, std::span<const std::uint64_t> numbers);
    void unregister_array(const std::string& name, bool delete_manifests);
    bool is_registered(const std::string& name) const;

    // Commits version 1 with an empty manifest.
    VersionPtr create_initial_version(const std::string& array);

    // Copy-on-write commit: rewrites exactly the chunks the batch touches
    // (including neighbor chunks whose overlap halo gains or changes a cell)
    // and shares every other manifest entry with the base version. Validates
    // every coordinate before writing anything.
    VersionPtr write_chunks(const std::string& array, const VersionPtr& base,
                            const CellBatch& cells);

    Chunk read_chunk(const std::string& array, const ArrayVersion& version,
                     const Ordinals& ordinals, bool include_halo) const;

    std::vector<VersionPtr> list_versions(const std::string& array) const;
    VersionPtr version(const std::string& array, std::uint64_t number) const;
    VersionPtr latest(const std::string& array) const;

    // Manifest-level commit used by merge; entries may reference chunk files
    // under other arrays' directories.
    VersionPtr commit_manifest(const std::string& array, std::map<Ordinals, ChunkRef> manifest,
                               std::uint64_t parent);
    ChunkRef write_chunk_file(const std::string& array, std::uint64_t version_number,
                              const Chunk& chunk);

    const ArraySchema& schema_of(const std::string& array) const;
    const ShardMap& shards_of(const std::string& array) const;
    const std::string& dir_of(const std::string& array) const;
    const std::filesystem::path& root() const { return root_; }

    // Chunk paths referenced by any version of any registered array.
    std::set<std::string> referenced_paths() const;

    StoreStats& stats() const { return stats_; }

    // Test instrumentation; set before concurrent use. Events:
    // "write_chunks:start", "write_chunks:committed", "read_chunk".
    std::function<void(std::string_view event, std::string_view array)> on_event;

private:
    struct ArrayEntry {
        ArraySchema schema;
        std::string dir;  // relative to root
        ShardMap shards;
        std::vector<VersionPtr> versions;
        mutable std::mutex versions_mu;
    };

    std::shared_ptr<ArrayEntry> entry(const std::string& name) const;
    VersionPtr append_version(ArrayEntry& e, std::shared_ptr<ArrayVersion> v);
    void write_manifest_file(const ArrayEntry& e, const ArrayVersion& v) const;
    std::shared_ptr<ArrayVersion> read_manifest_file(const ArrayEntry& e,
                                                     std::uint64_t number) const;
    std::string chunk_rel_path(const ArrayEntry& e, const Ordinals& ordinals,
                               std::uint64_t version_number) const;
    void fire(std::string_view event, std::string_view array) const;

    std::filesystem::path root_;
    mutable std::shared_mutex registry_mu_;
    std::map<std::string, std::shared_ptr<ArrayEntry>> arrays_;
    mutable StoreStats stats_;
};

// Filesystem helpers shared with the engine catalog.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& p);
void write_file_bytes(const std::filesystem::path& p, std::span<const std::uint8_t> bytes);

}  // namespace adb

#endif  // ADB_CHUNKSTORE_HPP
