#ifndef ADB_INGEST_HPP
#define ADB_INGEST_HPP

#include <chrono>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "adb/engine.hpp"
#include "adb/volume.hpp"

namespace adb {

// Thrown when one or more ingest clients fail; their staging arrays are left
// partial and no merge is attempted.
class IngestAborted : public Error {
public:
    using Error::Error;
};

enum class AssignmentKind { block, round_robin };

// Partition of the slice coordinate range [slice_lo, slice_hi] across
// clients. Block assignment keeps each client's slices contiguous.
std::vector<std::vector<Coord>> make_slice_assignment(Coord slice_lo, Coord slice_hi,
                                                      int num_clients, AssignmentKind kind);

struct IngestConfig {
    int num_clients = 1;
    std::string target;
    ArraySchema schema;  // 3-dimensional uint8 volume schema; last dim is the slice axis
    std::vector<std::vector<Coord>> slice_assignment;  // rank -> slice coordinates
    std::size_t batch_size = 0;                        // cells per insert; 0 = one slice
};

struct ClientPlan {
    int rank = 0;
    std::string staging_array;  // "{target}__stage_{rank}"
    std::vector<Coord> slices;
    std::size_t batch_size = 0;
};

// Validates that the slice assignment partitions the slice range (disjoint
// and covering) and lays out one plan per client; rank 0 is the coordinator.
std::vector<ClientPlan> plan(const IngestConfig& config);

// Per-slice plane provider for ingest clients; implementations must be safe
// for concurrent reads.
class SliceSource {
public:
    virtual ~SliceSource() = default;
    virtual std::int64_t rows() const = 0;
    virtual std::int64_t cols() const = 0;
    // Fills the row-major rows x cols plane of the 0-based slice index.
    virtual void fill(std::int64_t slice_index, std::span<std::uint8_t> out) const = 0;
};

class VolumeSliceSource final : public SliceSource {
public:
    explicit VolumeSliceSource(const VolumeData& volume) : volume_(&volume) {}
    std::int64_t rows() const override { return volume_->rows(); }
    std::int64_t cols() const override { return volume_->cols(); }
    void fill(std::int64_t slice_index, std::span<std::uint8_t> out) const override {
        volume_->copy_slice(slice_index, out);
    }

private:
    const VolumeData* volume_;
};

struct ClientResult {
    int rank = 0;
    ArrayHandle staging;
    std::uint64_t cells = 0;
    double seconds = 0;
    std::chrono::steady_clock::time_point first_insert{};
    std::chrono::steady_clock::time_point last_commit{};
};

// Creates the staging array and ingests the plan's slices in batches of
// exactly batch_size cells (batches run across slice boundaries). The clock
// starts at the first insert call.
ClientResult run_client(Engine& engine, const ClientPlan& plan, const ArraySchema& schema,
                        const SliceSource& source);

// Merges the staged arrays (rank order) into the target; requires every
// client to have succeeded. Returns the merge wall time via merge_seconds.
ArrayHandle finalize(Engine& engine, std::span<const ArrayHandle> staged,
                     const std::string& target, double& merge_seconds);

struct IngestReport {
    int nodes = 1;
    int workers_per_node = 1;
    int num_clients = 1;
    std::vector<std::int64_t> extents;
    std::uint64_t total_cells = 0;
    double stage_seconds = 0;
    double merge_seconds = 0;
    double total_seconds = 0;
    double rate_stage = 0;  // cells / stage_seconds
    double rate_total = 0;  // cells / (stage_seconds + merge_seconds)
    bool degenerate = false;  // zero cells ingested

    struct PerClient {
        int rank = 0;
        std::uint64_t cells = 0;
        double seconds = 0;
    };
    std::vector<PerClient> per_client;
};

struct MeasureInputs {
    int nodes = 1;
    int workers_per_node = 1;
    int num_clients = 1;
    std::vector<std::int64_t> extents;
    std::vector<ClientResult> clients;
    double merge_seconds = 0;
};

// Computes both rate variants and re-derives every reported number from its
// inputs, throwing MeasurementError if the stage window is below clock
// resolution while cells were ingested.
IngestReport measure(const MeasureInputs& inputs);

struct IngestOutcome {
    ArrayHandle target;
    IngestReport report;
    std::vector<ArrayHandle> staged;
};

// The full two-stage protocol: concurrent SPMD clients stage into private
// arrays (start-gated so their windows overlap), a barrier joins them, and
// the coordinator merges into the target.
IngestOutcome run_ingest(Engine& engine, const IngestConfig& config, const SliceSource& source);

}  // namespace adb

#endif  // ADB_INGEST_HPP
