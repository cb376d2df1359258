#ifndef ADB_BENCH_HPP
#define ADB_BENCH_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adb/ingest.hpp"
#include "adb/volume.hpp"

namespace adb {

struct BenchMatrix {
    std::vector<int> nodes{1};
    std::vector<int> workers{1};
    std::vector<int> clients{1};
    int reps = 3;
    AssignmentKind assignment = AssignmentKind::block;
    std::size_t batch_size = 0;  // 0 = one slice per insert
};

// Named axis presets for the benchmark matrix.
BenchMatrix preset_matrix(std::string_view name);  // "paper-single-node" | "paper-two-node"
std::vector<std::string> preset_names();

struct ResultRow {
    std::string config_id;
    int nodes = 1;
    int workers_per_node = 1;
    int clients = 1;
    std::int64_t rows = 0;
    std::int64_t cols = 0;
    std::int64_t slices = 0;
    std::uint64_t total_cells = 0;
    double stage_seconds = 0;
    double merge_seconds = 0;
    double total_seconds = 0;
    double rate_stage = 0;
    double rate_total = 0;
    bool fidelity_ok = false;
    int rep = 1;
};

inline constexpr std::string_view kResultsCsvHeader =
    "config_id,nodes,workers_per_node,clients,rows,cols,slices,total_cells,stage_seconds,"
    "merge_seconds,total_seconds,rate_stage,rate_total,fidelity_ok,rep";

std::string config_id(int nodes, int workers, int clients);
std::string to_csv_line(const ResultRow& row);
std::vector<ResultRow> parse_results_csv(std::istream& in);
std::vector<ResultRow> parse_results_csv_file(const std::filesystem::path& path);

// The volume schema the benchmark ingests into: full-plane chunks, one slice
// per chunk, no overlap.
NamedSchema bench_schema(const VolumeData& volume, const std::string& name);

// Streams every slice of the array back out and compares it cell-for-cell
// against the source volume, including the total cell count.
bool verify_against_volume(Engine& engine, const ArrayHandle& array, const VersionPtr& version,
                           const VolumeData& volume);

struct BenchOptions {
    std::filesystem::path data_root;
    std::filesystem::path csv_out;  // empty = do not write a csv
    std::string target_name = "vol";
    std::ostream* progress = nullptr;
};

// Runs every (nodes, workers, clients) cell of the matrix `reps` times. Each
// run stages with fresh arrays, merges, verifies fidelity against the source
// volume, and appends one csv row; a fidelity failure aborts the whole
// matrix. Staging arrays and the target are dropped between runs; the final
// run's target is kept so the data root stays queryable.
std::vector<ResultRow> run_bench(const BenchMatrix& matrix, const VolumeData& volume,
                                 const BenchOptions& options);

struct ConfigSummary {
    std::string config_id;
    int nodes = 1;
    int workers_per_node = 1;
    int clients = 1;
    int runs = 0;
    double rate_stage_mean = 0, rate_stage_min = 0, rate_stage_max = 0;
    double rate_total_mean = 0, rate_total_min = 0, rate_total_max = 0;
};

std::vector<ConfigSummary> summarize(std::span<const ResultRow> rows);

// Per-config table with both rate variants plus the best-configuration line.
void print_report(std::ostream& out, std::span<const ResultRow> rows);

// Whitespace-separated columns suitable for gnuplot's `plot ... using`.
void write_gnuplot(std::ostream& out, std::span<const ConfigSummary> summaries);

}  // namespace adb

#endif  // ADB_BENCH_HPP
