#include "adb/bench.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

namespace adb {

namespace {

std::string format_double(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, r.ptr);
}

// Display-only rounding for the report table; the csv keeps full precision.
std::string format_rate(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.0f", v);
    return buf;
}

double parse_double_field(const std::string& s, std::size_t line) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw ParseError("line " + std::to_string(line) + ": bad number '" + s + "'", line);
    }
    return v;
}

std::int64_t parse_int_field(const std::string& s, std::size_t line) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size()) {
        throw ParseError("line " + std::to_string(line) + ": bad integer '" + s + "'", line);
    }
    return v;
}

}  // namespace

BenchMatrix preset_matrix(std::string_view name) {
    BenchMatrix m;
    if (name == "paper-single-node") {
        m.nodes = {1};
        m.workers = {1, 4, 8, 12, 16};
        m.clients = {2, 4, 8, 12};
        return m;
    }
    if (name == "paper-two-node") {
        m.nodes = {2};
        m.workers = {2, 4, 8, 16};
        m.clients = {2, 4, 8, 12};
        return m;
    }
    throw ValidationError("unknown preset '" + std::string(name) +
                          "' (expected paper-single-node or paper-two-node)");
}

std::vector<std::string> preset_names() { return {"paper-single-node", "paper-two-node"}; }

std::string config_id(int nodes, int workers, int clients) {
    return "n" + std::to_string(nodes) + "_w" + std::to_string(workers) + "_c" +
           std::to_string(clients);
}

std::string to_csv_line(const ResultRow& r) {
    std::string out = r.config_id;
    out += ',' + std::to_string(r.nodes);
    out += ',' + std::to_string(r.workers_per_node);
    out += ',' + std::to_string(r.clients);
    out += ',' + std::to_string(r.rows);
    out += ',' + std::to_string(r.cols);
    out += ',' + std::to_string(r.slices);
    out += ',' + std::to_string(r.total_cells);
    out += ',' + format_double(r.stage_seconds);
    out += ',' + format_double(r.merge_seconds);
    out += ',' + format_double(r.total_seconds);
    out += ',' + format_double(r.rate_stage);
    out += ',' + format_double(r.rate_total);
    out += ',';
    out += r.fidelity_ok ? "true" : "false";
    out += ',' + std::to_string(r.rep);
    return out;
}

std::vector<ResultRow> parse_results_csv(std::istream& in) {
    std::string line;
    std::size_t lineno = 0;
    if (!std::getline(in, line)) throw ParseError("empty csv", 1);
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != kResultsCsvHeader) {
        throw ParseError("line 1: unexpected csv header", 1);
    }

    std::vector<ResultRow> rows;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::size_t start = 0;
        for (;;) {
            auto comma = line.find(',', start);
            if (comma == std::string::npos) {
                f.push_back(line.substr(start));
                break;
            }
            f.push_back(line.substr(start, comma - start));
            start = comma + 1;
        }
        if (f.size() != 15) {
            throw ParseError("line " + std::to_string(lineno) + ": expected 15 fields, got " +
                                 std::to_string(f.size()),
                             lineno);
        }
        ResultRow r;
        r.config_id = f[0];
        r.nodes = static_cast<int>(parse_int_field(f[1], lineno));
        r.workers_per_node = static_cast<int>(parse_int_field(f[2], lineno));
        r.clients = static_cast<int>(parse_int_field(f[3], lineno));
        r.rows = parse_int_field(f[4], lineno);
        r.cols = parse_int_field(f[5], lineno);
        r.slices = parse_int_field(f[6], lineno);
        r.total_cells = static_cast<std::uint64_t>(parse_int_field(f[7], lineno));
        r.stage_seconds = parse_double_field(f[8], lineno);
        r.merge_seconds = parse_double_field(f[9], lineno);
        r.total_seconds = parse_double_field(f[10], lineno);
        r.rate_stage = parse_double_field(f[11], lineno);
        r.rate_total = parse_double_field(f[12], lineno);
        if (f[13] == "true") {
            r.fidelity_ok = true;
        } else if (f[13] == "false") {
            r.fidelity_ok = false;
        } else {
            throw ParseError("line " + std::to_string(lineno) + ": bad bool '" + f[13] + "'",
                             lineno);
        }
        r.rep = static_cast<int>(parse_int_field(f[14], lineno));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::vector<ResultRow> parse_results_csv_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return parse_results_csv(in);
}

NamedSchema bench_schema(const VolumeData& volume, const std::string& name) {
    std::vector<DimensionSpec> dims;
    dims.push_back({"row", 1, volume.rows(), volume.rows(), 0});
    dims.push_back({"col", 1, volume.cols(), volume.cols(), 0});
    dims.push_back({"slice", 1, volume.slices(), 1, 0});
    return NamedSchema{name, ArraySchema({{"val", ValueType::uint8}}, std::move(dims))};
}

bool verify_against_volume(Engine& engine, const ArrayHandle& array, const VersionPtr& version,
                           const VolumeData& volume) {
    const std::int64_t R = volume.rows(), C = volume.cols(), S = volume.slices();
    const auto& schema = array.schema();
    if (schema.ndims() != 3 || schema.dim(0).extent() != R || schema.dim(1).extent() != C ||
        schema.dim(2).extent() != S) {
        return false;
    }
    const Coord r0 = schema.dim(0).lo, c0 = schema.dim(1).lo, s0 = schema.dim(2).lo;
    for (std::int64_t s = 0; s < S; ++s) {
        CellBox box{{r0, c0, s0 + s}, {r0 + R - 1, c0 + C - 1, s0 + s}};
        DenseBlock block = engine.read_box(array, version, box);
        if (block.filled != static_cast<std::uint64_t>(R * C)) return false;
        const auto& vals = block.values.vec<std::uint8_t>();
        for (std::int64_t r = 0; r < R; ++r) {
            for (std::int64_t c = 0; c < C; ++c) {
                if (vals[static_cast<std::size_t>(r * C + c)] != volume.at(r, c, s)) return false;
            }
        }
    }
    return true;
}

std::vector<ResultRow> run_bench(const BenchMatrix& matrix, const VolumeData& volume,
                                 const BenchOptions& options) {
    if (matrix.nodes.empty() || matrix.workers.empty() || matrix.clients.empty()) {
        throw ValidationError("every benchmark axis needs at least one entry");
    }
    if (matrix.reps < 1) throw ValidationError("reps must be >= 1");

    std::ofstream csv;
    if (!options.csv_out.empty()) {
        csv.open(options.csv_out, std::ios::trunc);
        if (!csv) throw IoError("cannot create " + options.csv_out.string());
        csv << kResultsCsvHeader << '\n';
        csv.flush();
    }

    NamedSchema named = bench_schema(volume, options.target_name);
    std::vector<ResultRow> rows;

    for (int nodes : matrix.nodes) {
        for (int workers : matrix.workers) {
            for (int clients : matrix.clients) {
                for (int rep = 1; rep <= matrix.reps; ++rep) {
                    Engine engine({nodes, workers, options.data_root});

                    IngestConfig config;
                    config.num_clients = clients;
                    config.target = named.name;
                    config.schema = named.schema;
                    config.slice_assignment = make_slice_assignment(
                        named.schema.dim(2).lo, named.schema.dim(2).hi, clients,
                        matrix.assignment);
                    config.batch_size = matrix.batch_size;

                    // A previous bench over the same data root may have left
                    // its final target (or aborted staging) behind.
                    if (engine.has_array(config.target)) engine.drop_array(config.target);
                    for (int k = 0; k < clients; ++k) {
                        std::string staging = config.target + "__stage_" + std::to_string(k);
                        if (engine.has_array(staging)) engine.drop_array(staging);
                    }

                    VolumeSliceSource source(volume);
                    IngestOutcome outcome = run_ingest(engine, config, source);

                    bool ok = verify_against_volume(engine, outcome.target,
                                                    engine.latest(outcome.target), volume);

                    // Clean up staging (and the target, except after the
                    // final run so the data root stays queryable); chunk
                    // files referenced by nothing are collected immediately.
                    bool last_run = nodes == matrix.nodes.back() &&
                                    workers == matrix.workers.back() &&
                                    clients == matrix.clients.back() && rep == matrix.reps;
                    for (const auto& staged : outcome.staged) engine.drop_array(staged.name());
                    if (!last_run) engine.drop_array(config.target);
                    engine.gc();

                    if (!ok) {
                        throw Error("fidelity check failed for config " +
                                    config_id(nodes, workers, clients) + " rep " +
                                    std::to_string(rep));
                    }

                    ResultRow row;
                    row.config_id = config_id(nodes, workers, clients);
                    row.nodes = nodes;
                    row.workers_per_node = workers;
                    row.clients = clients;
                    row.rows = volume.rows();
                    row.cols = volume.cols();
                    row.slices = volume.slices();
                    row.total_cells = outcome.report.total_cells;
                    row.stage_seconds = outcome.report.stage_seconds;
                    row.merge_seconds = outcome.report.merge_seconds;
                    row.total_seconds = outcome.report.total_seconds;
                    row.rate_stage = outcome.report.rate_stage;
                    row.rate_total = outcome.report.rate_total;
                    row.fidelity_ok = true;
                    row.rep = rep;

                    if (csv.is_open()) {
                        csv << to_csv_line(row) << '\n';
                        csv.flush();
                    }
                    if (options.progress) {
                        *options.progress << row.config_id << " rep " << rep << ": rate_stage "
                                          << format_rate(row.rate_stage) << " cells/s, rate_total "
                                          << format_rate(row.rate_total) << " cells/s\n";
                    }
                    rows.push_back(std::move(row));
                }
            }
        }
    }
    return rows;
}

std::vector<ConfigSummary> summarize(std::span<const ResultRow> rows) {
    std::vector<ConfigSummary> out;
    auto find = [&](const ResultRow& r) -> ConfigSummary& {
        for (auto& s : out) {
            if (s.nodes == r.nodes && s.workers_per_node == r.workers_per_node &&
                s.clients == r.clients) {
                return s;
            }
        }
        ConfigSummary s;
        s.config_id = r.config_id;
        s.nodes = r.nodes;
        s.workers_per_node = r.workers_per_node;
        s.clients = r.clients;
        out.push_back(std::move(s));
        return out.back();
    };
    for (const auto& r : rows) {
        auto& s = find(r);
        if (s.runs == 0) {
            s.rate_stage_min = s.rate_stage_max = r.rate_stage;
            s.rate_total_min = s.rate_total_max = r.rate_total;
        } else {
            s.rate_stage_min = std::min(s.rate_stage_min, r.rate_stage);
            s.rate_stage_max = std::max(s.rate_stage_max, r.rate_stage);
            s.rate_total_min = std::min(s.rate_total_min, r.rate_total);
            s.rate_total_max = std::max(s.rate_total_max, r.rate_total);
        }
        s.rate_stage_mean += r.rate_stage;
        s.rate_total_mean += r.rate_total;
        s.runs += 1;
    }
    for (auto& s : out) {
        s.rate_stage_mean /= s.runs;
        s.rate_total_mean /= s.runs;
    }
    std::sort(out.begin(), out.end(), [](const ConfigSummary& a, const ConfigSummary& b) {
        return std::tie(a.nodes, a.workers_per_node, a.clients) <
               std::tie(b.nodes, b.workers_per_node, b.clients);
    });
    return out;
}

void print_report(std::ostream& out, std::span<const ResultRow> rows) {
    auto summaries = summarize(rows);
    out << std::left << std::setw(14) << "config" << std::right << std::setw(5) << "runs"
        << std::setw(14) << "rate_stage" << std::setw(12) << "min" << std::setw(12) << "max"
        << std::setw(14) << "rate_total" << std::setw(12) << "min" << std::setw(12) << "max"
        << '\n';
    for (const auto& s : summaries) {
        out << std::left << std::setw(14) << s.config_id << std::right << std::setw(5) << s.runs
            << std::setw(14) << format_rate(s.rate_stage_mean) << std::setw(12)
            << format_rate(s.rate_stage_min) << std::setw(12) << format_rate(s.rate_stage_max)
            << std::setw(14) << format_rate(s.rate_total_mean) << std::setw(12)
            << format_rate(s.rate_total_min) << std::setw(12) << format_rate(s.rate_total_max)
            << '\n';
    }
    if (!summaries.empty()) {
        const auto* best = &summaries.front();
        for (const auto& s : summaries) {
            if (s.rate_stage_mean > best->rate_stage_mean) best = &s;
        }
        out << "best rate_stage: " << best->config_id << " at " << format_rate(best->rate_stage_mean)
            << " cells/s (rate_total " << format_rate(best->rate_total_mean) << " cells/s)\n";
    }
}

void write_gnuplot(std::ostream& out, std::span<const ConfigSummary> summaries) {
    out << "# nodes workers clients rate_stage_mean rate_total_mean\n";
    for (const auto& s : summaries) {
        out << s.nodes << ' ' << s.workers_per_node << ' ' << s.clients << ' '
            << format_double(s.rate_stage_mean) << ' ' << format_double(s.rate_total_mean) << '\n';
    }
}

}  // namespace adb
