#include <charconv>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adb/assoc.hpp"
#include "adb/bench.hpp"
#include "adb/engine.hpp"
#include "adb/volume.hpp"

namespace {

std::vector<std::int64_t> parse_extents(const std::string& text) {
    std::vector<std::int64_t> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto x = text.find('x', start);
        std::string tok = text.substr(start, x == std::string::npos ? x : x - start);
        std::int64_t v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || p != tok.data() + tok.size() || v < 1) {
            throw adb::ValidationError("bad extents '" + text + "' (expected e.g. 512x512x64)");
        }
        out.push_back(v);
        if (x == std::string::npos) break;
        start = x + 1;
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& text) {
    std::vector<int> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto comma = text.find(',', start);
        std::string tok = text.substr(start, comma == std::string::npos ? comma : comma - start);
        int v = 0;
        auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc{} || p != tok.data() + tok.size() || v < 1) {
            throw adb::ValidationError("bad list '" + text + "' (expected e.g. 1,2,4)");
        }
        out.push_back(v);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

adb::CellBox parse_box(const std::string& text) {
    auto colon = text.find(':');
    if (colon == std::string::npos) {
        throw adb::ValidationError("bad box '" + text + "' (expected lo1,lo2,..:hi1,hi2,..)");
    }
    auto parse_coords = [&](const std::string& part) {
        std::vector<adb::Coord> out;
        std::size_t start = 0;
        while (start <= part.size()) {
            auto comma = part.find(',', start);
            std::string tok =
                part.substr(start, comma == std::string::npos ? comma : comma - start);
            adb::Coord v = 0;
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec != std::errc{} || p != tok.data() + tok.size()) {
                throw adb::ValidationError("bad coordinate '" + tok + "' in box");
            }
            out.push_back(v);
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    };
    adb::CellBox box;
    box.low = parse_coords(text.substr(0, colon));
    box.high = parse_coords(text.substr(colon + 1));
    return box;
}

std::string human_bytes(std::uint64_t n) {
    char buf[32];
    if (n >= (1ULL << 30)) {
        std::snprintf(buf, sizeof(buf), "%.1f GiB", static_cast<double>(n) / (1ULL << 30));
    } else if (n >= (1ULL << 20)) {
        std::snprintf(buf, sizeof(buf), "%.1f MiB", static_cast<double>(n) / (1ULL << 20));
    } else {
        std::snprintf(buf, sizeof(buf), "%llu bytes", static_cast<unsigned long long>(n));
    }
    return buf;
}

int cmd_generate(const std::string& extents_text, std::uint64_t seed, const std::string& out) {
    auto extents = parse_extents(extents_text);
    auto bytes = adb::volume_payload_bytes(extents);
    if (adb::beyond_desk_scale(extents)) {
        std::cerr << "warning: requested volume is " << human_bytes(bytes)
                  << ", beyond desk scale; generating anyway\n";
    }
    adb::generate_volume_file(out, extents, seed);
    std::cout << "wrote " << out << " (" << human_bytes(bytes) << " payload, seed " << seed
              << ")\n";
    return 0;
}

int cmd_bench(const std::string& volume_path, const std::string& data_root,
              const std::string& out_csv, const std::string& preset, const std::string& clients,
              const std::string& workers, const std::string& nodes, int reps,
              const std::string& assignment, std::size_t batch_size) {
    adb::BenchMatrix matrix;
    if (!preset.empty()) {
        matrix = adb::preset_matrix(preset);
    } else {
        matrix.clients = parse_int_list(clients);
        matrix.workers = parse_int_list(workers);
        matrix.nodes = parse_int_list(nodes);
    }
    matrix.reps = reps;
    matrix.batch_size = batch_size;
    if (assignment == "round-robin") {
        matrix.assignment = adb::AssignmentKind::round_robin;
    } else if (assignment != "block") {
        throw adb::ValidationError("assignment must be block or round-robin");
    }

    adb::VolumeData volume = adb::read_volume_file(volume_path);
    adb::BenchOptions options;
    options.data_root = data_root;
    options.csv_out = out_csv;
    options.progress = &std::cout;
    auto rows = adb::run_bench(matrix, volume, options);
    std::cout << rows.size() << " rows written to " << out_csv << "\n";
    return 0;
}

int cmd_query(const std::string& data_root, const std::string& array_name,
              const std::string& box_text, std::uint64_t version_number,
              const std::string& raw_out) {
    adb::Engine engine({1, 1, data_root});
    auto array = engine.open_array(array_name);
    adb::CellBox box = parse_box(box_text);
    adb::VersionPtr version =
        version_number ? engine.version(array, version_number) : engine.latest(array);

    if (!raw_out.empty()) {
        adb::DenseBlock block = engine.read_box(array, version, box);
        adb::write_vvol(raw_out, block.extents, block.values);
        std::cout << "wrote " << raw_out << " (" << block.filled << " stored cells of "
                  << block.volume() << ")\n";
        return 0;
    }
    auto stream = engine.between(array, version, box);
    std::vector<adb::Coord> coords;
    adb::Value value;
    while (stream.next(coords, value)) {
        for (auto c : coords) std::cout << c << '\t';
        std::cout << adb::value_to_display(value) << '\n';
    }
    return 0;
}

int cmd_report(const std::string& in_csv, const std::string& gnuplot_out) {
    auto rows = adb::parse_results_csv_file(in_csv);
    adb::print_report(std::cout, rows);
    if (!gnuplot_out.empty()) {
        std::ofstream out(gnuplot_out);
        if (!out) throw adb::IoError("cannot create " + gnuplot_out);
        auto summaries = adb::summarize(rows);
        adb::write_gnuplot(out, summaries);
        std::cout << "gnuplot data written to " << gnuplot_out << "\n";
    }
    return 0;
}

int cmd_gc(const std::string& data_root) {
    adb::Engine engine({1, 1, data_root});
    auto removed = engine.gc();
    std::cout << "removed " << removed << " unreferenced chunk file(s)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"adb: chunked array database with a staged parallel ingest benchmark"};
    app.require_subcommand(1);

    auto* generate = app.add_subcommand("generate", "Generate a deterministic random volume");
    std::string gen_extents, gen_out;
    std::uint64_t gen_seed = 1;
    generate->add_option("--extents", gen_extents, "Volume shape RxCxS, e.g. 512x512x64")
        ->required();
    generate->add_option("--seed", gen_seed, "Random seed (default 1)");
    generate->add_option("--out", gen_out, "Output volume file")->required();

    auto* bench = app.add_subcommand("bench", "Run the ingest benchmark matrix");
    std::string b_volume, b_root = "adb_data", b_out, b_preset, b_clients = "1", b_workers = "1",
                b_nodes = "1", b_assignment = "block";
    int b_reps = 3;
    std::size_t b_batch = 0;
    bench->add_option("--volume", b_volume, "Source volume file")->required();
    bench->add_option("--data-root", b_root, "Engine data directory (default adb_data)");
    bench->add_option("--out", b_out, "Results csv path")->required();
    bench->add_option("--clients", b_clients, "Client counts, e.g. 1,2,4,8");
    bench->add_option("--workers", b_workers, "Workers per node, e.g. 1,4,8");
    bench->add_option("--nodes", b_nodes, "Node counts, e.g. 1,2");
    bench->add_option("--reps", b_reps, "Repetitions per configuration (default 3)");
    bench->add_option("--preset", b_preset,
                      "Axis preset: paper-single-node or paper-two-node (overrides axis lists)");
    bench->add_option("--assignment", b_assignment, "Slice assignment: block or round-robin");
    bench->add_option("--batch-size", b_batch, "Cells per insert call (default: one slice)");

    auto* query = app.add_subcommand("query", "Range query over a stored array");
    std::string q_root, q_array, q_box, q_raw;
    std::uint64_t q_version = 0;
    query->add_option("--data-root", q_root, "Engine data directory")->required();
    query->add_option("--array", q_array, "Array name")->required();
    query->add_option("--between", q_box, "Box lo1,lo2,..:hi1,hi2,..")->required();
    query->add_option("--version", q_version, "Version number (default latest)");
    query->add_option("--raw-out", q_raw, "Write the dense sub-volume to this file");

    auto* report = app.add_subcommand("report", "Summarize a benchmark csv");
    std::string r_in, r_gnuplot;
    report->add_option("--in", r_in, "Results csv")->required();
    report->add_option("--gnuplot-out", r_gnuplot, "Write gnuplot-compatible data");

    auto* gc = app.add_subcommand("gc", "Delete unreferenced chunk files");
    std::string g_root;
    gc->add_option("--data-root", g_root, "Engine data directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (generate->parsed()) return cmd_generate(gen_extents, gen_seed, gen_out);
        if (bench->parsed()) {
            return cmd_bench(b_volume, b_root, b_out, b_preset, b_clients, b_workers, b_nodes,
                             b_reps, b_assignment, b_batch);
        }
        if (query->parsed()) return cmd_query(q_root, q_array, q_box, q_version, q_raw);
        if (report->parsed()) return cmd_report(r_in, r_gnuplot);
        if (gc->parsed()) return cmd_gc(g_root);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
