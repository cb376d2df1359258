#include "adb/ingest.hpp"

#include <algorithm>
#include <barrier>
#include <exception>
#include <set>
#include <thread>

namespace adb {

namespace {

double secs(std::chrono::steady_clock::duration d) {
    return std::chrono::duration<double>(d).count();
}

}  // namespace

std::vector<std::vector<Coord>> make_slice_assignment(Coord slice_lo, Coord slice_hi,
                                                      int num_clients, AssignmentKind kind) {
    if (num_clients < 1) throw ValidationError("num_clients must be >= 1");
    if (slice_lo > slice_hi) throw ValidationError("empty slice range");
    std::vector<std::vector<Coord>> out(static_cast<std::size_t>(num_clients));
    const std::int64_t total = slice_hi - slice_lo + 1;
    if (kind == AssignmentKind::block) {
        // Contiguous blocks; the first (total % clients) clients get one extra.
        std::int64_t base = total / num_clients;
        std::int64_t extra = total % num_clients;
        Coord next = slice_lo;
        for (int k = 0; k < num_clients; ++k) {
            std::int64_t n = base + (k < extra ? 1 : 0);
            for (std::int64_t i = 0; i < n; ++i) out[static_cast<std::size_t>(k)].push_back(next++);
        }
    } else {
        for (std::int64_t i = 0; i < total; ++i) {
            out[static_cast<std::size_t>(i % num_clients)].push_back(slice_lo + i);
        }
    }
    return out;
}

std::vector<ClientPlan> plan(const IngestConfig& config) {
    if (config.num_clients < 1) throw ValidationError("num_clients must be >= 1");
    if (config.schema.ndims() != 3) {
        throw ValidationError("ingest expects a 3-dimensional volume schema");
    }
    if (config.schema.value_type() != ValueType::uint8) {
        throw ValidationError("ingest expects a uint8 attribute");
    }
    if (static_cast<int>(config.slice_assignment.size()) != config.num_clients) {
        throw ValidationError("slice assignment must cover exactly num_clients ranks");
    }

    // The assignment must partition the slice range: disjoint and covering.
    const DimensionSpec& slice_dim = config.schema.dim(2);
    std::set<Coord> seen;
    for (const auto& slices : config.slice_assignment) {
        for (Coord s : slices) {
            if (!slice_dim.contains(s)) {
                throw ValidationError("slice " + std::to_string(s) + " outside dimension '" +
                                      slice_dim.name + "'");
            }
            if (!seen.insert(s).second) {
                throw ValidationError("slice " + std::to_string(s) +
                                      " assigned to more than one client");
            }
        }
    }
    if (static_cast<std::int64_t>(seen.size()) != slice_dim.extent()) {
        throw ValidationError("slice assignment does not cover the full slice range");
    }

    const auto& rows = config.schema.dim(0);
    const auto& cols = config.schema.dim(1);
    std::size_t slice_cells =
        static_cast<std::size_t>(rows.extent()) * static_cast<std::size_t>(cols.extent());
    std::size_t batch = config.batch_size ? config.batch_size : slice_cells;

    std::vector<ClientPlan> plans;
    plans.reserve(static_cast<std::size_t>(config.num_clients));
    for (int k = 0; k < config.num_clients; ++k) {
        ClientPlan p;
        p.rank = k;
        p.staging_array = config.target + "__stage_" + std::to_string(k);
        p.slices = config.slice_assignment[static_cast<std::size_t>(k)];
        p.batch_size = batch;
        plans.push_back(std::move(p));
    }
    return plans;
}

ClientResult run_client(Engine& engine, const ClientPlan& plan, const ArraySchema& schema,
                        const SliceSource& source) {
    ClientResult result;
    result.rank = plan.rank;
    result.staging = engine.create_array(plan.staging_array, schema);

    const Coord row_lo = schema.dim(0).lo;
    const Coord col_lo = schema.dim(1).lo;
    const std::int64_t slice_lo = schema.dim(2).lo;
    const std::int64_t rows = source.rows();
    const std::int64_t cols = source.cols();
    if (rows != schema.dim(0).extent() || cols != schema.dim(1).extent()) {
        throw ValidationError("slice source shape does not match the schema");
    }

    std::vector<std::uint8_t> plane(static_cast<std::size_t>(rows * cols));
    std::vector<Coord> coords;
    std::vector<std::uint8_t> vals;
    coords.reserve(plan.batch_size * 3);
    vals.reserve(plan.batch_size);

    bool started = false;
    auto flush = [&]() {
        if (vals.empty()) return;
        CellBatch batch(3, ValueType::uint8);
        batch.coords = std::move(coords);
        batch.values = ValueArray::adopt(std::move(vals));
        coords = {};
        vals = {};
        coords.reserve(plan.batch_size * 3);
        vals.reserve(plan.batch_size);
        if (!started) {
            result.first_insert = std::chrono::steady_clock::now();
            started = true;
        }
        std::size_t committed = batch.size();
        engine.insert(result.staging, batch);
        result.cells += committed;
        result.last_commit = std::chrono::steady_clock::now();
    };

    for (Coord slice : plan.slices) {
        source.fill(slice - slice_lo, plane);
        std::size_t i = 0;
        for (std::int64_t r = 0; r < rows; ++r) {
            for (std::int64_t c = 0; c < cols; ++c) {
                coords.push_back(row_lo + r);
                coords.push_back(col_lo + c);
                coords.push_back(slice);
                vals.push_back(plane[i++]);
                if (vals.size() == plan.batch_size) flush();
            }
        }
    }
    flush();

    if (!started) {
        result.first_insert = result.last_commit = std::chrono::steady_clock::now();
    }
    result.seconds = secs(result.last_commit - result.first_insert);
    return result;
}

ArrayHandle finalize(Engine& engine, std::span<const ArrayHandle> staged,
                     const std::string& target, double& merge_seconds) {
    if (staged.empty()) throw ValidationError("finalize requires at least one staged array");
    auto t0 = std::chrono::steady_clock::now();
    ArrayHandle handle = engine.merge(target, staged);
    merge_seconds = secs(std::chrono::steady_clock::now() - t0);
    return handle;
}

IngestReport measure(const MeasureInputs& inputs) {
    IngestReport rep;
    rep.nodes = inputs.nodes;
    rep.workers_per_node = inputs.workers_per_node;
    rep.num_clients = inputs.num_clients;
    rep.extents = inputs.extents;
    rep.merge_seconds = inputs.merge_seconds;

    std::uint64_t total = 0;
    bool any = false;
    std::chrono::steady_clock::time_point t0{}, t1{};
    for (const auto& c : inputs.clients) {
        total += c.cells;
        rep.per_client.push_back({c.rank, c.cells, c.seconds});
        if (c.cells == 0) continue;
        if (!any || c.first_insert < t0) t0 = c.first_insert;
        if (!any || c.last_commit > t1) t1 = c.last_commit;
        any = true;
    }
    rep.total_cells = total;
    rep.degenerate = total == 0;
    rep.stage_seconds = any ? secs(t1 - t0) : 0.0;
    if (!rep.degenerate && rep.stage_seconds <= 0.0) {
        throw MeasurementError("stage wall time is below clock resolution");
    }
    rep.total_seconds = rep.stage_seconds + rep.merge_seconds;
    rep.rate_stage = rep.degenerate ? 0.0 : static_cast<double>(total) / rep.stage_seconds;
    rep.rate_total = rep.degenerate ? 0.0 : static_cast<double>(total) / rep.total_seconds;

    // The reported rates must be exactly the quotient of their own fields.
    if (!rep.degenerate &&
        (rep.rate_stage != static_cast<double>(rep.total_cells) / rep.stage_seconds ||
         rep.rate_total != static_cast<double>(rep.total_cells) / rep.total_seconds)) {
        throw MeasurementError("rate recomputation mismatch");
    }
    return rep;
}

IngestOutcome run_ingest(Engine& engine, const IngestConfig& config, const SliceSource& source) {
    auto plans = plan(config);
    const int n = config.num_clients;

    std::vector<ClientResult> results(static_cast<std::size_t>(n));
    std::vector<std::exception_ptr> failures(static_cast<std::size_t>(n));
    std::barrier start_gate(n);

    std::vector<std::thread> threads;
    threads.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        threads.emplace_back([&, k] {
            try {
                start_gate.arrive_and_wait();
                results[static_cast<std::size_t>(k)] =
                    run_client(engine, plans[static_cast<std::size_t>(k)], config.schema, source);
            } catch (...) {
                failures[static_cast<std::size_t>(k)] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();

    std::string failed_ranks;
    std::string first_reason;
    for (int k = 0; k < n; ++k) {
        if (!failures[static_cast<std::size_t>(k)]) continue;
        if (!failed_ranks.empty()) failed_ranks += ", ";
        failed_ranks += std::to_string(k);
        if (first_reason.empty()) {
            try {
                std::rethrow_exception(failures[static_cast<std::size_t>(k)]);
            } catch (const std::exception& e) {
                first_reason = e.what();
            }
        }
    }
    if (!failed_ranks.empty()) {
        throw IngestAborted("ingest aborted before merge; client(s) " + failed_ranks +
                            " failed, staging is partial: " + first_reason);
    }

    std::vector<ArrayHandle> staged;
    staged.reserve(static_cast<std::size_t>(n));
    for (const auto& r : results) staged.push_back(r.staging);

    // Every client writes only its own staging array; the engine's writer
    // tracking lets us assert that no staging array ever saw a second writer.
    for (const auto& r : results) {
        if (r.cells > 0 && engine.writer_count(r.staging) != 1) {
            throw IngestAborted("staging array '" + r.staging.name() +
                                "' was written by more than one client");
        }
    }

    double merge_seconds = 0;
    ArrayHandle target = finalize(engine, staged, config.target, merge_seconds);

    MeasureInputs mi;
    mi.nodes = engine.config().nodes;
    mi.workers_per_node = engine.config().workers_per_node;
    mi.num_clients = n;
    for (const auto& d : config.schema.dims()) mi.extents.push_back(d.extent());
    mi.clients = results;
    mi.merge_seconds = merge_seconds;

    IngestOutcome out;
    out.target = target;
    out.report = measure(mi);
    out.staged = std::move(staged);
    return out;
}

}  // namespace adb
