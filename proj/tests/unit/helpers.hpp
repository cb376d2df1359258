#ifndef ADB_TESTS_HELPERS_HPP
#define ADB_TESTS_HELPERS_HPP

#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "adb/chunk.hpp"
#include "adb/engine.hpp"
#include "adb/schema.hpp"

namespace adbtest {

using Rng = std::mt19937_64;

inline std::int64_t rand_int(Rng& rng, std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(rng);
}

// Scratch directory removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<std::uint64_t> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("adbtest_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

inline adb::ArraySchema random_schema(Rng& rng, int max_dims = 3,
                                      adb::ValueType type = adb::ValueType::uint8,
                                      bool allow_overlap = true) {
    int nd = static_cast<int>(rand_int(rng, 1, max_dims));
    std::vector<adb::DimensionSpec> dims;
    for (int d = 0; d < nd; ++d) {
        adb::DimensionSpec dim;
        dim.name = "d" + std::to_string(d);
        dim.lo = rand_int(rng, -4, 8);
        dim.hi = dim.lo + rand_int(rng, 0, 40);
        dim.chunk_len = rand_int(rng, 1, dim.extent() + 3);
        dim.overlap = allow_overlap ? rand_int(rng, 0, std::min<std::int64_t>(dim.chunk_len - 1, 4))
                                    : 0;
        dims.push_back(std::move(dim));
    }
    return adb::ArraySchema({{"val", type}}, std::move(dims));
}

inline adb::Value random_value(Rng& rng, adb::ValueType type) {
    switch (type) {
        case adb::ValueType::uint8:
            return static_cast<std::uint8_t>(rand_int(rng, 0, 255));
        case adb::ValueType::int64:
            return rand_int(rng, -1000, 1000);
        case adb::ValueType::float64:
            return std::uniform_real_distribution<double>(-10.0, 10.0)(rng);
        case adb::ValueType::string: {
            std::string s;
            for (int i = static_cast<int>(rand_int(rng, 0, 6)); i > 0; --i) {
                s.push_back(static_cast<char>('a' + rand_int(rng, 0, 25)));
            }
            return s;
        }
    }
    return std::uint8_t{0};
}

inline adb::CellBatch random_cells(Rng& rng, const adb::ArraySchema& schema, std::size_t count) {
    adb::CellBatch batch(schema.ndims(), schema.value_type());
    batch.reserve(count);
    std::vector<adb::Coord> c(schema.ndims());
    for (std::size_t i = 0; i < count; ++i) {
        for (std::size_t d = 0; d < schema.ndims(); ++d) {
            c[d] = rand_int(rng, schema.dim(d).lo, schema.dim(d).hi);
        }
        batch.append(c, random_value(rng, schema.value_type()));
    }
    return batch;
}

// Independent model of array contents: a sorted coordinate->value map with
// last-occurrence-wins batch application.
using CellKey = std::vector<adb::Coord>;
using CellModel = std::map<CellKey, adb::Value>;

inline void apply_batch(CellModel& model, const adb::CellBatch& batch) {
    for (std::size_t i = 0; i < batch.size(); ++i) {
        auto cell = batch.cell(i);
        model[CellKey(cell.begin(), cell.end())] = batch.values.get(i);
    }
}

inline CellModel filter_box(const CellModel& model, const adb::CellBox& box) {
    CellModel out;
    for (const auto& [coords, value] : model) {
        bool inside = true;
        for (std::size_t d = 0; d < coords.size(); ++d) {
            if (coords[d] < box.low[d] || coords[d] > box.high[d]) {
                inside = false;
                break;
            }
        }
        if (inside) out.emplace(coords, value);
    }
    return out;
}

inline std::vector<std::pair<CellKey, adb::Value>> collect_cells(adb::CellStream&& stream) {
    std::vector<std::pair<CellKey, adb::Value>> out;
    std::vector<adb::Coord> coords;
    adb::Value value;
    while (stream.next(coords, value)) out.emplace_back(coords, value);
    return out;
}

inline std::vector<std::pair<CellKey, adb::Value>> model_cells(const CellModel& model) {
    return {model.begin(), model.end()};
}

inline adb::CellBox random_box(Rng& rng, const adb::ArraySchema& schema) {
    adb::CellBox box;
    for (const auto& dim : schema.dims()) {
        adb::Coord a = rand_int(rng, dim.lo, dim.hi);
        adb::Coord b = rand_int(rng, dim.lo, dim.hi);
        box.low.push_back(std::min(a, b));
        box.high.push_back(std::max(a, b));
    }
    return box;
}

// Brute-force halo oracle straight from the region definition: chunk k's
// extended region is [lo + k*len - overlap, lo + (k+1)*len - 1 + overlap]
// clipped to the dimension bounds.
inline std::vector<std::int64_t> oracle_halo_chunks(const adb::DimensionSpec& dim,
                                                    adb::Coord coord) {
    std::vector<std::int64_t> out;
    for (std::int64_t k = 0; k < dim.chunk_count(); ++k) {
        adb::Coord lo = std::max(dim.lo, dim.lo + k * dim.chunk_len - dim.overlap);
        adb::Coord hi = std::min(dim.hi, dim.lo + (k + 1) * dim.chunk_len - 1 + dim.overlap);
        if (coord >= lo && coord <= hi) out.push_back(k);
    }
    return out;
}

}  // namespace adbtest

#endif  // ADB_TESTS_HELPERS_HPP
