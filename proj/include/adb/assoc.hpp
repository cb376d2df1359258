#ifndef ADB_ASSOC_HPP
#define ADB_ASSOC_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "adb/engine.hpp"
#include "adb/errors.hpp"

namespace adb {

// An associative-array axis key: an integer or a utf8 string. Integers order
// before strings; strings compare byte-lexicographically.
class AKey {
public:
    AKey(std::int64_t v) : v_(v) {}
    AKey(std::string s) : v_(std::move(s)) {}
    AKey(const char* s) : v_(std::string(s)) {}

    bool is_int() const { return v_.index() == 0; }
    std::int64_t as_int() const { return std::get<0>(v_); }
    const std::string& as_str() const { return std::get<1>(v_); }

    std::string display() const {
        return is_int() ? std::to_string(as_int()) : as_str();
    }

    auto operator<=>(const AKey&) const = default;

private:
    std::variant<std::int64_t, std::string> v_;
};

enum class ValueKind { numeric, text };

using AValue = std::variant<double, std::string>;

inline ValueKind kind_of(const AValue& v) {
    return v.index() == 0 ? ValueKind::numeric : ValueKind::text;
}

struct Triple {
    AKey row;
    AKey col;
    AValue value;

    bool operator==(const Triple&) const = default;
};

enum class CompareOp { eq, ne, lt, le, gt, ge };

// The key-axis indexing forms: everything, one key, a key list, a prefix
// (the trailing-`*` pattern), an inclusive lexical range, and a 1-based
// positional range over the sorted key list.
class KeySelector {
public:
    static KeySelector all();
    static KeySelector exact(AKey key);
    static KeySelector list(std::vector<AKey> keys);
    static KeySelector prefix(std::string prefix);  // pass "al" for the pattern "al*"
    static KeySelector lex_range(AKey lo, AKey hi);
    static KeySelector pos_range(std::size_t first, std::size_t last);

    // Matching keys from a sorted key list, in sorted order. Positional
    // selectors throw RangeError when an index exceeds the list.
    std::vector<AKey> select(std::span<const AKey> sorted_keys) const;

private:
    struct All {};
    struct List {
        std::vector<AKey> keys;
    };
    struct Prefix {
        std::string p;
    };
    struct LexRange {
        AKey lo, hi;
    };
    struct PosRange {
        std::size_t first, last;
    };
    using Form = std::variant<All, List, Prefix, LexRange, PosRange>;

    explicit KeySelector(Form f) : form_(std::move(f)) {}
    Form form_;
};

/*
 * A sparse two-axis associative array with homogeneous values (numeric or
 * text). Immutable after construction; every operation returns a new array
 * whose key lists are pruned to keys that still carry an entry.
 *
 * Numeric arrays follow sparse-accumulation semantics: 0.0 is the absent
 * value and is never stored, duplicate triples sum, and elementwise results
 * that cancel to zero disappear. Text collisions keep the last triple.
 */
class AssocArray {
public:
    AssocArray() : kind_(ValueKind::numeric) {}

    static AssocArray from_triples(std::span<const Triple> triples);
    std::vector<Triple> to_triples() const;

    ValueKind kind() const { return kind_; }
    std::size_t nnz() const { return cells_.size(); }
    bool empty() const { return cells_.empty(); }
    const std::vector<AKey>& row_keys() const { return row_keys_; }
    const std::vector<AKey>& col_keys() const { return col_keys_; }

    std::optional<AValue> find(const AKey& row, const AKey& col) const;

    AssocArray index(const KeySelector& rows, const KeySelector& cols) const;
    AssocArray filter(CompareOp op, const AValue& constant) const;
    AssocArray eq(const AValue& constant) const { return filter(CompareOp::eq, constant); }

    // Elementwise algebra. + and − require numeric arrays (absent = 0).
    // & keeps keys present in both (numeric value = min, text = left);
    // | keeps keys present in either (left value preferred).
    friend AssocArray operator+(const AssocArray& a, const AssocArray& b);
    friend AssocArray operator-(const AssocArray& a, const AssocArray& b);
    friend AssocArray operator&(const AssocArray& a, const AssocArray& b);
    friend AssocArray operator|(const AssocArray& a, const AssocArray& b);

    // Sparse matrix product over matched inner keys (a's cols joined with
    // b's rows). Numeric only.
    AssocArray matmul(const AssocArray& b) const;
    friend AssocArray operator*(const AssocArray& a, const AssocArray& b) { return a.matmul(b); }

    bool operator==(const AssocArray&) const = default;

private:
    using CellMap = std::map<std::pair<AKey, AKey>, AValue>;
    AssocArray(CellMap cells, ValueKind kind);

    void rebuild_keys();
    void require_numeric(const char* op) const;

    CellMap cells_;
    ValueKind kind_;
    std::vector<AKey> row_keys_;
    std::vector<AKey> col_keys_;
};

// Tab-separated triples, one per line: row, col, value. Import infers int
// keys and numeric values from their literal form.
void write_triples_tsv(std::ostream& out, std::span<const Triple> triples);
std::vector<Triple> read_triples_tsv(std::istream& in);

/*
 * An n-dimensional engine array viewed through the associative layer:
 * putTriple-style batched coordinate writes and dense sub-volume extraction.
 * Binds to the latest version by default; `pinned` fixes a snapshot.
 */
class DbTable {
public:
    DbTable(Engine& engine, std::string array_name);

    DbTable pinned(std::uint64_t version_number) const;
    bool is_pinned() const { return pinned_.has_value(); }

    // One batched write: coords holds ndims coordinates per value. Returns a
    // table observing the new version (pinned tables come back pinned to it).
    DbTable put_triple(std::span<const Coord> coords, ValueArray values) const;

    // Inclusive per-dimension ranges; the result block is addressed from
    // `origin` with absent cells equal to the attribute type's zero.
    DenseBlock subvolume(std::span<const std::pair<Coord, Coord>> ranges) const;

    VersionPtr version() const;
    const ArraySchema& schema() const { return handle_.schema(); }
    const ArrayHandle& handle() const { return handle_; }

private:
    Engine* engine_;
    ArrayHandle handle_;
    std::optional<std::uint64_t> pinned_;
};

}  // namespace adb

#endif  // ADB_ASSOC_HPP
