#include "adb/assoc.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>

namespace adb {

namespace {

bool is_zero(const AValue& v) {
    return v.index() == 0 && std::get<double>(v) == 0.0;
}

std::string format_avalue(const AValue& v) {
    if (v.index() == 1) return std::get<std::string>(v);
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof(buf), std::get<double>(v));
    return std::string(buf, r.ptr);
}

bool compare_values(CompareOp op, const AValue& lhs, const AValue& rhs) {
    auto apply = [op](auto cmp) {
        switch (op) {
            case CompareOp::eq: return cmp == 0;
            case CompareOp::ne: return cmp != 0;
            case CompareOp::lt: return cmp < 0;
            case CompareOp::le: return cmp <= 0;
            case CompareOp::gt: return cmp > 0;
            case CompareOp::ge: return cmp >= 0;
        }
        return false;
    };
    if (lhs.index() == 0) {
        double a = std::get<double>(lhs);
        double b = std::get<double>(rhs);
        return apply(a < b ? -1 : (a > b ? 1 : 0));
    }
    return apply(std::get<std::string>(lhs).compare(std::get<std::string>(rhs)));
}

}  // namespace

// ---------------------------------------------------------------------------
// KeySelector

KeySelector KeySelector::all() { return KeySelector(Form{All{}}); }
KeySelector KeySelector::exact(AKey key) {
    return KeySelector(Form{List{{std::move(key)}}});
}
KeySelector KeySelector::list(std::vector<AKey> keys) {
    return KeySelector(Form{List{std::move(keys)}});
}
KeySelector KeySelector::prefix(std::string prefix) {
    return KeySelector(Form{Prefix{std::move(prefix)}});
}
KeySelector KeySelector::lex_range(AKey lo, AKey hi) {
    return KeySelector(Form{LexRange{std::move(lo), std::move(hi)}});
}
KeySelector KeySelector::pos_range(std::size_t first, std::size_t last) {
    return KeySelector(Form{PosRange{first, last}});
}

std::vector<AKey> KeySelector::select(std::span<const AKey> sorted_keys) const {
    std::vector<AKey> out;
    std::visit(
        [&](const auto& form) {
            using F = std::decay_t<decltype(form)>;
            if constexpr (std::is_same_v<F, All>) {
                out.assign(sorted_keys.begin(), sorted_keys.end());
            } else if constexpr (std::is_same_v<F, List>) {
                std::set<AKey> wanted(form.keys.begin(), form.keys.end());
                for (const auto& k : sorted_keys) {
                    if (wanted.count(k)) out.push_back(k);
                }
            } else if constexpr (std::is_same_v<F, Prefix>) {
                for (const auto& k : sorted_keys) {
                    if (k.is_int()) continue;  // prefixes select string keys
                    if (k.as_str().compare(0, form.p.size(), form.p) == 0) out.push_back(k);
                }
            } else if constexpr (std::is_same_v<F, LexRange>) {
                for (const auto& k : sorted_keys) {
                    if (!(k < form.lo) && !(form.hi < k)) out.push_back(k);
                }
            } else {  // PosRange, 1-based inclusive
                if (form.first < 1 || form.first > form.last) {
                    throw RangeError("positional selector " + std::to_string(form.first) + ":" +
                                     std::to_string(form.last) + " is not a valid range");
                }
                if (form.last > sorted_keys.size()) {
                    throw RangeError("positional index " + std::to_string(form.last) +
                                     " exceeds key count " + std::to_string(sorted_keys.size()));
                }
                for (std::size_t i = form.first; i <= form.last; ++i) {
                    out.push_back(sorted_keys[i - 1]);
                }
            }
        },
        form_);
    return out;
}

// ---------------------------------------------------------------------------
// AssocArray

AssocArray::AssocArray(CellMap cells, ValueKind kind) : cells_(std::move(cells)), kind_(kind) {
    if (kind_ == ValueKind::numeric) {
        std::erase_if(cells_, [](const auto& e) { return is_zero(e.second); });
    }
    rebuild_keys();
}

void AssocArray::rebuild_keys() {
    row_keys_.clear();
    col_keys_.clear();
    std::set<AKey> rows, cols;
    for (const auto& [rc, v] : cells_) {
        rows.insert(rc.first);
        cols.insert(rc.second);
    }
    row_keys_.assign(rows.begin(), rows.end());
    col_keys_.assign(cols.begin(), cols.end());
}

AssocArray AssocArray::from_triples(std::span<const Triple> triples) {
    if (triples.empty()) return AssocArray();
    ValueKind kind = kind_of(triples.front().value);
    CellMap cells;
    for (const auto& t : triples) {
        if (kind_of(t.value) != kind) {
            throw TypeError("mixed value kinds in triple list");
        }
        auto key = std::make_pair(t.row, t.col);
        auto it = cells.find(key);
        if (it == cells.end()) {
            cells.emplace(std::move(key), t.value);
        } else if (kind == ValueKind::numeric) {
            it->second = std::get<double>(it->second) + std::get<double>(t.value);
        } else {
            it->second = t.value;  // text collision: last wins
        }
    }
    return AssocArray(std::move(cells), kind);
}

std::vector<Triple> AssocArray::to_triples() const {
    std::vector<Triple> out;
    out.reserve(cells_.size());
    for (const auto& [rc, v] : cells_) out.push_back(Triple{rc.first, rc.second, v});
    return out;
}

std::optional<AValue> AssocArray::find(const AKey& row, const AKey& col) const {
    auto it = cells_.find(std::make_pair(row, col));
    if (it == cells_.end()) return std::nullopt;
    return it->second;
}

AssocArray AssocArray::index(const KeySelector& rows, const KeySelector& cols) const {
    auto row_sel = rows.select(row_keys_);
    auto col_sel = cols.select(col_keys_);
    std::set<AKey> rset(row_sel.begin(), row_sel.end());
    std::set<AKey> cset(col_sel.begin(), col_sel.end());
    CellMap cells;
    for (const auto& [rc, v] : cells_) {
        if (rset.count(rc.first) && cset.count(rc.second)) cells.emplace(rc, v);
    }
    return AssocArray(std::move(cells), kind_);
}

AssocArray AssocArray::filter(CompareOp op, const AValue& constant) const {
    if (!empty() && kind_of(constant) != kind_) {
        throw TypeError("filter constant kind does not match array values");
    }
    CellMap cells;
    for (const auto& [rc, v] : cells_) {
        if (compare_values(op, v, constant)) cells.emplace(rc, v);
    }
    return AssocArray(std::move(cells), kind_);
}

void AssocArray::require_numeric(const char* op) const {
    if (!empty() && kind_ != ValueKind::numeric) {
        throw TypeError(std::string(op) + " requires numeric associative arrays");
    }
}

namespace {

ValueKind common_kind(const AssocArray& a, const AssocArray& b) {
    if (a.empty()) return b.kind();
    if (b.empty()) return a.kind();
    if (a.kind() != b.kind()) throw TypeError("operands have different value kinds");
    return a.kind();
}

}  // namespace

AssocArray operator+(const AssocArray& a, const AssocArray& b) {
    a.require_numeric("+");
    b.require_numeric("+");
    AssocArray::CellMap cells(a.cells_);
    for (const auto& [rc, v] : b.cells_) {
        auto it = cells.find(rc);
        if (it == cells.end()) {
            cells.emplace(rc, v);
        } else {
            it->second = std::get<double>(it->second) + std::get<double>(v);
        }
    }
    return AssocArray(std::move(cells), ValueKind::numeric);
}

AssocArray operator-(const AssocArray& a, const AssocArray& b) {
    a.require_numeric("-");
    b.require_numeric("-");
    AssocArray::CellMap cells(a.cells_);
    for (const auto& [rc, v] : b.cells_) {
        auto it = cells.find(rc);
        if (it == cells.end()) {
            cells.emplace(rc, AValue(-std::get<double>(v)));
        } else {
            it->second = std::get<double>(it->second) - std::get<double>(v);
        }
    }
    return AssocArray(std::move(cells), ValueKind::numeric);
}

AssocArray operator&(const AssocArray& a, const AssocArray& b) {
    ValueKind kind = common_kind(a, b);
    AssocArray::CellMap cells;
    for (const auto& [rc, v] : a.cells_) {
        auto it = b.cells_.find(rc);
        if (it == b.cells_.end()) continue;
        if (kind == ValueKind::numeric) {
            cells.emplace(rc, std::min(std::get<double>(v), std::get<double>(it->second)));
        } else {
            cells.emplace(rc, v);  // text: left value
        }
    }
    return AssocArray(std::move(cells), kind);
}

AssocArray operator|(const AssocArray& a, const AssocArray& b) {
    ValueKind kind = common_kind(a, b);
    AssocArray::CellMap cells(a.cells_);
    for (const auto& [rc, v] : b.cells_) cells.emplace(rc, v);  // left preference
    return AssocArray(std::move(cells), kind);
}

AssocArray AssocArray::matmul(const AssocArray& b) const {
    require_numeric("*");
    b.require_numeric("*");
    // Row-indexed view of b for the inner-key join.
    std::map<AKey, std::vector<std::pair<AKey, double>>> b_rows;
    for (const auto& [rc, v] : b.cells_) {
        b_rows[rc.first].emplace_back(rc.second, std::get<double>(v));
    }
    CellMap cells;
    for (const auto& [rc, v] : cells_) {
        auto it = b_rows.find(rc.second);
        if (it == b_rows.end()) continue;
        double av = std::get<double>(v);
        for (const auto& [col, bv] : it->second) {
            auto key = std::make_pair(rc.first, col);
            auto cit = cells.find(key);
            if (cit == cells.end()) {
                cells.emplace(std::move(key), av * bv);
            } else {
                cit->second = std::get<double>(cit->second) + av * bv;
            }
        }
    }
    return AssocArray(std::move(cells), ValueKind::numeric);
}

// ---------------------------------------------------------------------------
// TSV import/export

void write_triples_tsv(std::ostream& out, std::span<const Triple> triples) {
    for (const auto& t : triples) {
        out << t.row.display() << '\t' << t.col.display() << '\t' << format_avalue(t.value)
            << '\n';
    }
}

namespace {

AKey parse_key(const std::string& tok) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec == std::errc{} && p == tok.data() + tok.size()) return AKey(v);
    return AKey(tok);
}

AValue parse_avalue(const std::string& tok) {
    double v = 0;
    auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec == std::errc{} && p == tok.data() + tok.size()) return AValue(v);
    return AValue(tok);
}

}  // namespace

std::vector<Triple> read_triples_tsv(std::istream& in) {
    std::vector<Triple> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto t1 = line.find('\t');
        auto t2 = t1 == std::string::npos ? std::string::npos : line.find('\t', t1 + 1);
        if (t2 == std::string::npos) {
            throw ParseError("triple line " + std::to_string(lineno) + " needs three tab-separated fields",
                             lineno);
        }
        out.push_back(Triple{parse_key(line.substr(0, t1)),
                             parse_key(line.substr(t1 + 1, t2 - t1 - 1)),
                             parse_avalue(line.substr(t2 + 1))});
    }
    return out;
}

// ---------------------------------------------------------------------------
// DbTable

DbTable::DbTable(Engine& engine, std::string array_name)
    : engine_(&engine), handle_(engine.open_array(array_name)) {}

DbTable DbTable::pinned(std::uint64_t version_number) const {
    DbTable t(*this);
    engine_->version(handle_, version_number);  // validate it exists
    t.pinned_ = version_number;
    return t;
}

VersionPtr DbTable::version() const {
    return pinned_ ? engine_->version(handle_, *pinned_) : engine_->latest(handle_);
}

DbTable DbTable::put_triple(std::span<const Coord> coords, ValueArray values) const {
    const std::size_t nd = schema().ndims();
    if (coords.size() != values.size() * nd) {
        throw ValidationError("coordinate and value counts differ (" +
                              std::to_string(coords.size()) + " coordinates for " +
                              std::to_string(values.size()) + " values)");
    }
    CellBatch batch(nd, values.type());
    batch.coords.assign(coords.begin(), coords.end());
    batch.values = std::move(values);
    auto v = engine_->insert(handle_, batch);
    DbTable t(*this);
    if (t.pinned_) t.pinned_ = v->number;
    return t;
}

DenseBlock DbTable::subvolume(std::span<const std::pair<Coord, Coord>> ranges) const {
    if (ranges.size() != schema().ndims()) {
        throw ValidationError("subvolume needs one range per dimension (got " +
                              std::to_string(ranges.size()) + ", schema has " +
                              std::to_string(schema().ndims()) + ")");
    }
    CellBox box;
    for (const auto& [lo, hi] : ranges) {
        box.low.push_back(lo);
        box.high.push_back(hi);
    }
    return engine_->read_box(handle_, version(), box);
}

}  // namespace adb
