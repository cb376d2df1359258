#include "adb/schema.hpp"

#include <cctype>
#include <limits>
#include <unordered_set>

#include "adb/binio.hpp"

namespace adb {

namespace {

std::string dim_coord_msg(const DimensionSpec& dim, Coord coord) {
    return "coordinate " + std::to_string(coord) + " out of bounds for dimension '" + dim.name +
           "' [" + std::to_string(dim.lo) + ":" + std::to_string(dim.hi) + "]";
}

}  // namespace

ChunkSlot chunk_of(const DimensionSpec& dim, Coord coord) {
    if (!dim.contains(coord)) throw RangeError(dim_coord_msg(dim, coord));
    Coord rel = coord - dim.lo;
    return ChunkSlot{rel / dim.chunk_len, rel % dim.chunk_len};
}

std::vector<std::int64_t> halo_chunks(const DimensionSpec& dim, Coord coord) {
    ChunkSlot slot = chunk_of(dim, coord);
    std::vector<std::int64_t> out;
    if (slot.ordinal > 0 && slot.offset < dim.overlap) out.push_back(slot.ordinal - 1);
    out.push_back(slot.ordinal);
    if (slot.ordinal + 1 < dim.chunk_count() && slot.offset >= dim.chunk_len - dim.overlap) {
        out.push_back(slot.ordinal + 1);
    }
    return out;
}

ArraySchema::ArraySchema(std::vector<AttributeSpec> attributes,
                         std::vector<DimensionSpec> dimensions)
    : attrs_(std::move(attributes)), dims_(std::move(dimensions)) {
    if (attrs_.empty()) throw ValidationError("schema requires at least one attribute");
    if (dims_.empty()) throw ValidationError("schema requires at least one dimension");

    std::unordered_set<std::string> names;
    for (const auto& a : attrs_) {
        if (!names.insert(a.name).second) {
            throw ValidationError("duplicate attribute name '" + a.name + "'");
        }
    }
    names.clear();
    for (const auto& d : dims_) {
        if (!names.insert(d.name).second) {
            throw ValidationError("duplicate dimension name '" + d.name + "'");
        }
        if (d.lo > d.hi) {
            throw ValidationError("dimension '" + d.name + "': lo (" + std::to_string(d.lo) +
                                  ") exceeds hi (" + std::to_string(d.hi) + ")");
        }
        if (d.chunk_len < 1) {
            throw ValidationError("dimension '" + d.name + "': chunk length must be >= 1");
        }
        if (d.overlap < 0) {
            throw ValidationError("dimension '" + d.name + "': overlap must be >= 0");
        }
        if (d.overlap >= d.chunk_len) {
            throw ValidationError("dimension '" + d.name + "': overlap (" +
                                  std::to_string(d.overlap) + ") must be less than chunk length (" +
                                  std::to_string(d.chunk_len) + ")");
        }
    }
}

bool ArraySchema::in_bounds(std::span<const Coord> coords) const {
    if (coords.size() != dims_.size()) return false;
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (!dims_[i].contains(coords[i])) return false;
    }
    return true;
}

void ArraySchema::check_bounds(std::span<const Coord> coords) const {
    if (coords.size() != dims_.size()) {
        throw ValidationError("coordinate tuple has " + std::to_string(coords.size()) +
                              " dimensions, schema has " + std::to_string(dims_.size()));
    }
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        if (!dims_[i].contains(coords[i])) throw RangeError(dim_coord_msg(dims_[i], coords[i]));
    }
}

std::vector<std::int64_t> ArraySchema::chunk_ordinals(std::span<const Coord> coords) const {
    std::vector<std::int64_t> out(dims_.size());
    for (std::size_t i = 0; i < dims_.size(); ++i) {
        out[i] = chunk_of(dims_[i], coords[i]).ordinal;
    }
    return out;
}

std::uint64_t ArraySchema::total_cells() const {
    std::uint64_t total = 1;
    for (const auto& d : dims_) {
        auto e = static_cast<std::uint64_t>(d.extent());
        if (e != 0 && total > std::numeric_limits<std::uint64_t>::max() / e) {
            throw ValidationError("total cell count overflows u64");
        }
        total *= e;
    }
    return total;
}

std::uint64_t ArraySchema::total_chunks() const {
    std::uint64_t total = 1;
    for (const auto& d : dims_) {
        auto c = static_cast<std::uint64_t>(d.chunk_count());
        if (c != 0 && total > std::numeric_limits<std::uint64_t>::max() / c) {
            throw ValidationError("total chunk count overflows u64");
        }
        total *= c;
    }
    return total;
}

namespace {

// Recursive-descent parser for the declaration grammar. Tracks byte offsets
// for error reporting; whitespace is skipped between tokens.
class SchemaParser {
public:
    explicit SchemaParser(std::string_view text) : text_(text) {}

    NamedSchema parse() {
        std::string name = ident("array name");
        expect('<');
        std::vector<AttributeSpec> attrs;
        attrs.push_back(attribute());
        while (peek() == ',') {
            ++pos_;
            attrs.push_back(attribute());
        }
        expect('>');
        expect('[');
        std::vector<DimensionSpec> dims;
        dims.push_back(dimension());
        while (peek() == ',') {
            ++pos_;
            dims.push_back(dimension());
        }
        expect(']');
        skip_ws();
        if (pos_ != text_.size()) {
            throw ParseError("unexpected trailing characters after ']'", pos_);
        }
        return NamedSchema{std::move(name), ArraySchema(std::move(attrs), std::move(dims))};
    }

private:
    AttributeSpec attribute() {
        AttributeSpec a;
        a.name = ident("attribute name");
        expect(':');
        std::size_t type_pos = pos_after_ws();
        std::string type_tok = ident("value type");
        auto vt = value_type_from_token(type_tok);
        if (!vt) {
            throw ParseError("unknown value type '" + type_tok +
                                 "' (expected uint8, int64, float64, or string)",
                             type_pos);
        }
        a.value_type = *vt;
        return a;
    }

    DimensionSpec dimension() {
        DimensionSpec d;
        d.name = ident("dimension name");
        expect('=');
        d.lo = integer();
        expect(':');
        d.hi = integer();
        expect(',');
        d.chunk_len = integer();
        expect(',');
        d.overlap = integer();
        return d;
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            ++pos_;
        }
    }

    std::size_t pos_after_ws() {
        skip_ws();
        return pos_;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    void expect(char c) {
        skip_ws();
        if (pos_ >= text_.size() || text_[pos_] != c) {
            throw ParseError(std::string("expected '") + c + "'", pos_);
        }
        ++pos_;
    }

    std::string ident(const char* what) {
        skip_ws();
        std::size_t start = pos_;
        auto head = [](char c) {
            return std::isalpha(static_cast<unsigned char>(c)) || c == '_';
        };
        auto tail = [](char c) {
            return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
        };
        if (pos_ >= text_.size() || !head(text_[pos_])) {
            throw ParseError(std::string("expected ") + what, pos_);
        }
        ++pos_;
        while (pos_ < text_.size() && tail(text_[pos_])) ++pos_;
        return std::string(text_.substr(start, pos_ - start));
    }

    std::int64_t integer() {
        skip_ws();
        std::size_t start = pos_;
        bool neg = false;
        if (pos_ < text_.size() && (text_[pos_] == '-' || text_[pos_] == '+')) {
            neg = text_[pos_] == '-';
            ++pos_;
        }
        if (pos_ >= text_.size() || !std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            throw ParseError("expected integer", start);
        }
        std::uint64_t mag = 0;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
            std::uint64_t digit = static_cast<std::uint64_t>(text_[pos_] - '0');
            if (mag > (std::numeric_limits<std::uint64_t>::max() - digit) / 10) {
                throw ParseError("integer literal out of range", start);
            }
            mag = mag * 10 + digit;
            ++pos_;
        }
        std::uint64_t limit = neg
            ? static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) + 1
            : static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max());
        if (mag > limit) throw ParseError("integer literal out of range", start);
        auto v = static_cast<std::int64_t>(mag);
        return neg ? -v : v;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

}  // namespace

NamedSchema parse_schema(std::string_view text) {
    if (text.empty()) throw ParseError("empty schema text", 0);
    return SchemaParser(text).parse();
}

std::string format_schema(const ArraySchema& schema, const std::string& name) {
    std::string out = name;
    out += '<';
    bool first = true;
    for (const auto& a : schema.attributes()) {
        if (!first) out += ',';
        first = false;
        out += a.name;
        out += ':';
        out += to_string(a.value_type);
    }
    out += ">[";
    first = true;
    for (const auto& d : schema.dims()) {
        if (!first) out += ',';
        first = false;
        out += d.name;
        out += '=';
        out += std::to_string(d.lo);
        out += ':';
        out += std::to_string(d.hi);
        out += ',';
        out += std::to_string(d.chunk_len);
        out += ',';
        out += std::to_string(d.overlap);
    }
    out += ']';
    return out;
}

std::uint64_t schema_digest(const ArraySchema& schema) {
    return fnv1a64(format_schema(schema, ""));
}

}  // namespace adb
