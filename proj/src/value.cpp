#include "adb/value.hpp"

#include <charconv>

namespace adb {

namespace {

template <typename T>
std::variant<std::vector<std::uint8_t>, std::vector<std::int64_t>, std::vector<double>,
             std::vector<std::string>>
make_storage() {
    return std::vector<T>{};
}

}  // namespace

std::string_view to_string(ValueType t) {
    switch (t) {
        case ValueType::uint8: return "uint8";
        case ValueType::int64: return "int64";
        case ValueType::float64: return "float64";
        case ValueType::string: return "string";
    }
    return "?";
}

std::optional<ValueType> value_type_from_token(std::string_view token) {
    if (token == "uint8") return ValueType::uint8;
    if (token == "int64") return ValueType::int64;
    if (token == "float64") return ValueType::float64;
    if (token == "string") return ValueType::string;
    return std::nullopt;
}

ValueType value_type_of(const Value& v) {
    return static_cast<ValueType>(v.index());
}

Value zero_value(ValueType t) {
    switch (t) {
        case ValueType::uint8: return std::uint8_t{0};
        case ValueType::int64: return std::int64_t{0};
        case ValueType::float64: return 0.0;
        case ValueType::string: return std::string{};
    }
    return std::uint8_t{0};
}

std::string value_to_display(const Value& v) {
    return std::visit(
        [](const auto& x) -> std::string {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, std::string>) {
                return x;
            } else if constexpr (std::is_same_v<T, double>) {
                char buf[32];
                auto r = std::to_chars(buf, buf + sizeof(buf), x);
                return std::string(buf, r.ptr);
            } else {
                return std::to_string(static_cast<std::int64_t>(x));
            }
        },
        v);
}

ValueArray::ValueArray(ValueType t) : type_(t) {
    switch (t) {
        case ValueType::uint8: data_ = make_storage<std::uint8_t>(); break;
        case ValueType::int64: data_ = make_storage<std::int64_t>(); break;
        case ValueType::float64: data_ = make_storage<double>(); break;
        case ValueType::string: data_ = make_storage<std::string>(); break;
    }
}

std::size_t ValueArray::size() const {
    return visit([](const auto& v) { return v.size(); });
}

void ValueArray::clear() {
    visit([](auto& v) { v.clear(); });
}

void ValueArray::reserve(std::size_t n) {
    visit([n](auto& v) { v.reserve(n); });
}

void ValueArray::resize_zero(std::size_t n) {
    visit([n](auto& v) {
        using T = typename std::decay_t<decltype(v)>::value_type;
        v.resize(v.size() + n, T{});
    });
}

void ValueArray::push_back(const Value& v) {
    if (value_type_of(v) != type_) {
        throw TypeError("value kind does not match array type " + std::string(to_string(type_)));
    }
    std::visit(
        [this](const auto& x) {
            using T = std::decay_t<decltype(x)>;
            std::get<std::vector<T>>(data_).push_back(x);
        },
        v);
}

void ValueArray::append_from(const ValueArray& src, std::size_t i) {
    if (src.type_ != type_) throw TypeError("value array type mismatch");
    visit([&](auto& dst) {
        using V = std::decay_t<decltype(dst)>;
        dst.push_back(std::get<V>(src.data_)[i]);
    });
}

void ValueArray::append_range(const ValueArray& src, std::size_t begin, std::size_t count) {
    if (src.type_ != type_) throw TypeError("value array type mismatch");
    visit([&](auto& dst) {
        using V = std::decay_t<decltype(dst)>;
        const auto& s = std::get<V>(src.data_);
        dst.insert(dst.end(), s.begin() + begin, s.begin() + begin + count);
    });
}

void ValueArray::set_from(std::size_t dst, const ValueArray& src, std::size_t i) {
    if (src.type_ != type_) throw TypeError("value array type mismatch");
    visit([&](auto& d) {
        using V = std::decay_t<decltype(d)>;
        d[dst] = std::get<V>(src.data_)[i];
    });
}

Value ValueArray::get(std::size_t i) const {
    return visit([i](const auto& v) -> Value { return v[i]; });
}

bool ValueArray::equal_at(std::size_t i, const ValueArray& other, std::size_t j) const {
    if (type_ != other.type_) return false;
    return visit([&](const auto& v) {
        using V = std::decay_t<decltype(v)>;
        return v[i] == std::get<V>(other.data_)[j];
    });
}

ValueArray ValueArray::gather(const ValueArray& src, std::span<const std::size_t> idx) {
    ValueArray out(src.type_);
    out.reserve(idx.size());
    src.visit([&](const auto& s) {
        using V = std::decay_t<decltype(s)>;
        auto& d = std::get<V>(out.data_);
        for (std::size_t i : idx) d.push_back(s[i]);
    });
    return out;
}

}  // namespace adb
