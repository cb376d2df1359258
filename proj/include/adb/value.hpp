#ifndef ADB_VALUE_HPP
#define ADB_VALUE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "adb/errors.hpp"

namespace adb {

// The closed set of attribute value types an array can store.
enum class ValueType : std::uint8_t {
    uint8 = 0,
    int64 = 1,
    float64 = 2,
    string = 3,  // utf8 bytes
};

std::string_view to_string(ValueType t);
std::optional<ValueType> value_type_from_token(std::string_view token);

// One cell value.
using Value = std::variant<std::uint8_t, std::int64_t, double, std::string>;

ValueType value_type_of(const Value& v);
Value zero_value(ValueType t);
std::string value_to_display(const Value& v);

template <typename T>
constexpr ValueType value_type_for() {
    if constexpr (std::is_same_v<T, std::uint8_t>) {
        return ValueType::uint8;
    } else if constexpr (std::is_same_v<T, std::int64_t>) {
        return ValueType::int64;
    } else if constexpr (std::is_same_v<T, double>) {
        return ValueType::float64;
    } else {
        return ValueType::string;
    }
}

// A homogeneous column of cell values. Chunks, batches, and dense blocks all
// store their values through this so the uint8 fast path stays a flat byte
// vector.
class ValueArray {
public:
    ValueArray() : ValueArray(ValueType::uint8) {}
    explicit ValueArray(ValueType t);

    ValueType type() const { return type_; }
    std::size_t size() const;
    bool empty() const { return size() == 0; }

    void clear();
    void reserve(std::size_t n);
    // Appends n copies of the type's zero value.
    void resize_zero(std::size_t n);

    void push_back(const Value& v);  // TypeError on kind mismatch
    void append_from(const ValueArray& src, std::size_t i);
    void append_range(const ValueArray& src, std::size_t begin, std::size_t count);
    void set_from(std::size_t dst, const ValueArray& src, std::size_t i);

    Value get(std::size_t i) const;
    bool equal_at(std::size_t i, const ValueArray& other, std::size_t j) const;

    // Gathers src[idx[0]], src[idx[1]], ... into a new array.
    static ValueArray gather(const ValueArray& src, std::span<const std::size_t> idx);

    // Takes ownership of a typed vector without copying.
    template <typename T>
    static ValueArray adopt(std::vector<T> v) {
        ValueArray out(value_type_for<T>());
        out.vec<T>() = std::move(v);
        return out;
    }

    // Typed access; throws TypeError if T does not match type().
    template <typename T>
    std::vector<T>& vec() {
        if (auto* p = std::get_if<std::vector<T>>(&data_)) return *p;
        throw TypeError("value array is not of the requested type");
    }

    template <typename T>
    const std::vector<T>& vec() const {
        if (auto* p = std::get_if<std::vector<T>>(&data_)) return *p;
        throw TypeError("value array is not of the requested type");
    }

    template <typename F>
    decltype(auto) visit(F&& f) {
        return std::visit(std::forward<F>(f), data_);
    }

    template <typename F>
    decltype(auto) visit(F&& f) const {
        return std::visit(std::forward<F>(f), data_);
    }

    bool operator==(const ValueArray& other) const = default;

private:
    ValueType type_;
    std::variant<std::vector<std::uint8_t>, std::vector<std::int64_t>, std::vector<double>,
                 std::vector<std::string>>
        data_;
};

}  // namespace adb

#endif  // ADB_VALUE_HPP
