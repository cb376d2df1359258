#ifndef ADB_BINIO_HPP
#define ADB_BINIO_HPP

#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "adb/errors.hpp"

// Little-endian buffer primitives shared by every on-disk format plus the
// FNV-1a digest used for corruption checks.

namespace adb {

inline constexpr std::uint64_t kFnvOffsetBasis = 0xcbf29ce484222325ULL;
inline constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                             std::uint64_t seed = kFnvOffsetBasis) {
    std::uint64_t h = seed;
    for (std::uint8_t b : bytes) {
        h ^= b;
        h *= kFnvPrime;
    }
    return h;
}

inline std::uint64_t fnv1a64(std::string_view s) {
    return fnv1a64(std::span<const std::uint8_t>(
        reinterpret_cast<const std::uint8_t*>(s.data()), s.size()));
}

class BufWriter {
public:
    void put_u8(std::uint8_t v) { buf_.push_back(v); }

    void put_u16(std::uint16_t v) { put_le(v); }
    void put_u32(std::uint32_t v) { put_le(v); }
    void put_u64(std::uint64_t v) { put_le(v); }
    void put_i64(std::int64_t v) { put_le(static_cast<std::uint64_t>(v)); }

    void put_f64(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof(bits));
        put_le(bits);
    }

    void put_bytes(std::span<const std::uint8_t> b) {
        buf_.insert(buf_.end(), b.begin(), b.end());
    }

    // u32 length prefix + raw bytes.
    void put_string32(std::string_view s) {
        put_u32(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    std::size_t size() const { return buf_.size(); }
    std::span<const std::uint8_t> bytes() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }

    std::uint64_t digest() const { return fnv1a64(bytes()); }

private:
    template <typename T>
    void put_le(T v) {
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
        }
    }

    std::vector<std::uint8_t> buf_;
};

// Bounds-checked reader over an in-memory file image. Truncation is reported
// as corruption: every format carries its own digest, so a short file is a
// damaged file.
class BufReader {
public:
    BufReader(std::span<const std::uint8_t> data, std::string context)
        : data_(data), context_(std::move(context)) {}

    std::uint8_t get_u8() { return get_le<std::uint8_t>(); }
    std::uint16_t get_u16() { return get_le<std::uint16_t>(); }
    std::uint32_t get_u32() { return get_le<std::uint32_t>(); }
    std::uint64_t get_u64() { return get_le<std::uint64_t>(); }
    std::int64_t get_i64() { return static_cast<std::int64_t>(get_le<std::uint64_t>()); }

    double get_f64() {
        std::uint64_t bits = get_le<std::uint64_t>();
        double v;
        std::memcpy(&v, &bits, sizeof(v));
        return v;
    }

    std::string get_string32() {
        std::uint32_t n = get_u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    std::span<const std::uint8_t> get_bytes(std::size_t n) {
        need(n);
        auto s = data_.subspan(pos_, n);
        pos_ += n;
        return s;
    }

    std::size_t pos() const { return pos_; }
    std::size_t remaining() const { return data_.size() - pos_; }
    bool at_end() const { return pos_ == data_.size(); }

    // Digest of everything consumed so far.
    std::uint64_t digest_consumed() const { return fnv1a64(data_.subspan(0, pos_)); }

    void expect_end() const {
        if (!at_end()) {
            throw CorruptionError(context_ + ": " + std::to_string(remaining()) +
                                  " trailing bytes after payload");
        }
    }

private:
    void need(std::size_t n) {
        if (remaining() < n) {
            throw CorruptionError(context_ + ": truncated (needed " + std::to_string(n) +
                                  " bytes at offset " + std::to_string(pos_) + ")");
        }
    }

    template <typename T>
    T get_le() {
        need(sizeof(T));
        T v = 0;
        for (std::size_t i = 0; i < sizeof(T); ++i) {
            v = static_cast<T>(v | (static_cast<T>(data_[pos_ + i]) << (8 * i)));
        }
        pos_ += sizeof(T);
        return v;
    }

    std::span<const std::uint8_t> data_;
    std::string context_;
    std::size_t pos_ = 0;
};

}  // namespace adb

#endif  // ADB_BINIO_HPP
