#ifndef ADB_VOLUME_HPP
#define ADB_VOLUME_HPP

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "adb/value.hpp"

namespace adb {

// PCG XSH-RR 64/32. One generator per volume slice: slice s draws from the
// stream with sequence id s, so any slice can be produced independently and
// reproducibly from (seed, s) alone.
class Pcg32 {
public:
    Pcg32(std::uint64_t seed, std::uint64_t stream) : state_(0), inc_((stream << 1u) | 1u) {
        next();
        state_ += seed;
        next();
    }

    std::uint32_t next() {
        std::uint64_t old = state_;
        state_ = old * 6364136223846793005ULL + inc_;
        auto xorshifted = static_cast<std::uint32_t>(((old >> 18u) ^ old) >> 27u);
        auto rot = static_cast<std::uint32_t>(old >> 59u);
        return (xorshifted >> rot) | (xorshifted << ((32 - rot) & 31));
    }

private:
    std::uint64_t state_;
    std::uint64_t inc_;
};

/*
 * Raw volume file (little-endian):
 *
 *   magic "VVOL"     4 bytes
 *   format version   u16
 *   dims count       u8
 *   extents          u32 each
 *   value type tag   u8
 *   payload          row-major values (uint8: 1 byte each)
 */
inline constexpr std::uint16_t kVolumeFormatVersion = 1;

// An in-memory uint8 volume of shape rows x cols x slices, row-major.
class VolumeData {
public:
    VolumeData() = default;
    VolumeData(std::vector<std::int64_t> extents, std::vector<std::uint8_t> payload);

    // Deterministic volume: cell (r, c, s) takes the low 8 bits of slice
    // stream s's (r*cols + c)-th output.
    static VolumeData generate(std::span<const std::int64_t> extents3, std::uint64_t seed);

    const std::vector<std::int64_t>& extents() const { return extents_; }
    std::int64_t rows() const { return extents_[0]; }
    std::int64_t cols() const { return extents_[1]; }
    std::int64_t slices() const { return extents_[2]; }
    std::uint64_t cell_count() const { return payload_.size(); }
    const std::vector<std::uint8_t>& payload() const { return payload_; }

    std::uint8_t at(std::int64_t r, std::int64_t c, std::int64_t s) const {
        return payload_[static_cast<std::size_t>((r * cols() + c) * slices() + s)];
    }

    // Row-major rows x cols plane of 0-based slice index s.
    void copy_slice(std::int64_t s, std::span<std::uint8_t> out) const;

private:
    std::vector<std::int64_t> extents_;
    std::vector<std::uint8_t> payload_;
};

std::uint64_t volume_payload_bytes(std::span<const std::int64_t> extents);
// A volume this large is accepted but reported as beyond desk scale.
bool beyond_desk_scale(std::span<const std::int64_t> extents);

// Streams a generated volume straight to disk; identical bytes to
// VolumeData::generate for the same (extents, seed).
void generate_volume_file(const std::filesystem::path& path,
                          std::span<const std::int64_t> extents3, std::uint64_t seed);

void write_volume_file(const std::filesystem::path& path, const VolumeData& volume);
VolumeData read_volume_file(const std::filesystem::path& path);

// Writes an arbitrary dense block (any supported value type) in the raw
// volume format; used by query extraction.
void write_vvol(const std::filesystem::path& path, std::span<const std::int64_t> extents,
                const ValueArray& values);

}  // namespace adb

#endif  // ADB_VOLUME_HPP
