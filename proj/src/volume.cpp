#include "adb/volume.hpp"

#include <fstream>
#include <limits>

#include "adb/binio.hpp"
#include "adb/chunkstore.hpp"

namespace adb {

namespace {

constexpr std::uint8_t kVolumeMagic[4] = {'V', 'V', 'O', 'L'};

void check_extents3(std::span<const std::int64_t> extents) {
    if (extents.size() != 3) throw ValidationError("volume generation expects 3 extents");
    for (auto e : extents) {
        if (e < 1) throw ValidationError("volume extents must be positive");
        if (e > static_cast<std::int64_t>(std::numeric_limits<std::uint32_t>::max())) {
            throw ValidationError("volume extent exceeds the format's u32 field");
        }
    }
}

std::vector<std::uint8_t> volume_header(std::span<const std::int64_t> extents, ValueType type) {
    BufWriter w;
    w.put_bytes(kVolumeMagic);
    w.put_u16(kVolumeFormatVersion);
    w.put_u8(static_cast<std::uint8_t>(extents.size()));
    for (auto e : extents) w.put_u32(static_cast<std::uint32_t>(e));
    w.put_u8(static_cast<std::uint8_t>(type));
    return w.take();
}

// Emits the payload in file order, one r-row of cols*slices bytes at a time.
// Keeping one generator per slice makes the (row, col) order of each slice
// stream independent of the interleaved output order.
void generate_rows(std::span<const std::int64_t> extents, std::uint64_t seed,
                   const std::function<void(std::span<const std::uint8_t>)>& sink) {
    const std::int64_t rows = extents[0], cols = extents[1], slices = extents[2];
    std::vector<Pcg32> streams;
    streams.reserve(static_cast<std::size_t>(slices));
    for (std::int64_t s = 0; s < slices; ++s) {
        streams.emplace_back(seed, static_cast<std::uint64_t>(s));
    }
    std::vector<std::uint8_t> buf(static_cast<std::size_t>(cols * slices));
    for (std::int64_t r = 0; r < rows; ++r) {
        std::size_t i = 0;
        for (std::int64_t c = 0; c < cols; ++c) {
            for (std::int64_t s = 0; s < slices; ++s) {
                buf[i++] = static_cast<std::uint8_t>(streams[static_cast<std::size_t>(s)].next());
            }
        }
        sink(buf);
    }
}

}  // namespace

VolumeData::VolumeData(std::vector<std::int64_t> extents, std::vector<std::uint8_t> payload)
    : extents_(std::move(extents)), payload_(std::move(payload)) {
    if (extents_.size() != 3) throw ValidationError("volume data expects 3 extents");
    if (payload_.size() != volume_payload_bytes(extents_)) {
        throw ValidationError("volume payload size does not match extents");
    }
}

VolumeData VolumeData::generate(std::span<const std::int64_t> extents3, std::uint64_t seed) {
    check_extents3(extents3);
    std::vector<std::uint8_t> payload;
    payload.reserve(volume_payload_bytes(extents3));
    generate_rows(extents3, seed, [&](std::span<const std::uint8_t> row) {
        payload.insert(payload.end(), row.begin(), row.end());
    });
    return VolumeData(std::vector<std::int64_t>(extents3.begin(), extents3.end()),
                      std::move(payload));
}

void VolumeData::copy_slice(std::int64_t s, std::span<std::uint8_t> out) const {
    const std::int64_t stride = slices();
    const std::uint8_t* src = payload_.data() + s;
    const std::size_t n = static_cast<std::size_t>(rows() * cols());
    for (std::size_t i = 0; i < n; ++i) out[i] = src[i * stride];
}

std::uint64_t volume_payload_bytes(std::span<const std::int64_t> extents) {
    std::uint64_t n = 1;
    for (auto e : extents) n *= static_cast<std::uint64_t>(e);
    return n;
}

bool beyond_desk_scale(std::span<const std::int64_t> extents) {
    return volume_payload_bytes(extents) > (1ULL << 30);
}

void generate_volume_file(const std::filesystem::path& path,
                          std::span<const std::int64_t> extents3, std::uint64_t seed) {
    check_extents3(extents3);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    auto header = volume_header(extents3, ValueType::uint8);
    out.write(reinterpret_cast<const char*>(header.data()),
              static_cast<std::streamsize>(header.size()));
    generate_rows(extents3, seed, [&](std::span<const std::uint8_t> row) {
        out.write(reinterpret_cast<const char*>(row.data()),
                  static_cast<std::streamsize>(row.size()));
    });
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

void write_volume_file(const std::filesystem::path& path, const VolumeData& volume) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + path.string());
    auto header = volume_header(volume.extents(), ValueType::uint8);
    out.write(reinterpret_cast<const char*>(header.data()),
              static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(volume.payload().data()),
              static_cast<std::streamsize>(volume.payload().size()));
    out.flush();
    if (!out) throw IoError("write failed for " + path.string());
}

VolumeData read_volume_file(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    BufReader r(bytes, path.filename().string());
    auto magic = r.get_bytes(4);
    if (!std::equal(magic.begin(), magic.end(), kVolumeMagic)) {
        throw CorruptionError(path.string() + ": bad magic");
    }
    if (auto ver = r.get_u16(); ver != kVolumeFormatVersion) {
        throw CorruptionError(path.string() + ": unsupported format version " +
                              std::to_string(ver));
    }
    std::uint8_t nd = r.get_u8();
    if (nd != 3) throw ValidationError(path.string() + ": expected a 3-dimensional volume");
    std::vector<std::int64_t> extents(nd);
    for (auto& e : extents) e = r.get_u32();
    auto type = static_cast<ValueType>(r.get_u8());
    if (type != ValueType::uint8) {
        throw ValidationError(path.string() + ": expected a uint8 volume");
    }
    auto payload = r.get_bytes(volume_payload_bytes(extents));
    r.expect_end();
    return VolumeData(std::move(extents),
                      std::vector<std::uint8_t>(payload.begin(), payload.end()));
}

void write_vvol(const std::filesystem::path& path, std::span<const std::int64_t> extents,
                const ValueArray& values) {
    BufWriter w;
    w.put_bytes(volume_header(extents, values.type()));
    values.visit([&](const auto& vec) {
        using T = typename std::decay_t<decltype(vec)>::value_type;
        for (const auto& v : vec) {
            if constexpr (std::is_same_v<T, std::uint8_t>) {
                w.put_u8(v);
            } else if constexpr (std::is_same_v<T, std::int64_t>) {
                w.put_i64(v);
            } else if constexpr (std::is_same_v<T, double>) {
                w.put_f64(v);
            } else {
                w.put_string32(v);
            }
        }
    });
    write_file_bytes(path, w.bytes());
}

}  // namespace adb
