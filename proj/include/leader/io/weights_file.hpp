#pragma once

// Named-tensor container, little-endian:
//   "LEADW1"  u32 count
//   count x { u32 name_len, name bytes, u8 ndim, u32 dims[ndim], u8 dtype (0 = f32), f32 payload }
//   u32 CRC-32 of every byte between the header and the checksum

#include <leader/io/errors.hpp>
#include <leader/io/files.hpp>
#include <leader/weights.hpp>

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <set>
#include <string>

namespace leader::io {

inline constexpr char kWeightsMagic[] = "LEADW1";
inline constexpr std::size_t kWeightsHeaderSize = 10;
inline constexpr std::uint8_t kDtypeF32 = 0;
inline constexpr std::size_t kMaxRank = 8;

inline std::uint32_t crc32_of(const char* data, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, reinterpret_cast<const Bytef*>(data), chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((v >> (8 * b)) & 0xFFu));
}

class ByteReader {
public:
    ByteReader(const std::string& bytes, std::size_t begin, std::size_t end) : bytes_(bytes), pos_(begin), end_(end) {}

    void need(std::size_t n, const char* what) const {
        if (end_ - pos_ < n) throw TruncationError(std::string("weights file truncated while reading ") + what);
    }
    std::uint8_t u8(const char* what) {
        need(1, what);
        return static_cast<std::uint8_t>(bytes_[pos_++]);
    }
    std::uint32_t u32(const char* what) {
        need(4, what);
        std::uint32_t v = 0;
        for (int b = 0; b < 4; ++b) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(bytes_[pos_ + b])) << (8 * b);
        pos_ += 4;
        return v;
    }
    std::string take(std::size_t n, const char* what) {
        need(n, what);
        std::string s = bytes_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t position() const noexcept { return pos_; }

private:
    const std::string& bytes_;
    std::size_t pos_;
    std::size_t end_;
};

}  // namespace detail

inline std::string serialize_weights(const WeightStore& store) {
    std::string out(kWeightsMagic, 6);
    detail::put_u32(out, static_cast<std::uint32_t>(store.size()));
    for (const auto& [name, t] : store) {
        if (t.shape.size() > kMaxRank) throw StructuralError("weight '" + name + "' has rank above 8");
        detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
        out += name;
        out.push_back(static_cast<char>(t.shape.size()));
        for (std::size_t d : t.shape) detail::put_u32(out, static_cast<std::uint32_t>(d));
        out.push_back(static_cast<char>(kDtypeF32));
        for (float v : t.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
    }
    detail::put_u32(out, crc32_of(out.data() + kWeightsHeaderSize, out.size() - kWeightsHeaderSize));
    return out;
}

/// Structure is parsed first (TruncationError), then the checksum is checked
/// (CrcError), then names (DuplicateNameError).
inline WeightStore deserialize_weights(const std::string& bytes) {
    if (bytes.size() < 6 || bytes.compare(0, 6, kWeightsMagic) != 0) throw FormatError("not a LEADW1 weights file");
    if (bytes.size() < kWeightsHeaderSize + 4) throw TruncationError("weights file truncated in header");
    const std::size_t body_end = bytes.size() - 4;
    detail::ByteReader header(bytes, 6, kWeightsHeaderSize);
    const std::uint32_t count = header.u32("tensor count");

    struct Entry {
        std::string name;
        std::vector<std::size_t> shape;
        std::size_t payload = 0;
    };
    std::vector<Entry> entries;
    detail::ByteReader r(bytes, kWeightsHeaderSize, body_end);
    for (std::uint32_t k = 0; k < count; ++k) {
        Entry e;
        const std::uint32_t len = r.u32("name length");
        e.name = r.take(len, "name");
        const std::uint8_t ndim = r.u8("rank");
        if (ndim > kMaxRank) throw FormatError("weight '" + e.name + "' declares rank " + std::to_string(ndim));
        for (std::uint8_t d = 0; d < ndim; ++d) e.shape.push_back(r.u32("dimension"));
        const std::uint8_t dtype = r.u8("dtype");
        if (dtype != kDtypeF32) throw FormatError("weight '" + e.name + "' has unsupported dtype tag " + std::to_string(dtype));
        const std::size_t room = (body_end - r.position()) / 4;
        std::size_t elements = 1;
        for (std::size_t d : e.shape) {
            if (d != 0 && elements > room / d) throw TruncationError("weights file truncated in payload of '" + e.name + "'");
            elements *= d;
        }
        e.payload = r.position();
        r.take(elements * 4, "payload");
        entries.push_back(std::move(e));
    }
    if (r.position() != body_end) throw FormatError("weights file has unexpected bytes after the last tensor");

    const std::uint32_t stored = detail::ByteReader(bytes, body_end, bytes.size()).u32("checksum");
    const std::uint32_t actual = crc32_of(bytes.data() + kWeightsHeaderSize, body_end - kWeightsHeaderSize);
    if (stored != actual) throw CrcError("weights file checksum mismatch");

    WeightStore store;
    std::set<std::string> seen;
    for (const Entry& e : entries) {
        if (!seen.insert(e.name).second) throw DuplicateNameError("weights file lists '" + e.name + "' twice");
        WeightTensor t;
        t.shape = e.shape;
        t.values.resize(WeightTensor::element_count(e.shape));
        detail::ByteReader p(bytes, e.payload, body_end);
        for (float& v : t.values) v = std::bit_cast<float>(p.u32("payload"));
        store.insert(e.name, std::move(t));
    }
    return store;
}

inline WeightStore read_weights(const std::filesystem::path& path) {
    try {
        return deserialize_weights(read_file(path));
    } catch (const CrcError& e) {
        throw CrcError(path.string() + ": " + e.what());
    } catch (const TruncationError& e) {
        throw TruncationError(path.string() + ": " + e.what());
    } catch (const DuplicateNameError& e) {
        throw DuplicateNameError(path.string() + ": " + e.what());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

inline void write_weights(const std::filesystem::path& path, const WeightStore& store) {
    write_file_atomic(path, serialize_weights(store));
}

}  // namespace leader::io
