#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

#include "ecnn/error.hpp"

namespace ecnn {

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
/// Readers never observe a partially written file; on failure the temporary
/// is removed and `path` is left untouched. Throws DataError.
void atomic_write(const std::filesystem::path& path, std::string_view bytes);

/// Whole-file read. Throws DataError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

/// Little-endian encoder, independent of host byte order.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
    void u32(std::uint32_t v) { put(v, 4); }
    void u64(std::uint64_t v) { put(v, 8); }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::string_view s) { buf_.append(s); }
    void f32s(std::span<const float> v) {
        buf_.reserve(buf_.size() + 4 * v.size());
        for (float x : v) f32(x);
    }

    const std::string& bytes() const { return buf_; }

private:
    void put(std::uint64_t v, int n) {
        for (int i = 0; i < n; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }

    std::string buf_;
};

/// Little-endian decoder over a byte buffer. Reading past the end throws
/// TruncatedError carrying `what`.
class ByteReader {
public:
    ByteReader(std::string_view data, std::string what) : data_(data), what_(std::move(what)) {}

    std::uint8_t u8() { return static_cast<std::uint8_t>(get(1)); }
    std::uint32_t u32() { return static_cast<std::uint32_t>(get(4)); }
    std::uint64_t u64() { return get(8); }
    float f32() { return std::bit_cast<float>(u32()); }
    double f64() { return std::bit_cast<double>(u64()); }
    std::string_view raw(std::size_t n) {
        need(n);
        auto s = data_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    void f32s(std::span<float> out) {
        need(4 * out.size());
        for (float& x : out) x = f32();
    }

    std::size_t remaining() const { return data_.size() - pos_; }
    std::size_t position() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (data_.size() - pos_ < n) {
            throw TruncatedError(what_ + ": truncated at byte " + std::to_string(pos_) + " (need " +
                                 std::to_string(n) + " more, have " + std::to_string(data_.size() - pos_) +
                                 ")");
        }
    }
    std::uint64_t get(int n) {
        need(static_cast<std::size_t>(n));
        std::uint64_t v = 0;
        for (int i = 0; i < n; ++i) {
            v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
        }
        pos_ += static_cast<std::size_t>(n);
        return v;
    }

    std::string_view data_;
    std::string what_;
    std::size_t pos_ = 0;
};

}  // namespace ecnn
