#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

namespace tomopet {

using Bytes = std::vector<std::uint8_t>;

/// Little-endian serializer.
class ByteWriter {
public:
    void u8(std::uint8_t v) { buf_.push_back(v); }
    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f32(float v);
    void f64(double v);
    void raw(std::span<const std::uint8_t> bytes);
    void magic(std::string_view tag, std::uint8_t version);

    const Bytes& bytes() const& { return buf_; }
    Bytes bytes() && { return std::move(buf_); }

private:
    Bytes buf_;
};

/// Little-endian deserializer; every read past the end throws FormatError.
class ByteReader {
public:
    ByteReader(std::span<const std::uint8_t> data, std::string_view what)
        : data_(data), what_(what) {}

    std::uint8_t u8();
    std::uint32_t u32();
    std::uint64_t u64();
    float f32();
    double f64();
    std::span<const std::uint8_t> raw(std::size_t n);
    /// Checks the 4-byte tag and version byte.
    void expect_magic(std::string_view tag, std::uint8_t version);
    /// Throws FormatError if unread bytes remain.
    void expect_end() const;

    std::size_t remaining() const { return data_.size() - pos_; }

private:
    void need(std::size_t n) const;

    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
    std::string_view what_;
};

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text_file(const std::filesystem::path& path, std::string_view text);

} // namespace tomopet
