#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "textagg/error.hpp"

namespace textagg {

// Little-endian encoder for the on-disk formats.
class ByteWriter {
 public:
  void raw(std::span<const std::uint8_t> bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
  }
  void magic(std::string_view tag) {
    buffer_.insert(buffer_.end(), tag.begin(), tag.end());
  }
  void u8(std::uint8_t x) { buffer_.push_back(x); }
  void u32(std::uint32_t x) { le(x); }
  void u64(std::uint64_t x) { le(x); }
  void f32(float x) { le(std::bit_cast<std::uint32_t>(x)); }
  void f32s(std::span<const float> xs) {
    for (float x : xs) f32(x);
  }
  // u32 length prefix, then the bytes.
  void str(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buffer_.insert(buffer_.end(), s.begin(), s.end());
  }

  const std::vector<std::uint8_t>& bytes() const { return buffer_; }
  std::vector<std::uint8_t> take() { return std::move(buffer_); }

 private:
  template <class U>
  void le(U x) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      buffer_.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
    }
  }

  std::vector<std::uint8_t> buffer_;
};

// Bounds-checked little-endian decoder. Running off the end throws
// TruncatedError naming `what`.
class ByteReader {
 public:
  ByteReader(std::span<const std::uint8_t> bytes, std::string what)
      : bytes_(bytes), what_(std::move(what)) {}

  void expect_magic(std::string_view tag) {
    need(tag.size(), "magic");
    if (std::memcmp(bytes_.data() + pos_, tag.data(), tag.size()) != 0) {
      throw BadMagicError(what_ + ": bad magic, expected \"" + std::string(tag) + "\"");
    }
    pos_ += tag.size();
  }
  void expect_version(std::uint32_t expected) {
    const std::uint32_t v = u32();
    if (v != expected) {
      throw BadVersionError(what_ + ": unsupported version " + std::to_string(v) +
                            " (expected " + std::to_string(expected) + ")");
    }
  }
  std::uint8_t u8() {
    need(1, "u8");
    return bytes_[pos_++];
  }
  std::uint32_t u32() { return le<std::uint32_t>(); }
  std::uint64_t u64() { return le<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  void f32s(std::span<float> out) {
    need(out.size() * 4, "f32 payload");
    for (float& x : out) x = f32();
  }
  std::string str() {
    const std::uint32_t n = u32();
    need(n, "string");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  void raw(std::span<std::uint8_t> out) {
    need(out.size(), "bytes");
    std::memcpy(out.data(), bytes_.data() + pos_, out.size());
    pos_ += out.size();
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }
  // Number of bytes left must be zero.
  void expect_end() const {
    if (remaining() != 0) {
      throw SizeMismatchError(what_ + ": " + std::to_string(remaining()) +
                              " trailing bytes after declared payload");
    }
  }
  // Guards counts read from the file before allocating for them.
  void need(std::uint64_t n, std::string_view field) const {
    if (n > remaining()) {
      throw TruncatedError(what_ + ": truncated while reading " + std::string(field));
    }
  }

 private:
  template <class U>
  U le() {
    need(sizeof(U), "integer");
    U x = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      x |= static_cast<U>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(U);
    return x;
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path,
                      std::span<const std::uint8_t> bytes);
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);

}  // namespace textagg
