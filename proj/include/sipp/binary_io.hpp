#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sipp/error.hpp"

namespace sipp::io {

// Little-endian primitive writer over an ostream.
class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void bytes(const void* data, std::size_t n) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    if (!out_) throw DataError("write failed");
  }

  void magic(std::string_view m) { bytes(m.data(), m.size()); }

  template <typename T>
  void uint(T v) {
    static_assert(std::is_unsigned_v<T>);
    std::array<unsigned char, sizeof(T)> b{};
    for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b.data(), b.size());
  }

  void u8(std::uint8_t v) { uint(v); }
  void u16(std::uint16_t v) { uint(v); }
  void u32(std::uint32_t v) { uint(v); }
  void u64(std::uint64_t v) { uint(v); }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

  void f32s(std::span<const float> v) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(v.data(), v.size_bytes());
    } else {
      for (float x : v) f32(x);
    }
  }

  // u16 length prefix followed by UTF-8 bytes.
  void short_string(std::string_view s) {
    if (s.size() > 0xFFFF) throw DataError("string longer than 65535 bytes: " + std::string(s.substr(0, 32)));
    u16(static_cast<std::uint16_t>(s.size()));
    bytes(s.data(), s.size());
  }

 private:
  std::ostream& out_;
};

// Little-endian primitive reader that tracks its byte offset so truncation
// and corruption errors can name where they happened.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const noexcept { return offset_; }

  void bytes(void* data, std::size_t n) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    const auto got = static_cast<std::size_t>(in_.gcount());
    if (got != n) {
      throw DataError("truncated input at byte offset " + std::to_string(offset_ + got) + " (wanted " +
                      std::to_string(n) + " bytes at offset " + std::to_string(offset_) + ")");
    }
    offset_ += n;
  }

  void expect_magic(std::string_view m) {
    std::string got(m.size(), '\0');
    bytes(got.data(), got.size());
    if (got != m) {
      throw DataError("bad magic at byte offset " + std::to_string(offset_ - m.size()) + ": expected '" +
                      std::string(m) + "'");
    }
  }

  template <typename T>
  T uint() {
    static_assert(std::is_unsigned_v<T>);
    std::array<unsigned char, sizeof(T)> b{};
    bytes(b.data(), b.size());
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(b[i]) << (8 * i));
    return v;
  }

  std::uint8_t u8() { return uint<std::uint8_t>(); }
  std::uint16_t u16() { return uint<std::uint16_t>(); }
  std::uint32_t u32() { return uint<std::uint32_t>(); }
  std::uint64_t u64() { return uint<std::uint64_t>(); }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }

  void f32s(std::span<float> out) {
    if constexpr (std::endian::native == std::endian::little) {
      bytes(out.data(), out.size_bytes());
    } else {
      for (float& x : out) x = f32();
    }
  }

  std::string short_string() {
    const std::uint16_t n = u16();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }

  // True when no bytes remain (does not consume anything).
  bool at_end() {
    return in_.peek() == std::char_traits<char>::eof();
  }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace sipp::io
