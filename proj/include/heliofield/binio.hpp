#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "heliofield/errors.hpp"

namespace heliofield::binio {

/// Little-endian serialization, independent of host byte order.

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline void put_i64(std::string& out, std::int64_t v) {
  put_u64(out, static_cast<std::uint64_t>(v));
}

inline void put_f32(std::string& out, float v) {
  std::uint32_t bits;
  std::memcpy(&bits, &v, 4);
  put_u32(out, bits);
}

/// Cursor over an in-memory buffer; throws DataError on truncation.
class Reader {
 public:
  Reader(const std::string& buf, std::string name)
      : buf_(buf), name_(std::move(name)) {}

  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }

  std::uint16_t u16() {
    const char* p = take(2);
    return static_cast<std::uint16_t>(byte(p, 0) | (byte(p, 1) << 8));
  }

  std::uint32_t u32() {
    const char* p = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(byte(p, i)) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    const char* p = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(byte(p, i)) << (8 * i);
    return v;
  }

  std::int64_t i64() { return static_cast<std::int64_t>(u64()); }

  float f32() {
    std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }

  std::string bytes(std::size_t n) { return {take(n), n}; }

  void expect_magic(const char* magic) {
    std::string got = bytes(std::strlen(magic));
    if (got != magic) {
      throw DataError(name_ + ": bad magic bytes (expected '" +
                      std::string(magic) + "')");
    }
  }

  [[nodiscard]] std::size_t pos() const { return pos_; }
  [[nodiscard]] std::size_t remaining() const { return buf_.size() - pos_; }

  void seek(std::size_t p) {
    if (p > buf_.size()) throw DataError(name_ + ": seek past end of file");
    pos_ = p;
  }

 private:
  static unsigned byte(const char* p, int i) {
    return static_cast<unsigned char>(p[i]);
  }

  const char* take(std::size_t n) {
    if (pos_ + n > buf_.size()) {
      throw DataError(name_ + ": truncated file (need " + std::to_string(n) +
                      " bytes at offset " + std::to_string(pos_) + ")");
    }
    const char* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::string& buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

inline std::string read_binary_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open " + path);
  std::string buf((std::istreambuf_iterator<char>(in)),
                  std::istreambuf_iterator<char>());
  return buf;
}

inline void write_binary_file(const std::string& path, const std::string& buf) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataError("short write to " + path);
}

}  // namespace heliofield::binio
