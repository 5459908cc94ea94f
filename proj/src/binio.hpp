#pragma once

// Internal little-endian binary IO helpers shared by the file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "vinn/core.hpp"

namespace vinn::detail {

inline void append_bytes(std::vector<std::uint8_t>& out, const void* p, std::size_t n) {
  const auto* b = static_cast<const std::uint8_t*>(p);
  out.insert(out.end(), b, b + n);
}

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

inline void put_f32(std::vector<std::uint8_t>& out, float v) {
  put_u32(out, std::bit_cast<std::uint32_t>(v));
}

// Cursor-based reader over a fully loaded file. Every failed read reports
// the byte offset at which that read began.
class Reader {
 public:
  explicit Reader(std::vector<std::uint8_t> buf) : buf_(std::move(buf)) {}

  std::uint64_t pos() const { return pos_; }
  std::uint64_t remaining() const { return buf_.size() - pos_; }

  const std::uint8_t* take(std::size_t n, const char* what) {
    if (remaining() < n) {
      std::ostringstream msg;
      msg << "truncated payload: need " << n << " bytes for " << what << " at offset " << pos_
          << ", only " << remaining() << " left";
      throw core::FormatError(core::FormatError::Kind::Truncated, pos_, msg.str());
    }
    const std::uint8_t* p = buf_.data() + pos_;
    pos_ += n;
    return p;
  }

  std::uint8_t u8(const char* what) { return *take(1, what); }

  std::uint16_t u16(const char* what) {
    const std::uint8_t* p = take(2, what);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }

  std::uint32_t u32(const char* what) {
    const std::uint8_t* p = take(4, what);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }

  float f32(const char* what) { return std::bit_cast<float>(u32(what)); }

 private:
  std::vector<std::uint8_t> buf_;
  std::uint64_t pos_ = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw core::FormatError(core::FormatError::Kind::MissingFile, 0,
                            "cannot open file: " + path.string());
  }
  in.seekg(0, std::ios::end);
  const auto size = static_cast<std::size_t>(in.tellg());
  in.seekg(0, std::ios::beg);
  std::vector<std::uint8_t> buf(size);
  if (size > 0) in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
  if (!in) {
    throw core::FormatError(core::FormatError::Kind::Truncated, 0,
                            "short read from " + path.string());
  }
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw core::FormatError(core::FormatError::Kind::Unwritable, 0,
                            "cannot write file: " + path.string());
  }
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  out.flush();
  if (!out) {
    throw core::FormatError(core::FormatError::Kind::Unwritable, 0,
                            "write failed: " + path.string());
  }
}

inline void check_magic(Reader& r, const char (&magic)[4], const char* name,
                        std::uint16_t expected_version) {
  const std::uint64_t at = r.pos();
  const std::uint8_t* p = r.take(4, "magic");
  if (std::memcmp(p, magic, 4) != 0) {
    throw core::FormatError(core::FormatError::Kind::BadMagic, at,
                            std::string("bad magic, expected ") + name);
  }
  const std::uint64_t vat = r.pos();
  const std::uint16_t version = r.u16("format version");
  if (version != expected_version) {
    std::ostringstream msg;
    msg << "unsupported " << name << " version " << version;
    throw core::FormatError(core::FormatError::Kind::BadVersion, vat, msg.str());
  }
}

}  // namespace vinn::detail
