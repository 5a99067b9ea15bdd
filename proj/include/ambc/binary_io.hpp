#pragma once

// Little-endian binary encoding with a trailing CRC32 over all preceding bytes.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

namespace ambc::io {

std::uint32_t crc32(std::string_view bytes);

class BinaryWriter {
 public:
  void magic(std::string_view tag) { buffer_.append(tag); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);

  template <typename Range>
  void f64_range(const Range& values) {
    for (auto v : values) f64(static_cast<double>(v));
  }

  const std::string& bytes() const { return buffer_; }
  /// Appends the CRC32 trailer and writes the file atomically (temp + rename).
  void commit(const std::filesystem::path& path);

 private:
  std::string buffer_;
};

/// Reads a whole file and decodes sequentially. Callers check the magic and
/// version first, then verify_checksum(). Every failure, including reads past
/// the end, raises FormatError.
class BinaryReader {
 public:
  BinaryReader(const std::filesystem::path& path, std::string_view what);
  static BinaryReader from_bytes(std::string bytes, std::string_view what);

  void expect_magic(std::string_view tag);
  void verify_checksum() const;
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::size_t remaining() const { return payload_end_ - pos_; }
  /// Throws unless the payload was consumed exactly.
  void finish() const;

 private:
  BinaryReader(std::string bytes, std::string what, int);
  void need(std::size_t n) const;

  std::string bytes_;
  std::string what_;
  std::size_t pos_ = 0;
  std::size_t payload_end_ = 0;
};

}  // namespace ambc::io
