#include "ambc/binary_io.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "ambc/errors.hpp"

namespace ambc::io {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

std::uint32_t crc32(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

namespace {

template <typename T>
void append_raw(std::string& buf, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  buf.append(raw, sizeof(T));
}

}  // namespace

void BinaryWriter::u32(std::uint32_t v) { append_raw(buffer_, v); }
void BinaryWriter::u64(std::uint64_t v) { append_raw(buffer_, v); }
void BinaryWriter::f64(double v) { append_raw(buffer_, v); }

void BinaryWriter::commit(const std::filesystem::path& path) {
  std::string out = buffer_;
  append_raw(out, crc32(buffer_));
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot open " + tmp.string() + " for writing");
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

BinaryReader::BinaryReader(std::string bytes, std::string what, int) : bytes_(std::move(bytes)), what_(std::move(what)) {
  if (bytes_.size() < sizeof(std::uint32_t)) throw FormatError(what_ + ": file truncated");
  payload_end_ = bytes_.size() - sizeof(std::uint32_t);
}

void BinaryReader::verify_checksum() const {
  std::uint32_t stored;
  std::memcpy(&stored, bytes_.data() + payload_end_, sizeof(stored));
  if (crc32(std::string_view(bytes_).substr(0, payload_end_)) != stored)
    throw FormatError(what_ + ": CRC32 mismatch (file truncated or corrupted)");
}

static std::string slurp(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

BinaryReader::BinaryReader(const std::filesystem::path& path, std::string_view what)
    : BinaryReader(slurp(path), std::string(what) + " " + path.string(), 0) {}

BinaryReader BinaryReader::from_bytes(std::string bytes, std::string_view what) {
  return BinaryReader(std::move(bytes), std::string(what), 0);
}

void BinaryReader::need(std::size_t n) const {
  if (pos_ + n > payload_end_) throw FormatError(what_ + ": file truncated");
}

void BinaryReader::expect_magic(std::string_view tag) {
  if (bytes_.size() < tag.size() || std::string_view(bytes_).substr(pos_, tag.size()) != tag)
    throw FormatError(what_ + ": bad magic (expected \"" + std::string(tag) + "\")");
  pos_ += tag.size();
}

std::uint32_t BinaryReader::u32() {
  need(4);
  std::uint32_t v;
  std::memcpy(&v, bytes_.data() + pos_, 4);
  pos_ += 4;
  return v;
}

std::uint64_t BinaryReader::u64() {
  need(8);
  std::uint64_t v;
  std::memcpy(&v, bytes_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

double BinaryReader::f64() {
  need(8);
  double v;
  std::memcpy(&v, bytes_.data() + pos_, 8);
  pos_ += 8;
  return v;
}

void BinaryReader::finish() const {
  if (pos_ != payload_end_) throw FormatError(what_ + ": unexpected trailing bytes");
}

}  // namespace ambc::io
