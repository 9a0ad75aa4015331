#include "varfa/serialize.hpp"

#include "varfa/error.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace varfa {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

std::uint32_t crc32(std::span<const std::uint8_t> bytes) {
  return static_cast<std::uint32_t>(
      ::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), static_cast<uInt>(bytes.size())));
}

void ByteWriter::raw(std::string_view bytes) { buf_.insert(buf_.end(), bytes.begin(), bytes.end()); }

void ByteWriter::u32(std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v) {
  for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void ByteWriter::str(const std::string& s) {
  u64(s.size());
  raw(s);
}

void ByteWriter::matrix(const Eigen::MatrixXd& m) {
  u64(static_cast<std::uint64_t>(m.rows()));
  u64(static_cast<std::uint64_t>(m.cols()));
  for (Eigen::Index k = 0; k < m.size(); ++k) f64(m.data()[k]);
}

void ByteWriter::vector(const Eigen::VectorXd& v) {
  u64(static_cast<std::uint64_t>(v.size()));
  for (Eigen::Index k = 0; k < v.size(); ++k) f64(v[k]);
}

void ByteWriter::seal() { u32(crc32(buf_)); }

void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for '" + path + "'");
}

void ByteWriter::write_file(const std::string& path) const { write_bytes(path, buf_); }

ByteReader ByteReader::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return ByteReader(std::move(bytes));
}

void ByteReader::verify_seal() {
  if (buf_.size() < 4) throw IoError("checksum error: file too short");
  const std::size_t body = buf_.size() - 4;
  std::uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) stored |= static_cast<std::uint32_t>(buf_[body + i]) << (8 * i);
  if (crc32(std::span(buf_.data(), body)) != stored) throw IoError("checksum error: file is corrupt or truncated");
  buf_.resize(body);
}

const std::uint8_t* ByteReader::take(std::size_t n) {
  if (buf_.size() - pos_ < n) throw IoError("unexpected end of data");
  const std::uint8_t* p = buf_.data() + pos_;
  pos_ += n;
  return p;
}

void ByteReader::expect_magic(std::string_view magic) {
  const auto* p = take(magic.size());
  if (std::memcmp(p, magic.data(), magic.size()) != 0) throw IoError("bad magic string");
}

std::uint8_t ByteReader::u8() { return *take(1); }

std::uint32_t ByteReader::u32() {
  const auto* p = take(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  return v;
}

std::uint64_t ByteReader::u64() {
  const auto* p = take(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

double ByteReader::f64() { return std::bit_cast<double>(u64()); }

std::string ByteReader::str() {
  const auto n = u64();
  const auto* p = take(n);
  return std::string(reinterpret_cast<const char*>(p), n);
}

Eigen::MatrixXd ByteReader::matrix() {
  const auto rows = static_cast<Eigen::Index>(u64());
  const auto cols = static_cast<Eigen::Index>(u64());
  const std::size_t remaining = (buf_.size() - pos_) / 8;
  if (rows < 0 || cols < 0 || (rows > 0 && static_cast<std::size_t>(cols) > remaining / static_cast<std::size_t>(rows)))
    throw IoError("implausible matrix shape");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = f64();
  return m;
}

Eigen::VectorXd ByteReader::vector() {
  const auto n = static_cast<Eigen::Index>(u64());
  if (n < 0 || static_cast<std::size_t>(n) > (buf_.size() - pos_) / 8) throw IoError("implausible vector length");
  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = f64();
  return v;
}

}  // namespace varfa
