#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace varfa {

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

void write_bytes(const std::string& path, std::span<const std::uint8_t> bytes);

/// Little-endian binary encoder used by the checkpoint and dataset cache formats.
class ByteWriter {
 public:
  void raw(std::string_view bytes);
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(const std::string& s);
  void matrix(const Eigen::MatrixXd& m);
  void vector(const Eigen::VectorXd& v);

  /// Appends crc32 of everything written so far.
  void seal();

  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  void write_file(const std::string& path) const;

 private:
  std::vector<std::uint8_t> buf_;
};

class ByteReader {
 public:
  explicit ByteReader(std::vector<std::uint8_t> bytes) : buf_(std::move(bytes)) {}

  static ByteReader from_file(const std::string& path);

  /// Verifies and strips the crc32 trailer; throws IoError on mismatch.
  void verify_seal();

  void expect_magic(std::string_view magic);
  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Eigen::MatrixXd matrix();
  Eigen::VectorXd vector();

  bool done() const { return pos_ == buf_.size(); }
  std::vector<std::uint8_t> take_all() && { return std::move(buf_); }

 private:
  const std::uint8_t* take(std::size_t n);

  std::vector<std::uint8_t> buf_;
  std::size_t pos_ = 0;
};

}  // namespace varfa
