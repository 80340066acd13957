#pragma once

// Little-endian binary container primitives shared by the checkpoint and
// GCCA codecs.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "cjme/numerics.hpp"

namespace cjme::bin {

class Writer {
 public:
  void magic(std::string_view four_cc);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  // rows u32, cols u32, then rows*cols f64 values.
  void tensor(const Matrix& m);
  void vector(const Vec& v);

  const std::vector<unsigned char>& bytes() const { return buf_; }
  void save(const std::string& path) const;

 private:
  std::vector<unsigned char> buf_;
};

class Reader {
 public:
  explicit Reader(std::vector<unsigned char> bytes) : buf_(std::move(bytes)) {}
  static Reader open(const std::string& path);

  void expect_magic(std::string_view four_cc);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  Matrix tensor();
  Vec vector();
  bool at_end() const { return pos_ == buf_.size(); }

 private:
  void need(std::size_t n);
  std::vector<unsigned char> buf_;
  std::size_t pos_ = 0;
};

std::vector<unsigned char> read_file(const std::string& path);

}  // namespace cjme::bin
