#include "cjme/binary_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "cjme/error.hpp"

namespace cjme::bin {

namespace {

template <typename T>
void put_le(std::vector<unsigned char>& buf, T value) {
  unsigned char raw[sizeof(T)];
  std::memcpy(raw, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(raw[sizeof(T) - 1 - i]);
  } else {
    buf.insert(buf.end(), raw, raw + sizeof(T));
  }
}

template <typename T>
T get_le(const unsigned char* p) {
  unsigned char raw[sizeof(T)];
  if constexpr (std::endian::native == std::endian::big) {
    for (std::size_t i = 0; i < sizeof(T); ++i) raw[i] = p[sizeof(T) - 1 - i];
  } else {
    std::memcpy(raw, p, sizeof(T));
  }
  T value;
  std::memcpy(&value, raw, sizeof(T));
  return value;
}

}  // namespace

void Writer::magic(std::string_view four_cc) { buf_.insert(buf_.end(), four_cc.begin(), four_cc.end()); }
void Writer::u32(std::uint32_t v) { put_le(buf_, v); }
void Writer::u64(std::uint64_t v) { put_le(buf_, v); }
void Writer::f64(double v) { put_le(buf_, std::bit_cast<std::uint64_t>(v)); }

void Writer::tensor(const Matrix& m) {
  u32(static_cast<std::uint32_t>(m.rows()));
  u32(static_cast<std::uint32_t>(m.cols()));
  for (double v : m.data()) f64(v);
}

void Writer::vector(const Vec& v) {
  u32(static_cast<std::uint32_t>(v.size()));
  u32(1);
  for (double x : v) f64(x);
}

void Writer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(buf_.data()), static_cast<std::streamsize>(buf_.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Reader Reader::open(const std::string& path) { return Reader(read_file(path)); }

void Reader::need(std::size_t n) {
  if (buf_.size() - pos_ < n) throw FormatError("truncated file");
}

void Reader::expect_magic(std::string_view four_cc) {
  need(four_cc.size());
  if (std::memcmp(buf_.data() + pos_, four_cc.data(), four_cc.size()) != 0)
    throw FormatError("bad magic bytes, expected '" + std::string(four_cc) + "'");
  pos_ += four_cc.size();
}

std::uint32_t Reader::u32() {
  need(4);
  auto v = get_le<std::uint32_t>(buf_.data() + pos_);
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  need(8);
  auto v = get_le<std::uint64_t>(buf_.data() + pos_);
  pos_ += 8;
  return v;
}

double Reader::f64() { return std::bit_cast<double>(u64()); }

Matrix Reader::tensor() {
  const std::size_t rows = u32();
  const std::size_t cols = u32();
  need(rows * cols * 8);
  std::vector<double> data(rows * cols);
  for (auto& v : data) v = f64();
  return Matrix(rows, cols, std::move(data));
}

Vec Reader::vector() {
  Matrix m = tensor();
  if (m.cols() != 1) throw FormatError("expected a column vector tensor");
  return m.data();
}

}  // namespace cjme::bin
