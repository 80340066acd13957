#pragma once

// Small dense linear algebra and a reproducible random source.
//
// All arithmetic is double precision with a fixed (row-major, left to right)
// summation order, so every result is bitwise reproducible across runs.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace cjme {

using Vec = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix diagonal(std::span<const double> diag);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::vector<double>& data() { return data_; }
  const std::vector<double>& data() const { return data_; }

  Matrix transposed() const;
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// y = m x
Vec mat_vec_mul(const Matrix& m, std::span<const double> x);
// y = m^T x
Vec mat_t_vec_mul(const Matrix& m, std::span<const double> x);
Matrix matmul(const Matrix& a, const Matrix& b);
// a^T b without materializing the transpose.
Matrix matmul_tn(const Matrix& a, const Matrix& b);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> a);
double squared_distance(std::span<const double> a, std::span<const double> b);
double frobenius_norm(const Matrix& m);

struct EigenDecomposition {
  Vec values;      // descending
  Matrix vectors;  // column j pairs with values[j]
};

// Cyclic Jacobi eigensolver for symmetric matrices. Throws ShapeError when m is
// not square or not symmetric within tol, NumericError after max_sweeps.
EigenDecomposition sym_eig(const Matrix& m, double tol = 1e-10, int max_sweeps = 100);

// Cholesky solve of (spd) x = b for every column of b.
Matrix spd_solve(const Matrix& spd, const Matrix& b);

// Deterministic generator: splitmix64 seeding into xoshiro256**.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  // Box-Muller; the second variate is cached.
  double normal();
  // Uniform integer in [0, n) by rejection, n >= 1.
  std::size_t below(std::size_t n);
  // Independent stream for a child task.
  Rng child(std::uint64_t stream);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

enum class Distribution { Uniform01, StandardNormal };

Vec prng_fill(Rng& rng, std::size_t n, Distribution dist);

}  // namespace cjme
