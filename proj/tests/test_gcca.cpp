#include <cmath>

#include "cjme/error.hpp"
#include "cjme/gcca.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace cjme;

namespace {

Matrix random_matrix(Rng& rng, std::size_t rows, std::size_t cols) {
  return Matrix(rows, cols, prng_fill(rng, rows * cols, Distribution::StandardNormal));
}

Matrix times(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k)
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += a(i, k) * b(k, j);
  return out;
}

// Random orthogonal matrix via Gram-Schmidt.
Matrix rotation(Rng& rng, std::size_t d) {
  Matrix q = random_matrix(rng, d, d);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t p = 0; p < j; ++p) {
      double proj = 0.0;
      for (std::size_t i = 0; i < d; ++i) proj += q(i, j) * q(i, p);
      for (std::size_t i = 0; i < d; ++i) q(i, j) -= proj * q(i, p);
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < d; ++i) norm += q(i, j) * q(i, j);
    for (std::size_t i = 0; i < d; ++i) q(i, j) /= std::sqrt(norm);
  }
  return q;
}

std::vector<Matrix> shared_latent_views(std::uint64_t seed, double noise) {
  Rng rng(seed);
  const auto z = random_matrix(rng, 400, 3);
  std::vector<Matrix> views;
  for (std::size_t dim : {5u, 6u, 4u}) {
    auto v = times(z, random_matrix(rng, 3, dim));
    for (auto& x : v.data()) x += noise * rng.normal();
    views.push_back(v);
  }
  return views;
}

}  // namespace

TEST_CASE("identical views are perfectly correlated") {
  Rng rng(1);
  const auto x = random_matrix(rng, 300, 6);
  const auto m = fit_gcca({x, x}, 4, 1e-8);
  REQUIRE(m.components() == 4);
  for (double c : m.correlations) CHECK(c >= 1.0 - 1e-6);
}

TEST_CASE("correlations are descending and within [0, 1]") {
  const auto m = fit_gcca(shared_latent_views(2, 0.5), 4, 1e-3);
  for (std::size_t j = 0; j < m.components(); ++j) {
    CHECK(m.correlations[j] >= 0.0);
    CHECK(m.correlations[j] <= 1.0);
    if (j > 0) CHECK(m.correlations[j] <= m.correlations[j - 1]);
  }
  CHECK(m.correlations[0] > 0.9);
}

TEST_CASE("correlations are invariant to rotating a view") {
  auto views = shared_latent_views(3, 0.3);
  const auto base = fit_gcca(views, 3, 1e-8);
  Rng rng(4);
  views[1] = times(views[1], rotation(rng, views[1].cols()));
  const auto rotated = fit_gcca(views, 3, 1e-8);
  for (std::size_t j = 0; j < 3; ++j) CHECK(std::abs(base.correlations[j] - rotated.correlations[j]) < 1e-6);
}

TEST_CASE("stronger regularization never raises the top correlation") {
  const auto views = shared_latent_views(5, 1.0);
  double previous = 2.0;
  for (double r : {1e-8, 1e-4, 1e-1}) {
    const double top = fit_gcca(views, 2, r).correlations[0];
    CHECK(top <= previous + 1e-9);
    previous = top;
  }
}

TEST_CASE("transform is affine and centres the view mean") {
  const auto views = shared_latent_views(6, 0.2);
  const auto m = fit_gcca(views, 3);
  const auto& x = views[0];
  Vec mean(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) mean[j] += x(i, j) / static_cast<double>(x.rows());
  for (double t : transform_gcca(m, 0, mean)) CHECK(std::abs(t) < 1e-9);

  const Vec a = test::row_vec(x, 0), b = test::row_vec(x, 1);
  Vec mix(a.size());
  for (std::size_t j = 0; j < a.size(); ++j) mix[j] = 0.3 * a[j] + 0.7 * b[j];
  const auto ta = transform_gcca(m, 0, a), tb = transform_gcca(m, 0, b), tm = transform_gcca(m, 0, mix);
  for (std::size_t j = 0; j < tm.size(); ++j) CHECK(tm[j] == doctest::Approx(0.3 * ta[j] + 0.7 * tb[j]));

  CHECK_THROWS_AS(transform_gcca(m, 0, Vec(2, 0.0)), ShapeError);
  CHECK_THROWS(transform_gcca(m, 7, a));
}

TEST_CASE("cross-view nearest neighbour on identical views") {
  Rng rng(7);
  const auto x = random_matrix(rng, 60, 5);
  const auto m = fit_gcca({x, x}, 5, 1e-8);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto q = transform_gcca(m, 0, x.row(i));
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t j = 0; j < x.rows(); ++j) {
      const double d = squared_distance(q, transform_gcca(m, 1, x.row(j)));
      if (d < best_d) best_d = d, best = j;
    }
    CHECK(best == i);
  }
}

TEST_CASE("gcca model round-trips through disk") {
  const auto m = fit_gcca(shared_latent_views(8, 0.2), 3);
  const auto path = test::scratch_dir("gcca") / "model.bin";
  save_gcca(m, path.string());
  CHECK(load_gcca(path.string()) == m);
}

TEST_CASE("gcca rejects bad inputs") {
  Rng rng(9);
  CHECK_THROWS(fit_gcca({random_matrix(rng, 10, 3)}, 1));
  CHECK_THROWS(fit_gcca({random_matrix(rng, 10, 3), random_matrix(rng, 11, 3)}, 1));
  CHECK_THROWS(fit_gcca({random_matrix(rng, 10, 3), random_matrix(rng, 10, 3)}, 0));
}
