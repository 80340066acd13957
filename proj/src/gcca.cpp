#include "cjme/gcca.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "cjme/binary_io.hpp"
#include "cjme/error.hpp"

namespace cjme {

namespace {

struct Centered {
  Matrix x;
  Vec mean;
};

Centered center(const Matrix& view) {
  Centered c{view, Vec(view.cols(), 0.0)};
  for (std::size_t r = 0; r < view.rows(); ++r)
    for (std::size_t j = 0; j < view.cols(); ++j) c.mean[j] += view(r, j);
  for (auto& m : c.mean) m /= static_cast<double>(view.rows());
  for (std::size_t r = 0; r < view.rows(); ++r)
    for (std::size_t j = 0; j < view.cols(); ++j) c.x(r, j) -= c.mean[j];
  return c;
}

double column_correlation(const Matrix& x, const Matrix& y, std::size_t j) {
  double xy = 0.0, xx = 0.0, yy = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    xy += x(r, j) * y(r, j);
    xx += x(r, j) * x(r, j);
    yy += y(r, j) * y(r, j);
  }
  if (xx <= 0.0 || yy <= 0.0) return 0.0;
  return xy / std::sqrt(xx * yy);
}

}  // namespace

GccaModel fit_gcca(const std::vector<Matrix>& views, std::size_t k, double regularizer) {
  if (views.size() < 2) throw ConfigError("fit_gcca: need at least two views");
  if (!(regularizer > 0.0)) throw ConfigError("fit_gcca: regularizer must be > 0");
  const std::size_t n = views.front().rows();
  if (k == 0) throw ConfigError("fit_gcca: k must be >= 1");
  for (const auto& v : views) {
    if (v.rows() != n) throw ShapeError("fit_gcca: views have different row counts");
    if (v.cols() < k) throw ConfigError("fit_gcca: k exceeds a view's dimension");
  }
  if (n <= k) throw ConfigError("fit_gcca: need more rows than components");

  const std::size_t m = views.size();
  GccaModel model;
  model.regularizer = regularizer;
  std::vector<Matrix> centered, cov;
  std::size_t total = 0;
  for (const auto& v : views) total += v.cols();
  Matrix z(n, total);

  std::size_t offset = 0;
  for (std::size_t i = 0; i < m; ++i) {
    auto c = center(views[i]);
    Matrix cxx = matmul_tn(c.x, c.x);
    const std::size_t d = cxx.rows();
    double diag = 0.0;
    for (std::size_t j = 0; j < d; ++j) diag += cxx(j, j);
    diag /= static_cast<double>(d);
    if (!(diag > 0.0)) throw NumericError("fit_gcca: view " + std::to_string(i) + " is constant after centering");
    const double r = regularizer * diag;
    for (std::size_t j = 0; j < d; ++j) cxx(j, j) += r;

    auto eig = sym_eig(cxx, 1e-8);
    const double lo = eig.values.back(), hi = eig.values.front();
    if (!(lo > 0.0)) {
      std::ostringstream os;
      os << "fit_gcca: view " << i << " covariance is not positive definite (eigenvalues " << lo << " .. " << hi
         << "); increase the regularizer";
      throw NumericError(os.str());
    }
    if (hi / lo > 1e14) {
      std::ostringstream os;
      os << "fit_gcca: view " << i << " covariance condition number " << hi / lo << " too large; increase the regularizer";
      throw NumericError(os.str());
    }
    // C^{-1/2} = V diag(lambda^{-1/2}) V^T
    Matrix inv_sqrt(d, d);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) {
        double s = 0.0;
        for (std::size_t j = 0; j < d; ++j) s += eig.vectors(a, j) * eig.vectors(b, j) / std::sqrt(eig.values[j]);
        inv_sqrt(a, b) = s;
      }
    Matrix zi = matmul(c.x, inv_sqrt);
    for (std::size_t row = 0; row < n; ++row)
      for (std::size_t j = 0; j < d; ++j) z(row, offset + j) = zi(row, j);
    offset += d;
    model.means.push_back(std::move(c.mean));
    centered.push_back(std::move(c.x));
    cov.push_back(std::move(cxx));
  }

  // Nonzero spectrum of Z Z^T equals that of Z^T Z.
  Matrix gram = matmul_tn(z, z);
  auto eig = sym_eig(gram, 1e-8);
  Matrix g(n, k);
  for (std::size_t j = 0; j < k; ++j) {
    const double lambda = eig.values[j];
    if (!(lambda > 0.0)) throw NumericError("fit_gcca: shared representation is rank deficient");
    Vec u(total);
    for (std::size_t a = 0; a < total; ++a) u[a] = eig.vectors(a, j);
    Vec col = mat_vec_mul(z, u);
    const double s = 1.0 / std::sqrt(lambda);
    for (std::size_t row = 0; row < n; ++row) g(row, j) = col[row] * s;
  }
  for (std::size_t i = 0; i < m; ++i) model.projections.push_back(spd_solve(cov[i], matmul_tn(centered[i], g)));

  std::vector<Matrix> projected;
  for (std::size_t i = 0; i < m; ++i) projected.push_back(matmul(centered[i], model.projections[i]));
  Vec corr(k);
  for (std::size_t j = 0; j < k; ++j) {
    double sum = 0.0;
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) sum += column_correlation(projected[a], projected[b], j);
    corr[j] = std::clamp(sum / static_cast<double>(m * (m - 1) / 2), 0.0, 1.0);
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return corr[x] > corr[y]; });
  for (auto& w : model.projections) {
    Matrix sorted(w.rows(), k);
    for (std::size_t r = 0; r < w.rows(); ++r)
      for (std::size_t j = 0; j < k; ++j) sorted(r, j) = w(r, order[j]);
    w = std::move(sorted);
  }
  for (std::size_t j : order) model.correlations.push_back(corr[j]);
  return model;
}

Vec transform_gcca(const GccaModel& model, std::size_t view, std::span<const double> x) {
  if (view >= model.projections.size()) throw ConfigError("transform_gcca: bad view index " + std::to_string(view));
  const auto& w = model.projections[view];
  if (x.size() != w.rows()) throw ShapeError("transform_gcca: input dimension does not match the view");
  Vec c(x.begin(), x.end());
  for (std::size_t j = 0; j < c.size(); ++j) c[j] -= model.means[view][j];
  return mat_t_vec_mul(w, c);
}

void save_gcca(const GccaModel& model, const std::string& path) {
  bin::Writer w;
  w.magic("GCCA");
  w.u32(1);
  w.u32(static_cast<std::uint32_t>(model.components()));
  w.u32(static_cast<std::uint32_t>(model.projections.size()));
  for (std::size_t i = 0; i < model.projections.size(); ++i) {
    w.vector(model.means[i]);
    w.tensor(model.projections[i]);
  }
  w.vector(model.correlations);
  w.f64(model.regularizer);
  w.save(path);
}

GccaModel load_gcca(const std::string& path) {
  auto r = bin::Reader::open(path);
  r.expect_magic("GCCA");
  const auto version = r.u32();
  if (version != 1) throw FormatError("unsupported GCCA model version " + std::to_string(version));
  const std::size_t k = r.u32(), views = r.u32();
  GccaModel m;
  for (std::size_t i = 0; i < views; ++i) {
    m.means.push_back(r.vector());
    m.projections.push_back(r.tensor());
    if (m.projections.back().rows() != m.means.back().size() || m.projections.back().cols() != k)
      throw ShapeError("GCCA view " + std::to_string(i) + " projection shape is inconsistent");
  }
  m.correlations = r.vector();
  if (m.correlations.size() != k) throw ShapeError("GCCA correlation count does not match k");
  m.regularizer = r.f64();
  if (!r.at_end()) throw FormatError("trailing bytes after GCCA payload");
  return m;
}

std::vector<Matrix> gcca_views(const DatasetBundle& data, Split split) {
  const auto idx = data.indices_in(split);
  const auto labels = data.labels();
  Matrix a(idx.size(), data.dims.audio), v(idx.size(), data.dims.video), t(idx.size(), data.dims.text);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    std::copy(data.audio.row(idx[i]).begin(), data.audio.row(idx[i]).end(), a.row(i).begin());
    std::copy(data.video.row(idx[i]).begin(), data.video.row(idx[i]).end(), v.row(i).begin());
    const auto& te = data.classes[labels[idx[i]]].text_embedding;
    std::copy(te.begin(), te.end(), t.row(i).begin());
  }
  return {std::move(a), std::move(v), std::move(t)};
}

EmbeddedSplit gcca_embed_split(const GccaModel& model, const DatasetBundle& data, Split split) {
  if (model.projections.size() != 3) throw ConfigError("GCCA model must have audio, video and text views");
  EmbeddedSplit out;
  const auto labels = data.labels();
  out.rows = data.indices_in(split);
  const std::size_t k = model.components();
  out.audio = Matrix(out.rows.size(), k);
  out.video = Matrix(out.rows.size(), k);
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    out.labels.push_back(labels[out.rows[i]]);
    auto a = transform_gcca(model, 0, data.audio.row(out.rows[i]));
    auto v = transform_gcca(model, 1, data.video.row(out.rows[i]));
    std::copy(a.begin(), a.end(), out.audio.row(i).begin());
    std::copy(v.begin(), v.end(), out.video.row(i).begin());
  }
  out.classes = Matrix(data.classes.size(), k);
  for (std::size_t c = 0; c < data.classes.size(); ++c) {
    auto t = transform_gcca(model, 2, data.classes[c].text_embedding);
    std::copy(t.begin(), t.end(), out.classes.row(c).begin());
  }
  out.seen = data.seen_flags();
  return out;
}

EmbeddedSplit pretrained_split(const DatasetBundle& data, Split split) {
  if (data.dims.audio != data.dims.video)
    throw ShapeError("pre-trained baseline needs equal audio and video feature widths");
  EmbeddedSplit out;
  const auto labels = data.labels();
  out.rows = data.indices_in(split);
  out.audio = Matrix(out.rows.size(), data.dims.audio);
  out.video = Matrix(out.rows.size(), data.dims.video);
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    out.labels.push_back(labels[out.rows[i]]);
    std::copy(data.audio.row(out.rows[i]).begin(), data.audio.row(out.rows[i]).end(), out.audio.row(i).begin());
    std::copy(data.video.row(out.rows[i]).begin(), data.video.row(out.rows[i]).end(), out.video.row(i).begin());
  }
  // Text rows only usable when widths agree; otherwise text directions reject the query size.
  out.classes = data.text_matrix();
  out.seen = data.seen_flags();
  return out;
}

}  // namespace cjme
