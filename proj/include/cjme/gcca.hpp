#pragma once

// Generalized CCA baseline (MAXVAR form). A shared representation G (N x k)
// is taken from the top eigenvectors of sum_i X_i (X_i^T X_i + r_i I)^-1 X_i^T;
// each view then gets the regularized least-squares map onto G.

#include <string>
#include <vector>

#include "cjme/evalkit.hpp"
#include "cjme/numerics.hpp"

namespace cjme {

struct GccaModel {
  std::vector<Vec> means;           // per view
  std::vector<Matrix> projections;  // per view, d_i x k
  Vec correlations;                 // descending, in [0, 1]
  double regularizer = 1e-3;

  std::size_t components() const { return correlations.size(); }
  friend bool operator==(const GccaModel&, const GccaModel&) = default;
};

// `regularizer` is relative: view i uses r * mean(diag(X_i^T X_i)). The
// reported correlation of component j is the mean pairwise Pearson
// correlation of the projected training views; components are ordered by it.
GccaModel fit_gcca(const std::vector<Matrix>& views, std::size_t k, double regularizer = 1e-3);

Vec transform_gcca(const GccaModel& model, std::size_t view, std::span<const double> x);

void save_gcca(const GccaModel& model, const std::string& path);
GccaModel load_gcca(const std::string& path);

// Views for fitting on a split: audio, video, and each example's class text.
std::vector<Matrix> gcca_views(const DatasetBundle& data, Split split);
// Embeds a split with a fitted model (views 0, 1, 2 = audio, video, text).
EmbeddedSplit gcca_embed_split(const GccaModel& model, const DatasetBundle& data, Split split);
// Raw features used directly; needs equal audio and video widths (and the
// same text width for text queries).
EmbeddedSplit pretrained_split(const DatasetBundle& data, Split split);

}  // namespace cjme
