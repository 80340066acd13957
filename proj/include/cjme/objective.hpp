#pragma once

// Triplet, audio-video alignment and attention losses, the entropy-based
// attention labels, and their composition into the training objective.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "cjme/numerics.hpp"
#include "cjme/projector.hpp"

namespace cjme {

enum class Distance { Euclidean, SquaredEuclidean };

// Literal: alpha weights video (alpha_v = alpha), as the objective is written.
// Inverted: alpha weights audio, which agrees with the entropy label polarity.
enum class AlphaPolarity { Literal, Inverted };

struct ObjectiveConfig {
  double margin = 1.0;
  double lambda = 1.0;  // audio-video alignment weight
  double gamma = 1.0;   // triplet block weight
  double alpha_video = 1.0;
  double alpha_audio = 1.0;
  // Entropy threshold; nullopt means 0.05 * ln(number of seen classes).
  std::optional<double> xi;
  Distance distance = Distance::Euclidean;
  double eps_dist = 1e-8;
  AlphaPolarity polarity = AlphaPolarity::Literal;

  void validate() const;
  double resolved_xi(std::size_t num_classes) const;

  friend bool operator==(const ObjectiveConfig&, const ObjectiveConfig&) = default;
};

double distance(std::span<const double> x, std::span<const double> y, Distance kind);
// Adds scale * d d(x, y)/dx into gx and the negative into gy. Zero at x == y
// for the Euclidean case.
void distance_grad(std::span<const double> x, std::span<const double> y, Distance kind, double scale,
                   std::span<double> gx, std::span<double> gy);

struct TripletResult {
  double loss = 0.0;
  double argument = 0.0;  // d_pos - d_neg + margin
  Vec grad_anchor;
  Vec grad_class;
  Vec grad_negative;
};

// [d(x_p, t_p) - d(x_q, t_p) + margin]_+ ; gradient zero at the kink.
TripletResult triplet_hinge(std::span<const double> anchor, std::span<const double> class_embedding,
                            std::span<const double> negative, double margin, Distance kind);

struct AlignmentResult {
  double loss = 0.0;
  Vec grad_audio;
  Vec grad_video;
};

// ||a - v||^2
AlignmentResult av_alignment_loss(std::span<const double> a, std::span<const double> v);

// Inverse distances (floored at eps) normalised to sum one.
Vec probs_from_distances(std::span<const double> dists, double eps_dist);
// -sum p ln p with 0 ln 0 = 0; throws ConfigError for an invalid distribution.
double entropy(std::span<const double> p);
// 0 when video is clearly more certain, 1 when audio is, else 0.5.
double alpha_label(double entropy_audio, double entropy_video, double xi);

struct BceResult {
  double loss = 0.0;
  double grad_logit = 0.0;
};

// Soft-target binary cross-entropy on alpha; alpha is clamped to
// [1e-7, 1 - 1e-7] for the loss value. grad_logit = alpha - target.
BceResult attention_bce(double alpha, double target);

// Anchor example p with a negative example q from a different seen class.
struct TripletSample {
  std::size_t anchor = 0;
  std::size_t negative = 0;
};

// Read-only training data the objective draws from.
struct ObjectiveData {
  const Matrix& audio;  // rows = examples
  const Matrix& video;
  const Matrix& text;   // rows = classes
  std::span<const std::size_t> labels;
  const std::vector<bool>& seen;  // per class
};

enum class ObjectiveMode { NoAttention, WithAttention };

struct ObjectiveTerms {
  double triplet_audio = 0.0;  // sum of L_TA
  double triplet_video = 0.0;  // sum of L_TV
  double alignment = 0.0;      // sum of L_AV
  double attention_ce = 0.0;   // sum of attention cross-entropy
  double total = 0.0;
};

struct ObjectiveResult {
  ObjectiveTerms terms;
  ProjectionModel grad_projection;
  std::optional<AttentionModel> grad_attention;
  Vec alpha_labels;     // per sample, with-attention mode only
  Vec alpha_predicted;  // per sample, with-attention mode only
  double min_hinge_margin = 0.0;  // smallest |hinge argument| seen, for kink checks
};

// L = lambda * sum L_AV + gamma * sum (alpha_v L_TV + alpha_a L_TA), plus the
// attention cross-entropy in with-attention mode. Entropy labels are computed
// from the current embeddings over the seen classes and treated as constants;
// pass `frozen_labels` to reuse a previous labelling.
ObjectiveResult total_objective(const ObjectiveData& data, std::span<const TripletSample> batch,
                                const ProjectionModel& model, const AttentionModel* attention,
                                const ObjectiveConfig& cfg, ObjectiveMode mode,
                                std::span<const double> frozen_labels = {});

}  // namespace cjme
