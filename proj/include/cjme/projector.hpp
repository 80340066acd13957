#pragma once

// Projection networks g_a, g_v, g_t and the modality-attention network:
// forward/backward passes and the Adam optimizer.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cjme/dataio.hpp"
#include "cjme/numerics.hpp"

namespace cjme {

struct DenseLayer {
  Matrix weight;  // out x in
  Vec bias;       // out
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// ReLU on hidden layers, linear output layer.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(std::vector<DenseLayer> layers);

  // widths = {input, hidden..., output}; at least two entries.
  static Mlp zeros(std::span<const std::size_t> widths);
  // Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases.
  static Mlp glorot(std::span<const std::size_t> widths, Rng& rng);

  std::size_t input_width() const { return layers_.front().weight.cols(); }
  std::size_t output_width() const { return layers_.back().weight.rows(); }
  std::vector<std::size_t> widths() const;
  std::size_t parameter_count() const;

  std::vector<DenseLayer>& layers() { return layers_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }

  // Weight then bias per layer, in layer order.
  std::vector<std::span<double>> tensors();
  std::vector<std::span<const double>> tensors() const;

  Mlp zeros_like() const;

  friend bool operator==(const Mlp&, const Mlp&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

struct MlpCache {
  std::vector<Vec> inputs;          // input seen by each layer
  std::vector<Vec> preactivations;  // affine output of each layer
};

struct MlpOutput {
  Vec output;
  MlpCache cache;
};

MlpOutput mlp_forward(const Mlp& net, std::span<const double> x);

// Adds d(output . grad_out)/d(params) into `grads` (shaped like `net`) and
// returns the gradient with respect to the input.
Vec mlp_backward(const Mlp& net, const MlpCache& cache, std::span<const double> grad_out, Mlp& grads);

struct MlpGradients {
  Mlp params;
  Vec input;
};
MlpGradients mlp_backward(const Mlp& net, const MlpCache& cache, std::span<const double> grad_out);

// Optional l2 normalisation on top of an MLP projection.
struct EmbedPass {
  Vec embedding;
  Vec raw;  // MLP output before normalisation
  MlpCache cache;
};
EmbedPass embed_forward(const Mlp& net, std::span<const double> x, bool normalize);
Vec embed_backward(const Mlp& net, const EmbedPass& pass, std::span<const double> grad_embedding,
                   bool normalize, Mlp& grads);

struct ProjectionModel {
  Mlp audio;
  Mlp video;
  Mlp text;
  bool normalize = false;

  static ProjectionModel init(const Dims& dims, std::size_t embed_dim, std::size_t hidden, Rng& rng);
  std::size_t embed_dim() const { return text.output_width(); }
  ProjectionModel zeros_like() const;
  // Throws ShapeError when the three output widths disagree.
  void check_shapes() const;

  friend bool operator==(const ProjectionModel&, const ProjectionModel&) = default;
};

enum class AttentionInput { Raw, Projected };

// Concatenated (audio, video) -> hidden ReLU -> single logit.
struct AttentionModel {
  Mlp net;
  AttentionInput input = AttentionInput::Raw;

  static AttentionModel init(std::size_t audio_width, std::size_t video_width, std::size_t hidden,
                             AttentionInput input, Rng& rng);
  AttentionModel zeros_like() const;

  friend bool operator==(const AttentionModel&, const AttentionModel&) = default;
};

double logistic(double x);

struct AttentionPass {
  double alpha = 0.5;
  double logit = 0.0;
  std::size_t audio_width = 0;
  MlpCache cache;
};

// alpha = logistic(f_attn([a; v])).
AttentionPass attention_forward(const AttentionModel& attn, std::span<const double> a,
                                std::span<const double> v);
// Backprop a gradient w.r.t. the logit; returns gradients for (a, v).
std::pair<Vec, Vec> attention_backward(const AttentionModel& attn, const AttentionPass& pass,
                                       double grad_logit, AttentionModel& grads);

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct NamedTensor {
  std::string name;
  std::span<double> values;
};

class Adam {
 public:
  explicit Adam(AdamHyper hyper = {}) : hyper_(hyper) {}

  // One bias-corrected step; t counts from 1. Throws NumericError naming the
  // first tensor with a non-finite gradient (parameters untouched then).
  void step(std::span<const NamedTensor> params, std::span<const std::span<const double>> grads);
  long steps() const { return t_; }

 private:
  AdamHyper hyper_;
  std::vector<Vec> m_, v_;
  long t_ = 0;
};

std::vector<NamedTensor> named_parameters(ProjectionModel& model);
std::vector<NamedTensor> named_parameters(AttentionModel& model);
std::vector<std::span<const double>> gradient_views(const ProjectionModel& grads);
std::vector<std::span<const double>> gradient_views(const AttentionModel& grads);

}  // namespace cjme
