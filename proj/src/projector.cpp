#include "cjme/projector.hpp"

#include <cmath>
#include <sstream>

#include "cjme/error.hpp"

namespace cjme {

Mlp::Mlp(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ShapeError("Mlp needs at least one layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.weight.rows() == 0 || l.weight.cols() == 0 || l.bias.size() != l.weight.rows())
      throw ShapeError("Mlp layer " + std::to_string(i) + ": inconsistent weight/bias shapes");
    if (i > 0 && l.weight.cols() != layers_[i - 1].weight.rows())
      throw ShapeError("Mlp layer " + std::to_string(i) + ": input width does not match previous layer");
  }
}

Mlp Mlp::zeros(std::span<const std::size_t> widths) {
  if (widths.size() < 2) throw ShapeError("Mlp widths need input and output entries");
  std::vector<DenseLayer> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    if (widths[i] == 0 || widths[i + 1] == 0) throw ShapeError("Mlp widths must be positive");
    layers.push_back({Matrix(widths[i + 1], widths[i]), Vec(widths[i + 1], 0.0)});
  }
  return Mlp(std::move(layers));
}

Mlp Mlp::glorot(std::span<const std::size_t> widths, Rng& rng) {
  Mlp net = zeros(widths);
  for (auto& l : net.layers_) {
    const double limit = std::sqrt(6.0 / static_cast<double>(l.weight.rows() + l.weight.cols()));
    for (auto& w : l.weight.data()) w = rng.uniform(-limit, limit);
  }
  return net;
}

std::vector<std::size_t> Mlp::widths() const {
  std::vector<std::size_t> w{input_width()};
  for (const auto& l : layers_) w.push_back(l.weight.rows());
  return w;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

std::vector<std::span<double>> Mlp::tensors() {
  std::vector<std::span<double>> out;
  for (auto& l : layers_) {
    out.emplace_back(l.weight.data());
    out.emplace_back(l.bias);
  }
  return out;
}

std::vector<std::span<const double>> Mlp::tensors() const {
  std::vector<std::span<const double>> out;
  for (const auto& l : layers_) {
    out.emplace_back(l.weight.data());
    out.emplace_back(l.bias);
  }
  return out;
}

Mlp Mlp::zeros_like() const {
  auto w = widths();
  return zeros(w);
}

MlpOutput mlp_forward(const Mlp& net, std::span<const double> x) {
  if (x.size() != net.input_width()) {
    std::ostringstream os;
    os << "mlp_forward: input has length " << x.size() << ", network expects " << net.input_width();
    throw ShapeError(os.str());
  }
  MlpOutput out;
  const auto& layers = net.layers();
  Vec h(x.begin(), x.end());
  for (std::size_t i = 0; i < layers.size(); ++i) {
    Vec z = mat_vec_mul(layers[i].weight, h);
    for (std::size_t j = 0; j < z.size(); ++j) z[j] += layers[i].bias[j];
    out.cache.inputs.push_back(std::move(h));
    h = z;
    if (i + 1 < layers.size())
      for (auto& v : h) v = v > 0.0 ? v : 0.0;
    out.cache.preactivations.push_back(std::move(z));
  }
  out.output = std::move(h);
  return out;
}

Vec mlp_backward(const Mlp& net, const MlpCache& cache, std::span<const double> grad_out, Mlp& grads) {
  const auto& layers = net.layers();
  auto& glayers = grads.layers();
  if (cache.inputs.size() != layers.size() || cache.preactivations.size() != layers.size() ||
      glayers.size() != layers.size())
    throw ShapeError("mlp_backward: cache or gradient buffer does not match the network");
  if (grad_out.size() != net.output_width()) throw ShapeError("mlp_backward: grad_out has wrong length");

  Vec delta(grad_out.begin(), grad_out.end());
  for (std::size_t i = layers.size(); i-- > 0;) {
    const auto& l = layers[i];
    auto& g = glayers[i];
    const Vec& in = cache.inputs[i];
    if (i + 1 < layers.size()) {
      const Vec& z = cache.preactivations[i];
      // Zero subgradient at the kink.
      for (std::size_t j = 0; j < delta.size(); ++j)
        if (!(z[j] > 0.0)) delta[j] = 0.0;
    }
    for (std::size_t r = 0; r < l.weight.rows(); ++r) {
      const double d = delta[r];
      g.bias[r] += d;
      if (d == 0.0) continue;
      auto grow = g.weight.row(r);
      for (std::size_t c = 0; c < l.weight.cols(); ++c) grow[c] += d * in[c];
    }
    delta = mat_t_vec_mul(l.weight, delta);
  }
  return delta;
}

MlpGradients mlp_backward(const Mlp& net, const MlpCache& cache, std::span<const double> grad_out) {
  MlpGradients g{net.zeros_like(), {}};
  g.input = mlp_backward(net, cache, grad_out, g.params);
  return g;
}

EmbedPass embed_forward(const Mlp& net, std::span<const double> x, bool normalize) {
  auto fwd = mlp_forward(net, x);
  EmbedPass pass;
  pass.cache = std::move(fwd.cache);
  pass.raw = std::move(fwd.output);
  pass.embedding = pass.raw;
  if (normalize) {
    const double n = norm2(pass.raw);
    if (n > 0.0)
      for (auto& v : pass.embedding) v /= n;
  }
  return pass;
}

Vec embed_backward(const Mlp& net, const EmbedPass& pass, std::span<const double> grad_embedding,
                   bool normalize, Mlp& grads) {
  if (!normalize) return mlp_backward(net, pass.cache, grad_embedding, grads);
  const double n = norm2(pass.raw);
  Vec g(grad_embedding.begin(), grad_embedding.end());
  if (n > 0.0) {
    // d(x/|x|) = (I - y y^T) / |x|
    const double proj = dot(pass.embedding, grad_embedding);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = (g[i] - pass.embedding[i] * proj) / n;
  }
  return mlp_backward(net, pass.cache, g, grads);
}

ProjectionModel ProjectionModel::init(const Dims& dims, std::size_t embed_dim, std::size_t hidden, Rng& rng) {
  if (embed_dim == 0 || hidden == 0) throw ConfigError("embedding and hidden widths must be positive");
  ProjectionModel m;
  const std::size_t aw[] = {dims.audio, hidden, embed_dim};
  const std::size_t vw[] = {dims.video, hidden, embed_dim};
  const std::size_t tw[] = {dims.text, embed_dim};
  m.audio = Mlp::glorot(aw, rng);
  m.video = Mlp::glorot(vw, rng);
  m.text = Mlp::glorot(tw, rng);
  return m;
}

ProjectionModel ProjectionModel::zeros_like() const {
  return {audio.zeros_like(), video.zeros_like(), text.zeros_like(), normalize};
}

void ProjectionModel::check_shapes() const {
  if (audio.layers().empty() || video.layers().empty() || text.layers().empty())
    throw ShapeError("projection model has an empty network");
  if (audio.output_width() != text.output_width() || video.output_width() != text.output_width()) {
    std::ostringstream os;
    os << "projection output widths disagree: audio " << audio.output_width() << ", video "
       << video.output_width() << ", text " << text.output_width();
    throw ShapeError(os.str());
  }
}

AttentionModel AttentionModel::init(std::size_t audio_width, std::size_t video_width, std::size_t hidden,
                                    AttentionInput input, Rng& rng) {
  const std::size_t w[] = {audio_width + video_width, hidden, 1};
  return {Mlp::glorot(w, rng), input};
}

AttentionModel AttentionModel::zeros_like() const { return {net.zeros_like(), input}; }

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

AttentionPass attention_forward(const AttentionModel& attn, std::span<const double> a, std::span<const double> v) {
  if (a.size() + v.size() != attn.net.input_width() || attn.net.output_width() != 1)
    throw ShapeError("attention_forward: concatenated input width does not match the attention network");
  Vec x(a.begin(), a.end());
  x.insert(x.end(), v.begin(), v.end());
  auto fwd = mlp_forward(attn.net, x);
  AttentionPass pass;
  pass.logit = fwd.output[0];
  pass.alpha = logistic(pass.logit);
  pass.cache = std::move(fwd.cache);
  pass.audio_width = a.size();
  return pass;
}

std::pair<Vec, Vec> attention_backward(const AttentionModel& attn, const AttentionPass& pass, double grad_logit,
                                       AttentionModel& grads) {
  const double g[] = {grad_logit};
  Vec gx = mlp_backward(attn.net, pass.cache, g, grads.net);
  const auto cut = gx.begin() + static_cast<std::ptrdiff_t>(pass.audio_width);
  return {Vec(gx.begin(), cut), Vec(cut, gx.end())};
}

void Adam::step(std::span<const NamedTensor> params, std::span<const std::span<const double>> grads) {
  if (params.size() != grads.size()) throw ShapeError("adam: parameter and gradient lists differ in length");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].values.size() != grads[i].size())
      throw ShapeError("adam: gradient for '" + params[i].name + "' has wrong size");
    for (double g : grads[i])
      if (!std::isfinite(g)) throw NumericError("adam: non-finite gradient in tensor '" + params[i].name + "'");
  }
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.emplace_back(p.values.size(), 0.0);
      v_.emplace_back(p.values.size(), 0.0);
    }
  } else if (m_.size() != params.size()) {
    throw ShapeError("adam: parameter list changed between steps");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].values;
    auto g = grads[i];
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = hyper_.beta1 * m[j] + (1.0 - hyper_.beta1) * g[j];
      v[j] = hyper_.beta2 * v[j] + (1.0 - hyper_.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= hyper_.lr * mhat / (std::sqrt(vhat) + hyper_.eps);
    }
  }
}

namespace {

void append_named(std::vector<NamedTensor>& out, const std::string& prefix, Mlp& net) {
  auto ts = net.tensors();
  for (std::size_t i = 0; i < ts.size(); ++i)
    out.push_back({prefix + ".layer" + std::to_string(i / 2) + (i % 2 ? ".bias" : ".weight"), ts[i]});
}

void append_views(std::vector<std::span<const double>>& out, const Mlp& net) {
  for (auto t : net.tensors()) out.push_back(t);
}

}  // namespace

std::vector<NamedTensor> named_parameters(ProjectionModel& model) {
  std::vector<NamedTensor> out;
  append_named(out, "g_audio", model.audio);
  append_named(out, "g_video", model.video);
  append_named(out, "g_text", model.text);
  return out;
}

std::vector<NamedTensor> named_parameters(AttentionModel& model) {
  std::vector<NamedTensor> out;
  append_named(out, "f_attn", model.net);
  return out;
}

std::vector<std::span<const double>> gradient_views(const ProjectionModel& grads) {
  std::vector<std::span<const double>> out;
  append_views(out, grads.audio);
  append_views(out, grads.video);
  append_views(out, grads.text);
  return out;
}

std::vector<std::span<const double>> gradient_views(const AttentionModel& grads) {
  std::vector<std::span<const double>> out;
  append_views(out, grads.net);
  return out;
}

}  // namespace cjme
