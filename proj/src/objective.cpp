#include "cjme/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "cjme/error.hpp"

namespace cjme {

void ObjectiveConfig::validate() const {
  if (!(margin > 0.0) || !std::isfinite(margin)) throw ConfigError("margin must be > 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be >= 0");
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw ConfigError("gamma must be >= 0");
  if (!std::isfinite(alpha_video) || !std::isfinite(alpha_audio)) throw ConfigError("static alpha weights must be finite");
  if (xi && (!(*xi >= 0.0) || !std::isfinite(*xi))) throw ConfigError("xi must be >= 0");
  if (!(eps_dist > 0.0)) throw ConfigError("eps_dist must be > 0");
}

double ObjectiveConfig::resolved_xi(std::size_t num_classes) const {
  if (xi) return *xi;
  return 0.05 * std::log(static_cast<double>(std::max<std::size_t>(num_classes, 1)));
}

double distance(std::span<const double> x, std::span<const double> y, Distance kind) {
  const double sq = squared_distance(x, y);
  return kind == Distance::Euclidean ? std::sqrt(sq) : sq;
}

void distance_grad(std::span<const double> x, std::span<const double> y, Distance kind, double scale,
                   std::span<double> gx, std::span<double> gy) {
  if (scale == 0.0) return;
  double factor;
  if (kind == Distance::Euclidean) {
    const double d = std::sqrt(squared_distance(x, y));
    if (d == 0.0) return;
    factor = scale / d;
  } else {
    factor = 2.0 * scale;
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double g = factor * (x[i] - y[i]);
    if (!gx.empty()) gx[i] += g;
    if (!gy.empty()) gy[i] -= g;
  }
}

TripletResult triplet_hinge(std::span<const double> anchor, std::span<const double> class_embedding,
                            std::span<const double> negative, double margin, Distance kind) {
  if (anchor.size() != class_embedding.size() || negative.size() != class_embedding.size())
    throw ShapeError("triplet_hinge: embedding dimensions differ");
  const std::size_t n = anchor.size();
  TripletResult r{0.0, 0.0, Vec(n, 0.0), Vec(n, 0.0), Vec(n, 0.0)};
  r.argument = distance(anchor, class_embedding, kind) - distance(negative, class_embedding, kind) + margin;
  if (r.argument > 0.0) {
    r.loss = r.argument;
    distance_grad(anchor, class_embedding, kind, 1.0, r.grad_anchor, r.grad_class);
    distance_grad(negative, class_embedding, kind, -1.0, r.grad_negative, r.grad_class);
  }
  return r;
}

AlignmentResult av_alignment_loss(std::span<const double> a, std::span<const double> v) {
  if (a.size() != v.size()) throw ShapeError("av_alignment_loss: embedding dimensions differ");
  AlignmentResult r{0.0, Vec(a.size()), Vec(a.size())};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - v[i];
    r.loss += d * d;
    r.grad_audio[i] = 2.0 * d;
    r.grad_video[i] = -2.0 * d;
  }
  return r;
}

Vec probs_from_distances(std::span<const double> dists, double eps_dist) {
  if (dists.empty()) throw ShapeError("probs_from_distances: empty distance vector");
  Vec p(dists.size());
  double total = 0.0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (!(dists[i] >= 0.0)) throw ConfigError("probs_from_distances: distances must be >= 0");
    p[i] = 1.0 / std::max(dists[i], eps_dist);
    total += p[i];
  }
  for (auto& x : p) x /= total;
  return p;
}

double entropy(std::span<const double> p) {
  if (p.empty()) throw ConfigError("entropy: empty distribution");
  double sum = 0.0, e = 0.0;
  for (double x : p) {
    if (!(x >= 0.0)) throw ConfigError("entropy: negative probability");
    sum += x;
    if (x > 0.0) e -= x * std::log(x);
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("entropy: probabilities do not sum to one");
  return std::max(e, 0.0);
}

double alpha_label(double entropy_audio, double entropy_video, double xi) {
  if (entropy_video < entropy_audio - xi) return 0.0;
  if (entropy_audio < entropy_video - xi) return 1.0;
  return 0.5;
}

BceResult attention_bce(double alpha, double target) {
  constexpr double kClamp = 1e-7;
  const double a = std::clamp(alpha, kClamp, 1.0 - kClamp);
  BceResult r;
  r.loss = -(target * std::log(a) + (1.0 - target) * std::log(1.0 - a));
  r.grad_logit = alpha - target;
  return r;
}

namespace {

void add_into(Vec& dst, std::span<const double> src, double scale = 1.0) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

}  // namespace

ObjectiveResult total_objective(const ObjectiveData& data, std::span<const TripletSample> batch,
                                const ProjectionModel& model, const AttentionModel* attention,
                                const ObjectiveConfig& cfg, ObjectiveMode mode,
                                std::span<const double> frozen_labels) {
  cfg.validate();
  model.check_shapes();
  const bool with_attention = mode == ObjectiveMode::WithAttention;
  if (with_attention && attention == nullptr)
    throw ConfigError("total_objective: attention mode requires an attention model");
  if (!frozen_labels.empty() && frozen_labels.size() != batch.size())
    throw ShapeError("total_objective: frozen label count does not match batch size");
  if (data.text.rows() != data.seen.size()) throw ShapeError("total_objective: seen flags do not match class table");

  for (const auto& s : batch) {
    if (s.anchor >= data.labels.size() || s.negative >= data.labels.size())
      throw ShapeError("total_objective: sample index out of range");
    const std::size_t ca = data.labels[s.anchor], cn = data.labels[s.negative];
    if (!data.seen[ca] || !data.seen[cn]) {
      std::ostringstream os;
      os << "total_objective: example " << (data.seen[ca] ? s.negative : s.anchor)
         << " belongs to an unseen class and cannot be used for training";
      throw ProtocolError(os.str());
    }
    if (ca == cn) throw ConfigError("total_objective: negative example shares the anchor's class");
  }

  const std::size_t dim = model.embed_dim();
  const bool normalize = model.normalize;

  // Text embeddings for every seen class; slot[c] maps class -> seen index.
  std::vector<std::size_t> seen_classes;
  std::vector<std::size_t> slot(data.seen.size(), std::numeric_limits<std::size_t>::max());
  for (std::size_t c = 0; c < data.seen.size(); ++c)
    if (data.seen[c]) {
      slot[c] = seen_classes.size();
      seen_classes.push_back(c);
    }
  std::vector<EmbedPass> text_pass;
  for (std::size_t c : seen_classes) text_pass.push_back(embed_forward(model.text, data.text.row(c), normalize));
  std::vector<Vec> text_grad(seen_classes.size(), Vec(dim, 0.0));
  const double xi = cfg.resolved_xi(seen_classes.size());

  ObjectiveResult out;
  out.grad_projection = model.zeros_like();
  if (with_attention) out.grad_attention = attention->zeros_like();
  out.min_hinge_margin = std::numeric_limits<double>::infinity();

  for (std::size_t k = 0; k < batch.size(); ++k) {
    const auto& s = batch[k];
    const std::size_t cls = slot[data.labels[s.anchor]];
    const Vec& t = text_pass[cls].embedding;

    const auto ap = embed_forward(model.audio, data.audio.row(s.anchor), normalize);
    const auto vp = embed_forward(model.video, data.video.row(s.anchor), normalize);
    const auto aq = embed_forward(model.audio, data.audio.row(s.negative), normalize);
    const auto vq = embed_forward(model.video, data.video.row(s.negative), normalize);

    Vec g_ap(dim, 0.0), g_vp(dim, 0.0), g_aq(dim, 0.0), g_vq(dim, 0.0);

    auto av = av_alignment_loss(ap.embedding, vp.embedding);
    out.terms.alignment += av.loss;
    add_into(g_ap, av.grad_audio, cfg.lambda);
    add_into(g_vp, av.grad_video, cfg.lambda);

    auto ta = triplet_hinge(ap.embedding, t, aq.embedding, cfg.margin, cfg.distance);
    auto tv = triplet_hinge(vp.embedding, t, vq.embedding, cfg.margin, cfg.distance);
    out.terms.triplet_audio += ta.loss;
    out.terms.triplet_video += tv.loss;

    double w_video = cfg.alpha_video, w_audio = cfg.alpha_audio;
    std::optional<AttentionPass> attn_pass;
    if (with_attention) {
      attn_pass = attention->input == AttentionInput::Raw
                      ? attention_forward(*attention, data.audio.row(s.anchor), data.video.row(s.anchor))
                      : attention_forward(*attention, ap.embedding, vp.embedding);
      const double alpha = attn_pass->alpha;
      if (cfg.polarity == AlphaPolarity::Literal) {
        w_video = alpha;
        w_audio = 1.0 - alpha;
      } else {
        w_audio = alpha;
        w_video = 1.0 - alpha;
      }
    }
    if (cfg.gamma != 0.0) {
      if (w_audio != 0.0) out.min_hinge_margin = std::min(out.min_hinge_margin, std::abs(ta.argument));
      if (w_video != 0.0) out.min_hinge_margin = std::min(out.min_hinge_margin, std::abs(tv.argument));
    }
    out.terms.total += cfg.lambda * av.loss + cfg.gamma * (w_video * tv.loss + w_audio * ta.loss);

    add_into(g_ap, ta.grad_anchor, cfg.gamma * w_audio);
    add_into(g_aq, ta.grad_negative, cfg.gamma * w_audio);
    add_into(text_grad[cls], ta.grad_class, cfg.gamma * w_audio);
    add_into(g_vp, tv.grad_anchor, cfg.gamma * w_video);
    add_into(g_vq, tv.grad_negative, cfg.gamma * w_video);
    add_into(text_grad[cls], tv.grad_class, cfg.gamma * w_video);

    if (with_attention) {
      const double alpha = attn_pass->alpha;
      double label;
      if (!frozen_labels.empty()) {
        label = frozen_labels[k];
      } else {
        Vec da(seen_classes.size()), dv(seen_classes.size());
        for (std::size_t j = 0; j < seen_classes.size(); ++j) {
          da[j] = distance(ap.embedding, text_pass[j].embedding, cfg.distance);
          dv[j] = distance(vp.embedding, text_pass[j].embedding, cfg.distance);
        }
        label = alpha_label(entropy(probs_from_distances(da, cfg.eps_dist)),
                            entropy(probs_from_distances(dv, cfg.eps_dist)), xi);
      }
      out.alpha_labels.push_back(label);
      out.alpha_predicted.push_back(alpha);
      auto bce = attention_bce(alpha, label);
      out.terms.attention_ce += bce.loss;
      out.terms.total += bce.loss;

      // d/d alpha of the weighted triplet block, then through the logistic.
      const double dalpha = cfg.polarity == AlphaPolarity::Literal ? cfg.gamma * (tv.loss - ta.loss)
                                                                   : cfg.gamma * (ta.loss - tv.loss);
      const double grad_logit = dalpha * alpha * (1.0 - alpha) + bce.grad_logit;
      auto [ga_in, gv_in] = attention_backward(*attention, *attn_pass, grad_logit, *out.grad_attention);
      if (attention->input == AttentionInput::Projected) {
        add_into(g_ap, ga_in);
        add_into(g_vp, gv_in);
      }
    }

    embed_backward(model.audio, ap, g_ap, normalize, out.grad_projection.audio);
    embed_backward(model.video, vp, g_vp, normalize, out.grad_projection.video);
    embed_backward(model.audio, aq, g_aq, normalize, out.grad_projection.audio);
    embed_backward(model.video, vq, g_vq, normalize, out.grad_projection.video);
  }

  for (std::size_t j = 0; j < seen_classes.size(); ++j)
    embed_backward(model.text, text_pass[j], text_grad[j], normalize, out.grad_projection.text);

  return out;
}

}  // namespace cjme
