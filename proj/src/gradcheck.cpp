#include "cjme/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "cjme/projector.hpp"

namespace cjme {

double GradCheckReport::max_rel_error() const {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.max_rel_error);
  return m;
}

namespace {

constexpr std::size_t kAudio = 10, kVideo = 12, kText = 6, kEmbed = 8, kHidden = 16, kAttnHidden = 8;
constexpr std::size_t kSeen = 4, kUnseen = 1, kPerClass = 4, kBatch = 6;

struct Fixture {
  Matrix audio, video, text;
  std::vector<std::size_t> labels;
  std::vector<bool> seen;
  std::vector<TripletSample> batch;
  ProjectionModel model;
  AttentionModel attention;
  ObjectiveConfig cfg;
};

Fixture make_fixture(Rng& rng, const GradCheckOptions& opts) {
  Fixture f;
  const std::size_t classes = kSeen + kUnseen, n = kSeen * kPerClass;
  f.text = Matrix(classes, kText, prng_fill(rng, classes * kText, Distribution::StandardNormal));
  f.audio = Matrix(n, kAudio, prng_fill(rng, n * kAudio, Distribution::StandardNormal));
  f.video = Matrix(n, kVideo, prng_fill(rng, n * kVideo, Distribution::StandardNormal));
  for (std::size_t i = 0; i < n; ++i) f.labels.push_back(i / kPerClass);
  for (std::size_t c = 0; c < classes; ++c) f.seen.push_back(c < kSeen);
  for (std::size_t k = 0; k < kBatch; ++k) {
    const std::size_t a = rng.below(n);
    std::size_t q;
    do {
      q = rng.below(n);
    } while (f.labels[q] == f.labels[a]);
    f.batch.push_back({a, q});
  }
  f.model = ProjectionModel::init({kAudio, kVideo, kText}, kEmbed, kHidden, rng);
  f.model.normalize = opts.normalize;
  const bool raw = opts.attention_input == AttentionInput::Raw;
  f.attention = AttentionModel::init(raw ? kAudio : kEmbed, raw ? kVideo : kEmbed, kAttnHidden, opts.attention_input, rng);
  for (auto* net : {&f.model.audio, &f.model.video, &f.model.text, &f.attention.net})
    for (auto& l : net->layers())
      for (auto& b : l.bias) b = rng.uniform(-0.2, 0.2);
  f.cfg.margin = 0.8;
  f.cfg.lambda = 0.7;
  f.cfg.gamma = 1.3;
  f.cfg.alpha_video = 0.6;
  f.cfg.alpha_audio = 0.9;
  f.cfg.distance = opts.distance;
  f.cfg.polarity = opts.polarity;
  return f;
}

double min_preactivation(const Mlp& net, std::span<const double> x) {
  auto fwd = mlp_forward(net, x);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t l = 0; l + 1 < fwd.cache.preactivations.size(); ++l)
    for (double z : fwd.cache.preactivations[l]) m = std::min(m, std::abs(z));
  return m;
}

// Distance of the fixture's base point from every non-differentiable point.
double kink_distance(const Fixture& f, ObjectiveMode mode) {
  ObjectiveData od{f.audio, f.video, f.text, f.labels, f.seen};
  auto res = total_objective(od, f.batch, f.model, &f.attention, f.cfg, mode);
  double m = res.min_hinge_margin;
  for (const auto& s : f.batch) {
    for (std::size_t i : {s.anchor, s.negative}) {
      m = std::min(m, min_preactivation(f.model.audio, f.audio.row(i)));
      m = std::min(m, min_preactivation(f.model.video, f.video.row(i)));
    }
    if (mode == ObjectiveMode::WithAttention) {
      if (f.attention.input == AttentionInput::Raw) {
        Vec x(f.audio.row(s.anchor).begin(), f.audio.row(s.anchor).end());
        x.insert(x.end(), f.video.row(s.anchor).begin(), f.video.row(s.anchor).end());
        m = std::min(m, min_preactivation(f.attention.net, x));
      } else {
        auto e = embed_forward(f.model.audio, f.audio.row(s.anchor), f.model.normalize).embedding;
        auto v = embed_forward(f.model.video, f.video.row(s.anchor), f.model.normalize).embedding;
        e.insert(e.end(), v.begin(), v.end());
        m = std::min(m, min_preactivation(f.attention.net, e));
      }
    }
  }
  return m;
}

void check_mode(Fixture& f, ObjectiveMode mode, const GradCheckOptions& opts, GradCheckReport& report) {
  ObjectiveData od{f.audio, f.video, f.text, f.labels, f.seen};
  const AttentionModel* attn = mode == ObjectiveMode::WithAttention ? &f.attention : nullptr;
  const auto base = total_objective(od, f.batch, f.model, attn, f.cfg, mode);
  const Vec labels = base.alpha_labels;
  auto eval = [&] { return total_objective(od, f.batch, f.model, attn, f.cfg, mode, labels).terms.total; };

  const char* mode_name = mode == ObjectiveMode::WithAttention ? "with-attention" : "no-attention";
  auto check_net = [&](const char* name, Mlp& net, const Mlp& grad) {
    GradCheckEntry entry{mode_name, name, net.parameter_count(), 0.0};
    auto params = net.tensors();
    auto grads = grad.tensors();
    for (std::size_t t = 0; t < params.size(); ++t) {
      for (std::size_t j = 0; j < params[t].size(); ++j) {
        const double keep = params[t][j];
        params[t][j] = keep + opts.step;
        const double up = eval();
        params[t][j] = keep - opts.step;
        const double down = eval();
        params[t][j] = keep;
        const double numeric = (up - down) / (2.0 * opts.step);
        const double err = std::abs(grads[t][j] - numeric) / std::max(1.0, std::abs(numeric));
        entry.max_rel_error = std::max(entry.max_rel_error, err);
      }
    }
    report.entries.push_back(entry);
  };
  check_net("g_audio", f.model.audio, base.grad_projection.audio);
  check_net("g_video", f.model.video, base.grad_projection.video);
  check_net("g_text", f.model.text, base.grad_projection.text);
  if (mode == ObjectiveMode::WithAttention) check_net("f_attn", f.attention.net, base.grad_attention->net);
}

}  // namespace

GradCheckReport grad_check(std::uint64_t seed, const GradCheckOptions& opts) {
  GradCheckReport report;
  report.seed = seed;
  Rng root(seed);
  for (std::uint64_t attempt = 0;; ++attempt) {
    Rng rng = root.child(attempt);
    Fixture f = make_fixture(rng, opts);
    ++report.fixture_attempts;
    if (std::min(kink_distance(f, ObjectiveMode::NoAttention), kink_distance(f, ObjectiveMode::WithAttention)) <
            opts.kink_clearance &&
        attempt < 1000)
      continue;
    check_mode(f, ObjectiveMode::NoAttention, opts, report);
    check_mode(f, ObjectiveMode::WithAttention, opts, report);
    return report;
  }
}

}  // namespace cjme
