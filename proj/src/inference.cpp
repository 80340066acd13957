#include "cjme/inference.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cjme/error.hpp"

namespace cjme {

const char* to_string(Modality m) {
  switch (m) {
    case Modality::Audio: return "audio";
    case Modality::Video: return "video";
    case Modality::Both: return "both";
  }
  return "?";
}

const char* to_string(ModalityMode m) {
  switch (m) {
    case ModalityMode::Audio: return "audio";
    case ModalityMode::Video: return "video";
    case ModalityMode::Both: return "both";
    case ModalityMode::Select: return "select";
  }
  return "?";
}

const char* to_string(Direction d) {
  switch (d) {
    case Direction::TextToAudio: return "t2a";
    case Direction::TextToVideo: return "t2v";
    case Direction::TextToAudioVideo: return "t2av";
    case Direction::AudioToVideo: return "a2v";
    case Direction::VideoToAudio: return "v2a";
  }
  return "?";
}

std::optional<ModalityMode> parse_modality_mode(std::string_view s) {
  for (auto m : {ModalityMode::Audio, ModalityMode::Video, ModalityMode::Both, ModalityMode::Select})
    if (s == to_string(m)) return m;
  return std::nullopt;
}

std::optional<Direction> parse_direction(std::string_view s) {
  for (auto d : {Direction::TextToAudio, Direction::TextToVideo, Direction::TextToAudioVideo, Direction::AudioToVideo,
                 Direction::VideoToAudio})
    if (s == to_string(d)) return d;
  return std::nullopt;
}

void InferenceConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be a finite value >= 0");
  if (!(attention_threshold > 0.5 && attention_threshold <= 1.0))
    throw ConfigError("attention threshold must lie in (0.5, 1]");
}

EmbeddedExample embed_example(const ProjectionModel& model, std::span<const double> audio_raw,
                              std::span<const double> video_raw) {
  return {embed_forward(model.audio, audio_raw, model.normalize).embedding,
          embed_forward(model.video, video_raw, model.normalize).embedding};
}

Vec class_distances(const EmbeddedExample& x, const Matrix& class_embeddings, Modality modality, Distance kind) {
  Vec d(class_embeddings.rows());
  for (std::size_t c = 0; c < d.size(); ++c) {
    const auto t = class_embeddings.row(c);
    switch (modality) {
      case Modality::Audio: d[c] = distance(x.audio, t, kind); break;
      case Modality::Video: d[c] = distance(x.video, t, kind); break;
      case Modality::Both: d[c] = distance(x.audio, t, kind) + distance(x.video, t, kind); break;
    }
  }
  return d;
}

std::size_t penalized_argmin(std::span<const double> distances, const std::vector<bool>& seen, double beta) {
  if (distances.empty()) throw ShapeError("classification needs at least one class");
  if (seen.size() != distances.size()) throw ShapeError("seen flags do not match class count");
  std::size_t best = 0;
  double best_score = distances[0] + (seen[0] ? beta : 0.0);
  for (std::size_t c = 1; c < distances.size(); ++c) {
    const double s = distances[c] + (seen[c] ? beta : 0.0);
    if (s < best_score) {
      best = c;
      best_score = s;
    }
  }
  return best;
}

ClassScores gzsl_classify(const EmbeddedExample& x, const Matrix& class_embeddings, const std::vector<bool>& seen,
                          Modality modality, double beta, Distance kind) {
  if (class_embeddings.rows() == 0) throw ShapeError("gzsl_classify: empty class set");
  ClassScores s;
  s.distances = class_distances(x, class_embeddings, modality, kind);
  s.seen = seen;
  s.predicted = penalized_argmin(s.distances, seen, beta);
  s.penalized = s.distances;
  for (std::size_t c = 0; c < s.penalized.size(); ++c)
    if (seen[c]) s.penalized[c] += beta;
  return s;
}

Modality select_modality(double alpha, double threshold, AlphaPolarity polarity) {
  const Modality high = polarity == AlphaPolarity::Literal ? Modality::Video : Modality::Audio;
  const Modality low = polarity == AlphaPolarity::Literal ? Modality::Audio : Modality::Video;
  if (alpha >= threshold) return high;
  if (1.0 - alpha >= threshold) return low;
  return Modality::Both;
}

Modality select_modality(const AttentionModel& attn, std::span<const double> audio_raw,
                         std::span<const double> video_raw, const EmbeddedExample& embedded,
                         const InferenceConfig& cfg) {
  const auto pass = attn.input == AttentionInput::Raw ? attention_forward(attn, audio_raw, video_raw)
                                                      : attention_forward(attn, embedded.audio, embedded.video);
  return select_modality(pass.alpha, cfg.attention_threshold, cfg.polarity);
}

Ranking rank_gallery(std::span<const double> query, const Matrix& audio_gallery, const Matrix& video_gallery,
                     Direction direction, Distance kind) {
  const bool use_audio = direction == Direction::TextToAudio || direction == Direction::VideoToAudio ||
                         direction == Direction::TextToAudioVideo;
  const bool use_video = direction == Direction::TextToVideo || direction == Direction::AudioToVideo ||
                         direction == Direction::TextToAudioVideo;
  const Matrix& primary = use_audio ? audio_gallery : video_gallery;
  const std::size_t n = primary.rows();
  if (n == 0) throw ShapeError("rank_gallery: empty gallery");
  if ((use_audio && audio_gallery.cols() != query.size()) || (use_video && video_gallery.cols() != query.size()))
    throw ShapeError("rank_gallery: query dimension does not match gallery");
  if (use_audio && use_video && audio_gallery.rows() != video_gallery.rows())
    throw ShapeError("rank_gallery: audio and video galleries differ in size");

  Vec score(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (use_audio && use_video)
      score[i] = 0.5 * (distance(query, audio_gallery.row(i), kind) + distance(query, video_gallery.row(i), kind));
    else
      score[i] = distance(query, primary.row(i), kind);
  }
  Ranking r;
  r.order.resize(n);
  std::iota(r.order.begin(), r.order.end(), 0);
  std::stable_sort(r.order.begin(), r.order.end(), [&](std::size_t a, std::size_t b) { return score[a] < score[b]; });
  r.scores.reserve(n);
  for (std::size_t i : r.order) r.scores.push_back(score[i]);
  return r;
}

Matrix embed_classes(const ProjectionModel& model, const Matrix& text) {
  Matrix t(text.rows(), model.embed_dim());
  for (std::size_t c = 0; c < text.rows(); ++c) {
    auto e = embed_forward(model.text, text.row(c), model.normalize).embedding;
    std::copy(e.begin(), e.end(), t.row(c).begin());
  }
  return t;
}

}  // namespace cjme
