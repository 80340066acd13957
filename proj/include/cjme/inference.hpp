#pragma once

// Nearest-class GZSL prediction with calibrated stacking, attention-driven
// modality selection, and gallery ranking for cross-modal retrieval.

#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "cjme/checkpoint.hpp"
#include "cjme/numerics.hpp"
#include "cjme/objective.hpp"
#include "cjme/projector.hpp"

namespace cjme {

enum class Modality { Audio, Video, Both };
enum class ModalityMode { Audio, Video, Both, Select };
enum class Direction { TextToAudio, TextToVideo, TextToAudioVideo, AudioToVideo, VideoToAudio };

const char* to_string(Modality m);
const char* to_string(ModalityMode m);
const char* to_string(Direction d);
std::optional<ModalityMode> parse_modality_mode(std::string_view s);
std::optional<Direction> parse_direction(std::string_view s);

struct InferenceConfig {
  double beta = 0.0;
  double attention_threshold = 0.7;
  ModalityMode modality = ModalityMode::Both;
  AlphaPolarity polarity = AlphaPolarity::Literal;

  // Throws ConfigError: beta < 0 or threshold outside (0.5, 1].
  void validate() const;
};

struct EmbeddedExample {
  Vec audio;
  Vec video;
};

EmbeddedExample embed_example(const ProjectionModel& model, std::span<const double> audio_raw,
                              std::span<const double> video_raw);

struct ClassScores {
  Vec distances;  // unpenalised d_c
  Vec penalized;  // d_c + beta [c seen]
  std::vector<bool> seen;
  std::size_t predicted = 0;
};

// Per-class distances for one modality choice; for Both the audio and video
// distances are summed (same argmin as their average).
Vec class_distances(const EmbeddedExample& x, const Matrix& class_embeddings, Modality modality, Distance kind);

// argmin_c d_c + beta [c seen]; ties go to the lowest class index.
std::size_t penalized_argmin(std::span<const double> distances, const std::vector<bool>& seen, double beta);

ClassScores gzsl_classify(const EmbeddedExample& x, const Matrix& class_embeddings, const std::vector<bool>& seen,
                          Modality modality, double beta, Distance kind);

// Literal polarity: alpha >= tau selects video, 1 - alpha >= tau selects
// audio; Inverted swaps the two. Anything else uses both.
Modality select_modality(double alpha, double threshold, AlphaPolarity polarity);
Modality select_modality(const AttentionModel& attn, std::span<const double> audio_raw,
                         std::span<const double> video_raw, const EmbeddedExample& embedded,
                         const InferenceConfig& cfg);

struct Ranking {
  std::vector<std::size_t> order;  // gallery indices, best first
  Vec scores;                      // score of order[i]
};

// Ascending distance, ties by index. audio_gallery / video_gallery hold one
// embedding per row; t2av averages the audio and video distances.
Ranking rank_gallery(std::span<const double> query, const Matrix& audio_gallery, const Matrix& video_gallery,
                     Direction direction, Distance kind);

// Class embeddings t_c = g_t(text_c) for every class row.
Matrix embed_classes(const ProjectionModel& model, const Matrix& text);

}  // namespace cjme
