#pragma once

// Dataset directory codec and the synthetic audio/video/text generator.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cjme/numerics.hpp"

namespace cjme {

enum class Split { Train, Val, Test };
enum class Dominant { None, Audio, Video };

const char* to_string(Split s);
const char* to_string(Dominant d);

struct ClassEntry {
  std::string name;
  bool seen = true;
  Vec text_embedding;
  friend bool operator==(const ClassEntry&, const ClassEntry&) = default;
};

struct ExampleRecord {
  std::string id;
  std::string class_name;
  Split split = Split::Train;
  // Ground-truth dominant modality; only synthetic data carries it.
  std::optional<Dominant> dominant;
  friend bool operator==(const ExampleRecord&, const ExampleRecord&) = default;
};

struct Dims {
  std::size_t audio = 0;
  std::size_t video = 0;
  std::size_t text = 0;
  friend bool operator==(const Dims&, const Dims&) = default;
};

class DatasetBundle {
 public:
  std::vector<ClassEntry> classes;
  std::vector<ExampleRecord> examples;
  // One row per example, in `examples` order.
  Matrix audio;
  Matrix video;
  Dims dims;

  // Class index of every example, resolved against `classes`.
  std::vector<std::size_t> labels() const;
  std::size_t class_index(const std::string& name) const;
  std::vector<std::size_t> indices_in(Split split) const;
  std::vector<std::size_t> seen_classes() const;
  std::vector<bool> seen_flags() const;
  Matrix text_matrix() const;

  // Throws FormatError describing the first violated invariant.
  void validate() const;

  friend bool operator==(const DatasetBundle&, const DatasetBundle&) = default;
};

DatasetBundle load_dataset(const std::filesystem::path& dir);
void write_dataset(const DatasetBundle& bundle, const std::filesystem::path& dir);

struct SynthConfig {
  std::size_t num_classes = 12;
  std::size_t num_unseen = 4;
  std::size_t per_class = 200;
  std::size_t audio_dim = 64;
  std::size_t video_dim = 64;
  std::size_t text_dim = 32;
  std::size_t latent_dim = 6;
  double audio_dominant_fraction = 0.0;
  double noise_scale = 0.5;
  std::uint64_t seed = 7;
};

// Each class gets a latent prototype; text, audio and video are fixed random
// linear images of it, audio/video plus Gaussian noise. A fraction of examples
// has video replaced by noise (audio dominant) and an equal, disjoint fraction
// has audio replaced (video dominant). Seen classes split 60/20/20, unseen
// classes 50/50 over val/test. All features are float32-representable.
DatasetBundle gen_synthetic(const SynthConfig& cfg);

}  // namespace cjme
