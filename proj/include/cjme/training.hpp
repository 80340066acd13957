#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "cjme/checkpoint.hpp"
#include "cjme/dataio.hpp"
#include "cjme/objective.hpp"

namespace cjme {

struct TrainConfig {
  std::size_t embed_dim = 64;
  std::size_t hidden = 512;
  std::size_t attention_hidden = 64;
  ObjectiveConfig objective;
  bool attention = false;
  AttentionInput attention_input = AttentionInput::Raw;
  bool normalize = true;
  std::size_t epochs = 20;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::uint64_t seed = 1;

  void validate() const;
};

// Per-epoch means over training samples.
struct EpochLog {
  std::size_t epoch = 0;
  double triplet_audio = 0.0;
  double triplet_video = 0.0;
  double alignment = 0.0;
  double attention_ce = 0.0;
  double total = 0.0;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochLog> log;
};

Checkpoint initial_checkpoint(const Dims& dims, const TrainConfig& cfg);

// Deterministic per seed. Every train-split anchor is visited once per epoch in
// a shuffled order, each paired with one negative drawn uniformly from the
// train examples of a different seen class. Throws NumericError naming the
// epoch and step on a non-finite loss.
TrainResult train(const DatasetBundle& data, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace cjme
