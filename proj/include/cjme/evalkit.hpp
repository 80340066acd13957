#pragma once

// Evaluation protocol: class-balanced accuracy, average precision,
// leave-one-out retrieval mAP, harmonic mean and the calibrated-stacking sweep.
// All percentages are in [0, 100].

#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cjme/checkpoint.hpp"
#include "cjme/dataio.hpp"
#include "cjme/inference.hpp"

namespace cjme {

// Runs fn(i) for i in [0, n) on up to `threads` workers; each index is
// handled exactly once, so outputs written per index do not depend on the
// worker count.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn);

struct ClassAccuracy {
  std::size_t cls = 0;
  std::size_t count = 0;
  double percent = 0.0;
};

struct AccuracyResult {
  double percent = 0.0;
  std::vector<ClassAccuracy> per_class;
  std::vector<std::size_t> skipped;  // classes in the subset without examples
};

AccuracyResult mean_class_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> truths,
                                   std::span<const std::size_t> class_subset);

// Mean of precision@k over the ranks k holding relevant items; nullopt when
// nothing is relevant.
std::optional<double> average_precision(const std::vector<bool>& ranked_relevance);

// 2SU / (S + U), 0 when S + U = 0.
double harmonic_mean(double seen, double unseen);

struct EmbeddedSplit {
  Matrix audio;  // one row per example
  Matrix video;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> rows;  // dataset row of each example
  Matrix classes;                 // class embeddings, one row per class
  std::vector<bool> seen;
};

EmbeddedSplit embed_split(const ProjectionModel& model, const DatasetBundle& data, Split split,
                          std::size_t threads = 1);

struct RetrievalReport {
  Direction direction = Direction::AudioToVideo;
  std::vector<std::optional<double>> per_class;  // percent, nullopt = skipped
  std::vector<std::size_t> skipped;
  std::size_t queries = 0;
  double seen = 0.0;
  double unseen = 0.0;
  double hm = 0.0;
};

// Example queries use every other split example as gallery; text queries use
// one class embedding per class against the whole split. AP is averaged per
// query class, then uniformly over seen (S) and unseen (U) classes.
RetrievalReport leave_one_out_map(const EmbeddedSplit& split, Direction direction, Distance kind,
                                  std::size_t threads = 1);

// Unpenalised class distances per example, ready for any beta.
struct ScoreTable {
  Matrix distances;  // examples x classes
  std::vector<std::size_t> truths;
  std::vector<bool> seen;
  std::vector<Modality> chosen;
};

ScoreTable score_split(const EmbeddedSplit& split, Modality modality, Distance kind);
// Modality per example from the config, including attention-driven selection.
ScoreTable score_split(const Checkpoint& ckpt, const DatasetBundle& data, Split split, const InferenceConfig& cfg,
                       std::size_t threads = 1);

struct ClassificationReport {
  double beta = 0.0;
  AccuracyResult seen_acc;
  AccuracyResult unseen_acc;
  double seen = 0.0;
  double unseen = 0.0;
  double hm = 0.0;
  std::vector<std::size_t> predictions;
  std::size_t unseen_predictions = 0;
};

ClassificationReport evaluate_scores(const ScoreTable& table, double beta);

struct SweepPoint {
  double beta = 0.0;
  double seen = 0.0;
  double unseen = 0.0;
  double hm = 0.0;
  std::size_t unseen_predictions = 0;
};

struct SweepResult {
  std::vector<SweepPoint> grid;
  std::size_t best = 0;  // first grid index with the highest HM
  double best_beta() const { return grid[best].beta; }
};

// Largest per-example spread max_c d_c - min_c d_c.
double max_bias(const ScoreTable& table);
// `points` equally spaced values from 0 to max_bias.
SweepResult sweep_bias(const ScoreTable& table, std::size_t points = 25);

// metric<TAB>direction<TAB>S<TAB>U<TAB>HM, two decimals.
void write_metric_row(std::ostream& os, const std::string& metric, const std::string& direction, double s, double u,
                      double hm);
// beta<TAB>S<TAB>U<TAB>HM rows.
void write_sweep_tsv(std::ostream& os, const SweepResult& sweep);

std::string format_classification_table(const ClassificationReport& report, const DatasetBundle& data,
                                        const std::string& mode);
std::string format_retrieval_table(const std::vector<RetrievalReport>& reports, const DatasetBundle& data);

}  // namespace cjme
