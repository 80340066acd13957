#include "cjme/evalkit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "cjme/error.hpp"

namespace cjme {

void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

AccuracyResult mean_class_accuracy(std::span<const std::size_t> predictions, std::span<const std::size_t> truths,
                                   std::span<const std::size_t> class_subset) {
  if (predictions.size() != truths.size()) throw ShapeError("mean_class_accuracy: prediction/truth length mismatch");
  AccuracyResult r;
  double total = 0.0;
  for (std::size_t c : class_subset) {
    std::size_t count = 0, correct = 0;
    for (std::size_t i = 0; i < truths.size(); ++i) {
      if (truths[i] != c) continue;
      ++count;
      if (predictions[i] == c) ++correct;
    }
    if (count == 0) {
      r.skipped.push_back(c);
      continue;
    }
    const double pct = 100.0 * static_cast<double>(correct) / static_cast<double>(count);
    r.per_class.push_back({c, count, pct});
    total += pct;
  }
  if (!r.per_class.empty()) r.percent = total / static_cast<double>(r.per_class.size());
  return r;
}

std::optional<double> average_precision(const std::vector<bool>& ranked_relevance) {
  std::size_t hits = 0;
  double sum = 0.0;
  for (std::size_t k = 0; k < ranked_relevance.size(); ++k) {
    if (!ranked_relevance[k]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  if (hits == 0) return std::nullopt;
  return sum / static_cast<double>(hits);
}

double harmonic_mean(double seen, double unseen) {
  if (seen + unseen == 0.0) return 0.0;
  return 2.0 * seen * unseen / (seen + unseen);
}

EmbeddedSplit embed_split(const ProjectionModel& model, const DatasetBundle& data, Split split, std::size_t threads) {
  model.check_shapes();
  if (model.audio.input_width() != data.dims.audio || model.video.input_width() != data.dims.video ||
      model.text.input_width() != data.dims.text)
    throw ShapeError("model input widths do not match the dataset feature dimensions");
  EmbeddedSplit out;
  const auto labels = data.labels();
  out.rows = data.indices_in(split);
  const std::size_t d = model.embed_dim();
  out.audio = Matrix(out.rows.size(), d);
  out.video = Matrix(out.rows.size(), d);
  for (std::size_t r : out.rows) out.labels.push_back(labels[r]);
  parallel_for(out.rows.size(), threads, [&](std::size_t i) {
    auto e = embed_example(model, data.audio.row(out.rows[i]), data.video.row(out.rows[i]));
    std::copy(e.audio.begin(), e.audio.end(), out.audio.row(i).begin());
    std::copy(e.video.begin(), e.video.end(), out.video.row(i).begin());
  });
  out.classes = embed_classes(model, data.text_matrix());
  out.seen = data.seen_flags();
  return out;
}

namespace {

void aggregate(RetrievalReport& r, const std::vector<bool>& seen) {
  double s = 0.0, u = 0.0;
  std::size_t ns = 0, nu = 0;
  for (std::size_t c = 0; c < r.per_class.size(); ++c) {
    if (!r.per_class[c]) continue;
    if (seen[c]) {
      s += *r.per_class[c];
      ++ns;
    } else {
      u += *r.per_class[c];
      ++nu;
    }
  }
  r.seen = ns ? s / static_cast<double>(ns) : 0.0;
  r.unseen = nu ? u / static_cast<double>(nu) : 0.0;
  r.hm = harmonic_mean(r.seen, r.unseen);
}

}  // namespace

RetrievalReport leave_one_out_map(const EmbeddedSplit& split, Direction direction, Distance kind,
                                  std::size_t threads) {
  const std::size_t n = split.labels.size();
  const std::size_t num_classes = split.classes.rows();
  if (n == 0) throw ConfigError("leave_one_out_map: split is empty");
  RetrievalReport r;
  r.direction = direction;
  r.per_class.assign(num_classes, std::nullopt);

  std::vector<std::size_t> class_count(num_classes, 0);
  for (std::size_t c : split.labels) ++class_count[c];

  const bool text_query = direction == Direction::TextToAudio || direction == Direction::TextToVideo ||
                          direction == Direction::TextToAudioVideo;
  if (text_query) {
    for (std::size_t c = 0; c < num_classes; ++c)
      if (class_count[c] == 0) r.skipped.push_back(c);
    parallel_for(num_classes, threads, [&](std::size_t c) {
      if (class_count[c] == 0) return;
      auto ranking = rank_gallery(split.classes.row(c), split.audio, split.video, direction, kind);
      std::vector<bool> rel;
      rel.reserve(n);
      for (std::size_t j : ranking.order) rel.push_back(split.labels[j] == c);
      r.per_class[c] = 100.0 * *average_precision(rel);
    });
    for (std::size_t c = 0; c < num_classes; ++c)
      if (class_count[c] > 0) ++r.queries;
  } else {
    const bool audio_query = direction == Direction::AudioToVideo;
    std::vector<std::optional<double>> ap(n);
    parallel_for(n, threads, [&](std::size_t i) {
      const std::size_t c = split.labels[i];
      if (class_count[c] < 2) return;
      auto query = audio_query ? split.audio.row(i) : split.video.row(i);
      auto ranking = rank_gallery(query, split.audio, split.video, direction, kind);
      std::vector<bool> rel;
      rel.reserve(n - 1);
      for (std::size_t j : ranking.order)
        if (j != i) rel.push_back(split.labels[j] == c);
      ap[i] = average_precision(rel);
    });
    std::vector<double> sum(num_classes, 0.0);
    std::vector<std::size_t> cnt(num_classes, 0);
    for (std::size_t i = 0; i < n; ++i) {
      if (!ap[i]) continue;
      sum[split.labels[i]] += 100.0 * *ap[i];
      ++cnt[split.labels[i]];
      ++r.queries;
    }
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (cnt[c] > 0) r.per_class[c] = sum[c] / static_cast<double>(cnt[c]);
      else if (class_count[c] > 0) r.skipped.push_back(c);
    }
  }
  aggregate(r, split.seen);
  return r;
}

ScoreTable score_split(const EmbeddedSplit& split, Modality modality, Distance kind) {
  ScoreTable t;
  const std::size_t n = split.labels.size();
  t.distances = Matrix(n, split.classes.rows());
  t.truths = split.labels;
  t.seen = split.seen;
  t.chosen.assign(n, modality);
  for (std::size_t i = 0; i < n; ++i) {
    EmbeddedExample x{Vec(split.audio.row(i).begin(), split.audio.row(i).end()),
                      Vec(split.video.row(i).begin(), split.video.row(i).end())};
    auto d = class_distances(x, split.classes, modality, kind);
    std::copy(d.begin(), d.end(), t.distances.row(i).begin());
  }
  return t;
}

ScoreTable score_split(const Checkpoint& ckpt, const DatasetBundle& data, Split split, const InferenceConfig& cfg,
                       std::size_t threads) {
  cfg.validate();
  if (cfg.modality == ModalityMode::Select && !ckpt.attention)
    throw ConfigError("modality 'select' requires a checkpoint trained with attention");
  if (ckpt.dims != data.dims) throw ShapeError("checkpoint dimensions do not match the dataset");
  const auto es = embed_split(ckpt.projection, data, split, threads);
  const std::size_t n = es.labels.size();
  ScoreTable t;
  t.distances = Matrix(n, es.classes.rows());
  t.truths = es.labels;
  t.seen = es.seen;
  t.chosen.assign(n, Modality::Both);
  const Distance kind = ckpt.objective.distance;
  parallel_for(n, threads, [&](std::size_t i) {
    EmbeddedExample x{Vec(es.audio.row(i).begin(), es.audio.row(i).end()),
                      Vec(es.video.row(i).begin(), es.video.row(i).end())};
    Modality m = Modality::Both;
    switch (cfg.modality) {
      case ModalityMode::Audio: m = Modality::Audio; break;
      case ModalityMode::Video: m = Modality::Video; break;
      case ModalityMode::Both: m = Modality::Both; break;
      case ModalityMode::Select:
        m = select_modality(*ckpt.attention, data.audio.row(es.rows[i]), data.video.row(es.rows[i]), x, cfg);
        break;
    }
    t.chosen[i] = m;
    auto d = class_distances(x, es.classes, m, kind);
    std::copy(d.begin(), d.end(), t.distances.row(i).begin());
  });
  return t;
}

ClassificationReport evaluate_scores(const ScoreTable& table, double beta) {
  ClassificationReport r;
  r.beta = beta;
  const std::size_t n = table.truths.size();
  r.predictions.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    r.predictions[i] = penalized_argmin(table.distances.row(i), table.seen, beta);
    if (!table.seen[r.predictions[i]]) ++r.unseen_predictions;
  }
  std::vector<std::size_t> seen_classes, unseen_classes;
  std::vector<bool> present(table.seen.size(), false);
  for (std::size_t c : table.truths) present[c] = true;
  for (std::size_t c = 0; c < table.seen.size(); ++c) {
    if (!present[c]) continue;
    (table.seen[c] ? seen_classes : unseen_classes).push_back(c);
  }
  r.seen_acc = mean_class_accuracy(r.predictions, table.truths, seen_classes);
  r.unseen_acc = mean_class_accuracy(r.predictions, table.truths, unseen_classes);
  r.seen = r.seen_acc.percent;
  r.unseen = r.unseen_acc.percent;
  r.hm = harmonic_mean(r.seen, r.unseen);
  return r;
}

double max_bias(const ScoreTable& table) {
  double spread = 0.0;
  for (std::size_t i = 0; i < table.distances.rows(); ++i) {
    auto row = table.distances.row(i);
    auto [lo, hi] = std::minmax_element(row.begin(), row.end());
    spread = std::max(spread, *hi - *lo);
  }
  return spread;
}

SweepResult sweep_bias(const ScoreTable& table, std::size_t points) {
  if (points < 2) throw ConfigError("sweep_bias needs at least two grid points");
  if (table.truths.empty()) throw ConfigError("sweep_bias: split is empty");
  const double top = max_bias(table);
  SweepResult s;
  for (std::size_t k = 0; k < points; ++k) {
    const double beta = k + 1 == points ? top : top * static_cast<double>(k) / static_cast<double>(points - 1);
    auto rep = evaluate_scores(table, beta);
    s.grid.push_back({beta, rep.seen, rep.unseen, rep.hm, rep.unseen_predictions});
    if (rep.hm > s.grid[s.best].hm) s.best = k;
  }
  return s;
}

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void write_metric_row(std::ostream& os, const std::string& metric, const std::string& direction, double s, double u,
                      double hm) {
  os << metric << '\t' << direction << '\t' << fmt2(s) << '\t' << fmt2(u) << '\t' << fmt2(hm) << '\n';
}

void write_sweep_tsv(std::ostream& os, const SweepResult& sweep) {
  char buf[64];
  for (const auto& p : sweep.grid) {
    std::snprintf(buf, sizeof buf, "%.6f", p.beta);
    os << buf << '\t' << fmt2(p.seen) << '\t' << fmt2(p.unseen) << '\t' << fmt2(p.hm) << '\n';
  }
}

std::string format_classification_table(const ClassificationReport& report, const DatasetBundle& data,
                                        const std::string& mode) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "classification  modality=%s  beta=%.6f\n", mode.c_str(), report.beta);
  os << buf;
  std::snprintf(buf, sizeof buf, "%-24s %8s %8s %8s\n", "", "S", "U", "HM");
  os << buf;
  std::snprintf(buf, sizeof buf, "%-24s %8.2f %8.2f %8.2f\n", "mAcc", report.seen, report.unseen, report.hm);
  os << buf << "\nper-class accuracy\n";
  auto rows = report.seen_acc.per_class;
  rows.insert(rows.end(), report.unseen_acc.per_class.begin(), report.unseen_acc.per_class.end());
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.cls < b.cls; });
  for (const auto& r : rows) {
    const auto& c = data.classes[r.cls];
    std::snprintf(buf, sizeof buf, "  %-22s %-7s %6zu %8.2f\n", c.name.c_str(), c.seen ? "seen" : "unseen", r.count,
                  r.percent);
    os << buf;
  }
  return os.str();
}

std::string format_retrieval_table(const std::vector<RetrievalReport>& reports, const DatasetBundle& data) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %8s %8s %8s %8s\n", "mAP", "S", "U", "HM", "queries");
  os << buf;
  for (const auto& r : reports) {
    std::snprintf(buf, sizeof buf, "%-8s %8.2f %8.2f %8.2f %8zu\n", to_string(r.direction), r.seen, r.unseen, r.hm,
                  r.queries);
    os << buf;
  }
  for (const auto& r : reports) {
    os << "\nper-class AP (" << to_string(r.direction) << ")\n";
    for (std::size_t c = 0; c < r.per_class.size(); ++c) {
      if (!r.per_class[c]) continue;
      std::snprintf(buf, sizeof buf, "  %-22s %-7s %8.2f\n", data.classes[c].name.c_str(),
                    data.classes[c].seen ? "seen" : "unseen", *r.per_class[c]);
      os << buf;
    }
  }
  return os.str();
}

}  // namespace cjme
