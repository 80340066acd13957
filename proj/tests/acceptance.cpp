// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails.
//
// usage: cjme_acceptance <path-to-cjme-cli> <scratch-dir>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cjme/dataio.hpp"
#include "cjme/evalkit.hpp"
#include "cjme/gcca.hpp"
#include "cjme/gradcheck.hpp"
#include "cjme/inference.hpp"
#include "cjme/training.hpp"

namespace fs = std::filesystem;
using namespace cjme;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

std::string g_cli;
fs::path g_scratch;

int run_cli(const std::string& args) {
  const std::string cmd = "\"" + g_cli + "\" " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Shared fixtures, built once.
const DatasetBundle& synth_bundle() {
  static const DatasetBundle b = gen_synthetic(SynthConfig{});
  return b;
}

struct TrainedModel {
  Checkpoint ckpt;
  double seconds = 0.0;
};

const TrainedModel& default_model() {
  static const TrainedModel m = [] {
    const auto t0 = std::chrono::steady_clock::now();
    auto r = train(synth_bundle(), TrainConfig{});
    return TrainedModel{r.checkpoint, seconds_since(t0)};
  }();
  return m;
}

// Unseen mAcc on test at the beta chosen on val.
ClassificationReport gzsl_at_best_val_beta(const Checkpoint& ckpt, const DatasetBundle& data) {
  InferenceConfig cfg;
  cfg.polarity = ckpt.objective.polarity;
  auto sweep = sweep_bias(score_split(ckpt, data, Split::Val, cfg), 25);
  return evaluate_scores(score_split(ckpt, data, Split::Test, cfg), sweep.best_beta());
}

constexpr double kChance = 100.0 / 12.0;
// Frozen after calibration against the nearest-prototype oracle below.
constexpr double kUnseenThreshold = 5.0 * kChance;

// Nearest class mean of the concatenated audio/video test features, means
// taken over the test split itself: an upper bound for any embedding.
double prototype_oracle_unseen(const DatasetBundle& data) {
  const auto idx = data.indices_in(Split::Test);
  const auto labels = data.labels();
  const std::size_t c_count = data.classes.size(), da = data.dims.audio, dv = data.dims.video;
  Matrix proto(c_count, da + dv);
  std::vector<std::size_t> counts(c_count, 0);
  for (std::size_t i : idx) {
    ++counts[labels[i]];
    for (std::size_t j = 0; j < da; ++j) proto(labels[i], j) += data.audio(i, j);
    for (std::size_t j = 0; j < dv; ++j) proto(labels[i], da + j) += data.video(i, j);
  }
  for (std::size_t c = 0; c < c_count; ++c)
    for (auto& v : proto.row(c)) v /= std::max<std::size_t>(counts[c], 1);
  std::vector<std::size_t> preds, truths;
  for (std::size_t i : idx) {
    Vec x(data.audio.row(i).begin(), data.audio.row(i).end());
    x.insert(x.end(), data.video.row(i).begin(), data.video.row(i).end());
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t c = 0; c < c_count; ++c) {
      const double d = squared_distance(x, proto.row(c));
      if (d < best_d) best_d = d, best = c;
    }
    preds.push_back(best);
    truths.push_back(labels[i]);
  }
  std::vector<std::size_t> unseen;
  for (std::size_t c = 0; c < c_count; ++c)
    if (!data.classes[c].seen) unseen.push_back(c);
  return mean_class_accuracy(preds, truths, unseen).percent;
}

Outcome criterion1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::size_t entries = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    auto r = grad_check(seed);
    worst = std::max(worst, r.max_rel_error());
    entries += r.entries.size();
  }
  const double secs = seconds_since(t0);
  return {worst < 1e-5 && secs < 30.0,
          fmt("10 seeds, %zu network checks, worst rel err %.2e, %.1f s", entries, worst, secs)};
}

Outcome criterion2() {
  const double h1 = harmonic_mean(43.27, 27.11), h2 = harmonic_mean(28.35, 18.35);
  const auto ap12 = average_precision({true, true, false, false});
  const auto ap24 = average_precision({false, true, false, true});
  const bool ok = std::abs(h1 - 33.34) <= 0.01 && std::abs(h2 - 22.22) <= 0.1 && ap12 && *ap12 == 1.0 && ap24 &&
                  *ap24 == 0.5;
  return {ok, fmt("HM %.4f, %.4f; AP{1,2}=%.4f AP{2,4}=%.4f", h1, h2, ap12.value_or(-1), ap24.value_or(-1))};
}

Outcome criterion3() {
  const auto& m = default_model();
  std::size_t sweeps = 0;
  std::string failure;
  for (Split split : {Split::Val, Split::Test}) {
    for (ModalityMode mode : {ModalityMode::Audio, ModalityMode::Video, ModalityMode::Both}) {
      InferenceConfig cfg;
      cfg.modality = mode;
      auto table = score_split(m.ckpt, synth_bundle(), split, cfg);
      auto sweep = sweep_bias(table, 25);
      ++sweeps;
      const std::string where = fmt("%s/%s", to_string(split), to_string(mode));
      if (sweep.grid.size() != 25) failure = where + ": grid size";
      for (std::size_t k = 1; k < sweep.grid.size(); ++k) {
        if (sweep.grid[k].seen > sweep.grid[k - 1].seen) failure = where + fmt(": S rises at step %zu", k);
        if (sweep.grid[k].unseen < sweep.grid[k - 1].unseen) failure = where + fmt(": U drops at step %zu", k);
      }
      const auto unbiased = evaluate_scores(table, 0.0);
      if (sweep.grid.front().beta != 0.0 || sweep.grid.front().seen != unbiased.seen ||
          sweep.grid.front().unseen != unbiased.unseen)
        failure = where + ": beta=0 differs from unbiased evaluation";
      std::size_t min_count = sweep.grid.front().unseen_predictions, max_count = 0;
      for (const auto& p : sweep.grid) {
        min_count = std::min(min_count, p.unseen_predictions);
        max_count = std::max(max_count, p.unseen_predictions);
      }
      if (sweep.grid.front().unseen_predictions != min_count) failure = where + ": first point not minimal";
      if (sweep.grid.back().unseen_predictions != table.truths.size() || max_count != table.truths.size())
        failure = where + ": last point does not predict unseen everywhere";
    }
  }
  return {failure.empty(), failure.empty() ? fmt("%zu sweeps monotone, endpoints correct", sweeps) : failure};
}

Outcome criterion4() {
  const auto& m = default_model();
  const auto rep = gzsl_at_best_val_beta(m.ckpt, synth_bundle());
  const double oracle = prototype_oracle_unseen(synth_bundle());
  const bool ok = rep.unseen > kUnseenThreshold && rep.unseen <= oracle && m.seconds <= 60.0;
  return {ok, fmt("test U=%.2f (S=%.2f HM=%.2f, beta=%.3f) vs threshold %.2f; oracle U=%.2f; train %.1f s",
                  rep.unseen, rep.seen, rep.hm, rep.beta, kUnseenThreshold, oracle, m.seconds)};
}

Outcome criterion5() {
  TrainConfig cfg;
  cfg.objective.gamma = 0.0;
  auto lambda_only = train(synth_bundle(), cfg).checkpoint;
  const auto ablated = gzsl_at_best_val_beta(lambda_only, synth_bundle());
  const auto full = gzsl_at_best_val_beta(default_model().ckpt, synth_bundle());
  const bool ok = ablated.unseen <= 2.0 * kChance && full.unseen > kUnseenThreshold;
  return {ok, fmt("lambda-only U=%.2f (limit %.2f); full U=%.2f (threshold %.2f)", ablated.unseen, 2.0 * kChance,
                  full.unseen, kUnseenThreshold)};
}

Outcome criterion6() {
  SynthConfig sc;
  sc.audio_dominant_fraction = 0.3;
  const auto data = gen_synthetic(sc);
  TrainConfig cfg;
  cfg.attention = true;
  cfg.objective.polarity = AlphaPolarity::Inverted;
  const auto ckpt = train(data, cfg).checkpoint;
  InferenceConfig icfg;
  icfg.attention_threshold = 0.7;
  icfg.polarity = cfg.objective.polarity;
  std::size_t degraded = 0, agree = 0, undecided = 0;
  for (std::size_t i : data.indices_in(Split::Test)) {
    const auto dom = data.examples[i].dominant.value_or(Dominant::None);
    if (dom == Dominant::None) continue;
    ++degraded;
    const auto emb = embed_example(ckpt.projection, data.audio.row(i), data.video.row(i));
    const Modality pick = select_modality(*ckpt.attention, data.audio.row(i), data.video.row(i), emb, icfg);
    if (pick == Modality::Both) ++undecided;
    if ((dom == Dominant::Audio && pick == Modality::Audio) || (dom == Dominant::Video && pick == Modality::Video))
      ++agree;
  }
  const double rate = degraded ? 100.0 * static_cast<double>(agree) / static_cast<double>(degraded) : 0.0;
  return {rate > 50.0, fmt("agreement %.2f%% on %zu degraded test examples (%zu left to both), polarity inverted",
                           rate, degraded, undecided)};
}

Matrix gaussian(Rng& rng, std::size_t n, std::size_t d) {
  return Matrix(n, d, prng_fill(rng, n * d, Distribution::StandardNormal));
}

Outcome criterion7() {
  constexpr std::size_t n = 2000, d = 8;
  Rng rng(11);

  const Matrix base = gaussian(rng, n, d);
  const auto identical = fit_gcca({base, base, base}, d);
  const double ident_min = *std::min_element(identical.correlations.begin(), identical.correlations.end());

  const Matrix latent = gaussian(rng, n, 4);
  std::vector<Matrix> shared;
  for (int v = 0; v < 3; ++v) {
    Matrix mix = gaussian(rng, 4, d);
    Matrix x = matmul(latent, mix);
    for (auto& e : x.data()) e += 0.05 * rng.normal();
    shared.push_back(std::move(x));
  }
  const auto sh = fit_gcca(shared, 4);
  const double shared_min = *std::min_element(sh.correlations.begin(), sh.correlations.end());

  const auto indep = fit_gcca({gaussian(rng, n, d), gaussian(rng, n, d), gaussian(rng, n, d)}, 1);
  const double lead = indep.correlations.front();

  const bool ok = ident_min >= 1.0 - 1e-6 && shared_min >= 0.9 && lead <= 0.2;
  return {ok, fmt("identical min %.9f; shared-latent top-4 min %.4f; independent lead %.4f", ident_min, shared_min,
                  lead)};
}

// Expected AP of a uniformly random ranking of n items with r relevant:
// (1/r) sum_k P(item k relevant) E[precision@k | item k relevant].
double random_ranking_ap(std::size_t n, std::size_t r) {
  double sum = 0.0;
  for (std::size_t k = 1; k <= n; ++k) {
    const double hits_before = n > 1 ? static_cast<double>((r - 1) * (k - 1)) / static_cast<double>(n - 1) : 0.0;
    sum += (static_cast<double>(r) / static_cast<double>(n)) * (1.0 + hits_before) / static_cast<double>(k);
  }
  return sum / static_cast<double>(r);
}

// Same quantity by visiting every placement of the relevant items.
double random_ranking_ap_brute(std::size_t n, std::size_t r) {
  std::vector<bool> mask(n, false);
  std::fill(mask.end() - static_cast<std::ptrdiff_t>(r), mask.end(), true);
  double total = 0.0;
  std::size_t count = 0;
  do {
    total += *average_precision(mask);
    ++count;
  } while (std::next_permutation(mask.begin(), mask.end()));
  return total / static_cast<double>(count);
}

double mean_class_ap(const RetrievalReport& r) {
  double s = 0.0;
  std::size_t c = 0;
  for (const auto& v : r.per_class)
    if (v) s += *v, ++c;
  return c ? s / static_cast<double>(c) : 0.0;
}

Outcome criterion9() {
  // Hand-built: three tight clusters, identical in both modalities.
  EmbeddedSplit toy;
  toy.audio = Matrix(9, 2);
  const double centers[3][2] = {{0.0, 0.0}, {10.0, 0.0}, {0.0, 10.0}};
  for (std::size_t i = 0; i < 9; ++i) {
    toy.audio(i, 0) = centers[i / 3][0] + 0.1 * static_cast<double>(i % 3);
    toy.audio(i, 1) = centers[i / 3][1] - 0.1 * static_cast<double>(i % 3);
    toy.labels.push_back(i / 3);
    toy.rows.push_back(i);
  }
  toy.video = toy.audio;
  toy.classes = Matrix(3, 2, {0.0, 0.0, 10.0, 0.0, 0.0, 10.0});
  toy.seen = {true, true, false};
  double toy_min = 100.0;
  for (auto dir : {Direction::TextToAudio, Direction::TextToVideo, Direction::TextToAudioVideo,
                   Direction::AudioToVideo, Direction::VideoToAudio}) {
    const auto r = leave_one_out_map(toy, dir, Distance::Euclidean);
    toy_min = std::min({toy_min, r.seen, r.unseen});
  }

  // Untrained random projections of label-free features.
  constexpr std::size_t classes = 4, per_class = 25, n = classes * per_class;
  Rng rng(5);
  DatasetBundle noise;
  noise.dims = {16, 16, 8};
  noise.audio = gaussian(rng, n, 16);
  noise.video = gaussian(rng, n, 16);
  for (std::size_t c = 0; c < classes; ++c) {
    noise.classes.push_back({fmt("c%zu", c), c < 3, prng_fill(rng, 8, Distribution::StandardNormal)});
    for (std::size_t i = 0; i < per_class; ++i)
      noise.examples.push_back({fmt("c%zu_%zu", c, i), fmt("c%zu", c), Split::Test, std::nullopt});
  }
  noise.validate();
  Rng init(9);
  const auto model = ProjectionModel::init(noise.dims, 16, 32, init);
  const auto es = embed_split(model, noise, Split::Test);
  const double observed =
      0.5 * (mean_class_ap(leave_one_out_map(es, Direction::AudioToVideo, Distance::Euclidean)) +
             mean_class_ap(leave_one_out_map(es, Direction::VideoToAudio, Distance::Euclidean)));
  const double prior = 100.0 * random_ranking_ap(n - 1, per_class - 1);
  const double brute_small = random_ranking_ap_brute(12, 4), closed_small = random_ranking_ap(12, 4);
  const bool formula_ok = std::abs(brute_small - closed_small) < 1e-12;
  const bool ok = toy_min == 100.0 && formula_ok && std::abs(observed - prior) <= 0.2 * prior;
  return {ok, fmt("clustered fixture mAP %.2f; random-projection mAP %.2f vs prior %.2f (brute-force check %s)",
                  toy_min, observed, prior, formula_ok ? "ok" : "MISMATCH")};
}

Outcome criterion8() {
  const fs::path dir = g_scratch / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string data = (dir / "data").string();
  if (run_cli("gen-synth --out \"" + data + "\" --per-class 60") != 0) return {false, "gen-synth failed"};
  for (const char* tag : {"a", "b"}) {
    const std::string ckpt = (dir / (std::string(tag) + ".ckpt")).string();
    if (run_cli("train --data \"" + data + "\" --out \"" + ckpt + "\" --epochs 4 --seed 3 --attention") != 0)
      return {false, "train failed"};
  }
  const bool same_ckpt = slurp(dir / "a.ckpt") == slurp(dir / "b.ckpt") && !slurp(dir / "a.ckpt").empty();
  const bool same_log = slurp(dir / "a.ckpt.log.tsv") == slurp(dir / "b.ckpt.log.tsv");

  bool same_reports = true;
  for (const std::string sub : {"eval classify --beta auto --modality select", "eval retrieve"}) {
    std::string first;
    for (int threads : {1, 4}) {
      const auto out = dir / fmt("report_%d.tsv", threads);
      if (run_cli(sub + " --data \"" + data + "\" --model \"" + (dir / "a.ckpt").string() + "\" --threads " +
                  std::to_string(threads) + " --out \"" + out.string() + "\"") != 0)
        return {false, "eval failed: " + sub};
      const std::string text = slurp(out) + slurp(out.string() + ".txt");
      if (threads == 1) first = text;
      else same_reports = same_reports && text == first && !text.empty();
    }
  }
  return {same_ckpt && same_log && same_reports,
          fmt("checkpoints %s, logs %s, reports across --threads %s", same_ckpt ? "identical" : "DIFFER",
              same_log ? "identical" : "DIFFER", same_reports ? "identical" : "DIFFER")};
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 3) {
    std::fprintf(stderr, "usage: %s <cjme-cli> <scratch-dir>\n", argv[0]);
    return 2;
  }
  g_cli = argv[1];
  g_scratch = argv[2];
  fs::create_directories(g_scratch);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"1 gradient correctness", criterion1},   {"2 metric oracles", criterion2},
      {"3 bias-sweep monotonicity", criterion3}, {"4 synthetic GZSL", criterion4},
      {"5 loss ablation", criterion5},           {"6 attention sanity", criterion6},
      {"7 GCCA fixtures", criterion7},           {"8 determinism", criterion8},
      {"9 retrieval protocol", criterion9},
  };
  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
