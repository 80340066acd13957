#include <algorithm>
#include <sstream>

#include "cjme/error.hpp"
#include "cjme/evalkit.hpp"
#include "cjme/training.hpp"
#include "doctest.h"

using namespace cjme;

TEST_CASE("harmonic mean") {
  CHECK(std::abs(harmonic_mean(43.27, 27.11) - 33.34) <= 0.01);
  CHECK(std::abs(harmonic_mean(28.35, 18.35) - 22.22) <= 0.1);
  CHECK(harmonic_mean(12.5, 12.5) == doctest::Approx(12.5));
  CHECK(harmonic_mean(0.0, 0.0) == 0.0);
  CHECK(harmonic_mean(50.0, 0.0) == 0.0);
  Rng rng(1);
  for (int i = 0; i < 100; ++i) {
    const double s = rng.uniform(0, 100), u = rng.uniform(0, 100);
    const double h = harmonic_mean(s, u);
    CHECK(h <= std::max(s, u) + 1e-12);
    CHECK(h >= std::min(s, u) - 1e-12);
    CHECK(h == harmonic_mean(u, s));
  }
}

TEST_CASE("average precision") {
  CHECK(average_precision({true, true}) == 1.0);
  CHECK(average_precision({false, true, false, true}) == 0.5);
  for (std::size_t r = 1; r <= 6; ++r) {
    std::vector<bool> flags(6, false);
    flags[r - 1] = true;
    CHECK(*average_precision(flags) == doctest::Approx(1.0 / static_cast<double>(r)));
  }
  CHECK_FALSE(average_precision({false, false}).has_value());
  CHECK(average_precision({false, true, true}) == average_precision({false, true, true, false, false}));
  CHECK(*average_precision({true, true, false, false}) == 1.0);
  CHECK(*average_precision({true, false, true}) < 1.0);
}

TEST_CASE("mean class accuracy") {
  std::vector<std::size_t> truths{0, 0, 0, 1}, all{0, 1};
  CHECK(mean_class_accuracy(truths, truths, all).percent == 100.0);
  std::vector<std::size_t> preds{0, 0, 0, 0};
  CHECK(mean_class_accuracy(preds, truths, all).percent == 50.0);
  std::vector<std::size_t> with_missing{0, 1, 2};
  auto r = mean_class_accuracy(preds, truths, with_missing);
  CHECK(r.percent == 50.0);
  CHECK(r.skipped == std::vector<std::size_t>{2});

  Rng rng(2);
  constexpr std::size_t c = 5, n = 50000;
  std::vector<std::size_t> rt(n), rp(n), classes{0, 1, 2, 3, 4};
  for (std::size_t i = 0; i < n; ++i) rt[i] = rng.below(c), rp[i] = rng.below(c);
  CHECK(std::abs(mean_class_accuracy(rp, rt, classes).percent - 20.0) < 1.0);
}

TEST_CASE("leave-one-out retrieval on perfect clusters") {
  EmbeddedSplit s;
  s.audio = Matrix(6, 1, {0.0, 0.1, 5.0, 5.1, 9.0, 9.2});
  s.video = s.audio;
  s.labels = {0, 0, 1, 1, 2, 2};
  s.rows = {0, 1, 2, 3, 4, 5};
  s.classes = Matrix(3, 1, {0.0, 5.0, 9.0});
  s.seen = {true, false, true};
  for (auto dir : {Direction::TextToAudio, Direction::TextToVideo, Direction::TextToAudioVideo,
                   Direction::AudioToVideo, Direction::VideoToAudio}) {
    auto r = leave_one_out_map(s, dir, Distance::Euclidean);
    CHECK(r.seen == 100.0);
    CHECK(r.unseen == 100.0);
    CHECK(r.hm == 100.0);
  }
  CHECK(leave_one_out_map(s, Direction::TextToAudio, Distance::Euclidean).queries == 3);
  CHECK(leave_one_out_map(s, Direction::AudioToVideo, Distance::Euclidean).queries == 6);
}

TEST_CASE("retrieval skips classes without another member") {
  EmbeddedSplit s;
  s.audio = Matrix(3, 1, {0.0, 0.1, 7.0});
  s.video = s.audio;
  s.labels = {0, 0, 1};
  s.rows = {0, 1, 2};
  s.classes = Matrix(2, 1, {0.0, 7.0});
  s.seen = {true, false};
  auto r = leave_one_out_map(s, Direction::AudioToVideo, Distance::Euclidean);
  CHECK(r.skipped == std::vector<std::size_t>{1});
  CHECK(r.seen == 100.0);
}

TEST_CASE("one relevant and one irrelevant gallery item ranked correctly") {
  EmbeddedSplit s;
  s.audio = Matrix(4, 1, {0.0, 0.5, 10.0, 10.5});
  s.video = Matrix(4, 1, {0.2, 0.3, 10.1, 10.2});
  s.labels = {0, 0, 1, 1};
  s.rows = {0, 1, 2, 3};
  s.classes = Matrix(2, 1, {0.0, 10.0});
  s.seen = {true, false};
  CHECK(leave_one_out_map(s, Direction::AudioToVideo, Distance::Euclidean).hm == 100.0);
}

namespace {

ScoreTable random_table(std::uint64_t seed) {
  Rng rng(seed);
  ScoreTable t;
  constexpr std::size_t n = 200, c = 6;
  t.distances = Matrix(n, c, prng_fill(rng, n * c, Distribution::Uniform01));
  t.seen = {true, true, true, true, false, false};
  for (std::size_t i = 0; i < n; ++i) t.truths.push_back(i % c);
  t.chosen.assign(n, Modality::Both);
  // Bias distances towards the truth so accuracy is non-trivial.
  for (std::size_t i = 0; i < n; ++i) t.distances(i, t.truths[i]) *= 0.6;
  return t;
}

}  // namespace

TEST_CASE("bias sweep grid") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto t = random_table(seed);
    const auto s = sweep_bias(t, 25);
    REQUIRE(s.grid.size() == 25);
    CHECK(s.grid.front().beta == 0.0);
    CHECK(s.grid.back().beta == max_bias(t));
    const auto unbiased = evaluate_scores(t, 0.0);
    CHECK(s.grid.front().seen == unbiased.seen);
    CHECK(s.grid.front().unseen == unbiased.unseen);
    for (std::size_t k = 1; k < 25; ++k) {
      CHECK(s.grid[k].seen <= s.grid[k - 1].seen);
      CHECK(s.grid[k].unseen >= s.grid[k - 1].unseen);
      CHECK(s.grid[k].unseen_predictions >= s.grid[k - 1].unseen_predictions);
    }
    CHECK(s.grid.back().unseen_predictions == t.truths.size());
    for (const auto& p : s.grid) CHECK(p.hm <= s.grid[s.best].hm);
    CHECK(s.grid[s.best].hm >= s.grid.front().hm);
    for (std::size_t k = 0; k < s.best; ++k) CHECK(s.grid[k].hm < s.grid[s.best].hm);
  }
  CHECK_THROWS_AS(sweep_bias(random_table(1), 1), ConfigError);
}

TEST_CASE("report formats") {
  std::ostringstream row;
  write_metric_row(row, "mAP", "t2a", 43.271, 27.109, 33.3449);
  CHECK(row.str() == "mAP\tt2a\t43.27\t27.11\t33.34\n");
  std::ostringstream sweep;
  SweepResult s;
  s.grid.push_back({0.0, 50.0, 25.0, harmonic_mean(50, 25), 3});
  write_sweep_tsv(sweep, s);
  CHECK(sweep.str() == "0.000000\t50.00\t25.00\t33.33\n");
}

TEST_CASE("parallel evaluation matches serial evaluation") {
  SynthConfig sc;
  sc.per_class = 40;
  const auto data = gen_synthetic(sc);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.hidden = 32;
  cfg.attention = true;
  const auto ckpt = train(data, cfg).checkpoint;
  const auto one = embed_split(ckpt.projection, data, Split::Test, 1);
  const auto many = embed_split(ckpt.projection, data, Split::Test, 5);
  CHECK(one.audio == many.audio);
  CHECK(one.video == many.video);
  for (auto dir : {Direction::TextToAudioVideo, Direction::AudioToVideo}) {
    auto a = leave_one_out_map(one, dir, Distance::Euclidean, 1);
    auto b = leave_one_out_map(one, dir, Distance::Euclidean, 7);
    CHECK(a.per_class == b.per_class);
  }
  InferenceConfig icfg;
  icfg.modality = ModalityMode::Select;
  auto ta = score_split(ckpt, data, Split::Test, icfg, 1);
  auto tb = score_split(ckpt, data, Split::Test, icfg, 3);
  CHECK(ta.distances == tb.distances);
  CHECK(ta.chosen == tb.chosen);

  auto no_attn = ckpt;
  no_attn.attention.reset();
  CHECK_THROWS_AS(score_split(no_attn, data, Split::Test, icfg, 1), ConfigError);
}

TEST_CASE("parallel_for visits each index once") {
  std::vector<int> hits(1000, 0);
  parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));
}
