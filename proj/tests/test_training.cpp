#include "cjme/error.hpp"
#include "cjme/training.hpp"
#include "doctest.h"

using namespace cjme;

namespace {

DatasetBundle small_bundle() {
  SynthConfig c;
  c.per_class = 20;
  c.audio_dominant_fraction = 0.2;
  return gen_synthetic(c);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden = 16;
  cfg.embed_dim = 8;
  cfg.epochs = 2;
  cfg.attention = true;
  return cfg;
}

}  // namespace

TEST_CASE("zero epochs returns the initialization") {
  const auto data = small_bundle();
  auto cfg = small_config();
  cfg.epochs = 0;
  const auto r = train(data, cfg);
  CHECK(r.log.empty());
  CHECK(r.checkpoint == initial_checkpoint(data.dims, cfg));
}

TEST_CASE("training is deterministic per seed") {
  const auto data = small_bundle();
  auto cfg = small_config();
  const auto a = train(data, cfg), b = train(data, cfg);
  CHECK(a.checkpoint == b.checkpoint);
  REQUIRE(a.log.size() == 2);
  CHECK(a.log[1].total == b.log[1].total);
  cfg.seed = 2;
  CHECK_FALSE(train(data, cfg).checkpoint == a.checkpoint);
}

TEST_CASE("epoch callback sees every epoch") {
  std::size_t calls = 0;
  train(small_bundle(), small_config(), [&](const EpochLog& e) { CHECK(e.epoch == ++calls); });
  CHECK(calls == 2);
}

TEST_CASE("invalid training configs are rejected") {
  auto cfg = small_config();
  cfg.batch = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = small_config();
  cfg.lr = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
