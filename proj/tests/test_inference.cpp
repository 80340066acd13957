#include "cjme/error.hpp"
#include "cjme/inference.hpp"
#include "doctest.h"

using namespace cjme;

TEST_CASE("embed_example fixtures") {
  Rng rng(1);
  auto model = ProjectionModel::init({3, 3, 2}, 3, 4, rng);
  model.normalize = false;
  Vec a{0.5, -1.0, 2.0}, v{1.0, 0.0, -0.5};
  auto e1 = embed_example(model, a, v), e2 = embed_example(model, a, v);
  CHECK(e1.audio == e2.audio);
  CHECK(e1.video == e2.video);

  auto zero = model.zeros_like();
  auto z = embed_example(zero, a, v);
  CHECK(z.audio == Vec{0, 0, 0});
  CHECK(z.video == Vec{0, 0, 0});

  ProjectionModel id;
  id.audio = Mlp({DenseLayer{Matrix::identity(3), Vec(3, 0.0)}});
  id.video = id.audio;
  id.text = id.audio;
  auto e = embed_example(id, a, v);
  CHECK(e.audio == a);
  CHECK(e.video == v);

  CHECK_THROWS_AS(embed_example(model, Vec{1, 2}, v), ShapeError);
}

TEST_CASE("gzsl_classify calibrated stacking") {
  Matrix classes(2, 1, {1.0, 1.2});
  std::vector<bool> seen{true, false};
  EmbeddedExample x{{0.0}, {0.0}};
  CHECK(gzsl_classify(x, classes, seen, Modality::Audio, 0.0, Distance::Euclidean).predicted == 0);
  auto r = gzsl_classify(x, classes, seen, Modality::Audio, 0.3, Distance::Euclidean);
  CHECK(r.predicted == 1);
  CHECK(r.penalized[0] == doctest::Approx(1.3));
  CHECK(r.distances[0] == doctest::Approx(1.0));
}

TEST_CASE("both-mode uses the summed distance") {
  Matrix classes(3, 2, {0, 0, 4, 0, 0, 4});
  std::vector<bool> seen{true, true, false};
  EmbeddedExample x{{3.0, 0.0}, {0.0, 1.0}};
  auto d = class_distances(x, classes, Modality::Both, Distance::Euclidean);
  CHECK(d[0] == doctest::Approx(3.0 + 1.0));
  auto r = gzsl_classify(x, classes, seen, Modality::Both, 0.0, Distance::Euclidean);
  std::size_t expect = 0;
  for (std::size_t c = 1; c < 3; ++c)
    if (d[c] < d[expect]) expect = c;
  CHECK(r.predicted == expect);
}

TEST_CASE("large beta predicts only unseen classes") {
  Rng rng(2);
  Matrix classes(5, 3, prng_fill(rng, 15, Distribution::StandardNormal));
  std::vector<bool> seen{true, true, false, true, false};
  for (int i = 0; i < 50; ++i) {
    EmbeddedExample x{prng_fill(rng, 3, Distribution::StandardNormal), prng_fill(rng, 3, Distribution::StandardNormal)};
    auto d = class_distances(x, classes, Modality::Both, Distance::Euclidean);
    const double spread = *std::max_element(d.begin(), d.end()) - *std::min_element(d.begin(), d.end());
    auto r = gzsl_classify(x, classes, seen, Modality::Both, spread + 1e-9, Distance::Euclidean);
    CHECK_FALSE(seen[r.predicted]);
  }
}

TEST_CASE("unseen prediction is an up-set in beta") {
  Rng rng(3);
  Matrix classes(6, 2, prng_fill(rng, 12, Distribution::StandardNormal));
  std::vector<bool> seen{true, false, true, false, true, true};
  for (int i = 0; i < 100; ++i) {
    EmbeddedExample x{prng_fill(rng, 2, Distribution::StandardNormal), prng_fill(rng, 2, Distribution::StandardNormal)};
    auto d = class_distances(x, classes, Modality::Video, Distance::Euclidean);
    bool unseen_before = false;
    for (double beta = 0.0; beta < 5.0; beta += 0.05) {
      const bool unseen = !seen[penalized_argmin(d, seen, beta)];
      CHECK((unseen || !unseen_before));
      unseen_before = unseen;
    }
  }
}

TEST_CASE("ties go to the lowest class index") {
  std::vector<bool> seen{true, true, false};
  CHECK(penalized_argmin(Vec{1.0, 1.0, 2.0}, seen, 0.0) == 0);
  CHECK(penalized_argmin(Vec{1.0, 1.0, 1.5}, seen, 0.5) == 0);
  CHECK(penalized_argmin(Vec{2.0, 1.0, 1.0}, std::vector<bool>{false, false, false}, 0.0) == 1);
  CHECK_THROWS(gzsl_classify({{0.0}, {0.0}}, Matrix(0, 1), {}, Modality::Audio, 0.0, Distance::Euclidean));
}

TEST_CASE("modality selection") {
  CHECK(select_modality(0.9, 0.7, AlphaPolarity::Literal) == Modality::Video);
  CHECK(select_modality(0.1, 0.7, AlphaPolarity::Literal) == Modality::Audio);
  CHECK(select_modality(0.6, 0.7, AlphaPolarity::Literal) == Modality::Both);
  CHECK(select_modality(0.9, 0.7, AlphaPolarity::Inverted) == Modality::Audio);
  CHECK(select_modality(0.1, 0.7, AlphaPolarity::Inverted) == Modality::Video);
  CHECK(select_modality(0.35, 0.7, AlphaPolarity::Inverted) == Modality::Both);

  InferenceConfig cfg;
  cfg.attention_threshold = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.attention_threshold = 1.0;
  cfg.validate();
  cfg.beta = -0.1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("gallery ranking") {
  Matrix gallery(3, 2, {1, 0, 0, 0, 2, 0});
  auto r = rank_gallery(Vec{0, 0}, gallery, gallery, Direction::TextToAudio, Distance::Euclidean);
  CHECK(r.order == std::vector<std::size_t>{1, 0, 2});
  CHECK(r.scores[0] == 0.0);
  CHECK(r.scores[1] == 1.0);

  auto av = rank_gallery(Vec{0, 0}, gallery, gallery, Direction::TextToAudioVideo, Distance::Euclidean);
  CHECK(av.order == r.order);

  Matrix other(3, 2, {0, 3, 0, 0, 0, 1});
  auto mixed = rank_gallery(Vec{0, 0}, gallery, other, Direction::TextToAudioVideo, Distance::Euclidean);
  CHECK(mixed.scores[0] == 0.0);
  CHECK(mixed.order == std::vector<std::size_t>{1, 2, 0});
  CHECK(mixed.scores[1] == doctest::Approx(1.5));

  Matrix ties(3, 1, {1.0, -1.0, 1.0});
  CHECK(rank_gallery(Vec{0}, ties, ties, Direction::AudioToVideo, Distance::Euclidean).order ==
        std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(rank_gallery(Vec{0, 0, 0}, gallery, gallery, Direction::AudioToVideo, Distance::Euclidean),
                  ShapeError);
}

TEST_CASE("direction and modality parsing") {
  CHECK(parse_direction("t2av") == Direction::TextToAudioVideo);
  CHECK(parse_direction("v2a") == Direction::VideoToAudio);
  CHECK_FALSE(parse_direction("a2t").has_value());
  CHECK(parse_modality_mode("select") == ModalityMode::Select);
  CHECK_FALSE(parse_modality_mode("text").has_value());
  CHECK(std::string(to_string(Direction::AudioToVideo)) == "a2v");
}
