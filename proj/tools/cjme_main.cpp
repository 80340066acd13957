// cjme: synthetic data generation, training, GZSL evaluation, bias sweeps,
// GCCA baseline and gradient checks.
//
// Exit status: 0 success, 1 failed check, 2 invalid configuration or input,
// 3 numeric blow-up.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cjme/checkpoint.hpp"
#include "cjme/dataio.hpp"
#include "cjme/error.hpp"
#include "cjme/evalkit.hpp"
#include "cjme/gcca.hpp"
#include "cjme/gradcheck.hpp"
#include "cjme/inference.hpp"
#include "cjme/training.hpp"

namespace {

using namespace cjme;

struct Options {
  // shared
  std::string data, model, out;
  std::size_t threads = 1;
  std::string split = "test";
  // gen-synth
  SynthConfig synth;
  // train
  TrainConfig train;
  std::string distance = "euclidean";
  std::string polarity;
  std::optional<double> xi;
  bool attention = false;
  bool no_attention = false;
  std::string attention_input = "raw";
  // eval
  std::optional<double> threshold;
  std::string modality = "both";
  std::string beta = "0";
  std::vector<std::string> directions;
  bool pretrained = false;
  // gcca
  std::size_t components = 8;
  double reg = 1e-3;
  // gradcheck
  std::uint64_t seed = 1;
  std::size_t seeds = 10;
};

Split parse_split(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw ConfigError("unknown split '" + s + "'");
}

Distance parse_distance(const std::string& s) {
  if (s == "euclidean") return Distance::Euclidean;
  if (s == "sq-euclidean") return Distance::SquaredEuclidean;
  throw ConfigError("unknown distance '" + s + "'");
}

AlphaPolarity parse_polarity(const std::string& s) {
  if (s == "literal") return AlphaPolarity::Literal;
  if (s == "inverted") return AlphaPolarity::Inverted;
  throw ConfigError("unknown alpha polarity '" + s + "'");
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + path + "'");
  out << text;
}

int run_gen_synth(const Options& o) {
  if (o.out.empty()) throw ConfigError("--out DIR is required");
  auto bundle = gen_synthetic(o.synth);
  write_dataset(bundle, o.out);
  std::printf("wrote %zu examples, %zu classes to %s\n", bundle.examples.size(), bundle.classes.size(), o.out.c_str());
  return 0;
}

int run_train(Options o) {
  if (o.data.empty() || o.out.empty()) throw ConfigError("--data and --out are required");
  if (o.attention && o.no_attention) throw ConfigError("--attention and --no-attention are mutually exclusive");
  if (o.no_attention && o.threshold) throw ConfigError("--attention-threshold conflicts with --no-attention");
  o.train.attention = o.attention;
  o.train.objective.distance = parse_distance(o.distance);
  if (!o.polarity.empty()) o.train.objective.polarity = parse_polarity(o.polarity);
  o.train.objective.xi = o.xi;
  if (o.attention_input == "raw") o.train.attention_input = AttentionInput::Raw;
  else if (o.attention_input == "projected") o.train.attention_input = AttentionInput::Projected;
  else throw ConfigError("unknown attention input '" + o.attention_input + "'");
  o.train.validate();

  auto data = load_dataset(o.data);
  std::ostringstream log;
  log << "epoch\tL_TA\tL_TV\tL_AV\tCE_alpha\ttotal\n";
  auto result = train(data, o.train, [&](const EpochLog& e) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "%zu\t%.6f\t%.6f\t%.6f\t%.6f\t%.6f\n", e.epoch, e.triplet_audio, e.triplet_video,
                  e.alignment, e.attention_ce, e.total);
    log << buf;
    std::fputs(buf, stdout);
    std::fflush(stdout);
  });
  save_checkpoint(result.checkpoint, o.out);
  write_text(o.out + ".log.tsv", log.str());
  return 0;
}

InferenceConfig inference_config(const Options& o, const Checkpoint& ckpt) {
  InferenceConfig cfg;
  auto mode = parse_modality_mode(o.modality);
  if (!mode) throw ConfigError("unknown modality '" + o.modality + "'");
  cfg.modality = *mode;
  cfg.polarity = o.polarity.empty() ? ckpt.objective.polarity : parse_polarity(o.polarity);
  if (o.threshold) cfg.attention_threshold = *o.threshold;
  if (cfg.modality == ModalityMode::Select && !ckpt.attention)
    throw ConfigError("--modality select needs a checkpoint trained with --attention");
  cfg.validate();
  return cfg;
}

int run_eval_classify(const Options& o) {
  if (o.data.empty() || o.model.empty()) throw ConfigError("--data and --model are required");
  auto data = load_dataset(o.data);
  auto ckpt = load_checkpoint(o.model);
  if (ckpt.dims != data.dims) throw ShapeError("checkpoint dimensions do not match the dataset");
  auto cfg = inference_config(o, ckpt);
  const Split split = parse_split(o.split);

  double beta = 0.0;
  std::string sweep_note;
  if (o.beta == "auto") {
    auto val = score_split(ckpt, data, Split::Val, cfg, o.threads);
    auto sweep = sweep_bias(val, 25);
    beta = sweep.best_beta();
    char buf[128];
    std::snprintf(buf, sizeof buf, "beta chosen on val: %.6f (val HM %.2f)\n", beta, sweep.grid[sweep.best].hm);
    sweep_note = buf;
  } else {
    std::size_t pos = 0;
    try {
      beta = std::stod(o.beta, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != o.beta.size()) throw ConfigError("--beta must be a number or 'auto'");
  }
  cfg.beta = beta;
  cfg.validate();
  auto table = score_split(ckpt, data, split, cfg, o.threads);
  auto report = evaluate_scores(table, beta);
  for (std::size_t c : report.seen_acc.skipped) std::fprintf(stderr, "warning: class %s has no examples in split\n", data.classes[c].name.c_str());
  for (std::size_t c : report.unseen_acc.skipped) std::fprintf(stderr, "warning: class %s has no examples in split\n", data.classes[c].name.c_str());

  std::string text = sweep_note + format_classification_table(report, data, o.modality);
  std::fputs(text.c_str(), stdout);
  if (!o.out.empty()) {
    std::ostringstream tsv;
    write_metric_row(tsv, "mAcc", "classify-" + o.modality, report.seen, report.unseen, report.hm);
    write_text(o.out, tsv.str());
    write_text(o.out + ".txt", text);
  }
  return 0;
}

std::vector<Direction> parse_directions(const std::vector<std::string>& names) {
  std::vector<Direction> out;
  if (names.empty())
    return {Direction::TextToAudio, Direction::TextToVideo, Direction::TextToAudioVideo, Direction::AudioToVideo,
            Direction::VideoToAudio};
  for (const auto& n : names) {
    auto d = parse_direction(n);
    if (!d) throw ConfigError("unknown direction '" + n + "'");
    out.push_back(*d);
  }
  return out;
}

int report_retrieval(const Options& o, const DatasetBundle& data, const EmbeddedSplit& es,
                     const std::vector<Direction>& dirs, Distance kind) {
  std::vector<RetrievalReport> reports;
  for (auto d : dirs) {
    reports.push_back(leave_one_out_map(es, d, kind, o.threads));
    for (std::size_t c : reports.back().skipped)
      std::fprintf(stderr, "warning: %s: class %s skipped (too few examples in split)\n", to_string(d),
                   data.classes[c].name.c_str());
  }
  auto text = format_retrieval_table(reports, data);
  std::fputs(text.c_str(), stdout);
  if (!o.out.empty()) {
    std::ostringstream tsv;
    for (const auto& r : reports) write_metric_row(tsv, "mAP", to_string(r.direction), r.seen, r.unseen, r.hm);
    write_text(o.out, tsv.str());
    write_text(o.out + ".txt", text);
  }
  return 0;
}

int run_eval_retrieve(const Options& o) {
  if (o.data.empty()) throw ConfigError("--data is required");
  const auto dirs = parse_directions(o.directions);
  auto data = load_dataset(o.data);
  const Split split = parse_split(o.split);
  if (o.pretrained) {
    auto es = pretrained_split(data, split);
    for (auto d : dirs)
      if ((d == Direction::TextToAudio || d == Direction::TextToVideo || d == Direction::TextToAudioVideo) &&
          data.dims.text != data.dims.audio)
        throw ShapeError(std::string("pre-trained baseline cannot run ") + to_string(d) +
                         ": text and audio/video widths differ");
    return report_retrieval(o, data, es, dirs, parse_distance(o.distance));
  }
  if (o.model.empty()) throw ConfigError("--model is required (or use --pretrained)");
  auto ckpt = load_checkpoint(o.model);
  if (ckpt.dims != data.dims) throw ShapeError("checkpoint dimensions do not match the dataset");
  auto es = embed_split(ckpt.projection, data, split, o.threads);
  return report_retrieval(o, data, es, dirs, ckpt.objective.distance);
}

int run_sweep(const Options& o) {
  if (o.data.empty() || o.model.empty()) throw ConfigError("--data and --model are required");
  auto data = load_dataset(o.data);
  auto ckpt = load_checkpoint(o.model);
  if (ckpt.dims != data.dims) throw ShapeError("checkpoint dimensions do not match the dataset");
  auto cfg = inference_config(o, ckpt);
  auto table = score_split(ckpt, data, parse_split(o.split), cfg, o.threads);
  auto sweep = sweep_bias(table, 25);
  std::ostringstream tsv;
  write_sweep_tsv(tsv, sweep);
  std::fputs("beta\tS\tU\tHM\n", stdout);
  std::fputs(tsv.str().c_str(), stdout);
  std::printf("best beta %.6f (HM %.2f)\n", sweep.best_beta(), sweep.grid[sweep.best].hm);
  if (!o.out.empty()) write_text(o.out, tsv.str());
  return 0;
}

int run_gcca(const Options& o) {
  if (o.data.empty()) throw ConfigError("--data is required");
  auto data = load_dataset(o.data);
  auto model = fit_gcca(gcca_views(data, Split::Train), o.components, o.reg);
  if (!o.model.empty()) save_gcca(model, o.model);
  std::printf("canonical correlations:");
  for (double c : model.correlations) std::printf(" %.4f", c);
  std::printf("\n");
  auto es = gcca_embed_split(model, data, parse_split(o.split));
  return report_retrieval(o, data, es, parse_directions(o.directions), parse_distance(o.distance));
}

int run_gradcheck(const Options& o) {
  double worst = 0.0;
  for (std::size_t s = 0; s < o.seeds; ++s) {
    auto report = grad_check(o.seed + s);
    for (const auto& e : report.entries)
      std::printf("seed %llu\t%s\t%s\t%zu params\tmax rel err %.3e\n", static_cast<unsigned long long>(report.seed),
                  e.mode.c_str(), e.network.c_str(), e.parameters, e.max_rel_error);
    worst = std::max(worst, report.max_rel_error());
  }
  const bool ok = worst < 1e-5;
  std::printf("worst relative error %.3e: %s\n", worst, ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Coordinated joint multimodal embeddings for audio-visual GZSL"};
  app.require_subcommand(1);

  auto add_model_flags = [&](CLI::App* cmd) {
    cmd->add_option("--embed-dim", o.train.embed_dim, "Joint embedding width");
    cmd->add_option("--hidden", o.train.hidden, "Hidden width of the audio/video projectors");
    cmd->add_option("--margin", o.train.objective.margin, "Triplet margin");
    cmd->add_option("--lambda", o.train.objective.lambda, "Audio-video alignment weight");
    cmd->add_option("--gamma", o.train.objective.gamma, "Triplet block weight");
    cmd->add_option("--xi", o.xi, "Entropy threshold for attention labels");
    cmd->add_option("--epochs", o.train.epochs, "Training epochs");
    cmd->add_option("--batch", o.train.batch, "Batch size");
    cmd->add_option("--lr", o.train.lr, "Adam learning rate");
    cmd->add_option("--seed", o.train.seed, "Random seed");
    cmd->add_flag("--attention", o.attention, "Train the modality attention network");
    cmd->add_flag("--no-attention", o.no_attention, "Train without attention (default)");
    cmd->add_option("--attention-input", o.attention_input, "raw|projected");
    cmd->add_flag("--normalize,!--no-normalize", o.train.normalize, "l2-normalise embeddings (default on)");
  };
  auto add_inference_flags = [&](CLI::App* cmd) {
    cmd->add_option("--data", o.data, "Dataset directory")->required();
    cmd->add_option("--model", o.model, "Checkpoint file");
    cmd->add_option("--out", o.out, "Report path (TSV; a .txt table is written alongside)");
    cmd->add_option("--split", o.split, "val|test");
    cmd->add_option("--threads", o.threads, "Worker threads");
  };

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset directory");
  gen->add_option("--out", o.out, "Output directory")->required();
  gen->add_option("--classes", o.synth.num_classes);
  gen->add_option("--unseen", o.synth.num_unseen);
  gen->add_option("--per-class", o.synth.per_class);
  gen->add_option("--audio-dim", o.synth.audio_dim);
  gen->add_option("--video-dim", o.synth.video_dim);
  gen->add_option("--text-dim", o.synth.text_dim);
  gen->add_option("--latent-dim", o.synth.latent_dim);
  gen->add_option("--dominant-fraction", o.synth.audio_dominant_fraction);
  gen->add_option("--noise", o.synth.noise_scale);
  gen->add_option("--seed", o.synth.seed);

  auto* tr = app.add_subcommand("train", "Train projection (and attention) networks");
  tr->add_option("--data", o.data, "Dataset directory")->required();
  tr->add_option("--out", o.out, "Checkpoint output file")->required();
  tr->add_option("--distance", o.distance, "euclidean|sq-euclidean");
  tr->add_option("--alpha-polarity", o.polarity, "literal|inverted");
  tr->add_option("--attention-threshold", o.threshold, "Not used in training; rejected with --no-attention");
  add_model_flags(tr);

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint");
  ev->require_subcommand(1);
  auto* cls = ev->add_subcommand("classify", "GZSL classification (mAcc, S/U/HM)");
  add_inference_flags(cls);
  cls->add_option("--modality", o.modality, "audio|video|both|select");
  cls->add_option("--beta", o.beta, "Seen-class penalty, or 'auto' for the val sweep");
  cls->add_option("--attention-threshold", o.threshold);
  cls->add_option("--alpha-polarity", o.polarity, "literal|inverted (default: checkpoint)");
  auto* ret = ev->add_subcommand("retrieve", "Leave-one-out retrieval mAP");
  add_inference_flags(ret);
  ret->add_option("--direction", o.directions, "t2a|t2v|t2av|a2v|v2a (repeatable; default all)");
  ret->add_flag("--pretrained", o.pretrained, "Use raw features (pre-trained baseline)");
  ret->add_option("--distance", o.distance, "Distance for --pretrained");

  auto* sw = app.add_subcommand("sweep-bias", "25-point calibrated-stacking sweep");
  add_inference_flags(sw);
  sw->add_option("--modality", o.modality, "audio|video|both|select");
  sw->add_option("--attention-threshold", o.threshold);
  sw->add_option("--alpha-polarity", o.polarity);

  auto* gc = app.add_subcommand("gcca", "Fit the GCCA baseline on train and report retrieval");
  gc->add_option("--data", o.data, "Dataset directory")->required();
  gc->add_option("--model", o.model, "Where to save the fitted GCCA model");
  gc->add_option("--out", o.out, "Retrieval report path");
  gc->add_option("--components", o.components, "Shared dimensions k");
  gc->add_option("--reg", o.reg, "Relative ridge regularizer");
  gc->add_option("--split", o.split, "Evaluation split");
  gc->add_option("--direction", o.directions);
  gc->add_option("--distance", o.distance);
  gc->add_option("--threads", o.threads);

  auto* gr = app.add_subcommand("gradcheck", "Analytic vs finite-difference gradients");
  gr->add_option("--seed", o.seed, "First seed");
  gr->add_option("--seeds", o.seeds, "Number of seeds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*gen) return run_gen_synth(o);
    if (*tr) return run_train(o);
    if (*cls) return run_eval_classify(o);
    if (*ret) return run_eval_retrieve(o);
    if (*sw) return run_sweep(o);
    if (*gc) return run_gcca(o);
    if (*gr) return run_gradcheck(o);
  } catch (const NumericError& e) {
    std::fprintf(stderr, "numeric error: %s\n", e.what());
    return 3;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "invalid configuration: %s\n", e.what());
    return 2;
  } catch (const ShapeError& e) {
    std::fprintf(stderr, "shape mismatch: %s\n", e.what());
    return 2;
  } catch (const FormatError& e) {
    std::fprintf(stderr, "bad input: %s\n", e.what());
    return 2;
  } catch (const ProtocolError& e) {
    std::fprintf(stderr, "protocol violation: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 2;
}
