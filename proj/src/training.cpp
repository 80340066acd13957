#include "cjme/training.hpp"

#include <cmath>
#include <sstream>

#include "cjme/error.hpp"

namespace cjme {

void TrainConfig::validate() const {
  objective.validate();
  if (embed_dim == 0 || hidden == 0 || attention_hidden == 0) throw ConfigError("network widths must be positive");
  if (batch == 0) throw ConfigError("batch size must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("learning rate must be > 0");
}

Checkpoint initial_checkpoint(const Dims& dims, const TrainConfig& cfg) {
  cfg.validate();
  Rng rng(cfg.seed);
  Rng init_rng = rng.child(1);
  Checkpoint c;
  c.dims = dims;
  c.projection = ProjectionModel::init(dims, cfg.embed_dim, cfg.hidden, init_rng);
  c.projection.normalize = cfg.normalize;
  if (cfg.attention) {
    const bool raw = cfg.attention_input == AttentionInput::Raw;
    c.attention = AttentionModel::init(raw ? dims.audio : cfg.embed_dim, raw ? dims.video : cfg.embed_dim,
                                       cfg.attention_hidden, cfg.attention_input, init_rng);
  }
  c.objective = cfg.objective;
  c.seed = cfg.seed;
  return c;
}

TrainResult train(const DatasetBundle& data, const TrainConfig& cfg,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  TrainResult result;
  result.checkpoint = initial_checkpoint(data.dims, cfg);
  auto& ckpt = result.checkpoint;

  const auto labels = data.labels();
  const auto seen = data.seen_flags();
  const Matrix text = data.text_matrix();

  const auto train_idx = data.indices_in(Split::Train);
  if (train_idx.empty()) throw ConfigError("training split is empty");
  std::vector<std::vector<std::size_t>> by_class(data.classes.size());
  for (std::size_t i : train_idx) {
    if (!data.classes[labels[i]].seen)
      throw ProtocolError("example '" + data.examples[i].id + "' of an unseen class is in the train split");
    by_class[labels[i]].push_back(i);
  }
  std::vector<std::size_t> populated;
  for (std::size_t c = 0; c < by_class.size(); ++c)
    if (!by_class[c].empty()) populated.push_back(c);
  if (populated.size() < 2) throw ConfigError("training needs examples from at least two seen classes");

  ObjectiveData od{data.audio, data.video, text, labels, seen};
  const ObjectiveMode mode = cfg.attention ? ObjectiveMode::WithAttention : ObjectiveMode::NoAttention;

  Rng root(cfg.seed);
  (void)root.child(1);  // initialisation stream
  Rng order_rng = root.child(2);

  Adam opt_proj(AdamHyper{cfg.lr});
  Adam opt_attn(AdamHyper{cfg.lr});
  auto proj_params = named_parameters(ckpt.projection);
  std::vector<NamedTensor> attn_params;
  if (ckpt.attention) attn_params = named_parameters(*ckpt.attention);

  std::vector<std::size_t> order = train_idx;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    order_rng.shuffle(order);
    EpochLog log;
    log.epoch = epoch;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch) {
      ++step;
      const std::size_t end = std::min(order.size(), start + cfg.batch);
      std::vector<TripletSample> batch;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t anchor = order[k];
        const std::size_t own = labels[anchor];
        std::size_t cls;
        do {
          cls = populated[order_rng.below(populated.size())];
        } while (cls == own);
        const auto& pool = by_class[cls];
        batch.push_back({anchor, pool[order_rng.below(pool.size())]});
      }
      auto res = total_objective(od, batch, ckpt.projection, ckpt.attention ? &*ckpt.attention : nullptr,
                                 cfg.objective, mode);
      if (!std::isfinite(res.terms.total)) {
        std::ostringstream os;
        os << "non-finite loss at epoch " << epoch << ", step " << step;
        throw NumericError(os.str());
      }
      log.triplet_audio += res.terms.triplet_audio;
      log.triplet_video += res.terms.triplet_video;
      log.alignment += res.terms.alignment;
      log.attention_ce += res.terms.attention_ce;
      log.total += res.terms.total;

      try {
        auto gp = gradient_views(res.grad_projection);
        opt_proj.step(proj_params, gp);
        if (ckpt.attention) {
          auto ga = gradient_views(*res.grad_attention);
          opt_attn.step(attn_params, ga);
        }
      } catch (const NumericError& e) {
        std::ostringstream os;
        os << e.what() << " (epoch " << epoch << ", step " << step << ")";
        throw NumericError(os.str());
      }
    }
    const double n = static_cast<double>(order.size());
    log.triplet_audio /= n;
    log.triplet_video /= n;
    log.alignment /= n;
    log.attention_ce /= n;
    log.total /= n;
    result.log.push_back(log);
    if (on_epoch) on_epoch(log);
  }
  return result;
}

}  // namespace cjme
