#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cjme/objective.hpp"

namespace cjme {

struct GradCheckEntry {
  std::string mode;     // "no-attention" / "with-attention"
  std::string network;  // g_audio, g_video, g_text, f_attn
  std::size_t parameters = 0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::uint64_t seed = 0;
  std::vector<GradCheckEntry> entries;
  std::size_t fixture_attempts = 0;  // re-draws needed to stay clear of hinge/ReLU kinks

  double max_rel_error() const;
};

struct GradCheckOptions {
  double step = 1e-6;
  // A fixture is redrawn while any active hinge argument or hidden
  // pre-activation lies closer than this to its kink.
  double kink_clearance = 1e-4;
  Distance distance = Distance::Euclidean;
  AlphaPolarity polarity = AlphaPolarity::Literal;
  AttentionInput attention_input = AttentionInput::Raw;
  bool normalize = false;
};

// Small random networks (widths <= 16) and data; compares analytic gradients
// of the full objective, with and without attention, to central differences.
// Relative error is |analytic - numeric| / max(1, |numeric|). Attention labels
// are frozen at the base point so the numeric derivative sees the same
// labelling.
GradCheckReport grad_check(std::uint64_t seed, const GradCheckOptions& opts = {});

}  // namespace cjme
