#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "cjme/dataio.hpp"
#include "cjme/objective.hpp"
#include "cjme/projector.hpp"

namespace cjme {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  Dims dims;
  ProjectionModel projection;
  std::optional<AttentionModel> attention;
  ObjectiveConfig objective;
  std::uint64_t seed = 0;

  std::size_t embed_dim() const { return projection.embed_dim(); }
  // Throws ShapeError on any inconsistency between dims and tensors.
  void validate() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

// Layout (all little endian):
//   "CJME" u32 version
//   u32 Da, Dv, Dt, D, audio hidden, video hidden, attention hidden (0 = none)
//   u32 flags: bit0 normalize embeddings, bit1 attention on projected input
//   tensors as (u32 rows, u32 cols, rows*cols f64), in order
//     g_audio W1 b1 W2 b2, g_video W1 b1 W2 b2, g_text W b, [f_attn W1 b1 W2 b2]
//   f64 margin lambda gamma alpha_video alpha_audio xi eps_dist (xi NaN = default)
//   u32 distance, u32 polarity
//   u64 seed
void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::vector<unsigned char> bytes);

}  // namespace cjme
