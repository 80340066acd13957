#include "cjme/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "cjme/binary_io.hpp"
#include "cjme/error.hpp"

namespace cjme {

namespace {

void expect_shape(const Matrix& m, std::size_t rows, std::size_t cols, const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    std::ostringstream os;
    os << "checkpoint tensor " << what << " is " << m.rows() << "x" << m.cols() << ", expected " << rows << "x"
       << cols;
    throw ShapeError(os.str());
  }
}

void expect_layers(const Mlp& net, std::span<const std::size_t> widths, const std::string& name) {
  const auto& layers = net.layers();
  if (layers.size() + 1 != widths.size()) throw ShapeError(name + ": wrong number of layers");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string w = name + ".layer" + std::to_string(i) + ".weight";
    const std::string b = name + ".layer" + std::to_string(i) + ".bias";
    expect_shape(layers[i].weight, widths[i + 1], widths[i], w.c_str());
    if (layers[i].bias.size() != widths[i + 1]) throw ShapeError("checkpoint tensor " + b + " has wrong length");
  }
}

std::size_t hidden_of(const Mlp& net) { return net.layers().size() > 1 ? net.layers()[0].weight.rows() : 0; }

}  // namespace

void Checkpoint::validate() const {
  const std::size_t d = projection.text.layers().empty() ? 0 : projection.text.output_width();
  if (d == 0) throw ShapeError("checkpoint has no text projection");
  const std::size_t ha = hidden_of(projection.audio), hv = hidden_of(projection.video);
  const std::size_t aw[] = {dims.audio, ha, d};
  const std::size_t vw[] = {dims.video, hv, d};
  const std::size_t tw[] = {dims.text, d};
  expect_layers(projection.audio, aw, "g_audio");
  expect_layers(projection.video, vw, "g_video");
  expect_layers(projection.text, tw, "g_text");
  if (attention) {
    const std::size_t in = attention->input == AttentionInput::Raw ? dims.audio + dims.video : 2 * d;
    const std::size_t w[] = {in, hidden_of(attention->net), 1};
    expect_layers(attention->net, w, "f_attn");
  }
}

std::vector<unsigned char> encode_checkpoint(const Checkpoint& c) {
  c.validate();
  bin::Writer w;
  w.magic("CJME");
  w.u32(c.version);
  w.u32(static_cast<std::uint32_t>(c.dims.audio));
  w.u32(static_cast<std::uint32_t>(c.dims.video));
  w.u32(static_cast<std::uint32_t>(c.dims.text));
  w.u32(static_cast<std::uint32_t>(c.embed_dim()));
  w.u32(static_cast<std::uint32_t>(hidden_of(c.projection.audio)));
  w.u32(static_cast<std::uint32_t>(hidden_of(c.projection.video)));
  w.u32(static_cast<std::uint32_t>(c.attention ? hidden_of(c.attention->net) : 0));
  std::uint32_t flags = 0;
  if (c.projection.normalize) flags |= 1u;
  if (c.attention && c.attention->input == AttentionInput::Projected) flags |= 2u;
  w.u32(flags);
  auto put = [&](const Mlp& net) {
    for (const auto& l : net.layers()) {
      w.tensor(l.weight);
      w.vector(l.bias);
    }
  };
  put(c.projection.audio);
  put(c.projection.video);
  put(c.projection.text);
  if (c.attention) put(c.attention->net);
  const auto& o = c.objective;
  for (double v : {o.margin, o.lambda, o.gamma, o.alpha_video, o.alpha_audio,
                   o.xi ? *o.xi : std::numeric_limits<double>::quiet_NaN(), o.eps_dist})
    w.f64(v);
  w.u32(static_cast<std::uint32_t>(o.distance));
  w.u32(static_cast<std::uint32_t>(o.polarity));
  w.u64(c.seed);
  return w.bytes();
}

Checkpoint decode_checkpoint(std::vector<unsigned char> bytes) {
  bin::Reader r(std::move(bytes));
  r.expect_magic("CJME");
  Checkpoint c;
  c.version = r.u32();
  if (c.version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " + std::to_string(c.version));
  c.dims.audio = r.u32();
  c.dims.video = r.u32();
  c.dims.text = r.u32();
  const std::size_t d = r.u32();
  const std::size_t ha = r.u32(), hv = r.u32(), hattn = r.u32();
  const std::uint32_t flags = r.u32();
  if (d == 0 || ha == 0 || hv == 0) throw ShapeError("checkpoint header has zero embedding or hidden width");

  auto get = [&](std::size_t layers) {
    std::vector<DenseLayer> out;
    for (std::size_t i = 0; i < layers; ++i) {
      DenseLayer l;
      l.weight = r.tensor();
      l.bias = r.vector();
      out.push_back(std::move(l));
    }
    return out;
  };
  auto audio = get(2), video = get(2), text = get(1);
  std::optional<std::vector<DenseLayer>> attn;
  if (hattn > 0) attn = get(2);

  // Check header-declared shapes before the Mlp constructor sees the layers.
  const std::size_t attn_in = (flags & 2u) ? 2 * d : c.dims.audio + c.dims.video;
  auto check = [](const std::vector<DenseLayer>& layers, std::initializer_list<std::size_t> widths,
                  const std::string& name) {
    std::vector<std::size_t> w(widths);
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const std::string t = name + ".layer" + std::to_string(i);
      expect_shape(layers[i].weight, w[i + 1], w[i], (t + ".weight").c_str());
      if (layers[i].bias.size() != w[i + 1]) throw ShapeError("checkpoint tensor " + t + ".bias has wrong length");
    }
  };
  check(audio, {c.dims.audio, ha, d}, "g_audio");
  check(video, {c.dims.video, hv, d}, "g_video");
  check(text, {c.dims.text, d}, "g_text");
  if (attn) check(*attn, {attn_in, hattn, 1}, "f_attn");

  c.projection.audio = Mlp(std::move(audio));
  c.projection.video = Mlp(std::move(video));
  c.projection.text = Mlp(std::move(text));
  c.projection.normalize = (flags & 1u) != 0;
  if (attn) c.attention = AttentionModel{Mlp(std::move(*attn)), (flags & 2u) ? AttentionInput::Projected : AttentionInput::Raw};

  auto& o = c.objective;
  o.margin = r.f64();
  o.lambda = r.f64();
  o.gamma = r.f64();
  o.alpha_video = r.f64();
  o.alpha_audio = r.f64();
  const double xi = r.f64();
  if (!std::isnan(xi)) o.xi = xi;
  o.eps_dist = r.f64();
  const std::uint32_t dist = r.u32(), pol = r.u32();
  if (dist > 1 || pol > 1) throw FormatError("checkpoint has an unknown distance or polarity code");
  o.distance = static_cast<Distance>(dist);
  o.polarity = static_cast<AlphaPolarity>(pol);
  c.seed = r.u64();
  if (!r.at_end()) throw FormatError("trailing bytes after checkpoint payload");
  c.validate();
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(bin::read_file(path)); }

}  // namespace cjme
