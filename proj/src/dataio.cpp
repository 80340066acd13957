#include "cjme/dataio.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "cjme/binary_io.hpp"
#include "cjme/error.hpp"

namespace fs = std::filesystem;

namespace cjme {

const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

const char* to_string(Dominant d) {
  switch (d) {
    case Dominant::None: return "none";
    case Dominant::Audio: return "audio";
    case Dominant::Video: return "video";
  }
  return "?";
}

std::vector<std::size_t> DatasetBundle::labels() const {
  std::map<std::string, std::size_t> index;
  for (std::size_t c = 0; c < classes.size(); ++c) index.emplace(classes[c].name, c);
  std::vector<std::size_t> out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    auto it = index.find(ex.class_name);
    if (it == index.end()) throw FormatError("example '" + ex.id + "': unknown class '" + ex.class_name + "'");
    out.push_back(it->second);
  }
  return out;
}

std::size_t DatasetBundle::class_index(const std::string& name) const {
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (classes[c].name == name) return c;
  throw FormatError("unknown class '" + name + "'");
}

std::vector<std::size_t> DatasetBundle::indices_in(Split split) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < examples.size(); ++i)
    if (examples[i].split == split) out.push_back(i);
  return out;
}

std::vector<std::size_t> DatasetBundle::seen_classes() const {
  std::vector<std::size_t> out;
  for (std::size_t c = 0; c < classes.size(); ++c)
    if (classes[c].seen) out.push_back(c);
  return out;
}

std::vector<bool> DatasetBundle::seen_flags() const {
  std::vector<bool> out;
  for (const auto& c : classes) out.push_back(c.seen);
  return out;
}

Matrix DatasetBundle::text_matrix() const {
  Matrix t(classes.size(), dims.text);
  for (std::size_t c = 0; c < classes.size(); ++c)
    std::copy(classes[c].text_embedding.begin(), classes[c].text_embedding.end(), t.row(c).begin());
  return t;
}

void DatasetBundle::validate() const {
  if (dims.audio == 0 || dims.video == 0 || dims.text == 0) throw FormatError("feature dimensions must be positive");
  std::set<std::string> names;
  bool any_seen = false, any_unseen = false;
  for (const auto& c : classes) {
    if (!names.insert(c.name).second) throw FormatError("duplicate class name '" + c.name + "'");
    if (c.text_embedding.size() != dims.text)
      throw FormatError("class '" + c.name + "': text embedding has wrong dimension");
    for (double v : c.text_embedding)
      if (!std::isfinite(v)) throw FormatError("class '" + c.name + "': non-finite text embedding");
    (c.seen ? any_seen : any_unseen) = true;
  }
  if (!any_seen || !any_unseen) throw FormatError("dataset needs at least one seen and one unseen class");
  if (audio.rows() != examples.size() || audio.cols() != dims.audio)
    throw FormatError("audio feature matrix does not match example count and audio_dim");
  if (video.rows() != examples.size() || video.cols() != dims.video)
    throw FormatError("video feature matrix does not match example count and video_dim");
  std::map<std::string, bool> seen_by_name;
  for (const auto& c : classes) seen_by_name.emplace(c.name, c.seen);
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    auto it = seen_by_name.find(ex.class_name);
    if (it == seen_by_name.end())
      throw FormatError("example '" + ex.id + "': unknown class '" + ex.class_name + "'");
    if (ex.split == Split::Train && !it->second)
      throw FormatError("example '" + ex.id + "': train split example of unseen class '" + ex.class_name + "'");
    for (double v : audio.row(i))
      if (!std::isfinite(v)) throw FormatError("example '" + ex.id + "': non-finite audio feature");
    for (double v : video.row(i))
      if (!std::isfinite(v)) throw FormatError("example '" + ex.id + "': non-finite video feature");
  }
}

namespace {

std::vector<std::string> split_on(const std::string& line, char sep) {
  std::vector<std::string> parts;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, sep)) parts.push_back(cur);
  if (!line.empty() && line.back() == sep) parts.emplace_back();
  return parts;
}

std::ifstream open_text(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw FormatError("missing file '" + p.string() + "'");
  return in;
}

std::size_t parse_count(const std::string& s, const std::string& what) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != s.size() || s.empty()) throw FormatError("manifest: bad value for " + what + ": '" + s + "'");
  return static_cast<std::size_t>(v);
}

// Widen float32 text to double exactly.
double parse_f32(const std::string& tok, const std::string& where) {
  char* end = nullptr;
  const float v = std::strtof(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0') throw FormatError(where + ": bad float '" + tok + "'");
  return static_cast<double>(v);
}

std::string format_f32(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", static_cast<double>(static_cast<float>(v)));
  return buf;
}

Matrix read_blob(const fs::path& p, std::size_t rows, std::size_t cols) {
  if (!fs::exists(p)) throw FormatError("missing file '" + p.string() + "'");
  auto bytes = bin::read_file(p.string());
  if (bytes.size() != rows * cols * 4) {
    std::ostringstream os;
    os << "size mismatch in '" << p.filename().string() << "': expected " << rows * cols * 4
       << " bytes (" << rows << " rows x " << cols << " float32), found " << bytes.size();
    throw FormatError(os.str());
  }
  Matrix m(rows, cols);
  for (std::size_t i = 0; i < rows * cols; ++i) {
    std::uint32_t raw = 0;
    for (int b = 3; b >= 0; --b) raw = (raw << 8) | bytes[i * 4 + static_cast<std::size_t>(b)];
    m.data()[i] = static_cast<double>(std::bit_cast<float>(raw));
  }
  return m;
}

void write_blob(const fs::path& p, const Matrix& m) {
  std::vector<unsigned char> bytes;
  bytes.reserve(m.size() * 4);
  for (double v : m.data()) {
    const auto raw = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    for (int b = 0; b < 4; ++b) bytes.push_back(static_cast<unsigned char>(raw >> (8 * b)));
  }
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot write '" + p.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

DatasetBundle load_dataset(const fs::path& dir) {
  DatasetBundle b;
  std::size_t n = 0, num_classes = 0;
  {
    auto in = open_text(dir / "manifest.txt");
    std::map<std::string, std::string> kv;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      auto sp = line.find(' ');
      if (sp == std::string::npos) throw FormatError("manifest: malformed line '" + line + "'");
      auto key = line.substr(0, sp), value = line.substr(sp + 1);
      if (key == "cjme-dataset") {
        if (value != "1") throw FormatError("manifest: unsupported dataset version " + value);
        header = true;
      } else {
        kv[key] = value;
      }
    }
    if (!header) throw FormatError("manifest: missing 'cjme-dataset 1' header");
    for (const char* k : {"num_examples", "audio_dim", "video_dim", "text_dim", "num_classes"})
      if (!kv.count(k)) throw FormatError(std::string("manifest: missing key ") + k);
    n = parse_count(kv["num_examples"], "num_examples");
    b.dims.audio = parse_count(kv["audio_dim"], "audio_dim");
    b.dims.video = parse_count(kv["video_dim"], "video_dim");
    b.dims.text = parse_count(kv["text_dim"], "text_dim");
    num_classes = parse_count(kv["num_classes"], "num_classes");
  }
  {
    auto in = open_text(dir / "classes.tsv");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = split_on(line, '\t');
      const std::string where = "classes.tsv line " + std::to_string(lineno);
      if (f.size() != 3) throw FormatError(where + ": expected 3 tab-separated fields");
      ClassEntry c;
      c.name = f[0];
      if (f[1] == "seen") c.seen = true;
      else if (f[1] == "unseen") c.seen = false;
      else throw FormatError(where + ": seen flag must be 'seen' or 'unseen'");
      std::istringstream vs(f[2]);
      std::string tok;
      while (vs >> tok) c.text_embedding.push_back(parse_f32(tok, where));
      if (c.text_embedding.size() != b.dims.text)
        throw FormatError(where + " (class '" + c.name + "'): text embedding has " +
                          std::to_string(c.text_embedding.size()) + " values, manifest says " +
                          std::to_string(b.dims.text));
      b.classes.push_back(std::move(c));
    }
    if (b.classes.size() != num_classes)
      throw FormatError("classes.tsv has " + std::to_string(b.classes.size()) + " classes, manifest says " +
                        std::to_string(num_classes));
  }
  {
    auto in = open_text(dir / "examples.tsv");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      auto f = split_on(line, '\t');
      const std::string where = "examples.tsv line " + std::to_string(lineno);
      if (f.size() != 3 && f.size() != 4) throw FormatError(where + ": expected 3 or 4 tab-separated fields");
      ExampleRecord ex;
      ex.id = f[0];
      ex.class_name = f[1];
      if (f[2] == "train") ex.split = Split::Train;
      else if (f[2] == "val") ex.split = Split::Val;
      else if (f[2] == "test") ex.split = Split::Test;
      else throw FormatError(where + ": bad split '" + f[2] + "'");
      if (f.size() == 4) {
        if (f[3] == "dominant:audio") ex.dominant = Dominant::Audio;
        else if (f[3] == "dominant:video") ex.dominant = Dominant::Video;
        else if (f[3] == "dominant:none") ex.dominant = Dominant::None;
        else throw FormatError(where + ": bad dominance column '" + f[3] + "'");
      }
      b.examples.push_back(std::move(ex));
    }
    if (b.examples.size() != n)
      throw FormatError("examples.tsv has " + std::to_string(b.examples.size()) + " rows, manifest says " +
                        std::to_string(n));
  }
  b.audio = read_blob(dir / "audio.f32", n, b.dims.audio);
  b.video = read_blob(dir / "video.f32", n, b.dims.video);
  b.validate();
  return b;
}

void write_dataset(const DatasetBundle& b, const fs::path& dir) {
  b.validate();
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "manifest.txt");
    out << "cjme-dataset 1\n"
        << "num_examples " << b.examples.size() << "\n"
        << "audio_dim " << b.dims.audio << "\n"
        << "video_dim " << b.dims.video << "\n"
        << "text_dim " << b.dims.text << "\n"
        << "num_classes " << b.classes.size() << "\n";
  }
  {
    std::ofstream out(dir / "classes.tsv");
    for (const auto& c : b.classes) {
      out << c.name << '\t' << (c.seen ? "seen" : "unseen") << '\t';
      for (std::size_t i = 0; i < c.text_embedding.size(); ++i)
        out << (i ? " " : "") << format_f32(c.text_embedding[i]);
      out << '\n';
    }
  }
  {
    std::ofstream out(dir / "examples.tsv");
    for (const auto& ex : b.examples) {
      out << ex.id << '\t' << ex.class_name << '\t' << to_string(ex.split);
      if (ex.dominant) out << "\tdominant:" << to_string(*ex.dominant);
      out << '\n';
    }
  }
  write_blob(dir / "audio.f32", b.audio);
  write_blob(dir / "video.f32", b.video);
}

namespace {

double f32(double v) { return static_cast<double>(static_cast<float>(v)); }

Matrix random_map(Rng& rng, std::size_t out_dim, std::size_t latent_dim) {
  Matrix m(out_dim, latent_dim);
  const double scale = 1.0 / std::sqrt(static_cast<double>(latent_dim));
  for (auto& v : m.data()) v = scale * rng.normal();
  return m;
}

std::size_t round_count(double x) { return static_cast<std::size_t>(std::llround(x)); }

}  // namespace

DatasetBundle gen_synthetic(const SynthConfig& cfg) {
  if (cfg.num_classes < 2) throw ConfigError("gen_synthetic: need at least 2 classes");
  if (cfg.num_unseen == 0 || cfg.num_unseen >= cfg.num_classes)
    throw ConfigError("gen_synthetic: need 0 < num_unseen < num_classes");
  if (cfg.per_class < 10) throw ConfigError("gen_synthetic: per_class must be >= 10");
  if (!(cfg.audio_dominant_fraction >= 0.0 && cfg.audio_dominant_fraction <= 0.5))
    throw ConfigError("gen_synthetic: audio_dominant_fraction must lie in [0, 0.5] so the two degraded sets stay disjoint");
  if (!(cfg.noise_scale >= 0.0) || !std::isfinite(cfg.noise_scale))
    throw ConfigError("gen_synthetic: noise_scale must be a finite value >= 0");
  if (cfg.audio_dim == 0 || cfg.video_dim == 0 || cfg.text_dim == 0 || cfg.latent_dim == 0)
    throw ConfigError("gen_synthetic: dimensions must be positive");

  Rng rng(cfg.seed);
  Rng map_rng = rng.child(1);
  Rng proto_rng = rng.child(2);
  Rng split_rng = rng.child(3);
  Rng noise_rng = rng.child(4);

  const Matrix text_map = random_map(map_rng, cfg.text_dim, cfg.latent_dim);
  const Matrix audio_map = random_map(map_rng, cfg.audio_dim, cfg.latent_dim);
  const Matrix video_map = random_map(map_rng, cfg.video_dim, cfg.latent_dim);

  DatasetBundle b;
  b.dims = {cfg.audio_dim, cfg.video_dim, cfg.text_dim};
  const std::size_t n = cfg.num_classes * cfg.per_class;
  b.audio = Matrix(n, cfg.audio_dim);
  b.video = Matrix(n, cfg.video_dim);

  // Unseen classes are the last num_unseen in class order.
  const std::size_t first_unseen = cfg.num_classes - cfg.num_unseen;
  const std::size_t degraded = round_count(cfg.audio_dominant_fraction * static_cast<double>(cfg.per_class));

  std::size_t row = 0;
  for (std::size_t c = 0; c < cfg.num_classes; ++c) {
    const bool seen = c < first_unseen;
    const Vec proto = prng_fill(proto_rng, cfg.latent_dim, Distribution::StandardNormal);
    ClassEntry entry;
    char name[32];
    std::snprintf(name, sizeof name, "class%02zu", c);
    entry.name = name;
    entry.seen = seen;
    entry.text_embedding = mat_vec_mul(text_map, proto);
    for (auto& v : entry.text_embedding) v = f32(v);
    b.classes.push_back(std::move(entry));

    const Vec audio_clean = mat_vec_mul(audio_map, proto);
    const Vec video_clean = mat_vec_mul(video_map, proto);

    std::vector<std::size_t> split_order(cfg.per_class), degrade_order(cfg.per_class);
    for (std::size_t i = 0; i < cfg.per_class; ++i) split_order[i] = degrade_order[i] = i;
    split_rng.shuffle(split_order);
    split_rng.shuffle(degrade_order);

    std::vector<Split> splits(cfg.per_class);
    if (seen) {
      const std::size_t n_train = round_count(0.6 * static_cast<double>(cfg.per_class));
      const std::size_t n_val = round_count(0.2 * static_cast<double>(cfg.per_class));
      for (std::size_t k = 0; k < cfg.per_class; ++k)
        splits[split_order[k]] = k < n_train ? Split::Train : (k < n_train + n_val ? Split::Val : Split::Test);
    } else {
      const std::size_t n_val = cfg.per_class / 2;
      for (std::size_t k = 0; k < cfg.per_class; ++k)
        splits[split_order[k]] = k < n_val ? Split::Val : Split::Test;
    }
    std::vector<Dominant> dominance(cfg.per_class, Dominant::None);
    for (std::size_t k = 0; k < degraded; ++k) dominance[degrade_order[k]] = Dominant::Audio;
    for (std::size_t k = degraded; k < 2 * degraded; ++k) dominance[degrade_order[k]] = Dominant::Video;

    for (std::size_t i = 0; i < cfg.per_class; ++i, ++row) {
      ExampleRecord ex;
      char id[48];
      std::snprintf(id, sizeof id, "%s_%04zu", b.classes.back().name.c_str(), i);
      ex.id = id;
      ex.class_name = b.classes.back().name;
      ex.split = splits[i];
      ex.dominant = dominance[i];
      b.examples.push_back(std::move(ex));

      auto arow = b.audio.row(row);
      auto vrow = b.video.row(row);
      for (std::size_t d = 0; d < cfg.audio_dim; ++d) {
        const double noise = noise_rng.normal();
        arow[d] = f32(dominance[i] == Dominant::Video ? noise : audio_clean[d] + cfg.noise_scale * noise);
      }
      for (std::size_t d = 0; d < cfg.video_dim; ++d) {
        const double noise = noise_rng.normal();
        vrow[d] = f32(dominance[i] == Dominant::Audio ? noise : video_clean[d] + cfg.noise_scale * noise);
      }
    }
  }
  b.validate();
  return b;
}

}  // namespace cjme
