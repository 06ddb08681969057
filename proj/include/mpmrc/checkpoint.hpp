#pragma once

// Self-describing binary checkpoints: config, vocabulary, every parameter
// with its EMA shadow, and the optimizer state. Doubles are stored as raw
// IEEE-754 bits so round trips are exact.

#include <algorithm>
#include <bit>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "mpmrc/model.hpp"

namespace mpmrc {

namespace detail_ckpt {

constexpr char kMagic[8] = {'M', 'P', 'M', 'R', 'C', 'K', 'P', '1'};
constexpr std::int32_t kVersion = 1;

inline void write_i32(std::ostream& out, std::int32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint32_t>(v) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_i64(std::ostream& out, std::int64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f64(std::ostream& out, double v) {
  write_i64(out, static_cast<std::int64_t>(std::bit_cast<std::uint64_t>(v)));
}

inline void write_string(std::ostream& out, const std::string& s) {
  write_i32(out, static_cast<std::int32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

inline void write_doubles(std::ostream& out, const std::vector<double>& v) {
  write_i64(out, static_cast<std::int64_t>(v.size()));
  for (double x : v) write_f64(out, x);
}

inline std::int32_t read_i32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw IoError("checkpoint: truncated file");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return static_cast<std::int32_t>(v);
}

inline std::int64_t read_i64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw IoError("checkpoint: truncated file");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return static_cast<std::int64_t>(v);
}

inline double read_f64(std::istream& in) {
  return std::bit_cast<double>(static_cast<std::uint64_t>(read_i64(in)));
}

inline std::string read_string(std::istream& in) {
  std::int32_t n = read_i32(in);
  if (n < 0) throw IoError("checkpoint: corrupt string length");
  std::string s(static_cast<size_t>(n), '\0');
  in.read(s.data(), n);
  if (!in) throw IoError("checkpoint: truncated file");
  return s;
}

inline std::vector<double> read_doubles(std::istream& in) {
  std::int64_t n = read_i64(in);
  if (n < 0) throw IoError("checkpoint: corrupt array length");
  std::vector<double> v(static_cast<size_t>(n));
  for (auto& x : v) x = read_f64(in);
  return v;
}

}  // namespace detail_ckpt

inline void save_checkpoint(const Model& model, const Adam& adam, const std::string& path) {
  using namespace detail_ckpt;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_checkpoint: cannot open " + path);
  out.write(kMagic, 8);
  write_i32(out, kVersion);
  write_string(out, serialize_config(model.config()));

  const Vocabulary& vocab = model.vocab();
  write_i32(out, vocab.n_tokens());
  for (int i = 2; i < vocab.n_tokens(); ++i) write_string(out, vocab.token(i));
  std::vector<std::pair<std::uint32_t, int>> chars(vocab.chars().begin(), vocab.chars().end());
  std::sort(chars.begin(), chars.end(), [](auto& a, auto& b) { return a.second < b.second; });
  write_i32(out, static_cast<std::int32_t>(chars.size()));
  for (auto& [cp, id] : chars) {
    write_i32(out, static_cast<std::int32_t>(cp));
    write_i32(out, id);
  }
  write_i32(out, vocab.n_chars());

  write_i64(out, adam.step_count());
  const auto& params = model.params().all();
  write_i32(out, static_cast<std::int32_t>(params.size()));
  for (const auto& p : params) {
    write_string(out, p.name);
    write_i32(out, static_cast<std::int32_t>(p.tensor.shape().size()));
    for (int d : p.tensor.shape()) write_i32(out, d);
    write_i32(out, static_cast<std::int32_t>(p.frozen_rows.size()));
    out.write(reinterpret_cast<const char*>(p.frozen_rows.data()),
              static_cast<std::streamsize>(p.frozen_rows.size()));
    write_doubles(out, p.tensor.data());
    write_doubles(out, p.ema);
    write_doubles(out, adam.moment1(p.name));
    write_doubles(out, adam.moment2(p.name));
  }
  if (!out) throw IoError("save_checkpoint: write failed for " + path);
}

struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  Model model;
  Adam adam;
};

inline Checkpoint load_checkpoint(const std::string& path) {
  using namespace detail_ckpt;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_checkpoint: cannot open " + path);
  char magic[8];
  in.read(magic, 8);
  if (!in || !std::equal(magic, magic + 8, kMagic))
    throw IoError("load_checkpoint: not a checkpoint file (bad magic)");
  std::int32_t version = read_i32(in);
  if (version != kVersion)
    throw IoError("load_checkpoint: version mismatch (file " + std::to_string(version) +
                  ", supported " + std::to_string(kVersion) + ")");

  std::istringstream cfg_in(read_string(in));
  ModelConfig cfg = parse_config(cfg_in);

  Vocabulary vocab;
  std::int32_t n_tokens = read_i32(in);
  for (int i = 2; i < n_tokens; ++i) vocab.add_token(read_string(in));
  std::int32_t n_chars = read_i32(in);
  for (int i = 0; i < n_chars; ++i) {
    std::uint32_t cp = static_cast<std::uint32_t>(read_i32(in));
    int id = read_i32(in);
    vocab.chars_mutable().emplace(cp, id);
  }
  vocab.set_char_count(read_i32(in));

  std::int64_t step = read_i64(in);
  Rng rng(cfg.seed);  // values are overwritten below
  Checkpoint ckpt{cfg, vocab, Model(cfg, vocab, rng),
                  Adam(cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon)};
  ckpt.adam.attach(ckpt.model.params());

  std::int32_t n_params = read_i32(in);
  if (n_params != static_cast<std::int32_t>(ckpt.model.params().size()))
    throw IoError("load_checkpoint: parameter count mismatch");
  for (int i = 0; i < n_params; ++i) {
    std::string name = read_string(in);
    std::int32_t ndim = read_i32(in);
    Shape shape(ndim);
    for (auto& d : shape) d = read_i32(in);
    std::int32_t frozen_n = read_i32(in);
    Mask frozen(static_cast<size_t>(frozen_n));
    in.read(reinterpret_cast<char*>(frozen.data()), frozen_n);
    if (!ckpt.model.params().contains(name))
      throw IoError("load_checkpoint: unknown parameter '" + name + "'");
    Parameter& p = ckpt.model.params().at(name);
    if (p.tensor.shape() != shape)
      throw IoError("load_checkpoint: dimension mismatch for parameter '" + name + "'");
    p.frozen_rows = std::move(frozen);
    p.tensor.data() = read_doubles(in);
    p.ema = read_doubles(in);
    ckpt.adam.moment1(name) = read_doubles(in);
    ckpt.adam.moment2(name) = read_doubles(in);
    if (p.tensor.data().size() != static_cast<size_t>(p.tensor.numel()) ||
        p.ema.size() != p.tensor.data().size())
      throw IoError("load_checkpoint: corrupt value block for parameter '" + name + "'");
  }
  ckpt.adam.set_step_count(step);
  return ckpt;
}

}  // namespace mpmrc
