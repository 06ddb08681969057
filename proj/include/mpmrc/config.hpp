#pragma once

// Flat key-value configuration. Lines are `key = value`; '#' starts a
// comment. Unknown keys are rejected so typos surface immediately.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "mpmrc/errors.hpp"

namespace mpmrc {

struct ModelConfig {
  // Model dimensions
  int hidden_size = 150;
  int word_dim = 300;
  int char_dim = 30;

  // Optimization
  double learning_rate = 0.0004;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  int batch_size = 32;
  double l2_weight = 0.0003;
  double ema_decay = 0.9999;

  // Task weights of the joint objective
  double beta1 = 0.5;
  double beta2 = 0.5;

  // Length limits
  int max_question_len = 32;
  int max_passage_len = 64;
  int max_passages = 10;
  int max_span_len = 30;

  // Training control
  int epochs = 200;
  int patience = 10;
  std::uint64_t seed = 42;
  std::string dev_metric = "exact_span";  // exact_span | rouge_l
  bool mask_self_attention = false;
  double rouge_beta = 1.2;
  double prob_floor = 1e-30;

  // Optional pretrained word vectors (token + word_dim floats per line)
  std::string embedding_path;

  // Synthetic data generator
  int synth_vocab_size = 50;
  int synth_n_passages = 5;
  int synth_passage_len = 12;
  int synth_answer_len = 3;
  int synth_n_train = 50;
  int synth_n_dev = 200;
  double synth_distractor_rate = 0.4;

  void validate() const {
    if (hidden_size <= 0 || word_dim <= 0 || char_dim <= 0)
      throw ContractError("config: dimensions must be positive");
    if (beta1 < 0.0 || beta2 < 0.0) throw ContractError("config: task weights must be >= 0");
    if (batch_size <= 0 || max_question_len <= 0 || max_passage_len <= 0 || max_passages <= 0 ||
        max_span_len <= 0)
      throw ContractError("config: limits must be positive");
    if (ema_decay < 0.0 || ema_decay >= 1.0) throw ContractError("config: ema_decay must lie in [0,1)");
    if (dev_metric != "exact_span" && dev_metric != "rouge_l")
      throw ContractError("config: dev_metric must be exact_span or rouge_l");
    if (synth_vocab_size < 8 || synth_n_passages < 1 || synth_passage_len < 2 || synth_answer_len < 1 ||
        synth_distractor_rate < 0.0 || synth_distractor_rate > 1.0)
      throw ContractError("config: invalid synthetic generator settings");
    if (synth_answer_len + 1 > synth_passage_len)
      throw ContractError("config: synth_answer_len does not fit in synth_passage_len");
  }

  int embed_dim() const { return word_dim + char_dim; }
};

namespace detail_config {

template <class T>
void parse_into(const std::string& key, const std::string& value, T& out);

inline void parse_into(const std::string& key, const std::string& value, int& out) {
  try {
    out = std::stoi(value);
  } catch (...) {
    throw IngestError("config: bad integer for '" + key + "': " + value);
  }
}
inline void parse_into(const std::string& key, const std::string& value, double& out) {
  try {
    out = std::stod(value);
  } catch (...) {
    throw IngestError("config: bad number for '" + key + "': " + value);
  }
}
inline void parse_into(const std::string& key, const std::string& value, std::uint64_t& out) {
  try {
    out = std::stoull(value);
  } catch (...) {
    throw IngestError("config: bad integer for '" + key + "': " + value);
  }
}
inline void parse_into(const std::string& key, const std::string& value, bool& out) {
  if (value == "true" || value == "1")
    out = true;
  else if (value == "false" || value == "0")
    out = false;
  else
    throw IngestError("config: bad boolean for '" + key + "': " + value);
}
inline void parse_into(const std::string&, const std::string& value, std::string& out) { out = value; }

inline std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace detail_config

#define MPMRC_CONFIG_FIELDS(X) \
  X(hidden_size)               \
  X(word_dim)                  \
  X(char_dim)                  \
  X(learning_rate)             \
  X(adam_beta1)                \
  X(adam_beta2)                \
  X(adam_epsilon)              \
  X(batch_size)                \
  X(l2_weight)                 \
  X(ema_decay)                 \
  X(beta1)                     \
  X(beta2)                     \
  X(max_question_len)          \
  X(max_passage_len)           \
  X(max_passages)              \
  X(max_span_len)              \
  X(epochs)                    \
  X(patience)                  \
  X(seed)                      \
  X(dev_metric)                \
  X(mask_self_attention)       \
  X(rouge_beta)                \
  X(prob_floor)                \
  X(embedding_path)            \
  X(synth_vocab_size)          \
  X(synth_n_passages)          \
  X(synth_passage_len)         \
  X(synth_answer_len)          \
  X(synth_n_train)             \
  X(synth_n_dev)               \
  X(synth_distractor_rate)

inline void apply_config_line(ModelConfig& cfg, const std::string& key, const std::string& value) {
#define MPMRC_APPLY(field)                              \
  if (key == #field) {                                  \
    detail_config::parse_into(key, value, cfg.field);   \
    return;                                             \
  }
  MPMRC_CONFIG_FIELDS(MPMRC_APPLY)
#undef MPMRC_APPLY
  throw IngestError("config: unknown key '" + key + "'");
}

inline ModelConfig parse_config(std::istream& in) {
  ModelConfig cfg;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail_config::trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw IngestError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = detail_config::trim(line.substr(0, eq));
    std::string value = detail_config::trim(line.substr(eq + 1));
    apply_config_line(cfg, key, value);
  }
  return cfg;
}

inline ModelConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open " + path);
  return parse_config(in);
}

inline std::string serialize_config(const ModelConfig& cfg) {
  std::ostringstream os;
  os.precision(17);
#define MPMRC_EMIT(field) os << #field << " = " << cfg.field << "\n";
  MPMRC_CONFIG_FIELDS(MPMRC_EMIT)
#undef MPMRC_EMIT
  return os.str();
}

}  // namespace mpmrc
