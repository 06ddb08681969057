#pragma once

// Dataset types, JSONL ingestion, gold-label derivation, and batching with
// the passage offset table.

#include <algorithm>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "mpmrc/config.hpp"
#include "mpmrc/errors.hpp"
#include "mpmrc/metrics.hpp"
#include "mpmrc/vocab.hpp"

namespace mpmrc {

struct Span {
  int passage = -1;
  int start = -1;
  int end = -1;  // inclusive

  bool operator==(const Span&) const = default;
};

struct Example {
  std::string id;
  Tokens question;
  std::vector<Tokens> passages;
  std::optional<Span> gold_span;
  std::optional<int> gold_passage;
  std::vector<std::string> references;
};

// Bijection between (passage index, local position) and positions on the
// concatenated passage axis. Passages contribute their true (unpadded)
// lengths, so every global position is a real token.
struct OffsetTable {
  std::vector<int> begin;  // begin[p] = global offset of passage p; begin.back() = total

  int n_passages() const { return static_cast<int>(begin.size()) - 1; }
  int total() const { return begin.back(); }
  int passage_len(int p) const { return begin[p + 1] - begin[p]; }

  int to_global(int p, int local) const {
    if (p < 0 || p >= n_passages() || local < 0 || local >= passage_len(p))
      throw ContractError("OffsetTable: local position (" + std::to_string(p) + "," +
                          std::to_string(local) + ") out of range");
    return begin[p] + local;
  }

  std::pair<int, int> to_local(int global) const {
    if (global < 0 || global >= total())
      throw ContractError("OffsetTable: global position " + std::to_string(global) + " out of range");
    int p = static_cast<int>(std::upper_bound(begin.begin(), begin.end(), global) - begin.begin()) - 1;
    return {p, global - begin[p]};
  }
};

// One batch of padded id arrays plus everything the model needs to run and
// score its three heads.
struct Batch {
  int size = 0;
  // Padded storage with masks; [b][t] and [b][p][t].
  std::vector<std::vector<int>> question_ids;
  std::vector<Mask> question_mask;
  std::vector<std::vector<std::vector<int>>> question_chars;  // [b][t][chars]
  std::vector<std::vector<std::vector<int>>> passage_ids;
  std::vector<std::vector<Mask>> passage_mask;
  std::vector<std::vector<std::vector<std::vector<int>>>> passage_chars;  // [b][p][t][chars]
  // Per-example structure
  std::vector<OffsetTable> offsets;
  std::vector<int> gold_start_global;  // -1 when absent
  std::vector<int> gold_end_global;
  std::vector<int> gold_passage;  // -1 when absent
  std::vector<std::vector<Mask>> content_labels;  // [b][p][t], padded with 0
  // Original (truncated) tokens and ids, for answers and reports
  std::vector<std::string> ids;
  std::vector<std::vector<Tokens>> passage_tokens;
  std::vector<std::vector<std::string>> references;

  int question_len(int b) const {
    int n = 0;
    for (auto m : question_mask[b]) n += m;
    return n;
  }
  int passage_len(int b, int p) const { return offsets[b].passage_len(p); }
  int n_passages(int b) const { return offsets[b].n_passages(); }
};

struct BatchStats {
  int truncated_questions = 0;
  int truncated_passages = 0;
};

struct PrepareStats {
  int dropped_no_span = 0;        // no span overlaps any reference
  int dropped_span_truncated = 0; // gold span outside the truncation window
  int dropped_passage_cut = 0;    // gold passage beyond max_passages
  int kept = 0;
};

// ---------------------------------------------------------------------------
// JSONL ingestion
// ---------------------------------------------------------------------------

namespace detail_data {

inline Tokens parse_tokens(const nlohmann::json& j, const char* field, const std::string& where) {
  if (!j.is_array()) throw IngestError(where + ": field '" + field + "' must be a list of strings");
  Tokens out;
  for (const auto& t : j) {
    if (!t.is_string()) throw IngestError(where + ": field '" + field + "' must be a list of strings");
    out.push_back(t.get<std::string>());
  }
  return out;
}

}  // namespace detail_data

// Each line holds one JSON object:
//   question: [str]            (required)
//   passages: [[str]]          (required, each passage nonempty)
//   answer_spans: [[p,s,e]]    (optional; the first span is used as gold)
//   gold_passage: int          (optional)
//   references: [str]          (optional)
//   id: str                    (optional; defaults to line-<n>)
// All malformed lines are collected and reported together.
inline std::vector<Example> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_jsonl: cannot open " + path);
  std::vector<Example> out;
  std::vector<std::string> errors;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail_config::trim(line).empty()) continue;
    std::string where = "line " + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const std::exception& e) {
      errors.push_back(where + ": invalid JSON (" + e.what() + ")");
      continue;
    }
    try {
      Example ex;
      ex.id = j.contains("id") ? j.at("id").get<std::string>() : "line-" + std::to_string(lineno);
      where += " (id " + ex.id + ")";
      if (!j.contains("question") || !j.contains("passages"))
        throw IngestError(where + ": missing required field 'question' or 'passages'");
      ex.question = detail_data::parse_tokens(j.at("question"), "question", where);
      if (ex.question.empty()) throw IngestError(where + ": empty question");
      for (const auto& p : j.at("passages")) {
        ex.passages.push_back(detail_data::parse_tokens(p, "passages", where));
        if (ex.passages.back().empty()) throw IngestError(where + ": empty passage");
      }
      if (ex.passages.empty()) throw IngestError(where + ": no passages");
      if (j.contains("references"))
        for (const auto& r : j.at("references")) ex.references.push_back(r.get<std::string>());
      if (j.contains("gold_passage")) {
        int gp = j.at("gold_passage").get<int>();
        if (gp < 0 || gp >= static_cast<int>(ex.passages.size()))
          throw IngestError(where + ": gold_passage " + std::to_string(gp) + " out of range");
        ex.gold_passage = gp;
      }
      if (j.contains("answer_spans") && !j.at("answer_spans").empty()) {
        const auto& s = j.at("answer_spans").at(0);
        if (!s.is_array() || s.size() != 3)
          throw IngestError(where + ": answer span must be [passage, start, end]");
        Span span{s.at(0).get<int>(), s.at(1).get<int>(), s.at(2).get<int>()};
        if (span.passage < 0 || span.passage >= static_cast<int>(ex.passages.size()) ||
            span.start < 0 || span.start > span.end ||
            span.end >= static_cast<int>(ex.passages[span.passage].size()))
          throw IngestError(where + ": span out of range");
        ex.gold_span = span;
      }
      out.push_back(std::move(ex));
    } catch (const std::exception& e) {
      std::string msg = e.what();
      errors.push_back(msg.rfind("line ", 0) == 0 ? msg : where + ": " + msg);
    }
  }
  if (!errors.empty()) {
    std::string msg = "load_jsonl: " + std::to_string(errors.size()) + " malformed line(s) in " + path;
    for (const auto& e : errors) msg += "\n  " + e;
    throw IngestError(msg);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Gold-label derivation
// ---------------------------------------------------------------------------

struct DerivedSpan {
  int start = 0;
  int end = 0;
  double score = 0.0;
};

// Span with the highest ROUGE-L against the best-matching reference; ties
// broken by shorter span, then smaller start. Zero-overlap passages yield
// span (0,0) with score 0.
inline DerivedSpan derive_gold_span(const Tokens& passage, const std::vector<std::string>& references,
                                    double rouge_beta = 1.2) {
  if (passage.empty()) throw ContractError("derive_gold_span: empty passage");
  if (references.empty()) throw ContractError("derive_gold_span: no references");
  std::vector<Tokens> refs;
  for (const auto& r : references) refs.push_back(metrics::split_ws(metrics::lowercase(r)));
  Tokens lowered;
  lowered.reserve(passage.size());
  for (const auto& t : passage) lowered.push_back(metrics::lowercase(t));

  const int n = static_cast<int>(passage.size());
  DerivedSpan best{0, 0, -1.0};
  for (int s = 0; s < n; ++s)
    for (int e = s; e < n; ++e) {
      Tokens span(lowered.begin() + s, lowered.begin() + e + 1);
      double sc = 0.0;
      for (const auto& ref : refs)
        if (!ref.empty()) sc = std::max(sc, metrics::rouge_l(span, ref, rouge_beta));
      int len = e - s + 1, best_len = best.end - best.start + 1;
      if (sc > best.score || (sc == best.score && (len < best_len || (len == best_len && s < best.start))))
        best = {s, e, sc};
    }
  return best;
}

// Words inside the span get label 1, the rest 0.
inline Mask derive_content_labels(int start, int end, int passage_length) {
  if (start < 0 || start > end || end >= passage_length)
    throw ContractError("derive_content_labels: invalid span [" + std::to_string(start) + "," +
                        std::to_string(end) + "] for length " + std::to_string(passage_length));
  Mask labels(passage_length, 0);
  for (int i = start; i <= end; ++i) labels[i] = 1;
  return labels;
}

// Explicit gold passage wins; otherwise the passage whose best span scores
// highest (ties to the smallest index).
inline int derive_gold_passage(const Example& ex, double rouge_beta = 1.2) {
  if (ex.gold_passage) return *ex.gold_passage;
  if (ex.references.empty()) throw ContractError("derive_gold_passage: no references for " + ex.id);
  int best_p = 0;
  double best_score = -1.0;
  for (int p = 0; p < static_cast<int>(ex.passages.size()); ++p) {
    DerivedSpan d = derive_gold_span(ex.passages[p], ex.references, rouge_beta);
    if (d.score > best_score) {
      best_score = d.score;
      best_p = p;
    }
  }
  return best_p;
}

// Fill in missing gold labels from references, truncate, and drop examples
// that cannot be trained on. Returns training-ready examples.
inline std::vector<Example> prepare_training(std::vector<Example> examples, const ModelConfig& cfg,
                                             PrepareStats* stats = nullptr) {
  PrepareStats local;
  std::vector<Example> out;
  for (auto& ex : examples) {
    if (static_cast<int>(ex.passages.size()) > cfg.max_passages) {
      if (ex.gold_span && ex.gold_span->passage >= cfg.max_passages) {
        ++local.dropped_passage_cut;
        continue;
      }
      if (ex.gold_passage && *ex.gold_passage >= cfg.max_passages) {
        ++local.dropped_passage_cut;
        continue;
      }
      ex.passages.resize(cfg.max_passages);
    }
    if (!ex.gold_span) {
      if (ex.references.empty()) {
        ++local.dropped_no_span;
        continue;
      }
      int gp = derive_gold_passage(ex, cfg.rouge_beta);
      DerivedSpan d = derive_gold_span(ex.passages[gp], ex.references, cfg.rouge_beta);
      if (d.score <= 0.0) {
        ++local.dropped_no_span;
        continue;
      }
      ex.gold_span = Span{gp, d.start, d.end};
      ex.gold_passage = gp;
    }
    if (!ex.gold_passage) ex.gold_passage = ex.gold_span->passage;
    if (ex.gold_span->end >= cfg.max_passage_len) {
      ++local.dropped_span_truncated;
      continue;
    }
    ++local.kept;
    out.push_back(std::move(ex));
  }
  if (stats) *stats = local;
  return out;
}

// ---------------------------------------------------------------------------
// Batching
// ---------------------------------------------------------------------------

inline Batch make_batch(const std::vector<Example>& examples, const ModelConfig& cfg,
                        const Vocabulary& vocab, BatchStats* stats = nullptr) {
  if (examples.empty()) throw ContractError("make_batch: empty example list");
  BatchStats local;
  Batch b;
  b.size = static_cast<int>(examples.size());

  int max_q = 1, max_p = 1, max_np = 1;
  for (const auto& ex : examples) {
    max_q = std::max(max_q, std::min<int>(cfg.max_question_len, static_cast<int>(ex.question.size())));
    max_np = std::max(max_np, std::min<int>(cfg.max_passages, static_cast<int>(ex.passages.size())));
    for (const auto& p : ex.passages)
      max_p = std::max(max_p, std::min<int>(cfg.max_passage_len, static_cast<int>(p.size())));
  }

  for (const auto& ex : examples) {
    // Question
    int q_len = static_cast<int>(ex.question.size());
    if (q_len > cfg.max_question_len) {
      ++local.truncated_questions;
      q_len = cfg.max_question_len;
    }
    std::vector<int> q_ids(max_q, Vocabulary::kPad);
    Mask q_mask(max_q, 0);
    std::vector<std::vector<int>> q_chars(max_q);
    for (int t = 0; t < q_len; ++t) {
      q_ids[t] = vocab.token_id(ex.question[t]);
      q_mask[t] = 1;
      q_chars[t] = vocab.char_ids(ex.question[t]);
    }
    b.question_ids.push_back(std::move(q_ids));
    b.question_mask.push_back(std::move(q_mask));
    b.question_chars.push_back(std::move(q_chars));

    // Passages
    int np = std::min<int>(cfg.max_passages, static_cast<int>(ex.passages.size()));
    std::vector<std::vector<int>> p_ids(np, std::vector<int>(max_p, Vocabulary::kPad));
    std::vector<Mask> p_mask(np, Mask(max_p, 0));
    std::vector<std::vector<std::vector<int>>> p_chars(np, std::vector<std::vector<int>>(max_p));
    std::vector<Mask> labels(np, Mask(max_p, 0));
    std::vector<Tokens> kept_tokens(np);
    OffsetTable table;
    table.begin.assign(1, 0);
    for (int p = 0; p < np; ++p) {
      int p_len = static_cast<int>(ex.passages[p].size());
      if (p_len > cfg.max_passage_len) {
        ++local.truncated_passages;
        p_len = cfg.max_passage_len;
      }
      for (int t = 0; t < p_len; ++t) {
        p_ids[p][t] = vocab.token_id(ex.passages[p][t]);
        p_mask[p][t] = 1;
        p_chars[p][t] = vocab.char_ids(ex.passages[p][t]);
        kept_tokens[p].push_back(ex.passages[p][t]);
      }
      table.begin.push_back(table.begin.back() + p_len);
    }
    b.passage_ids.push_back(std::move(p_ids));
    b.passage_mask.push_back(std::move(p_mask));
    b.passage_chars.push_back(std::move(p_chars));
    b.passage_tokens.push_back(std::move(kept_tokens));

    // Gold labels in global coordinates
    if (ex.gold_span) {
      const Span& s = *ex.gold_span;
      if (s.passage >= np || s.end >= table.passage_len(s.passage))
        throw ContractError("make_batch: gold span of " + ex.id + " outside the truncation window");
      b.gold_start_global.push_back(table.to_global(s.passage, s.start));
      b.gold_end_global.push_back(table.to_global(s.passage, s.end));
      for (int i = s.start; i <= s.end; ++i) labels[s.passage][i] = 1;
    } else {
      b.gold_start_global.push_back(-1);
      b.gold_end_global.push_back(-1);
    }
    b.gold_passage.push_back(ex.gold_passage ? *ex.gold_passage : -1);
    b.content_labels.push_back(std::move(labels));
    b.offsets.push_back(std::move(table));
    b.ids.push_back(ex.id);
    b.references.push_back(ex.references);
  }
  if (stats) *stats = local;
  return b;
}

}  // namespace mpmrc
