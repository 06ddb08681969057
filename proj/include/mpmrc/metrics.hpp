#pragma once

// Answer-quality scorers: ROUGE-L, corpus BLEU-1, bag-of-tokens F1, and the
// multiple-answer / multiple-span dataset statistics.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mpmrc/errors.hpp"
#include "mpmrc/types.hpp"

namespace mpmrc {

namespace metrics {

inline int lcs_length(const Tokens& a, const Tokens& b) {
  const size_t n = a.size(), m = b.size();
  std::vector<int> prev(m + 1, 0), cur(m + 1, 0);
  for (size_t i = 1; i <= n; ++i) {
    for (size_t j = 1; j <= m; ++j) {
      if (a[i - 1] == b[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[m];
}

// LCS-based F-measure with recall weight beta (1.2 matches the common
// MS-MARCO evaluation convention).
inline double rouge_l(const Tokens& candidate, const Tokens& reference, double beta = 1.2) {
  if (reference.empty()) throw ContractError("rouge_l: empty reference");
  if (candidate.empty()) return 0.0;
  int lcs = lcs_length(candidate, reference);
  if (lcs == 0) return 0.0;
  double p = static_cast<double>(lcs) / candidate.size();
  double r = static_cast<double>(lcs) / reference.size();
  double b2 = beta * beta;
  return (1.0 + b2) * p * r / (r + b2 * p);
}

// Best score over references.
inline double rouge_l_multi(const Tokens& candidate, const std::vector<Tokens>& references,
                            double beta = 1.2) {
  if (references.empty()) throw ContractError("rouge_l_multi: no references");
  double best = 0.0;
  for (const auto& ref : references) best = std::max(best, rouge_l(candidate, ref, beta));
  return best;
}

// Corpus-level BLEU-1: clipped unigram precision with brevity penalty.
// The effective reference length of each case is the closest-length
// reference (shorter one on ties).
inline double bleu_1(const std::vector<Tokens>& candidates,
                     const std::vector<std::vector<Tokens>>& references) {
  if (candidates.empty() || candidates.size() != references.size())
    throw ContractError("bleu_1: empty corpus or candidate/reference count mismatch");
  long long clipped = 0, total = 0, ref_len = 0, cand_len = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    const Tokens& cand = candidates[i];
    if (references[i].empty()) throw ContractError("bleu_1: case without references");
    std::map<std::string, int> cand_counts;
    for (const auto& t : cand) ++cand_counts[t];
    std::map<std::string, int> max_ref_counts;
    for (const auto& ref : references[i]) {
      std::map<std::string, int> c;
      for (const auto& t : ref) ++c[t];
      for (const auto& [tok, cnt] : c) max_ref_counts[tok] = std::max(max_ref_counts[tok], cnt);
    }
    for (const auto& [tok, cnt] : cand_counts) {
      auto it = max_ref_counts.find(tok);
      clipped += std::min(cnt, it == max_ref_counts.end() ? 0 : it->second);
    }
    total += static_cast<long long>(cand.size());
    cand_len += static_cast<long long>(cand.size());
    long long best_ref = static_cast<long long>(references[i].front().size());
    for (const auto& ref : references[i]) {
      long long len = static_cast<long long>(ref.size());
      long long d_new = std::llabs(len - static_cast<long long>(cand.size()));
      long long d_old = std::llabs(best_ref - static_cast<long long>(cand.size()));
      if (d_new < d_old || (d_new == d_old && len < best_ref)) best_ref = len;
    }
    ref_len += best_ref;
  }
  if (total == 0) return 0.0;
  double precision = static_cast<double>(clipped) / total;
  double bp = cand_len < ref_len ? std::exp(1.0 - static_cast<double>(ref_len) / cand_len) : 1.0;
  return bp * precision;
}

// Harmonic mean of bag-of-tokens precision and recall (multiset overlap).
inline double token_f1(const Tokens& candidate, const Tokens& reference) {
  if (candidate.empty() || reference.empty()) return 0.0;
  std::map<std::string, int> ref_counts;
  for (const auto& t : reference) ++ref_counts[t];
  int overlap = 0;
  for (const auto& t : candidate) {
    auto it = ref_counts.find(t);
    if (it != ref_counts.end() && it->second > 0) {
      ++overlap;
      --it->second;
    }
  }
  if (overlap == 0) return 0.0;
  double p = static_cast<double>(overlap) / candidate.size();
  double r = static_cast<double>(overlap) / reference.size();
  return 2.0 * p * r / (p + r);
}

inline std::string lowercase(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

inline Tokens split_ws(const std::string& s) {
  Tokens out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

// Whitespace-and-case normalization used to decide whether two reference
// answers count as the same answer.
inline std::string normalize_answer(const std::string& s) {
  Tokens toks = split_ws(lowercase(s));
  std::string out;
  for (size_t i = 0; i < toks.size(); ++i) {
    if (i) out.push_back(' ');
    out += toks[i];
  }
  return out;
}

struct SpanValidityStats {
  int n_questions = 0;
  double multiple_answers = 0.0;  // fraction with >= 2 distinct reference answers
  double multiple_spans = 0.0;    // fraction with >= 2 passages holding a valid span
  double threshold = 0.7;
};

// A passage holds a valid span if some token span scores token-F1 above the
// threshold against any reference.
inline bool passage_has_valid_span(const Tokens& passage, const std::vector<Tokens>& references,
                                   double threshold) {
  const int n = static_cast<int>(passage.size());
  for (int s = 0; s < n; ++s)
    for (int e = s; e < n; ++e) {
      Tokens span(passage.begin() + s, passage.begin() + e + 1);
      for (const auto& ref : references)
        if (token_f1(span, ref) > threshold) return true;
    }
  return false;
}

struct EvalRow {
  std::string id;
  double rouge_l = 0.0;
  bool has_span = false;
  bool span_match = false;
};

struct EvalReport {
  double rouge_l = 0.0;  // mean of per-case best-reference scores
  double bleu_1 = 0.0;
  double exact_span_accuracy = 0.0;
  int n_cases = 0;
  int n_span_cases = 0;
  std::vector<EvalRow> rows;
};

// Case-averaged ROUGE-L, corpus BLEU-1, and exact-span accuracy over the
// cases that carry span labels.
inline EvalReport evaluate_corpus(const std::vector<std::string>& ids,
                                  const std::vector<Tokens>& candidates,
                                  const std::vector<std::vector<Tokens>>& references,
                                  const std::vector<int>& span_state,  // -1 no span, 0 miss, 1 match
                                  double rouge_beta = 1.2) {
  if (candidates.empty()) throw ContractError("evaluate_corpus: empty corpus");
  if (ids.size() != candidates.size() || references.size() != candidates.size() ||
      span_state.size() != candidates.size())
    throw ContractError("evaluate_corpus: mismatched input lengths");
  EvalReport rep;
  rep.n_cases = static_cast<int>(candidates.size());
  double rouge_sum = 0.0;
  int span_hits = 0;
  for (size_t i = 0; i < candidates.size(); ++i) {
    EvalRow row;
    row.id = ids[i];
    row.rouge_l = references[i].empty() ? 0.0 : rouge_l_multi(candidates[i], references[i], rouge_beta);
    rouge_sum += row.rouge_l;
    if (span_state[i] >= 0) {
      ++rep.n_span_cases;
      row.has_span = true;
      row.span_match = span_state[i] == 1;
      span_hits += span_state[i];
    }
    rep.rows.push_back(std::move(row));
  }
  rep.rouge_l = rouge_sum / rep.n_cases;
  std::vector<Tokens> bleu_cands;
  std::vector<std::vector<Tokens>> bleu_refs;
  for (size_t i = 0; i < candidates.size(); ++i)
    if (!references[i].empty()) {
      bleu_cands.push_back(candidates[i]);
      bleu_refs.push_back(references[i]);
    }
  rep.bleu_1 = bleu_cands.empty() ? 0.0 : bleu_1(bleu_cands, bleu_refs);
  rep.exact_span_accuracy =
      rep.n_span_cases > 0 ? static_cast<double>(span_hits) / rep.n_span_cases : 0.0;
  return rep;
}

template <class ExampleRange>
SpanValidityStats span_validity_stats(const ExampleRange& examples, double threshold = 0.7) {
  SpanValidityStats st;
  st.threshold = threshold;
  int multi_ans = 0, multi_span = 0;
  for (const auto& ex : examples) {
    ++st.n_questions;
    std::set<std::string> distinct;
    std::vector<Tokens> ref_tokens;
    for (const auto& r : ex.references) {
      distinct.insert(normalize_answer(r));
      ref_tokens.push_back(split_ws(lowercase(r)));
    }
    if (distinct.size() >= 2) ++multi_ans;
    int passages_with_span = 0;
    if (!ref_tokens.empty())
      for (const auto& p : ex.passages) {
        Tokens lowered;
        lowered.reserve(p.size());
        for (const auto& t : p) lowered.push_back(lowercase(t));
        if (passage_has_valid_span(lowered, ref_tokens, threshold)) ++passages_with_span;
      }
    if (passages_with_span >= 2) ++multi_span;
  }
  if (st.n_questions > 0) {
    st.multiple_answers = static_cast<double>(multi_ans) / st.n_questions;
    st.multiple_spans = static_cast<double>(multi_span) / st.n_questions;
  }
  return st;
}

}  // namespace metrics
}  // namespace mpmrc
