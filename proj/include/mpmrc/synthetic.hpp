#pragma once

// Seeded synthetic multi-passage QA generator. Each example asks for the
// value following a key token. A majority of passages contain the key
// followed by the shared answer value; distractor passages pair the key
// with their own value. The gold passage is the first majority passage,
// matching the smallest-index tie-break used when gold labels are derived
// from references.
//
// Tokens come from three disjoint pools of synth_vocab_size each — keys
// k<i>, values v<i>, filler f<i> — so answer words have a recognizable
// type, the way entities do in real passages. Exactly one key occurs per
// passage and filler never collides with a passage's value span.

#include <algorithm>
#include <string>
#include <utility>
#include <vector>

#include "mpmrc/config.hpp"
#include "mpmrc/data.hpp"
#include "mpmrc/rng.hpp"

namespace mpmrc {

namespace detail_synth {

inline Example generate_example(const ModelConfig& cfg, Rng& rng, const std::string& id) {
  const int v = cfg.synth_vocab_size;
  const int np = cfg.synth_n_passages;
  const int plen = cfg.synth_passage_len;
  const int alen = cfg.synth_answer_len;

  Example ex;
  ex.id = id;

  int key = rng.uniform_int(0, v - 1);
  std::vector<int> answer(alen);
  for (int& a : answer) a = rng.uniform_int(0, v - 1);

  ex.question = {"find", "k" + std::to_string(key)};

  int n_distract = static_cast<int>(cfg.synth_distractor_rate * np);
  if (n_distract >= np) n_distract = np - 1;  // at least one majority passage
  std::vector<int> is_distract(np, 0);
  for (int i = 0; i < n_distract; ++i) is_distract[i] = 1;
  rng.shuffle(is_distract);

  // All passages of an example share one filler base, the way templated
  // web results repeat the same source text around the claimed fact.
  // Majority passages repeat one surface realization verbatim, so the gold
  // choice among them reduces to the same smallest-index rule used when
  // gold passages are derived from references; distractors claim their own
  // value (no token shared with the answer) at their own position.
  Tokens base(plen);
  for (auto& t : base) t = "f" + std::to_string(rng.uniform_int(0, v - 1));
  Tokens majority = base;
  int gold_pos = rng.uniform_int(0, plen - alen - 1);
  majority[gold_pos] = "k" + std::to_string(key);
  for (int k = 0; k < alen; ++k) majority[gold_pos + 1 + k] = "v" + std::to_string(answer[k]);

  int gold = -1;
  for (int p = 0; p < np; ++p) {
    if (!is_distract[p]) {
      if (gold < 0) {
        gold = p;
        ex.gold_span = Span{p, gold_pos + 1, gold_pos + alen};
      }
      ex.passages.push_back(majority);
      continue;
    }
    std::vector<int> value(alen);
    for (int& a : value) {
      do {
        a = rng.uniform_int(0, v - 1);
      } while (std::find(answer.begin(), answer.end(), a) != answer.end());
    }
    Tokens passage = base;
    int pos = rng.uniform_int(0, plen - alen - 1);
    passage[pos] = "k" + std::to_string(key);
    for (int k = 0; k < alen; ++k) passage[pos + 1 + k] = "v" + std::to_string(value[k]);
    ex.passages.push_back(std::move(passage));
  }
  ex.gold_passage = gold;

  std::string ref;
  for (int k = 0; k < alen; ++k) {
    if (k) ref.push_back(' ');
    ref += "v" + std::to_string(answer[k]);
  }
  ex.references = {ref};
  return ex;
}

}  // namespace detail_synth

// Deterministic in the seed: regeneration yields a byte-identical dataset.
inline std::pair<std::vector<Example>, std::vector<Example>> generate_synthetic(const ModelConfig& cfg,
                                                                                std::uint64_t seed) {
  cfg.validate();
  Rng root(seed);
  Rng train_rng = root.fork(1);
  Rng dev_rng = root.fork(2);
  std::vector<Example> train, dev;
  for (int i = 0; i < cfg.synth_n_train; ++i)
    train.push_back(detail_synth::generate_example(cfg, train_rng, "synth-train-" + std::to_string(i)));
  for (int i = 0; i < cfg.synth_n_dev; ++i)
    dev.push_back(detail_synth::generate_example(cfg, dev_rng, "synth-dev-" + std::to_string(i)));
  return {std::move(train), std::move(dev)};
}

// JSONL writer for the synth CLI; one example per line.
inline void write_jsonl(const std::vector<Example>& examples, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("write_jsonl: cannot open " + path);
  for (const auto& ex : examples) {
    nlohmann::json j;
    j["id"] = ex.id;
    j["question"] = ex.question;
    j["passages"] = ex.passages;
    if (ex.gold_span)
      j["answer_spans"] = {{ex.gold_span->passage, ex.gold_span->start, ex.gold_span->end}};
    if (ex.gold_passage) j["gold_passage"] = *ex.gold_passage;
    j["references"] = ex.references;
    out << j.dump() << "\n";
  }
}

}  // namespace mpmrc
