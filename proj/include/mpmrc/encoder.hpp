#pragma once

// Embedding, contextual encoding, and question-aware passage matching.
// Matching uses dot-product similarity with bidirectional attention:
// context-to-question rows plus a max-pooled question-to-context summary,
// fused by a BiLSTM into the per-word match representation.

#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpmrc/nn.hpp"
#include "mpmrc/rng.hpp"
#include "mpmrc/tensor.hpp"
#include "mpmrc/types.hpp"
#include "mpmrc/vocab.hpp"

namespace mpmrc {

struct EmbeddingTable {
  Tensor word;   // [V, word_dim]
  Tensor chars;  // [C, char_dim]
};

struct BiLstmParams {
  LstmCellParams fw;
  LstmCellParams bw;
};

// Word row concatenated with the sum of the token's character rows.
inline Tensor embed(const EmbeddingTable& emb, const std::vector<int>& token_ids,
                    const std::vector<std::vector<int>>& char_ids) {
  if (token_ids.empty()) throw ContractError("embed: empty token sequence");
  if (char_ids.size() != token_ids.size())
    throw ContractError("embed: token/char id length mismatch");
  Tensor words = gather_rows(emb.word, token_ids);
  std::vector<Tensor> char_rows;
  char_rows.reserve(token_ids.size());
  for (const auto& ids : char_ids) {
    Tensor g = gather_rows(emb.chars, ids);
    char_rows.push_back(matvec_t(g, Tensor::full({g.rows()}, 1.0)));
  }
  return concat_cols({words, stack_rows(char_rows)});
}

struct MatchedPassage {
  Tensor v;   // [T, 2H]
  Mask mask;  // real-token mask for this passage
};

// Question-aware passage representation. S[t,k] = u_t^Q . u_k^P; C2Q
// attends over question positions per passage word, Q2C pools the best
// question alignment per passage word into one summary vector.
inline MatchedPassage match(const Tensor& u_q, const Tensor& u_p, const Mask& q_mask,
                            const Mask& p_mask, const BiLstmParams& fuse) {
  if (u_q.rank() != 2 || u_p.rank() != 2 || u_q.cols() != u_p.cols())
    throw ContractError("match: incompatible encodings");
  bool any_q = false;
  for (auto m : q_mask) any_q |= (m != 0);
  if (!any_q) throw ContractError("match: all question positions masked");

  Tensor s = matmul(u_q, transpose(u_p));           // [Tq, Tp]
  Tensor c2q = softmax_cols(s, q_mask);             // attention over question positions
  Tensor u_tilde = matmul(transpose(c2q), u_q);     // [Tp, 2H]
  Tensor col_max = max_cols_masked(s, q_mask);      // [Tp]
  Tensor q2c = masked_softmax(col_max, p_mask);     // attention over passage positions
  Tensor h_hat = matvec_t(u_p, q2c);                // [2H]
  Tensor merged = concat_cols({u_p, u_tilde, mul(u_p, u_tilde), rows_mul_vec(u_p, h_hat)});
  return {bilstm(merged, fuse.fw, fuse.bw), p_mask};
}

// ---------------------------------------------------------------------------
// Pretrained word vectors
// ---------------------------------------------------------------------------

struct WordTableInit {
  Vocabulary vocab;           // possibly reduced to covered tokens
  std::vector<double> table;  // row-major [V, dim]
  Mask frozen_rows;
  bool loaded = false;
};

// Without a file: every row trainable and random, PAD zeroed and frozen.
inline WordTableInit init_word_table(const Vocabulary& vocab, int dim, Rng& rng) {
  WordTableInit out;
  out.vocab = vocab;
  int v = vocab.n_tokens();
  out.table.assign(static_cast<size_t>(v) * dim, 0.0);
  out.frozen_rows.assign(v, 0);
  for (int r = 1; r < v; ++r)  // row 0 is PAD, kept zero
    for (int j = 0; j < dim; ++j) out.table[static_cast<size_t>(r) * dim + j] = rng.uniform(-1.0, 1.0);
  out.frozen_rows[Vocabulary::kPad] = 1;
  return out;
}

// With a file: tokens covered by the file get fixed vectors; uncovered data
// tokens are dropped from the vocabulary and map to the trainable UNK row.
inline WordTableInit load_word_table(const Vocabulary& data_vocab, const std::string& path, int dim,
                                     Rng& rng) {
  std::ifstream in(path);
  if (!in) throw IoError("load_word_table: cannot open " + path);
  std::unordered_map<std::string, std::vector<double>> vectors;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string tok;
    ls >> tok;
    std::vector<double> vec;
    double x;
    while (ls >> x) vec.push_back(x);
    if (static_cast<int>(vec.size()) != dim)
      throw IngestError("load_word_table: line " + std::to_string(lineno) + " has " +
                        std::to_string(vec.size()) + " values, expected " + std::to_string(dim));
    vectors.emplace(std::move(tok), std::move(vec));
  }

  WordTableInit out;
  out.loaded = true;
  std::vector<std::vector<double>> rows;
  for (const auto& tok : data_vocab.tokens()) {
    auto it = vectors.find(tok);
    if (it == vectors.end()) continue;
    out.vocab.add_token(tok);
    rows.push_back(it->second);
  }
  // Character ids carry over unchanged.
  out.vocab.chars_mutable() = data_vocab.chars();
  out.vocab.set_char_count(data_vocab.n_chars());

  int v = out.vocab.n_tokens();
  out.table.assign(static_cast<size_t>(v) * dim, 0.0);
  out.frozen_rows.assign(v, 1);
  out.frozen_rows[Vocabulary::kUnk] = 0;  // the one trainable row
  for (int j = 0; j < dim; ++j)
    out.table[static_cast<size_t>(Vocabulary::kUnk) * dim + j] = rng.uniform(-1.0, 1.0);
  for (size_t r = 0; r < rows.size(); ++r)
    for (int j = 0; j < dim; ++j) out.table[(r + 2) * dim + j] = rows[r][j];
  return out;
}

}  // namespace mpmrc
