#pragma once

// The full multi-passage reader: shared embedding/encoding/matching layers
// feeding the boundary, content, and verification heads, trained jointly
// and combined at prediction time by the product of the three scores.

#include <string>
#include <vector>

#include "mpmrc/boundary.hpp"
#include "mpmrc/config.hpp"
#include "mpmrc/content.hpp"
#include "mpmrc/data.hpp"
#include "mpmrc/encoder.hpp"
#include "mpmrc/optim.hpp"
#include "mpmrc/verification.hpp"

namespace mpmrc {

// L = L_boundary + beta1 * L_content + beta2 * L_verify. Zero weights keep
// the corresponding head out of the graph entirely.
inline Tensor joint_loss(const Tensor& lb, const Tensor& lc, const Tensor& lv, double beta1,
                         double beta2) {
  Tensor out = lb;
  if (beta1 != 0.0) out = add(out, scale(lc, beta1));
  if (beta2 != 0.0) out = add(out, scale(lv, beta2));
  return out;
}

struct Prediction {
  std::string id;
  AnswerCandidate chosen;
  std::vector<AnswerCandidate> candidates;
  double combined_score = 0.0;
};

// Argmax of the per-candidate score product, with every factor floored so
// the ranking stays total. Ties resolve to the smallest passage index via
// the scan order. Heads ablated away (use_* = false) contribute no factor.
inline int select_by_product(const std::vector<AnswerCandidate>& candidates, double floor = 1e-30,
                             bool use_content = true, bool use_verification = true) {
  if (candidates.empty()) throw NoAnswerError("select_by_product: no candidates");
  int best = 0;
  double best_score = -1.0;
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    double s = std::max(candidates[i].boundary_score, floor);
    if (use_content) s *= std::max(candidates[i].content_score, floor);
    if (use_verification) s *= std::max(candidates[i].verification_score, floor);
    if (s > best_score) {
      best_score = s;
      best = i;
    }
  }
  return best;
}

class Model {
 public:
  Model(const ModelConfig& cfg, const Vocabulary& vocab, Rng& rng,
        const WordTableInit* pretrained = nullptr)
      : cfg_(cfg), vocab_(vocab) {
    cfg_.validate();
    const int h = cfg_.hidden_size;
    const int din = cfg_.embed_dim();
    const int repr = din;

    // Embedding rows are unit-range; lookup tables are not matmul weights,
    // and pretrained word vectors live on this scale too.
    auto& word = store_.add("embed.word", {vocab_.n_tokens(), cfg_.word_dim}, 1, rng,
                            /*l2=*/false);
    if (pretrained) {
      word.tensor.data() = pretrained->table;
      word.frozen_rows = pretrained->frozen_rows;
    } else {
      for (int j = 0; j < cfg_.word_dim; ++j) word.tensor.data()[j] = 0.0;  // PAD row
      word.frozen_rows.assign(vocab_.n_tokens(), 0);
      word.frozen_rows[Vocabulary::kPad] = 1;
    }
    word.ema = word.tensor.data();

    auto& chars = store_.add("embed.char", {vocab_.n_chars(), cfg_.char_dim}, 1, rng,
                             /*l2=*/false);
    for (int j = 0; j < cfg_.char_dim; ++j) chars.tensor.data()[j] = 0.0;  // PAD row
    chars.frozen_rows.assign(vocab_.n_chars(), 0);
    chars.frozen_rows[Vocabulary::kPad] = 1;
    chars.ema = chars.tensor.data();
    emb_ = {word.tensor, chars.tensor};

    enc_q_ = add_bilstm("enc_q", din, h, rng);
    enc_p_ = add_bilstm("enc_p", din, h, rng);
    fuse_ = add_bilstm("match.fuse", 8 * h, h, rng);

    ptr_.init_W = add_weight("ptr.init.W", {h, 2 * h}, rng);
    ptr_.init_b = add_bias("ptr.init.b", {h}, rng);
    ptr_.Wv = add_weight("ptr.Wv", {h, 2 * h}, rng);
    ptr_.Wh = add_weight("ptr.Wh", {h, h}, rng);
    ptr_.w1 = add_weight("ptr.w1", {h}, rng);
    ptr_.cell = add_cell("ptr.cell", 2 * h, h, rng);

    content_.W = add_weight("content.W", {h, 2 * h}, rng);
    content_.w = add_weight("content.w", {h}, rng);

    verify_.w = add_weight("verify.w", {3 * repr}, rng);
  }

  // Everything the heads need for one example, built on the live graph.
  struct ExampleForward {
    BoundaryDistribution dist;
    std::vector<Tensor> content_p;  // per passage, [Tp]
    Tensor verify_probs;            // [n]
    OffsetTable table;
  };

  ExampleForward forward_example(const Batch& batch, int b) const {
    ExampleForward out;
    out.table = batch.offsets[b];

    int q_len = batch.question_len(b);
    std::vector<int> q_ids(batch.question_ids[b].begin(), batch.question_ids[b].begin() + q_len);
    std::vector<std::vector<int>> q_chars(batch.question_chars[b].begin(),
                                          batch.question_chars[b].begin() + q_len);
    Tensor u_q = bilstm(embed(emb_, q_ids, q_chars), enc_q_.fw, enc_q_.bw);

    const int h = cfg_.hidden_size;
    Tensor summary = concat_vec(
        {slice_vec(row(u_q, q_len - 1), 0, h), slice_vec(row(u_q, 0), h, h)});

    const int np = batch.n_passages(b);
    std::vector<Tensor> matched(np), reprs(np);
    out.content_p.resize(np);
    for (int p = 0; p < np; ++p) {
      int p_len = batch.passage_len(b, p);
      if (p_len == 0) throw ContractError("forward: empty passage in batch");
      std::vector<int> ids(batch.passage_ids[b][p].begin(), batch.passage_ids[b][p].begin() + p_len);
      std::vector<std::vector<int>> chs(batch.passage_chars[b][p].begin(),
                                        batch.passage_chars[b][p].begin() + p_len);
      Tensor e_p = embed(emb_, ids, chs);
      Tensor u_p = bilstm(e_p, enc_p_.fw, enc_p_.bw);
      MatchedPassage m = match(u_q, u_p, Mask(q_len, 1), Mask(p_len, 1), fuse_);
      matched[p] = m.v;
      out.content_p[p] = content_probs(m.v, content_);
      reprs[p] = answer_representation(out.content_p[p], e_p, Mask(p_len, 1));
    }

    Tensor global = np == 1 ? matched[0] : concat_rows(matched);
    out.dist = predict_boundary(global, Mask(out.table.total(), 1), summary, ptr_);
    out.verify_probs = verify(stack_rows(reprs), verify_, cfg_.mask_self_attention).probs;
    return out;
  }

  struct HeadLosses {
    Tensor boundary;
    Tensor content;
    Tensor verify;
  };

  HeadLosses batch_losses(const Batch& batch) const {
    std::vector<Tensor> lb, lc, lv;
    for (int b = 0; b < batch.size; ++b) {
      if (batch.gold_start_global[b] < 0 || batch.gold_passage[b] < 0)
        throw ContractError("batch_losses: example " + batch.ids[b] + " lacks gold labels");
      ExampleForward fw = forward_example(batch, b);
      lb.push_back(boundary_loss_single(fw.dist, batch.gold_start_global[b],
                                        batch.gold_end_global[b], cfg_.prob_floor));
      // One content term over all words of all passages of the instance.
      std::vector<Tensor> probs_parts;
      Mask labels, mask;
      for (int p = 0; p < batch.n_passages(b); ++p) {
        int p_len = batch.passage_len(b, p);
        probs_parts.push_back(fw.content_p[p]);
        labels.insert(labels.end(), batch.content_labels[b][p].begin(),
                      batch.content_labels[b][p].begin() + p_len);
        mask.insert(mask.end(), p_len, 1);
      }
      Tensor all_probs = probs_parts.size() == 1 ? probs_parts[0] : concat_vec(probs_parts);
      lc.push_back(content_loss(all_probs, labels, mask));
      lv.push_back(verification_loss_single(fw.verify_probs, batch.gold_passage[b], cfg_.prob_floor));
    }
    double inv = 1.0 / batch.size;
    return {scale(add_n(lb), inv), scale(add_n(lc), inv), scale(add_n(lv), inv)};
  }

  Prediction predict_example(const Batch& batch, int b) const {
    ExampleForward fw = forward_example(batch, b);
    std::vector<AnswerCandidate> cands =
        extract_candidates(fw.dist, fw.table, cfg_.max_span_len, batch.passage_tokens[b]);
    if (cands.empty()) throw NoAnswerError("predict: no candidates for " + batch.ids[b]);
    for (auto& c : cands) {
      c.content_score = content_score(fw.content_p[c.passage].data(), c.start, c.end);
      c.verification_score = fw.verify_probs.at(c.passage);
    }
    Prediction pred;
    pred.id = batch.ids[b];
    int best = select_by_product(cands, cfg_.prob_floor, cfg_.beta1 != 0.0, cfg_.beta2 != 0.0);
    pred.chosen = cands[best];
    pred.combined_score = std::max(cands[best].boundary_score, cfg_.prob_floor);
    if (cfg_.beta1 != 0.0) pred.combined_score *= std::max(cands[best].content_score, cfg_.prob_floor);
    if (cfg_.beta2 != 0.0)
      pred.combined_score *= std::max(cands[best].verification_score, cfg_.prob_floor);
    pred.candidates = std::move(cands);
    return pred;
  }

  std::vector<Prediction> predict_batch(const Batch& batch) const {
    std::vector<Prediction> out;
    out.reserve(batch.size);
    for (int b = 0; b < batch.size; ++b) out.push_back(predict_example(batch, b));
    return out;
  }

  ParameterStore& params() { return store_; }
  const ParameterStore& params() const { return store_; }
  const ModelConfig& config() const { return cfg_; }
  const Vocabulary& vocab() const { return vocab_; }

 private:
  Tensor add_weight(const std::string& name, Shape shape, Rng& rng) {
    int fan_in = shape.size() == 2 ? shape[1] : shape[0];
    return store_.add(name, std::move(shape), fan_in, rng, /*l2=*/true).tensor;
  }
  Tensor add_bias(const std::string& name, Shape shape, Rng& rng) {
    return store_.add(name, std::move(shape), 0, rng, /*l2=*/false).tensor;
  }
  LstmCellParams add_cell(const std::string& prefix, int input, int hidden, Rng& rng) {
    LstmCellParams cell;
    cell.input = input;
    cell.hidden = hidden;
    cell.W = store_.add(prefix + ".W", {4 * hidden, input + hidden}, input + hidden, rng, true).tensor;
    auto& b = store_.add(prefix + ".b", {4 * hidden}, 0, rng, false);
    for (int i = hidden; i < 2 * hidden; ++i) b.tensor.data()[i] = 1.0;  // forget-gate bias
    b.ema = b.tensor.data();
    cell.b = b.tensor;
    return cell;
  }
  BiLstmParams add_bilstm(const std::string& prefix, int input, int hidden, Rng& rng) {
    return {add_cell(prefix + ".fw", input, hidden, rng), add_cell(prefix + ".bw", input, hidden, rng)};
  }

  ModelConfig cfg_;
  Vocabulary vocab_;
  ParameterStore store_;
  EmbeddingTable emb_;
  BiLstmParams enc_q_, enc_p_, fuse_;
  BoundaryParams ptr_;
  ContentParams content_;
  VerificationParams verify_;
};

}  // namespace mpmrc
