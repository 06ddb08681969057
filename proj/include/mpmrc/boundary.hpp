#pragma once

// Pointer-network answer boundary prediction over the concatenation of all
// passages, the boundary loss, and per-passage candidate extraction.

#include <string>
#include <vector>

#include "mpmrc/data.hpp"
#include "mpmrc/nn.hpp"
#include "mpmrc/tensor.hpp"

namespace mpmrc {

struct BoundaryParams {
  Tensor w1;      // [attn]
  Tensor Wv;      // [attn, 2H], match-representation half of the score layer
  Tensor Wh;      // [attn, dec], decoder-state half
  Tensor init_W;  // [dec, 2H], question summary -> initial decoder state
  Tensor init_b;  // [dec]
  LstmCellParams cell;  // input 2H, hidden dec
};

struct BoundaryDistribution {
  Tensor start;  // [Tg]
  Tensor end;    // [Tg]
  Mask mask;
};

// Two decoding steps of the attention recurrence; the first step's weights
// are the start distribution, the second step's the end distribution.
inline BoundaryDistribution predict_boundary(const Tensor& matched, const Mask& mask,
                                             const Tensor& question_summary, const BoundaryParams& p) {
  if (matched.rank() != 2) throw ContractError("predict_boundary: expected [Tg, 2H] input");
  if (static_cast<int>(mask.size()) != matched.rows())
    throw ContractError("predict_boundary: mask length mismatch");
  bool any = false;
  for (auto m : mask) any |= (m != 0);
  if (!any) throw ContractError("predict_boundary: all positions masked");

  Tensor h = tanh(add(matvec(p.init_W, question_summary), p.init_b));
  Tensor c = Tensor::zeros({p.cell.hidden});
  Tensor base = matmul(matched, transpose(p.Wv));  // [Tg, attn], shared by both steps

  auto attention = [&](const Tensor& state) {
    Tensor g = matvec(tanh(add_rowvec(base, matvec(p.Wh, state))), p.w1);
    return masked_softmax(g, mask);
  };

  Tensor alpha1 = attention(h);
  Tensor attended = matvec_t(matched, alpha1);
  LstmState next = lstm_cell(attended, h, c, p.cell);
  Tensor alpha2 = attention(next.h);
  return {alpha1, alpha2, mask};
}

// Negative log probability of the gold start and end positions.
inline Tensor boundary_loss_single(const BoundaryDistribution& dist, int gold_start, int gold_end,
                                   double prob_floor = 1e-30) {
  if (gold_start < 0 || gold_start >= dist.start.size() || gold_end < 0 ||
      gold_end >= dist.end.size())
    throw ContractError("boundary_loss: gold position out of range");
  if (!dist.mask[gold_start] || !dist.mask[gold_end])
    throw ContractError("boundary_loss: gold position is masked");
  Tensor lp = add(log_clamped(pick(dist.start, gold_start), prob_floor),
                  log_clamped(pick(dist.end, gold_end), prob_floor));
  return scale(lp, -1.0);
}

// Batch mean.
inline Tensor boundary_loss(const std::vector<BoundaryDistribution>& dists,
                            const std::vector<std::pair<int, int>>& golds,
                            double prob_floor = 1e-30) {
  if (dists.empty() || dists.size() != golds.size())
    throw ContractError("boundary_loss: empty batch or size mismatch");
  std::vector<Tensor> losses;
  losses.reserve(dists.size());
  for (size_t i = 0; i < dists.size(); ++i)
    losses.push_back(boundary_loss_single(dists[i], golds[i].first, golds[i].second, prob_floor));
  return scale(add_n(losses), 1.0 / static_cast<double>(dists.size()));
}

struct AnswerCandidate {
  int passage = -1;
  int start = -1;  // local, inclusive
  int end = -1;
  int global_start = -1;
  int global_end = -1;
  double boundary_score = 0.0;
  double content_score = 0.0;
  double verification_score = 0.0;
  Tokens answer_tokens;
};

// Per passage, the span maximizing alpha1[s]*alpha2[e] subject to s <= e,
// e-s < max_span_len, both endpoints inside the passage and unmasked. Ties
// resolve to the smaller start, then the shorter span (the scan order makes
// the first strict improvement win). Fully masked passages yield no
// candidate.
inline std::vector<AnswerCandidate> extract_candidates(const BoundaryDistribution& dist,
                                                       const OffsetTable& table, int max_span_len,
                                                       const std::vector<Tokens>& passage_tokens) {
  if (max_span_len <= 0) throw ContractError("extract_candidates: max_span_len must be positive");
  const auto& a1 = dist.start.data();
  const auto& a2 = dist.end.data();
  std::vector<AnswerCandidate> out;
  for (int p = 0; p < table.n_passages(); ++p) {
    const int lo = table.begin[p], hi = table.begin[p + 1];
    AnswerCandidate best;
    bool found = false;
    for (int s = lo; s < hi; ++s) {
      if (!dist.mask[s]) continue;
      for (int e = s; e < hi && e - s < max_span_len; ++e) {
        if (!dist.mask[e]) continue;
        double score = a1[s] * a2[e];
        if (!found || score > best.boundary_score) {
          found = true;
          best.passage = p;
          best.global_start = s;
          best.global_end = e;
          best.boundary_score = score;
        }
      }
    }
    if (!found) continue;
    best.start = best.global_start - lo;
    best.end = best.global_end - lo;
    if (p < static_cast<int>(passage_tokens.size()) &&
        best.end < static_cast<int>(passage_tokens[p].size()))
      best.answer_tokens.assign(passage_tokens[p].begin() + best.start,
                                passage_tokens[p].begin() + best.end + 1);
    out.push_back(std::move(best));
  }
  return out;
}

}  // namespace mpmrc
