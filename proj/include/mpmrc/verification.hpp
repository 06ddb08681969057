#pragma once

// Cross-passage answer verification: candidates attend to each other by
// dot-product similarity (zero self-similarity), and a single learned
// vector scores the fused representation of each candidate.

#include <utility>
#include <vector>

#include "mpmrc/tensor.hpp"

namespace mpmrc {

struct VerificationParams {
  Tensor w;  // [3 * repr_dim], no bias
};

struct VerificationOutput {
  Tensor similarity;  // [n, n], zero diagonal
  Tensor attention;   // [n, n]
  Tensor attended;    // [n, repr_dim]
  Tensor scores;      // [n], pre-softmax
  Tensor probs;       // [n]
};

// s_ij = r_i . r_j for i != j and exactly 0 on the diagonal. The softmax row
// includes the diagonal's exp(0) = 1 unless mask_self is set, which drops
// the self term instead (configurable alternative reading).
inline std::pair<Tensor, Tensor> cross_attend(const Tensor& reprs, bool mask_self = false) {
  if (reprs.rank() != 2) throw ContractError("cross_attend: expected [n, d] candidate matrix");
  const int n = reprs.rows();
  if (n < 1) throw ContractError("cross_attend: need at least one candidate");
  Tensor s = zero_diag(matmul(reprs, transpose(reprs)));
  Mask mask(static_cast<size_t>(n) * n, 1);
  if (mask_self && n > 1)
    for (int i = 0; i < n; ++i) mask[static_cast<size_t>(i) * n + i] = 0;
  Tensor alpha = masked_softmax_rows(s, mask);
  return {alpha, matmul(alpha, reprs)};
}

// g_i = w . [r_i; r~_i; r_i * r~_i], normalized over the candidates.
inline Tensor verify_scores(const Tensor& reprs, const Tensor& attended, const VerificationParams& p) {
  if (reprs.shape() != attended.shape())
    throw ContractError("verify_scores: reprs/attended shape mismatch");
  Tensor fused = concat_cols({reprs, attended, mul(reprs, attended)});
  Tensor g = matvec(fused, p.w);
  return masked_softmax(g, Mask(reprs.rows(), 1));
}

inline VerificationOutput verify(const Tensor& reprs, const VerificationParams& p,
                                 bool mask_self = false) {
  const int n = reprs.rows();
  Tensor s = zero_diag(matmul(reprs, transpose(reprs)));
  Mask mask(static_cast<size_t>(n) * n, 1);
  if (mask_self && n > 1)
    for (int i = 0; i < n; ++i) mask[static_cast<size_t>(i) * n + i] = 0;
  Tensor alpha = masked_softmax_rows(s, mask);
  Tensor attended = matmul(alpha, reprs);
  Tensor fused = concat_cols({reprs, attended, mul(reprs, attended)});
  Tensor g = matvec(fused, p.w);
  return {s, alpha, attended, g, masked_softmax(g, Mask(n, 1))};
}

// Negative log probability of the gold candidate.
inline Tensor verification_loss_single(const Tensor& probs, int gold_index,
                                       double prob_floor = 1e-30) {
  if (probs.rank() != 1 || gold_index < 0 || gold_index >= probs.size())
    throw ContractError("verification_loss: gold index out of range");
  return scale(log_clamped(pick(probs, gold_index), prob_floor), -1.0);
}

// Batch mean.
inline Tensor verification_loss(const std::vector<Tensor>& probs, const std::vector<int>& golds,
                                double prob_floor = 1e-30) {
  if (probs.empty() || probs.size() != golds.size())
    throw ContractError("verification_loss: empty batch or size mismatch");
  std::vector<Tensor> losses;
  losses.reserve(probs.size());
  for (size_t i = 0; i < probs.size(); ++i)
    losses.push_back(verification_loss_single(probs[i], golds[i], prob_floor));
  return scale(add_n(losses), 1.0 / static_cast<double>(probs.size()));
}

}  // namespace mpmrc
