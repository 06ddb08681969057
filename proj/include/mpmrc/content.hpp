#pragma once

// Per-word answer-content probabilities, the content loss, and the
// probability-weighted answer representation built from raw embeddings.

#include <vector>

#include "mpmrc/tensor.hpp"
#include "mpmrc/types.hpp"

namespace mpmrc {

struct ContentParams {
  Tensor W;  // [Hc, 2H]
  Tensor w;  // [Hc]
};

// p_k = sigmoid(w . relu(W v_k)), independently per word.
inline Tensor content_probs(const Tensor& matched, const ContentParams& p) {
  if (matched.rank() != 2) throw ContractError("content_probs: expected [T, 2H] input");
  return sigmoid(matvec(relu(matmul(matched, transpose(p.W))), p.w));
}

// Binary cross entropy averaged over unmasked words of the instance.
inline Tensor content_loss(const Tensor& probs, const Mask& labels, const Mask& mask,
                           double clamp = 1e-12) {
  if (probs.rank() != 1) throw ContractError("content_loss: expected a probability vector");
  const int n = probs.size();
  if (static_cast<int>(labels.size()) != n || static_cast<int>(mask.size()) != n)
    throw ContractError("content_loss: labels/mask length mismatch");
  int count = 0;
  for (int i = 0; i < n; ++i) {
    if (labels[i] && !mask[i])
      throw ContractError("content_loss: label at masked position " + std::to_string(i));
    count += mask[i];
  }
  if (count == 0) throw ContractError("content_loss: all positions masked");
  std::vector<double> y(n), m(n);
  for (int i = 0; i < n; ++i) {
    y[i] = labels[i] ? 1.0 : 0.0;
    m[i] = mask[i] ? 1.0 : 0.0;
  }
  Tensor y_t = Tensor::from_data({n}, std::move(y));
  Tensor m_t = Tensor::from_data({n}, std::move(m));
  Tensor one_minus_p = add_scalar(scale(probs, -1.0), 1.0);
  Tensor one_minus_y = add_scalar(scale(y_t, -1.0), 1.0);
  Tensor ce = add(mul(y_t, log_clamped(probs, clamp)), mul(one_minus_y, log_clamped(one_minus_p, clamp)));
  return scale(sum(mul(ce, m_t)), -1.0 / count);
}

// r = (1/|P|) sum_k p_k [e_k; c_k], |P| counting unmasked tokens. Uses the
// raw embeddings, so the width stays word_dim + char_dim regardless of H.
inline Tensor answer_representation(const Tensor& probs, const Tensor& embeddings, const Mask& mask) {
  if (probs.rank() != 1 || embeddings.rank() != 2 || probs.size() != embeddings.rows())
    throw ContractError("answer_representation: probs/embeddings mismatch");
  if (static_cast<int>(mask.size()) != probs.size())
    throw ContractError("answer_representation: mask length mismatch");
  int count = 0;
  for (auto m : mask) count += m;
  if (count == 0) throw ContractError("answer_representation: all positions masked");
  std::vector<double> m(mask.size());
  for (size_t i = 0; i < mask.size(); ++i) m[i] = mask[i] ? 1.0 : 0.0;
  Tensor masked_probs = mul(probs, Tensor::from_data({probs.size()}, std::move(m)));
  return scale(matvec_t(embeddings, masked_probs), 1.0 / count);
}

// Mean content probability over the candidate span (plain values; used at
// prediction time only).
inline double content_score(const std::vector<double>& probs, int start, int end) {
  if (start < 0 || start > end || end >= static_cast<int>(probs.size()))
    throw ContractError("content_score: invalid span [" + std::to_string(start) + "," +
                        std::to_string(end) + "]");
  double s = 0.0;
  for (int i = start; i <= end; ++i) s += probs[i];
  return s / (end - start + 1);
}

}  // namespace mpmrc
