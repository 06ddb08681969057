#pragma once

// Recurrent building blocks on top of the tensor graph.

#include <utility>
#include <vector>

#include "mpmrc/tensor.hpp"

namespace mpmrc {

// One LSTM cell. W stacks the four gate blocks over rows in the order
// input / forget / output / candidate, each block of `hidden` rows acting
// on [x; h_prev]. b follows the same layout.
struct LstmCellParams {
  Tensor W;  // [4*hidden, input + hidden]
  Tensor b;  // [4*hidden]
  int input = 0;
  int hidden = 0;

  void check() const {
    if (W.rank() != 2 || b.rank() != 1 || W.rows() != 4 * hidden || W.cols() != input + hidden ||
        b.size() != 4 * hidden)
      throw ContractError("LstmCellParams: inconsistent shapes for input=" + std::to_string(input) +
                          " hidden=" + std::to_string(hidden));
  }
};

struct LstmState {
  Tensor h;
  Tensor c;
};

// One fused graph node computing both states; the node's value is [h; c]
// and the backward pass applies the cell's analytic gradients in place.
inline LstmState lstm_cell(const Tensor& x, const Tensor& h_prev, const Tensor& c_prev,
                           const LstmCellParams& p) {
  p.check();
  if (x.rank() != 1 || x.size() != p.input)
    throw ContractError("lstm_cell: input width " + std::to_string(x.numel()) + " != " +
                        std::to_string(p.input));
  if (h_prev.rank() != 1 || h_prev.size() != p.hidden || c_prev.rank() != 1 || c_prev.size() != p.hidden)
    throw ContractError("lstm_cell: state width mismatch");
  const int hs = p.hidden, in = p.input, cols = in + hs;

  auto pw = p.W.node_ptr(), pb = p.b.node_ptr();
  auto px = x.node_ptr(), ph = h_prev.node_ptr(), pc = c_prev.node_ptr();

  struct Saved {
    std::vector<double> gi, gf, go, gc, tc;
  };
  auto saved = std::make_shared<Saved>();
  saved->gi.resize(hs);
  saved->gf.resize(hs);
  saved->go.resize(hs);
  saved->gc.resize(hs);
  saved->tc.resize(hs);

  std::vector<double> value(2 * hs);
  for (int r = 0; r < hs; ++r) {
    double pre[4];
    for (int gate = 0; gate < 4; ++gate) {
      const double* wrow = &pw->value[static_cast<size_t>(gate * hs + r) * cols];
      double s = pb->value[gate * hs + r];
      for (int j = 0; j < in; ++j) s += wrow[j] * px->value[j];
      for (int j = 0; j < hs; ++j) s += wrow[in + j] * ph->value[j];
      pre[gate] = s;
    }
    double gi = 1.0 / (1.0 + std::exp(-pre[0]));
    double gf = 1.0 / (1.0 + std::exp(-pre[1]));
    double go = 1.0 / (1.0 + std::exp(-pre[2]));
    double gc = std::tanh(pre[3]);
    double c = gf * pc->value[r] + gi * gc;
    double tc = std::tanh(c);
    saved->gi[r] = gi;
    saved->gf[r] = gf;
    saved->go[r] = go;
    saved->gc[r] = gc;
    saved->tc[r] = tc;
    value[r] = go * tc;    // h
    value[hs + r] = c;     // c
  }

  auto n = detail::new_node("lstm_cell", {2 * hs}, std::move(value), {pw, pb, px, ph, pc});
  if (n->requires_grad) {
    n->backward_fn = [pw, pb, px, ph, pc, saved, hs, in, cols](detail::Node& self) {
      if (pw->requires_grad) pw->ensure_grad();
      if (pb->requires_grad) pb->ensure_grad();
      if (px->requires_grad) px->ensure_grad();
      if (ph->requires_grad) ph->ensure_grad();
      if (pc->requires_grad) pc->ensure_grad();
      for (int r = 0; r < hs; ++r) {
        double dh = self.grad[r];
        double dc_out = self.grad[hs + r];
        double gi = saved->gi[r], gf = saved->gf[r], go = saved->go[r], gc = saved->gc[r],
               tc = saved->tc[r];
        double dc = dc_out + dh * go * (1.0 - tc * tc);
        double dpre[4] = {
            dc * gc * gi * (1.0 - gi),                 // input gate
            dc * pc->value[r] * gf * (1.0 - gf),       // forget gate
            dh * tc * go * (1.0 - go),                 // output gate
            dc * gi * (1.0 - gc * gc),                 // candidate
        };
        if (pc->requires_grad) pc->grad[r] += dc * gf;
        for (int gate = 0; gate < 4; ++gate) {
          double d = dpre[gate];
          if (d == 0.0) continue;
          const size_t row = static_cast<size_t>(gate * hs + r) * cols;
          if (pw->requires_grad) {
            for (int j = 0; j < in; ++j) pw->grad[row + j] += d * px->value[j];
            for (int j = 0; j < hs; ++j) pw->grad[row + in + j] += d * ph->value[j];
          }
          if (pb->requires_grad) pb->grad[gate * hs + r] += d;
          if (px->requires_grad)
            for (int j = 0; j < in; ++j) px->grad[j] += d * pw->value[row + j];
          if (ph->requires_grad)
            for (int j = 0; j < hs; ++j) ph->grad[j] += d * pw->value[row + in + j];
        }
      }
    };
  }
  Tensor both = wrap_node(n);
  return {slice_vec(both, 0, hs), slice_vec(both, hs, hs)};
}

// Bidirectional LSTM over seq[T, D] -> [T, 2H]; row t is [forward_t; backward_t].
inline Tensor bilstm(const Tensor& seq, const LstmCellParams& fw, const LstmCellParams& bw) {
  if (seq.rank() != 2) throw ContractError("bilstm: expected [T, D] input");
  const int t_len = seq.rows();
  if (t_len < 1) throw ContractError("bilstm: empty sequence");
  if (seq.cols() != fw.input || seq.cols() != bw.input)
    throw ContractError("bilstm: input width mismatch");

  std::vector<Tensor> fwd(t_len), bwd(t_len);
  LstmState s{Tensor::zeros({fw.hidden}), Tensor::zeros({fw.hidden})};
  for (int t = 0; t < t_len; ++t) {
    s = lstm_cell(row(seq, t), s.h, s.c, fw);
    fwd[t] = s.h;
  }
  s = {Tensor::zeros({bw.hidden}), Tensor::zeros({bw.hidden})};
  for (int t = t_len - 1; t >= 0; --t) {
    s = lstm_cell(row(seq, t), s.h, s.c, bw);
    bwd[t] = s.h;
  }
  std::vector<Tensor> rows_out(t_len);
  for (int t = 0; t < t_len; ++t) rows_out[t] = concat_vec({fwd[t], bwd[t]});
  return stack_rows(rows_out);
}

}  // namespace mpmrc
