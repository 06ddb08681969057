#pragma once

// Named trainable parameters, Adam, and exponential moving averages.

#include <cstdint>
#include <deque>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "mpmrc/rng.hpp"
#include "mpmrc/tensor.hpp"

namespace mpmrc {

struct Parameter {
  std::string name;
  Tensor tensor;             // leaf, requires_grad
  std::vector<double> ema;   // shadow values, same size as tensor data
  bool apply_l2 = false;     // weight matrices only; biases and embeddings excluded
  Mask frozen_rows;          // per-row freeze for 2-D tables (empty = none frozen)
};

class ParameterStore {
 public:
  // fan_in > 0: init uniform in [-1/sqrt(fan_in), +1/sqrt(fan_in)]; fan_in == 0: zeros.
  Parameter& add(const std::string& name, Shape shape, int fan_in, Rng& rng, bool apply_l2) {
    if (index_.count(name)) throw ContractError("ParameterStore: duplicate parameter '" + name + "'");
    int n = detail::shape_numel(shape);
    std::vector<double> data(n, 0.0);
    if (fan_in > 0) {
      double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
      for (double& v : data) v = rng.uniform(-bound, bound);
    }
    Parameter p;
    p.name = name;
    p.tensor = Tensor::from_data(std::move(shape), std::move(data), /*requires_grad=*/true);
    p.ema = p.tensor.data();
    p.apply_l2 = apply_l2;
    index_[name] = params_.size();
    params_.push_back(std::move(p));
    return params_.back();
  }

  Parameter& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("ParameterStore: unknown parameter '" + name + "'");
    return params_[it->second];
  }
  const Parameter& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("ParameterStore: unknown parameter '" + name + "'");
    return params_[it->second];
  }
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  std::deque<Parameter>& all() { return params_; }
  const std::deque<Parameter>& all() const { return params_; }
  size_t size() const { return params_.size(); }

  void zero_grads() {
    for (auto& p : params_) p.tensor.zero_grad();
  }

  // Drop gradient rows of frozen table rows (loaded embeddings, PAD rows).
  void mask_frozen() {
    for (auto& p : params_) {
      if (p.frozen_rows.empty() || !p.tensor.has_grad()) continue;
      int cols = p.tensor.cols();
      auto& g = p.tensor.grad_mutable();
      for (int r = 0; r < p.tensor.rows(); ++r)
        if (p.frozen_rows[r])
          for (int j = 0; j < cols; ++j) g[static_cast<size_t>(r) * cols + j] = 0.0;
    }
  }

  // Sum of squares of every L2-regularized parameter, as a graph term.
  Tensor l2_term() const {
    std::vector<Tensor> sq;
    for (const auto& p : params_)
      if (p.apply_l2) sq.push_back(sum_sq(p.tensor));
    if (sq.empty()) return Tensor::scalar(0.0);
    return add_n(sq);
  }

 private:
  std::deque<Parameter> params_;  // deque: references stay valid as parameters are added
  std::unordered_map<std::string, size_t> index_;
};

// Runs the reverse pass and collects one gradient tensor per parameter.
// Parameters never reached by the graph get zero gradients.
inline std::map<std::string, Tensor> backward(const Tensor& loss, ParameterStore& store) {
  store.zero_grads();
  backward(loss);
  store.mask_frozen();
  std::map<std::string, Tensor> grads;
  for (const auto& p : store.all()) {
    if (p.tensor.has_grad())
      grads.emplace(p.name, Tensor::from_data(p.tensor.shape(), p.tensor.grad()));
    else
      grads.emplace(p.name, Tensor::zeros(p.tensor.shape()));
  }
  return grads;
}

class Adam {
 public:
  Adam() = default;
  Adam(double lr, double beta1, double beta2, double epsilon)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon) {}

  void attach(const ParameterStore& store) {
    m_.clear();
    v_.clear();
    for (const auto& p : store.all()) {
      m_[p.name].assign(p.tensor.numel(), 0.0);
      v_[p.name].assign(p.tensor.numel(), 0.0);
    }
    t_ = 0;
  }

  void step(ParameterStore& store, const std::map<std::string, Tensor>& grads) {
    ++t_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (auto& p : store.all()) {
      auto git = grads.find(p.name);
      if (git == grads.end())
        throw ContractError("Adam: missing gradient for parameter '" + p.name + "'");
      const auto& g = git->second.data();
      auto& m = m_.at(p.name);
      auto& v = v_.at(p.name);
      auto& w = p.tensor.data();
      for (size_t i = 0; i < w.size(); ++i) {
        m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
        v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
        double mhat = m[i] / bc1;
        double vhat = v[i] / bc2;
        w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
      }
    }
  }

  std::int64_t step_count() const { return t_; }
  double learning_rate() const { return lr_; }
  double beta1() const { return beta1_; }
  double beta2() const { return beta2_; }
  double epsilon() const { return eps_; }

  std::vector<double>& moment1(const std::string& name) { return m_.at(name); }
  std::vector<double>& moment2(const std::string& name) { return v_.at(name); }
  const std::vector<double>& moment1(const std::string& name) const { return m_.at(name); }
  const std::vector<double>& moment2(const std::string& name) const { return v_.at(name); }
  void set_step_count(std::int64_t t) { t_ = t; }

 private:
  double lr_ = 1e-3;
  double beta1_ = 0.9;
  double beta2_ = 0.999;
  double eps_ = 1e-8;
  std::int64_t t_ = 0;
  std::unordered_map<std::string, std::vector<double>> m_;
  std::unordered_map<std::string, std::vector<double>> v_;
};

// shadow <- decay*shadow + (1-decay)*param, applied after each optimizer step.
inline void ema_update(ParameterStore& store, double decay) {
  if (decay < 0.0 || decay >= 1.0)
    throw ContractError("ema_update: decay must lie in [0,1)");
  for (auto& p : store.all()) {
    const auto& w = p.tensor.data();
    for (size_t i = 0; i < w.size(); ++i) p.ema[i] = decay * p.ema[i] + (1.0 - decay) * w[i];
  }
}

// Exchange live parameter values with their shadows; calling twice restores
// the original values bit for bit.
inline void ema_swap(ParameterStore& store) {
  for (auto& p : store.all()) std::swap(p.tensor.data(), p.ema);
}

}  // namespace mpmrc
