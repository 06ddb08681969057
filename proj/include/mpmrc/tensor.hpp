#pragma once

// Dense 64-bit tensors with define-by-run reverse-mode differentiation.
//
// Every operation builds a graph node holding the forward value and a
// closure that scatters the incoming gradient to its parents. backward()
// runs the closures in reverse topological order. Graphs are rebuilt on
// every forward pass; nothing is cached between steps.
//
// Scalars have the empty shape {} and one element. Matrices are row-major
// [rows, cols]. Masks are plain byte vectors and never carry gradient.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mpmrc/errors.hpp"
#include "mpmrc/types.hpp"

namespace mpmrc {

namespace detail {

inline int shape_numel(const Shape& s) {
  int n = 1;
  for (int d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // allocated lazily, same size as value
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  int numel() const { return static_cast<int>(value.size()); }

  void ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), 0.0);
  }

  bool all_finite_value() const {
    for (double v : value)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

}  // namespace detail

class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double v, bool requires_grad = false) {
    return make_leaf({}, std::vector<double>{v}, requires_grad);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    int n = detail::shape_numel(shape);
    return make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
  }

  static Tensor full(Shape shape, double v, bool requires_grad = false) {
    int n = detail::shape_numel(shape);
    return make_leaf(std::move(shape), std::vector<double>(n, v), requires_grad);
  }

  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
    if (detail::shape_numel(shape) != static_cast<int>(data.size()))
      throw ContractError("Tensor: shape " + detail::shape_str(shape) + " does not match " +
                          std::to_string(data.size()) + " elements");
    for (int d : shape)
      if (d <= 0) throw ContractError("Tensor: non-positive dimension in " + detail::shape_str(shape));
    return make_leaf(std::move(shape), std::move(data), requires_grad);
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node()->shape; }
  int numel() const { return node()->numel(); }
  int rank() const { return static_cast<int>(node()->shape.size()); }
  bool is_scalar() const { return node()->shape.empty(); }

  int rows() const {
    require_rank(2, "rows");
    return node()->shape[0];
  }
  int cols() const {
    require_rank(2, "cols");
    return node()->shape[1];
  }
  int size() const {
    require_rank(1, "size");
    return node()->shape[0];
  }

  double item() const {
    if (!is_scalar()) throw ContractError("item: tensor is not a scalar");
    return node()->value[0];
  }
  double at(int i) const {
    require_rank(1, "at");
    return node()->value[static_cast<size_t>(i)];
  }
  double at(int i, int j) const {
    require_rank(2, "at");
    return node()->value[static_cast<size_t>(i) * cols() + j];
  }

  std::vector<double>& data() { return node()->value; }
  const std::vector<double>& data() const { return node()->value; }

  bool requires_grad() const { return node()->requires_grad; }
  bool has_grad() const { return !node()->grad.empty(); }
  const std::vector<double>& grad() const {
    if (!has_grad()) throw ContractError("grad: no gradient accumulated");
    return node()->grad;
  }
  std::vector<double>& grad_mutable() {
    if (!has_grad()) throw ContractError("grad: no gradient accumulated");
    return node()->grad;
  }
  void zero_grad() { node()->grad.assign(node()->value.size(), 0.0); }

  // Validity check: true iff no NaN/Inf anywhere in the values.
  bool all_finite() const { return node()->all_finite_value(); }

  const char* op() const { return node()->op; }

  std::shared_ptr<detail::Node> node_ptr() const { return node_; }

 private:
  friend Tensor wrap_node(std::shared_ptr<detail::Node> n);

  static Tensor make_leaf(Shape shape, std::vector<double> data, bool requires_grad) {
    auto n = std::make_shared<detail::Node>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

  detail::Node* node() const {
    if (!node_) throw ContractError("Tensor: use of undefined tensor");
    return node_.get();
  }

  void require_rank(int r, const char* what) const {
    if (rank() != r)
      throw ContractError(std::string(what) + ": expected rank " + std::to_string(r) + ", got shape " +
                          detail::shape_str(node()->shape));
  }

  std::shared_ptr<detail::Node> node_;
};

inline Tensor wrap_node(std::shared_ptr<detail::Node> n) {
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

namespace detail {

inline std::shared_ptr<Node> new_node(const char* op, Shape shape, std::vector<double> value,
                                      std::vector<std::shared_ptr<Node>> parents) {
  auto n = std::make_shared<Node>();
  n->op = op;
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  return n;
}

inline void check_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape())
    throw ContractError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                        shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise arithmetic
// ---------------------------------------------------------------------------

inline Tensor add(const Tensor& a, const Tensor& b) {
  detail::check_same_shape("add", a, b);
  auto pa = a.node_ptr(), pb = b.node_ptr();
  std::vector<double> v(pa->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa->value[i] + pb->value[i];
  auto n = detail::new_node("add", a.shape(), std::move(v), {pa, pb});
  if (n->requires_grad) {
    n->backward_fn = [pa, pb](detail::Node& self) {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i];
      }
    };
  }
  return wrap_node(n);
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  detail::check_same_shape("sub", a, b);
  auto pa = a.node_ptr(), pb = b.node_ptr();
  std::vector<double> v(pa->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa->value[i] - pb->value[i];
  auto n = detail::new_node("sub", a.shape(), std::move(v), {pa, pb});
  if (n->requires_grad) {
    n->backward_fn = [pa, pb](detail::Node& self) {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] -= self.grad[i];
      }
    };
  }
  return wrap_node(n);
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  detail::check_same_shape("mul", a, b);
  auto pa = a.node_ptr(), pb = b.node_ptr();
  std::vector<double> v(pa->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa->value[i] * pb->value[i];
  auto n = detail::new_node("mul", a.shape(), std::move(v), {pa, pb});
  if (n->requires_grad) {
    n->backward_fn = [pa, pb](detail::Node& self) {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * pb->value[i];
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i] * pa->value[i];
      }
    };
  }
  return wrap_node(n);
}

inline Tensor scale(const Tensor& a, double k) {
  auto pa = a.node_ptr();
  std::vector<double> v(pa->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa->value[i] * k;
  auto n = detail::new_node("scale", a.shape(), std::move(v), {pa});
  if (n->requires_grad) {
    n->backward_fn = [pa, k](detail::Node& self) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * k;
    };
  }
  return wrap_node(n);
}

inline Tensor add_scalar(const Tensor& a, double k) {
  auto pa = a.node_ptr();
  std::vector<double> v(pa->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa->value[i] + k;
  auto n = detail::new_node("add_scalar", a.shape(), std::move(v), {pa});
  if (n->requires_grad) {
    n->backward_fn = [pa](detail::Node& self) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i];
    };
  }
  return wrap_node(n);
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

inline Tensor sigmoid(const Tensor& a) {
  auto pa = a.node_ptr();
  std::vector<double> v(pa->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / (1.0 + std::exp(-pa->value[i]));
  auto n = detail::new_node("sigmoid", a.shape(), std::move(v), {pa});
  if (n->requires_grad) {
    n->backward_fn = [pa](detail::Node& self) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        double y = self.value[i];
        pa->grad[i] += self.grad[i] * y * (1.0 - y);
      }
    };
  }
  return wrap_node(n);
}

inline Tensor tanh(const Tensor& a) {
  auto pa = a.node_ptr();
  std::vector<double> v(pa->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::tanh(pa->value[i]);
  auto n = detail::new_node("tanh", a.shape(), std::move(v), {pa});
  if (n->requires_grad) {
    n->backward_fn = [pa](detail::Node& self) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        double y = self.value[i];
        pa->grad[i] += self.grad[i] * (1.0 - y * y);
      }
    };
  }
  return wrap_node(n);
}

inline Tensor relu(const Tensor& a) {
  auto pa = a.node_ptr();
  std::vector<double> v(pa->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = pa->value[i] > 0.0 ? pa->value[i] : 0.0;
  auto n = detail::new_node("relu", a.shape(), std::move(v), {pa});
  if (n->requires_grad) {
    n->backward_fn = [pa](detail::Node& self) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        if (pa->value[i] > 0.0) pa->grad[i] += self.grad[i];
    };
  }
  return wrap_node(n);
}

// ln(max(x, floor)); the floor keeps early-training losses finite.
inline Tensor log_clamped(const Tensor& a, double floor = 1e-30) {
  auto pa = a.node_ptr();
  std::vector<double> v(pa->value.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = std::log(std::max(pa->value[i], floor));
  auto n = detail::new_node("log", a.shape(), std::move(v), {pa});
  if (n->requires_grad) {
    n->backward_fn = [pa, floor](detail::Node& self) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        if (pa->value[i] > floor) pa->grad[i] += self.grad[i] / pa->value[i];
    };
  }
  return wrap_node(n);
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows())
    throw ContractError("matmul: incompatible shapes " + detail::shape_str(a.shape()) + " x " +
                        detail::shape_str(b.shape()));
  const int m = a.rows(), k = a.cols(), n2 = b.cols();
  auto pa = a.node_ptr(), pb = b.node_ptr();
  std::vector<double> v(static_cast<size_t>(m) * n2, 0.0);
  for (int i = 0; i < m; ++i)
    for (int l = 0; l < k; ++l) {
      double ail = pa->value[static_cast<size_t>(i) * k + l];
      if (ail == 0.0) continue;
      for (int j = 0; j < n2; ++j) v[static_cast<size_t>(i) * n2 + j] += ail * pb->value[static_cast<size_t>(l) * n2 + j];
    }
  auto n = detail::new_node("matmul", {m, n2}, std::move(v), {pa, pb});
  if (n->requires_grad) {
    n->backward_fn = [pa, pb, m, k, n2](detail::Node& self) {
      if (pa->requires_grad) {
        pa->ensure_grad();
        // dA = dY * B^T
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) {
            double s = 0.0;
            for (int j = 0; j < n2; ++j)
              s += self.grad[static_cast<size_t>(i) * n2 + j] * pb->value[static_cast<size_t>(l) * n2 + j];
            pa->grad[static_cast<size_t>(i) * k + l] += s;
          }
      }
      if (pb->requires_grad) {
        pb->ensure_grad();
        // dB = A^T * dY
        for (int l = 0; l < k; ++l)
          for (int j = 0; j < n2; ++j) {
            double s = 0.0;
            for (int i = 0; i < m; ++i)
              s += pa->value[static_cast<size_t>(i) * k + l] * self.grad[static_cast<size_t>(i) * n2 + j];
            pb->grad[static_cast<size_t>(l) * n2 + j] += s;
          }
      }
    };
  }
  return wrap_node(n);
}

// A[m,k] * x[k] -> [m]
inline Tensor matvec(const Tensor& a, const Tensor& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.cols() != x.size())
    throw ContractError("matvec: incompatible shapes " + detail::shape_str(a.shape()) + " x " +
                        detail::shape_str(x.shape()));
  const int m = a.rows(), k = a.cols();
  auto pa = a.node_ptr(), px = x.node_ptr();
  std::vector<double> v(m, 0.0);
  for (int i = 0; i < m; ++i) {
    double s = 0.0;
    for (int l = 0; l < k; ++l) s += pa->value[static_cast<size_t>(i) * k + l] * px->value[l];
    v[i] = s;
  }
  auto n = detail::new_node("matvec", {m}, std::move(v), {pa, px});
  if (n->requires_grad) {
    n->backward_fn = [pa, px, m, k](detail::Node& self) {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) pa->grad[static_cast<size_t>(i) * k + l] += self.grad[i] * px->value[l];
      }
      if (px->requires_grad) {
        px->ensure_grad();
        for (int l = 0; l < k; ++l) {
          double s = 0.0;
          for (int i = 0; i < m; ++i) s += pa->value[static_cast<size_t>(i) * k + l] * self.grad[i];
          px->grad[l] += s;
        }
      }
    };
  }
  return wrap_node(n);
}

// A^T * x: A[m,k], x[m] -> [k]
inline Tensor matvec_t(const Tensor& a, const Tensor& x) {
  if (a.rank() != 2 || x.rank() != 1 || a.rows() != x.size())
    throw ContractError("matvec_t: incompatible shapes " + detail::shape_str(a.shape()) + " x " +
                        detail::shape_str(x.shape()));
  const int m = a.rows(), k = a.cols();
  auto pa = a.node_ptr(), px = x.node_ptr();
  std::vector<double> v(k, 0.0);
  for (int i = 0; i < m; ++i) {
    double xi = px->value[i];
    if (xi == 0.0) continue;
    for (int l = 0; l < k; ++l) v[l] += pa->value[static_cast<size_t>(i) * k + l] * xi;
  }
  auto n = detail::new_node("matvec_t", {k}, std::move(v), {pa, px});
  if (n->requires_grad) {
    n->backward_fn = [pa, px, m, k](detail::Node& self) {
      if (pa->requires_grad) {
        pa->ensure_grad();
        for (int i = 0; i < m; ++i)
          for (int l = 0; l < k; ++l) pa->grad[static_cast<size_t>(i) * k + l] += px->value[i] * self.grad[l];
      }
      if (px->requires_grad) {
        px->ensure_grad();
        for (int i = 0; i < m; ++i) {
          double s = 0.0;
          for (int l = 0; l < k; ++l) s += pa->value[static_cast<size_t>(i) * k + l] * self.grad[l];
          px->grad[i] += s;
        }
      }
    };
  }
  return wrap_node(n);
}

inline Tensor dot(const Tensor& u, const Tensor& v) {
  if (u.rank() != 1 || v.rank() != 1 || u.size() != v.size())
    throw ContractError("dot: incompatible shapes " + detail::shape_str(u.shape()) + " . " +
                        detail::shape_str(v.shape()));
  auto pu = u.node_ptr(), pv = v.node_ptr();
  double s = 0.0;
  for (size_t i = 0; i < pu->value.size(); ++i) s += pu->value[i] * pv->value[i];
  auto n = detail::new_node("dot", {}, std::vector<double>{s}, {pu, pv});
  if (n->requires_grad) {
    n->backward_fn = [pu, pv](detail::Node& self) {
      double g = self.grad[0];
      if (pu->requires_grad) {
        pu->ensure_grad();
        for (size_t i = 0; i < pu->value.size(); ++i) pu->grad[i] += g * pv->value[i];
      }
      if (pv->requires_grad) {
        pv->ensure_grad();
        for (size_t i = 0; i < pv->value.size(); ++i) pv->grad[i] += g * pu->value[i];
      }
    };
  }
  return wrap_node(n);
}

inline Tensor transpose(const Tensor& a) {
  if (a.rank() != 2) throw ContractError("transpose: expected a matrix");
  const int m = a.rows(), k = a.cols();
  auto pa = a.node_ptr();
  std::vector<double> v(static_cast<size_t>(m) * k);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < k; ++j) v[static_cast<size_t>(j) * m + i] = pa->value[static_cast<size_t>(i) * k + j];
  auto n = detail::new_node("transpose", {k, m}, std::move(v), {pa});
  if (n->requires_grad) {
    n->backward_fn = [pa, m, k](detail::Node& self) {
      pa->ensure_grad();
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < k; ++j)
          pa->grad[static_cast<size_t>(i) * k + j] += self.grad[static_cast<size_t>(j) * m + i];
    };
  }
  return wrap_node(n);
}

// ---------------------------------------------------------------------------
// Structure: slicing, stacking, concatenation
// ---------------------------------------------------------------------------

inline Tensor slice_vec(const Tensor& x, int start, int len) {
  if (x.rank() != 1 || start < 0 || len <= 0 || start + len > x.size())
    throw ContractError("slice_vec: range [" + std::to_string(start) + "," + std::to_string(start + len) +
                        ") out of bounds for " + detail::shape_str(x.shape()));
  auto px = x.node_ptr();
  std::vector<double> v(px->value.begin() + start, px->value.begin() + start + len);
  auto n = detail::new_node("slice_vec", {len}, std::move(v), {px});
  if (n->requires_grad) {
    n->backward_fn = [px, start](detail::Node& self) {
      px->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) px->grad[start + i] += self.grad[i];
    };
  }
  return wrap_node(n);
}

inline Tensor row(const Tensor& a, int r) {
  if (a.rank() != 2 || r < 0 || r >= a.rows())
    throw ContractError("row: index " + std::to_string(r) + " out of bounds for " +
                        detail::shape_str(a.shape()));
  const int k = a.cols();
  auto pa = a.node_ptr();
  std::vector<double> v(pa->value.begin() + static_cast<size_t>(r) * k,
                        pa->value.begin() + static_cast<size_t>(r + 1) * k);
  auto n = detail::new_node("row", {k}, std::move(v), {pa});
  if (n->requires_grad) {
    n->backward_fn = [pa, r, k](detail::Node& self) {
      pa->ensure_grad();
      for (int j = 0; j < k; ++j) pa->grad[static_cast<size_t>(r) * k + j] += self.grad[j];
    };
  }
  return wrap_node(n);
}

inline Tensor concat_vec(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_vec: empty input");
  std::vector<std::shared_ptr<detail::Node>> ps;
  std::vector<double> v;
  for (const auto& p : parts) {
    if (p.rank() != 1) throw ContractError("concat_vec: all parts must be vectors");
    ps.push_back(p.node_ptr());
    v.insert(v.end(), p.data().begin(), p.data().end());
  }
  const int total = static_cast<int>(v.size());
  auto n = detail::new_node("concat_vec", {total}, std::move(v), std::move(ps));
  if (n->requires_grad) {
    auto parents = n->parents;
    n->backward_fn = [parents](detail::Node& self) {
      size_t off = 0;
      for (const auto& p : parents) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (size_t i = 0; i < p->value.size(); ++i) p->grad[i] += self.grad[off + i];
        }
        off += p->value.size();
      }
    };
  }
  return wrap_node(n);
}

inline Tensor stack_rows(const std::vector<Tensor>& rows_in) {
  if (rows_in.empty()) throw ContractError("stack_rows: empty input");
  const int k = rows_in.front().size();
  std::vector<std::shared_ptr<detail::Node>> ps;
  std::vector<double> v;
  for (const auto& r : rows_in) {
    if (r.rank() != 1 || r.size() != k) throw ContractError("stack_rows: inconsistent row widths");
    ps.push_back(r.node_ptr());
    v.insert(v.end(), r.data().begin(), r.data().end());
  }
  const int m = static_cast<int>(rows_in.size());
  auto n = detail::new_node("stack_rows", {m, k}, std::move(v), std::move(ps));
  if (n->requires_grad) {
    auto parents = n->parents;
    n->backward_fn = [parents, k](detail::Node& self) {
      for (size_t r = 0; r < parents.size(); ++r) {
        const auto& p = parents[r];
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (int j = 0; j < k; ++j) p->grad[j] += self.grad[r * k + j];
      }
    };
  }
  return wrap_node(n);
}

// Concatenate matrices along the row axis (all must share column count).
inline Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_rows: empty input");
  const int k = parts.front().cols();
  std::vector<std::shared_ptr<detail::Node>> ps;
  std::vector<double> v;
  int m = 0;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.cols() != k) throw ContractError("concat_rows: inconsistent column counts");
    ps.push_back(p.node_ptr());
    v.insert(v.end(), p.data().begin(), p.data().end());
    m += p.rows();
  }
  auto n = detail::new_node("concat_rows", {m, k}, std::move(v), std::move(ps));
  if (n->requires_grad) {
    auto parents = n->parents;
    n->backward_fn = [parents](detail::Node& self) {
      size_t off = 0;
      for (const auto& p : parents) {
        if (p->requires_grad) {
          p->ensure_grad();
          for (size_t i = 0; i < p->value.size(); ++i) p->grad[i] += self.grad[off + i];
        }
        off += p->value.size();
      }
    };
  }
  return wrap_node(n);
}

// Concatenate matrices along the column axis (all must share row count).
inline Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: empty input");
  const int m = parts.front().rows();
  int k = 0;
  std::vector<std::shared_ptr<detail::Node>> ps;
  std::vector<int> widths;
  for (const auto& p : parts) {
    if (p.rank() != 2 || p.rows() != m) throw ContractError("concat_cols: inconsistent row counts");
    ps.push_back(p.node_ptr());
    widths.push_back(p.cols());
    k += p.cols();
  }
  std::vector<double> v(static_cast<size_t>(m) * k);
  int off = 0;
  for (size_t pi = 0; pi < ps.size(); ++pi) {
    int w = widths[pi];
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < w; ++j)
        v[static_cast<size_t>(i) * k + off + j] = ps[pi]->value[static_cast<size_t>(i) * w + j];
    off += w;
  }
  auto n = detail::new_node("concat_cols", {m, k}, std::move(v), std::move(ps));
  if (n->requires_grad) {
    auto parents = n->parents;
    n->backward_fn = [parents, widths, m, k](detail::Node& self) {
      int off2 = 0;
      for (size_t pi = 0; pi < parents.size(); ++pi) {
        int w = widths[pi];
        const auto& p = parents[pi];
        if (p->requires_grad) {
          p->ensure_grad();
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j)
              p->grad[static_cast<size_t>(i) * w + j] += self.grad[static_cast<size_t>(i) * k + off2 + j];
        }
        off2 += w;
      }
    };
  }
  return wrap_node(n);
}

// ---------------------------------------------------------------------------
// Reductions and indexing
// ---------------------------------------------------------------------------

inline Tensor sum(const Tensor& a) {
  auto pa = a.node_ptr();
  double s = 0.0;
  for (double x : pa->value) s += x;
  auto n = detail::new_node("sum", {}, std::vector<double>{s}, {pa});
  if (n->requires_grad) {
    n->backward_fn = [pa](detail::Node& self) {
      pa->ensure_grad();
      for (size_t i = 0; i < pa->value.size(); ++i) pa->grad[i] += self.grad[0];
    };
  }
  return wrap_node(n);
}

inline Tensor sum_sq(const Tensor& a) {
  auto pa = a.node_ptr();
  double s = 0.0;
  for (double x : pa->value) s += x * x;
  auto n = detail::new_node("sum_sq", {}, std::vector<double>{s}, {pa});
  if (n->requires_grad) {
    n->backward_fn = [pa](detail::Node& self) {
      pa->ensure_grad();
      for (size_t i = 0; i < pa->value.size(); ++i) pa->grad[i] += 2.0 * pa->value[i] * self.grad[0];
    };
  }
  return wrap_node(n);
}

// Sum of same-shape tensors in one node (keeps batch graphs shallow).
inline Tensor add_n(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractError("add_n: empty input");
  std::vector<std::shared_ptr<detail::Node>> ps;
  std::vector<double> v(parts.front().numel(), 0.0);
  for (const auto& p : parts) {
    if (p.shape() != parts.front().shape()) throw ContractError("add_n: shape mismatch");
    ps.push_back(p.node_ptr());
    for (size_t i = 0; i < v.size(); ++i) v[i] += p.data()[i];
  }
  auto n = detail::new_node("add_n", parts.front().shape(), std::move(v), std::move(ps));
  if (n->requires_grad) {
    auto parents = n->parents;
    n->backward_fn = [parents](detail::Node& self) {
      for (const auto& p : parents) {
        if (!p->requires_grad) continue;
        p->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
      }
    };
  }
  return wrap_node(n);
}

inline Tensor pick(const Tensor& x, int i) {
  if (x.rank() != 1 || i < 0 || i >= x.size())
    throw ContractError("pick: index " + std::to_string(i) + " out of bounds for " +
                        detail::shape_str(x.shape()));
  auto px = x.node_ptr();
  auto n = detail::new_node("pick", {}, std::vector<double>{px->value[i]}, {px});
  if (n->requires_grad) {
    n->backward_fn = [px, i](detail::Node& self) {
      px->ensure_grad();
      px->grad[i] += self.grad[0];
    };
  }
  return wrap_node(n);
}

// table[V,D] gathered by row ids -> [T,D]; gradients scatter-add into the table.
inline Tensor gather_rows(const Tensor& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw ContractError("gather_rows: table must be a matrix");
  if (ids.empty()) throw ContractError("gather_rows: empty id list");
  const int vcount = table.rows(), d = table.cols();
  for (int id : ids)
    if (id < 0 || id >= vcount)
      throw ContractError("gather_rows: id " + std::to_string(id) + " out of range [0," +
                          std::to_string(vcount) + ")");
  auto pt = table.node_ptr();
  std::vector<double> v(ids.size() * static_cast<size_t>(d));
  for (size_t t = 0; t < ids.size(); ++t)
    for (int j = 0; j < d; ++j) v[t * d + j] = pt->value[static_cast<size_t>(ids[t]) * d + j];
  auto n = detail::new_node("gather_rows", {static_cast<int>(ids.size()), d}, std::move(v), {pt});
  if (n->requires_grad) {
    n->backward_fn = [pt, ids, d](detail::Node& self) {
      pt->ensure_grad();
      for (size_t t = 0; t < ids.size(); ++t)
        for (int j = 0; j < d; ++j) pt->grad[static_cast<size_t>(ids[t]) * d + j] += self.grad[t * d + j];
    };
  }
  return wrap_node(n);
}

// ---------------------------------------------------------------------------
// Softmax family (masked positions get probability exactly 0)
// ---------------------------------------------------------------------------

namespace detail {

// In-place masked softmax over a strided slice; returns false if fully masked.
inline bool softmax_slice(const std::vector<double>& in, std::vector<double>& out, const Mask& mask,
                          size_t base, size_t stride, int count) {
  double mx = -1e300;
  bool any = false;
  for (int i = 0; i < count; ++i)
    if (mask[i]) {
      any = true;
      mx = std::max(mx, in[base + stride * i]);
    }
  if (!any) return false;
  double z = 0.0;
  for (int i = 0; i < count; ++i) {
    if (mask[i]) {
      double e = std::exp(in[base + stride * i] - mx);
      out[base + stride * i] = e;
      z += e;
    } else {
      out[base + stride * i] = 0.0;
    }
  }
  for (int i = 0; i < count; ++i)
    if (mask[i]) out[base + stride * i] /= z;
  return true;
}

// dL/dx = y * (dL/dy - sum(y * dL/dy)) over the slice.
inline void softmax_slice_backward(const std::vector<double>& y, const std::vector<double>& gy,
                                   std::vector<double>& gx, size_t base, size_t stride, int count) {
  double s = 0.0;
  for (int i = 0; i < count; ++i) s += y[base + stride * i] * gy[base + stride * i];
  for (int i = 0; i < count; ++i)
    gx[base + stride * i] += y[base + stride * i] * (gy[base + stride * i] - s);
}

}  // namespace detail

inline Tensor masked_softmax(const Tensor& x, const Mask& mask) {
  if (x.rank() != 1) throw ContractError("masked_softmax: expected a vector");
  if (static_cast<int>(mask.size()) != x.size())
    throw ContractError("masked_softmax: mask length mismatch");
  auto px = x.node_ptr();
  std::vector<double> v(px->value.size(), 0.0);
  if (!detail::softmax_slice(px->value, v, mask, 0, 1, x.size()))
    throw ContractError("masked_softmax: all positions masked");
  auto n = detail::new_node("masked_softmax", x.shape(), std::move(v), {px});
  if (n->requires_grad) {
    n->backward_fn = [px](detail::Node& self) {
      px->ensure_grad();
      detail::softmax_slice_backward(self.value, self.grad, px->grad, 0, 1, self.numel());
    };
  }
  return wrap_node(n);
}

// Column-wise masked softmax of S[q,p]: each column normalized over rows
// (the row mask applies to all columns alike).
inline Tensor softmax_cols(const Tensor& s, const Mask& row_mask) {
  if (s.rank() != 2) throw ContractError("softmax_cols: expected a matrix");
  if (static_cast<int>(row_mask.size()) != s.rows())
    throw ContractError("softmax_cols: mask length mismatch");
  const int q = s.rows(), p = s.cols();
  auto ps = s.node_ptr();
  std::vector<double> v(ps->value.size(), 0.0);
  for (int j = 0; j < p; ++j)
    if (!detail::softmax_slice(ps->value, v, row_mask, j, p, q))
      throw ContractError("softmax_cols: all rows masked");
  auto n = detail::new_node("softmax_cols", s.shape(), std::move(v), {ps});
  if (n->requires_grad) {
    n->backward_fn = [ps, q, p](detail::Node& self) {
      ps->ensure_grad();
      for (int j = 0; j < p; ++j) detail::softmax_slice_backward(self.value, self.grad, ps->grad, j, p, q);
    };
  }
  return wrap_node(n);
}

// Row-wise softmax of S[n,m] with a per-element mask matrix.
inline Tensor masked_softmax_rows(const Tensor& s, const Mask& elem_mask) {
  if (s.rank() != 2) throw ContractError("masked_softmax_rows: expected a matrix");
  if (elem_mask.size() != static_cast<size_t>(s.numel()))
    throw ContractError("masked_softmax_rows: mask size mismatch");
  const int rows_n = s.rows(), m = s.cols();
  auto ps = s.node_ptr();
  std::vector<double> v(ps->value.size(), 0.0);
  for (int i = 0; i < rows_n; ++i) {
    Mask rm(elem_mask.begin() + static_cast<size_t>(i) * m, elem_mask.begin() + static_cast<size_t>(i + 1) * m);
    if (!detail::softmax_slice(ps->value, v, rm, static_cast<size_t>(i) * m, 1, m))
      throw ContractError("masked_softmax_rows: row " + std::to_string(i) + " fully masked");
  }
  auto n = detail::new_node("masked_softmax_rows", s.shape(), std::move(v), {ps});
  if (n->requires_grad) {
    n->backward_fn = [ps, rows_n, m](detail::Node& self) {
      ps->ensure_grad();
      for (int i = 0; i < rows_n; ++i)
        detail::softmax_slice_backward(self.value, self.grad, ps->grad, static_cast<size_t>(i) * m, 1, m);
    };
  }
  return wrap_node(n);
}

// Column-wise max of S[q,p] over unmasked rows -> [p]; gradient flows to the
// first maximizing row of each column.
inline Tensor max_cols_masked(const Tensor& s, const Mask& row_mask) {
  if (s.rank() != 2) throw ContractError("max_cols_masked: expected a matrix");
  if (static_cast<int>(row_mask.size()) != s.rows())
    throw ContractError("max_cols_masked: mask length mismatch");
  const int q = s.rows(), p = s.cols();
  auto ps = s.node_ptr();
  std::vector<double> v(p);
  auto argmax = std::make_shared<std::vector<int>>(p, -1);
  for (int j = 0; j < p; ++j) {
    double best = -1e300;
    int bi = -1;
    for (int i = 0; i < q; ++i)
      if (row_mask[i] && ps->value[static_cast<size_t>(i) * p + j] > best) {
        best = ps->value[static_cast<size_t>(i) * p + j];
        bi = i;
      }
    if (bi < 0) throw ContractError("max_cols_masked: all rows masked");
    v[j] = best;
    (*argmax)[j] = bi;
  }
  auto n = detail::new_node("max_cols_masked", {p}, std::move(v), {ps});
  if (n->requires_grad) {
    n->backward_fn = [ps, argmax, p](detail::Node& self) {
      ps->ensure_grad();
      for (int j = 0; j < p; ++j) ps->grad[static_cast<size_t>((*argmax)[j]) * p + j] += self.grad[j];
    };
  }
  return wrap_node(n);
}

// ---------------------------------------------------------------------------
// Row-broadcast helpers
// ---------------------------------------------------------------------------

// Y[i,:] = M[i,:] + r
inline Tensor add_rowvec(const Tensor& m, const Tensor& r) {
  if (m.rank() != 2 || r.rank() != 1 || m.cols() != r.size())
    throw ContractError("add_rowvec: incompatible shapes");
  const int rows_n = m.rows(), k = m.cols();
  auto pm = m.node_ptr(), pr = r.node_ptr();
  std::vector<double> v(pm->value.size());
  for (int i = 0; i < rows_n; ++i)
    for (int j = 0; j < k; ++j)
      v[static_cast<size_t>(i) * k + j] = pm->value[static_cast<size_t>(i) * k + j] + pr->value[j];
  auto n = detail::new_node("add_rowvec", m.shape(), std::move(v), {pm, pr});
  if (n->requires_grad) {
    n->backward_fn = [pm, pr, rows_n, k](detail::Node& self) {
      if (pm->requires_grad) {
        pm->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) pm->grad[i] += self.grad[i];
      }
      if (pr->requires_grad) {
        pr->ensure_grad();
        for (int i = 0; i < rows_n; ++i)
          for (int j = 0; j < k; ++j) pr->grad[j] += self.grad[static_cast<size_t>(i) * k + j];
      }
    };
  }
  return wrap_node(n);
}

// Y[i,j] = M[i,j] * r[j]
inline Tensor rows_mul_vec(const Tensor& m, const Tensor& r) {
  if (m.rank() != 2 || r.rank() != 1 || m.cols() != r.size())
    throw ContractError("rows_mul_vec: incompatible shapes");
  const int rows_n = m.rows(), k = m.cols();
  auto pm = m.node_ptr(), pr = r.node_ptr();
  std::vector<double> v(pm->value.size());
  for (int i = 0; i < rows_n; ++i)
    for (int j = 0; j < k; ++j)
      v[static_cast<size_t>(i) * k + j] = pm->value[static_cast<size_t>(i) * k + j] * pr->value[j];
  auto n = detail::new_node("rows_mul_vec", m.shape(), std::move(v), {pm, pr});
  if (n->requires_grad) {
    n->backward_fn = [pm, pr, rows_n, k](detail::Node& self) {
      if (pm->requires_grad) {
        pm->ensure_grad();
        for (int i = 0; i < rows_n; ++i)
          for (int j = 0; j < k; ++j)
            pm->grad[static_cast<size_t>(i) * k + j] += self.grad[static_cast<size_t>(i) * k + j] * pr->value[j];
      }
      if (pr->requires_grad) {
        pr->ensure_grad();
        for (int i = 0; i < rows_n; ++i)
          for (int j = 0; j < k; ++j)
            pr->grad[j] += self.grad[static_cast<size_t>(i) * k + j] * pm->value[static_cast<size_t>(i) * k + j];
      }
    };
  }
  return wrap_node(n);
}

// Zero the diagonal of a square matrix; off-diagonal entries pass through.
inline Tensor zero_diag(const Tensor& s) {
  if (s.rank() != 2 || s.rows() != s.cols()) throw ContractError("zero_diag: expected a square matrix");
  const int nn = s.rows();
  auto ps = s.node_ptr();
  std::vector<double> v = ps->value;
  for (int i = 0; i < nn; ++i) v[static_cast<size_t>(i) * nn + i] = 0.0;
  auto n = detail::new_node("zero_diag", s.shape(), std::move(v), {ps});
  if (n->requires_grad) {
    n->backward_fn = [ps, nn](detail::Node& self) {
      ps->ensure_grad();
      for (int i = 0; i < nn; ++i)
        for (int j = 0; j < nn; ++j)
          if (i != j) ps->grad[static_cast<size_t>(i) * nn + j] += self.grad[static_cast<size_t>(i) * nn + j];
    };
  }
  return wrap_node(n);
}

// ---------------------------------------------------------------------------
// Reverse pass
// ---------------------------------------------------------------------------

namespace detail {

inline void topo_sort(const std::shared_ptr<Node>& root, std::vector<Node*>& order) {
  std::unordered_set<Node*> visited;
  // Iterative post-order: (node, next-parent-index)
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node* parent = node->parents[idx++].get();
      if (!visited.count(parent)) {
        visited.insert(parent);
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
}

}  // namespace detail

// Accumulates d(loss)/d(tensor) into .grad for every tensor reachable from
// the scalar loss. Callers zero parameter grads between steps.
inline void backward(const Tensor& loss) {
  if (!loss.is_scalar()) throw ContractError("backward: loss must be a scalar");
  auto root = loss.node_ptr();
  if (!std::isfinite(root->value[0]))
    throw NumericError(std::string("backward: non-finite loss from op '") + root->op + "'");
  std::vector<detail::Node*> order;
  detail::topo_sort(root, order);
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = *it;
    if (!n->requires_grad || !n->backward_fn) continue;
    if (n->grad.empty()) continue;  // not reached by any gradient path
    for (double v : n->value)
      if (!std::isfinite(v)) throw NumericError(std::string("backward: non-finite value in op '") + n->op + "'");
    for (double g : n->grad)
      if (!std::isfinite(g)) throw NumericError(std::string("backward: non-finite gradient into op '") + n->op + "'");
    n->backward_fn(*n);
  }
}

}  // namespace mpmrc
