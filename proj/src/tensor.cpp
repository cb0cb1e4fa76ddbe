#include "l2l/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <sstream>
#include <unordered_set>

#include <cblas.h>

#include "tensor_node.hpp"

namespace l2l {

namespace detail {

std::uint64_t next_node_id() {
  static std::atomic<std::uint64_t> counter{1};
  return counter.fetch_add(1, std::memory_order_relaxed);
}

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

namespace {

thread_local bool g_grad_enabled = true;

NodePtr make_node(Shape shape, std::vector<double> data, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->id = detail::next_node_id();
  node->shape = std::move(shape);
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

// Creates an op output. The backward closure is only recorded when some input
// participates in autodiff and recording is enabled.
Tensor make_result(Shape shape, std::vector<double> data, std::initializer_list<const Tensor*> inputs,
                   std::function<void(Node&)> backward_fn) {
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor* in : inputs) needs_grad = needs_grad || in->requires_grad();
  }
  auto node = make_node(std::move(shape), std::move(data), needs_grad);
  if (needs_grad) {
    for (const Tensor* in : inputs) node->parents.push_back(in->node());
    node->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(node));
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": undefined tensor");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  require_defined(a, op);
  require_defined(b, op);
  if (a.shape() != b.shape()) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": " + shape_to_string(a.shape()) +
                                              " vs " + shape_to_string(b.shape()));
  }
}

void require_rank(const Tensor& a, std::size_t rank, const char* op) {
  require_defined(a, op);
  if (a.rank() != rank) {
    throw Error(ErrorCode::ShapeMismatch, std::string(op) + ": expected rank " +
                                              std::to_string(rank) + ", got " +
                                              shape_to_string(a.shape()));
  }
}

enum class BinaryKind { Add, Sub, Mul, Div };

Tensor binary(const Tensor& a, const Tensor& b, BinaryKind kind, const char* name) {
  require_same_shape(a, b, name);
  const auto& x = a.node()->data;
  const auto& y = b.node()->data;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    switch (kind) {
      case BinaryKind::Add: out[i] = x[i] + y[i]; break;
      case BinaryKind::Sub: out[i] = x[i] - y[i]; break;
      case BinaryKind::Mul: out[i] = x[i] * y[i]; break;
      case BinaryKind::Div: out[i] = x[i] / y[i]; break;
    }
  }
  NodePtr na = a.node();
  NodePtr nb = b.node();
  return make_result(a.shape(), std::move(out), {&a, &b}, [na, nb, kind](Node& self) {
    const auto& g = self.grad;
    const auto& x = na->data;
    const auto& y = nb->data;
    if (na->requires_grad) {
      auto& ga = na->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        switch (kind) {
          case BinaryKind::Add:
          case BinaryKind::Sub: ga[i] += g[i]; break;
          case BinaryKind::Mul: ga[i] += g[i] * y[i]; break;
          case BinaryKind::Div: ga[i] += g[i] / y[i]; break;
        }
      }
    }
    if (nb->requires_grad) {
      auto& gb = nb->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) {
        switch (kind) {
          case BinaryKind::Add: gb[i] += g[i]; break;
          case BinaryKind::Sub: gb[i] -= g[i]; break;
          case BinaryKind::Mul: gb[i] += g[i] * x[i]; break;
          case BinaryKind::Div: gb[i] -= g[i] * x[i] / (y[i] * y[i]); break;
        }
      }
    }
  });
}

// Unary op helper: forward maps each value, backward multiplies by a local
// derivative computed from (input, output).
template <typename Fwd, typename Deriv>
Tensor unary(const Tensor& a, Fwd fwd, Deriv deriv) {
  const auto& x = a.node()->data;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = fwd(x[i]);
  NodePtr na = a.node();
  return make_result(a.shape(), std::move(out), {&a}, [na, deriv](Node& self) {
    auto& ga = na->ensure_grad();
    const auto& x = na->data;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i] * deriv(x[i], self.data[i]);
  });
}

}  // namespace

// ---- Tensor -----------------------------------------------------------------

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape_numel(shape) != values.size()) {
    throw Error(ErrorCode::ShapeMismatch, "shape " + shape_to_string(shape) + " holds " +
                                              std::to_string(shape_numel(shape)) + " values, got " +
                                              std::to_string(values.size()));
  }
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  std::vector<double> values(shape_numel(shape), value);
  return Tensor(make_node(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }
std::size_t Tensor::numel() const { return node_->data.size(); }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw Error(ErrorCode::AxisOutOfRange, "axis " + std::to_string(axis));
  return node_->shape[axis];
}

std::span<const double> Tensor::data() const { return node_->data; }
std::span<double> Tensor::mutable_data() { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) throw Error(ErrorCode::ShapeMismatch, "item() on " + shape_to_string(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const { return node_->data[i * node_->shape.at(1) + j]; }

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::set_requires_grad(bool value) { node_->requires_grad = value; }
bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
std::span<double> Tensor::mutable_grad() { return node_->ensure_grad(); }
void Tensor::zero_grad() {
  node_->grad.clear();
  node_->grad.shrink_to_fit();
}
std::uint64_t Tensor::id() const { return node_->id; }

Tensor Tensor::detach() const { return Tensor::from(shape(), node_->data, false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() noexcept { return g_grad_enabled; }

// ---- backward ---------------------------------------------------------------

void backward(const Tensor& loss, BackwardOptions options) {
  require_defined(loss, "backward");
  if (loss.numel() != 1) {
    throw Error(ErrorCode::NonScalarLoss, "loss has shape " + shape_to_string(loss.shape()));
  }
  if (!std::isfinite(loss.item())) {
    throw Error(ErrorCode::NonFiniteLoss, "loss value is " + std::to_string(loss.item()));
  }
  if (!loss.requires_grad()) return;

  // Owning pointers: releasing the graph below drops parent links while the
  // loop still walks these nodes.
  std::vector<NodePtr> order;
  std::unordered_set<Node*> seen;
  std::vector<NodePtr> stack{loss.node()};
  seen.insert(stack.back().get());
  while (!stack.empty()) {
    NodePtr n = std::move(stack.back());
    stack.pop_back();
    for (const auto& p : n->parents) {
      if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p);
    }
    order.push_back(std::move(n));
  }
  std::sort(order.begin(), order.end(), [](const NodePtr& a, const NodePtr& b) { return a->id > b->id; });

  // Interior grads are recomputed from scratch; leaves accumulate.
  for (const NodePtr& n : order) {
    if (!n->is_leaf()) n->grad.assign(n->data.size(), 0.0);
  }
  loss.node()->ensure_grad()[0] += 1.0;
  for (const NodePtr& n : order) {
    if (n->is_leaf()) continue;
    n->backward_fn(*n);
  }
  if (!options.retain_graph) {
    for (const NodePtr& n : order) {
      if (n->is_leaf()) continue;
      n->parents.clear();
      n->backward_fn = nullptr;
      n->requires_grad = false;
    }
  }
}

// ---- linear algebra -----------------------------------------------------------

namespace {

// c[rows×cols] += op(a)·op(b) with inner dimension `inner`, all row-major.
void gemm(bool trans_a, bool trans_b, std::size_t rows, std::size_t cols, std::size_t inner, const double* a,
          const double* b, double* c) {
  if (rows == 0 || cols == 0 || inner == 0) return;
  const auto lda = static_cast<blasint>(trans_a ? rows : inner);
  const auto ldb = static_cast<blasint>(trans_b ? inner : cols);
  cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans, trans_b ? CblasTrans : CblasNoTrans,
              static_cast<blasint>(rows), static_cast<blasint>(cols), static_cast<blasint>(inner), 1.0, a, lda, b, ldb,
              1.0, c, static_cast<blasint>(cols));
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) {
    throw Error(ErrorCode::ShapeMismatch,
                "matmul " + shape_to_string(a.shape()) + " x " + shape_to_string(b.shape()));
  }
  std::vector<double> out(m * n, 0.0);
  gemm(false, false, m, n, k, a.data().data(), b.data().data(), out.data());
  NodePtr na = a.node();
  NodePtr nb = b.node();
  return make_result({m, n}, std::move(out), {&a, &b}, [na, nb, m, k, n](Node& self) {
    // dA += dC · Bᵀ, dB += Aᵀ · dC
    if (na->requires_grad) gemm(false, true, m, k, n, self.grad.data(), nb->data.data(), na->ensure_grad().data());
    if (nb->requires_grad) gemm(true, false, k, n, m, na->data.data(), self.grad.data(), nb->ensure_grad().data());
  });
}

// ---- elementwise --------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Mul, "mul"); }
Tensor div(const Tensor& a, const Tensor& b) { return binary(a, b, BinaryKind::Div, "div"); }

Tensor add(const Tensor& a, double b) {
  require_defined(a, "add");
  return unary(a, [b](double x) { return x + b; }, [](double, double) { return 1.0; });
}
Tensor sub(const Tensor& a, double b) { return add(a, -b); }
Tensor mul(const Tensor& a, double b) {
  require_defined(a, "mul");
  return unary(a, [b](double x) { return x * b; }, [b](double, double) { return b; });
}
Tensor div(const Tensor& a, double b) {
  require_defined(a, "div");
  return unary(a, [b](double x) { return x / b; }, [b](double, double) { return 1.0 / b; });
}
Tensor rsub(double b, const Tensor& a) {
  require_defined(a, "rsub");
  return unary(a, [b](double x) { return b - x; }, [](double, double) { return -1.0; });
}

Tensor add_rowwise(const Tensor& x, const Tensor& bias) {
  require_rank(x, 2, "add_rowwise");
  require_rank(bias, 1, "add_rowwise");
  const std::size_t n = x.dim(0), d = x.dim(1);
  if (bias.dim(0) != d) {
    throw Error(ErrorCode::ShapeMismatch, "add_rowwise " + shape_to_string(x.shape()) + " + " +
                                              shape_to_string(bias.shape()));
  }
  std::vector<double> out(x.data().begin(), x.data().end());
  const auto bv = bias.data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) out[i * d + j] += bv[j];
  NodePtr nx = x.node();
  NodePtr nb = bias.node();
  return make_result(x.shape(), std::move(out), {&x, &bias}, [nx, nb, n, d](Node& self) {
    const auto& g = self.grad;
    if (nx->requires_grad) {
      auto& gx = nx->ensure_grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (nb->requires_grad) {
      auto& gb = nb->ensure_grad();
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) gb[j] += g[i * d + j];
    }
  });
}

// ---- activations --------------------------------------------------------------

Tensor sigmoid(const Tensor& a) {
  require_defined(a, "sigmoid");
  // Saves the output: σ' = σ(1 − σ).
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor gelu(const Tensor& a) {
  require_defined(a, "gelu");
  // Saves the input: gelu' = Φ(x) + x·φ(x).
  return unary(
      a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); },
      [](double x, double) {
        const double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
        const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
        return cdf + x * pdf;
      });
}

Tensor softmax_lastdim(const Tensor& a) {
  require_defined(a, "softmax_lastdim");
  if (a.rank() == 0) throw Error(ErrorCode::ShapeMismatch, "softmax of a scalar");
  const std::size_t d = a.shape().back();
  if (d == 0) throw Error(ErrorCode::ZeroLengthSequence, "softmax over empty dimension");
  const std::size_t rows = a.numel() / d;
  const auto x = a.data();
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * d;
    double* yr = out.data() + r * d;
    const double mx = *std::max_element(xr, xr + d);
    double total = 0.0;
    for (std::size_t j = 0; j < d; ++j) total += (yr[j] = std::exp(xr[j] - mx));
    for (std::size_t j = 0; j < d; ++j) yr[j] /= total;
  }
  NodePtr na = a.node();
  // Saves the output: dx = y ⊙ (g − ⟨g, y⟩).
  return make_result(a.shape(), std::move(out), {&a}, [na, rows, d](Node& self) {
    auto& ga = na->ensure_grad();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * d;
      const double* g = self.grad.data() + r * d;
      double dot = 0.0;
      for (std::size_t j = 0; j < d; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < d; ++j) ga[r * d + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor log(const Tensor& a) {
  require_defined(a, "log");
  for (double v : a.data()) {
    if (!(v > 0.0)) throw Error(ErrorCode::DomainError, "log of non-positive value " + std::to_string(v));
  }
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  require_defined(a, "clamp");
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x >= lo && x <= hi) ? 1.0 : 0.0; });
}

// ---- reductions ---------------------------------------------------------------

Tensor sum(const Tensor& a) {
  require_defined(a, "sum");
  double total = 0.0;
  for (double v : a.data()) total += v;
  NodePtr na = a.node();
  return make_result({}, {total}, {&a}, [na](Node& self) {
    auto& ga = na->ensure_grad();
    for (double& g : ga) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  require_defined(a, "mean");
  return div(sum(a), static_cast<double>(a.numel()));
}

Tensor sum(const Tensor& a, std::size_t axis) {
  require_defined(a, "sum");
  if (axis >= a.rank()) {
    throw Error(ErrorCode::AxisOutOfRange,
                "axis " + std::to_string(axis) + " for shape " + shape_to_string(a.shape()));
  }
  const Shape& s = a.shape();
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t n = s[axis];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  const auto x = a.data();
  std::vector<double> out(outer * inner, 0.0);
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += x[(o * n + k) * inner + i];
  NodePtr na = a.node();
  return make_result(std::move(out_shape), std::move(out), {&a}, [na, outer, n, inner](Node& self) {
    auto& ga = na->ensure_grad();
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t i = 0; i < inner; ++i) ga[(o * n + k) * inner + i] += self.grad[o * inner + i];
  });
}

Tensor mean(const Tensor& a, std::size_t axis) {
  const Tensor s = sum(a, axis);
  return div(s, static_cast<double>(a.dim(axis)));
}

// ---- shape ops ----------------------------------------------------------------

Tensor reshape(const Tensor& a, Shape shape) {
  require_defined(a, "reshape");
  if (shape_numel(shape) != a.numel()) {
    throw Error(ErrorCode::ShapeMismatch,
                "reshape " + shape_to_string(a.shape()) + " -> " + shape_to_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  NodePtr na = a.node();
  return make_result(std::move(shape), std::move(out), {&a}, [na](Node& self) {
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor transpose(const Tensor& a) {
  require_rank(a, 2, "transpose");
  return permute(a, {1, 0});
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm) {
  require_defined(a, "permute");
  const Shape& s = a.shape();
  const std::size_t r = s.size();
  if (perm.size() != r) throw Error(ErrorCode::ShapeMismatch, "permutation rank mismatch");
  std::vector<bool> used(r, false);
  for (std::size_t p : perm) {
    if (p >= r || used[p]) throw Error(ErrorCode::ShapeMismatch, "invalid permutation");
    used[p] = true;
  }
  std::vector<std::size_t> in_stride(r, 1);
  for (std::size_t i = r; i-- > 1;) in_stride[i - 1] = in_stride[i] * s[i];
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = s[perm[i]];
  const std::size_t total = a.numel();
  // src[i] = input offset of output element i.
  auto src = std::make_shared<std::vector<std::size_t>>(total);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t i = 0; i < total; ++i) {
    std::size_t off = 0;
    for (std::size_t k = 0; k < r; ++k) off += idx[k] * in_stride[perm[k]];
    (*src)[i] = off;
    for (std::size_t k = r; k-- > 0;) {
      if (++idx[k] < out_shape[k]) break;
      idx[k] = 0;
    }
  }
  const auto x = a.data();
  std::vector<double> out(total);
  for (std::size_t i = 0; i < total; ++i) out[i] = x[(*src)[i]];
  NodePtr na = a.node();
  return make_result(std::move(out_shape), std::move(out), {&a}, [na, src](Node& self) {
    auto& ga = na->ensure_grad();
    for (std::size_t i = 0; i < src->size(); ++i) ga[(*src)[i]] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids) {
  require_rank(table, 2, "gather_rows");
  const std::size_t rows = table.dim(0), d = table.dim(1);
  auto index = std::make_shared<std::vector<std::size_t>>(ids.begin(), ids.end());
  for (std::size_t i = 0; i < index->size(); ++i) {
    if ((*index)[i] >= rows) {
      throw Error(ErrorCode::IndexOutOfRange, "row id " + std::to_string((*index)[i]) + " at position " +
                                                  std::to_string(i) + " for table of " +
                                                  std::to_string(rows) + " rows");
    }
  }
  const auto x = table.data();
  std::vector<double> out(index->size() * d);
  for (std::size_t i = 0; i < index->size(); ++i)
    std::copy_n(x.data() + (*index)[i] * d, d, out.data() + i * d);
  NodePtr nt = table.node();
  return make_result({index->size(), d}, std::move(out), {&table}, [nt, index, d](Node& self) {
    auto& gt = nt->ensure_grad();
    for (std::size_t i = 0; i < index->size(); ++i) {
      const std::size_t row = (*index)[i];
      for (std::size_t j = 0; j < d; ++j) gt[row * d + j] += self.grad[i * d + j];
    }
  });
}

// ---- fused layers -------------------------------------------------------------

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  require_defined(x, "layer_norm");
  require_rank(gamma, 1, "layer_norm");
  require_same_shape(gamma, beta, "layer_norm");
  if (x.rank() == 0 || x.shape().back() != gamma.dim(0)) {
    throw Error(ErrorCode::ShapeMismatch, "layer_norm " + shape_to_string(x.shape()) + " with gamma " +
                                              shape_to_string(gamma.shape()));
  }
  const std::size_t d = gamma.dim(0);
  const std::size_t rows = x.numel() / d;
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  // Saves the normalized rows and per-row inverse std.
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_std = std::make_shared<std::vector<double>>(rows);
  std::vector<double> out(x.numel());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += xr[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double h = (xr[j] - mu) * is;
      (*xhat)[r * d + j] = h;
      out[r * d + j] = h * gv[j] + bv[j];
    }
  }
  NodePtr nx = x.node(), ng = gamma.node(), nb = beta.node();
  return make_result(x.shape(), std::move(out), {&x, &gamma, &beta},
                     [nx, ng, nb, xhat, inv_std, rows, d](Node& self) {
                       const double* g = self.grad.data();
                       const double* gam = ng->data.data();
                       if (ng->requires_grad) {
                         auto& gg = ng->ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < d; ++j) gg[j] += g[r * d + j] * (*xhat)[r * d + j];
                       }
                       if (nb->requires_grad) {
                         auto& gb = nb->ensure_grad();
                         for (std::size_t r = 0; r < rows; ++r)
                           for (std::size_t j = 0; j < d; ++j) gb[j] += g[r * d + j];
                       }
                       if (nx->requires_grad) {
                         auto& gx = nx->ensure_grad();
                         const double n = static_cast<double>(d);
                         for (std::size_t r = 0; r < rows; ++r) {
                           double s1 = 0.0, s2 = 0.0;
                           for (std::size_t j = 0; j < d; ++j) {
                             const double dh = g[r * d + j] * gam[j];
                             s1 += dh;
                             s2 += dh * (*xhat)[r * d + j];
                           }
                           const double is = (*inv_std)[r];
                           for (std::size_t j = 0; j < d; ++j) {
                             const double dh = g[r * d + j] * gam[j];
                             gx[r * d + j] += is / n * (n * dh - s1 - (*xhat)[r * d + j] * s2);
                           }
                         }
                       }
                     });
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads, std::size_t batch,
                 std::vector<double>* probs) {
  require_rank(q, 2, "attention");
  require_rank(k, 2, "attention");
  require_same_shape(k, v, "attention");
  const std::size_t d = q.dim(1);
  if (k.dim(1) != d) throw Error(ErrorCode::ShapeMismatch, "attention: query/key widths differ");
  if (heads == 0 || d % heads != 0) {
    throw Error(ErrorCode::ShapeMismatch,
                "attention: width " + std::to_string(d) + " not divisible by " + std::to_string(heads) + " heads");
  }
  if (batch == 0 || q.dim(0) % batch != 0 || k.dim(0) % batch != 0) {
    throw Error(ErrorCode::ShapeMismatch, "attention: rows not divisible by batch " + std::to_string(batch));
  }
  const std::size_t nq = q.dim(0) / batch;
  const std::size_t nk = k.dim(0) / batch;
  if (nk == 0) throw Error(ErrorCode::ZeroLengthSequence, "attention over zero keys");
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const double* qv = q.data().data();
  const double* kv = k.data().data();
  const double* vv = v.data().data();
  auto p = std::make_shared<std::vector<double>>(batch * heads * nq * nk);
  std::vector<double> out(batch * nq * d, 0.0);
  for (std::size_t b = 0; b < batch; ++b) {
    for (std::size_t h = 0; h < heads; ++h) {
      double* pbh = p->data() + (b * heads + h) * nq * nk;
      for (std::size_t i = 0; i < nq; ++i) {
        const double* qi = qv + (b * nq + i) * d + h * dh;
        double* prow = pbh + i * nk;
        double mx = -INFINITY;
        for (std::size_t j = 0; j < nk; ++j) {
          const double* kj = kv + (b * nk + j) * d + h * dh;
          double s = 0.0;
          for (std::size_t t = 0; t < dh; ++t) s += qi[t] * kj[t];
          prow[j] = s * scale;
          mx = std::max(mx, prow[j]);
        }
        double total = 0.0;
        for (std::size_t j = 0; j < nk; ++j) total += (prow[j] = std::exp(prow[j] - mx));
        for (std::size_t j = 0; j < nk; ++j) prow[j] /= total;
        double* oi = out.data() + (b * nq + i) * d + h * dh;
        for (std::size_t j = 0; j < nk; ++j) {
          const double w = prow[j];
          const double* vj = vv + (b * nk + j) * d + h * dh;
          for (std::size_t t = 0; t < dh; ++t) oi[t] += w * vj[t];
        }
      }
    }
  }
  if (probs) *probs = *p;
  NodePtr nq_node = q.node(), nk_node = k.node(), nv_node = v.node();
  return make_result({batch * nq, d}, std::move(out), {&q, &k, &v},
                     [nq_node, nk_node, nv_node, p, batch, heads, nq, nk, d, dh, scale](Node& self) {
                       const double* g = self.grad.data();
                       const double* qv = nq_node->data.data();
                       const double* kv = nk_node->data.data();
                       const double* vv = nv_node->data.data();
                       double* gq = nq_node->requires_grad ? nq_node->ensure_grad().data() : nullptr;
                       double* gk = nk_node->requires_grad ? nk_node->ensure_grad().data() : nullptr;
                       double* gv = nv_node->requires_grad ? nv_node->ensure_grad().data() : nullptr;
                       std::vector<double> ds(nk);
                       for (std::size_t b = 0; b < batch; ++b) {
                         for (std::size_t h = 0; h < heads; ++h) {
                           const double* pbh = p->data() + (b * heads + h) * nq * nk;
                           for (std::size_t i = 0; i < nq; ++i) {
                             const double* gi = g + (b * nq + i) * d + h * dh;
                             const double* prow = pbh + i * nk;
                             // dP = dO · Vᵀ, dS = P ⊙ (dP − ⟨dP, P⟩)
                             double dot = 0.0;
                             for (std::size_t j = 0; j < nk; ++j) {
                               const double* vj = vv + (b * nk + j) * d + h * dh;
                               double s = 0.0;
                               for (std::size_t t = 0; t < dh; ++t) s += gi[t] * vj[t];
                               ds[j] = s;
                               dot += s * prow[j];
                             }
                             for (std::size_t j = 0; j < nk; ++j) ds[j] = prow[j] * (ds[j] - dot) * scale;
                             const double* qi = qv + (b * nq + i) * d + h * dh;
                             for (std::size_t j = 0; j < nk; ++j) {
                               const std::size_t koff = (b * nk + j) * d + h * dh;
                               if (gv) {
                                 for (std::size_t t = 0; t < dh; ++t) gv[koff + t] += prow[j] * gi[t];
                               }
                               if (gk) {
                                 for (std::size_t t = 0; t < dh; ++t) gk[koff + t] += ds[j] * qi[t];
                               }
                               if (gq) {
                                 double* gqi = gq + (b * nq + i) * d + h * dh;
                                 for (std::size_t t = 0; t < dh; ++t) gqi[t] += ds[j] * kv[koff + t];
                               }
                             }
                           }
                         }
                       }
                     });
}

Tensor im2col(const Tensor& x, const Conv2dGeometry& geo) {
  require_rank(x, 2, "im2col");
  if (geo.kernel == 0 || geo.stride == 0 || geo.height + 2 * geo.padding < geo.kernel ||
      geo.width + 2 * geo.padding < geo.kernel) {
    throw Error(ErrorCode::ShapeMismatch, "im2col: invalid geometry");
  }
  if (x.dim(0) != geo.batch * geo.height * geo.width || x.dim(1) != geo.channels) {
    throw Error(ErrorCode::ShapeMismatch, "im2col: input " + shape_to_string(x.shape()) +
                                              " does not match geometry");
  }
  const std::size_t ho = geo.out_height(), wo = geo.out_width();
  const std::size_t kk = geo.kernel, c = geo.channels;
  const std::size_t cols = kk * kk * c;
  // src[r*cols + col] = input offset, or SIZE_MAX for zero padding.
  auto src = std::make_shared<std::vector<std::size_t>>(geo.batch * ho * wo * cols, SIZE_MAX);
  for (std::size_t b = 0; b < geo.batch; ++b)
    for (std::size_t oy = 0; oy < ho; ++oy)
      for (std::size_t ox = 0; ox < wo; ++ox) {
        const std::size_t row = (b * ho + oy) * wo + ox;
        for (std::size_t ky = 0; ky < kk; ++ky)
          for (std::size_t kx = 0; kx < kk; ++kx) {
            const long iy = static_cast<long>(oy * geo.stride + ky) - static_cast<long>(geo.padding);
            const long ix = static_cast<long>(ox * geo.stride + kx) - static_cast<long>(geo.padding);
            if (iy < 0 || ix < 0 || iy >= static_cast<long>(geo.height) || ix >= static_cast<long>(geo.width))
              continue;
            const std::size_t in_row = (b * geo.height + static_cast<std::size_t>(iy)) * geo.width +
                                       static_cast<std::size_t>(ix);
            for (std::size_t ch = 0; ch < c; ++ch)
              (*src)[row * cols + (ky * kk + kx) * c + ch] = in_row * c + ch;
          }
      }
  const auto xv = x.data();
  std::vector<double> out(src->size(), 0.0);
  for (std::size_t i = 0; i < src->size(); ++i)
    if ((*src)[i] != SIZE_MAX) out[i] = xv[(*src)[i]];
  NodePtr nx = x.node();
  return make_result({geo.batch * ho * wo, cols}, std::move(out), {&x}, [nx, src](Node& self) {
    auto& gx = nx->ensure_grad();
    for (std::size_t i = 0; i < src->size(); ++i)
      if ((*src)[i] != SIZE_MAX) gx[(*src)[i]] += self.grad[i];
  });
}

// ---- checks -------------------------------------------------------------------

void check_finite(const Tensor& t, const std::string& what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteLoss, what + " contains a non-finite value");
  }
}

double check_grad(const std::function<Tensor(const Tensor&)>& f, const Tensor& point, double h) {
  Tensor x = Tensor::from(point.shape(), {point.data().begin(), point.data().end()}, true);
  const Tensor y = f(x);
  backward(y);
  std::vector<double> analytic(x.numel(), 0.0);
  if (x.has_grad()) std::copy(x.grad().begin(), x.grad().end(), analytic.begin());

  NoGradGuard no_grad;
  double worst = 0.0;
  auto values = x.mutable_data();
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double orig = values[i];
    // Divide by the step actually taken after rounding.
    const double up = orig + h, down = orig - h;
    values[i] = up;
    const double fp = f(x).item();
    values[i] = down;
    const double fm = f(x).item();
    values[i] = orig;
    const double fd = (fp - fm) / (up - down);
    worst = std::max(worst, std::abs(analytic[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

double check_grad_params(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params, double h) {
  for (auto& p : params) p.zero_grad();
  backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.numel(), 0.0);
    }
  }

  NoGradGuard no_grad;
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto values = params[k].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double orig = values[i];
      const double up = orig + h, down = orig - h;
      values[i] = up;
      const double fp = loss_fn().item();
      values[i] = down;
      const double fm = loss_fn().item();
      values[i] = orig;
      const double fd = (fp - fm) / (up - down);
      worst = std::max(worst, std::abs(analytic[k][i] - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

}  // namespace l2l
