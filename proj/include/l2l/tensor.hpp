#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "l2l/error.hpp"

namespace l2l {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {
struct Node;
}

// Dense row-major float64 tensor with reverse-mode autodiff.
//
// A Tensor is a cheap handle onto a shared node. Values are immutable once an
// op has produced them; only leaves (parameters) are updated in place by the
// optimizer, and grads accumulate across uses until zero_grad().
class Tensor {
 public:
  Tensor() = default;

  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t numel() const;
  std::size_t dim(std::size_t axis) const;

  std::span<const double> data() const;
  // Direct write access, intended for optimizers and finite-difference probes
  // acting on leaf tensors.
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  // Releases the grad buffer; has_grad() is false afterwards.
  void zero_grad();

  // Position in the global creation order. Every op output is numbered after
  // its inputs, so descending ids form a valid reverse topological order.
  std::uint64_t id() const;

  // Detached copy sharing no graph history.
  Tensor detach() const;

  const std::shared_ptr<detail::Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<detail::Node> node_;
};

// Disables graph recording on the current thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled() noexcept;

struct BackwardOptions {
  // Keep the recorded graph so backward can be replayed on the same loss.
  bool retain_graph = false;
};

// Seeds d(loss)/d(loss) = 1 and propagates through every recorded op in
// reverse creation order. Throws NonScalarLoss / NonFiniteLoss.
void backward(const Tensor& loss, BackwardOptions options = {});

// ---- primitive ops -------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, double b);
Tensor mul(const Tensor& a, double b);
Tensor div(const Tensor& a, double b);
// b - a, for the 1 - p terms of the cross-entropy.
Tensor rsub(double b, const Tensor& a);

// x[n×d] + bias[d] repeated over every row. The only row broadcast offered.
Tensor add_rowwise(const Tensor& x, const Tensor& bias);

Tensor sigmoid(const Tensor& a);
// Exact erf form: 0.5·x·(1 + erf(x/√2)).
Tensor gelu(const Tensor& a);
Tensor softmax_lastdim(const Tensor& a);
// DomainError for non-positive entries.
Tensor log(const Tensor& a);
// Values outside [lo, hi] are clipped and pass no gradient.
Tensor clamp(const Tensor& a, double lo, double hi);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor sum(const Tensor& a, std::size_t axis);
Tensor mean(const Tensor& a, std::size_t axis);

Tensor reshape(const Tensor& a, Shape shape);
// 2-D transpose.
Tensor transpose(const Tensor& a);
// General axis permutation; out.shape[i] = a.shape[perm[i]].
Tensor permute(const Tensor& a, const std::vector<std::size_t>& perm);

// out[i] = table[ids[i]]; backward scatter-adds into the table.
Tensor gather_rows(const Tensor& table, std::span<const std::size_t> ids);

// Row-wise layer normalization over the last dimension with affine gamma/beta.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Batched multi-head scaled dot-product attention without projections.
// q: [batch·n_q × d], k and v: [batch·n_k × d]; head h reads columns
// [h·d/heads, (h+1)·d/heads). When probs is non-null it receives the
// attention weights laid out as [batch][head][n_q][n_k].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 std::size_t batch, std::vector<double>* probs = nullptr);

struct Conv2dGeometry {
  std::size_t batch = 1;
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 0;

  std::size_t out_height() const { return (height + 2 * padding - kernel) / stride + 1; }
  std::size_t out_width() const { return (width + 2 * padding - kernel) / stride + 1; }
};

// Unfolds an NHWC image batch stored as [batch·H·W × C] into patch rows
// [batch·H_out·W_out × kernel·kernel·C], zero padded. Convolution is then a
// matmul against a [kernel·kernel·C × C_out] weight.
Tensor im2col(const Tensor& x, const Conv2dGeometry& geometry);

// ---- gradient checking ---------------------------------------------------

// Central-difference comparison of autodiff against finite differences.
// Returns max over coordinates of |g_ad − g_fd| / max(1, |g_fd|).
double check_grad(const std::function<Tensor(const Tensor&)>& f, const Tensor& point,
                  double h = 1e-5);

// Same measure over every coordinate of every listed leaf parameter, for a
// loss closure that reads the parameters directly.
double check_grad_params(const std::function<Tensor()>& loss_fn, std::vector<Tensor> params,
                         double h = 1e-5);

// Throws NonFiniteLoss naming `what` if any entry is NaN or infinite.
void check_finite(const Tensor& t, const std::string& what);

}  // namespace l2l
