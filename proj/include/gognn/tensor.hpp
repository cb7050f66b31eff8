#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gognn {

using Shape = std::vector<std::size_t>;

/// Incompatible operand shapes (names both shapes in the message).
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition.
class ContractViolation : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or domain violations during numeric evaluation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_str(const Shape& s);
std::size_t shape_numel(const Shape& s);

namespace detail {
struct Node;
}

/// Dense real tensor participating in a reverse-mode differentiation graph.
///
/// Copying a Tensor copies the handle, not the storage: two copies refer to
/// the same node. Ops build a DAG of nodes; backward() on a scalar result
/// accumulates gradients into every reachable tensor whose requires_grad
/// flag is set (leaves keep accumulating across calls until zero_grad()).
///
/// A graph and its intermediates are confined to one thread during a
/// forward/backward pass; distinct graphs over read-only shared parameters
/// may run forward in parallel.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values,
                     bool requires_grad = false);
  static Tensor scalar_of(double value, bool requires_grad = false);
  static Tensor eye(std::size_t n);

  bool defined() const { return node_ != nullptr; }
  explicit operator bool() const { return defined(); }

  const Shape& shape() const;
  std::size_t numel() const;
  std::size_t rank() const;
  /// Rank-2 helpers.
  std::size_t rows() const;
  std::size_t cols() const;

  bool requires_grad() const;
  const std::vector<double>& values() const;
  /// In-place mutation (optimizer steps, finite differencing). The caller
  /// owns consistency with any live graph built on top of this tensor.
  std::vector<double>& mutable_values();

  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  /// Value of a one-element tensor.
  double scalar() const;

  /// Reverse-mode gradient accumulation from a one-element tensor.
  /// Contributions are computed in scratch storage and added to each visited
  /// node's grad at the end, so repeated calls are additive and stale grads
  /// never corrupt propagation.
  void backward() const;

  detail::Node* node() const { return node_.get(); }

 private:
  explicit Tensor(std::shared_ptr<detail::Node> n) : node_(std::move(n)) {}
  friend Tensor make_tensor(std::shared_ptr<detail::Node> n);

  std::shared_ptr<detail::Node> node_;
};

// ---------------------------------------------------------------------------
// Primitive operations. Each records an exact reverse rule; the finite-
// difference property suite in the tests holds every one of them to a
// 1e-6 relative tolerance at 64-bit precision.
// ---------------------------------------------------------------------------

/// a[m×k] · b[k×n]. Mismatched inner extents raise DimensionError.
Tensor matmul(const Tensor& a, const Tensor& b);

/// Elementwise sum; one operand may be a one-element tensor (broadcast).
Tensor add(const Tensor& a, const Tensor& b);
/// Elementwise product; one operand may be a one-element tensor (broadcast).
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double c);
Tensor scale(const Tensor& a, double c);
Tensor neg(const Tensor& a);
Tensor sub(const Tensor& a, const Tensor& b);

Tensor sigmoid(const Tensor& x);
/// log(1 + eˣ), evaluated as max(x,0) + log1p(e^−|x|) so the value stays
/// accurate and the gradient (sigmoid of x) stays alive at any magnitude —
/// the numerically sound route to −log σ(±x) for the losses.
Tensor softplus(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double negative_slope = 0.2);
/// Exponential-linear unit with unit saturation (x > 0 ? x : e^x - 1).
Tensor elu(const Tensor& x);
/// Natural log; non-positive input raises NumericError. Loss code clamps
/// probabilities with clamp_min before taking logs.
Tensor log(const Tensor& x);
Tensor clamp_min(const Tensor& x, double lo);

enum class Reduce { kSum, kMean };

/// Rank-2 reduction along an axis (0 collapses rows, 1 collapses columns).
Tensor reduce(const Tensor& x, Reduce mode, std::size_t axis);
Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

/// Concatenates rank-1 tensors end to end.
Tensor concat(const std::vector<Tensor>& parts);
/// Concatenates rank-2 tensors with equal row counts along columns.
Tensor concat_cols(const std::vector<Tensor>& parts);

/// Rows of a rank-2 tensor (or elements of a rank-1 tensor) at idx, in
/// order; indices may repeat. Gradient scatter-adds.
Tensor gather_rows(const Tensor& x, std::vector<std::size_t> idx);

/// Stacks rank-1 tensors of equal length into a matrix, one per row.
Tensor stack_rows(const std::vector<Tensor>& rows);

/// m[n×d] with row i scaled by s[i]; s is rank-1 of length n (or n×1).
Tensor row_scale(const Tensor& m, const Tensor& s);

/// m[n×d] with the rank-1 vector b[d] added to every row.
Tensor row_broadcast_add(const Tensor& m, const Tensor& b);

/// Sparse weighted neighbor sum: out[dst[e]] += w[e] · x[src[e]] over all
/// arcs e, with out shaped like x. The message-passing primitive shared by
/// the attention, edge-aggregation, and interaction-GCN layers.
Tensor aggregate_edges(const Tensor& x, std::vector<std::size_t> src,
                       std::vector<std::size_t> dst, const Tensor& w);

/// Partition of [0, size) into non-empty groups.
struct GroupIndex {
  std::vector<std::vector<std::size_t>> groups;

  /// Verifies the partition property; throws ContractViolation otherwise.
  void validate(std::size_t size) const;
};

/// Softmax normalized independently within each group of a rank-1 tensor.
Tensor softmax_groups(const Tensor& scores, const GroupIndex& groups);

// ---------------------------------------------------------------------------
// Verification helpers
// ---------------------------------------------------------------------------

/// Max over every coordinate of every parameter of
///   |analytic − numeric| / max(1, |analytic|, |numeric|)
/// where numeric is the central difference of f with the given step. f is
/// re-evaluated per probe and must be deterministic; its result must be a
/// one-element tensor. Non-finite intermediates are reported with the
/// offending op's name.
double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                  double step = 1e-5);

/// Walks the graph below `result` and throws NumericError naming the first
/// op that produced a non-finite value, if any.
void check_finite(const Tensor& result);

}  // namespace gognn
