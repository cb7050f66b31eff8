#include "gognn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>
#include <utility>

#include "gognn/kernels.hpp"

namespace gognn {

std::string shape_str(const Shape& s) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out << 'x';
    out << s[i];
  }
  out << ']';
  return out.str();
}

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

namespace detail {

struct Node : std::enable_shared_from_this<Node> {
  Shape shape;
  std::vector<double> values;
  std::vector<double> grad;  // sized on first backward flush
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Adds this node's contribution to each parent sink; sinks[i] is null when
  // parents[i] does not take gradients. Must only ever accumulate.
  std::function<void(const double* gout, const std::vector<double*>& sinks)>
      backprop;
};

}  // namespace detail

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

Tensor make_tensor(NodePtr n) { return Tensor(std::move(n)); }

namespace {

const kernels::Ops& K() { return kernels::active(); }

void require_positive_extents(const Shape& shape) {
  for (std::size_t e : shape) {
    if (e == 0) {
      throw ContractViolation("tensor extents must be positive, got " +
                              shape_str(shape));
    }
  }
}

NodePtr new_node(Shape shape, const char* op) {
  require_positive_extents(shape);
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values.assign(shape_numel(n->shape), 0.0);
  n->op = op;
  return n;
}

Node* req(const Tensor& t, const char* op) {
  if (!t.defined()) {
    throw ContractViolation(std::string(op) + ": undefined tensor operand");
  }
  return t.node();
}

NodePtr held(const Tensor& t, const char* op) {
  return req(t, op)->shared_from_this();
}

void require_rank(const Tensor& t, std::size_t rank, const char* op) {
  req(t, op);
  if (t.shape().size() != rank) {
    throw DimensionError(std::string(op) + ": expected rank " +
                         std::to_string(rank) + " operand, got " +
                         shape_str(t.shape()));
  }
}

using Backprop =
    std::function<void(const double* gout, const std::vector<double*>& sinks)>;

// Wires parents and the reverse rule iff any parent takes gradients;
// otherwise the result is a constant and its inputs can be released.
Tensor finish(NodePtr out, std::vector<NodePtr> parents, Backprop bp) {
  bool grad = false;
  for (const auto& p : parents) grad = grad || p->requires_grad;
  if (grad) {
    out->requires_grad = true;
    out->parents = std::move(parents);
    out->backprop = std::move(bp);
  }
  return make_tensor(std::move(out));
}

}  // namespace

// ---------------------------------------------------------------------------
// Tensor basics
// ---------------------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = new_node(std::move(shape), "leaf");
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = new_node(std::move(shape), "leaf");
  std::fill(n->values.begin(), n->values.end(), value);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> values,
                    bool requires_grad) {
  require_positive_extents(shape);
  if (values.size() != shape_numel(shape)) {
    throw DimensionError("tensor: " + std::to_string(values.size()) +
                         " values do not fill shape " + shape_str(shape));
  }
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->values = std::move(values);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

Tensor Tensor::scalar_of(double value, bool requires_grad) {
  return from({1}, {value}, requires_grad);
}

Tensor Tensor::eye(std::size_t n) {
  Tensor t = zeros({n, n});
  for (std::size_t i = 0; i < n; ++i) t.node()->values[i * n + i] = 1.0;
  return t;
}

const Shape& Tensor::shape() const { return req(*this, "shape")->shape; }
std::size_t Tensor::numel() const { return req(*this, "numel")->values.size(); }
std::size_t Tensor::rank() const { return shape().size(); }

std::size_t Tensor::rows() const {
  require_rank(*this, 2, "rows");
  return shape()[0];
}

std::size_t Tensor::cols() const {
  require_rank(*this, 2, "cols");
  return shape()[1];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

const std::vector<double>& Tensor::values() const {
  return req(*this, "values")->values;
}

std::vector<double>& Tensor::mutable_values() {
  return req(*this, "values")->values;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

const std::vector<double>& Tensor::grad() const {
  Node* n = req(*this, "grad");
  if (n->grad.empty()) {
    throw ContractViolation("grad: no gradient present (run backward first)");
  }
  return n->grad;
}

void Tensor::zero_grad() { req(*this, "zero_grad")->grad.clear(); }

double Tensor::scalar() const {
  Node* n = req(*this, "scalar");
  if (n->values.size() != 1) {
    throw ContractViolation("scalar: tensor has shape " + shape_str(n->shape));
  }
  return n->values[0];
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void Tensor::backward() const {
  Node* root = req(*this, "backward");
  if (root->values.size() != 1) {
    throw ContractViolation("backward: result must be one-element, got shape " +
                            shape_str(root->shape));
  }
  if (!root->requires_grad) return;  // constant: nothing reachable

  // Postorder over the differentiable subgraph puts every node after all of
  // its parents, so walking the list backwards visits consumers first.
  std::vector<Node*> order;
  std::unordered_map<Node*, std::size_t> slot;
  {
    std::unordered_map<Node*, char> seen;
    std::vector<std::pair<Node*, bool>> stack{{root, false}};
    while (!stack.empty()) {
      auto [n, expanded] = stack.back();
      stack.pop_back();
      if (expanded) {
        slot[n] = order.size();
        order.push_back(n);
        continue;
      }
      if (seen[n]) continue;
      seen[n] = 1;
      stack.emplace_back(n, true);
      for (const auto& p : n->parents) {
        if (p->requires_grad && !seen[p.get()]) {
          stack.emplace_back(p.get(), false);
        }
      }
    }
  }

  // Contributions live in scratch until the walk completes, so stale node
  // grads never feed propagation and repeated backward calls stay additive.
  std::vector<std::vector<double>> scratch(order.size());
  auto sink_of = [&](Node* n) -> double* {
    auto& buf = scratch[slot.find(n)->second];
    if (buf.empty()) buf.assign(n->values.size(), 0.0);
    return buf.data();
  };

  scratch[slot[root]] = {1.0};

  std::vector<double*> sinks;
  for (std::size_t i = order.size(); i-- > 0;) {
    Node* n = order[i];
    auto& gout = scratch[i];
    if (gout.empty()) continue;  // dead branch relative to the root
    if (!n->backprop) continue;  // leaf
    sinks.clear();
    sinks.reserve(n->parents.size());
    for (const auto& p : n->parents) {
      sinks.push_back(p->requires_grad ? sink_of(p.get()) : nullptr);
    }
    n->backprop(gout.data(), sinks);
  }

  for (std::size_t i = 0; i < order.size(); ++i) {
    if (scratch[i].empty()) continue;
    Node* n = order[i];
    if (n->grad.empty()) n->grad.assign(n->values.size(), 0.0);
    K().axpy(1.0, scratch[i].data(), n->grad.data(), n->grad.size());
  }
}

// ---------------------------------------------------------------------------
// matmul
// ---------------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const std::size_t m = a.shape()[0], k = a.shape()[1];
  const std::size_t n = b.shape()[1];
  if (b.shape()[0] != k) {
    throw DimensionError("matmul: inner extents differ: " +
                         shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  auto out = new_node({m, n}, "matmul");
  NodePtr pa = held(a, "matmul"), pb = held(b, "matmul");
  K().gemm_nn(pa->values.data(), pb->values.data(), out->values.data(), m, k,
              n, false);
  return finish(
      std::move(out), {pa, pb},
      [pa, pb, m, k, n](const double* gout, const std::vector<double*>& sinks) {
        // dA[m×k] += G[m×n] · B[k×n]ᵀ ; dB[k×n] += A[m×k]ᵀ · G[m×n]
        if (sinks[0]) K().gemm_nt(gout, pb->values.data(), sinks[0], m, n, k, true);
        if (sinks[1]) K().gemm_tn(pa->values.data(), gout, sinks[1], k, m, n, true);
      });
}

// ---------------------------------------------------------------------------
// elementwise binary
// ---------------------------------------------------------------------------

namespace {

enum class Pairing { kSame, kLeftOne, kRightOne };

Pairing classify_pair(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Pairing::kSame;
  if (a.numel() == 1) return Pairing::kLeftOne;
  if (b.numel() == 1) return Pairing::kRightOne;
  throw DimensionError(std::string(op) + ": incompatible shapes " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  NodePtr pa = held(a, "add"), pb = held(b, "add");
  const Pairing pairing = classify_pair(a, b, "add");
  const Shape& shape =
      pairing == Pairing::kLeftOne ? pb->shape : pa->shape;
  auto out = new_node(shape, "add");
  const std::size_t n = out->values.size();
  switch (pairing) {
    case Pairing::kSame:
      K().add(pa->values.data(), pb->values.data(), out->values.data(), n);
      break;
    case Pairing::kLeftOne:
      for (std::size_t i = 0; i < n; ++i)
        out->values[i] = pa->values[0] + pb->values[i];
      break;
    case Pairing::kRightOne:
      for (std::size_t i = 0; i < n; ++i)
        out->values[i] = pa->values[i] + pb->values[0];
      break;
  }
  return finish(std::move(out), {pa, pb},
                [pairing, n](const double* gout,
                             const std::vector<double*>& sinks) {
                  auto spread = [&](double* sink, bool one) {
                    if (!sink) return;
                    if (one)
                      sink[0] += K().sum(gout, n);
                    else
                      K().axpy(1.0, gout, sink, n);
                  };
                  spread(sinks[0], pairing == Pairing::kLeftOne);
                  spread(sinks[1], pairing == Pairing::kRightOne);
                });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  NodePtr pa = held(a, "mul"), pb = held(b, "mul");
  const Pairing pairing = classify_pair(a, b, "mul");
  const Shape& shape =
      pairing == Pairing::kLeftOne ? pb->shape : pa->shape;
  auto out = new_node(shape, "mul");
  const std::size_t n = out->values.size();
  switch (pairing) {
    case Pairing::kSame:
      K().mul(pa->values.data(), pb->values.data(), out->values.data(), n);
      break;
    case Pairing::kLeftOne:
      K().scale(pb->values.data(), pa->values[0], out->values.data(), n);
      break;
    case Pairing::kRightOne:
      K().scale(pa->values.data(), pb->values[0], out->values.data(), n);
      break;
  }
  return finish(
      std::move(out), {pa, pb},
      [pa, pb, pairing, n](const double* gout,
                           const std::vector<double*>& sinks) {
        const double* av = pa->values.data();
        const double* bv = pb->values.data();
        switch (pairing) {
          case Pairing::kSame:
            if (sinks[0])
              for (std::size_t i = 0; i < n; ++i) sinks[0][i] += gout[i] * bv[i];
            if (sinks[1])
              for (std::size_t i = 0; i < n; ++i) sinks[1][i] += gout[i] * av[i];
            break;
          case Pairing::kLeftOne:
            if (sinks[0]) sinks[0][0] += K().dot(gout, bv, n);
            if (sinks[1]) K().axpy(av[0], gout, sinks[1], n);
            break;
          case Pairing::kRightOne:
            if (sinks[0]) K().axpy(bv[0], gout, sinks[0], n);
            if (sinks[1]) sinks[1][0] += K().dot(gout, av, n);
            break;
        }
      });
}

Tensor add_scalar(const Tensor& a, double c) {
  NodePtr pa = held(a, "add_scalar");
  auto out = new_node(pa->shape, "add_scalar");
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) out->values[i] = pa->values[i] + c;
  return finish(std::move(out), {pa},
                [n](const double* gout, const std::vector<double*>& sinks) {
                  if (sinks[0]) K().axpy(1.0, gout, sinks[0], n);
                });
}

Tensor scale(const Tensor& a, double c) {
  NodePtr pa = held(a, "scale");
  auto out = new_node(pa->shape, "scale");
  const std::size_t n = out->values.size();
  K().scale(pa->values.data(), c, out->values.data(), n);
  return finish(std::move(out), {pa},
                [c, n](const double* gout, const std::vector<double*>& sinks) {
                  if (sinks[0]) K().axpy(c, gout, sinks[0], n);
                });
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor sub(const Tensor& a, const Tensor& b) { return add(a, neg(b)); }

// ---------------------------------------------------------------------------
// elementwise unary
// ---------------------------------------------------------------------------

Tensor sigmoid(const Tensor& x) {
  NodePtr px = held(x, "sigmoid");
  auto out = new_node(px->shape, "sigmoid");
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px->values[i];
    if (v >= 0.0) {
      out->values[i] = 1.0 / (1.0 + std::exp(-v));
    } else {
      const double e = std::exp(v);
      out->values[i] = e / (1.0 + e);
    }
  }
  // Raw pointer on purpose: the closure lives on this node, so it cannot
  // outlive it, and a shared_ptr here would be a self-cycle (a leak).
  const Node* self = out.get();
  return finish(std::move(out), {px},
                [self, n](const double* gout, const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  const double* y = self->values.data();
                  for (std::size_t i = 0; i < n; ++i)
                    sinks[0][i] += gout[i] * y[i] * (1.0 - y[i]);
                });
}

Tensor softplus(const Tensor& x) {
  NodePtr px = held(x, "softplus");
  auto out = new_node(px->shape, "softplus");
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px->values[i];
    out->values[i] = std::max(v, 0.0) + std::log1p(std::exp(-std::abs(v)));
  }
  return finish(std::move(out), {px},
                [px, n](const double* gout, const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  const double* v = px->values.data();
                  for (std::size_t i = 0; i < n; ++i) {
                    const double x = v[i];
                    const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                              : std::exp(x) / (1.0 + std::exp(x));
                    sinks[0][i] += gout[i] * s;
                  }
                });
}

Tensor tanh(const Tensor& x) {
  NodePtr px = held(x, "tanh");
  auto out = new_node(px->shape, "tanh");
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) out->values[i] = std::tanh(px->values[i]);
  const Node* self = out.get();  // owned-by-node closure: no cycle
  return finish(std::move(out), {px},
                [self, n](const double* gout, const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  const double* y = self->values.data();
                  for (std::size_t i = 0; i < n; ++i)
                    sinks[0][i] += gout[i] * (1.0 - y[i] * y[i]);
                });
}

Tensor relu(const Tensor& x) {
  NodePtr px = held(x, "relu");
  auto out = new_node(px->shape, "relu");
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i)
    out->values[i] = px->values[i] > 0.0 ? px->values[i] : 0.0;
  return finish(std::move(out), {px},
                [px, n](const double* gout, const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  const double* v = px->values.data();
                  for (std::size_t i = 0; i < n; ++i)
                    if (v[i] > 0.0) sinks[0][i] += gout[i];
                });
}

Tensor leaky_relu(const Tensor& x, double negative_slope) {
  NodePtr px = held(x, "leaky_relu");
  auto out = new_node(px->shape, "leaky_relu");
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px->values[i];
    out->values[i] = v > 0.0 ? v : negative_slope * v;
  }
  return finish(std::move(out), {px},
                [px, negative_slope, n](const double* gout,
                                        const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  const double* v = px->values.data();
                  for (std::size_t i = 0; i < n; ++i)
                    sinks[0][i] += gout[i] * (v[i] > 0.0 ? 1.0 : negative_slope);
                });
}

Tensor elu(const Tensor& x) {
  NodePtr px = held(x, "elu");
  auto out = new_node(px->shape, "elu");
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px->values[i];
    out->values[i] = v > 0.0 ? v : std::expm1(v);
  }
  const Node* self = out.get();  // owned-by-node closure: no cycle
  return finish(std::move(out), {px},
                [px, self, n](const double* gout,
                              const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  const double* v = px->values.data();
                  const double* y = self->values.data();
                  for (std::size_t i = 0; i < n; ++i)
                    sinks[0][i] += gout[i] * (v[i] > 0.0 ? 1.0 : y[i] + 1.0);
                });
}

Tensor log(const Tensor& x) {
  NodePtr px = held(x, "log");
  auto out = new_node(px->shape, "log");
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double v = px->values[i];
    if (!(v > 0.0)) {
      std::ostringstream msg;
      msg << "log: non-positive input " << v << " at flat index " << i;
      throw NumericError(msg.str());
    }
    out->values[i] = std::log(v);
  }
  return finish(std::move(out), {px},
                [px, n](const double* gout, const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  const double* v = px->values.data();
                  for (std::size_t i = 0; i < n; ++i)
                    sinks[0][i] += gout[i] / v[i];
                });
}

Tensor clamp_min(const Tensor& x, double lo) {
  NodePtr px = held(x, "clamp_min");
  auto out = new_node(px->shape, "clamp_min");
  const std::size_t n = out->values.size();
  for (std::size_t i = 0; i < n; ++i)
    out->values[i] = px->values[i] < lo ? lo : px->values[i];
  return finish(std::move(out), {px},
                [px, lo, n](const double* gout,
                            const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  const double* v = px->values.data();
                  for (std::size_t i = 0; i < n; ++i)
                    if (v[i] > lo) sinks[0][i] += gout[i];
                });
}

// ---------------------------------------------------------------------------
// reductions and shape ops
// ---------------------------------------------------------------------------

Tensor reduce(const Tensor& x, Reduce mode, std::size_t axis) {
  require_rank(x, 2, "reduce");
  if (axis > 1) {
    throw ContractViolation("reduce: axis " + std::to_string(axis) +
                            " out of range for a rank-2 tensor");
  }
  NodePtr px = held(x, "reduce");
  const std::size_t m = px->shape[0], n = px->shape[1];
  const std::size_t kept = axis == 0 ? n : m;
  const std::size_t collapsed = axis == 0 ? m : n;
  const double w = mode == Reduce::kMean ? 1.0 / double(collapsed) : 1.0;
  auto out = new_node({kept}, "reduce");
  if (axis == 0) {
    for (std::size_t i = 0; i < m; ++i)
      K().axpy(w, px->values.data() + i * n, out->values.data(), n);
  } else {
    for (std::size_t i = 0; i < m; ++i)
      out->values[i] = w * K().sum(px->values.data() + i * n, n);
  }
  return finish(std::move(out), {px},
                [m, n, axis, w](const double* gout,
                                const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  if (axis == 0) {
                    for (std::size_t i = 0; i < m; ++i)
                      K().axpy(w, gout, sinks[0] + i * n, n);
                  } else {
                    for (std::size_t i = 0; i < m; ++i)
                      for (std::size_t j = 0; j < n; ++j)
                        sinks[0][i * n + j] += w * gout[i];
                  }
                });
}

namespace {

Tensor reduce_all(const Tensor& x, const char* op, bool mean) {
  NodePtr px = held(x, op);
  auto out = new_node({1}, op);
  const std::size_t n = px->values.size();
  const double w = mean ? 1.0 / double(n) : 1.0;
  out->values[0] = w * K().sum(px->values.data(), n);
  return finish(std::move(out), {px},
                [n, w](const double* gout, const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  const double g = w * gout[0];
                  for (std::size_t i = 0; i < n; ++i) sinks[0][i] += g;
                });
}

}  // namespace

Tensor sum_all(const Tensor& x) { return reduce_all(x, "sum_all", false); }
Tensor mean_all(const Tensor& x) { return reduce_all(x, "mean_all", true); }

Tensor reshape(const Tensor& x, Shape shape) {
  NodePtr px = held(x, "reshape");
  require_positive_extents(shape);
  if (shape_numel(shape) != px->values.size()) {
    throw DimensionError("reshape: cannot view " + shape_str(px->shape) +
                         " as " + shape_str(shape));
  }
  auto out = std::make_shared<Node>();
  out->shape = std::move(shape);
  out->values = px->values;
  out->op = "reshape";
  const std::size_t n = out->values.size();
  return finish(std::move(out), {px},
                [n](const double* gout, const std::vector<double*>& sinks) {
                  if (sinks[0]) K().axpy(1.0, gout, sinks[0], n);
                });
}

Tensor concat(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractViolation("concat: no operands");
  std::vector<NodePtr> ps;
  ps.reserve(parts.size());
  std::size_t total = 0;
  for (const Tensor& t : parts) {
    require_rank(t, 1, "concat");
    ps.push_back(held(t, "concat"));
    total += t.numel();
  }
  auto out = new_node({total}, "concat");
  std::vector<std::size_t> offsets(ps.size());
  std::size_t at = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    offsets[i] = at;
    std::copy(ps[i]->values.begin(), ps[i]->values.end(),
              out->values.begin() + at);
    at += ps[i]->values.size();
  }
  std::vector<std::size_t> lens(ps.size());
  for (std::size_t i = 0; i < ps.size(); ++i) lens[i] = ps[i]->values.size();
  return finish(std::move(out), std::move(ps),
                [offsets = std::move(offsets), lens = std::move(lens)](
                    const double* gout, const std::vector<double*>& sinks) {
                  for (std::size_t i = 0; i < sinks.size(); ++i) {
                    if (sinks[i])
                      K().axpy(1.0, gout + offsets[i], sinks[i], lens[i]);
                  }
                });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ContractViolation("concat_cols: no operands");
  std::vector<NodePtr> ps;
  ps.reserve(parts.size());
  std::size_t total_cols = 0;
  for (const Tensor& t : parts) {
    require_rank(t, 2, "concat_cols");
    ps.push_back(held(t, "concat_cols"));
    total_cols += t.shape()[1];
  }
  const std::size_t rows = ps[0]->shape[0];
  for (const auto& p : ps) {
    if (p->shape[0] != rows) {
      throw DimensionError("concat_cols: row counts differ: " +
                           shape_str(ps[0]->shape) + " vs " +
                           shape_str(p->shape));
    }
  }
  auto out = new_node({rows, total_cols}, "concat_cols");
  std::vector<std::size_t> offsets(ps.size()), widths(ps.size());
  {
    std::size_t at = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      offsets[i] = at;
      widths[i] = ps[i]->shape[1];
      at += widths[i];
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t i = 0; i < ps.size(); ++i) {
      std::copy(ps[i]->values.begin() + r * widths[i],
                ps[i]->values.begin() + (r + 1) * widths[i],
                out->values.begin() + r * total_cols + offsets[i]);
    }
  }
  return finish(std::move(out), std::move(ps),
                [rows, total_cols, offsets = std::move(offsets),
                 widths = std::move(widths)](const double* gout,
                                             const std::vector<double*>& sinks) {
                  for (std::size_t i = 0; i < sinks.size(); ++i) {
                    if (!sinks[i]) continue;
                    for (std::size_t r = 0; r < rows; ++r) {
                      K().axpy(1.0, gout + r * total_cols + offsets[i],
                               sinks[i] + r * widths[i], widths[i]);
                    }
                  }
                });
}

Tensor gather_rows(const Tensor& x, std::vector<std::size_t> idx) {
  NodePtr px = held(x, "gather_rows");
  if (px->shape.size() != 1 && px->shape.size() != 2) {
    throw DimensionError("gather_rows: expected rank-1 or rank-2 operand, got " +
                         shape_str(px->shape));
  }
  if (idx.empty()) throw ContractViolation("gather_rows: empty index list");
  const std::size_t rows = px->shape[0];
  const std::size_t width = px->shape.size() == 2 ? px->shape[1] : 1;
  for (std::size_t i : idx) {
    if (i >= rows) {
      throw ContractViolation("gather_rows: index " + std::to_string(i) +
                              " out of range for " + shape_str(px->shape));
    }
  }
  Shape out_shape = px->shape.size() == 2 ? Shape{idx.size(), width}
                                          : Shape{idx.size()};
  auto out = new_node(std::move(out_shape), "gather_rows");
  for (std::size_t t = 0; t < idx.size(); ++t) {
    std::copy(px->values.begin() + idx[t] * width,
              px->values.begin() + (idx[t] + 1) * width,
              out->values.begin() + t * width);
  }
  return finish(std::move(out), {px},
                [idx = std::move(idx), width](const double* gout,
                                              const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  for (std::size_t t = 0; t < idx.size(); ++t) {
                    K().axpy(1.0, gout + t * width, sinks[0] + idx[t] * width,
                             width);
                  }
                });
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ContractViolation("stack_rows: no operands");
  std::vector<NodePtr> ps;
  ps.reserve(rows.size());
  for (const Tensor& t : rows) {
    require_rank(t, 1, "stack_rows");
    ps.push_back(held(t, "stack_rows"));
  }
  const std::size_t width = ps[0]->values.size();
  for (const auto& p : ps) {
    if (p->values.size() != width) {
      throw DimensionError("stack_rows: row lengths differ: " +
                           shape_str(ps[0]->shape) + " vs " +
                           shape_str(p->shape));
    }
  }
  auto out = new_node({ps.size(), width}, "stack_rows");
  for (std::size_t r = 0; r < ps.size(); ++r) {
    std::copy(ps[r]->values.begin(), ps[r]->values.end(),
              out->values.begin() + r * width);
  }
  return finish(std::move(out), std::move(ps),
                [width](const double* gout, const std::vector<double*>& sinks) {
                  for (std::size_t r = 0; r < sinks.size(); ++r) {
                    if (sinks[r]) K().axpy(1.0, gout + r * width, sinks[r], width);
                  }
                });
}

Tensor row_scale(const Tensor& m, const Tensor& s) {
  require_rank(m, 2, "row_scale");
  NodePtr pm = held(m, "row_scale"), ps = held(s, "row_scale");
  const std::size_t rows = pm->shape[0], width = pm->shape[1];
  const bool s_ok = (ps->shape.size() == 1 && ps->shape[0] == rows) ||
                    (ps->shape.size() == 2 && ps->shape[0] == rows &&
                     ps->shape[1] == 1);
  if (!s_ok) {
    throw DimensionError("row_scale: scale shape " + shape_str(ps->shape) +
                         " does not match " + std::to_string(rows) + " rows");
  }
  auto out = new_node(pm->shape, "row_scale");
  for (std::size_t r = 0; r < rows; ++r) {
    K().scale(pm->values.data() + r * width, ps->values[r],
              out->values.data() + r * width, width);
  }
  return finish(std::move(out), {pm, ps},
                [pm, ps, rows, width](const double* gout,
                                      const std::vector<double*>& sinks) {
                  for (std::size_t r = 0; r < rows; ++r) {
                    const double* g = gout + r * width;
                    if (sinks[0])
                      K().axpy(ps->values[r], g, sinks[0] + r * width, width);
                    if (sinks[1])
                      sinks[1][r] += K().dot(g, pm->values.data() + r * width,
                                             width);
                  }
                });
}

Tensor row_broadcast_add(const Tensor& m, const Tensor& b) {
  require_rank(m, 2, "row_broadcast_add");
  require_rank(b, 1, "row_broadcast_add");
  NodePtr pm = held(m, "row_broadcast_add"), pb = held(b, "row_broadcast_add");
  const std::size_t rows = pm->shape[0], width = pm->shape[1];
  if (pb->shape[0] != width) {
    throw DimensionError("row_broadcast_add: vector shape " +
                         shape_str(pb->shape) + " does not match row width " +
                         std::to_string(width));
  }
  auto out = new_node(pm->shape, "row_broadcast_add");
  for (std::size_t r = 0; r < rows; ++r) {
    K().add(pm->values.data() + r * width, pb->values.data(),
            out->values.data() + r * width, width);
  }
  return finish(std::move(out), {pm, pb},
                [rows, width](const double* gout,
                              const std::vector<double*>& sinks) {
                  if (sinks[0]) K().axpy(1.0, gout, sinks[0], rows * width);
                  if (sinks[1]) {
                    for (std::size_t r = 0; r < rows; ++r)
                      K().axpy(1.0, gout + r * width, sinks[1], width);
                  }
                });
}

// ---------------------------------------------------------------------------
// graph primitives
// ---------------------------------------------------------------------------

Tensor aggregate_edges(const Tensor& x, std::vector<std::size_t> src,
                       std::vector<std::size_t> dst, const Tensor& w) {
  require_rank(x, 2, "aggregate_edges");
  require_rank(w, 1, "aggregate_edges");
  NodePtr px = held(x, "aggregate_edges"), pw = held(w, "aggregate_edges");
  const std::size_t nodes = px->shape[0], width = px->shape[1];
  const std::size_t arcs = pw->shape[0];
  if (src.size() != arcs || dst.size() != arcs) {
    throw DimensionError(
        "aggregate_edges: " + std::to_string(src.size()) + " sources / " +
        std::to_string(dst.size()) + " destinations for " +
        std::to_string(arcs) + " weights");
  }
  for (std::size_t e = 0; e < arcs; ++e) {
    if (src[e] >= nodes || dst[e] >= nodes) {
      throw ContractViolation("aggregate_edges: arc " + std::to_string(e) +
                              " endpoint out of range for " +
                              std::to_string(nodes) + " rows");
    }
  }
  auto out = new_node(px->shape, "aggregate_edges");
  for (std::size_t e = 0; e < arcs; ++e) {
    K().axpy(pw->values[e], px->values.data() + src[e] * width,
             out->values.data() + dst[e] * width, width);
  }
  return finish(std::move(out), {px, pw},
                [px, pw, src = std::move(src), dst = std::move(dst), width](
                    const double* gout, const std::vector<double*>& sinks) {
                  for (std::size_t e = 0; e < src.size(); ++e) {
                    const double* g = gout + dst[e] * width;
                    if (sinks[0])
                      K().axpy(pw->values[e], g, sinks[0] + src[e] * width,
                               width);
                    if (sinks[1])
                      sinks[1][e] += K().dot(g, px->values.data() +
                                                    src[e] * width,
                                             width);
                  }
                });
}

void GroupIndex::validate(std::size_t size) const {
  std::vector<char> seen(size, 0);
  std::size_t count = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) {
      throw ContractViolation("group index: group " + std::to_string(g) +
                              " is empty");
    }
    for (std::size_t i : groups[g]) {
      if (i >= size) {
        throw ContractViolation("group index: member " + std::to_string(i) +
                                " out of range for size " +
                                std::to_string(size));
      }
      if (seen[i]) {
        throw ContractViolation("group index: member " + std::to_string(i) +
                                " appears twice");
      }
      seen[i] = 1;
      ++count;
    }
  }
  if (count != size) {
    throw ContractViolation("group index: covers " + std::to_string(count) +
                            " of " + std::to_string(size) + " members");
  }
}

Tensor softmax_groups(const Tensor& scores, const GroupIndex& groups) {
  require_rank(scores, 1, "softmax_groups");
  NodePtr px = held(scores, "softmax_groups");
  const std::size_t n = px->shape[0];
  groups.validate(n);
  auto out = new_node(px->shape, "softmax_groups");
  for (const auto& group : groups.groups) {
    double hi = px->values[group[0]];
    for (std::size_t i : group) hi = std::max(hi, px->values[i]);
    double total = 0.0;
    for (std::size_t i : group) {
      out->values[i] = std::exp(px->values[i] - hi);
      total += out->values[i];
    }
    for (std::size_t i : group) out->values[i] /= total;
  }
  const Node* self = out.get();  // owned-by-node closure: no cycle
  // Each group's Jacobian: d y_i = y_i (g_i − Σ_j y_j g_j).
  return finish(std::move(out), {px},
                [self, groups](const double* gout,
                               const std::vector<double*>& sinks) {
                  if (!sinks[0]) return;
                  const double* y = self->values.data();
                  for (const auto& group : groups.groups) {
                    double inner = 0.0;
                    for (std::size_t i : group) inner += y[i] * gout[i];
                    for (std::size_t i : group)
                      sinks[0][i] += y[i] * (gout[i] - inner);
                  }
                });
}

// ---------------------------------------------------------------------------
// verification helpers
// ---------------------------------------------------------------------------

void check_finite(const Tensor& result) {
  Node* root = req(result, "check_finite");
  std::vector<Node*> stack{root};
  std::unordered_map<Node*, char> seen;
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (seen[n]) continue;
    seen[n] = 1;
    for (std::size_t i = 0; i < n->values.size(); ++i) {
      if (!std::isfinite(n->values[i])) {
        std::ostringstream msg;
        msg << "non-finite value " << n->values[i] << " produced by op '"
            << n->op << "' at flat index " << i << " of shape "
            << shape_str(n->shape);
        throw NumericError(msg.str());
      }
    }
    for (const auto& p : n->parents) stack.push_back(p.get());
  }
}

double grad_check(const std::function<Tensor()>& f, std::span<Tensor> params,
                  double step) {
  if (!(step > 0.0)) {
    throw ContractViolation("grad_check: step must be positive");
  }
  for (Tensor& p : params) p.zero_grad();

  Tensor out = f();
  if (!out.defined() || out.numel() != 1) {
    throw ContractViolation("grad_check: f must return a one-element tensor");
  }
  check_finite(out);
  out.backward();

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) {
    analytic.push_back(p.has_grad() ? p.grad()
                                    : std::vector<double>(p.numel(), 0.0));
  }

  auto probe = [&]() {
    const double v = f().scalar();
    if (!std::isfinite(v)) {
      throw NumericError("grad_check: non-finite probe value");
    }
    return v;
  };

  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& v = params[pi].mutable_values();
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double orig = v[i];
      v[i] = orig + step;
      const double up = probe();
      v[i] = orig - step;
      const double down = probe();
      v[i] = orig;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[pi][i];
      const double err =
          std::abs(a - numeric) /
          std::max({1.0, std::abs(a), std::abs(numeric)});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

}  // namespace gognn
