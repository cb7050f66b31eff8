#include "gognn/objectives.hpp"

#include <algorithm>
#include <numeric>

#include "gognn/init.hpp"

namespace gognn {

namespace {
constexpr double kProbFloor = 1e-12;

void require_vector(const Tensor& t, const char* who) {
  if (t.rank() != 1) {
    throw DimensionError(std::string(who) + ": expected a rank-1 representation");
  }
}
}  // namespace

Tensor cci_score(const Tensor& xi, const Tensor& xj) {
  require_vector(xi, "cci_score");
  require_vector(xj, "cci_score");
  if (xi.numel() != xj.numel()) {
    throw DimensionError("cci_score: widths " + std::to_string(xi.numel()) + " vs " +
                         std::to_string(xj.numel()));
  }
  return sigmoid(sum_all(mul(xi, xj)));
}

RelationWeights RelationWeights::create(std::size_t relation_count, std::size_t d, Rng& rng) {
  if (relation_count == 0 || d == 0) {
    throw ContractViolation("RelationWeights: empty configuration");
  }
  RelationWeights rel;
  rel.w.reserve(relation_count);
  for (std::size_t r = 0; r < relation_count; ++r) rel.w.push_back(glorot_uniform(rng, d, d));
  return rel;
}

void RelationWeights::collect_parameters(
    const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const {
  for (std::size_t r = 0; r < w.size(); ++r) {
    out.emplace_back(prefix + ".relation" + std::to_string(r), w[r]);
  }
}

Tensor ddi_score(const Tensor& xi, const Tensor& xj, const RelationWeights& rel,
                 std::size_t relation) {
  require_vector(xi, "ddi_score");
  require_vector(xj, "ddi_score");
  if (relation >= rel.relation_count()) {
    throw DataError("ddi_score: relation " + std::to_string(relation) +
                    " out of range for " + std::to_string(rel.relation_count()) +
                    " relations");
  }
  const Tensor& wr = rel.w[relation];
  Tensor ti = matmul(reshape(xi, {1, xi.numel()}), wr);
  Tensor tj = matmul(reshape(xj, {1, xj.numel()}), wr);
  return sigmoid(sum_all(mul(ti, tj)));
}

Tensor pair_logits(const Tensor& reprs, const std::vector<std::size_t>& is,
                   const std::vector<std::size_t>& js) {
  if (is.size() != js.size()) {
    throw DimensionError("pair_logits: " + std::to_string(is.size()) + " left vs " +
                         std::to_string(js.size()) + " right endpoints");
  }
  if (is.empty()) throw ContractViolation("pair_logits: empty pair list");
  Tensor gi = gather_rows(reprs, is);
  Tensor gj = gather_rows(reprs, js);
  return reduce(mul(gi, gj), Reduce::kSum, 1);
}

Tensor pair_scores(const Tensor& reprs, const std::vector<std::size_t>& is,
                   const std::vector<std::size_t>& js) {
  return sigmoid(pair_logits(reprs, is, js));
}

Tensor triplet_logits(const Tensor& reprs, const RelationWeights& rel,
                      const std::vector<Triplet>& triplets) {
  if (triplets.empty()) throw ContractViolation("triplet_logits: empty triplet list");
  for (std::size_t t = 0; t < triplets.size(); ++t) {
    if (triplets[t].relation >= rel.relation_count()) {
      throw DataError("triplet_logits: triplet " + std::to_string(t) + " relation " +
                      std::to_string(triplets[t].relation) + " out of range for " +
                      std::to_string(rel.relation_count()) + " relations");
    }
  }
  // Process relation by relation (contiguous after a stable sort), then
  // restore the caller's order with an inverse gather.
  std::vector<std::size_t> order(triplets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return triplets[a].relation < triplets[b].relation;
  });

  std::vector<Tensor> runs;
  std::size_t begin = 0;
  while (begin < order.size()) {
    std::size_t end = begin;
    const std::size_t r = triplets[order[begin]].relation;
    while (end < order.size() && triplets[order[end]].relation == r) ++end;
    std::vector<std::size_t> is, js;
    is.reserve(end - begin);
    js.reserve(end - begin);
    for (std::size_t p = begin; p < end; ++p) {
      is.push_back(triplets[order[p]].i);
      js.push_back(triplets[order[p]].j);
    }
    Tensor ti = matmul(gather_rows(reprs, is), rel.w[r]);
    Tensor tj = matmul(gather_rows(reprs, js), rel.w[r]);
    runs.push_back(reduce(mul(ti, tj), Reduce::kSum, 1));
    begin = end;
  }
  Tensor sorted_dots = runs.size() == 1 ? runs[0] : concat(runs);
  std::vector<std::size_t> inverse(order.size());
  for (std::size_t p = 0; p < order.size(); ++p) inverse[order[p]] = p;
  return gather_rows(sorted_dots, inverse);
}

Tensor triplet_scores(const Tensor& reprs, const RelationWeights& rel,
                      const std::vector<Triplet>& triplets) {
  return sigmoid(triplet_logits(reprs, rel, triplets));
}

Tensor nce_loss(const Tensor& pos_probs, const Tensor& neg_probs) {
  const bool pos_empty = !pos_probs.defined();
  const bool neg_empty = !neg_probs.defined();
  if (pos_empty != neg_empty) {
    throw DimensionError("nce_loss: positives and negatives must both be present");
  }
  if (pos_empty) return Tensor::scalar_of(0.0);
  if (pos_probs.numel() != neg_probs.numel()) {
    throw DimensionError("nce_loss: " + std::to_string(pos_probs.numel()) +
                         " positives vs " + std::to_string(neg_probs.numel()) +
                         " negatives (one sampled negative per positive)");
  }
  Tensor pos_term = sum_all(log(clamp_min(pos_probs, kProbFloor)));
  Tensor miss = add_scalar(neg(neg_probs), 1.0);  // 1 − p
  Tensor neg_term = sum_all(log(clamp_min(miss, kProbFloor)));
  return neg(add(pos_term, neg_term));
}

Tensor nce_loss_logits(const Tensor& pos_logits, const Tensor& neg_logits) {
  const bool pos_empty = !pos_logits.defined();
  const bool neg_empty = !neg_logits.defined();
  if (pos_empty != neg_empty) {
    throw DimensionError("nce_loss_logits: positives and negatives must both be present");
  }
  if (pos_empty) return Tensor::scalar_of(0.0);
  if (pos_logits.numel() != neg_logits.numel()) {
    throw DimensionError("nce_loss_logits: " + std::to_string(pos_logits.numel()) +
                         " positives vs " + std::to_string(neg_logits.numel()) +
                         " negatives (one sampled negative per positive)");
  }
  // −log σ(x) = softplus(−x) and −log(1 − σ(x)) = softplus(x), exactly.
  Tensor pos_term = sum_all(softplus(neg(pos_logits)));
  Tensor neg_term = sum_all(softplus(neg_logits));
  return add(pos_term, neg_term);
}

NegativeSampler::NegativeSampler(const InteractionGraph& graph, bool degree_proportional,
                                 bool filtered)
    : node_count_(graph.node_count), filtered_(filtered) {
  if (node_count_ < 2) {
    throw ContractViolation("NegativeSampler: needs at least two nodes");
  }
  const std::uint64_t relations = std::max<std::size_t>(graph.relation_count, 1);
  // Key = ((lo · N) + hi) · R + r must fit in 64 bits.
  if (node_count_ > (1ULL << 21) || relations > (1ULL << 20)) {
    throw ContractViolation("NegativeSampler: graph too large for packed positive keys");
  }
  pair_stride_ = relations;
  positives_.reserve(graph.edges.size() * 2);
  for (const auto& e : graph.edges) {
    const std::uint64_t lo = std::min(e.i, e.j), hi = std::max(e.i, e.j);
    positives_.insert(((lo * node_count_) + hi) * pair_stride_ + e.relation);
  }
  if (degree_proportional) {
    std::vector<double> degree(node_count_, 0.0);
    for (const auto& e : graph.edges) {
      degree[e.i] += 1.0;
      degree[e.j] += 1.0;
    }
    const double total = std::accumulate(degree.begin(), degree.end(), 0.0);
    if (total > 0.0) {
      degree_cumulative_.resize(node_count_);
      double run = 0.0;
      for (std::size_t n = 0; n < node_count_; ++n) {
        run += degree[n];
        degree_cumulative_[n] = run / total;
      }
      degree_cumulative_.back() = 1.0;
    }
    // A graph with no edges falls back to uniform draws.
  }
}

bool NegativeSampler::is_positive(std::size_t i, std::size_t relation, std::size_t j) const {
  const std::uint64_t lo = std::min(i, j), hi = std::max(i, j);
  return positives_.count(((lo * node_count_) + hi) * pair_stride_ + relation) != 0;
}

std::size_t NegativeSampler::draw(Rng& rng) const {
  if (degree_cumulative_.empty()) return rng.below(node_count_);
  const double u = rng.uniform01();
  const auto it =
      std::lower_bound(degree_cumulative_.begin(), degree_cumulative_.end(), u);
  return std::min<std::size_t>(std::size_t(it - degree_cumulative_.begin()),
                               node_count_ - 1);
}

std::size_t NegativeSampler::sample(std::size_t anchor, std::size_t relation, Rng& rng) const {
  if (anchor >= node_count_) {
    throw ContractViolation("NegativeSampler: anchor " + std::to_string(anchor) +
                            " out of range");
  }
  for (int attempt = 0; attempt < 100; ++attempt) {
    const std::size_t m = draw(rng);
    if (m == anchor) continue;
    if (filtered_ && is_positive(anchor, relation, m)) continue;
    return m;
  }
  // Rejection bound hit: accept any node other than the anchor, drawn
  // uniformly so termination never depends on the degree distribution.
  std::size_t m = rng.below(node_count_ - 1);
  if (m >= anchor) ++m;
  return m;
}

}  // namespace gognn
