#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "gognn/interaction.hpp"
#include "gognn/rng.hpp"
#include "gognn/tensor.hpp"

namespace gognn {

/// Link probability for one untyped pair: sigmoid(x_i · x_j). Symmetric.
/// Inputs are rank-1 of equal width; result is a one-element tensor.
Tensor cci_score(const Tensor& xi, const Tensor& xj);

/// One learnable square matrix per relation for the typed bilinear score.
struct RelationWeights {
  std::vector<Tensor> w;  // R tensors, d × d

  static RelationWeights create(std::size_t relation_count, std::size_t d, Rng& rng);

  std::size_t relation_count() const { return w.size(); }
  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Tensor>>& out) const;
};

/// Typed link probability: sigmoid((x_iᵀ W_r) · (x_jᵀ W_r)). Symmetric in
/// (i, j). Unknown relation ids raise DataError.
Tensor ddi_score(const Tensor& xi, const Tensor& xj, const RelationWeights& rel,
                 std::size_t relation);

/// Batched untyped scores: probability per (is[t], js[t]) row pair of reprs,
/// aligned with the input order. Rank-1, length is.size().
Tensor pair_scores(const Tensor& reprs, const std::vector<std::size_t>& is,
                   const std::vector<std::size_t>& js);

/// Pre-sigmoid untyped scores (the raw dot products): pair_scores is exactly
/// sigmoid of this. The losses consume logits so their gradients survive
/// saturation, where double-precision probabilities round to 0 or 1.
Tensor pair_logits(const Tensor& reprs, const std::vector<std::size_t>& is,
                   const std::vector<std::size_t>& js);

struct Triplet {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t relation = 0;
};

/// Batched typed scores, aligned with the input order.
Tensor triplet_scores(const Tensor& reprs, const RelationWeights& rel,
                      const std::vector<Triplet>& triplets);

/// Pre-sigmoid typed scores: triplet_scores is exactly sigmoid of this.
Tensor triplet_logits(const Tensor& reprs, const RelationWeights& rel,
                      const std::vector<Triplet>& triplets);

/// Negative-sampling cross entropy shared by both tasks:
/// Σ_t −log(p_pos[t]) − log(1 − p_neg[t]), with probabilities clamped to
/// ≥ 1e-12 before the log. pos and neg must have equal length (one sampled
/// negative per positive). Empty inputs give a constant zero.
Tensor nce_loss(const Tensor& pos_probs, const Tensor& neg_probs);

/// The same objective evaluated from pre-sigmoid scores:
/// Σ_t softplus(−pos[t]) + softplus(neg[t]), identically equal to
/// Σ −log σ(pos) − log(1 − σ(neg)). Unlike the probability form, whose
/// inputs saturate to exact 0/1 in double precision (and whose clamp then
/// cuts the gradient), this form keeps full-magnitude gradients at any score,
/// so training can recover from saturated states. Used by the training loop.
Tensor nce_loss_logits(const Tensor& pos_logits, const Tensor& neg_logits);

/// Draws corrupted endpoints for negative sampling. By default uniform over
/// nodes, optionally proportional to node degree; by default rejects the
/// anchor itself and observed positives, falling back to any node ≠ anchor
/// after 100 rejected draws.
class NegativeSampler {
 public:
  /// Records the graph's positives for filtering. Requires ≥ 2 nodes.
  explicit NegativeSampler(const InteractionGraph& graph, bool degree_proportional = false,
                           bool filtered = true);

  /// A corrupted partner m for anchor i under the given relation (0 for
  /// untyped graphs): m ≠ i, and (i, relation, m) is not an observed
  /// positive unless the rejection bound was hit.
  std::size_t sample(std::size_t anchor, std::size_t relation, Rng& rng) const;

  bool is_positive(std::size_t i, std::size_t relation, std::size_t j) const;

 private:
  std::size_t draw(Rng& rng) const;

  std::size_t node_count_ = 0;
  bool filtered_ = true;
  std::unordered_set<std::uint64_t> positives_;
  std::uint64_t pair_stride_ = 0;
  std::vector<double> degree_cumulative_;  // empty → uniform draws
};

}  // namespace gognn
