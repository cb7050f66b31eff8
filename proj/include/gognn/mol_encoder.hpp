#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "gognn/rng.hpp"
#include "gognn/smiles.hpp"
#include "gognn/tensor.hpp"

namespace gognn {

/// Symmetrically normalized adjacency with self-connections:
/// given the dense weighted adjacency A (row-major n×n), returns the constant
/// tensor N with N[i][j] = (A+I)[i][j] / sqrt(d_i * d_j), where d_i is the
/// i-th row sum of A+I. Bond weights contribute directly to the degrees.
Tensor normalized_self_adjacency(const std::vector<double>& adjacency, std::size_t n);

/// Shared propagation rule of the convolution and pooling-score layers:
/// norm_adj · m · w (no activation).
Tensor graph_convolve(const Tensor& norm_adj, const Tensor& m, const Tensor& w);

/// Indices of the k = ceil(gamma * n) largest scores, ties broken toward the
/// lower index, returned in ascending index order. Requires 0 < gamma <= 1
/// and a non-empty score vector; k never falls below 1.
std::vector<std::size_t> top_select(const std::vector<double>& scores, double gamma);

/// Rows of m at idx, each scaled by its score (soft gate). scores_col must be
/// an n×1 column aligned with m's rows.
Tensor pool_rows(const Tensor& m, const Tensor& scores_col, const std::vector<std::size_t>& idx);

/// Graph readout: concatenation of the column-wise mean and column-wise sum
/// of m, as a rank-1 tensor of width 2·cols(m).
Tensor readout_mean_sum(const Tensor& m);

/// Induced submatrix a[idx, idx] of a dense row-major n×n matrix.
std::vector<double> induced_submatrix(const std::vector<double>& a, std::size_t n,
                                      const std::vector<std::size_t>& idx);

/// One graph-convolution layer: relu(norm_adj · m · weight).
struct GcnLayer {
  Tensor weight;  // d_in × d_out

  Tensor forward(const Tensor& norm_adj, const Tensor& m) const;
};

/// Self-attention pooling gate: scores = tanh(norm_adj · m · attention).
struct SagPoolLayer {
  Tensor attention;  // d × 1

  Tensor scores(const Tensor& norm_adj, const Tensor& m) const;
};

struct MoleculeEncoderConfig {
  std::size_t input_dim = kAtomFeatureDim;
  std::size_t hidden_dim = 384;
  std::size_t repr_dim = 256;
  std::size_t layers = 3;
  double pool_ratio = 0.5;
  bool pooling_enabled = true;  // false: mean+sum readout over all atoms, no shrinking
};

/// Hierarchical molecule encoder: per layer, graph convolution followed by
/// self-attention pooling; the per-layer mean∥sum readouts are concatenated
/// and linearly projected to the representation width.
class MoleculeEncoder {
 public:
  static MoleculeEncoder create(const MoleculeEncoderConfig& config, Rng& rng);

  /// Representation of a molecule graph, rank-1 of width repr_dim.
  Tensor encode(const MoleculeGraph& g) const;

  /// Lower-level entry: encode an explicit feature matrix (n × input_dim,
  /// may require gradients) over a dense adjacency. When `scores_out` is
  /// given and pooling is enabled, the per-layer pre-selection attention
  /// scores are appended to it (one value vector per layer) — introspection
  /// used by invariance audits, which must verify the scores are tie-free
  /// before comparing pooled representations across node orderings.
  Tensor encode_features(const Tensor& features, const std::vector<double>& adjacency,
                         std::vector<std::vector<double>>* scores_out = nullptr) const;

  const MoleculeEncoderConfig& config() const { return config_; }

  /// Appends (name, tensor) pairs for every trainable parameter, with names
  /// prefixed by `prefix`.
  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Tensor>>& out) const;

 private:
  MoleculeEncoderConfig config_;
  std::vector<GcnLayer> gcn_;
  std::vector<SagPoolLayer> pool_;
  Tensor projection_;  // (layers · 2 · hidden_dim) × repr_dim
};

}  // namespace gognn
