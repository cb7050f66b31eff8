#include "gognn/mol_encoder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "gognn/init.hpp"

namespace gognn {

Tensor normalized_self_adjacency(const std::vector<double>& adjacency, std::size_t n) {
  if (adjacency.size() != n * n) {
    throw DimensionError("normalized_self_adjacency: adjacency size " +
                         std::to_string(adjacency.size()) + " does not match n=" +
                         std::to_string(n));
  }
  if (n == 0) throw DimensionError("normalized_self_adjacency: empty graph");
  std::vector<double> tilde(adjacency);
  for (std::size_t i = 0; i < n; ++i) tilde[i * n + i] += 1.0;
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    double d = 0.0;
    for (std::size_t j = 0; j < n; ++j) d += tilde[i * n + j];
    if (!(d > 0.0)) {
      throw NumericError("normalized_self_adjacency: non-positive degree at row " +
                         std::to_string(i));
    }
    inv_sqrt_deg[i] = 1.0 / std::sqrt(d);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      tilde[i * n + j] *= inv_sqrt_deg[i] * inv_sqrt_deg[j];
  return Tensor::from({n, n}, std::move(tilde), /*requires_grad=*/false);
}

Tensor graph_convolve(const Tensor& norm_adj, const Tensor& m, const Tensor& w) {
  return matmul(matmul(norm_adj, m), w);
}

std::vector<std::size_t> top_select(const std::vector<double>& scores, double gamma) {
  if (scores.empty()) throw ContractViolation("top_select: empty score vector");
  if (!(gamma > 0.0) || gamma > 1.0) {
    throw ContractViolation("top_select: pool ratio must lie in (0, 1], got " +
                            std::to_string(gamma));
  }
  const std::size_t n = scores.size();
  std::size_t k = static_cast<std::size_t>(std::ceil(gamma * double(n)));
  k = std::min(std::max<std::size_t>(k, 1), n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

Tensor pool_rows(const Tensor& m, const Tensor& scores_col, const std::vector<std::size_t>& idx) {
  if (scores_col.rank() != 2 || scores_col.cols() != 1 || scores_col.rows() != m.rows()) {
    throw DimensionError("pool_rows: scores must be a column aligned with m's rows");
  }
  Tensor selected = gather_rows(m, idx);
  Tensor gates = gather_rows(scores_col, idx);
  return row_scale(selected, reshape(gates, {idx.size()}));
}

Tensor readout_mean_sum(const Tensor& m) {
  return concat({reduce(m, Reduce::kMean, 0), reduce(m, Reduce::kSum, 0)});
}

std::vector<double> induced_submatrix(const std::vector<double>& a, std::size_t n,
                                      const std::vector<std::size_t>& idx) {
  if (a.size() != n * n) {
    throw DimensionError("induced_submatrix: matrix size does not match n");
  }
  const std::size_t k = idx.size();
  std::vector<double> out(k * k);
  for (std::size_t r = 0; r < k; ++r) {
    if (idx[r] >= n) throw ContractViolation("induced_submatrix: index out of range");
    for (std::size_t c = 0; c < k; ++c) out[r * k + c] = a[idx[r] * n + idx[c]];
  }
  return out;
}

Tensor GcnLayer::forward(const Tensor& norm_adj, const Tensor& m) const {
  return relu(graph_convolve(norm_adj, m, weight));
}

Tensor SagPoolLayer::scores(const Tensor& norm_adj, const Tensor& m) const {
  return tanh(graph_convolve(norm_adj, m, attention));
}

MoleculeEncoder MoleculeEncoder::create(const MoleculeEncoderConfig& config, Rng& rng) {
  if (config.layers == 0) throw ContractViolation("MoleculeEncoder: needs at least one layer");
  if (config.hidden_dim == 0 || config.repr_dim == 0 || config.input_dim == 0) {
    throw ContractViolation("MoleculeEncoder: zero dimension");
  }
  if (!(config.pool_ratio > 0.0) || config.pool_ratio > 1.0) {
    throw ContractViolation("MoleculeEncoder: pool ratio must lie in (0, 1]");
  }
  MoleculeEncoder enc;
  enc.config_ = config;
  // The gate convolution's output passes through tanh and multiplies the kept
  // rows, so a plain fan-based bound leaves every gate near zero and shrinks
  // the features by a large factor at each pooled layer; the widened bound
  // starts gates at usable magnitude. The projection feeds a pairwise dot
  // product, which squares any remaining scale loss, so it gets the same
  // widening to land initial pair scores near order one.
  constexpr double kGateGain = 8.0;
  constexpr double kProjectionGain = 8.0;
  for (std::size_t l = 0; l < config.layers; ++l) {
    const std::size_t d_in = (l == 0) ? config.input_dim : config.hidden_dim;
    enc.gcn_.push_back(GcnLayer{glorot_uniform(rng, d_in, config.hidden_dim)});
    if (config.pooling_enabled) {
      enc.pool_.push_back(
          SagPoolLayer{glorot_uniform(rng, config.hidden_dim, 1, kGateGain)});
    }
  }
  enc.projection_ = glorot_uniform(rng, config.layers * 2 * config.hidden_dim,
                                   config.repr_dim, kProjectionGain);
  return enc;
}

Tensor MoleculeEncoder::encode(const MoleculeGraph& g) const {
  if (g.atoms.empty()) throw ContractViolation("MoleculeEncoder: empty molecule");
  const std::size_t n = g.atom_count();
  Tensor features =
      Tensor::from({n, config_.input_dim}, g.feature_matrix(), /*requires_grad=*/false);
  return encode_features(features, g.adjacency());
}

Tensor MoleculeEncoder::encode_features(const Tensor& features,
                                        const std::vector<double>& adjacency,
                                        std::vector<std::vector<double>>* scores_out) const {
  if (features.rank() != 2 || features.cols() != config_.input_dim) {
    throw DimensionError("MoleculeEncoder: features must be n x input_dim");
  }
  std::size_t n = features.rows();
  if (adjacency.size() != n * n) {
    throw DimensionError("MoleculeEncoder: adjacency does not match feature rows");
  }

  Tensor m = features;
  std::vector<double> adj = adjacency;
  std::vector<Tensor> readouts;
  readouts.reserve(config_.layers);
  for (std::size_t l = 0; l < config_.layers; ++l) {
    Tensor norm = normalized_self_adjacency(adj, n);
    m = gcn_[l].forward(norm, m);
    if (config_.pooling_enabled) {
      Tensor s = pool_[l].scores(norm, m);
      if (scores_out != nullptr) scores_out->push_back(s.values());
      std::vector<std::size_t> idx = top_select(s.values(), config_.pool_ratio);
      m = pool_rows(m, s, idx);
      adj = induced_submatrix(adj, n, idx);
      n = idx.size();
    }
    readouts.push_back(readout_mean_sum(m));
  }

  Tensor summary = concat(readouts);
  Tensor projected =
      matmul(reshape(summary, {1, summary.numel()}), projection_);
  return reshape(projected, {config_.repr_dim});
}

void MoleculeEncoder::collect_parameters(
    const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const {
  for (std::size_t l = 0; l < gcn_.size(); ++l) {
    out.emplace_back(prefix + ".gcn" + std::to_string(l) + ".weight", gcn_[l].weight);
    if (l < pool_.size()) {
      out.emplace_back(prefix + ".pool" + std::to_string(l) + ".attention",
                       pool_[l].attention);
    }
  }
  out.emplace_back(prefix + ".projection", projection_);
}

}  // namespace gognn
