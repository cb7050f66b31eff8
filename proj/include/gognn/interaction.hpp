#pragma once

#include <cstddef>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "gognn/errors.hpp"
#include "gognn/rng.hpp"
#include "gognn/tensor.hpp"

namespace gognn {

/// One stored interaction. Undirected; kept once with i < j not required but
/// (i, j) and (j, i) must not both appear. `relation` is 0 and ignored for
/// untyped graphs.
struct InteractionEdge {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t relation = 0;
};

/// Records which stored edges message passing has read. The leakage guard
/// asserts that edges outside the training split are never read.
class EdgeReadLog {
 public:
  explicit EdgeReadLog(std::size_t edge_count) : seen_(edge_count, 0) {}

  void record(std::size_t edge_index) {
    if (edge_index >= seen_.size()) {
      throw ContractViolation("edge read log: index " + std::to_string(edge_index) +
                              " out of range for " + std::to_string(seen_.size()) +
                              " edges");
    }
    seen_[edge_index] = 1;
    ++events_;
  }

  /// Total read events (arcs traversed over all forward passes).
  std::size_t event_count() const { return events_; }
  bool was_read(std::size_t edge_index) const {
    return edge_index < seen_.size() && seen_[edge_index] != 0;
  }
  /// Indices of every edge read at least once, ascending.
  std::vector<std::size_t> read_edges() const;
  std::size_t edge_count() const { return seen_.size(); }
  void reset();

 private:
  std::vector<char> seen_;
  std::size_t events_ = 0;
};

/// Node set of entity ids [0, node_count) plus undirected interaction edges,
/// optionally typed by a relation id. relation_count == 0 means untyped.
struct InteractionGraph {
  std::size_t node_count = 0;
  std::size_t relation_count = 0;
  std::vector<InteractionEdge> edges;

  /// Checks endpoint ranges, bans self-edges, bans duplicate (unordered)
  /// pairs — (i,j,r) duplicates for typed graphs — and checks relation ids.
  void validate() const;
};

enum class SelfArcPolicy {
  kNone,          // plain neighbor arcs (edge aggregation adds its own self term)
  kIsolatedOnly,  // synthetic self-arc for nodes with no neighbor (attention)
  kAll,           // self-arc everywhere (normalized-adjacency convolution)
};

/// Directed-arc expansion of a subset of a graph's edges. Every arc remembers
/// the stored edge it came from so reads can be audited; synthetic self-arcs
/// carry kNoOrigin. When every node has at least one incoming arc the arcs
/// are also partitioned by destination for neighborhood softmax.
struct ArcSet {
  static constexpr std::size_t kNoOrigin = std::numeric_limits<std::size_t>::max();

  std::size_t node_count = 0;
  SelfArcPolicy policy = SelfArcPolicy::kNone;
  std::vector<std::size_t> src;
  std::vector<std::size_t> dst;
  std::vector<std::size_t> origin_edge;
  std::vector<std::size_t> relation;
  GroupIndex dst_groups;  // valid iff grouped
  bool grouped = false;
  EdgeReadLog* log = nullptr;

  std::size_t arc_count() const { return src.size(); }
  /// Reports every real (non-synthetic) arc's origin edge to the log, if any.
  void record_reads() const;
};

/// Expands the chosen stored edges (by index) into both directed arcs,
/// applying the self-arc policy. Arcs are ordered by destination. The
/// expansion itself is recorded as a read of each chosen edge.
ArcSet build_arcs(const InteractionGraph& graph, const std::vector<std::size_t>& edge_indices,
                  SelfArcPolicy policy, EdgeReadLog* log = nullptr);

/// Convenience: all edges of the graph.
ArcSet build_arcs_all(const InteractionGraph& graph, SelfArcPolicy policy,
                      EdgeReadLog* log = nullptr);

/// Multi-head graph attention layer. Per head κ: scores every arc j→i with
/// leaky_relu(a_κ · [W_κ x_i ∥ W_κ x_j]), normalizes by softmax over each
/// destination's arcs, aggregates σ(Σ_j α_ij W_κ x_j) with σ = ELU, and
/// concatenates the K head outputs.
struct GatLayer {
  std::vector<Tensor> head_weight;     // K tensors, d_in × d_head
  std::vector<Tensor> head_attention;  // K tensors, 2·d_head × 1

  static GatLayer create(std::size_t d_in, std::size_t d_out, std::size_t heads, Rng& rng);

  std::size_t heads() const { return head_weight.size(); }
  /// x: node_count × d_in. Requires arcs built with SelfArcPolicy::kIsolatedOnly.
  Tensor forward(const ArcSet& arcs, const Tensor& x) const;
};

/// Two affine maps with a ReLU between; final width 1.
struct EdgeMlp {
  Tensor w1;  // d_in × hidden
  Tensor b1;  // hidden
  Tensor w2;  // hidden × 1
  Tensor b2;  // 1

  static EdgeMlp create(std::size_t d_in, std::size_t hidden, Rng& rng);

  /// rows × d_in → rows × 1.
  Tensor forward(const Tensor& rows) const;
};

/// Edge-aggregation layer for typed graphs:
/// x_i′ = relu(W x_i + Σ_r Σ_{j∈η_i^r} x_j · τ_r), τ_r = edge_mlp(se_r).
/// Parameters are shared across relations; only the se table is per-relation.
struct EdgeAggLayer {
  Tensor weight;  // d × d
  EdgeMlp edge_mlp;

  static EdgeAggLayer create(std::size_t d, std::size_t se_dim, std::size_t mlp_hidden,
                             Rng& rng);

  /// Requires arcs built with SelfArcPolicy::kNone (the W x_i self term is
  /// built in). se_table: relation_count × se_dim.
  Tensor forward(const ArcSet& arcs, const Tensor& x, const Tensor& se_table) const;
};

/// Attention-free replacement layer: relu(N · x · W) with N the symmetrically
/// normalized adjacency (with self-connections) of the arc set, evaluated
/// sparsely over the arcs.
struct InteractionGcnLayer {
  Tensor weight;  // d_in × d_out

  static InteractionGcnLayer create(std::size_t d_in, std::size_t d_out, Rng& rng);

  /// Requires arcs built with SelfArcPolicy::kAll.
  Tensor forward(const ArcSet& arcs, const Tensor& x) const;
};

/// Learnable per-relation attribute vectors (se_r), relation_count × width.
struct SideEffectTable {
  Tensor embeddings;

  /// Seeded normal initialization with standard deviation 1/sqrt(width).
  static SideEffectTable create(std::size_t relation_count, std::size_t width, Rng& rng);

  /// Overrides rows from a TSV file: `relation_id<TAB>width space-separated
  /// reals` per line. Unknown ids or wrong widths raise DataError naming the
  /// line. Overridden rows stay trainable.
  void load_overrides(const std::string& path);

  std::size_t relation_count() const { return embeddings.rows(); }
  std::size_t width() const { return embeddings.cols(); }
};

enum class InteractionKind { kGat, kEdgeAgg, kGcn };

struct InteractionStackConfig {
  InteractionKind kind = InteractionKind::kGat;
  std::size_t layers = 2;
  std::size_t input_dim = 256;
  std::size_t output_dim = 256;  // must equal input_dim for kEdgeAgg
  std::size_t heads = 4;         // kGat only; must divide output_dim
  std::size_t relation_count = 0;
  std::size_t se_dim = 128;
  std::size_t edge_mlp_hidden = 64;
};

/// Stacked interaction layers over entity representations; the rows of the
/// result are the final per-entity vectors consumed by the scoring heads.
class InteractionStack {
 public:
  static InteractionStack create(const InteractionStackConfig& config, Rng& rng);

  Tensor forward(const ArcSet& arcs, const Tensor& x) const;

  const InteractionStackConfig& config() const { return config_; }
  const SideEffectTable& side_effects() const;
  SideEffectTable& side_effects();
  /// Self-arc policy the stack's layers require of their ArcSet.
  SelfArcPolicy arc_policy() const;

  void collect_parameters(const std::string& prefix,
                          std::vector<std::pair<std::string, Tensor>>& out) const;

 private:
  InteractionStackConfig config_;
  std::vector<GatLayer> gat_;
  std::vector<EdgeAggLayer> edge_;
  std::vector<InteractionGcnLayer> gcn_;
  SideEffectTable se_table_{Tensor()};
};

}  // namespace gognn
