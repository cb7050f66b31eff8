#include "gognn/interaction.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "gognn/init.hpp"

namespace gognn {

std::vector<std::size_t> EdgeReadLog::read_edges() const {
  std::vector<std::size_t> out;
  for (std::size_t e = 0; e < seen_.size(); ++e)
    if (seen_[e]) out.push_back(e);
  return out;
}

void EdgeReadLog::reset() {
  std::fill(seen_.begin(), seen_.end(), 0);
  events_ = 0;
}

void InteractionGraph::validate() const {
  // Unordered-pair keys (plus relation for typed graphs), checked exactly.
  std::vector<std::array<std::size_t, 3>> keys;
  keys.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const auto& edge = edges[e];
    if (edge.i >= node_count || edge.j >= node_count) {
      throw DataError("interaction edge " + std::to_string(e) + " endpoint (" +
                      std::to_string(edge.i) + ", " + std::to_string(edge.j) +
                      ") out of range for " + std::to_string(node_count) + " nodes");
    }
    if (edge.i == edge.j) {
      throw DataError("interaction edge " + std::to_string(e) + " is a self-edge on node " +
                      std::to_string(edge.i));
    }
    if (relation_count == 0) {
      if (edge.relation != 0) {
        throw DataError("interaction edge " + std::to_string(e) +
                        " carries relation id in an untyped graph");
      }
    } else if (edge.relation >= relation_count) {
      throw DataError("interaction edge " + std::to_string(e) + " relation " +
                      std::to_string(edge.relation) + " out of range for " +
                      std::to_string(relation_count) + " relations");
    }
    keys.push_back({std::min(edge.i, edge.j), std::max(edge.i, edge.j), edge.relation});
  }
  std::vector<std::size_t> order(keys.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return keys[a] < keys[b]; });
  for (std::size_t p = 1; p < order.size(); ++p) {
    if (keys[order[p]] == keys[order[p - 1]]) {
      throw DataError("interaction edge " + std::to_string(order[p]) + " duplicates edge " +
                      std::to_string(order[p - 1]) + " (" +
                      std::to_string(edges[order[p]].i) + ", " +
                      std::to_string(edges[order[p]].j) + ")");
    }
  }
}

void ArcSet::record_reads() const {
  if (!log) return;
  for (std::size_t a = 0; a < origin_edge.size(); ++a) {
    if (origin_edge[a] != kNoOrigin) log->record(origin_edge[a]);
  }
}

ArcSet build_arcs(const InteractionGraph& graph, const std::vector<std::size_t>& edge_indices,
                  SelfArcPolicy policy, EdgeReadLog* log) {
  struct Raw {
    std::size_t src, dst, origin, relation;
  };
  std::vector<Raw> raw;
  raw.reserve(edge_indices.size() * 2 + graph.node_count);
  for (std::size_t idx : edge_indices) {
    if (idx >= graph.edges.size()) {
      throw ContractViolation("build_arcs: edge index " + std::to_string(idx) +
                              " out of range for " + std::to_string(graph.edges.size()) +
                              " edges");
    }
    const auto& e = graph.edges[idx];
    raw.push_back({e.i, e.j, idx, e.relation});
    raw.push_back({e.j, e.i, idx, e.relation});
    if (log) log->record(idx);
  }
  if (policy != SelfArcPolicy::kNone) {
    std::vector<char> has_incoming(graph.node_count, 0);
    for (const auto& a : raw) has_incoming[a.dst] = 1;
    for (std::size_t n = 0; n < graph.node_count; ++n) {
      if (policy == SelfArcPolicy::kAll || !has_incoming[n]) {
        raw.push_back({n, n, ArcSet::kNoOrigin, 0});
      }
    }
  }
  std::stable_sort(raw.begin(), raw.end(),
                   [](const Raw& a, const Raw& b) { return a.dst < b.dst; });

  ArcSet arcs;
  arcs.node_count = graph.node_count;
  arcs.policy = policy;
  arcs.log = log;
  arcs.src.reserve(raw.size());
  arcs.dst.reserve(raw.size());
  arcs.origin_edge.reserve(raw.size());
  arcs.relation.reserve(raw.size());
  for (const auto& a : raw) {
    arcs.src.push_back(a.src);
    arcs.dst.push_back(a.dst);
    arcs.origin_edge.push_back(a.origin);
    arcs.relation.push_back(a.relation);
  }
  // Destination partition for neighborhood softmax: valid only when every
  // node receives at least one arc.
  if (policy != SelfArcPolicy::kNone && graph.node_count > 0) {
    arcs.dst_groups.groups.assign(graph.node_count, {});
    for (std::size_t a = 0; a < arcs.dst.size(); ++a) {
      arcs.dst_groups.groups[arcs.dst[a]].push_back(a);
    }
    arcs.dst_groups.validate(arcs.dst.size());
    arcs.grouped = true;
  }
  return arcs;
}

ArcSet build_arcs_all(const InteractionGraph& graph, SelfArcPolicy policy, EdgeReadLog* log) {
  std::vector<std::size_t> all(graph.edges.size());
  std::iota(all.begin(), all.end(), 0);
  return build_arcs(graph, all, policy, log);
}

GatLayer GatLayer::create(std::size_t d_in, std::size_t d_out, std::size_t heads, Rng& rng) {
  if (heads == 0) throw ContractViolation("GatLayer: needs at least one head");
  if (d_out % heads != 0) {
    throw ContractViolation("GatLayer: output width " + std::to_string(d_out) +
                            " not divisible by " + std::to_string(heads) + " heads");
  }
  const std::size_t d_head = d_out / heads;
  // Mildly widened bounds keep head outputs and attention scores at usable
  // scale given the modest magnitude of the incoming molecule
  // representations; calibrated together with the encoder's gains.
  constexpr double kHeadGain = 2.0;
  GatLayer layer;
  for (std::size_t k = 0; k < heads; ++k) {
    layer.head_weight.push_back(glorot_uniform(rng, d_in, d_head, kHeadGain));
    layer.head_attention.push_back(
        glorot_uniform(rng, 2 * d_head, 1, kHeadGain));
  }
  return layer;
}

Tensor GatLayer::forward(const ArcSet& arcs, const Tensor& x) const {
  if (arcs.policy != SelfArcPolicy::kIsolatedOnly) {
    throw ContractViolation(
        "GatLayer: arcs must use the isolated-only self-arc policy");
  }
  if (x.rows() != arcs.node_count) {
    throw DimensionError("GatLayer: " + std::to_string(x.rows()) + " feature rows for " +
                         std::to_string(arcs.node_count) + " nodes");
  }
  arcs.record_reads();
  std::vector<Tensor> outputs;
  outputs.reserve(head_weight.size());
  for (std::size_t k = 0; k < head_weight.size(); ++k) {
    Tensor h = matmul(x, head_weight[k]);  // N × d_head
    Tensor h_dst = gather_rows(h, arcs.dst);
    Tensor h_src = gather_rows(h, arcs.src);
    // a · [W x_i ∥ W x_j] with i the destination and j the source.
    Tensor logits =
        reshape(matmul(concat_cols({h_dst, h_src}), head_attention[k]), {arcs.arc_count()});
    Tensor alpha = softmax_groups(leaky_relu(logits, 0.2), arcs.dst_groups);
    outputs.push_back(elu(aggregate_edges(h, arcs.src, arcs.dst, alpha)));
  }
  return outputs.size() == 1 ? outputs[0] : concat_cols(outputs);
}

EdgeMlp EdgeMlp::create(std::size_t d_in, std::size_t hidden, Rng& rng) {
  EdgeMlp mlp;
  mlp.w1 = glorot_uniform(rng, d_in, hidden);
  mlp.b1 = Tensor::zeros({hidden}, /*requires_grad=*/true);
  mlp.w2 = glorot_uniform(rng, hidden, 1);
  mlp.b2 = Tensor::zeros({1}, /*requires_grad=*/true);
  return mlp;
}

Tensor EdgeMlp::forward(const Tensor& rows) const {
  Tensor hidden = relu(row_broadcast_add(matmul(rows, w1), b1));
  return row_broadcast_add(matmul(hidden, w2), b2);
}

EdgeAggLayer EdgeAggLayer::create(std::size_t d, std::size_t se_dim, std::size_t mlp_hidden,
                                  Rng& rng) {
  EdgeAggLayer layer;
  layer.weight = glorot_uniform(rng, d, d);
  layer.edge_mlp = EdgeMlp::create(se_dim, mlp_hidden, rng);
  return layer;
}

Tensor EdgeAggLayer::forward(const ArcSet& arcs, const Tensor& x, const Tensor& se_table) const {
  if (arcs.policy != SelfArcPolicy::kNone) {
    throw ContractViolation("EdgeAggLayer: arcs must not carry synthetic self-arcs");
  }
  if (x.rows() != arcs.node_count) {
    throw DimensionError("EdgeAggLayer: " + std::to_string(x.rows()) + " feature rows for " +
                         std::to_string(arcs.node_count) + " nodes");
  }
  for (std::size_t a = 0; a < arcs.relation.size(); ++a) {
    if (arcs.relation[a] >= se_table.rows()) {
      throw DataError("edge aggregation: arc " + std::to_string(a) + " relation " +
                      std::to_string(arcs.relation[a]) + " unknown to the " +
                      std::to_string(se_table.rows()) + "-row attribute table");
    }
  }
  arcs.record_reads();
  Tensor self = matmul(x, weight);
  if (arcs.arc_count() == 0) return relu(self);
  // τ_r for every relation, gathered onto the arcs.
  Tensor tau = reshape(edge_mlp.forward(se_table), {se_table.rows()});
  Tensor arc_tau = gather_rows(tau, arcs.relation);
  Tensor neighbor = aggregate_edges(x, arcs.src, arcs.dst, arc_tau);
  return relu(add(self, neighbor));
}

InteractionGcnLayer InteractionGcnLayer::create(std::size_t d_in, std::size_t d_out, Rng& rng) {
  return InteractionGcnLayer{glorot_uniform(rng, d_in, d_out)};
}

Tensor InteractionGcnLayer::forward(const ArcSet& arcs, const Tensor& x) const {
  if (arcs.policy != SelfArcPolicy::kAll) {
    throw ContractViolation("InteractionGcnLayer: arcs must carry self-arcs on every node");
  }
  if (x.rows() != arcs.node_count) {
    throw DimensionError("InteractionGcnLayer: " + std::to_string(x.rows()) +
                         " feature rows for " + std::to_string(arcs.node_count) + " nodes");
  }
  arcs.record_reads();
  // Degrees of A + I counted as incoming arcs (unit edge weights).
  std::vector<double> degree(arcs.node_count, 0.0);
  for (std::size_t a = 0; a < arcs.arc_count(); ++a) degree[arcs.dst[a]] += 1.0;
  std::vector<double> norm(arcs.arc_count());
  for (std::size_t a = 0; a < arcs.arc_count(); ++a) {
    norm[a] = 1.0 / std::sqrt(degree[arcs.src[a]] * degree[arcs.dst[a]]);
  }
  Tensor coeff = Tensor::from({arcs.arc_count()}, std::move(norm), /*requires_grad=*/false);
  return relu(aggregate_edges(matmul(x, weight), arcs.src, arcs.dst, coeff));
}

SideEffectTable SideEffectTable::create(std::size_t relation_count, std::size_t width,
                                        Rng& rng) {
  if (relation_count == 0 || width == 0) {
    throw ContractViolation("SideEffectTable: empty table");
  }
  return SideEffectTable{normal_tensor(rng, {relation_count, width},
                                       1.0 / std::sqrt(double(width)))};
}

void SideEffectTable::load_overrides(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open side-effect vector file: " + path);
  std::string line;
  std::size_t line_no = 0;
  auto& values = embeddings.mutable_values();
  const std::size_t w = width();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path + ":" + std::to_string(line_no) + ": expected TAB after relation id");
    }
    std::size_t relation = 0;
    const char* id_begin = line.data();
    const char* id_end = line.data() + tab;
    auto [ptr, ec] = std::from_chars(id_begin, id_end, relation);
    if (ec != std::errc() || ptr != id_end) {
      throw DataError(path + ":" + std::to_string(line_no) + ": bad relation id '" +
                      line.substr(0, tab) + "'");
    }
    if (relation >= relation_count()) {
      throw DataError(path + ":" + std::to_string(line_no) + ": relation " +
                      std::to_string(relation) + " out of range for " +
                      std::to_string(relation_count()) + " relations");
    }
    std::istringstream rest(line.substr(tab + 1));
    std::vector<double> row;
    row.reserve(w);
    double v = 0.0;
    while (rest >> v) row.push_back(v);
    if (row.size() != w) {
      throw DataError(path + ":" + std::to_string(line_no) + ": got " +
                      std::to_string(row.size()) + " values, expected " + std::to_string(w));
    }
    std::copy(row.begin(), row.end(), values.begin() + std::ptrdiff_t(relation * w));
  }
}

InteractionStack InteractionStack::create(const InteractionStackConfig& config, Rng& rng) {
  if (config.layers == 0) {
    throw ContractViolation("InteractionStack: needs at least one layer");
  }
  InteractionStack stack;
  stack.config_ = config;
  switch (config.kind) {
    case InteractionKind::kGat:
      for (std::size_t l = 0; l < config.layers; ++l) {
        const std::size_t d_in = (l == 0) ? config.input_dim : config.output_dim;
        stack.gat_.push_back(GatLayer::create(d_in, config.output_dim, config.heads, rng));
      }
      break;
    case InteractionKind::kEdgeAgg:
      if (config.input_dim != config.output_dim) {
        throw ContractViolation(
            "InteractionStack: edge aggregation preserves width; input_dim must equal "
            "output_dim");
      }
      if (config.relation_count == 0) {
        throw ContractViolation("InteractionStack: edge aggregation needs relations");
      }
      for (std::size_t l = 0; l < config.layers; ++l) {
        stack.edge_.push_back(EdgeAggLayer::create(config.input_dim, config.se_dim,
                                                   config.edge_mlp_hidden, rng));
      }
      stack.se_table_ = SideEffectTable::create(config.relation_count, config.se_dim, rng);
      break;
    case InteractionKind::kGcn:
      for (std::size_t l = 0; l < config.layers; ++l) {
        const std::size_t d_in = (l == 0) ? config.input_dim : config.output_dim;
        stack.gcn_.push_back(InteractionGcnLayer::create(d_in, config.output_dim, rng));
      }
      break;
  }
  return stack;
}

Tensor InteractionStack::forward(const ArcSet& arcs, const Tensor& x) const {
  Tensor h = x;
  switch (config_.kind) {
    case InteractionKind::kGat:
      for (const auto& layer : gat_) h = layer.forward(arcs, h);
      break;
    case InteractionKind::kEdgeAgg:
      for (const auto& layer : edge_) h = layer.forward(arcs, h, se_table_.embeddings);
      break;
    case InteractionKind::kGcn:
      for (const auto& layer : gcn_) h = layer.forward(arcs, h);
      break;
  }
  return h;
}

const SideEffectTable& InteractionStack::side_effects() const {
  if (config_.kind != InteractionKind::kEdgeAgg) {
    throw ContractViolation("InteractionStack: no side-effect table in this configuration");
  }
  return se_table_;
}

SideEffectTable& InteractionStack::side_effects() {
  if (config_.kind != InteractionKind::kEdgeAgg) {
    throw ContractViolation("InteractionStack: no side-effect table in this configuration");
  }
  return se_table_;
}

SelfArcPolicy InteractionStack::arc_policy() const {
  switch (config_.kind) {
    case InteractionKind::kGat:
      return SelfArcPolicy::kIsolatedOnly;
    case InteractionKind::kEdgeAgg:
      return SelfArcPolicy::kNone;
    case InteractionKind::kGcn:
      return SelfArcPolicy::kAll;
  }
  return SelfArcPolicy::kNone;
}

void InteractionStack::collect_parameters(
    const std::string& prefix, std::vector<std::pair<std::string, Tensor>>& out) const {
  for (std::size_t l = 0; l < gat_.size(); ++l) {
    for (std::size_t k = 0; k < gat_[l].heads(); ++k) {
      const std::string base = prefix + ".gat" + std::to_string(l) + ".head" + std::to_string(k);
      out.emplace_back(base + ".weight", gat_[l].head_weight[k]);
      out.emplace_back(base + ".attention", gat_[l].head_attention[k]);
    }
  }
  for (std::size_t l = 0; l < edge_.size(); ++l) {
    const std::string base = prefix + ".edge" + std::to_string(l);
    out.emplace_back(base + ".weight", edge_[l].weight);
    out.emplace_back(base + ".mlp.w1", edge_[l].edge_mlp.w1);
    out.emplace_back(base + ".mlp.b1", edge_[l].edge_mlp.b1);
    out.emplace_back(base + ".mlp.w2", edge_[l].edge_mlp.w2);
    out.emplace_back(base + ".mlp.b2", edge_[l].edge_mlp.b2);
  }
  for (std::size_t l = 0; l < gcn_.size(); ++l) {
    out.emplace_back(prefix + ".gcn" + std::to_string(l) + ".weight", gcn_[l].weight);
  }
  if (config_.kind == InteractionKind::kEdgeAgg) {
    out.emplace_back(prefix + ".se_table", se_table_.embeddings);
  }
}

}  // namespace gognn
