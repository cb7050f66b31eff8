#include "gognn/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <utility>

#include "gognn/errors.hpp"
#include "gognn/metrics.hpp"

namespace gognn {

namespace {

constexpr std::size_t kEarlyStopPatience = 20;

// Salts keeping the fixed validation negatives and the per-part evaluation
// negatives on independent seeded streams.
constexpr std::uint64_t kValNegativeSalt = 0xda3e39cb94b95bdbULL;
constexpr std::uint64_t kEvalSalt[3] = {0x8f1bbcdcbfa53e0bULL, 0xd6e8feb86659fd93ULL,
                                        0xaf63bd4c8601b7dfULL};

}  // namespace

std::string to_string(Task task) {
  return task == Task::kCci ? "cci" : "ddi";
}

std::string to_string(Ablation ablation) {
  switch (ablation) {
    case Ablation::kFull: return "full";
    case Ablation::kMolOnly: return "mol_only";
    case Ablation::kInterOnly: return "inter_only";
    case Ablation::kNoPool: return "no_pool";
    case Ablation::kNoAttn: return "no_attn";
  }
  throw ContractViolation("unknown ablation value");
}

Task task_from_string(const std::string& text) {
  if (text == "cci") return Task::kCci;
  if (text == "ddi") return Task::kDdi;
  throw ContractViolation("unknown task '" + text + "' (expected cci or ddi)");
}

Ablation ablation_from_string(const std::string& text) {
  if (text == "full") return Ablation::kFull;
  if (text == "mol_only") return Ablation::kMolOnly;
  if (text == "inter_only") return Ablation::kInterOnly;
  if (text == "no_pool") return Ablation::kNoPool;
  if (text == "no_attn") return Ablation::kNoAttn;
  throw ContractViolation("unknown ablation '" + text +
                          "' (expected full, mol_only, inter_only, no_pool, or no_attn)");
}

std::string to_string(SplitPart part) {
  switch (part) {
    case SplitPart::kTrain: return "train";
    case SplitPart::kValid: return "valid";
    case SplitPart::kTest: return "test";
  }
  throw ContractViolation("unknown split part");
}

SplitPart split_part_from_string(const std::string& text) {
  if (text == "train") return SplitPart::kTrain;
  if (text == "valid") return SplitPart::kValid;
  if (text == "test") return SplitPart::kTest;
  throw ContractViolation("unknown split part '" + text +
                          "' (expected train, valid, or test)");
}

TrainConfig TrainConfig::defaults(Task task) {
  TrainConfig config;
  config.task = task;
  config.learning_rate = task == Task::kCci ? 0.01 : 0.001;
  return config;
}

void TrainConfig::validate() const {
  if (!(pooling_ratio > 0.0) || pooling_ratio > 1.0) {
    throw ContractViolation("config: pooling_ratio must lie in (0, 1]");
  }
  if (!(learning_rate > 0.0)) {
    throw ContractViolation("config: learning_rate must be positive");
  }
  if (hidden_dim == 0 || repr_dim == 0) {
    throw ContractViolation("config: dimensions must be at least 1");
  }
  if (gcn_layers == 0 || gat_heads == 0 || interaction_layers == 0) {
    throw ContractViolation("config: layer and head counts must be at least 1");
  }
  if (epochs == 0 || batch_edges == 0) {
    throw ContractViolation("config: epochs and batch_edges must be at least 1");
  }
}

namespace {

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("config: cannot format real value");
  return std::string(buf, ptr);
}

double parse_double(const std::string& text, const std::string& where) {
  double v = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError(where + ": expected a real number, got '" + text + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& text, const std::string& where) {
  std::uint64_t v = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) {
    throw DataError(where + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

struct ConfigEntry {
  std::string key;
  std::string value;
  std::size_t line;
};

std::vector<ConfigEntry> parse_entries(const std::string& text,
                                       const std::string& source_name) {
  std::vector<ConfigEntry> entries;
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw DataError(source_name + ":" + std::to_string(line_no) +
                      ": expected 'key = value'");
    }
    ConfigEntry entry;
    entry.key = trim(stripped.substr(0, eq));
    entry.value = trim(stripped.substr(eq + 1));
    entry.line = line_no;
    if (entry.key.empty() || entry.value.empty()) {
      throw DataError(source_name + ":" + std::to_string(line_no) +
                      ": empty key or value");
    }
    entries.push_back(std::move(entry));
  }
  return entries;
}

}  // namespace

TrainConfig apply_config_text(const TrainConfig& base, const std::string& text,
                              const std::string& source_name) {
  const std::vector<ConfigEntry> entries = parse_entries(text, source_name);

  TrainConfig config = base;
  bool has_learning_rate = false;
  for (const ConfigEntry& e : entries) {
    if (e.key == "learning_rate") has_learning_rate = true;
  }
  // Resolve the task first: it decides the learning-rate default.
  for (const ConfigEntry& e : entries) {
    if (e.key != "task") continue;
    try {
      config.task = task_from_string(e.value);
    } catch (const ContractViolation& err) {
      throw DataError(source_name + ":" + std::to_string(e.line) + ": " + err.what());
    }
    if (!has_learning_rate) {
      config.learning_rate = TrainConfig::defaults(config.task).learning_rate;
    }
  }

  for (const ConfigEntry& e : entries) {
    const std::string where = source_name + ":" + std::to_string(e.line);
    try {
      if (e.key == "task") {
        continue;  // already applied
      } else if (e.key == "hidden_dim") {
        config.hidden_dim = parse_u64(e.value, where);
      } else if (e.key == "repr_dim") {
        config.repr_dim = parse_u64(e.value, where);
      } else if (e.key == "pooling_ratio") {
        config.pooling_ratio = parse_double(e.value, where);
      } else if (e.key == "learning_rate") {
        config.learning_rate = parse_double(e.value, where);
      } else if (e.key == "epochs") {
        config.epochs = parse_u64(e.value, where);
      } else if (e.key == "batch_edges") {
        config.batch_edges = parse_u64(e.value, where);
      } else if (e.key == "seed") {
        config.seed = parse_u64(e.value, where);
      } else if (e.key == "ablation") {
        config.ablation = ablation_from_string(e.value);
      } else if (e.key == "gcn_layers") {
        config.gcn_layers = parse_u64(e.value, where);
      } else if (e.key == "gat_heads") {
        config.gat_heads = parse_u64(e.value, where);
      } else if (e.key == "interaction_layers") {
        config.interaction_layers = parse_u64(e.value, where);
      } else {
        throw DataError(where + ": unknown config key '" + e.key + "'");
      }
    } catch (const ContractViolation& err) {
      throw DataError(where + ": " + err.what());
    }
  }
  config.validate();
  return config;
}

TrainConfig parse_config_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path + ": cannot open config file");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return apply_config_text(TrainConfig::defaults(Task::kCci), buffer.str(), path);
}

std::string serialize_config(const TrainConfig& config) {
  std::ostringstream out;
  out << "task = " << to_string(config.task) << '\n'
      << "hidden_dim = " << config.hidden_dim << '\n'
      << "repr_dim = " << config.repr_dim << '\n'
      << "pooling_ratio = " << format_double(config.pooling_ratio) << '\n'
      << "learning_rate = " << format_double(config.learning_rate) << '\n'
      << "epochs = " << config.epochs << '\n'
      << "batch_edges = " << config.batch_edges << '\n'
      << "seed = " << config.seed << '\n'
      << "ablation = " << to_string(config.ablation) << '\n'
      << "gcn_layers = " << config.gcn_layers << '\n'
      << "gat_heads = " << config.gat_heads << '\n'
      << "interaction_layers = " << config.interaction_layers << '\n';
  return out.str();
}

Adam::Adam(std::vector<std::pair<std::string, Tensor>> params, double learning_rate)
    : params_(std::move(params)), learning_rate_(learning_rate) {
  if (!(learning_rate_ > 0.0)) {
    throw ContractViolation("adam: learning rate must be positive");
  }
  for (const auto& [name, tensor] : params_) {
    if (!tensor.defined() || !tensor.requires_grad()) {
      throw ContractViolation("adam: parameter '" + name + "' is not trainable");
    }
    first_moment_.emplace_back(tensor.numel(), 0.0);
    second_moment_.emplace_back(tensor.numel(), 0.0);
  }
}

void Adam::step() {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;

  // Validate every gradient before mutating anything, so a bad gradient
  // aborts the whole step.
  for (const auto& [name, tensor] : params_) {
    if (!tensor.has_grad()) continue;  // no contribution: zero gradient
    for (double g : tensor.grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient for parameter '" + name + "'");
      }
    }
  }

  ++timestep_;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(timestep_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(timestep_));
  for (std::size_t p = 0; p < params_.size(); ++p) {
    Tensor& tensor = params_[p].second;
    const bool has = tensor.has_grad();
    const std::vector<double>* grad = has ? &tensor.grad() : nullptr;
    std::vector<double>& values = tensor.mutable_values();
    std::vector<double>& m = first_moment_[p];
    std::vector<double>& v = second_moment_[p];
    for (std::size_t k = 0; k < values.size(); ++k) {
      const double g = has ? (*grad)[k] : 0.0;
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * g;
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * g * g;
      values[k] -= learning_rate_ * (m[k] / bc1) / (std::sqrt(v[k] / bc2) + kEps);
    }
  }
  zero_grad();
}

void Adam::zero_grad() {
  for (auto& [name, tensor] : params_) tensor.zero_grad();
}

GoGNNModel GoGNNModel::create(const TrainConfig& config, std::size_t relation_count,
                              Rng& rng) {
  config.validate();
  if (config.task == Task::kDdi && relation_count == 0) {
    throw ContractViolation("model: typed task needs at least one relation");
  }
  if (config.task == Task::kCci && relation_count != 0) {
    throw ContractViolation("model: untyped task cannot carry relations");
  }

  GoGNNModel model;
  model.config_ = config;
  model.relation_count_ = relation_count;

  const bool want_encoder = config.ablation != Ablation::kInterOnly;
  const bool want_stack = config.ablation != Ablation::kMolOnly;

  if (want_encoder) {
    MoleculeEncoderConfig ec;
    ec.input_dim = kAtomFeatureDim;
    ec.hidden_dim = config.hidden_dim;
    ec.repr_dim = config.repr_dim;
    ec.layers = config.gcn_layers;
    ec.pool_ratio = config.pooling_ratio;
    ec.pooling_enabled = config.ablation != Ablation::kNoPool;
    model.encoder_ = MoleculeEncoder::create(ec, rng);
    model.has_encoder_ = true;
    model.repr_width_ = config.repr_dim;
  } else {
    // Interaction-only wiring: entities enter as raw-feature readouts.
    model.repr_width_ = 2 * kAtomFeatureDim;
  }

  if (want_stack) {
    InteractionStackConfig sc;
    sc.layers = config.interaction_layers;
    sc.input_dim = model.repr_width_;
    sc.output_dim = model.repr_width_;
    sc.heads = config.gat_heads;
    sc.relation_count = relation_count;
    if (config.ablation == Ablation::kNoAttn) {
      sc.kind = InteractionKind::kGcn;
    } else {
      sc.kind = config.task == Task::kCci ? InteractionKind::kGat
                                          : InteractionKind::kEdgeAgg;
    }
    model.stack_ = InteractionStack::create(sc, rng);
    model.has_stack_ = true;
  }

  if (config.task == Task::kDdi) {
    model.relations_ = RelationWeights::create(relation_count, model.repr_width_, rng);
    model.has_relations_ = true;
  }
  return model;
}

SelfArcPolicy GoGNNModel::arc_policy() const {
  if (!has_stack_) {
    throw ContractViolation("model: no interaction stage in this ablation");
  }
  return stack_.arc_policy();
}

std::vector<std::pair<std::string, Tensor>> GoGNNModel::named_parameters() const {
  std::vector<std::pair<std::string, Tensor>> out;
  if (has_encoder_) encoder_.collect_parameters("encoder", out);
  if (has_stack_) stack_.collect_parameters("interaction", out);
  if (has_relations_) relations_.collect_parameters("scorer", out);
  return out;
}

Tensor GoGNNModel::molecule_matrix(const std::vector<MoleculeGraph>& molecules) const {
  if (molecules.empty()) {
    throw ContractViolation("model: no molecules to encode");
  }
  std::vector<Tensor> rows;
  rows.reserve(molecules.size());
  for (const MoleculeGraph& g : molecules) {
    if (has_encoder_) {
      rows.push_back(encoder_.encode(g));
    } else {
      if (g.atoms.empty()) throw ContractViolation("model: empty molecule");
      Tensor features = Tensor::from({g.atom_count(), kAtomFeatureDim},
                                     g.feature_matrix(), /*requires_grad=*/false);
      rows.push_back(readout_mean_sum(features));
    }
  }
  return stack_rows(rows);
}

Tensor GoGNNModel::entity_representations(const Tensor& molecule_matrix,
                                          const ArcSet& arcs) const {
  if (!has_stack_) return molecule_matrix;
  return stack_.forward(arcs, molecule_matrix);
}

Tensor GoGNNModel::score_pairs(const Tensor& reprs, const std::vector<std::size_t>& is,
                               const std::vector<std::size_t>& js) const {
  if (config_.task != Task::kCci) {
    throw ContractViolation("model: pair scoring belongs to the untyped task");
  }
  return pair_scores(reprs, is, js);
}

Tensor GoGNNModel::score_triplets(const Tensor& reprs,
                                  const std::vector<Triplet>& triplets) const {
  if (config_.task != Task::kDdi) {
    throw ContractViolation("model: triplet scoring belongs to the typed task");
  }
  return triplet_scores(reprs, relations_, triplets);
}

Tensor GoGNNModel::logit_pairs(const Tensor& reprs, const std::vector<std::size_t>& is,
                               const std::vector<std::size_t>& js) const {
  if (config_.task != Task::kCci) {
    throw ContractViolation("model: pair scoring belongs to the untyped task");
  }
  return pair_logits(reprs, is, js);
}

Tensor GoGNNModel::logit_triplets(const Tensor& reprs,
                                  const std::vector<Triplet>& triplets) const {
  if (config_.task != Task::kDdi) {
    throw ContractViolation("model: triplet scoring belongs to the typed task");
  }
  return triplet_logits(reprs, relations_, triplets);
}

namespace {

void check_dataset_consistency(const TrainConfig& config, const MoleculeTable& molecules,
                               const InteractionGraph& graph) {
  graph.validate();
  if (graph.node_count != molecules.size()) {
    throw ContractViolation("trainer: molecule table has " +
                            std::to_string(molecules.size()) + " entries but the graph has " +
                            std::to_string(graph.node_count) + " nodes");
  }
  if (config.task == Task::kCci && graph.relation_count != 0) {
    throw ContractViolation("trainer: untyped task on a typed graph");
  }
  if (config.task == Task::kDdi && graph.relation_count == 0) {
    throw ContractViolation("trainer: typed task needs relations in the graph");
  }
}

void check_split_indices(const Split& split, std::size_t edge_count) {
  for (const std::vector<std::size_t>* part : {&split.train, &split.valid, &split.test}) {
    for (std::size_t idx : *part) {
      if (idx >= edge_count) {
        throw ContractViolation("trainer: split index " + std::to_string(idx) +
                                " out of range for " + std::to_string(edge_count) +
                                " edges");
      }
    }
  }
}

InteractionGraph subgraph_of(const InteractionGraph& graph,
                             const std::vector<std::size_t>& edge_indices) {
  InteractionGraph sub;
  sub.node_count = graph.node_count;
  sub.relation_count = graph.relation_count;
  sub.edges.reserve(edge_indices.size());
  for (std::size_t idx : edge_indices) sub.edges.push_back(graph.edges[idx]);
  return sub;
}

/// Supervision targets of a split part: aligned positive pairs/triplets plus
/// seeded corrupted negatives (one per positive).
struct ScoringSet {
  std::vector<std::size_t> pos_i, pos_j;
  std::vector<Triplet> pos_triplets;
  std::vector<std::size_t> neg_i, neg_j;
  std::vector<Triplet> neg_triplets;
};

ScoringSet build_scoring_set(Task task, const InteractionGraph& graph,
                             const std::vector<std::size_t>& edge_indices,
                             const NegativeSampler& sampler, Rng& rng) {
  ScoringSet set;
  for (std::size_t idx : edge_indices) {
    const InteractionEdge& e = graph.edges[idx];
    const bool corrupt_j = rng.below(2) == 0;
    const std::size_t anchor = corrupt_j ? e.i : e.j;
    const std::size_t corrupted = sampler.sample(anchor, e.relation, rng);
    if (task == Task::kCci) {
      set.pos_i.push_back(e.i);
      set.pos_j.push_back(e.j);
      set.neg_i.push_back(anchor);
      set.neg_j.push_back(corrupted);
    } else {
      set.pos_triplets.push_back({e.i, e.j, e.relation});
      set.neg_triplets.push_back({anchor, corrupted, e.relation});
    }
  }
  return set;
}

/// Scores a set against fixed representations and returns labeled results.
/// Ranks by pre-sigmoid scores: the ordering matches probabilities exactly
/// (sigmoid is monotone) but keeps resolution where probabilities saturate.
RankedPredictions score_set(const GoGNNModel& model, const Tensor& reprs,
                            const ScoringSet& set) {
  RankedPredictions rp;
  const bool untyped = model.config().task == Task::kCci;
  const Tensor pos = untyped ? model.logit_pairs(reprs, set.pos_i, set.pos_j)
                             : model.logit_triplets(reprs, set.pos_triplets);
  const Tensor neg = untyped ? model.logit_pairs(reprs, set.neg_i, set.neg_j)
                             : model.logit_triplets(reprs, set.neg_triplets);
  for (double s : pos.values()) {
    rp.scores.push_back(s);
    rp.labels.push_back(1);
  }
  for (double s : neg.values()) {
    rp.scores.push_back(s);
    rp.labels.push_back(0);
  }
  return rp;
}

}  // namespace

TrainResult train_model(const TrainConfig& config, const MoleculeTable& molecules,
                        const InteractionGraph& graph, const Split& split,
                        const std::function<void(const EpochRecord&)>& on_epoch) {
  config.validate();
  check_dataset_consistency(config, molecules, graph);
  check_split_indices(split, graph.edges.size());
  if (split.train.empty()) {
    throw ContractViolation("trainer: training part is empty");
  }
  if (split.valid.empty()) {
    throw ContractViolation("trainer: validation part is empty (needed for model selection)");
  }

  Rng rng(config.seed);
  TrainResult result;
  result.read_log = EdgeReadLog(graph.edges.size());
  result.model = GoGNNModel::create(config, graph.relation_count, rng);
  GoGNNModel& model = result.model;

  // Message passing sees training edges only; the log audits that.
  ArcSet train_arcs;
  if (model.has_interaction_stage()) {
    train_arcs = build_arcs(graph, split.train, model.arc_policy(), &result.read_log);
  }

  // Training negatives know only the training positives; the fixed validation
  // negatives are filtered against every known positive.
  const InteractionGraph train_graph = subgraph_of(graph, split.train);
  const NegativeSampler train_sampler(train_graph);
  const NegativeSampler full_sampler(graph);
  Rng val_rng(config.seed ^ kValNegativeSalt);
  const ScoringSet val_set =
      build_scoring_set(config.task, graph, split.valid, full_sampler, val_rng);

  Adam optimizer(model.named_parameters(), config.learning_rate);
  std::vector<std::pair<std::string, Tensor>> params = model.named_parameters();

  std::vector<std::vector<double>> best_values;
  double best_val = -std::numeric_limits<double>::infinity();
  std::size_t best_epoch = 0;
  std::size_t epochs_without_improvement = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    // One encode per epoch; every use below (validation and all batches)
    // reads this cache, so this epoch's loss and validation AUC both
    // describe the parameters the epoch started with.
    const Tensor mol_matrix = model.molecule_matrix(molecules.molecules);
    const Tensor reprs = model.entity_representations(mol_matrix, train_arcs);

    const RankedPredictions val_predictions = score_set(model, reprs, val_set);
    const double val_auc = auc(val_predictions);

    // Snapshot before any batch step mutates the parameters, so the kept
    // values are exactly the ones the validation AUC measured.
    if (val_auc > best_val) {
      best_val = val_auc;
      best_epoch = epoch;
      epochs_without_improvement = 0;
      best_values.clear();
      for (const auto& [name, tensor] : params) best_values.push_back(tensor.values());
    } else {
      ++epochs_without_improvement;
    }

    std::vector<std::size_t> order = split.train;
    rng.shuffle(order);

    double epoch_loss = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_edges) {
      const std::size_t end = std::min(begin + config.batch_edges, order.size());
      const std::vector<std::size_t> batch(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
      const ScoringSet batch_set =
          build_scoring_set(config.task, graph, batch, train_sampler, rng);
      const bool untyped = config.task == Task::kCci;
      const Tensor pos = untyped
                             ? model.logit_pairs(reprs, batch_set.pos_i, batch_set.pos_j)
                             : model.logit_triplets(reprs, batch_set.pos_triplets);
      const Tensor neg = untyped
                             ? model.logit_pairs(reprs, batch_set.neg_i, batch_set.neg_j)
                             : model.logit_triplets(reprs, batch_set.neg_triplets);
      // Same objective as the probability-space loss, evaluated from
      // pre-sigmoid scores so the gradient survives saturation.
      const Tensor loss = nce_loss_logits(pos, neg);
      const double loss_value = loss.scalar();
      if (!std::isfinite(loss_value)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                           ", batch " + std::to_string(batch_index) + ": non-finite loss");
      }
      epoch_loss += loss_value;
      loss.backward();
      optimizer.step();
      ++batch_index;
    }

    EpochRecord record{epoch, epoch_loss, val_auc};
    result.history.push_back(record);
    if (on_epoch) on_epoch(record);
    result.epochs_run = epoch;

    if (epochs_without_improvement >= kEarlyStopPatience) break;
  }

  // Restore the best-validation snapshot.
  for (std::size_t p = 0; p < params.size(); ++p) {
    params[p].second.mutable_values() = best_values[p];
  }
  result.best_epoch = best_epoch;
  result.best_val_auc = best_val;
  return result;
}

EvalResult evaluate_model(const GoGNNModel& model, const MoleculeTable& molecules,
                          const InteractionGraph& graph, const Split& split,
                          SplitPart part, std::uint64_t seed, EdgeReadLog* read_log) {
  check_dataset_consistency(model.config(), molecules, graph);
  check_split_indices(split, graph.edges.size());
  const std::vector<std::size_t>& indices = part == SplitPart::kTrain ? split.train
                                            : part == SplitPart::kValid ? split.valid
                                                                        : split.test;
  if (indices.empty()) {
    throw ContractViolation("evaluate: " + to_string(part) + " part is empty");
  }

  ArcSet arcs;
  if (model.has_interaction_stage()) {
    arcs = build_arcs(graph, split.train, model.arc_policy(), read_log);
  }
  const Tensor mol_matrix = model.molecule_matrix(molecules.molecules);
  const Tensor reprs = model.entity_representations(mol_matrix, arcs);

  const NegativeSampler full_sampler(graph);
  Rng rng(seed ^ kEvalSalt[static_cast<std::size_t>(part)]);
  const ScoringSet set =
      build_scoring_set(model.config().task, graph, indices, full_sampler, rng);
  const RankedPredictions predictions = score_set(model, reprs, set);

  EvalResult result;
  result.auc_value = auc(predictions);
  result.ap_value = ap(predictions);
  result.positives = indices.size();
  result.negatives = indices.size();
  return result;
}

std::vector<Prediction> predict_model(const GoGNNModel& model,
                                      const MoleculeTable& molecules,
                                      const InteractionGraph& graph,
                                      const std::vector<std::string>& relation_names,
                                      const std::vector<PredictQuery>& queries) {
  check_dataset_consistency(model.config(), molecules, graph);

  // Resolve every query first, collecting fresh molecules for unknown ids so
  // they can be encoded as isolated nodes of an extended graph.
  struct ResolvedQuery {
    bool ok = false;
    std::size_t i = 0, j = 0, relation = 0;
    std::string error;
  };
  std::vector<MoleculeGraph> extended = molecules.molecules;
  std::unordered_map<std::string, std::size_t> extra_index;

  auto resolve_node = [&](const std::string& id) -> std::size_t {
    const auto known = molecules.index_of.find(id);
    if (known != molecules.index_of.end()) return known->second;
    const auto extra = extra_index.find(id);
    if (extra != extra_index.end()) return extra->second;
    // Unknown id: treat the string itself as SMILES. ParseError propagates to
    // the per-row handler.
    MoleculeGraph fresh = parse_smiles(id, id);
    const std::size_t dense = extended.size();
    extended.push_back(std::move(fresh));
    extra_index.emplace(id, dense);
    return dense;
  };

  std::vector<ResolvedQuery> resolved;
  resolved.reserve(queries.size());
  for (const PredictQuery& q : queries) {
    ResolvedQuery r;
    try {
      if (model.config().task == Task::kCci) {
        if (!q.relation.empty()) {
          throw DataError("relation given for the untyped task");
        }
      } else {
        const auto it = std::find(relation_names.begin(), relation_names.end(), q.relation);
        if (it != relation_names.end()) {
          r.relation = static_cast<std::size_t>(it - relation_names.begin());
        } else {
          std::uint64_t index = 0;
          const char* begin = q.relation.data();
          const char* end = begin + q.relation.size();
          const auto [ptr, ec] = std::from_chars(begin, end, index);
          if (q.relation.empty() || ec != std::errc() || ptr != end ||
              index >= model.relation_count()) {
            throw DataError("unknown relation '" + q.relation + "'");
          }
          r.relation = index;
        }
      }
      r.i = resolve_node(q.a);
      r.j = resolve_node(q.b);
      r.ok = true;
    } catch (const ParseError& e) {
      r.error = std::string("unsupported SMILES: ") + e.what();
    } catch (const DataError& e) {
      r.error = e.what();
    }
    resolved.push_back(std::move(r));
  }

  // Deployment-mode message passing: every known edge participates; the
  // fresh query molecules are isolated nodes.
  InteractionGraph ext;
  ext.node_count = extended.size();
  ext.relation_count = graph.relation_count;
  ext.edges = graph.edges;

  ArcSet arcs;
  if (model.has_interaction_stage()) {
    arcs = build_arcs_all(ext, model.arc_policy());
  }
  MoleculeTable ext_table;
  ext_table.molecules = std::move(extended);
  const Tensor mol_matrix = model.molecule_matrix(ext_table.molecules);
  const Tensor reprs = model.entity_representations(mol_matrix, arcs);

  std::vector<Prediction> predictions;
  predictions.reserve(queries.size());
  for (const ResolvedQuery& r : resolved) {
    Prediction p;
    if (!r.ok) {
      p.error = r.error;
      predictions.push_back(std::move(p));
      continue;
    }
    const Tensor prob =
        model.config().task == Task::kCci
            ? model.score_pairs(reprs, {r.i}, {r.j})
            : model.score_triplets(reprs, {Triplet{r.i, r.j, r.relation}});
    p.ok = true;
    // The sigmoid rounds to exactly 0.0 or 1.0 in double precision once the
    // pair score passes ±37 or so; the interface promises open-interval
    // probabilities, so pin the output just inside.
    constexpr double kFloor = 1e-12;
    p.probability = std::min(std::max(prob.values()[0], kFloor), 1.0 - kFloor);
    predictions.push_back(std::move(p));
  }
  return predictions;
}

}  // namespace gognn
