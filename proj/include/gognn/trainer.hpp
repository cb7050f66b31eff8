#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gognn/datasets.hpp"
#include "gognn/interaction.hpp"
#include "gognn/mol_encoder.hpp"
#include "gognn/objectives.hpp"
#include "gognn/rng.hpp"
#include "gognn/smiles.hpp"
#include "gognn/tensor.hpp"

namespace gognn {

enum class Task { kCci, kDdi };
enum class Ablation { kFull, kMolOnly, kInterOnly, kNoPool, kNoAttn };

std::string to_string(Task task);
std::string to_string(Ablation ablation);
Task task_from_string(const std::string& text);
Ablation ablation_from_string(const std::string& text);

/// Model and loop hyperparameters. Learning rate defaults per task: 0.01 for
/// chemical-chemical links, 0.001 for typed drug-drug triples.
struct TrainConfig {
  Task task = Task::kCci;
  std::size_t hidden_dim = 384;
  std::size_t repr_dim = 256;
  double pooling_ratio = 0.5;
  double learning_rate = 0.01;
  std::size_t epochs = 100;
  std::size_t batch_edges = 1024;
  std::uint64_t seed = 1;
  Ablation ablation = Ablation::kFull;
  std::size_t gcn_layers = 3;
  std::size_t gat_heads = 4;
  std::size_t interaction_layers = 2;

  static TrainConfig defaults(Task task);

  /// Throws ContractViolation on out-of-range fields.
  void validate() const;
};

/// Applies `key = value` assignments over `base`. Key-order independent: the
/// task key (if present) is resolved first so task-dependent defaults land
/// before explicit overrides. Unknown keys or unparseable values raise
/// DataError naming the source and line.
TrainConfig apply_config_text(const TrainConfig& base, const std::string& text,
                              const std::string& source_name);

/// Reads a UTF-8 config file of `key = value` lines with `#` comments.
TrainConfig parse_config_file(const std::string& path);

/// Canonical serialization: every key once, fixed order, exact round trip.
std::string serialize_config(const TrainConfig& config);

/// Adaptive-moment optimizer over named parameters (β1 = 0.9, β2 = 0.999,
/// ε = 1e-8, bias-corrected). A non-finite gradient aborts the step with a
/// NumericError naming the parameter.
class Adam {
 public:
  Adam(std::vector<std::pair<std::string, Tensor>> params, double learning_rate);

  /// Applies one update from the parameters' accumulated gradients, then
  /// clears them.
  void step();
  void zero_grad();
  std::size_t timestep() const { return timestep_; }

 private:
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  double learning_rate_;
  std::size_t timestep_ = 0;
};

/// The two-level model: a molecule encoder producing one vector per entity
/// and an interaction stage mixing them over the known interaction graph,
/// with the wiring controlled by the ablation switch.
class GoGNNModel {
 public:
  static GoGNNModel create(const TrainConfig& config, std::size_t relation_count,
                           Rng& rng);

  const TrainConfig& config() const { return config_; }
  std::size_t relation_count() const { return relation_count_; }
  /// Width of the per-entity vectors entering the scoring heads.
  std::size_t representation_dim() const { return repr_width_; }

  bool has_interaction_stage() const { return has_stack_; }
  /// Self-arc policy the interaction stage requires of its ArcSet.
  SelfArcPolicy arc_policy() const;

  /// Ordered (name, tensor) pairs of every trainable parameter.
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  /// One row per molecule: encoder output, or the raw-feature readout when
  /// the encoder is ablated away.
  Tensor molecule_matrix(const std::vector<MoleculeGraph>& molecules) const;

  /// Entity representations consumed by the scorers: the interaction stage's
  /// output, or `molecule_matrix` itself when the stage is ablated away.
  Tensor entity_representations(const Tensor& molecule_matrix, const ArcSet& arcs) const;

  /// Batched link probabilities (untyped task).
  Tensor score_pairs(const Tensor& reprs, const std::vector<std::size_t>& is,
                     const std::vector<std::size_t>& js) const;
  /// Batched triple probabilities (typed task).
  Tensor score_triplets(const Tensor& reprs, const std::vector<Triplet>& triplets) const;

  /// Pre-sigmoid counterparts (score = sigmoid(logit)). The losses and the
  /// ranking metrics consume these: the objective's gradient stays alive at
  /// saturation, and rankings keep full resolution where probabilities would
  /// round to 0 or 1.
  Tensor logit_pairs(const Tensor& reprs, const std::vector<std::size_t>& is,
                     const std::vector<std::size_t>& js) const;
  Tensor logit_triplets(const Tensor& reprs, const std::vector<Triplet>& triplets) const;

 private:
  TrainConfig config_;
  std::size_t relation_count_ = 0;
  std::size_t repr_width_ = 0;
  bool has_encoder_ = false;
  bool has_stack_ = false;
  bool has_relations_ = false;
  MoleculeEncoder encoder_;
  InteractionStack stack_;
  RelationWeights relations_;
};

struct EpochRecord {
  std::size_t epoch = 0;   // 1-based
  double loss = 0.0;       // summed negative-sampling cross entropy
  double val_auc = 0.0;
};

struct TrainResult {
  GoGNNModel model;  // parameters restored to the best-validation snapshot
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 1-based epoch whose parameters were kept
  double best_val_auc = 0.0;
  std::size_t epochs_run = 0;
  /// Message-passing read audit over the full graph's stored edges.
  EdgeReadLog read_log{0};
};

/// Trains on the split's train edges only. Each epoch: molecules are encoded
/// once (representations cached for the epoch), validation AUC is measured
/// from that cache (fixed seeded negatives, filtered against all known
/// positives) and the best parameter snapshot updated, then the shuffled
/// train edges are walked in batches of `batch_edges` positives — each batch
/// resamples one negative per positive (filtered against train positives),
/// evaluates the loss on pre-sigmoid scores, and takes one optimizer step.
/// Training stops early after 20 epochs without validation improvement; the
/// best snapshot is restored at the end. Non-finite loss raises NumericError
/// naming epoch and batch.
TrainResult train_model(const TrainConfig& config, const MoleculeTable& molecules,
                        const InteractionGraph& graph, const Split& split,
                        const std::function<void(const EpochRecord&)>& on_epoch = {});

enum class SplitPart { kTrain, kValid, kTest };

std::string to_string(SplitPart part);
SplitPart split_part_from_string(const std::string& text);

struct EvalResult {
  double auc_value = 0.0;
  double ap_value = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

/// Scores the part's positive edges plus an equal number of sampled negatives
/// (seeded, filtered against every known positive in `graph`), message-passing
/// over the split's train edges only. Empty part → ContractViolation.
EvalResult evaluate_model(const GoGNNModel& model, const MoleculeTable& molecules,
                          const InteractionGraph& graph, const Split& split,
                          SplitPart part, std::uint64_t seed,
                          EdgeReadLog* read_log = nullptr);

struct PredictQuery {
  std::string a;
  std::string b;
  std::string relation;  // empty for the untyped task
};

struct Prediction {
  bool ok = false;
  double probability = 0.0;
  std::string error;
};

/// Scores ad-hoc queries against the model, message-passing over every edge
/// of `graph`. An id absent from the molecule table is treated as a SMILES
/// string and encoded fresh as an isolated node; rows that fail (unparseable
/// SMILES, unknown relation) carry a per-row error while the rest proceed.
std::vector<Prediction> predict_model(const GoGNNModel& model,
                                      const MoleculeTable& molecules,
                                      const InteractionGraph& graph,
                                      const std::vector<std::string>& relation_names,
                                      const std::vector<PredictQuery>& queries);

struct CheckpointMeta {
  std::uint64_t epoch = 0;
  double best_val_auc = 0.0;
  std::uint64_t seed = 0;
};

/// Binary checkpoint: magic "GOGN", format version, relation count, training
/// metadata, canonical config text, named float32 little-endian parameter
/// records, and a trailing integrity digest. Save → load → save is
/// byte-identical.
void save_checkpoint(const GoGNNModel& model, const CheckpointMeta& meta,
                     const std::string& path);

struct LoadedModel {
  GoGNNModel model;
  CheckpointMeta meta;
};

/// Validates magic, version, digest, and the record table (names and shapes
/// must match the embedded config exactly); errors name the failure point.
LoadedModel load_checkpoint(const std::string& path);

/// FNV-1a 64-bit digest used as the checkpoint trailer (exposed so tests can
/// re-seal deliberately tampered files).
std::uint64_t checkpoint_digest(const unsigned char* data, std::size_t size);

}  // namespace gognn
