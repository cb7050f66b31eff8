#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "gognn/interaction.hpp"
#include "gognn/smiles.hpp"

namespace gognn {

/// Parsed molecule catalogue: `molecules[k]` is the graph for dense id `k`,
/// and `index_of` maps the external id string to that dense id.
struct MoleculeTable {
  std::vector<MoleculeGraph> molecules;
  std::unordered_map<std::string, std::size_t> index_of;
  std::size_t skipped_molecules = 0;  // rows dropped in lenient mode

  std::size_t size() const { return molecules.size(); }
};

/// How to treat rows the parsers cannot handle. Strict loading throws a
/// DataError naming the file and line; lenient loading drops the row and
/// counts it.
enum class LoadMode { kStrict, kLenient };

/// Loads a molecule table: UTF-8 TSV with two columns `id<TAB>smiles`, one
/// molecule per line, `#`-prefixed comment lines skipped. Duplicate ids are
/// always an error.
MoleculeTable load_molecules(const std::string& path, LoadMode mode);

/// A chemical-chemical interaction dataset: untyped undirected links over the
/// dense molecule ids that appear in at least one kept link.
struct CciDataset {
  MoleculeTable molecules;   // only chemicals referenced by kept edges
  InteractionGraph graph;    // relation_count == 0
  unsigned threshold = 0;

  // Bookkeeping for honest reporting. "Matching" counts are taken before any
  // molecule-parse filtering, so they state what the file contains at this
  // threshold; `dropped_edges` explains the gap to `graph.edges.size()`.
  std::size_t edges_matching_threshold = 0;
  std::size_t chemicals_referenced = 0;
  std::size_t dropped_edges = 0;       // lost to missing/unparseable endpoints
  std::size_t skipped_molecules = 0;   // molecule-table rows dropped (lenient)
  std::size_t skipped_link_rows = 0;   // malformed link rows dropped (lenient)
};

/// Loads the links TSV: a header line naming the columns (the first two are
/// chemical ids, the last is `combined_score`, an integer in [0, 999]),
/// followed by one link per row. Rows with score below `threshold` are
/// ignored; the remainder are deduplicated as undirected pairs. Self-links
/// are malformed.
CciDataset load_cci(const std::string& links_path, const std::string& molecules_path,
                    unsigned threshold, LoadMode mode);

/// A drug-drug interaction dataset: typed undirected triples over dense
/// molecule ids, with side-effect ids re-indexed densely in first-appearance
/// order. `relation_names[r]` is the original side-effect id string.
struct DdiDataset {
  MoleculeTable molecules;   // only drugs referenced by kept triples
  InteractionGraph graph;
  std::vector<std::string> relation_names;

  std::size_t triples_in_file = 0;
  std::size_t drugs_referenced = 0;
  std::size_t dropped_triples = 0;
  std::size_t skipped_molecules = 0;
  std::size_t skipped_triple_rows = 0;
};

/// Loads the triples TSV: three columns `drug1<TAB>drug2<TAB>side_effect_id`,
/// no header, `#`-prefixed comment lines skipped. Exact duplicate triples are
/// merged; self-interactions are malformed.
DdiDataset load_ddi(const std::string& triples_path, const std::string& molecules_path,
                    LoadMode mode);

/// Disjoint edge-index partition produced by a seeded shuffle followed by a
/// contiguous cut. Part sizes are the cumulative-rounded targets, so each is
/// within one element of `ratio * count`.
struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

/// Seeded shuffle of [0, count) followed by a contiguous partition into one
/// part per ratio. Ratios must be positive and sum to 1; count must be at
/// least the part count.
std::vector<std::vector<std::size_t>> split_parts(std::size_t count,
                                                  const std::vector<double>& ratios,
                                                  std::uint64_t seed);

/// Three-way convenience wrapper over split_parts.
Split split_edges(std::size_t count, double train_ratio, double valid_ratio,
                  double test_ratio, std::uint64_t seed);

/// Symmetric group-pair interaction rule used by the synthetic generator.
struct SynthRule {
  std::size_t group_count = 0;
  std::vector<char> linked_pairs;  // row-major group_count × group_count

  bool linked(std::size_t a, std::size_t b) const;

  /// Rule: groups a and b interact iff a + b is odd, so every group
  /// participates in some links and some non-links once group_count >= 2.
  /// Links run only between dissimilar molecules, which a dot-product scorer
  /// has to work against; useful as a stress rule.
  static SynthRule alternating(std::size_t group_count);

  /// Default rule: molecules interact iff they carry the same functional
  /// group. Links align with chemical similarity, matching the geometry a
  /// dot-product scorer expresses natively.
  static SynthRule same_group(std::size_t group_count);
};

/// Generates a deterministic synthetic CCI dataset: `n_molecules` random
/// small molecules, each carrying one rule-group motif (and possibly a second
/// distractor motif from outside the rule groups), with a link between two
/// molecules exactly when the rule pairs their groups. Kept links carry
/// combined_score 999.
CciDataset synth_generate_cci(std::size_t n_molecules, const SynthRule& rule,
                              std::uint64_t seed);

/// DDI variant: each linked unordered group pair (a <= b) becomes one
/// relation, and a molecule pair emits one triple per linked group pair.
DdiDataset synth_generate_ddi(std::size_t n_molecules, const SynthRule& rule,
                              std::uint64_t seed);

/// Writes a dataset back out in the exact formats the loaders accept, so
/// synthetic and real data flow through one pipeline.
void write_molecules_tsv(const MoleculeTable& table,
                         const std::vector<std::string>& smiles,
                         const std::string& path);
void write_cci_tsv(const CciDataset& ds, const std::string& links_path);
void write_ddi_tsv(const DdiDataset& ds, const std::string& triples_path);

/// The SMILES strings and planted group sets behind a synthetic dataset,
/// aligned with dense ids. Real loaders do not retain source strings, so the
/// generators return them separately for dumping and for oracle checks.
struct SynthMolecules {
  std::vector<std::string> smiles;
  std::vector<std::vector<std::size_t>> groups;  // sorted, distinct per molecule
};

CciDataset synth_generate_cci(std::size_t n_molecules, const SynthRule& rule,
                              std::uint64_t seed, SynthMolecules* out_smiles);
DdiDataset synth_generate_ddi(std::size_t n_molecules, const SynthRule& rule,
                              std::uint64_t seed, SynthMolecules* out_smiles);

}  // namespace gognn
