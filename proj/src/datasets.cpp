#include "gognn/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <unordered_set>
#include <utility>

#include "gognn/errors.hpp"
#include "gognn/rng.hpp"
#include "gognn/tensor.hpp"

namespace gognn {
namespace {

[[noreturn]] void fail_at(const std::string& path, std::size_t line_no,
                          const std::string& reason) {
  throw DataError(path + ":" + std::to_string(line_no) + ": " + reason);
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> cols;
  std::size_t begin = 0;
  while (true) {
    const std::size_t tab = line.find('\t', begin);
    if (tab == std::string::npos) {
      cols.push_back(line.substr(begin));
      break;
    }
    cols.push_back(line.substr(begin, tab - begin));
    begin = tab + 1;
  }
  return cols;
}

/// Streams non-empty, non-comment lines of a TSV file, reporting 1-based
/// line numbers. Strips a trailing '\r' so CRLF files load identically.
class TsvReader {
 public:
  explicit TsvReader(const std::string& path) : path_(path), in_(path) {
    if (!in_) {
      throw DataError(path + ": cannot open file");
    }
  }

  bool next(std::vector<std::string>& cols, std::size_t& line_no) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      cols = split_tabs(line);
      line_no = line_no_;
      return true;
    }
    return false;
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ifstream in_;
  std::size_t line_no_ = 0;
};

bool parse_score(const std::string& text, unsigned& out) {
  unsigned value = 0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) return false;
  if (value > 999) return false;
  out = value;
  return true;
}

/// Membership set for deduplicating string-keyed records.
class KeySet {
 public:
  bool insert(std::string key) { return seen_.insert(std::move(key)).second; }
  std::size_t size() const { return seen_.size(); }

 private:
  std::unordered_set<std::string> seen_;
};

std::string pair_key(const std::string& a, const std::string& b) {
  return a <= b ? a + "\t" + b : b + "\t" + a;
}

}  // namespace

MoleculeTable load_molecules(const std::string& path, LoadMode mode) {
  MoleculeTable table;
  TsvReader reader(path);
  std::vector<std::string> cols;
  std::size_t line_no = 0;
  while (reader.next(cols, line_no)) {
    if (cols.size() != 2 || cols[0].empty() || cols[1].empty()) {
      if (mode == LoadMode::kStrict) {
        fail_at(path, line_no, "expected two tab-separated columns id<TAB>smiles");
      }
      ++table.skipped_molecules;
      continue;
    }
    if (table.index_of.count(cols[0]) != 0) {
      fail_at(path, line_no, "duplicate molecule id '" + cols[0] + "'");
    }
    try {
      MoleculeGraph g = parse_smiles(cols[1], cols[0]);
      table.index_of.emplace(cols[0], table.molecules.size());
      table.molecules.push_back(std::move(g));
    } catch (const ParseError& e) {
      if (mode == LoadMode::kStrict) {
        fail_at(path, line_no,
                "unsupported SMILES '" + cols[1] + "' (byte " +
                    std::to_string(e.offset()) + "): " + e.what());
      }
      ++table.skipped_molecules;
    }
  }
  return table;
}

CciDataset load_cci(const std::string& links_path, const std::string& molecules_path,
                    unsigned threshold, LoadMode mode) {
  CciDataset ds;
  ds.threshold = threshold;
  MoleculeTable full_table = load_molecules(molecules_path, mode);
  ds.skipped_molecules = full_table.skipped_molecules;

  TsvReader reader(links_path);
  std::vector<std::string> cols;
  std::size_t line_no = 0;
  if (!reader.next(cols, line_no)) {
    fail_at(links_path, 1, "missing header line");
  }
  if (cols.size() < 3 || cols.back() != "combined_score") {
    fail_at(links_path, line_no,
            "header must list at least three columns ending in combined_score");
  }
  const std::size_t column_count = cols.size();

  std::vector<std::pair<std::string, std::string>> kept_pairs;
  KeySet pair_seen;
  KeySet chem_seen;
  while (reader.next(cols, line_no)) {
    unsigned score = 0;
    if (cols.size() != column_count || cols[0].empty() || cols[1].empty() ||
        cols[0] == cols[1] || !parse_score(cols.back(), score)) {
      if (mode == LoadMode::kStrict) {
        fail_at(links_path, line_no,
                "malformed link row (need " + std::to_string(column_count) +
                    " columns, distinct ids, integer combined_score in [0, 999])");
      }
      ++ds.skipped_link_rows;
      continue;
    }
    if (score < threshold) continue;
    chem_seen.insert(cols[0]);
    chem_seen.insert(cols[1]);
    if (pair_seen.insert(pair_key(cols[0], cols[1]))) {
      kept_pairs.emplace_back(cols[0], cols[1]);
    }
  }
  ds.edges_matching_threshold = kept_pairs.size();
  ds.chemicals_referenced = chem_seen.size();

  // Compact to the chemicals that survive both the threshold and the parser,
  // assigning dense ids in first-appearance order over kept links.
  for (const auto& [a, b] : kept_pairs) {
    const auto it_a = full_table.index_of.find(a);
    const auto it_b = full_table.index_of.find(b);
    if (it_a == full_table.index_of.end() || it_b == full_table.index_of.end()) {
      ++ds.dropped_edges;
      continue;
    }
    const std::string* ids[2] = {&a, &b};
    std::size_t dense[2];
    for (int s = 0; s < 2; ++s) {
      auto [it, inserted] =
          ds.molecules.index_of.emplace(*ids[s], ds.molecules.molecules.size());
      if (inserted) {
        ds.molecules.molecules.push_back(
            full_table.molecules[full_table.index_of.at(*ids[s])]);
      }
      dense[s] = it->second;
    }
    InteractionEdge e;
    e.i = std::min(dense[0], dense[1]);
    e.j = std::max(dense[0], dense[1]);
    e.relation = 0;
    ds.graph.edges.push_back(e);
  }
  ds.molecules.skipped_molecules = full_table.skipped_molecules;
  ds.graph.node_count = ds.molecules.size();
  ds.graph.relation_count = 0;
  ds.graph.validate();
  return ds;
}

DdiDataset load_ddi(const std::string& triples_path, const std::string& molecules_path,
                    LoadMode mode) {
  DdiDataset ds;
  MoleculeTable full_table = load_molecules(molecules_path, mode);
  ds.skipped_molecules = full_table.skipped_molecules;

  TsvReader reader(triples_path);
  std::vector<std::string> cols;
  std::size_t line_no = 0;
  struct RawTriple {
    std::string a, b, relation;
  };
  std::vector<RawTriple> kept;
  KeySet triple_seen;
  KeySet drug_seen;
  while (reader.next(cols, line_no)) {
    if (cols.size() != 3 || cols[0].empty() || cols[1].empty() || cols[2].empty() ||
        cols[0] == cols[1]) {
      if (mode == LoadMode::kStrict) {
        fail_at(triples_path, line_no,
                "malformed triple row (need drug1<TAB>drug2<TAB>side_effect_id "
                "with distinct drugs)");
      }
      ++ds.skipped_triple_rows;
      continue;
    }
    drug_seen.insert(cols[0]);
    drug_seen.insert(cols[1]);
    if (triple_seen.insert(pair_key(cols[0], cols[1]) + "\t" + cols[2])) {
      kept.push_back({cols[0], cols[1], cols[2]});
    }
  }
  ds.triples_in_file = kept.size();
  ds.drugs_referenced = drug_seen.size();

  std::unordered_map<std::string, std::size_t> relation_index;
  for (const RawTriple& t : kept) {
    const auto it_a = full_table.index_of.find(t.a);
    const auto it_b = full_table.index_of.find(t.b);
    if (it_a == full_table.index_of.end() || it_b == full_table.index_of.end()) {
      ++ds.dropped_triples;
      continue;
    }
    const std::string* ids[2] = {&t.a, &t.b};
    std::size_t dense[2];
    for (int s = 0; s < 2; ++s) {
      auto [it, inserted] =
          ds.molecules.index_of.emplace(*ids[s], ds.molecules.molecules.size());
      if (inserted) {
        ds.molecules.molecules.push_back(
            full_table.molecules[full_table.index_of.at(*ids[s])]);
      }
      dense[s] = it->second;
    }
    auto [rel_it, rel_inserted] =
        relation_index.emplace(t.relation, ds.relation_names.size());
    if (rel_inserted) {
      ds.relation_names.push_back(t.relation);
    }
    InteractionEdge e;
    e.i = std::min(dense[0], dense[1]);
    e.j = std::max(dense[0], dense[1]);
    e.relation = rel_it->second;
    ds.graph.edges.push_back(e);
  }
  ds.molecules.skipped_molecules = full_table.skipped_molecules;
  ds.graph.node_count = ds.molecules.size();
  ds.graph.relation_count = ds.relation_names.size();
  ds.graph.validate();
  return ds;
}

std::vector<std::vector<std::size_t>> split_parts(std::size_t count,
                                                  const std::vector<double>& ratios,
                                                  std::uint64_t seed) {
  if (ratios.empty()) {
    throw ContractViolation("split: need at least one ratio");
  }
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0)) {
      throw ContractViolation("split: every ratio must be positive");
    }
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) {
    throw ContractViolation("split: ratios must sum to 1");
  }
  if (count < ratios.size()) {
    throw ContractViolation("split: fewer edges than split parts");
  }

  std::vector<std::size_t> order(count);
  for (std::size_t k = 0; k < count; ++k) order[k] = k;
  Rng rng(seed);
  rng.shuffle(order);

  // Cumulative rounding keeps every part within one element of its target.
  const double n = static_cast<double>(count);
  std::vector<std::vector<std::size_t>> parts;
  parts.reserve(ratios.size());
  double cumulative = 0.0;
  std::size_t begin = 0;
  for (std::size_t p = 0; p < ratios.size(); ++p) {
    cumulative += ratios[p];
    std::size_t end = p + 1 == ratios.size()
                          ? count
                          : static_cast<std::size_t>(std::llround(n * cumulative));
    end = std::clamp(end, begin, count);
    parts.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(begin),
                       order.begin() + static_cast<std::ptrdiff_t>(end));
    begin = end;
  }
  return parts;
}

Split split_edges(std::size_t count, double train_ratio, double valid_ratio,
                  double test_ratio, std::uint64_t seed) {
  auto parts = split_parts(count, {train_ratio, valid_ratio, test_ratio}, seed);
  Split split;
  split.train = std::move(parts[0]);
  split.valid = std::move(parts[1]);
  split.test = std::move(parts[2]);
  return split;
}

bool SynthRule::linked(std::size_t a, std::size_t b) const {
  if (a >= group_count || b >= group_count) {
    throw ContractViolation("synth rule: group index out of range");
  }
  return linked_pairs[a * group_count + b] != 0;
}

SynthRule SynthRule::alternating(std::size_t group_count) {
  if (group_count == 0) {
    throw ContractViolation("synth rule: need at least one group");
  }
  SynthRule rule;
  rule.group_count = group_count;
  rule.linked_pairs.assign(group_count * group_count, 0);
  for (std::size_t a = 0; a < group_count; ++a) {
    for (std::size_t b = 0; b < group_count; ++b) {
      rule.linked_pairs[a * group_count + b] = ((a + b) % 2 == 1) ? 1 : 0;
    }
  }
  return rule;
}

SynthRule SynthRule::same_group(std::size_t group_count) {
  if (group_count == 0) {
    throw ContractViolation("synth rule: need at least one group");
  }
  SynthRule rule;
  rule.group_count = group_count;
  rule.linked_pairs.assign(group_count * group_count, 0);
  for (std::size_t a = 0; a < group_count; ++a) {
    rule.linked_pairs[a * group_count + a] = 1;
  }
  return rule;
}

namespace {

// Functional-group motifs planted by the generator, written so each can be
// appended as a branch "(<motif>)" of a backbone carbon. Ordered so small
// group counts get maximally distinct chemistry.
const std::vector<std::string>& motif_pool() {
  static const std::vector<std::string> pool = {
      "C(=O)O",  // carboxylic acid
      "C#N",     // nitrile
      "S",       // thiol
      "N",       // amine
      "Cl",      // chloro
      "C=C",     // vinyl
      "O",       // hydroxyl
      "Br",      // bromo
  };
  return pool;
}

struct SynthMolecule {
  std::string smiles;
  std::vector<std::size_t> groups;  // sorted, distinct
};

SynthMolecule make_synth_molecule(std::size_t group_count, Rng& rng) {
  SynthMolecule mol;
  // One rule group decides this molecule's interactions; half the molecules
  // additionally carry a distractor motif from outside the rule groups, so
  // every molecule plants one or two motifs and group members still differ.
  const std::size_t group = rng.below(group_count);
  mol.groups = {group};
  std::vector<std::size_t> motifs = {group};
  const std::size_t spare_motifs = motif_pool().size() - group_count;
  if (spare_motifs > 0 && rng.below(2) == 1) {
    motifs.push_back(group_count + rng.below(spare_motifs));
  }

  // Wide backbone variety (length, motif placement, optional methyl branch)
  // keeps group members from collapsing into near-duplicates: a freshly
  // initialized encoder ranks the groups imperfectly, and training has to
  // sharpen the group signal out of the structural noise.
  const std::size_t backbone = 2 + rng.below(5);  // 2..6 chain carbons
  std::vector<std::vector<std::string>> at_position(backbone);
  for (std::size_t m : motifs) {
    at_position[rng.below(backbone)].push_back(motif_pool()[m]);
  }
  if (rng.below(2) == 1) {
    at_position[rng.below(backbone)].push_back("C");  // methyl side chain
  }
  for (std::size_t p = 0; p < backbone; ++p) {
    mol.smiles += 'C';
    for (const std::string& branch : at_position[p]) {
      mol.smiles += '(';
      mol.smiles += branch;
      mol.smiles += ')';
    }
  }
  return mol;
}

std::vector<SynthMolecule> make_synth_molecules(std::size_t n_molecules,
                                                const SynthRule& rule,
                                                std::uint64_t seed) {
  if (rule.group_count < 2 || rule.group_count > motif_pool().size()) {
    throw ContractViolation("synth: group count must be in [2, " +
                            std::to_string(motif_pool().size()) + "]");
  }
  if (rule.linked_pairs.size() != rule.group_count * rule.group_count) {
    throw ContractViolation("synth: rule table size mismatch");
  }
  for (std::size_t a = 0; a < rule.group_count; ++a) {
    for (std::size_t b = a; b < rule.group_count; ++b) {
      if (rule.linked(a, b) != rule.linked(b, a)) {
        throw ContractViolation("synth: rule table must be symmetric");
      }
    }
  }
  if (n_molecules < 2) {
    throw ContractViolation("synth: need at least two molecules");
  }
  Rng rng(seed);
  std::vector<SynthMolecule> mols;
  mols.reserve(n_molecules);
  for (std::size_t k = 0; k < n_molecules; ++k) {
    mols.push_back(make_synth_molecule(rule.group_count, rng));
  }
  return mols;
}

/// Keeps only molecules referenced by at least one edge, mirroring what the
/// loaders produce, and fills the table/smiles with dense ids "M{k}".
template <typename Dataset>
void compact_synth(const std::vector<SynthMolecule>& mols,
                   const std::vector<InteractionEdge>& raw_edges, Dataset& ds,
                   SynthMolecules* out_smiles) {
  std::vector<std::size_t> dense(mols.size(), SIZE_MAX);
  for (const InteractionEdge& e : raw_edges) {
    for (std::size_t node : {e.i, e.j}) {
      if (dense[node] == SIZE_MAX) {
        dense[node] = ds.molecules.molecules.size();
        const std::string id = "M" + std::to_string(node);
        ds.molecules.index_of.emplace(id, dense[node]);
        ds.molecules.molecules.push_back(parse_smiles(mols[node].smiles, id));
        if (out_smiles != nullptr) {
          out_smiles->smiles.push_back(mols[node].smiles);
          out_smiles->groups.push_back(mols[node].groups);
        }
      }
    }
  }
  ds.graph.node_count = ds.molecules.size();
  ds.graph.edges.reserve(raw_edges.size());
  for (const InteractionEdge& e : raw_edges) {
    InteractionEdge mapped;
    mapped.i = std::min(dense[e.i], dense[e.j]);
    mapped.j = std::max(dense[e.i], dense[e.j]);
    mapped.relation = e.relation;
    ds.graph.edges.push_back(mapped);
  }
}

}  // namespace

CciDataset synth_generate_cci(std::size_t n_molecules, const SynthRule& rule,
                              std::uint64_t seed, SynthMolecules* out_smiles) {
  const std::vector<SynthMolecule> mols = make_synth_molecules(n_molecules, rule, seed);
  std::vector<InteractionEdge> raw;
  for (std::size_t i = 0; i < mols.size(); ++i) {
    for (std::size_t j = i + 1; j < mols.size(); ++j) {
      bool any = false;
      for (std::size_t ga : mols[i].groups) {
        for (std::size_t gb : mols[j].groups) {
          if (rule.linked(ga, gb)) any = true;
        }
      }
      if (any) raw.push_back({i, j, 0});
    }
  }
  CciDataset ds;
  ds.threshold = 0;
  compact_synth(mols, raw, ds, out_smiles);
  ds.edges_matching_threshold = ds.graph.edges.size();
  ds.chemicals_referenced = ds.graph.node_count;
  ds.graph.relation_count = 0;
  ds.graph.validate();
  return ds;
}

DdiDataset synth_generate_ddi(std::size_t n_molecules, const SynthRule& rule,
                              std::uint64_t seed, SynthMolecules* out_smiles) {
  // Every linked unordered group pair (a <= b) is one relation, enumerated
  // lexicographically so relation ids are independent of the molecules drawn.
  std::vector<std::pair<std::size_t, std::size_t>> relation_pairs;
  std::vector<std::vector<std::size_t>> relation_of(
      rule.group_count, std::vector<std::size_t>(rule.group_count, SIZE_MAX));
  const std::vector<SynthMolecule> mols = make_synth_molecules(n_molecules, rule, seed);
  for (std::size_t a = 0; a < rule.group_count; ++a) {
    for (std::size_t b = a; b < rule.group_count; ++b) {
      if (rule.linked(a, b)) {
        relation_of[a][b] = relation_pairs.size();
        relation_of[b][a] = relation_pairs.size();
        relation_pairs.emplace_back(a, b);
      }
    }
  }
  if (relation_pairs.empty()) {
    throw ContractViolation("synth: rule table links no group pairs");
  }

  std::vector<InteractionEdge> raw;
  std::vector<char> relation_hit(relation_pairs.size(), 0);
  for (std::size_t i = 0; i < mols.size(); ++i) {
    for (std::size_t j = i + 1; j < mols.size(); ++j) {
      std::fill(relation_hit.begin(), relation_hit.end(), 0);
      for (std::size_t ga : mols[i].groups) {
        for (std::size_t gb : mols[j].groups) {
          const std::size_t r = relation_of[ga][gb];
          if (r != SIZE_MAX) relation_hit[r] = 1;
        }
      }
      for (std::size_t r = 0; r < relation_hit.size(); ++r) {
        if (relation_hit[r] != 0) raw.push_back({i, j, r});
      }
    }
  }

  DdiDataset ds;
  for (const auto& [a, b] : relation_pairs) {
    ds.relation_names.push_back("G" + std::to_string(a) + "x" + std::to_string(b));
  }
  compact_synth(mols, raw, ds, out_smiles);
  ds.triples_in_file = ds.graph.edges.size();
  ds.drugs_referenced = ds.graph.node_count;
  ds.graph.relation_count = ds.relation_names.size();
  ds.graph.validate();
  return ds;
}

CciDataset synth_generate_cci(std::size_t n_molecules, const SynthRule& rule,
                              std::uint64_t seed) {
  return synth_generate_cci(n_molecules, rule, seed, nullptr);
}

DdiDataset synth_generate_ddi(std::size_t n_molecules, const SynthRule& rule,
                              std::uint64_t seed) {
  return synth_generate_ddi(n_molecules, rule, seed, nullptr);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw DataError(path + ": cannot open file for writing");
  }
  return out;
}

}  // namespace

void write_molecules_tsv(const MoleculeTable& table,
                         const std::vector<std::string>& smiles,
                         const std::string& path) {
  if (smiles.size() != table.size()) {
    throw DimensionError("write_molecules_tsv: SMILES list does not match table");
  }
  std::ofstream out = open_out(path);
  for (std::size_t k = 0; k < table.size(); ++k) {
    out << table.molecules[k].molecule_id << '\t' << smiles[k] << '\n';
  }
  if (!out) {
    throw DataError(path + ": write failed");
  }
}

void write_cci_tsv(const CciDataset& ds, const std::string& links_path) {
  std::ofstream out = open_out(links_path);
  out << "chemical1\tchemical2\tcombined_score\n";
  for (const InteractionEdge& e : ds.graph.edges) {
    out << ds.molecules.molecules[e.i].molecule_id << '\t'
        << ds.molecules.molecules[e.j].molecule_id << "\t999\n";
  }
  if (!out) {
    throw DataError(links_path + ": write failed");
  }
}

void write_ddi_tsv(const DdiDataset& ds, const std::string& triples_path) {
  std::ofstream out = open_out(triples_path);
  for (const InteractionEdge& e : ds.graph.edges) {
    out << ds.molecules.molecules[e.i].molecule_id << '\t'
        << ds.molecules.molecules[e.j].molecule_id << '\t'
        << ds.relation_names.at(e.relation) << '\n';
  }
  if (!out) {
    throw DataError(triples_path + ": write failed");
  }
}

}  // namespace gognn
