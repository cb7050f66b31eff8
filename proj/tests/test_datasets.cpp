#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <string>
#include <vector>

#include "gognn/datasets.hpp"
#include "gognn/errors.hpp"
#include "gognn/metrics.hpp"
#include "gognn/rng.hpp"
#include "gognn/tensor.hpp"

using namespace gognn;
namespace fs = std::filesystem;

namespace {

/// Scratch directory removed when the test block ends.
struct TempDir {
  fs::path path;

  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("gognn_datasets_" + std::to_string(++counter) + "_" +
            std::to_string(static_cast<unsigned long>(::getpid())));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }

  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream out(p, std::ios::binary);
    out << content;
    return p.string();
  }
};

double auc_pair_oracle(const RankedPredictions& rp) {
  double total = 0.0;
  std::size_t pairs = 0;
  for (std::size_t p = 0; p < rp.scores.size(); ++p) {
    if (rp.labels[p] != 1) continue;
    for (std::size_t n = 0; n < rp.scores.size(); ++n) {
      if (rp.labels[n] != 0) continue;
      ++pairs;
      if (rp.scores[p] > rp.scores[n]) {
        total += 1.0;
      } else if (rp.scores[p] == rp.scores[n]) {
        total += 0.5;
      }
    }
  }
  return total / static_cast<double>(pairs);
}

// Independent route: each positive's 1-based rank and the number of positives
// at or above it are counted directly, without sorting.
double ap_rank_oracle(const RankedPredictions& rp) {
  double precision_sum = 0.0;
  std::size_t positives = 0;
  for (std::size_t i = 0; i < rp.scores.size(); ++i) {
    if (rp.labels[i] != 1) continue;
    ++positives;
    std::size_t rank = 1;
    std::size_t hits = 1;
    for (std::size_t j = 0; j < rp.scores.size(); ++j) {
      if (j == i) continue;
      const bool ahead = rp.scores[j] > rp.scores[i] ||
                         (rp.scores[j] == rp.scores[i] && j < i);
      if (ahead) {
        ++rank;
        if (rp.labels[j] == 1) ++hits;
      }
    }
    precision_sum += static_cast<double>(hits) / static_cast<double>(rank);
  }
  return precision_sum / static_cast<double>(positives);
}

RankedPredictions random_predictions(Rng& rng, bool quantize) {
  RankedPredictions rp;
  const std::size_t n = 2 + rng.below(49);
  for (std::size_t k = 0; k < n; ++k) {
    double s = rng.uniform01();
    if (quantize) s = std::round(s * 10.0) / 10.0;
    rp.scores.push_back(s);
    rp.labels.push_back(static_cast<int>(rng.below(2)));
  }
  // Guarantee at least one of each label so both metrics are defined.
  rp.labels.front() = 1;
  rp.labels.back() = 0;
  return rp;
}

std::set<std::pair<std::string, std::string>> edge_id_pairs(const CciDataset& ds) {
  std::set<std::pair<std::string, std::string>> pairs;
  for (const InteractionEdge& e : ds.graph.edges) {
    std::string a = ds.molecules.molecules[e.i].molecule_id;
    std::string b = ds.molecules.molecules[e.j].molecule_id;
    if (b < a) std::swap(a, b);
    pairs.emplace(std::move(a), std::move(b));
  }
  return pairs;
}

std::set<std::tuple<std::string, std::string, std::string>> triple_ids(
    const DdiDataset& ds) {
  std::set<std::tuple<std::string, std::string, std::string>> triples;
  for (const InteractionEdge& e : ds.graph.edges) {
    std::string a = ds.molecules.molecules[e.i].molecule_id;
    std::string b = ds.molecules.molecules[e.j].molecule_id;
    if (b < a) std::swap(a, b);
    triples.emplace(std::move(a), std::move(b), ds.relation_names.at(e.relation));
  }
  return triples;
}

}  // namespace

TEST_CASE("auc hand cases") {
  CHECK(auc({{0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}}) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(auc({{0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(auc({{0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0}}) == doctest::Approx(0.0).epsilon(1e-15));
  CHECK(auc({{0.4, 0.4, 0.4, 0.4}, {1, 0, 1, 0}}) == doctest::Approx(0.5).epsilon(1e-15));
  // One tied positive/negative pair and one correctly ordered pair.
  CHECK(auc({{0.5, 0.5, 0.2}, {1, 0, 0}}) == doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("auc rejects degenerate or malformed input") {
  CHECK_THROWS_AS(auc({{0.1, 0.2}, {1, 1}}), ContractViolation);
  CHECK_THROWS_AS(auc({{0.1, 0.2}, {0, 0}}), ContractViolation);
  CHECK_THROWS_AS(auc({{0.1, 0.2}, {1, 2}}), ContractViolation);
  CHECK_THROWS_AS(auc({{}, {}}), ContractViolation);
  CHECK_THROWS_AS(auc({{0.1, 0.2}, {1}}), DimensionError);
}

TEST_CASE("ap hand cases") {
  CHECK(ap({{0.9, 0.8, 0.7}, {0, 1, 1}}) == doctest::Approx(7.0 / 12.0).epsilon(1e-15));
  CHECK(ap({{0.9, 0.8, 0.7}, {0, 1, 1}}) == doctest::Approx(0.58333).epsilon(1e-4));
  CHECK(ap({{0.9, 0.1, 0.2}, {1, 0, 0}}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(ap({{0.3, 0.2, 0.1}, {1, 1, 1}}) == doctest::Approx(1.0).epsilon(1e-15));
  // Ties broken toward the lower input index.
  CHECK(ap({{0.5, 0.5}, {0, 1}}) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(ap({{0.5, 0.5}, {1, 0}}) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("ap rejects input without positives") {
  CHECK_THROWS_AS(ap({{0.1, 0.2}, {0, 0}}), ContractViolation);
  CHECK_THROWS_AS(ap({{0.1}, {3}}), ContractViolation);
  CHECK_THROWS_AS(ap({{}, {}}), ContractViolation);
}

TEST_CASE("metrics match brute-force oracles on random instances") {
  Rng rng(404);
  for (int trial = 0; trial < 1000; ++trial) {
    const RankedPredictions rp = random_predictions(rng, trial % 2 == 0);
    CHECK(std::abs(auc(rp) - auc_pair_oracle(rp)) <= 1e-12);
    CHECK(std::abs(ap(rp) - ap_rank_oracle(rp)) <= 1e-12);
  }
}

TEST_CASE("metrics are invariant under strictly increasing score transforms") {
  Rng rng(405);
  for (int trial = 0; trial < 50; ++trial) {
    // Quantized scores keep ties exact under the nonlinear transform too.
    const RankedPredictions rp = random_predictions(rng, true);
    RankedPredictions doubled = rp;
    RankedPredictions squashed = rp;
    for (std::size_t k = 0; k < rp.scores.size(); ++k) {
      doubled.scores[k] = rp.scores[k] * 2.0;
      squashed.scores[k] = std::tanh(rp.scores[k]);
    }
    CHECK(auc(doubled) == auc(rp));
    CHECK(std::abs(auc(squashed) - auc(rp)) <= 1e-15);
    CHECK(ap(doubled) == ap(rp));
    CHECK(std::abs(ap(squashed) - ap(rp)) <= 1e-15);
  }
}

TEST_CASE("molecule table loader") {
  TempDir dir;
  const std::string good = dir.file("mols.tsv",
                                    "# catalogue\n"
                                    "A\tCCO\n"
                                    "B\tC#N\n"
                                    "\n"
                                    "C\tCC(=O)O\n");
  MoleculeTable table = load_molecules(good, LoadMode::kStrict);
  CHECK(table.size() == 3);
  CHECK(table.skipped_molecules == 0);
  CHECK(table.index_of.at("A") == 0);
  CHECK(table.index_of.at("C") == 2);
  CHECK(table.molecules[0].molecule_id == "A");
  CHECK(table.molecules[0].atom_count() == 3);
  CHECK(table.molecules[1].atom_count() == 2);

  SUBCASE("duplicate ids are always an error") {
    const std::string dup = dir.file("dup.tsv", "A\tCCO\nA\tCC\n");
    CHECK_THROWS_AS(load_molecules(dup, LoadMode::kStrict), DataError);
    CHECK_THROWS_AS(load_molecules(dup, LoadMode::kLenient), DataError);
  }
  SUBCASE("unparseable SMILES: strict throws naming the line, lenient counts") {
    const std::string bad = dir.file("bad.tsv", "A\tCCO\nB\tC@H\nC\tCC\n");
    try {
      load_molecules(bad, LoadMode::kStrict);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    MoleculeTable lenient = load_molecules(bad, LoadMode::kLenient);
    CHECK(lenient.size() == 2);
    CHECK(lenient.skipped_molecules == 1);
    CHECK(lenient.index_of.count("B") == 0);
    CHECK(lenient.index_of.at("C") == 1);
  }
  SUBCASE("wrong column count: strict throws, lenient skips") {
    const std::string ragged = dir.file("ragged.tsv", "A\tCCO\nlonely\nB\tCC\n");
    CHECK_THROWS_AS(load_molecules(ragged, LoadMode::kStrict), DataError);
    MoleculeTable lenient = load_molecules(ragged, LoadMode::kLenient);
    CHECK(lenient.size() == 2);
    CHECK(lenient.skipped_molecules == 1);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_molecules((dir.path / "absent.tsv").string(), LoadMode::kStrict),
                    DataError);
  }
}

TEST_CASE("cci loader applies the score threshold inclusively") {
  TempDir dir;
  const std::string mols = dir.file("mols.tsv", "A\tCCO\nB\tCC\nC\tC#N\n");
  const std::string links = dir.file("links.tsv",
                                     "chemical1\tchemical2\tsimilarity\tcombined_score\n"
                                     "A\tB\t0.1\t899\n"
                                     "A\tC\t0.2\t900\n"
                                     "B\tC\t0.3\t950\n");

  CciDataset at900 = load_cci(links, mols, 900, LoadMode::kStrict);
  CHECK(at900.graph.edges.size() == 2);
  CHECK(at900.edges_matching_threshold == 2);
  CHECK(at900.chemicals_referenced == 3);
  CHECK(at900.graph.node_count == 3);
  CHECK(at900.dropped_edges == 0);
  CHECK(at900.threshold == 900);
  // Dense ids follow first appearance over kept links: A, C, then B.
  CHECK(at900.molecules.molecules[0].molecule_id == "A");
  CHECK(at900.molecules.molecules[1].molecule_id == "C");
  CHECK(at900.molecules.molecules[2].molecule_id == "B");
  CHECK(edge_id_pairs(at900) ==
        std::set<std::pair<std::string, std::string>>{{"A", "C"}, {"B", "C"}});

  CciDataset at0 = load_cci(links, mols, 0, LoadMode::kStrict);
  CHECK(at0.graph.edges.size() == 3);
  CciDataset at950 = load_cci(links, mols, 950, LoadMode::kStrict);
  CHECK(at950.graph.edges.size() == 1);
  CHECK(at950.graph.node_count == 2);
  CciDataset none = load_cci(links, mols, 951, LoadMode::kStrict);
  CHECK(none.graph.edges.empty());
  CHECK(none.graph.node_count == 0);
}

TEST_CASE("cci loader deduplicates undirected links") {
  TempDir dir;
  const std::string mols = dir.file("mols.tsv", "A\tCCO\nB\tCC\n");
  const std::string links = dir.file("links.tsv",
                                     "chemical1\tchemical2\tcombined_score\n"
                                     "A\tB\t950\n"
                                     "B\tA\t960\n"
                                     "A\tB\t970\n");
  CciDataset ds = load_cci(links, mols, 900, LoadMode::kStrict);
  CHECK(ds.graph.edges.size() == 1);
  CHECK(ds.edges_matching_threshold == 1);
  CHECK(ds.chemicals_referenced == 2);
}

TEST_CASE("cci loader drops links whose endpoints are missing or unparsed") {
  TempDir dir;
  const std::string mols = dir.file("mols.tsv",
                                    "A\tCCO\n"
                                    "B\tC@H\n"  // outside the supported subset
                                    "C\tCC\n");
  const std::string links = dir.file("links.tsv",
                                     "chemical1\tchemical2\tcombined_score\n"
                                     "A\tB\t950\n"
                                     "A\tC\t950\n"
                                     "A\tZ\t950\n");
  CciDataset ds = load_cci(links, mols, 900, LoadMode::kLenient);
  CHECK(ds.skipped_molecules == 1);
  CHECK(ds.edges_matching_threshold == 3);
  CHECK(ds.chemicals_referenced == 4);
  CHECK(ds.dropped_edges == 2);
  CHECK(ds.graph.edges.size() == 1);
  CHECK(ds.graph.node_count == 2);
  CHECK(edge_id_pairs(ds) ==
        std::set<std::pair<std::string, std::string>>{{"A", "C"}});

  // Strict mode already fails on the unparseable molecule row.
  CHECK_THROWS_AS(load_cci(links, mols, 900, LoadMode::kStrict), DataError);
}

TEST_CASE("cci loader row and header validation") {
  TempDir dir;
  const std::string mols = dir.file("mols.tsv", "A\tCCO\nB\tCC\n");

  SUBCASE("malformed rows: strict throws with the line number, lenient counts") {
    const std::string links = dir.file("links.tsv",
                                       "chemical1\tchemical2\tcombined_score\n"
                                       "A\tB\t950\n"
                                       "A\tB\n"
                                       "A\tA\t950\n"
                                       "A\tB\t1000\n"
                                       "A\tB\thigh\n");
    try {
      load_cci(links, mols, 0, LoadMode::kStrict);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":3:") != std::string::npos);
    }
    CciDataset ds = load_cci(links, mols, 0, LoadMode::kLenient);
    CHECK(ds.skipped_link_rows == 4);
    CHECK(ds.graph.edges.size() == 1);
  }
  SUBCASE("header must end in combined_score") {
    const std::string no_header = dir.file("nh.tsv", "");
    CHECK_THROWS_AS(load_cci(no_header, mols, 0, LoadMode::kLenient), DataError);
    const std::string wrong = dir.file("wrong.tsv", "chemical1\tchemical2\tscore\nA\tB\t950\n");
    CHECK_THROWS_AS(load_cci(wrong, mols, 0, LoadMode::kLenient), DataError);
    const std::string narrow = dir.file("narrow.tsv", "chemical1\tcombined_score\nA\t950\n");
    CHECK_THROWS_AS(load_cci(narrow, mols, 0, LoadMode::kLenient), DataError);
  }
}

TEST_CASE("cci edge count is monotone non-increasing in threshold") {
  TempDir dir;
  std::string mol_rows;
  for (int k = 0; k < 12; ++k) {
    mol_rows += "M" + std::to_string(k) + "\t" + std::string(1 + k % 4, 'C') + "\n";
  }
  const std::string mols = dir.file("mols.tsv", mol_rows);

  Rng rng(99);
  std::string link_rows = "chemical1\tchemical2\tcombined_score\n";
  for (int row = 0; row < 60; ++row) {
    const std::size_t a = rng.below(12);
    std::size_t b = rng.below(11);
    if (b >= a) ++b;
    link_rows += "M" + std::to_string(a) + "\tM" + std::to_string(b) + "\t" +
                 std::to_string(rng.below(1000)) + "\n";
  }
  const std::string links = dir.file("links.tsv", link_rows);

  std::size_t previous = SIZE_MAX;
  std::set<std::pair<std::string, std::string>> previous_pairs;
  bool first = true;
  for (unsigned t : {0u, 200u, 400u, 600u, 800u, 999u}) {
    CciDataset ds = load_cci(links, mols, t, LoadMode::kStrict);
    const auto pairs = edge_id_pairs(ds);
    if (!first) {
      CHECK(ds.graph.edges.size() <= previous);
      CHECK(std::includes(previous_pairs.begin(), previous_pairs.end(), pairs.begin(),
                          pairs.end()));
    }
    previous = ds.graph.edges.size();
    previous_pairs = pairs;
    first = false;
  }
}

TEST_CASE("ddi loader re-indexes relations densely") {
  TempDir dir;
  const std::string mols = dir.file("mols.tsv", "X\tCCO\nY\tCC\nZ\tC#N\n");
  const std::string triples = dir.file("triples.tsv",
                                       "# drug pairs\n"
                                       "X\tY\tSE-77\n"
                                       "Y\tZ\tSE-3\n"
                                       "X\tY\tSE-3\n"
                                       "Y\tX\tSE-77\n");
  DdiDataset ds = load_ddi(triples, mols, LoadMode::kStrict);
  CHECK(ds.graph.edges.size() == 3);
  CHECK(ds.triples_in_file == 3);
  CHECK(ds.drugs_referenced == 3);
  CHECK(ds.graph.node_count == 3);
  CHECK(ds.graph.relation_count == 2);
  CHECK(ds.relation_names == std::vector<std::string>{"SE-77", "SE-3"});
  CHECK(triple_ids(ds) == std::set<std::tuple<std::string, std::string, std::string>>{
                              {"X", "Y", "SE-77"}, {"X", "Y", "SE-3"}, {"Y", "Z", "SE-3"}});
}

TEST_CASE("ddi loader accepts an empty file as an empty dataset") {
  TempDir dir;
  const std::string mols = dir.file("mols.tsv", "X\tCCO\n");
  const std::string triples = dir.file("triples.tsv", "# nothing yet\n");
  DdiDataset ds = load_ddi(triples, mols, LoadMode::kStrict);
  CHECK(ds.graph.node_count == 0);
  CHECK(ds.graph.edges.empty());
  CHECK(ds.relation_names.empty());
}

TEST_CASE("ddi loader row validation and endpoint drops") {
  TempDir dir;
  const std::string mols = dir.file("mols.tsv", "X\tCCO\nY\tCC\n");

  SUBCASE("malformed rows") {
    const std::string triples = dir.file("triples.tsv",
                                         "X\tY\tSE-1\n"
                                         "X\tY\n"
                                         "X\tX\tSE-2\n"
                                         "X\tY\t\n");
    try {
      load_ddi(triples, mols, LoadMode::kStrict);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
    DdiDataset ds = load_ddi(triples, mols, LoadMode::kLenient);
    CHECK(ds.skipped_triple_rows == 3);
    CHECK(ds.graph.edges.size() == 1);
  }
  SUBCASE("unknown drugs drop the triple with a count") {
    const std::string triples = dir.file("triples.tsv",
                                         "X\tY\tSE-1\n"
                                         "X\tQ\tSE-2\n");
    DdiDataset ds = load_ddi(triples, mols, LoadMode::kStrict);
    CHECK(ds.graph.edges.size() == 1);
    CHECK(ds.dropped_triples == 1);
    CHECK(ds.drugs_referenced == 3);
    // A relation seen only on dropped triples gets no dense id.
    CHECK(ds.relation_names == std::vector<std::string>{"SE-1"});
  }
}

TEST_CASE("split matches the documented ratio examples") {
  const auto nine_one = split_parts(10, {0.9, 0.1}, 3);
  REQUIRE(nine_one.size() == 2);
  CHECK(nine_one[0].size() == 9);
  CHECK(nine_one[1].size() == 1);

  const auto six_two_two = split_parts(10, {0.6, 0.2, 0.2}, 3);
  CHECK(six_two_two[0].size() == 6);
  CHECK(six_two_two[1].size() == 2);
  CHECK(six_two_two[2].size() == 2);

  Split s = split_edges(10, 0.8, 0.1, 0.1, 3);
  CHECK(s.train.size() == 8);
  CHECK(s.valid.size() == 1);
  CHECK(s.test.size() == 1);
}

TEST_CASE("split parts are disjoint, covering, near-target, and deterministic") {
  const std::size_t count = 101;
  Split a = split_edges(count, 0.8, 0.1, 0.1, 17);
  Split b = split_edges(count, 0.8, 0.1, 0.1, 17);
  CHECK(a.train == b.train);
  CHECK(a.valid == b.valid);
  CHECK(a.test == b.test);

  CHECK(std::abs(static_cast<double>(a.train.size()) - 80.8) < 1.0);
  CHECK(std::abs(static_cast<double>(a.valid.size()) - 10.1) < 1.0);
  CHECK(std::abs(static_cast<double>(a.test.size()) - 10.1) < 1.0);

  std::vector<std::size_t> all;
  all.insert(all.end(), a.train.begin(), a.train.end());
  all.insert(all.end(), a.valid.begin(), a.valid.end());
  all.insert(all.end(), a.test.begin(), a.test.end());
  CHECK(all.size() == count);
  std::sort(all.begin(), all.end());
  for (std::size_t k = 0; k < count; ++k) CHECK(all[k] == k);

  Split c = split_edges(count, 0.8, 0.1, 0.1, 18);
  CHECK(c.train != a.train);
}

TEST_CASE("split contract violations") {
  CHECK_THROWS_AS(split_edges(10, 0.8, 0.0, 0.2, 1), ContractViolation);
  CHECK_THROWS_AS(split_edges(10, 0.8, -0.1, 0.3, 1), ContractViolation);
  CHECK_THROWS_AS(split_edges(10, 0.5, 0.2, 0.2, 1), ContractViolation);
  CHECK_THROWS_AS(split_edges(2, 0.8, 0.1, 0.1, 1), ContractViolation);
  CHECK_THROWS_AS(split_parts(10, {}, 1), ContractViolation);
  CHECK_NOTHROW(split_edges(3, 0.8, 0.1, 0.1, 1));
}

TEST_CASE("synthetic generator is deterministic per seed") {
  const SynthRule rule = SynthRule::alternating(3);
  SynthMolecules first, second;
  CciDataset a = synth_generate_cci(25, rule, 7, &first);
  CciDataset b = synth_generate_cci(25, rule, 7, &second);
  CHECK(first.smiles == second.smiles);
  CHECK(first.groups == second.groups);
  CHECK(a.graph.node_count == b.graph.node_count);
  REQUIRE(a.graph.edges.size() == b.graph.edges.size());
  for (std::size_t k = 0; k < a.graph.edges.size(); ++k) {
    CHECK(a.graph.edges[k].i == b.graph.edges[k].i);
    CHECK(a.graph.edges[k].j == b.graph.edges[k].j);
  }

  SynthMolecules other;
  CciDataset c = synth_generate_cci(25, rule, 8, &other);
  CHECK(first.smiles != other.smiles);
}

TEST_CASE("synthetic links follow the rule table exactly") {
  SUBCASE("alternating rule") {
    const SynthRule rule = SynthRule::alternating(3);
    SynthMolecules synth;
    CciDataset ds = synth_generate_cci(40, rule, 11, &synth);
    REQUIRE(synth.groups.size() == ds.graph.node_count);

    std::set<std::pair<std::size_t, std::size_t>> expected;
    for (std::size_t i = 0; i < synth.groups.size(); ++i) {
      for (std::size_t j = i + 1; j < synth.groups.size(); ++j) {
        bool linked = false;
        for (std::size_t ga : synth.groups[i]) {
          for (std::size_t gb : synth.groups[j]) {
            if ((ga + gb) % 2 == 1) linked = true;
          }
        }
        if (linked) expected.emplace(i, j);
      }
    }
    std::set<std::pair<std::size_t, std::size_t>> actual;
    for (const InteractionEdge& e : ds.graph.edges) actual.emplace(e.i, e.j);
    CHECK(actual == expected);
  }

  SUBCASE("same-group rule links exactly the molecules sharing a group") {
    const SynthRule rule = SynthRule::same_group(3);
    SynthMolecules synth;
    CciDataset ds = synth_generate_cci(40, rule, 11, &synth);
    REQUIRE(synth.groups.size() == ds.graph.node_count);

    // The generator assigns one rule group per molecule.
    for (const auto& groups : synth.groups) CHECK(groups.size() == 1);

    std::set<std::pair<std::size_t, std::size_t>> expected;
    for (std::size_t i = 0; i < synth.groups.size(); ++i) {
      for (std::size_t j = i + 1; j < synth.groups.size(); ++j) {
        if (synth.groups[i] == synth.groups[j]) expected.emplace(i, j);
      }
    }
    std::set<std::pair<std::size_t, std::size_t>> actual;
    for (const InteractionEdge& e : ds.graph.edges) actual.emplace(e.i, e.j);
    CHECK(actual == expected);
  }

  SUBCASE("bipartite rule links only group 0 with group 1") {
    SynthRule rule;
    rule.group_count = 3;
    rule.linked_pairs.assign(9, 0);
    rule.linked_pairs[0 * 3 + 1] = 1;
    rule.linked_pairs[1 * 3 + 0] = 1;
    SynthMolecules synth;
    CciDataset ds = synth_generate_cci(30, rule, 5, &synth);

    auto has = [](const std::vector<std::size_t>& groups, std::size_t g) {
      return std::find(groups.begin(), groups.end(), g) != groups.end();
    };
    for (const InteractionEdge& e : ds.graph.edges) {
      const bool forward = has(synth.groups[e.i], 0) && has(synth.groups[e.j], 1);
      const bool backward = has(synth.groups[e.i], 1) && has(synth.groups[e.j], 0);
      CHECK((forward || backward));
    }
    // Molecules bearing only group 2 never make it into the compacted table.
    for (const auto& groups : synth.groups) {
      CHECK((has(groups, 0) || has(groups, 1)));
    }
  }

  SUBCASE("full pairing yields the complete graph") {
    SynthRule rule;
    rule.group_count = 3;
    rule.linked_pairs.assign(9, 1);
    CciDataset ds = synth_generate_cci(60, rule, 7, nullptr);
    CHECK(ds.graph.node_count == 60);
    CHECK(ds.graph.edges.size() == 60 * 59 / 2);
  }
}

TEST_CASE("synthetic ddi assigns one dense relation per linked group pair") {
  const SynthRule rule = SynthRule::alternating(3);  // links (0,1) and (1,2)
  SynthMolecules synth;
  DdiDataset ds = synth_generate_ddi(40, rule, 13, &synth);
  CHECK(ds.relation_names == std::vector<std::string>{"G0x1", "G1x2"});
  CHECK(ds.graph.relation_count == 2);

  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> expected;
  auto relation_for = [](std::size_t a, std::size_t b) -> std::size_t {
    const std::size_t lo = std::min(a, b), hi = std::max(a, b);
    if (lo == 0 && hi == 1) return 0;
    if (lo == 1 && hi == 2) return 1;
    return SIZE_MAX;
  };
  for (std::size_t i = 0; i < synth.groups.size(); ++i) {
    for (std::size_t j = i + 1; j < synth.groups.size(); ++j) {
      for (std::size_t ga : synth.groups[i]) {
        for (std::size_t gb : synth.groups[j]) {
          const std::size_t r = relation_for(ga, gb);
          if (r != SIZE_MAX) expected.emplace(i, j, r);
        }
      }
    }
  }
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> actual;
  for (const InteractionEdge& e : ds.graph.edges) actual.emplace(e.i, e.j, e.relation);
  CHECK(actual == expected);
}

TEST_CASE("synthetic datasets round-trip through the writers and loaders") {
  TempDir dir;

  SUBCASE("cci") {
    SynthMolecules synth;
    CciDataset generated = synth_generate_cci(30, SynthRule::alternating(3), 9, &synth);
    const std::string mols = (dir.path / "mols.tsv").string();
    const std::string links = (dir.path / "links.tsv").string();
    write_molecules_tsv(generated.molecules, synth.smiles, mols);
    write_cci_tsv(generated, links);

    // Strict loading proves every generated SMILES stays inside the subset.
    CciDataset loaded = load_cci(links, mols, 900, LoadMode::kStrict);
    CHECK(loaded.skipped_molecules == 0);
    CHECK(loaded.skipped_link_rows == 0);
    CHECK(loaded.dropped_edges == 0);
    CHECK(loaded.graph.node_count == generated.graph.node_count);
    CHECK(loaded.graph.edges.size() == generated.graph.edges.size());
    CHECK(edge_id_pairs(loaded) == edge_id_pairs(generated));
  }

  SUBCASE("ddi") {
    SynthMolecules synth;
    DdiDataset generated = synth_generate_ddi(30, SynthRule::alternating(3), 21, &synth);
    const std::string mols = (dir.path / "mols.tsv").string();
    const std::string triples = (dir.path / "triples.tsv").string();
    write_molecules_tsv(generated.molecules, synth.smiles, mols);
    write_ddi_tsv(generated, triples);

    DdiDataset loaded = load_ddi(triples, mols, LoadMode::kStrict);
    CHECK(loaded.skipped_molecules == 0);
    CHECK(loaded.graph.node_count == generated.graph.node_count);
    CHECK(loaded.graph.edges.size() == generated.graph.edges.size());
    CHECK(loaded.graph.relation_count == generated.graph.relation_count);
    CHECK(triple_ids(loaded) == triple_ids(generated));
  }
}

TEST_CASE("synthetic generator contract violations") {
  CHECK_THROWS_AS(synth_generate_cci(10, SynthRule::alternating(1), 1, nullptr),
                  ContractViolation);
  CHECK_THROWS_AS(synth_generate_cci(10, SynthRule::alternating(9), 1, nullptr),
                  ContractViolation);
  CHECK_THROWS_AS(synth_generate_cci(1, SynthRule::alternating(3), 1, nullptr),
                  ContractViolation);

  SynthRule asymmetric;
  asymmetric.group_count = 2;
  asymmetric.linked_pairs = {0, 1, 0, 0};
  CHECK_THROWS_AS(synth_generate_cci(10, asymmetric, 1, nullptr), ContractViolation);

  SynthRule unlinked;
  unlinked.group_count = 2;
  unlinked.linked_pairs = {0, 0, 0, 0};
  CHECK_THROWS_AS(synth_generate_ddi(10, unlinked, 1, nullptr), ContractViolation);

  MoleculeTable table;
  CHECK_THROWS_AS(write_molecules_tsv(table, {"C"}, "/tmp/never.tsv"), DimensionError);
}
