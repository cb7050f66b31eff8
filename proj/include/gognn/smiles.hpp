#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace gognn {

/// Rejection of a SMILES string, carrying the byte offset of the problem.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t offset, const std::string& reason);
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

inline constexpr std::size_t kAtomFeatureDim = 32;

/// One heavy atom. Hydrogens are implicit: counted, never materialized as
/// graph nodes.
struct AtomNode {
  std::string element;        // canonical symbol ("C", "Cl", ...)
  int degree = 0;             // heavy-atom neighbor count
  int formal_charge = 0;
  bool aromatic = false;
  int implicit_hydrogens = 0;
  bool in_ring = false;       // lies on at least one cycle
  std::array<double, kAtomFeatureDim> feature{};
};

struct Bond {
  std::size_t i;
  std::size_t j;
  double weight;  // 1.0 single, 1.5 aromatic, 2.0 double, 3.0 triple
};

struct MoleculeGraph {
  std::string molecule_id;
  std::vector<AtomNode> atoms;
  std::vector<Bond> bonds;

  std::size_t atom_count() const { return atoms.size(); }

  /// Row-major n×n symmetric bond-weight matrix with zero diagonal.
  std::vector<double> adjacency() const;

  /// Row-major n×32 matrix of atom feature vectors.
  std::vector<double> feature_matrix() const;
};

/// Index of an element symbol in the one-hot block: B,C,N,O,P,S,F,Cl,Br,I
/// in order, anything else mapping to the trailing "other" slot (10).
std::size_t element_index(std::string_view element);

/// Parses the supported SMILES subset: organic-subset atoms (B,C,N,O,P,S,
/// F,Cl,Br,I), aromatic b,c,n,o,p,s, bracket atoms with hydrogen counts and
/// charges, bonds - = # :, ring closures (digits and %nn), and branches.
/// Stereochemistry, isotopes, wildcards, and multi-fragment dots are
/// rejected with a ParseError locating the offending byte.
MoleculeGraph parse_smiles(std::string_view s, std::string molecule_id = "");

/// Recomputes every atom's 32-entry feature vector from its fields:
/// element one-hot (11) ∥ degree 0–5 one-hot (6) ∥ charge −2..+2 one-hot (5)
/// ∥ aromatic flag (1) ∥ implicit-H 0–4 one-hot (5) ∥ ring flag (1) ∥
/// zero padding (3). Out-of-range degree/charge/H clamp into the nearest
/// bucket. parse_smiles calls this automatically.
void encode_atom_features(MoleculeGraph& g);

/// The adjacency matrix A of the molecule (no self-connections; those are
/// added inside the graph-convolution layer).
std::vector<double> build_adjacency(const MoleculeGraph& g);

}  // namespace gognn
