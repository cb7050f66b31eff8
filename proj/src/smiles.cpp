#include "gognn/smiles.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

namespace gognn {

namespace {

std::string locate(std::size_t offset, const std::string& reason) {
  std::ostringstream msg;
  msg << "SMILES parse error at byte " << offset << ": " << reason;
  return msg.str();
}

}  // namespace

ParseError::ParseError(std::size_t offset, const std::string& reason)
    : std::runtime_error(locate(offset, reason)), offset_(offset) {}

std::size_t element_index(std::string_view element) {
  static constexpr std::string_view table[] = {"B", "C",  "N",  "O", "P",
                                               "S", "F", "Cl", "Br", "I"};
  for (std::size_t i = 0; i < std::size(table); ++i) {
    if (element == table[i]) return i;
  }
  return 10;  // "other"
}

namespace {

constexpr double kSingle = 1.0, kAromatic = 1.5, kDouble = 2.0, kTriple = 3.0;

// Standard valences used to infer implicit hydrogen counts for atoms written
// without brackets. Bracket atoms carry explicit hydrogen counts instead.
int default_valence(std::string_view element) {
  if (element == "B" || element == "N" || element == "P") return 3;
  if (element == "C") return 4;
  if (element == "O" || element == "S") return 2;
  return 1;  // halogens
}

struct PendingBond {
  bool present = false;
  double weight = 0.0;
  std::size_t offset = 0;
};

struct RingOpening {
  std::size_t atom;
  PendingBond bond;  // bond symbol written before the ring digit, if any
  std::size_t offset;
};

class Parser {
 public:
  explicit Parser(std::string_view s, std::string id)
      : s_(s), id_(std::move(id)) {}

  MoleculeGraph run() {
    if (s_.empty()) throw ParseError(0, "empty SMILES");
    while (pos_ < s_.size()) step();
    if (pending_.present) {
      throw ParseError(pending_.offset, "bond symbol with no following atom");
    }
    if (!branch_stack_.empty()) {
      throw ParseError(branch_offsets_.back(), "unclosed branch '('");
    }
    if (!open_rings_.empty()) {
      const auto& [digit, opening] = *open_rings_.begin();
      throw ParseError(opening.offset, "unclosed ring closure " +
                                           std::to_string(digit));
    }
    if (graph_.atoms.empty()) throw ParseError(0, "no atoms");
    finalize();
    return std::move(graph_);
  }

 private:
  void step() {
    const char c = s_[pos_];
    if (static_cast<unsigned char>(c) > 0x7f) {
      throw ParseError(pos_, "non-ASCII byte");
    }
    switch (c) {
      case '-': take_bond(kSingle); return;
      case '=': take_bond(kDouble); return;
      case '#': take_bond(kTriple); return;
      case ':': take_bond(kAromatic); return;
      case '(': open_branch(); return;
      case ')': close_branch(); return;
      case '%': ring_two_digit(); return;
      case '[': bracket_atom(); return;
      case '.':
        throw ParseError(pos_, "multi-fragment SMILES ('.') not supported");
      case '/':
      case '\\':
      case '@':
        throw ParseError(pos_, "stereochemistry not supported");
      default:
        break;
    }
    if (c >= '1' && c <= '9') {
      ring_digit(static_cast<std::size_t>(c - '0'), pos_);
      ++pos_;
      return;
    }
    if (c == '0') throw ParseError(pos_, "ring closure 0 is not valid");
    plain_atom();
  }

  void take_bond(double weight) {
    if (pending_.present) {
      throw ParseError(pos_, "two bond symbols in a row");
    }
    if (!has_current_) {
      throw ParseError(pos_, "bond symbol before any atom");
    }
    pending_ = {true, weight, pos_};
    ++pos_;
  }

  void open_branch() {
    if (!has_current_) throw ParseError(pos_, "branch before any atom");
    if (pending_.present) {
      throw ParseError(pending_.offset, "bond symbol before '('");
    }
    branch_stack_.push_back(current_);
    branch_offsets_.push_back(pos_);
    ++pos_;
  }

  void close_branch() {
    if (branch_stack_.empty()) throw ParseError(pos_, "unmatched ')'");
    if (pending_.present) {
      throw ParseError(pending_.offset, "bond symbol with no following atom");
    }
    current_ = branch_stack_.back();
    branch_stack_.pop_back();
    branch_offsets_.pop_back();
    has_current_ = true;
    ++pos_;
  }

  void ring_two_digit() {
    const std::size_t at = pos_;
    if (pos_ + 2 >= s_.size() || !std::isdigit(s_[pos_ + 1]) ||
        !std::isdigit(s_[pos_ + 2])) {
      throw ParseError(at, "'%' must be followed by two digits");
    }
    const std::size_t number =
        static_cast<std::size_t>((s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0'));
    pos_ += 3;
    ring_digit(number, at);
  }

  void ring_digit(std::size_t number, std::size_t at) {
    if (!has_current_) throw ParseError(at, "ring closure before any atom");
    PendingBond bond = pending_;
    pending_ = {};
    auto it = open_rings_.find(number);
    if (it == open_rings_.end()) {
      open_rings_.emplace(number, RingOpening{current_, bond, at});
      return;
    }
    const RingOpening opening = it->second;
    open_rings_.erase(it);
    if (opening.atom == current_) {
      throw ParseError(at, "ring closure bonds an atom to itself");
    }
    double weight;
    if (opening.bond.present && bond.present) {
      if (opening.bond.weight != bond.weight) {
        throw ParseError(at, "conflicting bond symbols on ring closure " +
                                 std::to_string(number));
      }
      weight = bond.weight;
    } else if (opening.bond.present) {
      weight = opening.bond.weight;
    } else if (bond.present) {
      weight = bond.weight;
    } else {
      weight = implicit_weight(opening.atom, current_);
    }
    add_bond(opening.atom, current_, weight, at);
  }

  void plain_atom() {
    const std::size_t at = pos_;
    std::string element;
    bool aromatic = false;
    const char c = s_[pos_];
    if (c == 'C' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'l') {
      element = "Cl";
      pos_ += 2;
    } else if (c == 'B' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'r') {
      element = "Br";
      pos_ += 2;
    } else if (std::string_view("BCNOPSFI").find(c) != std::string_view::npos) {
      element.assign(1, c);
      ++pos_;
    } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
      element.assign(1, static_cast<char>(std::toupper(c)));
      aromatic = true;
      ++pos_;
    } else {
      throw ParseError(at, std::string("unknown element or token '") + c + "'");
    }
    add_atom(std::move(element), aromatic, /*bracket=*/false, 0, 0, at);
  }

  void bracket_atom() {
    const std::size_t at = pos_;
    ++pos_;  // consume '['
    auto peek = [&]() -> char { return pos_ < s_.size() ? s_[pos_] : '\0'; };
    if (std::isdigit(peek())) {
      throw ParseError(pos_, "isotope specifications not supported");
    }
    std::string element;
    bool aromatic = false;
    const char c = peek();
    if (c == 'C' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'l') {
      element = "Cl";
      pos_ += 2;
    } else if (c == 'B' && pos_ + 1 < s_.size() && s_[pos_ + 1] == 'r') {
      element = "Br";
      pos_ += 2;
    } else if (std::string_view("BCNOPSFI").find(c) != std::string_view::npos) {
      element.assign(1, c);
      ++pos_;
    } else if (std::string_view("bcnops").find(c) != std::string_view::npos) {
      element.assign(1, static_cast<char>(std::toupper(c)));
      aromatic = true;
      ++pos_;
    } else if (c == '\0') {
      throw ParseError(at, "unclosed bracket atom");
    } else if (c == '@') {
      throw ParseError(pos_, "stereochemistry not supported");
    } else {
      throw ParseError(pos_, std::string("unknown element '") + c + "'");
    }

    int hydrogens = 0;
    if (peek() == 'H') {
      ++pos_;
      hydrogens = 1;
      if (std::isdigit(peek())) {
        hydrogens = peek() - '0';
        ++pos_;
      }
    }
    int charge = 0;
    if (peek() == '+' || peek() == '-') {
      const int sign = peek() == '+' ? 1 : -1;
      const char mark = peek();
      int magnitude = 0;
      while (peek() == mark) {
        ++magnitude;
        ++pos_;
      }
      if (magnitude == 1 && std::isdigit(peek())) {
        magnitude = peek() - '0';
        ++pos_;
      }
      charge = sign * magnitude;
    }
    if (peek() == '@' || peek() == '/' || peek() == '\\') {
      throw ParseError(pos_, "stereochemistry not supported");
    }
    if (peek() != ']') {
      if (peek() == '\0') throw ParseError(at, "unclosed bracket atom");
      throw ParseError(pos_, std::string("unexpected character '") + peek() +
                                 "' in bracket atom");
    }
    ++pos_;  // consume ']'
    add_atom(std::move(element), aromatic, /*bracket=*/true, hydrogens, charge,
             at);
  }

  double implicit_weight(std::size_t a, std::size_t b) const {
    return graph_.atoms[a].aromatic && graph_.atoms[b].aromatic ? kAromatic
                                                                : kSingle;
  }

  void add_atom(std::string element, bool aromatic, bool bracket,
                int hydrogens, int charge, std::size_t at) {
    AtomNode atom;
    atom.element = std::move(element);
    atom.aromatic = aromatic;
    atom.formal_charge = charge;
    atom.implicit_hydrogens = hydrogens;  // provisional for organic subset
    graph_.atoms.push_back(std::move(atom));
    from_bracket_.push_back(bracket);
    const std::size_t added = graph_.atoms.size() - 1;
    if (has_current_) {
      double weight = pending_.present ? pending_.weight
                                       : implicit_weight(current_, added);
      pending_ = {};
      add_bond(current_, added, weight, at);
    } else if (pending_.present) {
      throw ParseError(pending_.offset, "bond symbol before any atom");
    }
    current_ = added;
    has_current_ = true;
  }

  void add_bond(std::size_t a, std::size_t b, double weight, std::size_t at) {
    for (const Bond& bond : graph_.bonds) {
      if ((bond.i == a && bond.j == b) || (bond.i == b && bond.j == a)) {
        throw ParseError(at, "duplicate bond between atoms " +
                                 std::to_string(a) + " and " +
                                 std::to_string(b));
      }
    }
    graph_.bonds.push_back({a, b, weight});
  }

  // Degree, implicit hydrogens, ring membership, features.
  void finalize() {
    graph_.molecule_id = std::move(id_);
    const std::size_t n = graph_.atoms.size();
    std::vector<double> order_sum(n, 0.0);
    for (const Bond& b : graph_.bonds) {
      graph_.atoms[b.i].degree++;
      graph_.atoms[b.j].degree++;
      order_sum[b.i] += b.weight;
      order_sum[b.j] += b.weight;
    }
    for (std::size_t i = 0; i < n; ++i) {
      if (from_bracket_[i]) continue;  // bracket H counts are explicit
      AtomNode& atom = graph_.atoms[i];
      const int used = static_cast<int>(std::floor(order_sum[i] + 0.5));
      atom.implicit_hydrogens =
          std::max(0, default_valence(atom.element) - used);
    }
    mark_rings();
    encode_atom_features(graph_);
  }

  // An atom is in a ring iff some incident bond is not a bridge.
  void mark_rings() {
    const std::size_t n = graph_.atoms.size();
    std::vector<std::vector<std::pair<std::size_t, std::size_t>>> adj(n);
    for (std::size_t e = 0; e < graph_.bonds.size(); ++e) {
      adj[graph_.bonds[e].i].push_back({graph_.bonds[e].j, e});
      adj[graph_.bonds[e].j].push_back({graph_.bonds[e].i, e});
    }
    std::vector<std::size_t> tin(n, 0), low(n, 0);
    std::vector<char> visited(n, 0);
    std::vector<char> is_bridge(graph_.bonds.size(), 0);
    std::size_t timer = 1;
    // Iterative lowlink computation (molecules can be long chains).
    struct Frame {
      std::size_t v;
      std::size_t parent_edge;
      std::size_t next = 0;
    };
    for (std::size_t root = 0; root < n; ++root) {
      if (visited[root]) continue;
      std::vector<Frame> stack{{root, static_cast<std::size_t>(-1)}};
      visited[root] = 1;
      tin[root] = low[root] = timer++;
      while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < adj[f.v].size()) {
          auto [to, edge] = adj[f.v][f.next++];
          if (edge == f.parent_edge) continue;
          if (visited[to]) {
            low[f.v] = std::min(low[f.v], tin[to]);
          } else {
            visited[to] = 1;
            tin[to] = low[to] = timer++;
            stack.push_back({to, edge});
          }
        } else {
          const Frame done = f;
          stack.pop_back();
          if (!stack.empty()) {
            Frame& up = stack.back();
            low[up.v] = std::min(low[up.v], low[done.v]);
            if (low[done.v] > tin[up.v]) is_bridge[done.parent_edge] = 1;
          }
        }
      }
    }
    for (std::size_t e = 0; e < graph_.bonds.size(); ++e) {
      if (!is_bridge[e]) {
        graph_.atoms[graph_.bonds[e].i].in_ring = true;
        graph_.atoms[graph_.bonds[e].j].in_ring = true;
      }
    }
  }

  std::string_view s_;
  std::string id_;
  std::size_t pos_ = 0;
  MoleculeGraph graph_;
  std::vector<char> from_bracket_;
  bool has_current_ = false;
  std::size_t current_ = 0;
  PendingBond pending_;
  std::vector<std::size_t> branch_stack_;
  std::vector<std::size_t> branch_offsets_;
  std::map<std::size_t, RingOpening> open_rings_;
};

}  // namespace

MoleculeGraph parse_smiles(std::string_view s, std::string molecule_id) {
  return Parser(s, std::move(molecule_id)).run();
}

void encode_atom_features(MoleculeGraph& g) {
  for (AtomNode& atom : g.atoms) {
    atom.feature.fill(0.0);
    atom.feature[element_index(atom.element)] = 1.0;
    const int degree = std::clamp(atom.degree, 0, 5);
    atom.feature[11 + degree] = 1.0;
    const int charge = std::clamp(atom.formal_charge, -2, 2);
    atom.feature[17 + (charge + 2)] = 1.0;
    atom.feature[22] = atom.aromatic ? 1.0 : 0.0;
    const int hydrogens = std::clamp(atom.implicit_hydrogens, 0, 4);
    atom.feature[23 + hydrogens] = 1.0;
    atom.feature[28] = atom.in_ring ? 1.0 : 0.0;
    // 29–31 stay zero
  }
}

std::vector<double> build_adjacency(const MoleculeGraph& g) {
  const std::size_t n = g.atoms.size();
  std::vector<double> a(n * n, 0.0);
  for (const Bond& b : g.bonds) {
    a[b.i * n + b.j] = b.weight;
    a[b.j * n + b.i] = b.weight;
  }
  return a;
}

std::vector<double> MoleculeGraph::adjacency() const {
  return build_adjacency(*this);
}

std::vector<double> MoleculeGraph::feature_matrix() const {
  std::vector<double> m(atoms.size() * kAtomFeatureDim);
  for (std::size_t i = 0; i < atoms.size(); ++i) {
    std::copy(atoms[i].feature.begin(), atoms[i].feature.end(),
              m.begin() + i * kAtomFeatureDim);
  }
  return m;
}

}  // namespace gognn
