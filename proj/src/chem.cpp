#include "molcycle/chem.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cctype>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <tuple>

#include "molcycle/rng.hpp"

namespace molcycle::chem {

std::vector<std::vector<std::pair<int, int>>> MolGraph::adjacency() const {
  std::vector<std::vector<std::pair<int, int>>> adj(atoms.size());
  for (std::size_t i = 0; i < bonds.size(); ++i) {
    adj[bonds[i].a].emplace_back(bonds[i].b, static_cast<int>(i));
    adj[bonds[i].b].emplace_back(bonds[i].a, static_cast<int>(i));
  }
  return adj;
}

namespace {

const std::set<std::string> kOrganicSubset = {"B", "C", "N", "O", "P",
                                              "S", "F", "Cl", "Br", "I"};

// Allowed valences for implicit-H assignment on organic-subset atoms.
const std::map<std::string, std::vector<int>> kValences = {
    {"B", {3}},  {"C", {4}},  {"N", {3, 5}}, {"O", {2}},       {"P", {3, 5}},
    {"S", {2, 4, 6}}, {"F", {1}}, {"Cl", {1}}, {"Br", {1}}, {"I", {1}}};

// Aromatic atoms of these elements carry one valence unit in the ring pi
// system (c, n, b, p); aromatic o/s contribute a lone pair instead.
bool aromatic_pi_extra(const std::string& element) {
  return element == "C" || element == "N" || element == "B" || element == "P";
}

struct PendingRing {
  int atom;
  std::optional<int> order;  // explicit bond symbol, if any
  bool aromatic_symbol = false;
  std::size_t offset;
};

struct BondSymbol {
  int order = 1;
  bool aromatic = false;
};

class SmilesParser {
 public:
  explicit SmilesParser(const std::string& text) : s_(text) {}

  MolGraph parse() {
    if (s_.empty()) throw parse_error("empty SMILES", 0);
    while (pos_ < s_.size()) step();
    if (!branch_stack_.empty())
      throw parse_error("unbalanced '(' in SMILES", s_.size());
    if (!ring_open_.empty())
      throw parse_error("unmatched ring closure", ring_open_.begin()->second.offset);
    if (mol_.atoms.empty()) throw parse_error("no atoms in SMILES", 0);
    assign_implicit_h();
    return std::move(mol_);
  }

 private:
  void step() {
    const char c = s_[pos_];
    if (c == '(') {
      if (prev_ < 0) throw parse_error("branch before any atom", pos_);
      branch_stack_.push_back(prev_);
      ++pos_;
    } else if (c == ')') {
      if (branch_stack_.empty()) throw parse_error("unbalanced ')'", pos_);
      prev_ = branch_stack_.back();
      branch_stack_.pop_back();
      ++pos_;
    } else if (c == '-' || c == '=' || c == '#' || c == ':' || c == '/' ||
               c == '\\') {
      if (pending_bond_) throw parse_error("two consecutive bond symbols", pos_);
      pending_bond_ = bond_from_char(c);
      ++pos_;
    } else if (c == '.') {
      throw parse_error("multi-component SMILES not supported", pos_);
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      ring_closure(c - '0', pos_);
      ++pos_;
    } else if (c == '%') {
      if (pos_ + 2 >= s_.size() ||
          !std::isdigit(static_cast<unsigned char>(s_[pos_ + 1])) ||
          !std::isdigit(static_cast<unsigned char>(s_[pos_ + 2])))
        throw parse_error("'%' needs two digits", pos_);
      ring_closure((s_[pos_ + 1] - '0') * 10 + (s_[pos_ + 2] - '0'), pos_);
      pos_ += 3;
    } else if (c == '[') {
      parse_bracket_atom();
    } else {
      parse_organic_atom();
    }
  }

  static BondSymbol bond_from_char(char c) {
    switch (c) {
      case '=': return {2, false};
      case '#': return {3, false};
      case ':': return {1, true};
      default: return {1, false};  // '-', '/' and '\\' (stereo discarded)
    }
  }

  void parse_organic_atom() {
    const std::size_t at = pos_;
    const char c = s_[pos_];
    Atom atom;
    if (std::islower(static_cast<unsigned char>(c))) {
      static const std::set<char> kAromaticOrganic = {'b', 'c', 'n', 'o', 'p', 's'};
      if (!kAromaticOrganic.count(c))
        throw parse_error(std::string("unknown aromatic atom '") + c + "'", at);
      atom.element = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
      atom.aromatic = true;
      ++pos_;
    } else {
      std::string sym(1, c);
      if (pos_ + 1 < s_.size()) {
        std::string two = sym + s_[pos_ + 1];
        if (two == "Cl" || two == "Br") sym = two;
      }
      if (!kOrganicSubset.count(sym))
        throw parse_error("unknown element '" + sym + "' outside brackets", at);
      atom.element = sym;
      pos_ += sym.size();
    }
    add_atom(atom, /*bracket=*/false, at);
  }

  void parse_bracket_atom() {
    const std::size_t at = pos_;
    ++pos_;  // '['
    while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
      ++pos_;  // isotope, discarded
    if (pos_ >= s_.size()) throw parse_error("unterminated bracket atom", at);

    Atom atom;
    char c = s_[pos_];
    if (std::islower(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      if (pos_ + 1 < s_.size() && std::islower(static_cast<unsigned char>(s_[pos_ + 1]))) {
        std::string two = sym + s_[pos_ + 1];
        if (two == "se" || two == "as") sym = two;
      }
      atom.aromatic = true;
      atom.element = sym;
      atom.element[0] =
          static_cast<char>(std::toupper(static_cast<unsigned char>(sym[0])));
      pos_ += sym.size();
    } else if (std::isupper(static_cast<unsigned char>(c))) {
      std::string sym(1, c);
      ++pos_;
      if (pos_ < s_.size() && std::islower(static_cast<unsigned char>(s_[pos_])) &&
          s_[pos_] != 'h') {
        // two-letter symbol; 'h' is reserved for H-count (no element ends in h
        // within brackets in this subset)
        sym += s_[pos_];
        ++pos_;
      }
      atom.element = sym;
    } else {
      throw parse_error("expected element symbol in brackets", pos_);
    }

    while (pos_ < s_.size() && s_[pos_] == '@') ++pos_;  // stereo, discarded

    if (pos_ < s_.size() && s_[pos_] == 'H') {
      ++pos_;
      int h = 1;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        h = 0;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
          h = h * 10 + (s_[pos_++] - '0');
      }
      atom.h_count = h;
    }

    if (pos_ < s_.size() && (s_[pos_] == '+' || s_[pos_] == '-')) {
      const int sign = s_[pos_] == '+' ? 1 : -1;
      const char sym = s_[pos_];
      int count = 1;
      ++pos_;
      if (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_]))) {
        count = 0;
        while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
          count = count * 10 + (s_[pos_++] - '0');
      } else {
        while (pos_ < s_.size() && s_[pos_] == sym) {
          ++count;
          ++pos_;
        }
      }
      atom.charge = sign * count;
    }

    while (pos_ < s_.size() && s_[pos_] == ':') {  // atom class, discarded
      ++pos_;
      while (pos_ < s_.size() && std::isdigit(static_cast<unsigned char>(s_[pos_])))
        ++pos_;
    }

    if (pos_ >= s_.size() || s_[pos_] != ']')
      throw parse_error("unterminated bracket atom", at);
    ++pos_;
    add_atom(atom, /*bracket=*/true, at);
  }

  void add_atom(Atom atom, bool bracket, std::size_t at) {
    const int idx = static_cast<int>(mol_.atoms.size());
    mol_.atoms.push_back(std::move(atom));
    bracket_.push_back(bracket);
    if (prev_ >= 0) make_bond(prev_, idx, pending_bond_, at);
    pending_bond_.reset();
    prev_ = idx;
  }

  void make_bond(int a, int b, std::optional<BondSymbol> sym, std::size_t at) {
    if (a == b) throw parse_error("self-bond", at);
    for (const auto& bond : mol_.bonds)
      if ((bond.a == a && bond.b == b) || (bond.a == b && bond.b == a))
        throw parse_error("duplicate bond", at);
    Bond bond;
    bond.a = a;
    bond.b = b;
    if (sym) {
      bond.order = sym->order;
      bond.aromatic = sym->aromatic;
    } else if (mol_.atoms[a].aromatic && mol_.atoms[b].aromatic) {
      bond.aromatic = true;
    }
    if (bond.aromatic &&
        !(mol_.atoms[a].aromatic && mol_.atoms[b].aromatic))
      throw parse_error("aromatic bond between non-aromatic atoms", at);
    mol_.bonds.push_back(bond);
  }

  void ring_closure(int num, std::size_t at) {
    if (prev_ < 0) throw parse_error("ring closure before any atom", at);
    auto it = ring_open_.find(num);
    if (it == ring_open_.end()) {
      PendingRing pr;
      pr.atom = prev_;
      pr.offset = at;
      if (pending_bond_) {
        pr.order = pending_bond_->order;
        pr.aromatic_symbol = pending_bond_->aromatic;
        pending_bond_.reset();
      }
      ring_open_.emplace(num, pr);
    } else {
      PendingRing pr = it->second;
      ring_open_.erase(it);
      std::optional<BondSymbol> sym;
      if (pending_bond_) {
        sym = *pending_bond_;
        pending_bond_.reset();
      } else if (pr.order) {
        sym = BondSymbol{*pr.order, pr.aromatic_symbol};
      }
      make_bond(pr.atom, prev_, sym, at);
    }
  }

  void assign_implicit_h() {
    std::vector<int> valence(mol_.atoms.size(), 0);
    for (const auto& b : mol_.bonds) {
      valence[b.a] += b.order;
      valence[b.b] += b.order;
    }
    for (std::size_t i = 0; i < mol_.atoms.size(); ++i) {
      Atom& atom = mol_.atoms[i];
      if (bracket_[i]) continue;  // explicit H count is authoritative
      int v = valence[i];
      if (atom.aromatic && aromatic_pi_extra(atom.element)) v += 1;
      const auto& allowed = kValences.at(atom.element);
      int target = -1;
      for (int a : allowed)
        if (a >= v) {
          target = a;
          break;
        }
      if (target < 0) {
        if (atom.aromatic) {
          target = v;  // aromatic heteroatoms (o, s) fully bonded
        } else {
          throw parse_error("valence overflow on atom " + std::to_string(i) +
                                " (" + atom.element + ")",
                            0);
        }
      }
      atom.h_count = target - v;
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  MolGraph mol_;
  std::vector<bool> bracket_;
  int prev_ = -1;
  std::vector<int> branch_stack_;
  std::optional<BondSymbol> pending_bond_;
  std::map<int, PendingRing> ring_open_;
};

}  // namespace

MolGraph parse_smiles(const std::string& text) {
  return SmilesParser(text).parse();
}

// ---------------------------------------------------------------------------
// SSSR

namespace {

using BondSet = std::vector<std::uint64_t>;

BondSet bondset(const std::vector<int>& bond_ids, std::size_t nbonds) {
  BondSet s((nbonds + 63) / 64, 0);
  for (int b : bond_ids) s[b >> 6] |= 1ull << (b & 63);
  return s;
}

bool reduce_against_basis(BondSet v, std::vector<BondSet>& basis) {
  for (const auto& b : basis) {
    int pivot = -1;
    for (int w = static_cast<int>(b.size()) - 1; w >= 0 && pivot < 0; --w)
      if (b[w]) pivot = w * 64 + (63 - std::countl_zero(b[w]));
    if (pivot >= 0 && ((v[pivot >> 6] >> (pivot & 63)) & 1ull))
      for (std::size_t w = 0; w < v.size(); ++w) v[w] ^= b[w];
  }
  for (auto w : v)
    if (w) {
      basis.push_back(v);
      return true;  // independent
    }
  return false;
}

}  // namespace

std::vector<std::vector<int>> sssr(const MolGraph& g) {
  const int n = static_cast<int>(g.atoms.size());
  const int nb = static_cast<int>(g.bonds.size());
  const int nrings = nb - n + 1;  // connected graph
  if (nrings <= 0) return {};
  auto adj = g.adjacency();

  // Candidate rings: for each bond, the shortest cycle through it.
  struct Candidate {
    std::vector<int> atom_seq;  // canonical sorted atom indices
    std::vector<int> bond_ids;  // sorted
  };
  std::vector<Candidate> candidates;
  std::set<std::vector<int>> seen;
  for (int bid = 0; bid < nb; ++bid) {
    const int src = g.bonds[bid].a, dst = g.bonds[bid].b;
    // BFS from src to dst avoiding the bond itself.
    std::vector<int> parent(n, -2), parent_bond(n, -1);
    std::deque<int> q{src};
    parent[src] = -1;
    while (!q.empty()) {
      int u = q.front();
      q.pop_front();
      if (u == dst) break;
      for (auto [v, b] : adj[u]) {
        if (b == bid || parent[v] != -2) continue;
        parent[v] = u;
        parent_bond[v] = b;
        q.push_back(v);
      }
    }
    if (parent[dst] == -2) continue;  // bond is a bridge
    std::vector<int> bond_ids{bid};
    std::vector<int> atoms_in;
    for (int u = dst; u != src; u = parent[u]) {
      atoms_in.push_back(u);
      bond_ids.push_back(parent_bond[u]);
    }
    atoms_in.push_back(src);
    std::sort(bond_ids.begin(), bond_ids.end());
    if (!seen.insert(bond_ids).second) continue;
    std::sort(atoms_in.begin(), atoms_in.end());
    candidates.push_back({std::move(atoms_in), std::move(bond_ids)});
  }

  std::sort(candidates.begin(), candidates.end(), [](const auto& a, const auto& b) {
    if (a.bond_ids.size() != b.bond_ids.size())
      return a.bond_ids.size() < b.bond_ids.size();
    if (a.atom_seq != b.atom_seq) return a.atom_seq < b.atom_seq;
    return a.bond_ids < b.bond_ids;
  });

  std::vector<std::vector<int>> rings;
  std::vector<BondSet> basis;
  for (const auto& c : candidates) {
    if (static_cast<int>(rings.size()) == nrings) break;
    if (reduce_against_basis(bondset(c.bond_ids, nb), basis))
      rings.push_back(c.bond_ids);
  }
  return rings;
}

int count_aromatic_rings(const MolGraph& g) {
  int count = 0;
  for (const auto& ring : sssr(g)) {
    bool all_aromatic = true;
    for (int b : ring)
      if (!g.bonds[b].aromatic) {
        all_aromatic = false;
        break;
      }
    if (all_aromatic) ++count;
  }
  return count;
}

// ---------------------------------------------------------------------------
// Morgan fingerprint

namespace {

std::uint64_t element_hash(const std::string& element) {
  std::uint64_t h = 0x45435046;  // arbitrary fixed basis
  for (char c : element) h = hash_combine(h, static_cast<std::uint64_t>(c));
  return h;
}

std::vector<std::uint64_t> initial_invariants(const MolGraph& g) {
  std::vector<int> degree(g.atoms.size(), 0);
  for (const auto& b : g.bonds) {
    ++degree[b.a];
    ++degree[b.b];
  }
  std::vector<std::uint64_t> inv(g.atoms.size());
  for (std::size_t i = 0; i < g.atoms.size(); ++i) {
    const auto& a = g.atoms[i];
    std::uint64_t h = element_hash(a.element);
    h = hash_combine(h, static_cast<std::uint64_t>(degree[i]));
    h = hash_combine(h, static_cast<std::uint64_t>(a.charge + 16));
    h = hash_combine(h, static_cast<std::uint64_t>(a.h_count));
    h = hash_combine(h, a.aromatic ? 1 : 0);
    inv[i] = h;
  }
  return inv;
}

}  // namespace

int Fingerprint::popcount() const {
  int c = 0;
  for (auto w : words) c += std::popcount(w);
  return c;
}

Fingerprint morgan_fingerprint(const MolGraph& g, int radius, int nbits) {
  if (nbits < 64 || (nbits & (nbits - 1)) != 0)
    throw config_error("fingerprint nbits must be a power of two >= 64");
  if (radius < 0) throw config_error("fingerprint radius must be >= 0");
  Fingerprint fp;
  fp.nbits = nbits;
  fp.radius = radius;
  fp.words.assign(nbits / 64, 0);

  auto adj = g.adjacency();
  std::vector<std::uint64_t> env = initial_invariants(g);
  auto set_bits = [&](const std::vector<std::uint64_t>& hashes) {
    for (auto h : hashes) {
      const int bit = static_cast<int>(h & (static_cast<std::uint64_t>(nbits) - 1));
      fp.words[bit >> 6] |= 1ull << (bit & 63);
    }
  };
  set_bits(env);
  for (int r = 0; r < radius; ++r) {
    std::vector<std::uint64_t> next(env.size());
    for (std::size_t i = 0; i < env.size(); ++i) {
      std::vector<std::pair<std::uint64_t, std::uint64_t>> nbrs;
      for (auto [v, b] : adj[i]) {
        const std::uint64_t code =
            g.bonds[b].aromatic ? 4 : static_cast<std::uint64_t>(g.bonds[b].order);
        nbrs.emplace_back(code, env[v]);
      }
      std::sort(nbrs.begin(), nbrs.end());
      std::uint64_t h = hash_combine(env[i], static_cast<std::uint64_t>(r + 1));
      for (const auto& [code, nh] : nbrs) h = hash_combine(hash_combine(h, code), nh);
      next[i] = h;
    }
    env = std::move(next);
    set_bits(env);
  }
  return fp;
}

double tanimoto(const Fingerprint& a, const Fingerprint& b) {
  if (a.nbits != b.nbits || a.radius != b.radius)
    throw shape_error("tanimoto: fingerprint parameters differ");
  int inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.words.size(); ++i) {
    inter += std::popcount(a.words[i] & b.words[i]);
    uni += std::popcount(a.words[i] | b.words[i]);
  }
  if (uni == 0) return 1.0;  // both empty
  return static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Predicates

bool has_halogen_moiety(const MolGraph& g) {
  std::vector<int> degree(g.atoms.size(), 0);
  for (const auto& b : g.bonds) {
    ++degree[b.a];
    ++degree[b.b];
  }
  for (std::size_t i = 0; i < g.atoms.size(); ++i) {
    const auto& e = g.atoms[i].element;
    // heavy-atom neighbors only, so degree >= 1 realizes [!#1]X
    if ((e == "Cl" || e == "F" || e == "I") && degree[i] >= 1) return true;
  }
  for (const auto& b : g.bonds) {
    if (b.order != 3) continue;
    const auto& ea = g.atoms[b.a].element;
    const auto& eb = g.atoms[b.b].element;
    if ((ea == "C" && eb == "N") || (ea == "N" && eb == "C")) return true;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Canonicalization: Morgan-style rank refinement + automorphism-safe
// tie-breaking by smallest output string.

namespace {

std::vector<int> refine_ranks(const MolGraph& g,
                              const std::vector<int>& promoted) {
  const int n = static_cast<int>(g.atoms.size());
  auto adj = g.adjacency();

  // Initial ranks from index-free atom keys; promoted atoms get a unique
  // prefix so they sort into their own class.
  using Key = std::tuple<int, std::string, int, int, int, int>;
  std::vector<Key> keys(n);
  for (int i = 0; i < n; ++i) {
    int promo = static_cast<int>(promoted.size());
    for (std::size_t p = 0; p < promoted.size(); ++p)
      if (promoted[p] == i) promo = static_cast<int>(p);
    const auto& a = g.atoms[i];
    int deg = static_cast<int>(adj[i].size());
    keys[i] = {promo, a.element, a.aromatic ? 1 : 0, a.charge, a.h_count, deg};
  }
  std::vector<Key> sorted_keys = keys;
  std::sort(sorted_keys.begin(), sorted_keys.end());
  sorted_keys.erase(std::unique(sorted_keys.begin(), sorted_keys.end()),
                    sorted_keys.end());
  std::vector<int> rank(n);
  for (int i = 0; i < n; ++i)
    rank[i] = static_cast<int>(
        std::lower_bound(sorted_keys.begin(), sorted_keys.end(), keys[i]) -
        sorted_keys.begin());

  int classes = static_cast<int>(sorted_keys.size());
  for (int iter = 0; iter < n; ++iter) {
    using RKey = std::pair<int, std::vector<std::pair<int, int>>>;
    std::vector<RKey> rkeys(n);
    for (int i = 0; i < n; ++i) {
      std::vector<std::pair<int, int>> nbr;
      for (auto [v, b] : adj[i]) {
        const int code = g.bonds[b].aromatic ? 4 : g.bonds[b].order;
        nbr.emplace_back(code, rank[v]);
      }
      std::sort(nbr.begin(), nbr.end());
      rkeys[i] = {rank[i], std::move(nbr)};
    }
    std::vector<RKey> uniq = rkeys;
    std::sort(uniq.begin(), uniq.end());
    uniq.erase(std::unique(uniq.begin(), uniq.end()), uniq.end());
    for (int i = 0; i < n; ++i)
      rank[i] = static_cast<int>(
          std::lower_bound(uniq.begin(), uniq.end(), rkeys[i]) - uniq.begin());
    const int new_classes = static_cast<int>(uniq.size());
    if (new_classes == classes) break;
    classes = new_classes;
  }
  return rank;
}

class SmilesWriter {
 public:
  SmilesWriter(const MolGraph& g, const std::vector<int>& rank)
      : g_(g), rank_(rank), adj_(g.adjacency()) {}

  std::string write() {
    const int n = static_cast<int>(g_.atoms.size());
    int start = 0;
    for (int i = 1; i < n; ++i)
      if (rank_[i] < rank_[start]) start = i;
    visited_.assign(n, false);
    tree_bond_.assign(g_.bonds.size(), false);
    classify(start);
    // ring bonds = everything not on the DFS tree
    ring_digit_.assign(g_.bonds.size(), -1);
    visited_.assign(n, false);
    std::string out;
    emit(start, -1, out);
    return out;
  }

 private:
  void classify(int root) {
    // iterative DFS matching emit()'s neighbor order
    std::vector<std::pair<int, int>> stack{{root, -1}};
    visited_[root] = true;
    while (!stack.empty()) {
      auto [u, ignore] = stack.back();
      stack.pop_back();
      auto nbrs = ordered_neighbors(u);
      // push in reverse so lowest-rank neighbor is processed first
      for (auto it = nbrs.rbegin(); it != nbrs.rend(); ++it) {
        auto [v, b] = *it;
        if (!visited_[v]) {
          visited_[v] = true;
          tree_bond_[b] = true;
          stack.emplace_back(v, b);
        }
      }
    }
  }

  std::vector<std::pair<int, int>> ordered_neighbors(int u) const {
    auto nbrs = adj_[u];
    std::sort(nbrs.begin(), nbrs.end(), [&](const auto& x, const auto& y) {
      return rank_[x.first] < rank_[y.first];
    });
    return nbrs;
  }

  void bond_symbol(const Bond& b, std::string& out) const {
    if (b.aromatic) return;
    if (b.order == 2) out += '=';
    else if (b.order == 3) out += '#';
    else if (g_.atoms[b.a].aromatic && g_.atoms[b.b].aromatic) out += '-';
  }

  int inferred_h(int i) const {
    const auto& a = g_.atoms[i];
    if (!kOrganicSubset.count(a.element) || a.charge != 0) return -1;
    int v = 0;
    for (auto [nb, b] : adj_[i]) v += g_.bonds[b].order;
    if (a.aromatic && aromatic_pi_extra(a.element)) v += 1;
    const auto& allowed = kValences.at(a.element);
    for (int t : allowed)
      if (t >= v) return t - v;
    return a.aromatic ? 0 : -1;
  }

  void atom_token(int i, std::string& out) const {
    const auto& a = g_.atoms[i];
    std::string sym = a.element;
    if (a.aromatic) {
      for (auto& c : sym)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    const bool organic = kOrganicSubset.count(a.element) > 0;
    const bool aromatic_ok =
        !a.aromatic || (sym.size() == 1 && std::string("bcnops").find(sym) !=
                                               std::string::npos) ||
        sym == "se" || sym == "as";
    const bool plain =
        organic && aromatic_ok && a.charge == 0 && inferred_h(i) == a.h_count;
    if (plain) {
      out += sym;
      return;
    }
    out += '[';
    out += sym;
    if (a.h_count == 1) out += 'H';
    else if (a.h_count > 1) out += 'H' + std::to_string(a.h_count);
    if (a.charge != 0) {
      out += a.charge > 0 ? '+' : '-';
      if (std::abs(a.charge) > 1) out += std::to_string(std::abs(a.charge));
    }
    out += ']';
  }

  void ring_tokens(int u, std::string& out) {
    // open/close digits for every incident ring bond, partner-rank order
    std::vector<std::pair<int, int>> ring_bonds;
    for (auto [v, b] : ordered_neighbors(u))
      if (!tree_bond_[b]) ring_bonds.emplace_back(v, b);
    for (auto [v, b] : ring_bonds) {
      if (ring_digit_[b] < 0) {
        const int digit = allocate_digit();
        ring_digit_[b] = digit;
        bond_symbol(g_.bonds[b], out);
        append_digit(digit, out);
      } else {
        const int digit = ring_digit_[b];
        append_digit(digit, out);
        free_digit(digit);
      }
    }
  }

  int allocate_digit() {
    for (int d = 1; d < 100; ++d)
      if (!digit_in_use_[d]) {
        digit_in_use_[d] = true;
        return d;
      }
    throw data_error("ring-closure digits exhausted");
  }
  void free_digit(int d) { digit_in_use_[d] = false; }

  static void append_digit(int d, std::string& out) {
    if (d < 10) out += static_cast<char>('0' + d);
    else {
      out += '%';
      out += static_cast<char>('0' + d / 10);
      out += static_cast<char>('0' + d % 10);
    }
  }

  void emit(int u, int in_bond, std::string& out) {
    visited_[u] = true;
    if (in_bond >= 0) bond_symbol(g_.bonds[in_bond], out);
    atom_token(u, out);
    ring_tokens(u, out);
    std::vector<std::pair<int, int>> children;
    for (auto [v, b] : ordered_neighbors(u))
      if (tree_bond_[b] && !visited_[v]) children.emplace_back(v, b);
    for (std::size_t i = 0; i < children.size(); ++i) {
      const bool last = i + 1 == children.size();
      if (!last) out += '(';
      emit(children[i].first, children[i].second, out);
      if (!last) out += ')';
    }
  }

  const MolGraph& g_;
  const std::vector<int>& rank_;
  std::vector<std::vector<std::pair<int, int>>> adj_;
  std::vector<bool> visited_;
  std::vector<bool> tree_bond_;
  std::vector<int> ring_digit_;
  std::array<bool, 100> digit_in_use_{};
};

std::string canonical_impl(const MolGraph& g, std::vector<int> promoted,
                           int depth) {
  if (depth > static_cast<int>(g.atoms.size()))
    throw data_error("canonicalization did not converge");
  std::vector<int> rank = refine_ranks(g, promoted);
  const int n = static_cast<int>(g.atoms.size());
  std::vector<int> count(n, 0);
  for (int r : rank) ++count[r];
  int tied_rank = -1;
  for (int r = 0; r < n; ++r)
    if (count[r] > 1) {
      tied_rank = r;
      break;
    }
  if (tied_rank < 0) return SmilesWriter(g, rank).write();

  // Break the lowest tied class by trying each member; the smallest
  // resulting string is canonical regardless of input atom order.
  std::string best;
  for (int i = 0; i < n; ++i) {
    if (rank[i] != tied_rank) continue;
    auto p = promoted;
    p.push_back(i);
    std::string s = canonical_impl(g, std::move(p), depth + 1);
    if (best.empty() || s < best) best = std::move(s);
  }
  return best;
}

}  // namespace

std::string canonical_smiles(const MolGraph& g) {
  if (g.atoms.empty()) throw data_error("cannot canonicalize empty graph");
  return canonical_impl(g, {}, 0);
}

}  // namespace molcycle::chem
