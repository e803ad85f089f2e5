#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "molcycle/errors.hpp"

namespace molcycle::chem {

struct Atom {
  std::string element;  // capitalized symbol ("C", "Cl", ...)
  bool aromatic = false;
  int charge = 0;
  int h_count = 0;  // explicit + implicit hydrogens
};

struct Bond {
  int a = 0;
  int b = 0;
  int order = 1;  // 1, 2, 3 (aromatic bonds store 1)
  bool aromatic = false;
};

struct MolGraph {
  std::vector<Atom> atoms;
  std::vector<Bond> bonds;

  // neighbor lists as (neighbor atom, bond index)
  std::vector<std::vector<std::pair<int, int>>> adjacency() const;
};

/// SMILES subset parser: organic-subset atoms, bracket atoms (charge and
/// H-count kept, isotope/stereo/class discarded), bonds - = # : / \,
/// aromatic lowercase atoms, branches, ring closures (digits and %nn).
/// Multi-component inputs ('.') are rejected.
MolGraph parse_smiles(const std::string& text);

/// Deterministic canonical form; invariant under atom-order permutation of
/// the input. Internal convention only (not matched to any external toolkit).
std::string canonical_smiles(const MolGraph& g);

/// Smallest set of smallest rings; each ring is a sorted list of bond indices.
std::vector<std::vector<int>> sssr(const MolGraph& g);

struct Fingerprint {
  std::vector<std::uint64_t> words;
  int nbits = 2048;
  int radius = 2;

  bool test(int bit) const {
    return (words[bit >> 6] >> (bit & 63)) & 1ull;
  }
  int popcount() const;
};

/// ECFP-like circular fingerprint over a fixed 64-bit mixing hash.
Fingerprint morgan_fingerprint(const MolGraph& g, int radius = 2, int nbits = 2048);

double tanimoto(const Fingerprint& a, const Fingerprint& b);

/// True iff the molecule matches one of '[!#1]Cl', '[!#1]F', '[!#1]I', 'C#N'.
bool has_halogen_moiety(const MolGraph& g);

/// SSSR rings whose bonds are all aromatic.
int count_aromatic_rings(const MolGraph& g);

}  // namespace molcycle::chem
