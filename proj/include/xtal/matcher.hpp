#pragma once

#include "xtal/structure.hpp"

namespace xtal {

struct MatcherTolerances {
  double ltol = 0.2;       // relative lattice-length tolerance
  double stol = 0.3;       // site tolerance, fraction of mean atomic spacing
  double angle_tol = 5.0;  // degrees

  bool operator==(const MatcherTolerances&) const = default;
};

// Tolerance-based structure equivalence:
//   (a) same chemical system and same reduced composition,
//   (b) sorted lattice lengths within relative ltol and sorted angles within
//       angle_tol,
//   (c) some rigid fractional translation maps the sites of one structure
//       onto same-species sites of the other with every matched pair closer
//       than stol x (V/N)^(1/3) under periodic boundary conditions.
// Simplifications vs the reference tool: no supercell attempts and no
// Niggli/primitive reduction, so structures are compared cell-to-cell (equal
// site counts required). Candidate translations come from anchor pairs of the
// rarest species, which makes the result symmetric and invariant under site
// permutation and rigid translation of either argument.
bool structures_match(const CrystalStructure& s1, const CrystalStructure& s2,
                      const MatcherTolerances& tol = {});

// Sorted element set as "Cl-Na" style key; the grouping key for uniqueness
// and novelty bookkeeping.
std::string chemical_system(const CrystalStructure& s);

}  // namespace xtal
