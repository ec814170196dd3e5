#include "xtal/matcher.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "xtal/elements.hpp"
#include "xtal/lattice.hpp"

namespace xtal {
namespace {

std::map<int, int> composition(const CrystalStructure& s) {
  std::map<int, int> comp;
  for (int z : s.species) ++comp[z];
  return comp;
}

bool same_reduced_composition(const std::map<int, int>& c1, const std::map<int, int>& c2) {
  if (c1.size() != c2.size()) return false;
  int g1 = 0, g2 = 0;
  for (const auto& [z, n] : c1) g1 = std::gcd(g1, n);
  for (const auto& [z, n] : c2) g2 = std::gcd(g2, n);
  auto it2 = c2.begin();
  for (const auto& [z, n] : c1) {
    if (it2->first != z || n / g1 != it2->second / g2 || n % g1 != 0 || it2->second % g2 != 0)
      return false;
    ++it2;
  }
  return true;
}

bool lattice_gate(const CrystalStructure& s1, const CrystalStructure& s2,
                  const MatcherTolerances& tol) {
  LatticeParams p1 = lattice_params(s1.lattice), p2 = lattice_params(s2.lattice);
  std::array<double, 3> len1{p1.a, p1.b, p1.c}, len2{p2.a, p2.b, p2.c};
  std::array<double, 3> ang1{p1.alpha, p1.beta, p1.gamma}, ang2{p2.alpha, p2.beta, p2.gamma};
  std::sort(len1.begin(), len1.end());
  std::sort(len2.begin(), len2.end());
  std::sort(ang1.begin(), ang1.end());
  std::sort(ang2.begin(), ang2.end());
  for (int i = 0; i < 3; ++i) {
    if (std::abs(len1[static_cast<size_t>(i)] - len2[static_cast<size_t>(i)]) >
        tol.ltol * std::max(len1[static_cast<size_t>(i)], len2[static_cast<size_t>(i)]))
      return false;
    if (std::abs(ang1[static_cast<size_t>(i)] - ang2[static_cast<size_t>(i)]) > tol.angle_tol)
      return false;
  }
  return true;
}

double wrap_half(double x) {  // to [-0.5, 0.5)
  return x - std::floor(x + 0.5);
}

// Symmetric pair distance: minimum over nearby images of the larger of the
// two cartesian lengths (one per lattice), so swapping the structures cannot
// change the verdict.
double pair_distance(const Vec3& u, const Vec3& v, const Mat3& lt1, const Mat3& lt2) {
  Vec3 d0{wrap_half(u.x() - v.x()), wrap_half(u.y() - v.y()), wrap_half(u.z() - v.z())};
  double best = std::numeric_limits<double>::infinity();
  for (int nx = -1; nx <= 1; ++nx)
    for (int ny = -1; ny <= 1; ++ny)
      for (int nz = -1; nz <= 1; ++nz) {
        Vec3 d = d0 + Vec3(nx, ny, nz);
        best = std::min(best, std::max((lt1 * d).norm(), (lt2 * d).norm()));
      }
  return best;
}

// Kuhn's augmenting-path bipartite matching over a boolean adjacency.
bool perfect_matching(const std::vector<std::vector<bool>>& adj) {
  const int n = static_cast<int>(adj.size());
  std::vector<int> match_right(static_cast<size_t>(n), -1);
  std::vector<char> visited;
  std::function<bool(int)> augment = [&](int left) {
    for (int right = 0; right < n; ++right) {
      if (!adj[static_cast<size_t>(left)][static_cast<size_t>(right)] ||
          visited[static_cast<size_t>(right)])
        continue;
      visited[static_cast<size_t>(right)] = 1;
      if (match_right[static_cast<size_t>(right)] < 0 ||
          augment(match_right[static_cast<size_t>(right)])) {
        match_right[static_cast<size_t>(right)] = left;
        return true;
      }
    }
    return false;
  };
  for (int left = 0; left < n; ++left) {
    visited.assign(static_cast<size_t>(n), 0);
    if (!augment(left)) return false;
  }
  return true;
}

}  // namespace

std::string chemical_system(const CrystalStructure& s) {
  std::set<std::string> symbols;
  for (int z : s.species) symbols.insert(element_info(z).symbol);
  std::string key;
  for (const auto& sym : symbols) {
    if (!key.empty()) key += '-';
    key += sym;
  }
  return key;
}

bool structures_match(const CrystalStructure& s1, const CrystalStructure& s2,
                      const MatcherTolerances& tol) {
  auto c1 = composition(s1), c2 = composition(s2);
  if (!same_reduced_composition(c1, c2)) return false;
  // Without supercell search, a site bijection needs equal counts.
  if (s1.num_sites() != s2.num_sites()) return false;
  if (!lattice_gate(s1, s2, tol)) return false;

  const int n = s1.num_sites();
  const double v1 = cell_volume(s1.lattice), v2 = cell_volume(s2.lattice);
  const double spacing =
      0.5 * (std::cbrt(v1 / n) + std::cbrt(v2 / n));
  const double threshold = tol.stol * spacing;

  const Mat3 lt1 = s1.lattice.transpose(), lt2 = s2.lattice.transpose();

  // Group site indices by species.
  std::map<int, std::vector<int>> sites1, sites2;
  for (int i = 0; i < n; ++i) sites1[s1.species[static_cast<size_t>(i)]].push_back(i);
  for (int i = 0; i < n; ++i) sites2[s2.species[static_cast<size_t>(i)]].push_back(i);

  // Rarest species (ties toward smaller z) anchors the translation search.
  int anchor_z = c1.begin()->first;
  for (const auto& [z, count] : c1)
    if (count < c1[anchor_z]) anchor_z = z;

  for (int j : sites1[anchor_z]) {
    for (int k : sites2[anchor_z]) {
      Vec3 t = s2.frac_coords[static_cast<size_t>(k)] - s1.frac_coords[static_cast<size_t>(j)];
      bool all_matched = true;
      for (const auto& [z, idx1] : sites1) {
        const auto& idx2 = sites2[z];
        const int m = static_cast<int>(idx1.size());
        std::vector<std::vector<bool>> adj(static_cast<size_t>(m),
                                           std::vector<bool>(static_cast<size_t>(m), false));
        bool any_edge = false;
        for (int a = 0; a < m; ++a)
          for (int b = 0; b < m; ++b) {
            Vec3 u = s1.frac_coords[static_cast<size_t>(idx1[static_cast<size_t>(a)])] + t;
            double dist =
                pair_distance(u, s2.frac_coords[static_cast<size_t>(idx2[static_cast<size_t>(b)])],
                              lt1, lt2);
            if (dist <= threshold) {
              adj[static_cast<size_t>(a)][static_cast<size_t>(b)] = true;
              any_edge = true;
            }
          }
        if (!any_edge || !perfect_matching(adj)) {
          all_matched = false;
          break;
        }
      }
      if (all_matched) return true;
    }
  }
  return false;
}

}  // namespace xtal
