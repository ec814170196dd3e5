#include "xtal/lattice.hpp"

#include <cmath>
#include <limits>

#include "xtal/elements.hpp"
#include "xtal/errors.hpp"

namespace xtal {
namespace {

constexpr double kAmuToGram = 1.66053906660e-24;
constexpr double kA3ToCm3 = 1e-24;
constexpr double kDegenerateDet = 1e-12;

void check_finite(const Mat3& m, const char* what) {
  if (!m.allFinite())
    throw_numeric("non_finite", std::string("non-finite entries in ") + what);
}

double deg(double rad) { return rad * 180.0 / M_PI; }
double rad(double d) { return d * M_PI / 180.0; }

}  // namespace

Mat3 normalize_lattice(const Mat3& lattice) {
  check_finite(lattice, "lattice");
  return lattice / kLatticeScale;
}

Mat3 denormalize_lattice(const Mat3& lattice_norm) {
  check_finite(lattice_norm, "normalized lattice");
  return lattice_norm * kLatticeScale;
}

double cell_volume(const Mat3& lattice) {
  check_finite(lattice, "lattice");
  return std::abs(lattice.determinant());
}

LatticeParams lattice_params(const Mat3& lattice) {
  check_finite(lattice, "lattice");
  Vec3 va = lattice.row(0), vb = lattice.row(1), vc = lattice.row(2);
  LatticeParams p;
  p.a = va.norm();
  p.b = vb.norm();
  p.c = vc.norm();
  auto angle = [](const Vec3& u, const Vec3& v) {
    double c = u.dot(v) / (u.norm() * v.norm());
    c = std::clamp(c, -1.0, 1.0);
    return deg(std::acos(c));
  };
  p.alpha = angle(vb, vc);
  p.beta = angle(va, vc);
  p.gamma = angle(va, vb);
  return p;
}

Mat3 lattice_from_params(const LatticeParams& p) {
  auto fail = [&](const std::string& why) {
    throw_data("not_constructible", "cell parameters do not define a lattice: " + why);
  };
  for (double len : {p.a, p.b, p.c})
    if (!(len > 0.0) || !std::isfinite(len)) fail("non-positive edge length");
  for (double ang : {p.alpha, p.beta, p.gamma})
    if (!std::isfinite(ang) || ang <= 0.0 || ang >= 180.0) fail("angle outside (0, 180)");

  double ca = std::cos(rad(p.alpha)), cb = std::cos(rad(p.beta));
  double cg = std::cos(rad(p.gamma)), sg = std::sin(rad(p.gamma));
  double cx = (ca - cb * cg) / sg;
  double cz_sq = 1.0 - cb * cb - cx * cx;
  if (cz_sq <= 0.0) fail("inconsistent angle triple");

  Mat3 m;
  m.row(0) << p.a, 0.0, 0.0;
  m.row(1) << p.b * cg, p.b * sg, 0.0;
  m.row(2) << p.c * cb, p.c * cx, p.c * std::sqrt(cz_sq);
  return m;
}

double min_periodic_distance(const Mat3& lattice, std::span<const Vec3> frac_coords) {
  check_finite(lattice, "lattice");
  if (frac_coords.empty())
    throw_data("empty_input", "min_periodic_distance needs at least one site");
  if (std::abs(lattice.determinant()) < kDegenerateDet)
    throw_numeric("degenerate_lattice", "lattice determinant below 1e-12");

  const Mat3 lt = lattice.transpose();  // frac (column) -> cartesian
  double best = std::numeric_limits<double>::infinity();
  const int n = static_cast<int>(frac_coords.size());
  for (int i = 0; i < n; ++i) {
    for (int j = i; j < n; ++j) {
      Vec3 d0 = frac_coords[i] - frac_coords[j];
      for (int nx = -1; nx <= 1; ++nx)
        for (int ny = -1; ny <= 1; ++ny)
          for (int nz = -1; nz <= 1; ++nz) {
            if (i == j && nx == 0 && ny == 0 && nz == 0) continue;  // self at zero shift
            Vec3 d = d0 + Vec3(nx, ny, nz);
            best = std::min(best, (lt * d).norm());
          }
    }
  }
  return best;
}

double mass_density(const CrystalStructure& s) {
  double vol = cell_volume(s.lattice);
  if (vol < kDegenerateDet)
    throw_numeric("degenerate_lattice", "cell volume vanishes in density computation");
  double mass = 0.0;
  for (int z : s.species) mass += element_info(z).atomic_mass;
  return mass * kAmuToGram / (vol * kA3ToCm3);
}

}  // namespace xtal
