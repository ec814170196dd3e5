#pragma once

#include <Eigen/Dense>
#include <vector>

namespace xtal {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

// A periodic crystal. Lattice rows are the three lattice vectors in Angstrom
// (row-vector convention: cartesian = frac^T * lattice, i.e. lattice^T * frac
// as a column op). Fractional coordinates are kept wrapped to [0, 1).
struct CrystalStructure {
  Mat3 lattice = Mat3::Identity();
  std::vector<int> species;        // atomic numbers, parallel to frac_coords
  std::vector<Vec3> frac_coords;

  int num_sites() const { return static_cast<int>(species.size()); }
};

inline double wrap_frac(double x) {
  double w = x - std::floor(x);
  return (w >= 1.0) ? 0.0 : w;  // floor rounding can land exactly on 1.0
}

inline Vec3 wrap_frac(const Vec3& v) {
  return {wrap_frac(v.x()), wrap_frac(v.y()), wrap_frac(v.z())};
}

}  // namespace xtal
