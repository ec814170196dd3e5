#pragma once

#include <span>

#include "xtal/structure.hpp"

namespace xtal {

// Global lattice normalization length in Angstrom: the longest cell edge the
// representation can express. Lattice rows are divided by this for the model
// and multiplied back on decode.
inline constexpr double kLatticeScale = 46.7425;

struct LatticeParams {
  double a = 0, b = 0, c = 0;           // edge lengths, Angstrom
  double alpha = 0, beta = 0, gamma = 0;  // angles, degrees
};

// Elementwise scaling by 1/kLatticeScale. Throws Error(non_finite) if the
// input contains NaN/Inf.
Mat3 normalize_lattice(const Mat3& lattice);
Mat3 denormalize_lattice(const Mat3& lattice_norm);

// |det|, Angstrom^3.
double cell_volume(const Mat3& lattice);

// Edge lengths and angles of a row-vector lattice.
LatticeParams lattice_params(const Mat3& lattice);

// Canonical orientation from cell parameters: a along x, b in the xy plane.
// Throws Error(not_constructible) when the parameters do not define a proper
// 3D cell (non-positive lengths, angles outside (0, 180), or an inconsistent
// angle triple).
Mat3 lattice_from_params(const LatticeParams& p);

// Minimum interatomic distance under periodic boundary conditions: over all
// site pairs i != j with image translations in {-1,0,1}^3, and over each
// site's own nonzero images (so a single-site cell gets its shortest lattice
// vector). Throws Error(degenerate_lattice) if |det| < 1e-12 and
// Error(empty_input) for an empty site list.
double min_periodic_distance(const Mat3& lattice, std::span<const Vec3> frac_coords);

// Mass density in g/cm^3 from tabulated atomic masses.
double mass_density(const CrystalStructure& s);

}  // namespace xtal
