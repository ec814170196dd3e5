#include "xtal/tensor.hpp"

#include <string>

#include "xtal/errors.hpp"
#include "xtal/lattice.hpp"

namespace xtal {

std::optional<AtomMode> atom_mode_from_name(std::string_view name) {
  if (name == "2d") return AtomMode::TwoD;
  if (name == "1d") return AtomMode::OneD;
  return std::nullopt;
}

CrystalTensor CrystalTensor::zeros(AtomMode mode) {
  CrystalTensor t;
  t.mode = mode;
  t.lattice = Mat3::Zero();
  t.atoms = Eigen::MatrixXd::Zero(kMaxAtoms, feature_dim(mode));
  return t;
}

CrystalTensor to_tensor(const CrystalStructure& s, AtomMode mode) {
  const int n = s.num_sites();
  if (n > kMaxAtoms)
    throw_data("too_many_atoms", "structure has " + std::to_string(n) +
                                     " sites, representation caps at " +
                                     std::to_string(kMaxAtoms));
  CrystalTensor t;
  t.mode = mode;
  t.lattice = normalize_lattice(s.lattice);
  const int f = feature_dim(mode);
  t.atoms = Eigen::MatrixXd::Constant(kMaxAtoms, f, -1.0);  // padding rows

  for (int i = 0; i < n; ++i) {
    int z = s.species[i];
    Vec3 fc = wrap_frac(s.frac_coords[i]);
    if (mode == AtomMode::TwoD) {
      auto enc = encode_atom_2d(z);  // validates z
      t.atoms(i, 0) = enc.r_norm;
      t.atoms(i, 1) = enc.c_norm;
      t.atoms(i, 2) = fc.x();
      t.atoms(i, 3) = fc.y();
      t.atoms(i, 4) = fc.z();
    } else {
      if (z < 1 || z > kMaxZ1D)
        throw_data("unencodable_species",
                   "atomic number " + std::to_string(z) + " exceeds the scalar encoding cap " +
                       std::to_string(kMaxZ1D));
      t.atoms(i, 0) = encode_atom_1d(z);
      t.atoms(i, 1) = fc.x();
      t.atoms(i, 2) = fc.y();
      t.atoms(i, 3) = fc.z();
    }
  }
  return t;
}

std::optional<CrystalStructure> from_tensor(const CrystalTensor& t, const DecoderConfig& cfg) {
  CrystalStructure s;
  s.lattice = denormalize_lattice(t.lattice);
  for (int i = 0; i < t.atoms.rows(); ++i) {
    int z;
    Vec3 fc;
    if (t.mode == AtomMode::TwoD) {
      z = decode_atom_2d(t.atoms(i, 0), t.atoms(i, 1), cfg).z_star;
      fc = {t.atoms(i, 2), t.atoms(i, 3), t.atoms(i, 4)};
    } else {
      z = decode_atom_1d(t.atoms(i, 0), cfg);
      fc = {t.atoms(i, 1), t.atoms(i, 2), t.atoms(i, 3)};
    }
    if (z == 0) continue;  // null slot
    s.species.push_back(z);
    s.frac_coords.push_back(wrap_frac(fc));
  }
  if (s.species.empty()) return std::nullopt;
  return s;
}

}  // namespace xtal
