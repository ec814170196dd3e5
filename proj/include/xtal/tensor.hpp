#pragma once

#include <optional>

#include "xtal/encoding.hpp"
#include "xtal/structure.hpp"

namespace xtal {

inline constexpr int kMaxAtoms = 20;

enum class AtomMode { TwoD, OneD };

inline int feature_dim(AtomMode mode) { return mode == AtomMode::TwoD ? 5 : 4; }
inline const char* atom_mode_name(AtomMode mode) { return mode == AtomMode::TwoD ? "2d" : "1d"; }
std::optional<AtomMode> atom_mode_from_name(std::string_view name);

// The diffusion state: normalized lattice rows plus a fixed-height atom block.
// Atom rows are [r_norm, c_norm, x, y, z] (TwoD) or [z_norm, x, y, z] (OneD);
// unused rows are filled with -1 across every channel.
struct CrystalTensor {
  Mat3 lattice = Mat3::Zero();             // lattice / kLatticeScale
  Eigen::MatrixXd atoms;                   // kMaxAtoms x feature_dim(mode)
  AtomMode mode = AtomMode::TwoD;

  static CrystalTensor zeros(AtomMode mode);
};

// Encode a structure. Coordinates are wrapped to [0, 1); site order is
// preserved. Throws Error(too_many_atoms) beyond kMaxAtoms and
// Error(unencodable_species) for z > kMaxZ1D in OneD mode (TwoD covers the
// whole table).
CrystalTensor to_tensor(const CrystalStructure& s, AtomMode mode);

// Decode: rows whose argmax element is null are dropped; an all-null tensor
// yields nullopt. Coordinates are wrapped, the lattice is scaled back to
// Angstrom. No validity checks happen here.
std::optional<CrystalStructure> from_tensor(const CrystalTensor& t,
                                            const DecoderConfig& cfg = {});

}  // namespace xtal
