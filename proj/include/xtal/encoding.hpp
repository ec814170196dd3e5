#pragma once

#include <array>
#include <vector>

namespace xtal {

inline constexpr int kMaxZ1D = 94;  // ceiling of the scalar encoding

// Normalized periodic-table coordinates in [-1, 1]. The null atom (z = 0)
// sits at (-1, -1), shared with nothing: hydrogen is at period 1, group 1,
// which maps to (-5/7, -8/9).
struct AtomicEncoding2D {
  double r_norm = -1.0;
  double c_norm = -1.0;
};

struct DecoderConfig {
  double sigma = 0.1;            // Gaussian width around the predicted point
  double delta_r = 1.0 / 7.0;    // half-width of a period cell
  double delta_c = 1.0 / 18.0;   // half-width of a group cell
};

// z in 0..kMaxZ (0 = null). Throws Error(out_of_range) otherwise.
AtomicEncoding2D encode_atom_2d(int z);

// z in 0..kMaxZ1D mapped to 2z/94 - 1 (0 = null -> -1). Strictly increasing.
double encode_atom_1d(int z);

struct Decode2DResult {
  int z_star = 0;                   // argmax element, ties broken toward smaller z
  std::vector<double> probability;  // indexed by z, 0..kMaxZ; sums over cells, not to 1
};

// Probabilistic nearest-anchor decoding: an isotropic Gaussian of width sigma
// is centered on the prediction and integrated over each element's
// responsibility box (anchor +- delta per axis, extended to the open side at
// the table edges; the null region is the lower-left quadrant). Throws
// Error(non_finite) on NaN/Inf input.
Decode2DResult decode_atom_2d(double r_pred, double c_pred, const DecoderConfig& cfg = {});

// Same scheme in one dimension over anchors 2z/94 - 1.
int decode_atom_1d(double z_pred, const DecoderConfig& cfg = {});

// Gaussian mass on one axis for the cell centered at `anchor`, half-width
// `delta`, with the boundary extensions applied when the anchor sits at -1 or
// +1 (open_lower / open_upper). Exposed for the partition diagnostics below.
double axis_cell_mass(double pred, double anchor, double delta, double sigma,
                      bool open_lower, bool open_upper);

// Sum of axis masses over the canonical tiling of one axis: periods 0..7 on
// the row axis, integer groups 0..18 on the column axis. Each is exactly 1
// in exact arithmetic for any prediction. (Fractional f-block groups overlap
// the 3..4 integer cells and are not part of the tiling.)
double period_axis_partition_sum(double r_pred, const DecoderConfig& cfg = {});
double group_axis_partition_sum(double c_pred, const DecoderConfig& cfg = {});

}  // namespace xtal
