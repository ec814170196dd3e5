#include "xtal/encoding.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "xtal/elements.hpp"
#include "xtal/errors.hpp"

namespace xtal {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double phi(double u) {  // standard normal CDF
  return 0.5 * (1.0 + std::erf(u / M_SQRT2));
}

// P(lo <= X <= hi) for X ~ N(pred, sigma^2); lo/hi may be +-inf.
double gauss_mass(double pred, double lo, double hi, double sigma) {
  double upper = std::isinf(hi) ? 1.0 : phi((hi - pred) / sigma);
  double lower = std::isinf(lo) ? 0.0 : phi((lo - pred) / sigma);
  return upper - lower;
}

void check_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw_numeric("non_finite", std::string("non-finite ") + what + " passed to decoder");
}

}  // namespace

AtomicEncoding2D encode_atom_2d(int z) {
  if (z == 0) return {-1.0, -1.0};
  const auto& e = element_info(z);  // throws for z outside 1..kMaxZ
  return {2.0 * e.period / 7.0 - 1.0, 2.0 * e.group / 18.0 - 1.0};
}

double encode_atom_1d(int z) {
  if (z < 0 || z > kMaxZ1D)
    throw_data("out_of_range", "atomic number " + std::to_string(z) +
                                   " outside 0.." + std::to_string(kMaxZ1D) +
                                   " for scalar encoding");
  return 2.0 * z / kMaxZ1D - 1.0;
}

double axis_cell_mass(double pred, double anchor, double delta, double sigma,
                      bool open_lower, bool open_upper) {
  double lo = open_lower ? -kInf : anchor - delta;
  double hi = open_upper ? kInf : anchor + delta;
  return gauss_mass(pred, lo, hi, sigma);
}

Decode2DResult decode_atom_2d(double r_pred, double c_pred, const DecoderConfig& cfg) {
  check_finite(r_pred, "row coordinate");
  check_finite(c_pred, "column coordinate");

  Decode2DResult out;
  out.probability.assign(kMaxZ + 1, 0.0);

  // Null atom: lower-left quadrant (-inf, -1 + delta_r] x (-inf, -1 + delta_c].
  out.probability[0] =
      axis_cell_mass(r_pred, -1.0, cfg.delta_r, cfg.sigma, true, false) *
      axis_cell_mass(c_pred, -1.0, cfg.delta_c, cfg.sigma, true, false);

  for (int z = 1; z <= kMaxZ; ++z) {
    const auto& e = element_info(z);
    auto enc = encode_atom_2d(z);
    // Period 7 sits at r = +1 (open above); no element shares the null's
    // r = -1 row. Group 18 sits at c = +1 (open above); group boundaries
    // below 1 are closed. f-block groups are interior by construction.
    bool r_open_hi = e.period == 7;
    bool c_open_hi = !e.f_block && e.group == 18.0;
    double pr = axis_cell_mass(r_pred, enc.r_norm, cfg.delta_r, cfg.sigma, false, r_open_hi);
    double pc = axis_cell_mass(c_pred, enc.c_norm, cfg.delta_c, cfg.sigma, false, c_open_hi);
    out.probability[z] = pr * pc;
  }

  out.z_star = 0;
  double best = out.probability[0];
  for (int z = 1; z <= kMaxZ; ++z) {
    if (out.probability[z] > best) {  // strict: ties keep the smaller z
      best = out.probability[z];
      out.z_star = z;
    }
  }
  return out;
}

int decode_atom_1d(double z_pred, const DecoderConfig& cfg) {
  check_finite(z_pred, "scalar coordinate");
  const double delta = 1.0 / kMaxZ1D;  // half the anchor spacing
  int best_z = 0;
  double best_p = -1.0;
  for (int z = 0; z <= kMaxZ1D; ++z) {
    double anchor = 2.0 * z / kMaxZ1D - 1.0;
    double p = axis_cell_mass(z_pred, anchor, delta, cfg.sigma, z == 0, z == kMaxZ1D);
    if (p > best_p) {
      best_p = p;
      best_z = z;
    }
  }
  return best_z;
}

double period_axis_partition_sum(double r_pred, const DecoderConfig& cfg) {
  double s = 0.0;
  for (int p = 0; p <= 7; ++p) {
    double anchor = 2.0 * p / 7.0 - 1.0;
    s += axis_cell_mass(r_pred, anchor, cfg.delta_r, cfg.sigma, p == 0, p == 7);
  }
  return s;
}

double group_axis_partition_sum(double c_pred, const DecoderConfig& cfg) {
  double s = 0.0;
  for (int g = 0; g <= 18; ++g) {
    double anchor = 2.0 * g / 18.0 - 1.0;
    s += axis_cell_mass(c_pred, anchor, cfg.delta_c, cfg.sigma, g == 0, g == 18);
  }
  return s;
}

}  // namespace xtal
