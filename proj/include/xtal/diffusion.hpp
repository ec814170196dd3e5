#pragma once

#include <vector>

#include "xtal/rng.hpp"
#include "xtal/tensor.hpp"

namespace xtal {

// Linear forward-noising schedule. Time steps are 1-based: t in 1..steps.
struct NoiseSchedule {
  int steps = 0;
  std::vector<double> betas;       // betas[t-1]
  std::vector<double> alpha_bars;  // running products of (1 - beta)

  // Evenly spaced betas from beta_start to beta_end inclusive (the single
  // value beta_start when steps == 1). Throws Error(invalid_range) unless
  // 0 < beta_start <= beta_end < 1 and steps >= 1.
  static NoiseSchedule linear(int steps, double beta_start = 1e-4, double beta_end = 0.02);

  double beta(int t) const { return betas[static_cast<size_t>(t) - 1]; }
  double alpha(int t) const { return 1.0 - beta(t); }
  double alpha_bar(int t) const { return alpha_bars[static_cast<size_t>(t) - 1]; }
};

// Which reverse-step variance to use: the schedule beta (default) or the
// posterior value beta * (1 - abar_{t-1}) / (1 - abar_t).
enum class ReverseVariance { Beta, Posterior };

// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps, applied to lattice and atom
// blocks alike. Shapes of x0 and eps must agree.
CrystalTensor q_sample(const CrystalTensor& x0, int t, const CrystalTensor& eps,
                       const NoiseSchedule& sched);

// One reverse step from x_t to x_{t-1} given the predicted noise. Fresh
// Gaussian noise is drawn from `rng` (lattice entries row-major first, then
// atom entries row-major) except at t == 1. Throws Error(out_of_range) for t
// outside 1..steps.
CrystalTensor ddpm_step(const CrystalTensor& xt, const CrystalTensor& eps_hat, int t,
                        const NoiseSchedule& sched, Rng& rng,
                        ReverseVariance var = ReverseVariance::Beta);

struct LossWeights {
  double lambda_atoms = 100.0;
  std::vector<double> channel_weights;  // one per atom feature column

  static LossWeights defaults(AtomMode mode);
};

struct LossBreakdown {
  double total = 0, lattice = 0, atoms = 0;
};

// L = mean over the 9 lattice entries of squared error
//   + lambda * mean over 20 x F atom entries of channel-weighted squared
//     error. Throws Error(shape_mismatch) when shapes differ.
LossBreakdown weighted_loss(const CrystalTensor& eps_true, const CrystalTensor& eps_pred,
                            const LossWeights& w);

// Gaussian tensor with entries drawn lattice-first, row-major; used by
// training and sampling so the draw order is fixed in one place.
CrystalTensor gaussian_like(AtomMode mode, Rng& rng);

}  // namespace xtal
