#include "xtal/diffusion.hpp"

#include <cmath>
#include <string>

#include "xtal/errors.hpp"

namespace xtal {
namespace {

void check_t(int t, const NoiseSchedule& sched) {
  if (t < 1 || t > sched.steps)
    throw_data("out_of_range", "time step " + std::to_string(t) + " outside 1.." +
                                   std::to_string(sched.steps));
}

void check_same_shape(const CrystalTensor& a, const CrystalTensor& b, const char* what) {
  if (a.mode != b.mode || a.atoms.rows() != b.atoms.rows() || a.atoms.cols() != b.atoms.cols())
    throw_data("shape_mismatch", std::string("tensor shape mismatch in ") + what);
}

}  // namespace

NoiseSchedule NoiseSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 1)
    throw_data("invalid_range", "schedule needs at least one step");
  if (!(beta_start > 0.0) || !(beta_end < 1.0) || beta_start > beta_end)
    throw_data("invalid_range", "betas must satisfy 0 < start <= end < 1");
  NoiseSchedule s;
  s.steps = steps;
  s.betas.resize(steps);
  s.alpha_bars.resize(steps);
  double abar = 1.0;
  for (int i = 0; i < steps; ++i) {
    double frac = (steps == 1) ? 0.0 : static_cast<double>(i) / (steps - 1);
    s.betas[i] = beta_start + (beta_end - beta_start) * frac;
    abar *= 1.0 - s.betas[i];
    s.alpha_bars[i] = abar;
  }
  return s;
}

CrystalTensor q_sample(const CrystalTensor& x0, int t, const CrystalTensor& eps,
                       const NoiseSchedule& sched) {
  check_t(t, sched);
  check_same_shape(x0, eps, "q_sample");
  double abar = sched.alpha_bar(t);
  double s0 = std::sqrt(abar), s1 = std::sqrt(1.0 - abar);
  CrystalTensor xt = x0;
  xt.lattice = s0 * x0.lattice + s1 * eps.lattice;
  xt.atoms = s0 * x0.atoms + s1 * eps.atoms;
  return xt;
}

CrystalTensor ddpm_step(const CrystalTensor& xt, const CrystalTensor& eps_hat, int t,
                        const NoiseSchedule& sched, Rng& rng, ReverseVariance var) {
  check_t(t, sched);
  check_same_shape(xt, eps_hat, "ddpm_step");
  double beta = sched.beta(t);
  double abar = sched.alpha_bar(t);
  double inv_sqrt_alpha = 1.0 / std::sqrt(1.0 - beta);
  double coef = beta / std::sqrt(1.0 - abar);

  CrystalTensor prev = xt;
  prev.lattice = inv_sqrt_alpha * (xt.lattice - coef * eps_hat.lattice);
  prev.atoms = inv_sqrt_alpha * (xt.atoms - coef * eps_hat.atoms);

  if (t > 1) {
    double sigma_sq = beta;
    if (var == ReverseVariance::Posterior)
      sigma_sq = beta * (1.0 - sched.alpha_bar(t - 1)) / (1.0 - abar);
    double sigma = std::sqrt(sigma_sq);
    CrystalTensor z = gaussian_like(xt.mode, rng);
    prev.lattice += sigma * z.lattice;
    prev.atoms += sigma * z.atoms;
  }
  return prev;
}

LossWeights LossWeights::defaults(AtomMode mode) {
  LossWeights w;
  if (mode == AtomMode::TwoD)
    w.channel_weights = {1.5, 2.0, 1.0, 1.0, 1.0};  // row, group, x, y, z
  else
    w.channel_weights = {2.0, 1.0, 1.0, 1.0};  // species, x, y, z
  return w;
}

LossBreakdown weighted_loss(const CrystalTensor& eps_true, const CrystalTensor& eps_pred,
                            const LossWeights& w) {
  check_same_shape(eps_true, eps_pred, "weighted_loss");
  if (static_cast<int>(w.channel_weights.size()) != eps_true.atoms.cols())
    throw_data("shape_mismatch", "channel weight count does not match atom features");

  LossBreakdown out;
  out.lattice = (eps_true.lattice - eps_pred.lattice).squaredNorm() / 9.0;

  double acc = 0.0;
  for (int r = 0; r < eps_true.atoms.rows(); ++r)
    for (int c = 0; c < eps_true.atoms.cols(); ++c) {
      double d = eps_true.atoms(r, c) - eps_pred.atoms(r, c);
      acc += w.channel_weights[c] * d * d;
    }
  out.atoms = acc / static_cast<double>(eps_true.atoms.size());
  out.total = out.lattice + w.lambda_atoms * out.atoms;
  return out;
}

CrystalTensor gaussian_like(AtomMode mode, Rng& rng) {
  CrystalTensor t = CrystalTensor::zeros(mode);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.lattice(r, c) = rng.normal();
  for (int r = 0; r < t.atoms.rows(); ++r)
    for (int c = 0; c < t.atoms.cols(); ++c) t.atoms(r, c) = rng.normal();
  return t;
}

}  // namespace xtal
