#pragma once

#include <functional>
#include <span>

#include "xtal/diffusion.hpp"
#include "xtal/model.hpp"

namespace xtal {

// One training example after forward noising: the noisy state, the drawn
// step, and the noise the model must regress.
struct TrainItem {
  CrystalTensor xt;
  CrystalTensor eps;
  int t = 1;
};

// Draws (t, eps) per selected structure in a fixed order (t first, then the
// noise tensor lattice-first row-major) and applies q_sample.
std::vector<TrainItem> make_train_items(std::span<const CrystalTensor> data,
                                        std::span<const int> indices,
                                        const NoiseSchedule& sched, Rng& rng);

// Exact batch loss and parameter gradients via the autodiff tape. Gradients
// land in params.grads (overwritten). Throws Error(non_finite) if the loss or
// any gradient is not finite.
LossBreakdown loss_and_gradients(ModelParameters& params, std::span<const TrainItem> batch,
                                 const LossWeights& weights);

// Same forward pass without gradient work; used by finite-difference checks.
LossBreakdown loss_value(const ModelParameters& params, std::span<const TrainItem> batch,
                         const LossWeights& weights);

struct AdamConfig {
  double lr = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  long step = 0;
  std::vector<Eigen::MatrixXd> m, v;

  static AdamState init(const ModelParameters& params);
};

// Bias-corrected Adam update from params.grads.
void adam_step(ModelParameters& params, AdamState& state, const AdamConfig& cfg);

struct TrainOptions {
  int epochs = 200;
  int batch_size = 16;
  AdamConfig adam;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // 0 disables the callback
  std::function<void(int epoch, const LossBreakdown&)> on_epoch;
  std::function<void(int epoch, const ModelParameters&)> on_checkpoint;
};

// Epoch-driven loop: deterministic shuffle, sequential batches, Adam steps.
// Returns the mean loss per epoch.
std::vector<LossBreakdown> train(ModelParameters& params,
                                 const std::vector<CrystalTensor>& data,
                                 const NoiseSchedule& sched, const LossWeights& weights,
                                 const TrainOptions& opts);

}  // namespace xtal
