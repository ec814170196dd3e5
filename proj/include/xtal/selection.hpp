#pragma once

#include <optional>
#include <span>
#include <utility>

#include "xtal/metrics.hpp"

namespace xtal {

// Geometric mean of four scores normalized from empirically observed metric
// ranges, each clamped to [0,1]:
//   S_struct   = (V_struct - 0.95) / 0.05
//   S_chem     = (V_chem   - 0.80) / 0.20
//   S_density  = (1 - d_rho)  / 0.9
//   S_elements = (1 - d_elem) / 0.9
// Validities enter as fractions (report percentages / 100). NaN inputs score
// zero, which keeps the composite total on degenerate reports.
double quality_composite(const MetricsReport& m);

// un_rate * quality_composite^alpha. Throws Error(invalid_alpha) for
// alpha <= 0.
double balance_score(const MetricsReport& m, double alpha);

enum class Phase { Early, Mid, Late };
const char* phase_name(Phase p);

// Partition by training progress: epoch/total <= 0.30 Early, <= 0.60 Mid,
// else Late. Integer arithmetic, so boundary epochs are classified exactly.
Phase phase_of(int epoch, int total_epochs);

struct CheckpointRecord {
  int epoch = 0;
  MetricsReport metrics;
  double balance_score = 0;
  Phase phase = Phase::Early;
};

struct SelectionResult {
  std::optional<CheckpointRecord> early, mid, late;
};

// Best raw (unsmoothed) balance score per phase; ties go to the earlier
// epoch. Throws Error(empty_history) on an empty history and
// Error(out_of_range) if any epoch exceeds total_epochs.
SelectionResult select_checkpoints(std::span<const std::pair<int, MetricsReport>> history,
                                   int total_epochs, double alpha);

// Trailing mean over min(window, index+1) points; same length as the input.
// Throws Error(invalid_window) for window < 1. Smoothing is for reporting
// only; selection always uses raw scores.
std::vector<double> moving_average(std::span<const double> series, int window = 10);

// Append-only history log: one line per evaluated checkpoint holding the
// epoch, every numeric report field, and the balance score at the alpha used
// by the producing run.
void append_history(const std::string& path, int epoch, const MetricsReport& m,
                    double balance);
std::vector<std::pair<int, MetricsReport>> read_history(const std::string& path);

}  // namespace xtal
