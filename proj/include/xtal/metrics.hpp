#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xtal/cif.hpp"
#include "xtal/matcher.hpp"
#include "xtal/structure.hpp"

namespace xtal {

// Deterministic stand-in for the reference pipeline's 30-second wall clock:
// the oxidation-state enumeration gives up after this many search nodes and
// the structure counts as chemically invalid.
inline constexpr std::int64_t kChargeEnumBudget = 2'000'000;

// Candidate screening before any geometry work. Checks run in a fixed order
// (atomic-number range, positive lattice lengths, finiteness, constructible
// cell, minimum volume); the first failure becomes the reject reason.
// Rejection is a value, never an exception.
struct PrefilterOutcome {
  std::optional<CrystalStructure> structure;  // set iff passed
  std::string reason;                         // empty iff passed
  bool passed() const { return structure.has_value(); }
};
PrefilterOutcome prefilter(const ParsedCrystal& candidate);

inline constexpr double kMinVolume = 0.1;      // cubic Angstrom
inline constexpr double kMinAtomDistance = 0.5;  // Angstrom
inline constexpr int kPrefilterMaxZ = 104;

// Minimum periodic pairwise distance >= 0.5 A and volume >= 0.1 A^3.
bool structural_validity(const CrystalStructure& s);

// All-metal compositions are valid outright. Otherwise some assignment of one
// common oxidation state per element must reach charge neutrality and pass
// the electronegativity ordering test (every positively charged element no
// more electronegative than every negatively charged one). Running out of
// budget counts as invalid.
bool compositional_validity(const CrystalStructure& s,
                            std::int64_t budget = kChargeEnumBudget);

// First Wasserstein distance between two empirical distributions via
// quantile-function integration; for equal sizes this reduces to the mean
// absolute difference of sorted values. Throws Error(empty_input).
double wasserstein_1d(std::span<const double> a, std::span<const double> b);

struct DistributionDistances {
  double d_rho = 0;   // per-structure mass densities
  double d_elem = 0;  // pooled atomic numbers
};

// Samples min(1000, |gen|) structures without replacement (seeded) and
// compares against the full reference set. Throws Error(empty_input) when
// either side is empty.
DistributionDistances distribution_distances(const std::vector<const CrystalStructure*>& gen,
                                             const std::vector<const CrystalStructure*>& ref,
                                             std::uint64_t seed);

struct UnFlags {
  bool excluded = false;  // single-element structure, outside UN accounting
  bool unique = false;
  bool novel = false;
};

struct UniquenessNovelty {
  std::vector<UnFlags> flags;  // parallel to gen
  int n_unique = 0;
  int n_novel = 0;
  int n_unique_and_novel = 0;
};

// Uniqueness within the generated set and novelty against the training set,
// both restricted to same-chemical-system comparisons (grouping changes cost,
// not outcomes). set use_grouping=false to force the quadratic scan in tests.
UniquenessNovelty uniqueness_novelty(const std::vector<const CrystalStructure*>& gen,
                                     const std::vector<const CrystalStructure*>& train,
                                     const MatcherTolerances& tol = {},
                                     bool use_grouping = true);

struct MetricsReport {
  int n_total = 0;
  int n_prefilter_pass = 0;
  double structural_valid_pct = 0;  // percentages over n_total
  double chemical_valid_pct = 0;
  double d_rho = std::numeric_limits<double>::quiet_NaN();  // NaN when undefined
  double d_elem = std::numeric_limits<double>::quiet_NaN();
  double unique_pct = 0;
  double novel_pct = 0;
  double un_rate = 0;  // fraction, not percent
  std::map<std::string, int> skip_counts;  // prefilter reject histogram
  // Stage-2 stability rates come from external tooling; carried as nullable
  // pass-through fields.
  std::optional<double> stable_in_un, metastable_in_un, sun, msun;
};

struct EvaluateOptions {
  MatcherTolerances tol;
  std::int64_t charge_budget = kChargeEnumBudget;
};

// Full Stage-1 evaluation: every *.cif in gen_dir is a candidate (n_total =
// file count); ref/train may each be a CIF directory or a CSV dataset.
MetricsReport evaluate_batch(const std::string& gen_dir, const std::string& ref_path,
                             const std::string& train_path, std::uint64_t seed,
                             const EvaluateOptions& opts = {});

// Fixed-order key = value text; nullable fields serialize as "null", NaN
// distances as "nan". parse_report inverts serialize_report exactly.
std::string serialize_report(const MetricsReport& m);
MetricsReport parse_report(const std::string& text);

}  // namespace xtal
