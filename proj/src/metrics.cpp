#include "xtal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>

#include "xtal/dataset.hpp"
#include "xtal/elements.hpp"
#include "xtal/errors.hpp"
#include "xtal/lattice.hpp"
#include "xtal/rng.hpp"

namespace xtal {
namespace fs = std::filesystem;

PrefilterOutcome prefilter(const ParsedCrystal& candidate) {
  for (int z : candidate.species)
    if (z < 1 || z > kPrefilterMaxZ) return {std::nullopt, "atomic_number_range"};
  if (!(candidate.params.a > 0) || !(candidate.params.b > 0) || !(candidate.params.c > 0))
    return {std::nullopt, "lattice_length"};
  for (double v : {candidate.params.a, candidate.params.b, candidate.params.c,
                   candidate.params.alpha, candidate.params.beta, candidate.params.gamma})
    if (!std::isfinite(v)) return {std::nullopt, "non_finite"};
  for (const auto& fc : candidate.frac_coords)
    if (!fc.allFinite()) return {std::nullopt, "non_finite"};

  CrystalStructure s;
  try {
    s.lattice = lattice_from_params(candidate.params);
  } catch (const Error&) {
    return {std::nullopt, "not_constructible"};
  }
  s.species = candidate.species;
  s.frac_coords.reserve(candidate.frac_coords.size());
  for (const auto& fc : candidate.frac_coords) s.frac_coords.push_back(wrap_frac(fc));

  if (cell_volume(s.lattice) < kMinVolume) return {std::nullopt, "min_volume"};
  return {std::move(s), ""};
}

bool structural_validity(const CrystalStructure& s) {
  if (cell_volume(s.lattice) < kMinVolume) return false;
  if (s.num_sites() == 0) return false;
  return min_periodic_distance(s.lattice, s.frac_coords) >= kMinAtomDistance;
}

namespace {

struct ChargeSearch {
  // Per distinct element: count in the cell, candidate states, electronegativity.
  struct Entry {
    int count = 0;
    std::vector<int> states;
    double en = 0;
  };
  std::vector<Entry> entries;
  std::int64_t budget = 0;

  // Suffix extremes of achievable partial sums, for pruning.
  std::vector<long> suffix_min, suffix_max;

  bool dfs(size_t depth, long sum, double max_pos_en, double min_neg_en) {
    if (budget-- <= 0) return false;
    if (depth == entries.size())
      return sum == 0 && max_pos_en <= min_neg_en;
    if (sum + suffix_min[depth] > 0 || sum + suffix_max[depth] < 0) return false;
    const Entry& e = entries[depth];
    for (int state : e.states) {
      double pos = max_pos_en, neg = min_neg_en;
      if (state > 0) pos = std::max(pos, e.en);
      if (state < 0) neg = std::min(neg, e.en);
      if (pos > neg) continue;  // electronegativity ordering already violated
      if (dfs(depth + 1, sum + static_cast<long>(e.count) * state, pos, neg)) return true;
      if (budget <= 0) return false;
    }
    return false;
  }
};

}  // namespace

bool compositional_validity(const CrystalStructure& s, std::int64_t budget) {
  std::map<int, int> comp;
  for (int z : s.species) ++comp[z];
  if (comp.empty()) return false;

  bool all_metal = true;
  for (const auto& [z, count] : comp)
    if (!element_info(z).is_metal) {
      all_metal = false;
      break;
    }
  if (all_metal) return true;

  ChargeSearch search;
  search.budget = budget;
  for (const auto& [z, count] : comp) {
    const auto& e = element_info(z);
    if (e.oxidation_states.empty()) return false;  // no assignable state
    ChargeSearch::Entry entry;
    entry.count = count;
    entry.states = e.oxidation_states;
    entry.en = e.electronegativity.value_or(std::numeric_limits<double>::infinity());
    search.entries.push_back(std::move(entry));
  }

  const size_t k = search.entries.size();
  search.suffix_min.assign(k + 1, 0);
  search.suffix_max.assign(k + 1, 0);
  for (size_t i = k; i-- > 0;) {
    const auto& e = search.entries[i];
    long lo = static_cast<long>(e.count) * *std::min_element(e.states.begin(), e.states.end());
    long hi = static_cast<long>(e.count) * *std::max_element(e.states.begin(), e.states.end());
    search.suffix_min[i] = search.suffix_min[i + 1] + lo;
    search.suffix_max[i] = search.suffix_max[i + 1] + hi;
  }
  return search.dfs(0, 0, -std::numeric_limits<double>::infinity(),
                    std::numeric_limits<double>::infinity());
}

double wasserstein_1d(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty())
    throw_data("empty_input", "wasserstein_1d needs non-empty samples");
  std::vector<double> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const std::int64_t n = static_cast<std::int64_t>(sa.size());
  const std::int64_t m = static_cast<std::int64_t>(sb.size());
  if (n == m) {  // mean absolute difference of sorted values, exactly
    double total = 0.0;
    for (size_t k = 0; k < sa.size(); ++k) total += std::abs(sa[k] - sb[k]);
    return total / static_cast<double>(n);
  }
  // Walk the merged quantile breakpoints i/n and j/m; on each segment the
  // quantile functions are the constants sa[i], sb[j]. Breakpoint comparison
  // is done in integers so equal quantiles advance both sides exactly.
  double total = 0.0;
  std::int64_t i = 0, j = 0;
  double pos = 0.0;
  while (i < n && j < m) {
    std::int64_t lhs = (i + 1) * m, rhs = (j + 1) * n;
    double next = static_cast<double>(std::min(lhs, rhs)) / static_cast<double>(n * m);
    total += (next - pos) * std::abs(sa[static_cast<size_t>(i)] - sb[static_cast<size_t>(j)]);
    pos = next;
    if (lhs <= rhs) ++i;
    if (rhs <= lhs) ++j;
  }
  return total;
}

DistributionDistances distribution_distances(const std::vector<const CrystalStructure*>& gen,
                                             const std::vector<const CrystalStructure*>& ref,
                                             std::uint64_t seed) {
  if (gen.empty() || ref.empty())
    throw_data("empty_input", "distribution distances need non-empty generated and reference sets");

  // Partial Fisher-Yates: the first `take` entries are a uniform
  // without-replacement sample.
  std::vector<size_t> order(gen.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  const size_t take = std::min<size_t>(1000, gen.size());
  for (size_t i = 0; i < take; ++i) {
    size_t j = i + static_cast<size_t>(rng.uniform_int(
                       0, static_cast<std::int64_t>(order.size() - i) - 1));
    std::swap(order[i], order[j]);
  }

  std::vector<double> gen_density, ref_density, gen_z, ref_z;
  for (size_t i = 0; i < take; ++i) {
    const CrystalStructure* s = gen[order[i]];
    gen_density.push_back(mass_density(*s));
    for (int z : s->species) gen_z.push_back(static_cast<double>(z));
  }
  for (const CrystalStructure* s : ref) {
    ref_density.push_back(mass_density(*s));
    for (int z : s->species) ref_z.push_back(static_cast<double>(z));
  }

  DistributionDistances out;
  out.d_rho = wasserstein_1d(gen_density, ref_density);
  out.d_elem = wasserstein_1d(gen_z, ref_z);
  return out;
}

UniquenessNovelty uniqueness_novelty(const std::vector<const CrystalStructure*>& gen,
                                     const std::vector<const CrystalStructure*>& train,
                                     const MatcherTolerances& tol, bool use_grouping) {
  UniquenessNovelty out;
  out.flags.assign(gen.size(), {});

  auto system_key = [&](const CrystalStructure& s) {
    return use_grouping ? chemical_system(s) : std::string("all");
  };

  std::map<std::string, std::vector<size_t>> gen_groups;
  for (size_t i = 0; i < gen.size(); ++i) gen_groups[system_key(*gen[i])].push_back(i);
  std::map<std::string, std::vector<const CrystalStructure*>> train_groups;
  for (const CrystalStructure* s : train) train_groups[system_key(*s)].push_back(s);

  for (size_t i = 0; i < gen.size(); ++i) {
    std::set<int> elems(gen[i]->species.begin(), gen[i]->species.end());
    if (elems.size() <= 1) {
      out.flags[i].excluded = true;
      continue;
    }
    const auto& group = gen_groups[system_key(*gen[i])];
    bool unique = true;
    for (size_t j : group) {
      if (j == i) continue;
      if (structures_match(*gen[i], *gen[j], tol)) {
        unique = false;
        break;
      }
    }
    bool novel = true;
    auto it = train_groups.find(system_key(*gen[i]));
    if (it != train_groups.end()) {
      for (const CrystalStructure* ts : it->second) {
        if (structures_match(*gen[i], *ts, tol)) {
          novel = false;
          break;
        }
      }
    }
    out.flags[i].unique = unique;
    out.flags[i].novel = novel;
    if (unique) ++out.n_unique;
    if (novel) ++out.n_novel;
    if (unique && novel) ++out.n_unique_and_novel;
  }
  return out;
}

namespace {

std::vector<CrystalStructure> load_reference_set(const std::string& path) {
  auto records = load_structure_records(path);
  std::vector<CrystalStructure> out;
  for (auto& rec : records)
    if (rec.structure) out.push_back(std::move(*rec.structure));
  if (out.empty())
    throw_data("empty_dataset", "no readable structures in '" + path + "'");
  return out;
}

}  // namespace

MetricsReport evaluate_batch(const std::string& gen_dir, const std::string& ref_path,
                             const std::string& train_path, std::uint64_t seed,
                             const EvaluateOptions& opts) {
  if (!fs::is_directory(gen_dir))
    throw_data("io_error", "generated-structure path '" + gen_dir + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(gen_dir))
    if (entry.is_regular_file() && entry.path().extension() == ".cif")
      files.push_back(entry.path());
  std::sort(files.begin(), files.end());

  MetricsReport report;
  report.n_total = static_cast<int>(files.size());
  if (report.n_total == 0) {
    report.d_rho = std::numeric_limits<double>::quiet_NaN();
    report.d_elem = std::numeric_limits<double>::quiet_NaN();
    return report;
  }

  std::vector<CrystalStructure> passed;
  int n_struct_valid = 0, n_chem_valid = 0;
  std::vector<const CrystalStructure*> both_valid;
  std::vector<char> struct_ok, chem_ok;
  for (const auto& f : files) {
    PrefilterOutcome outcome;
    try {
      outcome = prefilter(parse_cif(read_text_file(f.string())));
    } catch (const Error& e) {
      ++report.skip_counts[e.code()];
      continue;
    }
    if (!outcome.passed()) {
      ++report.skip_counts[outcome.reason];
      continue;
    }
    passed.push_back(std::move(*outcome.structure));
  }
  report.n_prefilter_pass = static_cast<int>(passed.size());

  for (const auto& s : passed) {
    bool sv = structural_validity(s);
    bool cv = compositional_validity(s, opts.charge_budget);
    struct_ok.push_back(sv);
    chem_ok.push_back(cv);
    if (sv) ++n_struct_valid;
    if (cv) ++n_chem_valid;
  }
  for (size_t i = 0; i < passed.size(); ++i)
    if (struct_ok[i] && chem_ok[i]) both_valid.push_back(&passed[i]);

  const double denom = static_cast<double>(report.n_total);
  report.structural_valid_pct = 100.0 * n_struct_valid / denom;
  report.chemical_valid_pct = 100.0 * n_chem_valid / denom;

  auto ref = load_reference_set(ref_path);
  auto train = load_reference_set(train_path);

  if (!both_valid.empty()) {
    std::vector<const CrystalStructure*> ref_ptrs;
    ref_ptrs.reserve(ref.size());
    for (const auto& s : ref) ref_ptrs.push_back(&s);
    auto dist = distribution_distances(both_valid, ref_ptrs, seed);
    report.d_rho = dist.d_rho;
    report.d_elem = dist.d_elem;
  }

  std::vector<const CrystalStructure*> gen_ptrs;
  gen_ptrs.reserve(passed.size());
  for (const auto& s : passed) gen_ptrs.push_back(&s);
  std::vector<const CrystalStructure*> train_ptrs;
  train_ptrs.reserve(train.size());
  for (const auto& s : train) train_ptrs.push_back(&s);
  auto un = uniqueness_novelty(gen_ptrs, train_ptrs, opts.tol);
  report.unique_pct = 100.0 * un.n_unique / denom;
  report.novel_pct = 100.0 * un.n_novel / denom;
  report.un_rate = static_cast<double>(un.n_unique_and_novel) / denom;
  return report;
}

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_nullable(const std::optional<double>& v) {
  return v ? fmt_double(*v) : "null";
}

}  // namespace

std::string serialize_report(const MetricsReport& m) {
  std::ostringstream out;
  out << "n_total = " << m.n_total << "\n";
  out << "n_prefilter_pass = " << m.n_prefilter_pass << "\n";
  out << "structural_valid_pct = " << fmt_double(m.structural_valid_pct) << "\n";
  out << "chemical_valid_pct = " << fmt_double(m.chemical_valid_pct) << "\n";
  out << "d_rho = " << fmt_double(m.d_rho) << "\n";
  out << "d_elem = " << fmt_double(m.d_elem) << "\n";
  out << "unique_pct = " << fmt_double(m.unique_pct) << "\n";
  out << "novel_pct = " << fmt_double(m.novel_pct) << "\n";
  out << "un_rate = " << fmt_double(m.un_rate) << "\n";
  out << "stable_in_un = " << fmt_nullable(m.stable_in_un) << "\n";
  out << "metastable_in_un = " << fmt_nullable(m.metastable_in_un) << "\n";
  out << "sun = " << fmt_nullable(m.sun) << "\n";
  out << "msun = " << fmt_nullable(m.msun) << "\n";
  for (const auto& [reason, count] : m.skip_counts)
    out << "skip." << reason << " = " << count << "\n";
  return out.str();
}

MetricsReport parse_report(const std::string& text) {
  MetricsReport m;
  std::istringstream in(text);
  std::string line;
  auto parse_opt = [](const std::string& v) -> std::optional<double> {
    if (v == "null") return std::nullopt;
    return std::stod(v);
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw_data("parse_error", "bad report line: " + line);
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    auto trim = [](std::string& s) {
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.erase(0, 1);
      while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.pop_back();
    };
    trim(key);
    trim(val);
    try {
      if (key == "n_total") m.n_total = std::stoi(val);
      else if (key == "n_prefilter_pass") m.n_prefilter_pass = std::stoi(val);
      else if (key == "structural_valid_pct") m.structural_valid_pct = std::stod(val);
      else if (key == "chemical_valid_pct") m.chemical_valid_pct = std::stod(val);
      else if (key == "d_rho") m.d_rho = std::stod(val);
      else if (key == "d_elem") m.d_elem = std::stod(val);
      else if (key == "unique_pct") m.unique_pct = std::stod(val);
      else if (key == "novel_pct") m.novel_pct = std::stod(val);
      else if (key == "un_rate") m.un_rate = std::stod(val);
      else if (key == "stable_in_un") m.stable_in_un = parse_opt(val);
      else if (key == "metastable_in_un") m.metastable_in_un = parse_opt(val);
      else if (key == "sun") m.sun = parse_opt(val);
      else if (key == "msun") m.msun = parse_opt(val);
      else if (key.rfind("skip.", 0) == 0) m.skip_counts[key.substr(5)] = std::stoi(val);
      else throw_data("parse_error", "unknown report key '" + key + "'");
    } catch (const std::invalid_argument&) {
      throw_data("parse_error", "bad value for report key '" + key + "'");
    }
  }
  return m;
}

}  // namespace xtal
