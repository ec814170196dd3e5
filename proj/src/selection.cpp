#include "xtal/selection.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "xtal/errors.hpp"

namespace xtal {
namespace {

double clamp01(double x) {
  if (std::isnan(x)) return 0.0;
  return std::clamp(x, 0.0, 1.0);
}

}  // namespace

double quality_composite(const MetricsReport& m) {
  double s_struct = clamp01((m.structural_valid_pct / 100.0 - 0.95) / 0.05);
  double s_chem = clamp01((m.chemical_valid_pct / 100.0 - 0.80) / 0.20);
  double s_density = clamp01((1.0 - m.d_rho) / 0.9);
  double s_elements = clamp01((1.0 - m.d_elem) / 0.9);
  return std::pow(s_struct * s_chem * s_density * s_elements, 0.25);
}

double balance_score(const MetricsReport& m, double alpha) {
  if (!(alpha > 0.0))
    throw_usage("invalid_alpha", "balance score exponent must be positive");
  return m.un_rate * std::pow(quality_composite(m), alpha);
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::Early: return "early";
    case Phase::Mid: return "mid";
    case Phase::Late: return "late";
  }
  return "?";
}

Phase phase_of(int epoch, int total_epochs) {
  if (total_epochs < 1 || epoch < 1 || epoch > total_epochs)
    throw_data("out_of_range", "phase_of needs 1 <= epoch <= total_epochs");
  long e = 10L * epoch;
  if (e <= 3L * total_epochs) return Phase::Early;
  if (e <= 6L * total_epochs) return Phase::Mid;
  return Phase::Late;
}

SelectionResult select_checkpoints(std::span<const std::pair<int, MetricsReport>> history,
                                   int total_epochs, double alpha) {
  if (history.empty())
    throw_data("empty_history", "checkpoint selection needs a non-empty history");
  SelectionResult out;
  for (const auto& [epoch, metrics] : history) {
    if (epoch > total_epochs)
      throw_data("out_of_range", "history epoch " + std::to_string(epoch) +
                                     " exceeds total_epochs " + std::to_string(total_epochs));
    CheckpointRecord rec;
    rec.epoch = epoch;
    rec.metrics = metrics;
    rec.balance_score = balance_score(metrics, alpha);
    rec.phase = phase_of(epoch, total_epochs);
    auto& slot = rec.phase == Phase::Early ? out.early
               : rec.phase == Phase::Mid   ? out.mid
                                           : out.late;
    // Strict improvement required, so equal scores keep the earlier epoch
    // (history arrives in epoch order; out-of-order input is sorted below).
    if (!slot || rec.balance_score > slot->balance_score ||
        (rec.balance_score == slot->balance_score && rec.epoch < slot->epoch))
      slot = rec;
  }
  return out;
}

std::vector<double> moving_average(std::span<const double> series, int window) {
  if (window < 1)
    throw_usage("invalid_window", "moving average window must be >= 1");
  std::vector<double> out;
  out.reserve(series.size());
  double running = 0.0;
  for (size_t i = 0; i < series.size(); ++i) {
    running += series[i];
    if (i >= static_cast<size_t>(window)) running -= series[i - static_cast<size_t>(window)];
    size_t count = std::min<size_t>(static_cast<size_t>(window), i + 1);
    out.push_back(running / static_cast<double>(count));
  }
  return out;
}

namespace {

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void append_history(const std::string& path, int epoch, const MetricsReport& m,
                    double balance) {
  std::ostringstream line;
  line << "epoch=" << epoch;
  line << " n_total=" << m.n_total;
  line << " n_prefilter_pass=" << m.n_prefilter_pass;
  line << " structural_valid_pct=" << fmt_double(m.structural_valid_pct);
  line << " chemical_valid_pct=" << fmt_double(m.chemical_valid_pct);
  line << " d_rho=" << fmt_double(m.d_rho);
  line << " d_elem=" << fmt_double(m.d_elem);
  line << " unique_pct=" << fmt_double(m.unique_pct);
  line << " novel_pct=" << fmt_double(m.novel_pct);
  line << " un_rate=" << fmt_double(m.un_rate);
  line << " balance=" << fmt_double(balance);
  line << "\n";
  std::ofstream out(path, std::ios::app);
  if (!out) throw_data("io_error", "cannot open history log '" + path + "'");
  out << line.str();
  if (!out.flush()) throw_data("io_error", "write failure on history log '" + path + "'");
}

std::vector<std::pair<int, MetricsReport>> read_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw_data("io_error", "cannot open history log '" + path + "'");
  std::vector<std::pair<int, MetricsReport>> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    int epoch = -1;
    MetricsReport m;
    std::istringstream fields(line);
    std::string field;
    while (fields >> field) {
      auto eq = field.find('=');
      if (eq == std::string::npos)
        throw_data("parse_error",
                   "bad history field '" + field + "' on line " + std::to_string(lineno));
      std::string key = field.substr(0, eq);
      std::string val = field.substr(eq + 1);
      try {
        if (key == "epoch") epoch = std::stoi(val);
        else if (key == "n_total") m.n_total = std::stoi(val);
        else if (key == "n_prefilter_pass") m.n_prefilter_pass = std::stoi(val);
        else if (key == "structural_valid_pct") m.structural_valid_pct = std::stod(val);
        else if (key == "chemical_valid_pct") m.chemical_valid_pct = std::stod(val);
        else if (key == "d_rho") m.d_rho = std::stod(val);
        else if (key == "d_elem") m.d_elem = std::stod(val);
        else if (key == "unique_pct") m.unique_pct = std::stod(val);
        else if (key == "novel_pct") m.novel_pct = std::stod(val);
        else if (key == "un_rate") m.un_rate = std::stod(val);
        else if (key == "balance") { /* recomputed by consumers */ }
        else throw_data("parse_error", "unknown history key '" + key + "'");
      } catch (const std::invalid_argument&) {
        throw_data("parse_error", "bad value in history field '" + field + "'");
      }
    }
    if (epoch < 0)
      throw_data("parse_error", "history line " + std::to_string(lineno) + " missing epoch");
    out.emplace_back(epoch, std::move(m));
  }
  return out;
}

}  // namespace xtal
