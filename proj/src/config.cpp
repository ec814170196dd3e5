#include "xtal/config.hpp"

#include <cctype>
#include <cstdint>
#include <cstdio>
#include <sstream>

#include "xtal/cif.hpp"
#include "xtal/errors.hpp"

namespace xtal {
namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

int parse_int(const std::string& key, const std::string& val) {
  try {
    size_t pos = 0;
    int v = std::stoi(val, &pos);
    if (pos != val.size()) throw std::invalid_argument(val);
    return v;
  } catch (const std::exception&) {
    throw_usage("bad_value", "config key '" + key + "' needs an integer, got '" + val + "'");
  }
}

double parse_double(const std::string& key, const std::string& val) {
  try {
    size_t pos = 0;
    double v = std::stod(val, &pos);
    if (pos != val.size()) throw std::invalid_argument(val);
    return v;
  } catch (const std::exception&) {
    throw_usage("bad_value", "config key '" + key + "' needs a number, got '" + val + "'");
  }
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

RunConfig RunConfig::desk() { return RunConfig{}; }

RunConfig RunConfig::full() {
  RunConfig c;
  c.model = ModelConfig::full(c.model.variant, c.model.mode);
  c.epochs = 50000;
  c.batch_size = 256;
  c.lr = 1e-4;
  c.checkpoint_every = 250;
  c.samples = 1000;
  return c;
}

LossWeights RunConfig::loss_weights() const {
  LossWeights w = LossWeights::defaults(model.mode);
  w.lambda_atoms = lambda_atoms;
  return w;
}

void RunConfig::validate() const {
  model.validate();
  if (steps < 1) throw_usage("invalid_config", "steps must be >= 1");
  if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
    throw_usage("invalid_config", "need 0 < beta_start <= beta_end < 1");
  if (!(lambda_atoms >= 0.0)) throw_usage("invalid_config", "lambda_atoms must be >= 0");
  if (!(sigma > 0.0)) throw_usage("invalid_config", "sigma must be > 0");
  if (epochs < 1) throw_usage("invalid_config", "epochs must be >= 1");
  if (batch_size < 1) throw_usage("invalid_config", "batch_size must be >= 1");
  if (!(lr > 0.0)) throw_usage("invalid_config", "lr must be > 0");
  if (checkpoint_every < 0) throw_usage("invalid_config", "checkpoint_every must be >= 0");
  if (samples < 1) throw_usage("invalid_config", "samples must be >= 1");
  if (!(matcher.ltol > 0.0 && matcher.stol > 0.0 && matcher.angle_tol > 0.0))
    throw_usage("invalid_config", "matcher tolerances must be > 0");
  if (!(alpha > 0.0)) throw_usage("invalid_config", "alpha must be > 0");
}

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  if (key == "variant") {
    auto v = variant_from_name(value);
    if (!v) throw_usage("bad_value", "variant must be 'unified' or 'dual', got '" + value + "'");
    cfg.model.variant = *v;
  } else if (key == "mode") {
    auto m = atom_mode_from_name(value);
    if (!m) throw_usage("bad_value", "mode must be '2d' or '1d', got '" + value + "'");
    cfg.model.mode = *m;
  } else if (key == "hidden_dim") cfg.model.hidden_dim = parse_int(key, value);
  else if (key == "num_layers") cfg.model.num_layers = parse_int(key, value);
  else if (key == "num_heads") cfg.model.num_heads = parse_int(key, value);
  else if (key == "mlp_ratio") cfg.model.mlp_ratio = parse_int(key, value);
  else if (key == "atom_layers") cfg.model.atom_layers = parse_int(key, value);
  else if (key == "lattice_layers") cfg.model.lattice_layers = parse_int(key, value);
  else if (key == "joint_layers") cfg.model.joint_layers = parse_int(key, value);
  else if (key == "steps") cfg.steps = parse_int(key, value);
  else if (key == "beta_start") cfg.beta_start = parse_double(key, value);
  else if (key == "beta_end") cfg.beta_end = parse_double(key, value);
  else if (key == "lambda_atoms") cfg.lambda_atoms = parse_double(key, value);
  else if (key == "sigma") cfg.sigma = parse_double(key, value);
  else if (key == "epochs") cfg.epochs = parse_int(key, value);
  else if (key == "batch_size") cfg.batch_size = parse_int(key, value);
  else if (key == "lr") cfg.lr = parse_double(key, value);
  else if (key == "checkpoint_every") cfg.checkpoint_every = parse_int(key, value);
  else if (key == "samples") cfg.samples = parse_int(key, value);
  else if (key == "matcher_ltol") cfg.matcher.ltol = parse_double(key, value);
  else if (key == "matcher_stol") cfg.matcher.stol = parse_double(key, value);
  else if (key == "matcher_angle_tol") cfg.matcher.angle_tol = parse_double(key, value);
  else if (key == "alpha") cfg.alpha = parse_double(key, value);
  else throw_usage("unknown_key", "unknown config key '" + key + "'");
}

RunConfig parse_config(const std::string& text, const RunConfig& base) {
  RunConfig cfg = base;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw_usage("parse_error",
                  "config line " + std::to_string(lineno) + " is not 'key = value': " + t);
    apply_override(cfg, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return cfg;
}

RunConfig load_config(const std::string& path, const RunConfig& base) {
  return parse_config(read_text_file(path), base);
}

std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream out;
  out << "alpha = " << fmt(cfg.alpha) << "\n";
  out << "atom_layers = " << cfg.model.atom_layers << "\n";
  out << "batch_size = " << cfg.batch_size << "\n";
  out << "beta_end = " << fmt(cfg.beta_end) << "\n";
  out << "beta_start = " << fmt(cfg.beta_start) << "\n";
  out << "checkpoint_every = " << cfg.checkpoint_every << "\n";
  out << "epochs = " << cfg.epochs << "\n";
  out << "hidden_dim = " << cfg.model.hidden_dim << "\n";
  out << "joint_layers = " << cfg.model.joint_layers << "\n";
  out << "lambda_atoms = " << fmt(cfg.lambda_atoms) << "\n";
  out << "lattice_layers = " << cfg.model.lattice_layers << "\n";
  out << "lr = " << fmt(cfg.lr) << "\n";
  out << "matcher_angle_tol = " << fmt(cfg.matcher.angle_tol) << "\n";
  out << "matcher_ltol = " << fmt(cfg.matcher.ltol) << "\n";
  out << "matcher_stol = " << fmt(cfg.matcher.stol) << "\n";
  out << "mlp_ratio = " << cfg.model.mlp_ratio << "\n";
  out << "mode = " << atom_mode_name(cfg.model.mode) << "\n";
  out << "num_heads = " << cfg.model.num_heads << "\n";
  out << "num_layers = " << cfg.model.num_layers << "\n";
  out << "samples = " << cfg.samples << "\n";
  out << "sigma = " << fmt(cfg.sigma) << "\n";
  out << "steps = " << cfg.steps << "\n";
  out << "variant = " << variant_name(cfg.model.variant) << "\n";
  return out.str();
}

std::string config_hash(const RunConfig& cfg) {
  std::string text = serialize_config(cfg);
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace xtal
