#pragma once

#include <string>

#include "xtal/diffusion.hpp"
#include "xtal/encoding.hpp"
#include "xtal/matcher.hpp"
#include "xtal/model.hpp"

namespace xtal {

// Everything a run needs, resolvable from (preset, config file, flag
// overrides) in that order. The canonical serialization below is what gets
// hashed and embedded into artifacts, so two runs agree on their config iff
// their hashes agree.
struct RunConfig {
  ModelConfig model;

  int steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  double lambda_atoms = 100.0;
  double sigma = 0.1;

  int epochs = 200;
  int batch_size = 16;
  double lr = 2e-3;
  int checkpoint_every = 50;

  int samples = 128;
  MatcherTolerances matcher;
  double alpha = 1.0;

  static RunConfig desk();
  // Full-scale settings: d=512, L=18, batch 256, lr 1e-4, checkpoint every
  // 250 epochs with 1000-sample evaluations. Multi-day on one core; gated
  // behind an explicit flag in the CLI.
  static RunConfig full();

  NoiseSchedule schedule() const { return NoiseSchedule::linear(steps, beta_start, beta_end); }
  LossWeights loss_weights() const;
  DecoderConfig decoder() const { return {sigma, 1.0 / 7.0, 1.0 / 18.0}; }

  // Throws Error(invalid_config) on out-of-range values.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

// Flat `key = value` text, one pair per line, '#' full-line comments. Every
// key is optional; unspecified keys keep the base value. Unknown keys and
// unparsable values are usage errors.
RunConfig parse_config(const std::string& text, const RunConfig& base = RunConfig::desk());
RunConfig load_config(const std::string& path, const RunConfig& base = RunConfig::desk());

// Single `key=value` override (the CLI's --set flag). Same key set as the
// file format.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical form: sorted keys, one per line, doubles at full round-trip
// precision. parse_config(serialize_config(c)) == c.
std::string serialize_config(const RunConfig& cfg);

// FNV-1a 64 of the canonical serialization, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace xtal
