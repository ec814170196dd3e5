#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xtal/tensor.hpp"

namespace xtal {

enum class Variant { Unified, DualStream };

inline const char* variant_name(Variant v) {
  return v == Variant::Unified ? "unified" : "dual";
}
std::optional<Variant> variant_from_name(std::string_view name);

struct ModelConfig {
  Variant variant = Variant::Unified;
  AtomMode mode = AtomMode::TwoD;
  int hidden_dim = 64;
  int num_layers = 4;  // unified depth
  int num_heads = 4;
  int mlp_ratio = 4;
  int atom_layers = 2;     // dual-stream cascade
  int lattice_layers = 1;
  int joint_layers = 1;

  static ModelConfig desk(Variant v = Variant::Unified, AtomMode m = AtomMode::TwoD);
  static ModelConfig full(Variant v = Variant::Unified, AtomMode m = AtomMode::TwoD);

  int feature_dim() const { return xtal::feature_dim(mode); }
  int atom_tokens() const { return kMaxAtoms; }
  int lattice_tokens() const { return 3; }
  int tokens() const { return kMaxAtoms + 3; }

  // Throws Error(invalid_config) on impossible dimensions (odd hidden size,
  // heads not dividing it, non-positive depths).
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

struct ParamSpec {
  std::string name;
  int rows = 0, cols = 0;
  bool zero_init = false;  // AdaLN modulation layers and output heads
};

// Deterministic parameter inventory for a config; cheap even at full scale
// (shapes only, nothing allocated).
std::vector<ParamSpec> parameter_layout(const ModelConfig& cfg);
std::int64_t parameter_count(const ModelConfig& cfg);

struct ModelParameters {
  ModelConfig config;
  std::vector<ParamSpec> layout;
  std::vector<Eigen::MatrixXd> values;
  std::vector<Eigen::MatrixXd> grads;  // same shapes, used by training
  std::unordered_map<std::string, int> index;

  // Zero-initialized modulation/heads, N(0, 0.02) elsewhere, biases zero.
  // Entries are drawn in layout order, row-major within each tensor.
  static ModelParameters init(const ModelConfig& cfg, std::uint64_t seed);

  const Eigen::MatrixXd& at(const std::string& name) const;
  Eigen::MatrixXd& at(const std::string& name);
  void zero_grads();
  std::int64_t count() const;
};

struct NetOutput {
  Mat3 lattice = Mat3::Zero();
  Eigen::MatrixXd atoms;  // kMaxAtoms x F
};

// Optional inspection hook for tests: row sums of every attention softmax.
struct ForwardTrace {
  std::vector<Eigen::VectorXd> softmax_row_sums;
};

// Sinusoidal features of the (integer) diffusion step: first half sines,
// second half cosines, frequency 10000^(-k/half).
Eigen::RowVectorXd time_features(int t, int dim);

// Batched inference forward. All states share the time step t (which is how
// sampling uses it); gradients are not tracked. The result equals the
// training-tape forward to roundoff for each item independently.
std::vector<NetOutput> forward_batch(const ModelParameters& params,
                                     std::span<const CrystalTensor> states, int t,
                                     ForwardTrace* trace = nullptr);

NetOutput forward_one(const ModelParameters& params, const CrystalTensor& state, int t);

}  // namespace xtal
