#pragma once

#include <cstdint>
#include <string>

#include "xtal/model.hpp"

namespace xtal {

struct CheckpointMeta {
  int epoch = 0;
  std::uint64_t seed = 0;
  std::string config_hash;  // hash of the run configuration
  std::string command;      // invocation that produced the file
};

// Binary format: magic, a JSON header carrying the model config and
// provenance, then named float32 tensors (row-major, little-endian). Loading
// revalidates every tensor name and shape against the header config and
// throws Error(checkpoint_mismatch) on any disagreement.
void save_checkpoint(const std::string& path, const ModelParameters& params,
                     const CheckpointMeta& meta);

std::pair<ModelParameters, CheckpointMeta> load_checkpoint(const std::string& path);

}  // namespace xtal
