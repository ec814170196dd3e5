#pragma once

#include <optional>

#include "xtal/diffusion.hpp"
#include "xtal/model.hpp"

namespace xtal {

struct GenerateResult {
  // One slot per requested sample; nullopt marks a sample that decoded to
  // zero atoms (dropped, but still counted by every downstream denominator).
  std::vector<std::optional<CrystalStructure>> samples;
  int num_kept = 0;
  int num_dropped = 0;
};

// Reverse diffusion from pure noise. Every sample runs on its own RNG stream
// (derived from seed and the sample index), so results are independent of
// batch size, of which other samples run alongside, and of num_threads
// (samples are sharded contiguously across threads). Throws
// Error(non_finite) if the network output or state diverges.
GenerateResult generate(const ModelParameters& params, const NoiseSchedule& sched,
                        const DecoderConfig& decoder, int num_samples, std::uint64_t seed,
                        int num_threads = 1);

}  // namespace xtal
