#include "xtal/sampler.hpp"

#include <string>
#include <thread>

#include "xtal/errors.hpp"

namespace xtal {
namespace {

// One contiguous shard of the batch, fully independent of the others: each
// sample draws from its own derived stream, so shard boundaries cannot change
// the numbers.
void run_shard(const ModelParameters& params, const NoiseSchedule& sched, int lo, int hi,
               std::uint64_t seed, std::vector<CrystalTensor>& all_states,
               std::exception_ptr& error) {
  try {
    const AtomMode mode = params.config.mode;
    const int n = hi - lo;
    std::vector<Rng> streams;
    streams.reserve(static_cast<size_t>(n));
    std::vector<CrystalTensor> states;
    states.reserve(static_cast<size_t>(n));
    for (int i = lo; i < hi; ++i) {
      streams.emplace_back(Rng::derive(seed, static_cast<std::uint64_t>(i)));
      states.push_back(gaussian_like(mode, streams.back()));
    }

    for (int t = sched.steps; t >= 1; --t) {
      auto eps_hat = forward_batch(params, states, t);
      for (int i = 0; i < n; ++i) {
        const auto& out = eps_hat[static_cast<size_t>(i)];
        if (!out.lattice.allFinite() || !out.atoms.allFinite())
          throw_numeric("non_finite",
                        "network output diverged at step " + std::to_string(t));
        CrystalTensor pred = states[static_cast<size_t>(i)];
        pred.lattice = out.lattice;
        pred.atoms = out.atoms;
        states[static_cast<size_t>(i)] =
            ddpm_step(states[static_cast<size_t>(i)], pred, t, sched,
                      streams[static_cast<size_t>(i)]);
        const auto& next = states[static_cast<size_t>(i)];
        if (!next.lattice.allFinite() || !next.atoms.allFinite())
          throw_numeric("non_finite",
                        "sample state diverged at step " + std::to_string(t));
      }
    }

    for (int i = 0; i < n; ++i)
      all_states[static_cast<size_t>(lo + i)] = std::move(states[static_cast<size_t>(i)]);
  } catch (...) {
    error = std::current_exception();
  }
}

}  // namespace

GenerateResult generate(const ModelParameters& params, const NoiseSchedule& sched,
                        const DecoderConfig& decoder, int num_samples, std::uint64_t seed,
                        int num_threads) {
  if (num_samples < 1) throw_usage("invalid_config", "sample count must be positive");
  if (num_threads < 1) throw_usage("invalid_config", "thread count must be positive");

  std::vector<CrystalTensor> states(static_cast<size_t>(num_samples));
  int shards = std::min(num_threads, num_samples);
  if (shards == 1) {
    std::exception_ptr error;
    run_shard(params, sched, 0, num_samples, seed, states, error);
    if (error) std::rethrow_exception(error);
  } else {
    std::vector<std::thread> workers;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(shards));
    int base = num_samples / shards, extra = num_samples % shards;
    int lo = 0;
    for (int w = 0; w < shards; ++w) {
      int hi = lo + base + (w < extra ? 1 : 0);
      workers.emplace_back(run_shard, std::cref(params), std::cref(sched), lo, hi, seed,
                           std::ref(states), std::ref(errors[static_cast<size_t>(w)]));
      lo = hi;
    }
    for (auto& w : workers) w.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  GenerateResult result;
  result.samples.reserve(static_cast<size_t>(num_samples));
  for (int i = 0; i < num_samples; ++i) {
    auto s = from_tensor(states[static_cast<size_t>(i)], decoder);
    if (s)
      ++result.num_kept;
    else
      ++result.num_dropped;
    result.samples.push_back(std::move(s));
  }
  return result;
}

}  // namespace xtal
