#pragma once

#include <cstdint>
#include <random>

namespace beamcode {

using Rng = std::mt19937_64;

/// Counter-based per-trial stream: trial t of a run seeded with s draws from
/// mt19937_64(s + t). Trials can then execute on any thread in any order and
/// still reproduce bit-identical results.
inline Rng trial_rng(std::uint64_t master_seed, std::uint64_t trial_index) {
  return Rng{master_seed + trial_index};
}

}  // namespace beamcode
