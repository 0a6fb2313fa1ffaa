#pragma once

#include <cstdint>
#include <random>

namespace sft {

// Every stochastic component draws from this engine so a seed reproduces
// dropout masks, initialization, splits and sampling within one build.
using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

}  // namespace sft
