#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <vector>

namespace convgame {

using Rng = std::mt19937_64;

/// Stream labels for seed derivation. Values are part of the reproducibility
/// contract; do not renumber.
enum class Stream : std::uint64_t {
  trial = 1,      // pair selection and roles
  agent = 2,      // per-agent decisions and presentation shuffles
  probe = 3,      // first-round bias probes
  micro = 4,      // micro-dynamics forward simulation
  bootstrap = 5,
  comprehension = 6,
  fallback = 7,   // LLM uniform fallback draws
};

/// Counter-based seed splitting: each path component is folded through
/// SplitMix64, so any (master, path) stream can be rebuilt in isolation.
std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path);

Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t a = 0, std::uint64_t b = 0);

/// Uniform integer in [0, n). The standard distributions are
/// implementation-defined, so bounded draws are done here to keep logs
/// identical across standard libraries.
std::size_t uniform_index(Rng& rng, std::size_t n);

/// Uniform double in [0, 1) with 53 random bits.
double uniform01(Rng& rng);

bool bernoulli(Rng& rng, double p);

/// Index drawn proportionally to non-negative weights.
std::size_t weighted_index(Rng& rng, std::span<const double> weights);

template <typename T>
void shuffle_in_place(std::vector<T>& values, Rng& rng) {
  for (std::size_t i = values.size(); i > 1; --i) {
    std::size_t j = uniform_index(rng, i);
    std::swap(values[i - 1], values[j]);
  }
}

}  // namespace convgame
