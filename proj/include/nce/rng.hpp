#pragma once

#include <cstdint>
#include <initializer_list>

namespace nce {

// SplitMix64 stream. Output depends only on the 64-bit state, so draws are
// identical on every platform and compiler (unlike std::normal_distribution).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  // Uniform on the open interval (0, 1).
  double uniform();

  // Standard normal via Box-Muller; the second variate of each pair is cached.
  double normal();

 private:
  std::uint64_t state_;
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
};

// Mixes a list of words into one seed. Used to derive disjoint streams from
// (base seed, run index, evaluation counter, ...).
std::uint64_t mix_seed(std::initializer_list<std::uint64_t> words);

}  // namespace nce
