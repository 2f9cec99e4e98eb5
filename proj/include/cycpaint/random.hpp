// SPDX-License-Identifier: Apache-2.0
//
// Seeded random streams. Distributions are implemented here rather than taken
// from <random> so sequences are identical across standard libraries.

#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace cycpaint {

// SplitMix64 finalizer.
std::uint64_t mix64(std::uint64_t x) noexcept;

// Derive an independent stream seed from a root seed and a list of tags.
std::uint64_t derive_seed(std::uint64_t root, std::initializer_list<std::uint64_t> tags) noexcept;

// FNV-1a over a string, for deriving seeds from identifiers.
std::uint64_t hash_string(std::string_view s) noexcept;

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

  double normal();

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace cycpaint
