#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

namespace dblex {

/// Seeded generator whose output depends only on the seed. std::mt19937_64's
/// sequence is fixed by the standard; the standard distributions are not, so
/// bounded draws are done here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  /// Uniform integer in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);

 private:
  std::mt19937_64 engine_;
};

/// Uniform sample of k distinct indices from [0, population) without
/// replacement, returned in ascending order. k is clamped to population.
std::vector<std::size_t> sample_indices(std::size_t population, std::size_t k, Rng& rng);

/// SplitMix64 finalizer; used to derive independent streams and hash seeds.
std::uint64_t mix64(std::uint64_t x);

/// 64-bit FNV-1a over raw bytes.
std::uint64_t fnv1a64(const void* data, std::size_t size,
                      std::uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace dblex
