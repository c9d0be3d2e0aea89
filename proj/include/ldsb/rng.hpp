#pragma once

#include <cstdint>
#include <string_view>

#include "ldsb/linalg.hpp"

namespace ldsb {

// Counter-based generator: output i of a stream is splitmix64(key + i * phi).
// Streams derived by name or index are independent of the parent's counter,
// so dataset generation, initialization and shuffling can each take their own
// stream from a single master seed without affecting one another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)), seed_(seed) {}

  Rng stream(std::string_view name) const;
  Rng substream(std::uint64_t index) const;

  std::uint64_t next_u64();
  // [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Box-Muller; both variates of a pair are used.
  double normal();
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  bool coin() { return (next_u64() >> 63) != 0; }

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static std::uint64_t mix(std::uint64_t z);

 private:
  Rng(std::uint64_t key, std::uint64_t seed, int) : key_(key), seed_(seed) {}

  std::uint64_t key_;
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
  double spare_normal_ = 0.0;
  bool has_spare_ = false;
};

// Uniform sample on the unit sphere S^{dim-1} (normalized Gaussian).
Vector sample_unit_sphere(std::size_t dim, Rng& rng);

}  // namespace ldsb
