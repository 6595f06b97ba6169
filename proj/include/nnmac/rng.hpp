#pragma once

#include <cstdint>
#include <random>

namespace nnmac {

// Deterministic uniform generator. std::uniform_real_distribution is
// implementation-defined, so doubles are built from raw 53-bit draws to keep
// sampled training points and network initializations reproducible.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

private:
  std::mt19937_64 gen_;
};

}  // namespace nnmac
