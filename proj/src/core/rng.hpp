#pragma once

#include <cstdint>
#include <random>

namespace tmsgd {

// Deterministic RNG shared by generation, mask sampling and solvers.
//
// The draw order is part of the reproducibility contract:
//  - generate_gaussian_system fills A row-major, then x_star left to right;
//  - solvers draw the row index first, then one Bernoulli per tuple left to
//    right (also when p = 1), so runs with paired seeds stay aligned across
//    methods.
//
// normal() uses the Marsaglia polar method on top of mt19937_64 so the
// Gaussian stream does not depend on the standard library implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double normal();

  // Unbiased index in [0, n) via rejection sampling.
  std::size_t uniform_index(std::size_t n);

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 eng_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// splitmix64 finalizer mixing two words; used to derive replicate seeds from
// (spec seed, model cell index, replicate index) so the derivation is stable
// and documented.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b);

}  // namespace tmsgd
