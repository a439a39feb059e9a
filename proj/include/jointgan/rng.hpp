#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>

#include "jointgan/tensor.hpp"

namespace jointgan {

/// splitmix64 finaliser; derives independent stream seeds from a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

/// Seeded standard-normal noise source. Draws depend only on the engine
/// state, so the same seed always yields the same sequence.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  double uniform();  // [0, 1)
  double normal();
  std::size_t index(std::size_t n);  // uniform on {0..n-1}

  /// [rows, dim] tensor of N(0,1) draws.
  ad::Tensor normal_tensor(std::size_t rows, std::size_t dim);

  std::string serialize() const;
  void deserialize(const std::string& state);

 private:
  std::mt19937_64 engine_;
};

using NoiseSource = Rng;

}  // namespace jointgan
