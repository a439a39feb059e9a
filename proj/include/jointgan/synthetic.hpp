#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "jointgan/dataset.hpp"

namespace jointgan {

enum class Family {
  CorrelatedGaussian,    // x ~ N(0, I), y = rho x + sqrt(1 - rho^2) e
  GaussianMixturePairs,  // 2-D: x from a ring of Gaussians, y = rotated x
  RingPairs,             // 2-D: x, y on rings with angular correspondence
  DeterministicMap,      // x ~ N(0, I), y = map_scale x + noise e
  Chain,                 // x ~ N(0, I), y = x + noise e, z = -y + noise e'
};

std::string to_string(Family f);
Family parse_family(const std::string& s);

struct SyntheticSpec {
  Family family = Family::CorrelatedGaussian;
  std::size_t rows = 10000;
  std::size_t dim = 1;
  double rho = 0.9;
  std::size_t components = 8;
  std::vector<double> weights;  // empty means uniform
  double radius = 2.0;
  double component_sd = 0.1;
  double rotation = 0.7853981633974483;  // pi/4
  double ring_radius_y = 1.0;
  double map_scale = 2.0;
  double noise = 0.0;
  Pairing pairing = Pairing::Paired;  // marking written into the file

  /// Throws DataError on a non-positive-definite covariance, off-simplex
  /// mixture weights, or dimensions that do not fit the family.
  void validate() const;

  std::map<std::string, std::string> to_map() const;
  static SyntheticSpec from_map(const std::map<std::string, std::string>& kv);
  /// "key=value;key=value" echo stored in dataset metadata.
  std::string echo() const;
  static SyntheticSpec parse_echo(const std::string& s);

  bool has_ground_truth_map() const { return family == Family::DeterministicMap; }
};

/// Reproducible synthetic dataset; metadata records the spec and seed.
Dataset generate(const SyntheticSpec& spec, std::uint64_t seed);

/// Fresh draws from the spec's x-marginal (for evaluation).
Matrix sample_x_marginal(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed);

/// Aligned (x, y, z) draws of a chain spec, one matrix per domain. Chain
/// datasets never contain these; they serve as ground truth only.
std::vector<Matrix> sample_chain_triples(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed);

/// y*(x) for deterministic_map specs.
Matrix ground_truth_map(const SyntheticSpec& spec, const Matrix& x);

/// Recovers the generating spec from dataset metadata, when present.
std::optional<SyntheticSpec> spec_from_metadata(const Dataset& ds);

}  // namespace jointgan
