#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace jointgan {

struct GradCheckResult {
  std::string name;
  double max_relative_error;
  std::size_t checked;
  std::size_t skipped_nonsmooth;
};

/// Every primitive op, each inside sum(op(inputs) * w) with a fixed random w.
std::vector<GradCheckResult> primitive_gradchecks(std::uint64_t seed);

/// Full losses on small random networks: paired critic loss, both paired
/// generator styles, unpaired generator loss with the cycle term,
/// three-domain, GAN and ALI losses.
std::vector<GradCheckResult> objective_gradchecks(std::uint64_t seed);

std::vector<GradCheckResult> run_gradcheck_suite(std::uint64_t seed);

}  // namespace jointgan
