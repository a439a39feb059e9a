#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jointgan/critic.hpp"
#include "jointgan/dataset.hpp"
#include "jointgan/generators.hpp"
#include "jointgan/objectives.hpp"
#include "jointgan/sampling.hpp"
#include "jointgan/synthetic.hpp"
#include "jointgan/training.hpp"

namespace jointgan {

class EvalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

// Two-sample statistics ------------------------------------------------------

/// Unbiased MMD^2 with the kernel sum_s exp(-|u - v|^2 / (2 s^2)) over the
/// bandwidths s. Needs at least two rows per side.
double mmd2(const Matrix& a, const Matrix& b, std::span<const double> bandwidths);

inline constexpr double kDefaultMultipliersData[] = {0.5, 1.0, 2.0};
inline constexpr std::span<const double> kDefaultMultipliers{kDefaultMultipliersData};

/// Median pairwise Euclidean distance of the rows of `pooled` (at most 2000
/// evenly strided rows are used), times each multiplier.
std::vector<double> median_bandwidths(const Matrix& pooled, std::span<const double> multipliers = kDefaultMultipliers);

/// V-statistic energy distance 2E|a-b| - E|a-a'| - E|b-b'|; nonnegative.
double energy_distance(const Matrix& a, const Matrix& b);

/// Permutation null of mmd2 on one sample: each permutation splits
/// `pool` into two random disjoint halves of `per_side` rows. Returns the
/// sorted null statistics.
std::vector<double> mmd2_permutation_null(const Matrix& pool, std::size_t per_side, std::size_t permutations,
                                          std::span<const double> bandwidths, std::uint64_t seed);
/// Empirical quantile (linear interpolation) of sorted values.
double quantile(std::span<const double> sorted, double q);

/// Pearson correlation of column ca of `a` with column cb of `b`.
double sample_correlation(const Matrix& a, std::size_t ca, const Matrix& b, std::size_t cb);

// Generator diagnostics -------------------------------------------------------

/// Root-mean-square |y~ - y*(x)| with x from the benchmark's x-marginal and
/// y~ from p_theta(y|x) with fresh noise.
double conditional_consistency(const GeneratorBank& bank, const SyntheticSpec& benchmark, std::size_t n,
                               std::uint64_t seed);

/// The rmse above after the best orthogonal alignment of y*(x): the map is
/// identifiable from unpaired marginals only up to the symmetries of the
/// isotropic x-marginal.
double symmetric_rmse(const GeneratorBank& bank, const SyntheticSpec& benchmark, std::size_t n, std::uint64_t seed);

/// Orthogonal Q minimising sum |a_i - Q b_i|^2 (row-major, d x d).
std::vector<double> procrustes_rotation(const Matrix& a, const Matrix& b);

/// Cycle penalty R under `norm` with fresh noise, without recording a graph.
double cycle_error(const GeneratorBank& bank, const Matrix& x, const Matrix& y, std::uint64_t seed,
                   CycleNorm norm = CycleNorm::L1);

// Critic diagnostics ---------------------------------------------------------

/// K x K row-stochastic matrix; entry (k, j) is the mean probability of
/// class j on samples from source k.
std::vector<std::vector<double>> critic_confusion(const CriticNet& critic, const SourceSpec& spec,
                                                  const GeneratorBank& bank, const TwoDomainView& data,
                                                  std::size_t n_per_source, std::uint64_t seed);
std::vector<std::vector<double>> critic_confusion(const CriticNet& critic, const ThreeDomainBank& bank,
                                                  const OverlappingPairsView& data, std::size_t n_per_source,
                                                  std::uint64_t seed);
/// Rows of already drawn batches.
std::vector<std::vector<double>> critic_confusion(const CriticNet& critic, std::span<const JointBatch> batches);
/// Confusion of a trained joint-mode state on its training data.
std::vector<std::vector<double>> critic_confusion(const TrainingState& state, const Dataset& data,
                                                  std::size_t n_per_source, std::uint64_t seed);

// Equilibrium oracle ----------------------------------------------------------

struct EquilibriumOracleResult {
  double objective;           // sum_k sum_x p_k log(p_k / sum_j p_j)
  double excess;              // objective - K ln(1/K), computed term by term
  double equilibrium;         // K ln(1/K)
  double max_total_variation; // over pairs of distributions
  bool is_equilibrium;        // excess <= 1e-9
};

/// Exact objective at the optimal critic by enumeration. densities[k][x]
/// is p_k at support point x; each row must be a distribution.
EquilibriumOracleResult proposition1_discrete_oracle(const std::vector<std::vector<double>>& densities);

// Reports ------------------------------------------------------------------

struct MetricReport {
  double mmd2 = kMissing;            // joint (x, y)
  double mmd2_threshold = kMissing;  // 99th percentile of the true-vs-true null
  double energy_distance = kMissing;
  std::vector<std::pair<std::string, double>> per_marginal_mmd2;
  double conditional_rmse = kMissing;
  double symmetric_rmse = kMissing;
  double cycle_error = kMissing;
  // Three-domain extras.
  double mmd2_yz = kMissing;
  double mmd2_yz_threshold = kMissing;
  double corr_xz = kMissing;
  double corr_xz_truth = kMissing;

  std::vector<std::pair<std::string, double>> fields() const;
  std::string tsv_header() const;
  std::string tsv_row() const;
  std::string summary() const;  // key=value lines
};

struct EvalOptions {
  std::size_t samples = 2000;
  std::size_t permutations = 500;  // 0 skips the null threshold
  double null_quantile = 0.99;
  std::vector<double> bandwidth_multipliers{0.5, 1.0, 2.0};
  std::uint64_t seed = 0;
};

/// Compares model samples with held-out rows of `test`. The statistic uses
/// the first `samples` test rows; the null splits the first 2 * samples rows
/// (fewer when the test set is smaller).
MetricReport evaluate(const TrainingState& state, const Dataset& test, const EvalOptions& options = {});

void append_metric_report(const MetricReport& report, const std::string& path);
void write_metric_summary(const MetricReport& report, const std::string& path);

}  // namespace jointgan
