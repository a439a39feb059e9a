#include "jointgan/eval.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "jointgan/ops.hpp"

namespace jointgan {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMat> view(const Matrix& m) { return {m.values.data(), static_cast<Eigen::Index>(m.rows), static_cast<Eigen::Index>(m.cols)}; }

/// Summed Gaussian kernel matrix between the rows of a and b.
Eigen::MatrixXd kernel_matrix(const Matrix& a, const Matrix& b, std::span<const double> bandwidths) {
  const auto A = view(a);
  const auto B = view(b);
  Eigen::VectorXd na = A.rowwise().squaredNorm();
  Eigen::VectorXd nb = B.rowwise().squaredNorm();
  Eigen::MatrixXd d2 = -2.0 * (A * B.transpose());
  d2.colwise() += na;
  d2.rowwise() += nb.transpose();
  d2 = d2.cwiseMax(0.0);
  Eigen::MatrixXd k = Eigen::MatrixXd::Zero(d2.rows(), d2.cols());
  for (double s : bandwidths) k += (d2 * (-1.0 / (2.0 * s * s))).array().exp().matrix();
  return k;
}

void check_pair(const Matrix& a, const Matrix& b) {
  if (a.cols != b.cols) {
    throw EvalError("sample dimension mismatch: " + std::to_string(a.cols) + " vs " + std::to_string(b.cols));
  }
}

void check_bandwidths(std::span<const double> bw) {
  if (bw.empty()) throw EvalError("at least one bandwidth is required");
  for (double s : bw) {
    if (!(s > 0.0) || !std::isfinite(s)) throw EvalError("bandwidths must be positive");
  }
}

Matrix first_rows(const Matrix& m, std::size_t n) {
  n = std::min(n, m.rows);
  Matrix out(n, m.cols);
  std::copy(m.values.begin(), m.values.begin() + static_cast<std::ptrdiff_t>(n * m.cols), out.values.begin());
  return out;
}

double fn_series(double u) {
  // (1+u) log1p(u) - u = sum_{n>=2} (-1)^n u^n / (n (n-1)).
  double term = u * u, sum = 0.0;
  for (int n = 2; n < 12; ++n) {
    sum += (n % 2 == 0 ? 1.0 : -1.0) * term / (n * (n - 1.0));
    term *= u;
  }
  return sum;
}

double excess_term(double u) {
  if (u <= -1.0) return 1.0;
  if (std::abs(u) < 1e-3) return fn_series(u);
  return (1.0 + u) * std::log1p(u) - u;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

double mmd2(const Matrix& a, const Matrix& b, std::span<const double> bandwidths) {
  check_pair(a, b);
  check_bandwidths(bandwidths);
  if (a.rows < 2 || b.rows < 2) {
    throw EvalError("unbiased mmd2 needs at least two samples per side");
  }
  const double n = static_cast<double>(a.rows), m = static_cast<double>(b.rows);
  auto kaa = kernel_matrix(a, a, bandwidths);
  auto kbb = kernel_matrix(b, b, bandwidths);
  auto kab = kernel_matrix(a, b, bandwidths);
  const double saa = kaa.sum() - kaa.trace();
  const double sbb = kbb.sum() - kbb.trace();
  return saa / (n * (n - 1.0)) + sbb / (m * (m - 1.0)) - 2.0 * kab.sum() / (n * m);
}

std::vector<double> median_bandwidths(const Matrix& pooled, std::span<const double> multipliers) {
  if (pooled.rows < 2) throw EvalError("median heuristic needs at least two samples");
  const std::size_t cap = 2000;
  std::vector<std::size_t> idx;
  const double stride = pooled.rows > cap ? static_cast<double>(pooled.rows) / cap : 1.0;
  for (std::size_t i = 0; i < std::min(cap, pooled.rows); ++i) idx.push_back(static_cast<std::size_t>(i * stride));
  std::vector<double> dist;
  dist.reserve(idx.size() * (idx.size() - 1) / 2);
  for (std::size_t i = 0; i < idx.size(); ++i) {
    const auto ri = pooled.row(idx[i]);
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      const auto rj = pooled.row(idx[j]);
      double s = 0.0;
      for (std::size_t c = 0; c < pooled.cols; ++c) s += (ri[c] - rj[c]) * (ri[c] - rj[c]);
      dist.push_back(std::sqrt(s));
    }
  }
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  const double med = *mid;
  if (!(med > 0.0)) throw EvalError("median pairwise distance is zero; samples are degenerate");
  std::vector<double> out;
  for (double m : multipliers) out.push_back(med * m);
  return out;
}

double energy_distance(const Matrix& a, const Matrix& b) {
  check_pair(a, b);
  if (a.rows == 0 || b.rows == 0) throw EvalError("energy distance needs non-empty samples");
  auto mean_dist = [](const Matrix& u, const Matrix& v) {
    const auto U = view(u);
    const auto V = view(v);
    double total = 0.0;
    for (Eigen::Index i = 0; i < U.rows(); ++i) {
      total += (V.rowwise() - U.row(i)).rowwise().norm().sum();
    }
    return total / (static_cast<double>(u.rows) * static_cast<double>(v.rows));
  };
  return 2.0 * mean_dist(a, b) - mean_dist(a, a) - mean_dist(b, b);
}

std::vector<double> mmd2_permutation_null(const Matrix& pool, std::size_t per_side, std::size_t permutations,
                                          std::span<const double> bandwidths, std::uint64_t seed) {
  check_bandwidths(bandwidths);
  if (per_side < 2) throw EvalError("permutation null needs at least two samples per side");
  if (pool.rows < 2 * per_side) {
    throw EvalError("permutation null needs " + std::to_string(2 * per_side) + " pooled rows, got " +
                    std::to_string(pool.rows));
  }
  const auto p = first_rows(pool, 2 * per_side);
  const auto k = kernel_matrix(p, p, bandwidths);
  const Eigen::VectorXd total = k.rowwise().sum();
  const Eigen::VectorXd diag = k.diagonal();
  const auto n = static_cast<double>(per_side);
  const auto N = static_cast<Eigen::Index>(2 * per_side);

  Rng rng(seed);
  std::vector<std::size_t> perm(static_cast<std::size_t>(N));
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> out;
  Eigen::VectorXd ind(N);
  for (std::size_t t = 0; t < permutations; ++t) {
    for (std::size_t i = perm.size() - 1; i > 0; --i) std::swap(perm[i], perm[rng.index(i + 1)]);
    ind.setZero();
    for (std::size_t i = 0; i < per_side; ++i) ind[static_cast<Eigen::Index>(perm[i])] = 1.0;
    const Eigen::VectorXd r = k * ind;  // r_i = sum_{j in A} K_ij
    double saa = 0.0, sab = 0.0, sbb = 0.0;
    for (Eigen::Index i = 0; i < N; ++i) {
      if (ind[i] > 0.0) {
        saa += r[i] - diag[i];
      } else {
        sab += r[i];
        sbb += total[i] - r[i] - diag[i];
      }
    }
    out.push_back(saa / (n * (n - 1.0)) + sbb / (n * (n - 1.0)) - 2.0 * sab / (n * n));
  }
  std::sort(out.begin(), out.end());
  return out;
}

double quantile(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw EvalError("quantile of an empty sample");
  if (!(q >= 0.0 && q <= 1.0)) throw EvalError("quantile level must lie in [0, 1]");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

double sample_correlation(const Matrix& a, std::size_t ca, const Matrix& b, std::size_t cb) {
  if (a.rows != b.rows || a.rows < 2) throw EvalError("correlation needs two aligned samples of size >= 2");
  if (ca >= a.cols || cb >= b.cols) throw EvalError("correlation column out of range");
  const double n = static_cast<double>(a.rows);
  double ma = 0.0, mb = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    ma += a(r, ca);
    mb += b(r, cb);
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t r = 0; r < a.rows; ++r) {
    const double u = a(r, ca) - ma, v = b(r, cb) - mb;
    sab += u * v;
    saa += u * u;
    sbb += v * v;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw EvalError("correlation of a constant column");
  return sab / std::sqrt(saa * sbb);
}

namespace {

Matrix generate_y(const GeneratorBank& bank, const Matrix& x, std::uint64_t seed) {
  if (x.cols != bank.domain_dim(Domain::X)) {
    throw EvalError("benchmark x dimension " + std::to_string(x.cols) + " does not match the bank's " +
                    std::to_string(bank.domain_dim(Domain::X)));
  }
  ad::NoGradGuard no_grad;
  Rng rng(seed);
  return Matrix::from_tensor(
      bank.sample_conditional(Direction::YGivenX, x.to_tensor(), rng.normal_tensor(x.rows, bank.noise_dim(Domain::Y))));
}

double rmse(const Matrix& a, const Matrix& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) s += (a.values[i] - b.values[i]) * (a.values[i] - b.values[i]);
  return std::sqrt(s / static_cast<double>(a.rows));
}

}  // namespace

double conditional_consistency(const GeneratorBank& bank, const SyntheticSpec& benchmark, std::size_t n,
                               std::uint64_t seed) {
  if (!benchmark.has_ground_truth_map()) {
    throw EvalError("benchmark '" + to_string(benchmark.family) + "' has no ground-truth map");
  }
  if (n == 0) throw EvalError("conditional consistency needs n >= 1");
  const auto x = sample_x_marginal(benchmark, n, derive_seed(seed, 1));
  return rmse(generate_y(bank, x, derive_seed(seed, 2)), ground_truth_map(benchmark, x));
}

std::vector<double> procrustes_rotation(const Matrix& a, const Matrix& b) {
  check_pair(a, b);
  if (a.rows != b.rows) throw EvalError("procrustes needs row-aligned samples");
  const Eigen::MatrixXd m = view(a).transpose() * view(b);  // sum_i a_i b_i^T
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::MatrixXd q = svd.matrixU() * svd.matrixV().transpose();
  std::vector<double> out(a.cols * a.cols);
  for (std::size_t i = 0; i < a.cols; ++i) {
    for (std::size_t j = 0; j < a.cols; ++j) out[i * a.cols + j] = q(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  return out;
}

double symmetric_rmse(const GeneratorBank& bank, const SyntheticSpec& benchmark, std::size_t n, std::uint64_t seed) {
  if (!benchmark.has_ground_truth_map()) {
    throw EvalError("benchmark '" + to_string(benchmark.family) + "' has no ground-truth map");
  }
  if (n == 0) throw EvalError("symmetric rmse needs n >= 1");
  const auto x = sample_x_marginal(benchmark, n, derive_seed(seed, 1));
  const auto y = generate_y(bank, x, derive_seed(seed, 2));
  const auto target = ground_truth_map(benchmark, x);
  const auto q = procrustes_rotation(y, target);
  const auto d = target.cols;
  Matrix aligned(target.rows, d);
  for (std::size_t r = 0; r < target.rows; ++r) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += q[i * d + j] * target(r, j);
      aligned(r, i) = s;
    }
  }
  return rmse(y, aligned);
}

double cycle_error(const GeneratorBank& bank, const Matrix& x, const Matrix& y, std::uint64_t seed, CycleNorm norm) {
  if (x.rows == 0 || y.rows == 0) throw EvalError("cycle error needs non-empty samples");
  if (x.cols != bank.domain_dim(Domain::X) || y.cols != bank.domain_dim(Domain::Y)) {
    throw EvalError("cycle error: sample dimensions do not match the bank");
  }
  ad::NoGradGuard no_grad;
  Rng rng(seed);
  return cycle_penalty(bank, x.to_tensor(), y.to_tensor(), norm, rng).item();
}

std::vector<std::vector<double>> critic_confusion(const CriticNet& critic, std::span<const JointBatch> batches) {
  if (critic.num_classes() != batches.size()) {
    throw EvalError("mode mismatch: " + std::to_string(batches.size()) + " sources for a " +
                    std::to_string(critic.num_classes()) + "-class critic");
  }
  std::vector<std::vector<double>> out;
  for (const auto& b : batches) {
    if (b.rows() == 0) throw EvalError("confusion needs n_per_source >= 1");
    const auto probs = critic.evaluate(b.values);
    std::vector<double> row(critic.num_classes(), 0.0);
    for (const auto& p : probs) {
      for (std::size_t j = 0; j < row.size(); ++j) row[j] += p.probs[j];
    }
    for (auto& v : row) v /= static_cast<double>(probs.size());
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<std::vector<double>> critic_confusion(const CriticNet& critic, const SourceSpec& spec,
                                                  const GeneratorBank& bank, const TwoDomainView& data,
                                                  std::size_t n_per_source, std::uint64_t seed) {
  if (n_per_source == 0) throw EvalError("confusion needs n_per_source >= 1");
  if (critic.num_classes() != spec.num_classes()) {
    throw EvalError("mode mismatch: " + to_string(spec.mode) + " has " + std::to_string(spec.num_classes()) +
                    " sources, critic has " + std::to_string(critic.num_classes()) + " classes");
  }
  ad::NoGradGuard no_grad;
  Rng rng(seed);
  const auto batches = draw_all(spec, bank, data, n_per_source, rng);
  return critic_confusion(critic, batches);
}

std::vector<std::vector<double>> critic_confusion(const CriticNet& critic, const ThreeDomainBank& bank,
                                                  const OverlappingPairsView& data, std::size_t n_per_source,
                                                  std::uint64_t seed) {
  if (n_per_source == 0) throw EvalError("confusion needs n_per_source >= 1");
  if (critic.num_classes() != 6) throw EvalError("mode mismatch: three-domain confusion needs a 6-class critic");
  ad::NoGradGuard no_grad;
  Rng rng(seed);
  const auto batches = draw_three_domain_all(bank, data, n_per_source, rng);
  return critic_confusion(critic, batches);
}

std::vector<std::vector<double>> critic_confusion(const TrainingState& state, const Dataset& data,
                                                  std::size_t n_per_source, std::uint64_t seed) {
  check_data(state.config, data);
  switch (state.config.mode) {
    case TrainingMode::Paired5:
      return critic_confusion(state.critic, SourceSpec::for_mode(SourceMode::Paired5), state.bank, PairedView(data),
                              n_per_source, seed);
    case TrainingMode::Unpaired4:
      return critic_confusion(state.critic, SourceSpec::for_mode(SourceMode::Unpaired4), state.bank,
                              UnpairedView(data), n_per_source, seed);
    case TrainingMode::ThreeDomain6:
      return critic_confusion(state.critic, state.tri, OverlappingPairsView(data), n_per_source, seed);
    case TrainingMode::TwoStepBaseline: break;
  }
  throw EvalError("mode mismatch: the two-step baseline has no K-class critic");
}

EquilibriumOracleResult proposition1_discrete_oracle(const std::vector<std::vector<double>>& densities) {
  const auto k = densities.size();
  if (k < 2) throw EvalError("equilibrium oracle needs at least two distributions");
  const auto points = densities.front().size();
  if (points == 0) throw EvalError("empty support");
  for (std::size_t i = 0; i < k; ++i) {
    if (densities[i].size() != points) throw EvalError("density tables disagree on the support size");
    double total = 0.0;
    for (double p : densities[i]) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw EvalError("density values must be finite and nonnegative");
      total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw EvalError("unnormalized density " + std::to_string(i + 1) + " (sums to " + fmt(total) + ")");
    }
  }
  EquilibriumOracleResult r{};
  const double kk = static_cast<double>(k);
  r.equilibrium = equilibrium_value(k);
  for (std::size_t x = 0; x < points; ++x) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) s += densities[i][x];
    if (s == 0.0) continue;
    double local = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      const double p = densities[i][x];
      if (p > 0.0) r.objective += p * std::log(p / s);
      local += excess_term(kk * p / s - 1.0);
    }
    r.excess += s / kk * local;
  }
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      r.max_total_variation = std::max(r.max_total_variation, total_variation(densities[i], densities[j]));
    }
  }
  r.is_equilibrium = r.excess <= 1e-9;
  if (r.max_total_variation > 1e-9 && !(r.excess > 0.0)) {
    throw EvalError("only-if direction violated: distinct distributions reached the equilibrium value");
  }
  return r;
}

// Reports --------------------------------------------------------------------

std::vector<std::pair<std::string, double>> MetricReport::fields() const {
  std::vector<std::pair<std::string, double>> f{{"mmd2", mmd2},
                                                {"mmd2_threshold", mmd2_threshold},
                                                {"energy_distance", energy_distance}};
  for (const auto& [name, v] : per_marginal_mmd2) f.emplace_back("mmd2_" + name, v);
  f.emplace_back("conditional_rmse", conditional_rmse);
  f.emplace_back("symmetric_rmse", symmetric_rmse);
  f.emplace_back("cycle_error", cycle_error);
  f.emplace_back("mmd2_yz", mmd2_yz);
  f.emplace_back("mmd2_yz_threshold", mmd2_yz_threshold);
  f.emplace_back("corr_xz", corr_xz);
  f.emplace_back("corr_xz_truth", corr_xz_truth);
  return f;
}

std::string MetricReport::tsv_header() const {
  std::string out;
  for (const auto& [k, v] : fields()) out += (out.empty() ? "" : "\t") + k;
  return out;
}

std::string MetricReport::tsv_row() const {
  std::string out;
  bool first = true;
  for (const auto& [k, v] : fields()) {
    out += (first ? "" : "\t") + fmt(v);
    first = false;
  }
  return out;
}

std::string MetricReport::summary() const {
  std::string out;
  for (const auto& [k, v] : fields()) out += k + "=" + fmt(v) + "\n";
  return out;
}

namespace {

struct PairMetrics {
  double mmd2;
  double threshold;
  double energy;
};

PairMetrics compare(const Matrix& generated, const Matrix& truth, const EvalOptions& o, std::uint64_t stream) {
  const bool with_null = o.permutations > 0 && truth.rows >= 4;
  const std::size_t m = std::min(o.samples, with_null ? truth.rows / 2 : truth.rows);
  const auto pool = first_rows(truth, with_null ? 2 * m : m);
  const auto bw = median_bandwidths(pool, o.bandwidth_multipliers);
  const auto t = first_rows(truth, m);
  const auto g = first_rows(generated, m);
  PairMetrics r{mmd2(g, t, bw), kMissing, energy_distance(g, t)};
  if (with_null) {
    const auto null = mmd2_permutation_null(pool, m, o.permutations, bw, derive_seed(o.seed, stream));
    r.threshold = quantile(null, o.null_quantile);
  }
  return r;
}

double marginal_mmd(const Matrix& generated, const Matrix& truth, const EvalOptions& o) {
  const std::size_t m = std::min(o.samples, truth.rows);
  const auto t = first_rows(truth, m);
  const auto bw = median_bandwidths(t, o.bandwidth_multipliers);
  return mmd2(first_rows(generated, m), t, bw);
}

}  // namespace

MetricReport evaluate(const TrainingState& state, const Dataset& test, const EvalOptions& o) {
  if (o.samples < 2) throw EvalError("evaluation needs at least two samples");
  MetricReport r;
  Rng rng(derive_seed(o.seed, 1));
  const auto spec = spec_from_metadata(test);
  if (state.config.mode == TrainingMode::ThreeDomain6) {
    if (test.pairing() != Pairing::TwoOverlappingPairs) throw EvalError("three-domain evaluation needs pair tables");
    const OverlappingPairsView v(test);
    const auto g = sample_joint(state, o.samples, rng);
    const auto xy = compare(hstack(std::vector<Matrix>{g[0], g[1]}), hstack(std::vector<Matrix>{v.xy_x(), v.xy_y()}), o, 11);
    const auto yz = compare(hstack(std::vector<Matrix>{g[1], g[2]}), hstack(std::vector<Matrix>{v.yz_y(), v.yz_z()}), o, 12);
    r.mmd2 = xy.mmd2;
    r.mmd2_threshold = xy.threshold;
    r.energy_distance = xy.energy;
    r.mmd2_yz = yz.mmd2;
    r.mmd2_yz_threshold = yz.threshold;
    r.per_marginal_mmd2 = {{"x", marginal_mmd(g[0], v.xy_x(), o)},
                           {"y", marginal_mmd(g[1], v.xy_y(), o)},
                           {"z", marginal_mmd(g[2], v.yz_z(), o)}};
    r.corr_xz = sample_correlation(g[0], 0, g[2], 0);
    if (spec && spec->family == Family::Chain) {
      const auto truth = sample_chain_triples(*spec, o.samples, derive_seed(o.seed, 13));
      r.corr_xz_truth = sample_correlation(truth[0], 0, truth[2], 0);
    }
    return r;
  }

  if (test.pairing() == Pairing::TwoOverlappingPairs) throw EvalError("two-domain evaluation needs x and y columns");
  const auto& x = test.column("x");
  const auto& y = test.column("y");
  const auto g = sample_joint(state, o.samples, rng);
  if (test.pairing() == Pairing::Paired) {
    const auto joint = compare(hstack(std::vector<Matrix>{g[0], g[1]}), hstack(std::vector<Matrix>{x, y}), o, 11);
    r.mmd2 = joint.mmd2;
    r.mmd2_threshold = joint.threshold;
    r.energy_distance = joint.energy;
  }
  r.per_marginal_mmd2 = {{"x", marginal_mmd(g[0], x, o)}, {"y", marginal_mmd(g[1], y, o)}};
  const auto& bank = conditional_bank(state);
  const std::size_t m = std::min(o.samples, x.rows);
  r.cycle_error = cycle_error(bank, first_rows(x, m), first_rows(y, m), derive_seed(o.seed, 14));
  if (spec && spec->has_ground_truth_map()) {
    r.conditional_rmse = conditional_consistency(bank, *spec, o.samples, derive_seed(o.seed, 15));
    r.symmetric_rmse = symmetric_rmse(bank, *spec, o.samples, derive_seed(o.seed, 15));
  }
  return r;
}

void append_metric_report(const MetricReport& report, const std::string& path) {
  bool fresh = true;
  {
    std::ifstream in(path);
    fresh = !in || in.peek() == std::ifstream::traits_type::eof();
  }
  std::ofstream out(path, std::ios::app);
  if (!out) throw EvalError("cannot write " + path);
  if (fresh) out << report.tsv_header() << "\n";
  out << report.tsv_row() << "\n";
}

void write_metric_summary(const MetricReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw EvalError("cannot write " + path);
  out << report.summary();
}

}  // namespace jointgan
