#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointgan/mlp.hpp"
#include "jointgan/rng.hpp"
#include "jointgan/tensor.hpp"

namespace jointgan {

class GeneratorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Domain { X, Y, Z };
enum class Direction { YGivenX, XGivenY };
enum class ChainOrder { XThenY, YThenX };
enum class ThreeDomainOrder { XYZ, ZYX };

std::string to_string(Domain d);

struct GeneratorArch {
  std::vector<std::size_t> hidden{128, 128};
  Activation activation = Activation::Tanh;
  double leaky_slope = 0.2;
  bool zero_init_output = false;
};

struct BankSpec {
  std::size_t dim_x = 1;
  std::size_t dim_y = 1;
  // Noise fed to the x-producing network (eps_1 and eps_2') and to the
  // y-producing network (eps_1' and eps_2).
  std::size_t noise_dim_x = 8;
  std::size_t noise_dim_y = 8;
  GeneratorArch arch;
  std::uint64_t seed = 0;
};

struct XYPair {
  ad::Tensor x;
  ad::Tensor y;
};

/// The two conditional generators. Marginals are the conditionals evaluated
/// at an all-zero condition, so there are no separate marginal parameters:
///   x ~ f_phi(y, eps)   (also the x-marginal as f_phi(0, eps))
///   y ~ f_theta(x, eps) (also the y-marginal as f_theta(0, eps))
class GeneratorBank {
 public:
  GeneratorBank() = default;
  explicit GeneratorBank(const BankSpec& spec);

  ad::Tensor sample_marginal(Domain domain, const ad::Tensor& noise, bool frozen = false) const;
  ad::Tensor sample_conditional(Direction direction, const ad::Tensor& condition,
                                const ad::Tensor& noise, bool frozen = false) const;
  /// Second element generated from the first; the conditioning value stays
  /// graph-connected unless `detach_condition`.
  XYPair sample_joint_chain(ChainOrder order, const ad::Tensor& first_noise,
                            const ad::Tensor& second_noise, bool detach_condition = false) const;

  const BankSpec& spec() const { return spec_; }
  std::size_t noise_dim(Domain produced) const;
  std::size_t domain_dim(Domain d) const;

  Mlp& phi() { return phi_; }
  Mlp& theta() { return theta_; }
  const Mlp& phi() const { return phi_; }
  const Mlp& theta() const { return theta_; }

  std::vector<ad::Tensor> parameters();
  std::vector<std::pair<std::string, ad::Tensor>> named_parameters() const;
  std::size_t parameter_count() const;
  void set_trainable(bool on);

 private:
  BankSpec spec_;
  Mlp phi_;    // (y, eps) -> x
  Mlp theta_;  // (x, eps) -> y
};

struct ThreeDomainSpec {
  std::size_t dim = 1;  // shared by x, y, z
  std::size_t noise_dim = 8;
  GeneratorArch arch;
  std::uint64_t seed = 0;
};

/// Observed leading domains of a three-domain chain.
struct ObservedPrefix {
  std::optional<ad::Tensor> x;
  std::optional<ad::Tensor> y;
  std::optional<ad::Tensor> z;
};

struct XYZTriple {
  ad::Tensor x;
  ad::Tensor y;
  ad::Tensor z;
};

/// Two factorisations of p(x, y, z):
///   alpha(x) nu(y|x) gamma(z|x,y)   and   beta(z) psi(y|z) eta(x|y,z)
/// with alpha = nu(0, .) and beta = psi(0, .). The coupling reuses a network
/// that emits y-shaped vectors for x and z, so all three domains share one
/// dimension. gamma and eta see both conditioning domains (skip connection).
class ThreeDomainBank {
 public:
  ThreeDomainBank() = default;
  explicit ThreeDomainBank(const ThreeDomainSpec& spec);

  ad::Tensor sample_marginal(Domain domain, const ad::Tensor& noise, bool frozen = false) const;
  XYZTriple sample_chain(ThreeDomainOrder order, const ad::Tensor& noise1, const ad::Tensor& noise2,
                         const ad::Tensor& noise3, const ObservedPrefix& prefix = {},
                         bool frozen = false) const;

  const ThreeDomainSpec& spec() const { return spec_; }
  const Mlp& nu() const { return nu_; }
  const Mlp& gamma() const { return gamma_; }
  const Mlp& psi() const { return psi_; }
  const Mlp& eta() const { return eta_; }
  Mlp& gamma() { return gamma_; }

  std::vector<ad::Tensor> parameters();
  std::vector<std::pair<std::string, ad::Tensor>> named_parameters() const;
  std::size_t parameter_count() const;
  void set_trainable(bool on);

 private:
  ThreeDomainSpec spec_;
  Mlp nu_;     // (x, eps) -> y
  Mlp gamma_;  // (x, y, eps) -> z
  Mlp psi_;    // (z, eps) -> y
  Mlp eta_;    // (y, z, eps) -> x
};

}  // namespace jointgan
