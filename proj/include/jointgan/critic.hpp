#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include "jointgan/mlp.hpp"
#include "jointgan/tensor.hpp"

namespace jointgan {

class CriticError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CriticSpec {
  std::size_t input_dim = 2;  // sum of domain dims
  std::size_t num_classes = 5;
  std::vector<std::size_t> hidden{128, 128, 128};
  double leaky_slope = 0.2;
  bool zero_init_output = false;
  std::uint64_t seed = 0;
};

/// A point on the (K-1)-simplex.
struct CriticOutput {
  std::vector<double> probs;
};

/// K-way softmax classifier over concatenated joint samples: one shared
/// leaky-relu trunk with a K-logit head.
class CriticNet {
 public:
  CriticNet() = default;
  explicit CriticNet(const CriticSpec& spec);

  /// Logits for the column-wise concatenation of `domains` ([n, d_i] each).
  ad::Tensor logits(std::span<const ad::Tensor> domains, bool frozen = false) const;
  ad::Tensor log_probs(std::span<const ad::Tensor> domains, bool frozen = false) const;
  /// Per-row class probabilities, without recording a graph.
  std::vector<CriticOutput> evaluate(std::span<const ad::Tensor> domains) const;

  std::size_t num_classes() const { return spec_.num_classes; }
  std::size_t input_dim() const { return spec_.input_dim; }
  const CriticSpec& spec() const { return spec_; }

  Mlp& net() { return net_; }
  const Mlp& net() const { return net_; }
  std::vector<ad::Tensor>& parameters() { return net_.parameters(); }
  std::vector<std::pair<std::string, ad::Tensor>> named_parameters() const {
    return net_.named_parameters("critic");
  }
  std::size_t parameter_count() const { return net_.parameter_count(); }
  void set_trainable(bool on) { net_.set_trainable(on); }

 private:
  CriticSpec spec_;
  Mlp net_;
};

/// The maximiser of sum_k E_{p_k}[log g[k]] at one point:
/// g[k] = p_k / sum_j p_j.
CriticOutput optimal_critic_oracle(std::span<const double> densities);

using DensityFn = std::function<double(std::span<const double> point)>;
CriticOutput optimal_critic_oracle(std::span<const DensityFn> densities,
                                   std::span<const double> point);

double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace jointgan
