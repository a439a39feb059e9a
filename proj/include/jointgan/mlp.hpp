#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "jointgan/rng.hpp"
#include "jointgan/tensor.hpp"

namespace jointgan {

enum class Activation { Tanh, Relu, LeakyRelu, Sigmoid, Identity };

Activation parse_activation(const std::string& name);
std::string to_string(Activation a);

struct MlpSpec {
  std::size_t input_dim = 1;
  std::vector<std::size_t> hidden;
  std::size_t output_dim = 1;
  Activation activation = Activation::Tanh;
  double leaky_slope = 0.2;
  bool zero_init_output = false;
};

/// Fully connected network: affine layers with `activation` between them and
/// a linear output layer.
class Mlp {
 public:
  Mlp() = default;
  Mlp(MlpSpec spec, Rng& rng);

  /// `frozen` evaluates with detached parameters: gradients still reach the
  /// input but never the weights.
  ad::Tensor forward(const ad::Tensor& input, bool frozen = false) const;

  const MlpSpec& spec() const { return spec_; }
  std::vector<ad::Tensor>& parameters() { return params_; }
  const std::vector<ad::Tensor>& parameters() const { return params_; }
  std::vector<std::pair<std::string, ad::Tensor>> named_parameters(const std::string& prefix) const;
  std::size_t parameter_count() const;
  void set_trainable(bool on);
  bool trainable() const;
  Mlp clone() const;

 private:
  MlpSpec spec_;
  std::vector<ad::Tensor> params_;  // weight_0, bias_0, weight_1, ...
};

}  // namespace jointgan
