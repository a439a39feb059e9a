#include "jointgan/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "jointgan/ops.hpp"

namespace jointgan {

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu") return Activation::Relu;
  if (name == "leaky_relu") return Activation::LeakyRelu;
  if (name == "sigmoid") return Activation::Sigmoid;
  if (name == "identity") return Activation::Identity;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Tanh: return "tanh";
    case Activation::Relu: return "relu";
    case Activation::LeakyRelu: return "leaky_relu";
    case Activation::Sigmoid: return "sigmoid";
    case Activation::Identity: return "identity";
  }
  return "identity";
}

Mlp::Mlp(MlpSpec spec, Rng& rng) : spec_(std::move(spec)) {
  if (spec_.input_dim == 0 || spec_.output_dim == 0) {
    throw std::invalid_argument("mlp dimensions must be positive");
  }
  std::vector<std::size_t> widths{spec_.input_dim};
  widths.insert(widths.end(), spec_.hidden.begin(), spec_.hidden.end());
  widths.push_back(spec_.output_dim);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const auto fan_in = widths[l], fan_out = widths[l + 1];
    const bool last = l + 2 == widths.size();
    // Glorot-normal weights, zero biases.
    const double sd = std::sqrt(2.0 / static_cast<double>(fan_in + fan_out));
    std::vector<double> w(fan_in * fan_out, 0.0);
    if (!(last && spec_.zero_init_output)) {
      for (auto& v : w) v = sd * rng.normal();
    }
    params_.emplace_back(ad::Shape{fan_in, fan_out}, std::move(w), true);
    params_.push_back(ad::Tensor::zeros({1, fan_out}, true));
  }
}

ad::Tensor Mlp::forward(const ad::Tensor& input, bool frozen) const {
  if (input.rank() != 2 || input.cols() != spec_.input_dim) {
    throw ad::ShapeError("mlp", input.shape(), {spec_.input_dim});
  }
  ad::Tensor h = input;
  const std::size_t layers = params_.size() / 2;
  for (std::size_t l = 0; l < layers; ++l) {
    const auto& w = frozen ? params_[2 * l].detach() : params_[2 * l];
    const auto& b = frozen ? params_[2 * l + 1].detach() : params_[2 * l + 1];
    h = ad::add(ad::matmul(h, w), b);
    if (l + 1 == layers) break;
    switch (spec_.activation) {
      case Activation::Tanh: h = ad::tanh(h); break;
      case Activation::Relu: h = ad::relu(h); break;
      case Activation::LeakyRelu: h = ad::leaky_relu(h, spec_.leaky_slope); break;
      case Activation::Sigmoid: h = ad::sigmoid(h); break;
      case Activation::Identity: break;
    }
  }
  return h;
}

std::vector<std::pair<std::string, ad::Tensor>> Mlp::named_parameters(const std::string& prefix) const {
  std::vector<std::pair<std::string, ad::Tensor>> out;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    out.emplace_back(prefix + (i % 2 == 0 ? ".weight_" : ".bias_") + std::to_string(i / 2), params_[i]);
  }
  return out;
}

std::size_t Mlp::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.size();
  return n;
}

void Mlp::set_trainable(bool on) {
  for (auto& p : params_) {
    p.set_requires_grad(on);
    if (!on) p.clear_grad();
  }
}

bool Mlp::trainable() const {
  return !params_.empty() && params_.front().requires_grad();
}

Mlp Mlp::clone() const {
  Mlp copy;
  copy.spec_ = spec_;
  for (const auto& p : params_) copy.params_.push_back(p.clone());
  return copy;
}

}  // namespace jointgan
