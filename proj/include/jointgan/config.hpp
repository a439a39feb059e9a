#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointgan/mlp.hpp"
#include "jointgan/objectives.hpp"

namespace jointgan {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class TrainingMode { Paired5, Unpaired4, ThreeDomain6, TwoStepBaseline };

std::string to_string(TrainingMode m);
TrainingMode parse_training_mode(const std::string& s);

/// Dataset view a run trains on. Auto picks paired for paired_5 and the
/// baseline, unpaired for unpaired_4 and overlapping for three_domain_6.
enum class DataView { Auto, Paired, Unpaired, Overlapping };

std::string to_string(DataView v);
DataView parse_data_view(const std::string& s);

struct ExperimentConfig {
  TrainingMode mode = TrainingMode::Paired5;
  DataView data_view = DataView::Auto;
  double learning_rate = 2e-4;
  std::string lr_schedule = "constant";  // constant, or linear decay to zero over total_steps
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  std::size_t batch_size = 64;  // per source
  std::size_t total_steps = 20000;
  std::size_t critic_steps = 1;  // critic updates per generator update
  std::size_t noise_dim = 8;
  std::vector<std::size_t> generator_hidden{128, 128};
  std::vector<std::size_t> critic_hidden{128, 128, 128};
  Activation generator_activation = Activation::Tanh;
  double leaky_slope = 0.2;  // critic trunk, and generators when their activation is leaky_relu
  bool detach_chain_condition = false;  // ablation: cut p_3/p_4 chains at the first element
  double cycle_weight = 10.0;
  CycleNorm cycle_norm = CycleNorm::L1;
  std::string loss_style = "default";  // default, saturating, nonsaturating
  std::uint64_t seed = 0;
  std::size_t log_every = 100;
  std::size_t checkpoint_every = 5000;

  void validate() const;
  /// Nonsaturating for paired_5 and the baseline, saturating otherwise,
  /// unless overridden.
  LossStyle resolved_loss_style() const;
  /// Learning rate for the update after `step` completed steps of a stage.
  double learning_rate_at(std::size_t step) const;
  DataView resolved_view() const;

  /// Every field as key -> value text, in a fixed key order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  std::string to_text() const;
  /// Flat "key = value" lines; '#' starts a comment. Unknown keys and
  /// malformed values are errors. Missing keys keep their defaults.
  static ExperimentConfig from_text(const std::string& text);
  static ExperimentConfig from_file(const std::string& path);
  /// Applies one key=value override.
  void set(const std::string& key, const std::string& value);

  bool operator==(const ExperimentConfig&) const = default;
};

}  // namespace jointgan
