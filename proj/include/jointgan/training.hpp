#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointgan/adam.hpp"
#include "jointgan/config.hpp"
#include "jointgan/critic.hpp"
#include "jointgan/dataset.hpp"
#include "jointgan/generators.hpp"
#include "jointgan/objectives.hpp"
#include "jointgan/rng.hpp"
#include "jointgan/sampling.hpp"

namespace jointgan {

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters of one network with its optimiser, addressed by name in
/// checkpoints.
struct ParamGroup {
  std::string name;
  std::vector<ad::Tensor>* params;
  ad::AdamState* optimizer;
};

/// Two-step baseline: marginal generators trained first with their own
/// critics, then a separate conditional pair. No parameters are shared
/// between the stages.
struct BaselineModel {
  Mlp marginal_x;  // eps -> x
  Mlp marginal_y;  // eps -> y
  CriticNet critic_x;
  CriticNet critic_y;
  GeneratorBank conditionals;
  CriticNet critic_theta;  // q(x,y) vs q(x)p_theta (paired); the ALI critic when unpaired
  CriticNet critic_phi;    // q(x,y) vs q(y)p_phi (paired only)
  ad::AdamState opt_mx, opt_my, opt_cx, opt_cy, opt_cond, opt_ctheta, opt_cphi;
};

struct TrainingState {
  ExperimentConfig config;
  std::size_t dim_x = 0;
  std::size_t dim_y = 0;  // three-domain runs use dim_x for every domain
  std::size_t step = 0;
  Rng rng;
  GeneratorBank bank;         // paired_5, unpaired_4
  ThreeDomainBank tri;        // three_domain_6
  CriticNet critic;           // K-class critic of the joint modes
  ad::AdamState generator_opt;
  ad::AdamState critic_opt;
  std::vector<ad::Tensor> generator_params;
  std::optional<BaselineModel> baseline;

  /// Fresh state for `config` with dimensions taken from `data`.
  static TrainingState init(const ExperimentConfig& config, const Dataset& data);

  std::vector<ParamGroup> groups();
  std::size_t generator_parameter_count() const;
  /// Steps train() runs: total_steps, doubled for the two-stage baseline.
  std::size_t planned_steps() const;
  bool in_baseline_stage2() const;
};

/// Row-per-logged-step loss history. Wall-clock time goes to a separate
/// sidecar so the loss log itself is reproducible bit for bit.
struct TrainingLog {
  struct Row {
    std::size_t step;
    LossReport report;
    double wall_seconds;
  };
  std::size_t num_sources = 0;
  std::vector<Row> rows;

  void append(std::size_t step, const LossReport& report, double wall_seconds);
  std::string header() const;
  std::string format_row(const Row& row) const;
  std::string to_tsv() const;
  std::string timing_tsv() const;
};

/// Loads `path` in the view the config trains on; the unpaired shuffle is
/// seeded from the run seed.
Dataset load_training_data(const std::string& path, const ExperimentConfig& config);

/// Dataset view required by the config's mode; errors on a mismatch.
void check_data(const ExperimentConfig& config, const Dataset& data);

/// critic_steps critic updates then one generator update, every update on
/// fresh batches. Returns the generator-phase report.
LossReport train_step(TrainingState& state, const Dataset& data);

struct TrainOptions {
  std::string checkpoint_dir;  // empty disables checkpoints
  std::string log_path;        // empty disables the log file
};

struct TrainResult {
  TrainingState state;
  TrainingLog log;
};

TrainResult train(const ExperimentConfig& config, const Dataset& data, const TrainOptions& options = {});
/// Runs `state` on to planned_steps(); used for resume.
TrainingLog continue_training(TrainingState& state, const Dataset& data, const TrainOptions& options = {});
/// train() for the two-stage baseline config (mode forced to two_step_baseline).
TrainResult train_two_step_baseline(const ExperimentConfig& config, const Dataset& data,
                                    const TrainOptions& options = {});

// Checkpoints -------------------------------------------------------------

void save_checkpoint(TrainingState& state, const std::string& path);
std::string format_checkpoint(TrainingState& state);
/// Rebuilds the state from the manifest, then restores every tensor, the
/// optimiser moments and the rng position. A group, name or shape mismatch
/// is an error.
TrainingState load_checkpoint(const std::string& path);
TrainingState parse_checkpoint(const std::string& text);

// Sampling from a trained state ------------------------------------------

/// Fully generated joint samples: p_alpha(x) p_theta(y|x) for two domains,
/// alpha(x) nu(y|x) gamma(z|x,y) for three. One matrix per domain.
std::vector<Matrix> sample_joint(const TrainingState& state, std::size_t n, Rng& rng);
Matrix sample_marginal(const TrainingState& state, Domain domain, std::size_t n, Rng& rng);
/// The trained (x|y), (y|x) pair: the joint bank, or the baseline's separate
/// conditionals.
const GeneratorBank& conditional_bank(const TrainingState& state);

/// Completes observed domains with the trained conditionals. Two-domain
/// states accept exactly one observed domain; three-domain states accept a
/// leading prefix of x,y,z or z,y,x.
std::vector<Matrix> impute(const TrainingState& state, const std::map<Domain, Matrix>& observed, Rng& rng);

}  // namespace jointgan
