#pragma once

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointgan/critic.hpp"
#include "jointgan/generators.hpp"
#include "jointgan/rng.hpp"
#include "jointgan/sampling.hpp"
#include "jointgan/tensor.hpp"

namespace jointgan {

class ObjectiveError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Floor applied to critic log-probabilities, ln(1e-12).
inline constexpr double kLogProbFloor = -27.631021115928547;

enum class LossStyle { Saturating, Nonsaturating };
enum class CycleNorm { L1, L2 };

std::string to_string(LossStyle s);
LossStyle parse_loss_style(const std::string& s);
std::string to_string(CycleNorm n);
CycleNorm parse_cycle_norm(const std::string& s);

struct CycleConfig {
  double weight = 10.0;
  CycleNorm norm = CycleNorm::L1;

  void validate() const;
};

struct LossReport {
  double critic_loss = 0.0;
  double generator_loss = 0.0;
  std::vector<double> per_source_logprob;  // mean log g[k] on source k
  double cycle_penalty = 0.0;
};

/// Differentiable losses plus their scalar report.
struct Losses {
  ad::Tensor critic_loss;     // gradients reach only critic parameters
  ad::Tensor generator_loss;  // gradients reach only generator parameters
  LossReport report;
};

/// Critic log-probabilities [N, K] on the row-stacked batches.
/// `detach_samples` cuts the graph into the generators; `frozen_critic`
/// cuts it into the critic.
ad::Tensor stacked_log_probs(const CriticNet& critic, std::span<const JointBatch> batches,
                             bool detach_samples, bool frozen_critic);

/// -sum_k mean log g[k] over sources 1..K, K = batches.size(); samples are
/// treated as constants.
ad::Tensor classification_critic_loss(const CriticNet& critic, std::span<const JointBatch> batches);

/// classification_critic_loss over exactly the five paired sources.
ad::Tensor paired_critic_loss(const CriticNet& critic, std::span<const JointBatch> batches);

/// Sources 1..4 (a trailing source 5 is ignored). Saturating:
/// +sum_k mean log g[k]; nonsaturating: -sum_k mean log g[5].
ad::Tensor paired_generator_loss(const CriticNet& critic, std::span<const JointBatch> batches,
                                 LossStyle style = LossStyle::Nonsaturating);

/// Generator-phase report for paired mode from one frozen-critic pass.
Losses paired_generator_losses(const CriticNet& critic, std::span<const JointBatch> batches,
                               LossStyle style = LossStyle::Nonsaturating);

/// R = mean ||x - phi(theta(x))|| + mean ||y - theta(phi(y))||, each pass
/// with fresh noise.
ad::Tensor cycle_penalty(const GeneratorBank& bank, const ad::Tensor& x, const ad::Tensor& y,
                         CycleNorm norm, Rng& rng);

/// Four unpaired sources. The cycle uses the empirical x of source 1 and the
/// empirical y of source 2. Nonsaturating style has no real class to target,
/// so each source is pushed toward the other three classes.
Losses unpaired_losses(const CriticNet& critic, std::span<const JointBatch> batches,
                       const CycleConfig& cycle, const GeneratorBank& bank, Rng& rng,
                       LossStyle style = LossStyle::Saturating);

/// Six three-domain sources; every source has a generated component.
Losses three_domain_losses(const CriticNet& critic, std::span<const JointBatch> batches,
                           const ThreeDomainBank& bank, LossStyle style = LossStyle::Saturating);

enum class Phase { Critic, Generator, Both };

/// Two-class adversarial loss. Class 1 (index 0) is the real side.
/// Generator loss is the non-saturating -mean log g_fake[real].
/// Tensors not requested by `phase` are left undefined.
Losses gan_loss(const CriticNet& critic2, std::span<const ad::Tensor> real,
                std::span<const ad::Tensor> fake, Phase phase = Phase::Both);

/// p_theta(x, y) as class 1 against p_phi(x, y) as class 2; the generator
/// loss swaps the labels so both theta and phi receive gradients.
Losses ali_loss(const CriticNet& critic2, const JointBatch& theta_batch, const JointBatch& phi_batch,
                Phase phase = Phase::Both);

/// K ln(1/K).
double equilibrium_value(std::size_t k);

}  // namespace jointgan
