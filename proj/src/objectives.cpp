#include "jointgan/objectives.hpp"

#include <cmath>

#include "jointgan/ops.hpp"

namespace jointgan {

namespace {

void check_sources(std::span<const JointBatch> batches, std::size_t first, std::size_t count,
                   const char* what) {
  if (batches.size() < count) {
    throw ObjectiveError(std::string(what) + " needs sources 1.." + std::to_string(count) + ", got " +
                         std::to_string(batches.size()));
  }
  for (std::size_t i = first; i < count; ++i) {
    if (batches[i].source != i + 1) {
      throw ObjectiveError(std::string(what) + ": missing source " + std::to_string(i + 1));
    }
    if (batches[i].rows() == 0) {
      throw ObjectiveError(std::string(what) + ": empty batch for source " + std::to_string(i + 1));
    }
  }
}

/// Mean of column `cls` over rows [begin, end) of a [N, K] tensor.
ad::Tensor block_mean(const ad::Tensor& lp, std::size_t begin, std::size_t end, std::size_t cls) {
  return ad::mean(ad::slice(ad::slice(lp, 0, begin, end), 1, cls, cls + 1));
}

/// Mean over rows [begin, end) of the average log-probability of every class
/// except `skip`.
ad::Tensor others_mean(const ad::Tensor& lp, std::size_t begin, std::size_t end, std::size_t skip) {
  const auto k = lp.cols();
  auto rows = ad::slice(lp, 0, begin, end);
  ad::Tensor total;
  for (std::size_t j = 0; j < k; ++j) {
    if (j == skip) continue;
    auto m = ad::mean(ad::slice(rows, 1, j, j + 1));
    total = total.defined() ? total + m : m;
  }
  return ad::scale(total, 1.0 / static_cast<double>(k - 1));
}

struct Scored {
  ad::Tensor log_probs;
  std::vector<std::size_t> offsets;  // offsets[i]..offsets[i+1] are source i+1
};

Scored score(const CriticNet& critic, std::span<const JointBatch> batches, bool detach_samples,
             bool frozen_critic) {
  Scored s;
  s.log_probs = stacked_log_probs(critic, batches, detach_samples, frozen_critic);
  s.offsets.push_back(0);
  for (const auto& b : batches) s.offsets.push_back(s.offsets.back() + b.rows());
  return s;
}

ad::Tensor sum_of(const std::vector<ad::Tensor>& terms) {
  ad::Tensor total = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) total = total + terms[i];
  return total;
}

/// Generator-phase losses over all sources of a K-class mode with no
/// generator-free source.
Losses own_class_losses(const CriticNet& critic, std::span<const JointBatch> batches, LossStyle style) {
  const auto k = batches.size();
  auto s = score(critic, batches, false, true);
  Losses out;
  std::vector<ad::Tensor> own, flipped;
  for (std::size_t i = 0; i < k; ++i) {
    own.push_back(block_mean(s.log_probs, s.offsets[i], s.offsets[i + 1], i));
    out.report.per_source_logprob.push_back(own.back().item());
    if (style == LossStyle::Nonsaturating) {
      flipped.push_back(others_mean(s.log_probs, s.offsets[i], s.offsets[i + 1], i));
    }
  }
  out.generator_loss = style == LossStyle::Saturating ? sum_of(own) : ad::scale(sum_of(flipped), -1.0);
  double total = 0.0;
  for (double v : out.report.per_source_logprob) total += v;
  out.report.critic_loss = -total;
  return out;
}

}  // namespace

std::string to_string(LossStyle s) { return s == LossStyle::Saturating ? "saturating" : "nonsaturating"; }

LossStyle parse_loss_style(const std::string& s) {
  if (s == "saturating") return LossStyle::Saturating;
  if (s == "nonsaturating") return LossStyle::Nonsaturating;
  throw ObjectiveError("unknown loss style '" + s + "'");
}

std::string to_string(CycleNorm n) { return n == CycleNorm::L1 ? "l1" : "l2"; }

CycleNorm parse_cycle_norm(const std::string& s) {
  if (s == "l1" || s == "L1") return CycleNorm::L1;
  if (s == "l2" || s == "L2") return CycleNorm::L2;
  throw ObjectiveError("unknown cycle norm '" + s + "'");
}

void CycleConfig::validate() const {
  if (!(weight >= 0.0) || !std::isfinite(weight)) {
    throw ObjectiveError("cycle weight must be a finite nonnegative number");
  }
}

ad::Tensor stacked_log_probs(const CriticNet& critic, std::span<const JointBatch> batches,
                             bool detach_samples, bool frozen_critic) {
  if (batches.empty()) throw ObjectiveError("no batches to score");
  const auto domains = batches.front().values.size();
  std::vector<ad::Tensor> columns;
  for (std::size_t d = 0; d < domains; ++d) {
    std::vector<ad::Tensor> parts;
    for (const auto& b : batches) {
      if (b.values.size() != domains) throw ObjectiveError("batches disagree on domain count");
      parts.push_back(detach_samples ? b.values[d].detach() : b.values[d]);
    }
    columns.push_back(parts.size() == 1 ? parts.front() : ad::concat(parts, 0));
  }
  if (critic.num_classes() < batches.size()) {
    throw ObjectiveError("critic has " + std::to_string(critic.num_classes()) + " classes for " +
                         std::to_string(batches.size()) + " sources");
  }
  return ad::clamp_min(critic.log_probs(columns, frozen_critic), kLogProbFloor);
}

ad::Tensor classification_critic_loss(const CriticNet& critic, std::span<const JointBatch> batches) {
  const auto k = batches.size();
  check_sources(batches, 0, k, "critic loss");
  if (critic.num_classes() != k) {
    throw ObjectiveError("critic loss: " + std::to_string(k) + " sources for a " +
                         std::to_string(critic.num_classes()) + "-class critic");
  }
  auto s = score(critic, batches, true, false);
  std::vector<ad::Tensor> terms;
  for (std::size_t i = 0; i < k; ++i) terms.push_back(block_mean(s.log_probs, s.offsets[i], s.offsets[i + 1], i));
  return ad::scale(sum_of(terms), -1.0);
}

ad::Tensor paired_critic_loss(const CriticNet& critic, std::span<const JointBatch> batches) {
  if (batches.size() != 5) {
    throw ObjectiveError("paired critic loss needs exactly 5 sources, got " + std::to_string(batches.size()));
  }
  return classification_critic_loss(critic, batches);
}

Losses paired_generator_losses(const CriticNet& critic, std::span<const JointBatch> batches,
                               LossStyle style) {
  check_sources(batches, 0, 4, "paired generator loss");
  if (critic.num_classes() != 5) throw ObjectiveError("paired generator loss needs a 5-class critic");
  const auto n = std::min<std::size_t>(batches.size(), 5);
  auto s = score(critic, batches.first(n), false, true);
  Losses out;
  std::vector<ad::Tensor> terms;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto own = block_mean(s.log_probs, s.offsets[i], s.offsets[i + 1], i);
    out.report.per_source_logprob.push_back(own.item());
    total += own.item();
    if (i == 4) break;
    terms.push_back(style == LossStyle::Saturating ? own
                                                   : block_mean(s.log_probs, s.offsets[i], s.offsets[i + 1], 4));
  }
  out.generator_loss = style == LossStyle::Saturating ? sum_of(terms) : ad::scale(sum_of(terms), -1.0);
  out.report.critic_loss = -total;
  out.report.generator_loss = out.generator_loss.item();
  return out;
}

ad::Tensor paired_generator_loss(const CriticNet& critic, std::span<const JointBatch> batches,
                                 LossStyle style) {
  return paired_generator_losses(critic, batches, style).generator_loss;
}

ad::Tensor cycle_penalty(const GeneratorBank& bank, const ad::Tensor& x, const ad::Tensor& y,
                         CycleNorm norm, Rng& rng) {
  auto dist = [norm](const ad::Tensor& a, const ad::Tensor& b) {
    auto diff = a - b;
    return ad::mean(norm == CycleNorm::L1 ? ad::l1_norm(diff) : ad::l2_norm(diff));
  };
  const auto n = x.rows(), m = y.rows();
  auto y_tilde = bank.sample_conditional(Direction::YGivenX, x, rng.normal_tensor(n, bank.noise_dim(Domain::Y)));
  auto x_hat = bank.sample_conditional(Direction::XGivenY, y_tilde, rng.normal_tensor(n, bank.noise_dim(Domain::X)));
  auto x_tilde = bank.sample_conditional(Direction::XGivenY, y, rng.normal_tensor(m, bank.noise_dim(Domain::X)));
  auto y_hat = bank.sample_conditional(Direction::YGivenX, x_tilde, rng.normal_tensor(m, bank.noise_dim(Domain::Y)));
  return dist(x, x_hat) + dist(y, y_hat);
}

Losses unpaired_losses(const CriticNet& critic, std::span<const JointBatch> batches,
                       const CycleConfig& cycle, const GeneratorBank& bank, Rng& rng, LossStyle style) {
  cycle.validate();
  if (batches.size() != 4) {
    throw ObjectiveError("unpaired losses need exactly 4 sources, got " + std::to_string(batches.size()));
  }
  check_sources(batches, 0, 4, "unpaired losses");
  for (const auto& b : batches) {
    if (b.mode != SourceMode::Unpaired4) {
      throw ObjectiveError("unpaired losses received batches drawn in " + to_string(b.mode) + " mode");
    }
  }
  if (critic.num_classes() != 4) throw ObjectiveError("unpaired losses need a 4-class critic");
  auto out = own_class_losses(critic, batches, style);
  if (cycle.weight > 0.0) {
    auto r = cycle_penalty(bank, batches[0].values[0].detach(), batches[1].values[1].detach(), cycle.norm, rng);
    out.report.cycle_penalty = r.item();
    out.generator_loss = out.generator_loss + ad::scale(r, cycle.weight);
  }
  out.report.generator_loss = out.generator_loss.item();
  return out;
}

Losses three_domain_losses(const CriticNet& critic, std::span<const JointBatch> batches,
                           const ThreeDomainBank& bank, LossStyle style) {
  if (batches.size() != 6) {
    throw ObjectiveError("three-domain losses need exactly 6 sources, got " + std::to_string(batches.size()));
  }
  check_sources(batches, 0, 6, "three-domain losses");
  if (critic.num_classes() != 6) throw ObjectiveError("three-domain losses need a 6-class critic");
  if (critic.input_dim() != 3 * bank.spec().dim) {
    throw ObjectiveError("critic input dimension does not match the three-domain bank");
  }
  auto out = own_class_losses(critic, batches, style);
  out.report.generator_loss = out.generator_loss.item();
  return out;
}

Losses gan_loss(const CriticNet& critic2, std::span<const ad::Tensor> real, std::span<const ad::Tensor> fake,
                Phase phase) {
  if (critic2.num_classes() != 2) throw ObjectiveError("gan loss needs a 2-class critic");
  if (real.empty() || fake.empty() || real.front().rows() == 0 || fake.front().rows() == 0) {
    throw ObjectiveError("gan loss: empty batch");
  }
  JointBatch r{SourceMode::Gan2, 1, {real.begin(), real.end()}, std::vector<bool>(real.size(), false)};
  JointBatch f{SourceMode::Gan2, 2, {fake.begin(), fake.end()}, std::vector<bool>(fake.size(), true)};
  const JointBatch both[] = {r, f};
  const auto n = r.rows(), m = f.rows();
  Losses out;
  if (phase != Phase::Generator) {
    auto lp = stacked_log_probs(critic2, both, true, false);
    auto a = block_mean(lp, 0, n, 0), b = block_mean(lp, n, n + m, 1);
    out.critic_loss = ad::scale(a + b, -1.0);
    out.report.per_source_logprob = {a.item(), b.item()};
    out.report.critic_loss = out.critic_loss.item();
  }
  if (phase != Phase::Critic) {
    auto lp = stacked_log_probs(critic2, std::span<const JointBatch>(both + 1, 1), false, true);
    out.generator_loss = ad::scale(block_mean(lp, 0, m, 0), -1.0);
    out.report.generator_loss = out.generator_loss.item();
  }
  return out;
}

Losses ali_loss(const CriticNet& critic2, const JointBatch& theta_batch, const JointBatch& phi_batch, Phase phase) {
  if (critic2.num_classes() != 2) throw ObjectiveError("ali loss needs a 2-class critic");
  if (theta_batch.rows() == 0 || phi_batch.rows() == 0) throw ObjectiveError("ali loss: empty batch");
  const JointBatch both[] = {theta_batch, phi_batch};
  const auto n = theta_batch.rows(), m = phi_batch.rows();
  Losses out;
  if (phase != Phase::Generator) {
    auto lp = stacked_log_probs(critic2, both, true, false);
    auto a = block_mean(lp, 0, n, 0), b = block_mean(lp, n, n + m, 1);
    out.critic_loss = ad::scale(a + b, -1.0);
    out.report.per_source_logprob = {a.item(), b.item()};
    out.report.critic_loss = out.critic_loss.item();
  }
  if (phase != Phase::Critic) {
    auto lp = stacked_log_probs(critic2, both, false, true);
    out.generator_loss = ad::scale(block_mean(lp, 0, n, 1) + block_mean(lp, n, n + m, 0), -1.0);
    out.report.generator_loss = out.generator_loss.item();
  }
  return out;
}

double equilibrium_value(std::size_t k) {
  if (k < 2) throw ObjectiveError("equilibrium value needs K >= 2");
  const double kk = static_cast<double>(k);
  return kk * std::log(1.0 / kk);
}

}  // namespace jointgan
