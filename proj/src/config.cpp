#include "jointgan/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace jointgan {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': invalid number '" + v + "'");
  }
  return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': invalid count '" + v + "'");
  }
  return out;
}

std::vector<std::size_t> parse_widths(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_u64(key, trim(item)));
  return out;
}

std::string widths(const std::vector<std::size_t>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) out += (i ? "," : "") + std::to_string(w[i]);
  return out;
}

}  // namespace

std::string to_string(TrainingMode m) {
  switch (m) {
    case TrainingMode::Paired5: return "paired_5";
    case TrainingMode::Unpaired4: return "unpaired_4";
    case TrainingMode::ThreeDomain6: return "three_domain_6";
    case TrainingMode::TwoStepBaseline: return "two_step_baseline";
  }
  return "paired_5";
}

TrainingMode parse_training_mode(const std::string& s) {
  for (auto m : {TrainingMode::Paired5, TrainingMode::Unpaired4, TrainingMode::ThreeDomain6,
                 TrainingMode::TwoStepBaseline}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("unknown mode '" + s + "'");
}

std::string to_string(DataView v) {
  switch (v) {
    case DataView::Auto: return "auto";
    case DataView::Paired: return "paired";
    case DataView::Unpaired: return "unpaired";
    case DataView::Overlapping: return "overlapping";
  }
  return "auto";
}

DataView parse_data_view(const std::string& s) {
  for (auto v : {DataView::Auto, DataView::Paired, DataView::Unpaired, DataView::Overlapping}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown data_view '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning_rate must be nonnegative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ConfigError("adam_beta1 must lie in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ConfigError("adam_beta2 must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (critic_steps == 0) throw ConfigError("critic_steps must be positive");
  if (noise_dim == 0) throw ConfigError("noise_dim must be positive");
  if (log_every == 0) throw ConfigError("log_every must be positive");
  if (checkpoint_every == 0) throw ConfigError("checkpoint_every must be positive");
  for (auto w : generator_hidden) {
    if (w == 0) throw ConfigError("generator_hidden widths must be positive");
  }
  for (auto w : critic_hidden) {
    if (w == 0) throw ConfigError("critic_hidden widths must be positive");
  }
  if (!(leaky_slope >= 0.0 && leaky_slope < 1.0)) throw ConfigError("leaky_slope must lie in [0, 1)");
  if (!(cycle_weight >= 0.0) || !std::isfinite(cycle_weight)) throw ConfigError("cycle_weight must be nonnegative");
  if (loss_style != "default") parse_loss_style(loss_style);
  const auto view = resolved_view();
  const bool ok = (mode == TrainingMode::Paired5 && view == DataView::Paired) ||
                  (mode == TrainingMode::Unpaired4 && view == DataView::Unpaired) ||
                  (mode == TrainingMode::ThreeDomain6 && view == DataView::Overlapping) ||
                  (mode == TrainingMode::TwoStepBaseline && view != DataView::Overlapping);
  if (!ok) throw ConfigError("data_view " + to_string(view) + " does not fit mode " + to_string(mode));
}

LossStyle ExperimentConfig::resolved_loss_style() const {
  if (loss_style != "default") return parse_loss_style(loss_style);
  return mode == TrainingMode::Paired5 || mode == TrainingMode::TwoStepBaseline ? LossStyle::Nonsaturating
                                                                               : LossStyle::Saturating;
}

double ExperimentConfig::learning_rate_at(std::size_t step) const {
  if (lr_schedule == "constant" || total_steps == 0) return learning_rate;
  const double left = 1.0 - static_cast<double>(step) / static_cast<double>(total_steps);
  return learning_rate * std::max(0.0, left);
}

DataView ExperimentConfig::resolved_view() const {
  if (data_view != DataView::Auto) return data_view;
  switch (mode) {
    case TrainingMode::Paired5:
    case TrainingMode::TwoStepBaseline: return DataView::Paired;
    case TrainingMode::Unpaired4: return DataView::Unpaired;
    case TrainingMode::ThreeDomain6: return DataView::Overlapping;
  }
  return DataView::Paired;
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
  return {
      {"mode", to_string(mode)},
      {"data_view", to_string(data_view)},
      {"learning_rate", fmt(learning_rate)},
      {"lr_schedule", lr_schedule},
      {"adam_beta1", fmt(adam_beta1)},
      {"adam_beta2", fmt(adam_beta2)},
      {"batch_size", std::to_string(batch_size)},
      {"total_steps", std::to_string(total_steps)},
      {"critic_steps", std::to_string(critic_steps)},
      {"noise_dim", std::to_string(noise_dim)},
      {"generator_hidden", widths(generator_hidden)},
      {"critic_hidden", widths(critic_hidden)},
      {"generator_activation", to_string(generator_activation)},
      {"leaky_slope", fmt(leaky_slope)},
      {"detach_chain_condition", detach_chain_condition ? "true" : "false"},
      {"cycle_weight", fmt(cycle_weight)},
      {"cycle_norm", to_string(cycle_norm)},
      {"loss_style", loss_style},
      {"seed", std::to_string(seed)},
      {"log_every", std::to_string(log_every)},
      {"checkpoint_every", std::to_string(checkpoint_every)},
  };
}

std::string ExperimentConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : entries()) out += k + " = " + v + "\n";
  return out;
}

void ExperimentConfig::set(const std::string& key, const std::string& value) {
  const auto v = trim(value);
  if (key == "mode") mode = parse_training_mode(v);
  else if (key == "data_view") data_view = parse_data_view(v);
  else if (key == "learning_rate") learning_rate = parse_double(key, v);
  else if (key == "lr_schedule") {
    if (v != "constant" && v != "linear") throw ConfigError("unknown lr_schedule '" + v + "'");
    lr_schedule = v;
  } else if (key == "detach_chain_condition") {
    if (v != "true" && v != "false") throw ConfigError("detach_chain_condition must be true or false");
    detach_chain_condition = v == "true";
  } else if (key == "adam_beta1") adam_beta1 = parse_double(key, v);
  else if (key == "adam_beta2") adam_beta2 = parse_double(key, v);
  else if (key == "batch_size") batch_size = parse_u64(key, v);
  else if (key == "total_steps") total_steps = parse_u64(key, v);
  else if (key == "critic_steps") critic_steps = parse_u64(key, v);
  else if (key == "noise_dim") noise_dim = parse_u64(key, v);
  else if (key == "generator_hidden") generator_hidden = parse_widths(key, v);
  else if (key == "critic_hidden") critic_hidden = parse_widths(key, v);
  else if (key == "generator_activation") {
    try {
      generator_activation = parse_activation(v);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "leaky_slope") leaky_slope = parse_double(key, v);
  else if (key == "cycle_weight") cycle_weight = parse_double(key, v);
  else if (key == "cycle_norm") {
    try {
      cycle_norm = parse_cycle_norm(v);
    } catch (const ObjectiveError& e) {
      throw ConfigError(e.what());
    }
  } else if (key == "loss_style") {
    if (v != "default" && v != "saturating" && v != "nonsaturating") {
      throw ConfigError("unknown loss_style '" + v + "'");
    }
    loss_style = v;
  } else if (key == "seed") seed = parse_u64(key, v);
  else if (key == "log_every") log_every = parse_u64(key, v);
  else if (key == "checkpoint_every") checkpoint_every = parse_u64(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
  ExperimentConfig c;
  std::istringstream is(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + " is not key = value");
    }
    c.set(trim(line.substr(0, eq)), line.substr(eq + 1));
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_text(ss.str());
}

}  // namespace jointgan
