#include "jointgan/training.hpp"

#include <bit>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "jointgan/ops.hpp"

namespace jointgan {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Pairing required_pairing(const ExperimentConfig& c) {
  switch (c.resolved_view()) {
    case DataView::Unpaired: return Pairing::Unpaired;
    case DataView::Overlapping: return Pairing::TwoOverlappingPairs;
    default: return Pairing::Paired;
  }
}

TwoDomainView two_domain_view(const Dataset& data) {
  if (data.pairing() == Pairing::Paired) return PairedView(data);
  return UnpairedView(data);
}

GeneratorArch arch_of(const ExperimentConfig& c) {
  GeneratorArch a;
  a.hidden = c.generator_hidden;
  a.activation = c.generator_activation;
  a.leaky_slope = c.leaky_slope;
  return a;
}

CriticNet make_critic(const ExperimentConfig& c, std::size_t input_dim, std::size_t classes, std::uint64_t stream) {
  CriticSpec s;
  s.input_dim = input_dim;
  s.num_classes = classes;
  s.hidden = c.critic_hidden;
  s.leaky_slope = c.leaky_slope;
  s.seed = derive_seed(c.seed, stream);
  return CriticNet(s);
}

ad::AdamOptions adam_options(const ExperimentConfig& c) {
  ad::AdamOptions o;
  o.learning_rate = c.learning_rate;
  o.beta1 = c.adam_beta1;
  o.beta2 = c.adam_beta2;
  return o;
}

/// Completed steps within the current stage (the baseline restarts its
/// schedule at stage 2).
std::size_t stage_step(const TrainingState& s) {
  return s.in_baseline_stage2() ? s.step - s.config.total_steps : s.step;
}

void step_on(std::vector<ad::Tensor>& params, ad::AdamState& opt, const TrainingState& s) {
  opt.options.learning_rate = s.config.learning_rate_at(stage_step(s));
  ad::adam_step(params, opt);
}

std::string describe(const std::vector<JointBatch>& batches) {
  std::ostringstream os;
  for (const auto& b : batches) {
    os << " source " << b.source << ":";
    for (std::size_t d = 0; d < b.values.size(); ++d) {
      const auto v = b.values[d].data();
      double mean = 0.0, sq = 0.0;
      std::size_t bad = 0;
      for (double x : v) {
        if (!std::isfinite(x)) {
          ++bad;
          continue;
        }
        mean += x;
        sq += x * x;
      }
      const double n = static_cast<double>(v.size() - bad);
      mean = n > 0 ? mean / n : 0.0;
      const double sd = n > 0 ? std::sqrt(std::max(0.0, sq / n - mean * mean)) : 0.0;
      os << " d" << d << "(mean " << mean << ", sd " << sd << ", nonfinite " << bad << ")";
    }
  }
  return os.str();
}

void sync_stage(TrainingState& s) {
  if (!s.baseline) return;
  const bool stage2 = s.in_baseline_stage2();
  s.baseline->marginal_x.set_trainable(!stage2);
  s.baseline->marginal_y.set_trainable(!stage2);
}

LossReport joint_step(TrainingState& s, const Dataset& data, std::vector<JointBatch>& last) {
  const auto& c = s.config;
  const auto n = c.batch_size;
  const bool three = c.mode == TrainingMode::ThreeDomain6;
  const auto smode = c.mode == TrainingMode::Paired5 ? SourceMode::Paired5 : SourceMode::Unpaired4;
  const auto spec = SourceSpec::for_mode(smode);
  std::optional<TwoDomainView> view;
  std::optional<OverlappingPairsView> triview;
  if (three) triview.emplace(data);
  else view.emplace(two_domain_view(data));
  auto draw = [&] {
    return three ? draw_three_domain_all(s.tri, *triview, n, s.rng) : draw_all(spec, s.bank, *view, n, s.rng, c.detach_chain_condition);
  };

  for (std::size_t i = 0; i < c.critic_steps; ++i) {
    {
      ad::NoGradGuard no_grad;
      last = draw();
    }
    ad::backward(classification_critic_loss(s.critic, last));
    step_on(s.critic.parameters(), s.critic_opt, s);
  }
  last = draw();
  const auto style = c.resolved_loss_style();
  Losses l;
  switch (c.mode) {
    case TrainingMode::Paired5: l = paired_generator_losses(s.critic, last, style); break;
    case TrainingMode::Unpaired4:
      l = unpaired_losses(s.critic, last, CycleConfig{c.cycle_weight, c.cycle_norm}, s.bank, s.rng, style);
      break;
    case TrainingMode::ThreeDomain6: l = three_domain_losses(s.critic, last, s.tri, style); break;
    case TrainingMode::TwoStepBaseline: break;
  }
  ad::backward(l.generator_loss);
  step_on(s.generator_params, s.generator_opt, s);
  return l.report;
}

LossReport baseline_stage1(TrainingState& s, const Dataset& data, std::vector<JointBatch>& last) {
  auto& b = *s.baseline;
  const auto& c = s.config;
  const auto n = c.batch_size;
  const auto view = two_domain_view(data);
  const Matrix& xcol = std::visit([](const auto& v) -> const Matrix& { return v.x(); }, view);
  const Matrix& ycol = std::visit([](const auto& v) -> const Matrix& { return v.y(); }, view);
  auto draw = [&](bool grad) {
    std::optional<ad::NoGradGuard> guard;
    if (!grad) guard.emplace();
    auto rx = xcol.gather(draw_rows(xcol.rows, n, s.rng));
    auto fx = b.marginal_x.forward(s.rng.normal_tensor(n, c.noise_dim));
    auto ry = ycol.gather(draw_rows(ycol.rows, n, s.rng));
    auto fy = b.marginal_y.forward(s.rng.normal_tensor(n, c.noise_dim));
    last = {JointBatch{SourceMode::Gan2, 1, {rx, ry}, {false, false}},
            JointBatch{SourceMode::Gan2, 2, {fx, fy}, {grad, grad}}};
  };

  LossReport report;
  for (std::size_t i = 0; i < c.critic_steps; ++i) {
    draw(false);
    auto lx = gan_loss(b.critic_x, {&last[0].values[0], 1}, {&last[1].values[0], 1}, Phase::Critic);
    auto ly = gan_loss(b.critic_y, {&last[0].values[1], 1}, {&last[1].values[1], 1}, Phase::Critic);
    ad::backward(lx.critic_loss + ly.critic_loss);
    step_on(b.critic_x.parameters(), b.opt_cx, s);
    step_on(b.critic_y.parameters(), b.opt_cy, s);
    report.critic_loss = lx.report.critic_loss + ly.report.critic_loss;
    report.per_source_logprob = {lx.report.per_source_logprob[0] + ly.report.per_source_logprob[0],
                                 lx.report.per_source_logprob[1] + ly.report.per_source_logprob[1]};
  }
  draw(true);
  auto gx = gan_loss(b.critic_x, {&last[0].values[0], 1}, {&last[1].values[0], 1}, Phase::Generator);
  auto gy = gan_loss(b.critic_y, {&last[0].values[1], 1}, {&last[1].values[1], 1}, Phase::Generator);
  ad::backward(gx.generator_loss + gy.generator_loss);
  step_on(b.marginal_x.parameters(), b.opt_mx, s);
  step_on(b.marginal_y.parameters(), b.opt_my, s);
  report.generator_loss = gx.report.generator_loss + gy.report.generator_loss;
  return report;
}

LossReport baseline_stage2(TrainingState& s, const Dataset& data, std::vector<JointBatch>& last) {
  auto& b = *s.baseline;
  const auto& c = s.config;
  const auto n = c.batch_size;
  const bool paired = data.pairing() == Pairing::Paired;
  const auto view = two_domain_view(data);
  const auto spec = SourceSpec::for_mode(paired ? SourceMode::Paired5 : SourceMode::Ali2);
  auto draw = [&] {
    last = {draw_batch(spec, 1, b.conditionals, view, n, s.rng), draw_batch(spec, 2, b.conditionals, view, n, s.rng)};
    if (paired) last.push_back(draw_batch(spec, 5, b.conditionals, view, n, s.rng));
  };

  LossReport report;
  for (std::size_t i = 0; i < c.critic_steps; ++i) {
    {
      ad::NoGradGuard no_grad;
      draw();
    }
    if (paired) {
      auto lt = gan_loss(b.critic_theta, last[2].values, last[0].values, Phase::Critic);
      auto lp = gan_loss(b.critic_phi, last[2].values, last[1].values, Phase::Critic);
      ad::backward(lt.critic_loss + lp.critic_loss);
      step_on(b.critic_theta.parameters(), b.opt_ctheta, s);
      step_on(b.critic_phi.parameters(), b.opt_cphi, s);
      report.critic_loss = lt.report.critic_loss + lp.report.critic_loss;
      report.per_source_logprob = {lt.report.per_source_logprob[0] + lp.report.per_source_logprob[0],
                                   lt.report.per_source_logprob[1] + lp.report.per_source_logprob[1]};
    } else {
      auto la = ali_loss(b.critic_theta, last[0], last[1], Phase::Critic);
      ad::backward(la.critic_loss);
      step_on(b.critic_theta.parameters(), b.opt_ctheta, s);
      report.critic_loss = la.report.critic_loss;
      report.per_source_logprob = la.report.per_source_logprob;
    }
  }
  draw();
  ad::Tensor loss;
  if (paired) {
    auto lt = gan_loss(b.critic_theta, last[2].values, last[0].values, Phase::Generator);
    auto lp = gan_loss(b.critic_phi, last[2].values, last[1].values, Phase::Generator);
    loss = lt.generator_loss + lp.generator_loss;
  } else {
    loss = ali_loss(b.critic_theta, last[0], last[1], Phase::Generator).generator_loss;
    CycleConfig cycle{c.cycle_weight, c.cycle_norm};
    cycle.validate();
    if (cycle.weight > 0.0) {
      auto r = cycle_penalty(b.conditionals, last[0].values[0].detach(), last[1].values[1].detach(), cycle.norm, s.rng);
      report.cycle_penalty = r.item();
      loss = loss + ad::scale(r, cycle.weight);
    }
  }
  report.generator_loss = loss.item();
  ad::backward(loss);
  step_on(s.generator_params, b.opt_cond, s);
  return report;
}

}  // namespace

Dataset load_training_data(const std::string& path, const ExperimentConfig& config) {
  return load_dataset(path, required_pairing(config), derive_seed(config.seed, 7));
}

void check_data(const ExperimentConfig& config, const Dataset& data) {
  const auto need = required_pairing(config);
  if (data.pairing() != need) {
    throw TrainingError("mode " + to_string(config.mode) + " with data_view " + to_string(config.resolved_view()) +
                        " needs a " + to_string(need) + " dataset, got " + to_string(data.pairing()));
  }
}

namespace {

TrainingState build_state(const ExperimentConfig& config, std::size_t dx, std::size_t dy) {
  config.validate();
  TrainingState s;
  s.config = config;
  s.dim_x = dx;
  s.dim_y = dy;
  s.rng = Rng(derive_seed(config.seed, 301));
  const auto opts = adam_options(config);
  const auto arch = arch_of(config);
  switch (config.mode) {
    case TrainingMode::Paired5:
    case TrainingMode::Unpaired4: {
      s.bank = GeneratorBank(BankSpec{dx, dy, config.noise_dim, config.noise_dim, arch, derive_seed(config.seed, 1)});
      s.critic = make_critic(config, dx + dy, config.mode == TrainingMode::Paired5 ? 5 : 4, 2);
      s.generator_params = s.bank.parameters();
      break;
    }
    case TrainingMode::ThreeDomain6: {
      if (dx != dy) throw TrainingError("three-domain mode needs equal x, y and z dimensions");
      s.tri = ThreeDomainBank(ThreeDomainSpec{dx, config.noise_dim, arch, derive_seed(config.seed, 1)});
      s.critic = make_critic(config, 3 * dx, 6, 2);
      s.generator_params = s.tri.parameters();
      break;
    }
    case TrainingMode::TwoStepBaseline: {
      BaselineModel b;
      Rng init(derive_seed(config.seed, 401));
      MlpSpec mx{config.noise_dim, config.generator_hidden, dx, config.generator_activation, config.leaky_slope, false};
      MlpSpec my{config.noise_dim, config.generator_hidden, dy, config.generator_activation, config.leaky_slope, false};
      b.marginal_x = Mlp(mx, init);
      b.marginal_y = Mlp(my, init);
      b.critic_x = make_critic(config, dx, 2, 402);
      b.critic_y = make_critic(config, dy, 2, 403);
      b.conditionals = GeneratorBank(BankSpec{dx, dy, config.noise_dim, config.noise_dim, arch, derive_seed(config.seed, 404)});
      b.critic_theta = make_critic(config, dx + dy, 2, 405);
      b.critic_phi = make_critic(config, dx + dy, 2, 406);
      b.opt_mx = ad::AdamState(b.marginal_x.parameters(), opts);
      b.opt_my = ad::AdamState(b.marginal_y.parameters(), opts);
      b.opt_cx = ad::AdamState(b.critic_x.parameters(), opts);
      b.opt_cy = ad::AdamState(b.critic_y.parameters(), opts);
      b.opt_cond = ad::AdamState(b.conditionals.parameters(), opts);
      b.opt_ctheta = ad::AdamState(b.critic_theta.parameters(), opts);
      b.opt_cphi = ad::AdamState(b.critic_phi.parameters(), opts);
      s.generator_params = b.conditionals.parameters();
      s.baseline = std::move(b);
      return s;
    }
  }
  s.generator_opt = ad::AdamState(s.generator_params, opts);
  s.critic_opt = ad::AdamState(s.critic.parameters(), opts);
  return s;
}

}  // namespace

TrainingState TrainingState::init(const ExperimentConfig& config, const Dataset& data) {
  config.validate();
  check_data(config, data);
  if (config.mode == TrainingMode::ThreeDomain6) {
    const auto d = data.column("xy.x").cols;
    for (const char* name : {"xy.y", "yz.y", "yz.z"}) {
      if (data.column(name).cols != d) throw TrainingError("three-domain mode needs equal x, y and z dimensions");
    }
    return build_state(config, d, d);
  }
  return build_state(config, data.column("x").cols, data.column("y").cols);
}

std::vector<ParamGroup> TrainingState::groups() {
  if (!baseline) {
    return {{"generators", &generator_params, &generator_opt}, {"critic", &critic.parameters(), &critic_opt}};
  }
  auto& b = *baseline;
  return {{"marginal_x", &b.marginal_x.parameters(), &b.opt_mx},
          {"marginal_y", &b.marginal_y.parameters(), &b.opt_my},
          {"critic_x", &b.critic_x.parameters(), &b.opt_cx},
          {"critic_y", &b.critic_y.parameters(), &b.opt_cy},
          {"conditionals", &generator_params, &b.opt_cond},
          {"critic_theta", &b.critic_theta.parameters(), &b.opt_ctheta},
          {"critic_phi", &b.critic_phi.parameters(), &b.opt_cphi}};
}

std::size_t TrainingState::generator_parameter_count() const {
  if (baseline) {
    return baseline->marginal_x.parameter_count() + baseline->marginal_y.parameter_count() +
           baseline->conditionals.parameter_count();
  }
  return config.mode == TrainingMode::ThreeDomain6 ? tri.parameter_count() : bank.parameter_count();
}

std::size_t TrainingState::planned_steps() const {
  return config.mode == TrainingMode::TwoStepBaseline ? 2 * config.total_steps : config.total_steps;
}

bool TrainingState::in_baseline_stage2() const { return baseline && step >= config.total_steps; }

LossReport train_step(TrainingState& state, const Dataset& data) {
  check_data(state.config, data);
  sync_stage(state);
  std::vector<JointBatch> last;
  LossReport report;
  try {
    if (!state.baseline) report = joint_step(state, data, last);
    else if (state.in_baseline_stage2()) report = baseline_stage2(state, data, last);
    else report = baseline_stage1(state, data, last);
  } catch (const ad::NonFiniteError& e) {
    throw TrainingError("non-finite value at step " + std::to_string(state.step + 1) + ": " + e.what() +
                        "; last batch:" + describe(last));
  }
  if (!std::isfinite(report.critic_loss) || !std::isfinite(report.generator_loss)) {
    throw TrainingError("non-finite loss at step " + std::to_string(state.step + 1) + "; last batch:" + describe(last));
  }
  ++state.step;
  return report;
}

void TrainingLog::append(std::size_t step, const LossReport& report, double wall_seconds) {
  if (!rows.empty() && step <= rows.back().step) {
    throw TrainingError("training log steps must increase");
  }
  rows.push_back({step, report, wall_seconds});
}

std::string TrainingLog::header() const {
  std::string h = "step\tcritic_loss\tgenerator_loss\tcycle_penalty";
  for (std::size_t k = 1; k <= num_sources; ++k) h += "\tlogprob_" + std::to_string(k);
  return h;
}

std::string TrainingLog::format_row(const Row& row) const {
  std::string out = std::to_string(row.step) + "\t" + fmt(row.report.critic_loss) + "\t" +
                    fmt(row.report.generator_loss) + "\t" + fmt(row.report.cycle_penalty);
  for (std::size_t k = 0; k < num_sources; ++k) {
    out += "\t";
    out += k < row.report.per_source_logprob.size() ? fmt(row.report.per_source_logprob[k]) : "nan";
  }
  return out;
}

std::string TrainingLog::to_tsv() const {
  std::string out = header() + "\n";
  for (const auto& r : rows) out += format_row(r) + "\n";
  return out;
}

std::string TrainingLog::timing_tsv() const {
  std::string out = "step\twall_seconds\n";
  for (const auto& r : rows) out += std::to_string(r.step) + "\t" + fmt(r.wall_seconds) + "\n";
  return out;
}

namespace {

std::size_t log_sources(const TrainingState& s) {
  switch (s.config.mode) {
    case TrainingMode::Paired5: return 5;
    case TrainingMode::Unpaired4: return 4;
    case TrainingMode::ThreeDomain6: return 6;
    case TrainingMode::TwoStepBaseline: return 2;
  }
  return 0;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw TrainingError("cannot write " + path);
  out << text;
  if (!out) throw TrainingError("failed writing " + path);
}

}  // namespace

TrainingLog continue_training(TrainingState& state, const Dataset& data, const TrainOptions& options) {
  check_data(state.config, data);
  TrainingLog log;
  log.num_sources = log_sources(state);
  if (!options.checkpoint_dir.empty()) std::filesystem::create_directories(options.checkpoint_dir);
  const auto start = std::chrono::steady_clock::now();
  const auto planned = state.planned_steps();
  while (state.step < planned) {
    auto report = train_step(state, data);
    const auto t = state.step;
    if (t % state.config.log_every == 0 || t == planned) {
      const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
      log.append(t, report, elapsed.count());
    }
    if (!options.checkpoint_dir.empty() && t % state.config.checkpoint_every == 0 && t != planned) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%08zu.ckpt", t);
      save_checkpoint(state, (std::filesystem::path(options.checkpoint_dir) / name).string());
    }
  }
  if (!options.checkpoint_dir.empty()) {
    save_checkpoint(state, (std::filesystem::path(options.checkpoint_dir) / "final.ckpt").string());
  }
  if (!options.log_path.empty()) {
    write_file(options.log_path, log.to_tsv());
    write_file(options.log_path + ".timing", log.timing_tsv());
  }
  return log;
}

TrainResult train(const ExperimentConfig& config, const Dataset& data, const TrainOptions& options) {
  TrainResult r{TrainingState::init(config, data), {}};
  r.log = continue_training(r.state, data, options);
  return r;
}

TrainResult train_two_step_baseline(const ExperimentConfig& config, const Dataset& data,
                                    const TrainOptions& options) {
  auto c = config;
  c.mode = TrainingMode::TwoStepBaseline;
  if (c.data_view == DataView::Auto) {
    c.data_view = data.pairing() == Pairing::Unpaired ? DataView::Unpaired : DataView::Paired;
  }
  return train(c, data, options);
}

// Checkpoints ---------------------------------------------------------------

namespace {

constexpr const char* kCheckpointMagic = "#jointgan-checkpoint\t2";

void put_doubles(std::string& out, std::span<const double> v) {
  for (double x : v) {
    auto bits = std::bit_cast<std::uint64_t>(x);
    for (int b = 0; b < 8; ++b) out += static_cast<char>((bits >> (8 * b)) & 0xffu);
  }
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::size_t to_size(const std::string& s) {
  std::size_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw TrainingError("malformed checkpoint count '" + s + "'");
  return v;
}

/// Cursor over the checkpoint bytes.
struct Reader {
  const std::string& text;
  std::size_t pos = 0;

  std::string line() {
    const auto nl = text.find('\n', pos);
    if (nl == std::string::npos) throw TrainingError("truncated checkpoint");
    auto out = text.substr(pos, nl - pos);
    pos = nl + 1;
    return out;
  }
  void doubles(std::span<double> dst, const std::string& what) {
    if (text.size() - pos < 8 * dst.size()) throw TrainingError("checkpoint truncated inside " + what);
    for (auto& d : dst) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(text[pos + b])) << (8 * b);
      d = std::bit_cast<double>(bits);
      pos += 8;
    }
  }
};

void tensor_record(std::string& out, const std::string& name, const ad::Shape& shape, std::span<const double> v) {
  out += "tensor\t" + name + "\t" + ad::shape_string(shape) + "\n";
  put_doubles(out, v);
  out += "\n";
}

void read_record(Reader& r, const std::string& name, const ad::Shape& shape, std::span<double> dst) {
  const auto f = split_tabs(r.line());
  if (f.size() != 3 || f[0] != "tensor") throw TrainingError("checkpoint: expected tensor " + name);
  if (f[1] != name) throw TrainingError("checkpoint tensor '" + f[1] + "' found where '" + name + "' was expected");
  if (f[2] != ad::shape_string(shape)) {
    throw TrainingError("checkpoint tensor " + name + " has shape " + f[2] + ", model expects " + ad::shape_string(shape));
  }
  r.doubles(dst, name);
  if (r.line() != "") throw TrainingError("checkpoint tensor " + name + " has trailing bytes");
}

}  // namespace

std::string format_checkpoint(TrainingState& state) {
  std::string out = std::string(kCheckpointMagic) + "\n";
  for (const auto& [k, v] : state.config.entries()) out += "config\t" + k + "\t" + v + "\n";
  out += "dims\t" + std::to_string(state.dim_x) + "\t" + std::to_string(state.dim_y) + "\n";
  out += "step\t" + std::to_string(state.step) + "\n";
  out += "rng\t" + state.rng.serialize() + "\n";
  for (auto& g : state.groups()) {
    out += "group\t" + g.name + "\t" + std::to_string(g.params->size()) + "\t" + std::to_string(g.optimizer->step) + "\n";
  }
  out += "#tensors\n";
  for (auto& g : state.groups()) {
    for (std::size_t i = 0; i < g.params->size(); ++i) {
      const auto& p = (*g.params)[i];
      const auto base = g.name + "." + std::to_string(i);
      tensor_record(out, base, p.shape(), p.data());
      tensor_record(out, base + ".adam_m", p.shape(), g.optimizer->first_moment[i]);
      tensor_record(out, base + ".adam_v", p.shape(), g.optimizer->second_moment[i]);
    }
  }
  out += "end\n";
  return out;
}

void save_checkpoint(TrainingState& state, const std::string& path) { write_file(path, format_checkpoint(state)); }

TrainingState parse_checkpoint(const std::string& text) {
  Reader r{text};
  if (text.rfind(kCheckpointMagic, 0) != 0 || r.line() != kCheckpointMagic) {
    throw TrainingError("not a jointgan checkpoint (bad magic line)");
  }
  ExperimentConfig config;
  std::size_t dx = 0, dy = 0, step = 0;
  std::string rng_state;
  std::vector<std::vector<std::string>> group_lines;
  while (true) {
    const auto line = r.line();
    if (line == "#tensors") break;
    const auto f = split_tabs(line);
    if (f[0] == "config" && f.size() == 3) {
      try {
        config.set(f[1], f[2]);
      } catch (const ConfigError& e) {
        throw TrainingError(std::string("checkpoint manifest: ") + e.what());
      }
    } else if (f[0] == "dims" && f.size() == 3) {
      dx = to_size(f[1]);
      dy = to_size(f[2]);
    } else if (f[0] == "step" && f.size() == 2) {
      step = to_size(f[1]);
    } else if (f[0] == "rng" && f.size() == 2) {
      rng_state = f[1];
    } else if (f[0] == "group" && f.size() == 4) {
      group_lines.push_back(f);
    } else {
      throw TrainingError("malformed checkpoint manifest line '" + line + "'");
    }
  }
  if (dx == 0 || dy == 0 || rng_state.empty()) throw TrainingError("checkpoint manifest is incomplete");

  TrainingState s = build_state(config, dx, dy);
  s.step = step;
  try {
    s.rng.deserialize(rng_state);
  } catch (const std::exception&) {
    throw TrainingError("checkpoint rng state is malformed");
  }
  auto groups = s.groups();
  if (group_lines.size() != groups.size()) {
    throw TrainingError("checkpoint lists " + std::to_string(group_lines.size()) + " parameter groups, the manifest's model has " +
                        std::to_string(groups.size()));
  }
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    auto& g = groups[gi];
    const auto& f = group_lines[gi];
    if (f[1] != g.name) throw TrainingError("checkpoint group '" + f[1] + "' does not match the manifest's model");
    if (to_size(f[2]) != g.params->size()) {
      throw TrainingError("checkpoint group '" + g.name + "' has " + f[2] + " tensors, model has " +
                          std::to_string(g.params->size()));
    }
    g.optimizer->step = to_size(f[3]);
  }
  for (auto& g : groups) {
    for (std::size_t i = 0; i < g.params->size(); ++i) {
      auto& p = (*g.params)[i];
      const auto base = g.name + "." + std::to_string(i);
      read_record(r, base, p.shape(), p.data());
      read_record(r, base + ".adam_m", p.shape(), g.optimizer->first_moment[i]);
      read_record(r, base + ".adam_v", p.shape(), g.optimizer->second_moment[i]);
    }
  }
  if (r.line() != "end") throw TrainingError("checkpoint is missing its end marker");
  sync_stage(s);
  return s;
}

TrainingState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw TrainingError("cannot read checkpoint " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str());
}

// Sampling ------------------------------------------------------------------

namespace {

bool is_three(const TrainingState& s) { return s.config.mode == TrainingMode::ThreeDomain6; }

}  // namespace

const GeneratorBank& conditional_bank(const TrainingState& s) {
  if (s.config.mode == TrainingMode::ThreeDomain6) throw TrainingError("three-domain model has no two-domain bank");
  return s.baseline ? s.baseline->conditionals : s.bank;
}

std::vector<Matrix> sample_joint(const TrainingState& s, std::size_t n, Rng& rng) {
  ad::NoGradGuard no_grad;
  const auto e = s.config.noise_dim;
  if (is_three(s)) {
    auto e1 = rng.normal_tensor(n, e), e2 = rng.normal_tensor(n, e), e3 = rng.normal_tensor(n, e);
    auto t = s.tri.sample_chain(ThreeDomainOrder::XYZ, e1, e2, e3);
    return {Matrix::from_tensor(t.x), Matrix::from_tensor(t.y), Matrix::from_tensor(t.z)};
  }
  auto e1 = rng.normal_tensor(n, e), e2 = rng.normal_tensor(n, e);
  if (s.baseline) {
    auto x = s.baseline->marginal_x.forward(e1);
    auto y = s.baseline->conditionals.sample_conditional(Direction::YGivenX, x, e2);
    return {Matrix::from_tensor(x), Matrix::from_tensor(y)};
  }
  auto p = s.bank.sample_joint_chain(ChainOrder::XThenY, e1, e2);
  return {Matrix::from_tensor(p.x), Matrix::from_tensor(p.y)};
}

Matrix sample_marginal(const TrainingState& s, Domain domain, std::size_t n, Rng& rng) {
  ad::NoGradGuard no_grad;
  const auto e = s.config.noise_dim;
  if (is_three(s)) {
    if (domain == Domain::Y) return sample_joint(s, n, rng)[1];
    return Matrix::from_tensor(s.tri.sample_marginal(domain, rng.normal_tensor(n, e)));
  }
  if (domain == Domain::Z) throw TrainingError("two-domain model has no z domain");
  if (s.baseline) {
    const Mlp& m = domain == Domain::X ? s.baseline->marginal_x : s.baseline->marginal_y;
    return Matrix::from_tensor(m.forward(rng.normal_tensor(n, e)));
  }
  return Matrix::from_tensor(s.bank.sample_marginal(domain, rng.normal_tensor(n, e)));
}

std::vector<Matrix> impute(const TrainingState& s, const std::map<Domain, Matrix>& observed, Rng& rng) {
  ad::NoGradGuard no_grad;
  if (observed.empty()) throw TrainingError("imputation needs at least one observed domain");
  const auto e = s.config.noise_dim;
  const auto n = observed.begin()->second.rows;
  for (const auto& [d, m] : observed) {
    if (m.rows != n) throw TrainingError("observed domains have different row counts");
    const auto want = is_three(s) || d == Domain::X ? s.dim_x : s.dim_y;
    if (m.cols != want) {
      throw TrainingError("dimension mismatch: observed " + to_string(d) + " has " + std::to_string(m.cols) +
                          " columns, model expects " + std::to_string(want));
    }
  }
  if (is_three(s)) {
    ObservedPrefix prefix;
    for (const auto& [d, m] : observed) {
      auto t = m.to_tensor();
      if (d == Domain::X) prefix.x = t;
      if (d == Domain::Y) prefix.y = t;
      if (d == Domain::Z) prefix.z = t;
    }
    const bool forward = prefix.x.has_value();
    auto e1 = rng.normal_tensor(n, e), e2 = rng.normal_tensor(n, e), e3 = rng.normal_tensor(n, e);
    XYZTriple t;
    try {
      t = s.tri.sample_chain(forward ? ThreeDomainOrder::XYZ : ThreeDomainOrder::ZYX, e1, e2, e3, prefix);
    } catch (const GeneratorError& err) {
      throw TrainingError(std::string("cannot impute from these observed domains: ") + err.what());
    }
    return {Matrix::from_tensor(t.x), Matrix::from_tensor(t.y), Matrix::from_tensor(t.z)};
  }
  if (observed.size() != 1 || observed.count(Domain::Z)) {
    throw TrainingError("two-domain imputation needs exactly one observed domain, x or y");
  }
  const auto& bank = conditional_bank(s);
  const auto& [d, m] = *observed.begin();
  if (d == Domain::X) {
    auto y = bank.sample_conditional(Direction::YGivenX, m.to_tensor(), rng.normal_tensor(n, e));
    return {m, Matrix::from_tensor(y)};
  }
  auto x = bank.sample_conditional(Direction::XGivenY, m.to_tensor(), rng.normal_tensor(n, e));
  return {Matrix::from_tensor(x), m};
}

}  // namespace jointgan
