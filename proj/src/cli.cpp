#include "jointgan/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "jointgan/config.hpp"
#include "jointgan/dataset.hpp"
#include "jointgan/eval.hpp"
#include "jointgan/gradcheck_suite.hpp"
#include "jointgan/synthetic.hpp"
#include "jointgan/training.hpp"

namespace jointgan {

namespace {

namespace fs = std::filesystem;

/// Failures detected after flag parsing that are still the caller's fault.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

constexpr double kGradcheckTolerance = 1e-4;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  const auto parent = fs::path(path).parent_path();
  if (!parent.empty()) fs::create_directories(parent);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

using Entries = std::vector<std::pair<std::string, std::string>>;

/// '#' lines first, so a train manifest is itself a loadable config file.
void write_manifest(const std::string& path, const std::vector<std::string>& args, const std::string& verb,
                    const Entries& options, const std::string& config_text = {}) {
  std::string out = "# jointgan " + verb + " manifest\n# command:";
  for (const auto& a : args) out += " " + a;
  out += "\n";
  for (const auto& [k, v] : options) out += "# " + k + " = " + v + "\n";
  out += config_text;
  write_text(path, out);
}

Domain parse_domain(const std::string& s) {
  if (s == "x") return Domain::X;
  if (s == "y") return Domain::Y;
  if (s == "z") return Domain::Z;
  throw UsageError("unknown domain '" + s + "' (expected x, y or z)");
}

Dataset joint_dataset(const std::vector<Matrix>& parts, std::map<std::string, std::string> meta) {
  static const char* names[] = {"x", "y", "z"};
  std::vector<Column> cols;
  for (std::size_t i = 0; i < parts.size(); ++i) cols.push_back({names[i], parts[i]});
  return Dataset(Pairing::Paired, std::move(cols), std::move(meta));
}

// gen-data ------------------------------------------------------------------

struct GenDataArgs {
  std::map<std::string, std::string> spec_fields;
  std::uint64_t seed = 0;
  std::string out;
  std::string test_out;
  double test_fraction = 0.25;
  std::string manifest;
};

int do_gen_data(const GenDataArgs& a, const std::vector<std::string>& args) {
  const auto spec = SyntheticSpec::from_map(a.spec_fields);
  const auto ds = generate(spec, a.seed);
  Entries opts{{"seed", std::to_string(a.seed)}, {"out", a.out}};
  for (const auto& [k, v] : spec.to_map()) opts.emplace_back("spec." + k, v);
  if (a.test_out.empty()) {
    save_dataset(ds, a.out);
  } else {
    auto [train, test] = holdout_split(ds, a.test_fraction, derive_seed(a.seed, 11));
    save_dataset(train, a.out);
    save_dataset(test, a.test_out);
    opts.emplace_back("test_out", a.test_out);
    opts.emplace_back("test_fraction", fmt17(a.test_fraction));
  }
  write_manifest(a.manifest.empty() ? a.out + ".manifest" : a.manifest, args, "gen-data", opts);
  std::cout << "wrote " << a.out << " (" << ds.rows() << " rows generated, family " << to_string(spec.family)
            << ")\n";
  return 0;
}

// train ---------------------------------------------------------------------

struct TrainArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string data;
  std::string out_dir;
  std::string resume;
  std::string manifest;
};

std::pair<std::string, std::string> split_assignment(const std::string& kv) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw UsageError("--set expects key=value, got '" + kv + "'");
  return {kv.substr(0, eq), kv.substr(eq + 1)};
}

/// Keeps existing log rows up to `through_step` and appends `fresh` rows.
std::string merge_log(const std::string& path, std::size_t through_step, const std::string& fresh) {
  std::istringstream old(fs::exists(path) ? read_text(path) : std::string{});
  std::istringstream add(fresh);
  std::string line, out;
  bool header = true;
  while (std::getline(old, line)) {
    if (header) {
      out += line + "\n";
      header = false;
      continue;
    }
    if (std::stoull(line.substr(0, line.find('\t'))) <= through_step) out += line + "\n";
  }
  bool first = true;
  while (std::getline(add, line)) {
    if (first) {
      if (header) out += line + "\n";
      first = false;
      continue;
    }
    out += line + "\n";
  }
  return out;
}

int do_train(const TrainArgs& a, const std::vector<std::string>& args) {
  const auto log_path = (fs::path(a.out_dir) / "train_log.tsv").string();
  TrainingState state;
  std::size_t resumed_at = 0;
  if (!a.resume.empty()) {
    if (!a.config_path.empty()) throw UsageError("--resume takes its config from the checkpoint; drop --config");
    state = load_checkpoint(a.resume);
    resumed_at = state.step;
    for (const auto& kv : a.sets) {
      auto [k, v] = split_assignment(kv);
      if (k != "total_steps" && k != "log_every" && k != "checkpoint_every") {
        throw UsageError("--set " + k + " cannot change on resume (only total_steps, log_every, checkpoint_every)");
      }
      state.config.set(k, v);
    }
    state.config.validate();
  } else {
    auto config = a.config_path.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(a.config_path);
    for (const auto& kv : a.sets) {
      auto [k, v] = split_assignment(kv);
      config.set(k, v);
    }
    config.validate();
    const auto data = load_training_data(a.data, config);
    state = TrainingState::init(config, data);
  }
  const auto data = load_training_data(a.data, state.config);
  Entries opts{{"data", a.data}, {"out_dir", a.out_dir}};
  if (!a.resume.empty()) opts.emplace_back("resume", a.resume);
  write_manifest(a.manifest.empty() ? (fs::path(a.out_dir) / "manifest.txt").string() : a.manifest, args,
                 "train", opts, state.config.to_text());

  auto log = continue_training(state, data, TrainOptions{a.out_dir, ""});
  write_text(log_path, merge_log(log_path, resumed_at, log.to_tsv()));
  write_text(log_path + ".timing", merge_log(log_path + ".timing", resumed_at, log.timing_tsv()));
  if (!log.rows.empty()) {
    const auto& last = log.rows.back();
    std::cout << "step " << last.step << " critic_loss " << fmt17(last.report.critic_loss) << " generator_loss "
              << fmt17(last.report.generator_loss) << "\n";
  }
  std::cout << "wrote " << (fs::path(a.out_dir) / "final.ckpt").string() << "\n";
  return 0;
}

// sample --------------------------------------------------------------------

struct SampleArgs {
  std::string checkpoint;
  std::string source;
  std::string domain = "x";
  std::string given;
  std::size_t n = 1000;
  std::uint64_t seed = 0;
  std::string out;
  std::string manifest;
};

int do_sample(const SampleArgs& a, const std::vector<std::string>& args) {
  auto state = load_checkpoint(a.checkpoint);
  Rng rng(derive_seed(a.seed, 61));
  std::map<std::string, std::string> meta{{"source", a.source}, {"checkpoint", a.checkpoint},
                                          {"seed", std::to_string(a.seed)}};
  Entries opts{{"checkpoint", a.checkpoint}, {"source", a.source}, {"seed", std::to_string(a.seed)}, {"out", a.out}};
  Dataset out;
  if (a.source == "joint") {
    out = joint_dataset(sample_joint(state, a.n, rng), meta);
    opts.emplace_back("n", std::to_string(a.n));
  } else if (a.source == "marginal") {
    const auto d = parse_domain(a.domain);
    meta["domain"] = a.domain;
    // A single column has no pairing to speak of.
    out = Dataset(Pairing::Unpaired, {{a.domain, sample_marginal(state, d, a.n, rng)}}, meta);
    opts.emplace_back("domain", a.domain);
    opts.emplace_back("n", std::to_string(a.n));
  } else if (a.source == "conditional") {
    if (a.given.empty()) throw UsageError("--source conditional needs --given <file>");
    const auto given = load_dataset_as_stored(a.given);
    std::map<Domain, Matrix> observed;
    for (const auto& c : given.columns()) observed[parse_domain(c.name)] = c.values;
    meta["given"] = a.given;
    out = joint_dataset(impute(state, observed, rng), meta);
    opts.emplace_back("given", a.given);
  } else {
    throw UsageError("unknown --source '" + a.source + "' (expected marginal, conditional or joint)");
  }
  save_dataset(out, a.out);
  write_manifest(a.manifest.empty() ? a.out + ".manifest" : a.manifest, args, "sample", opts);
  std::cout << "wrote " << out.rows() << " rows to " << a.out << "\n";
  return 0;
}

// eval / confusion / gradcheck ---------------------------------------------

struct EvalArgs {
  std::string checkpoint;
  std::string data;
  EvalOptions options;
  std::string report;
  std::string summary;
  std::string manifest;
};

int do_eval(const EvalArgs& a, const std::vector<std::string>& args) {
  const auto state = load_checkpoint(a.checkpoint);
  const auto test = load_dataset_as_stored(a.data);
  const auto m = evaluate(state, test, a.options);
  if (!a.report.empty()) append_metric_report(m, a.report);
  if (!a.summary.empty()) write_metric_summary(m, a.summary);
  Entries opts{{"checkpoint", a.checkpoint}, {"data", a.data},
               {"samples", std::to_string(a.options.samples)}, {"permutations", std::to_string(a.options.permutations)},
               {"null_quantile", fmt17(a.options.null_quantile)}, {"seed", std::to_string(a.options.seed)}};
  std::string manifest = a.manifest;
  if (manifest.empty()) manifest = !a.summary.empty() ? a.summary + ".manifest" : !a.report.empty() ? a.report + ".manifest" : "eval.manifest";
  write_manifest(manifest, args, "eval", opts);
  std::cout << m.summary();
  return 0;
}

struct ConfusionArgs {
  std::string checkpoint;
  std::string data;
  std::size_t n = 2000;
  std::uint64_t seed = 0;
  std::string manifest;
};

int do_confusion(const ConfusionArgs& a, const std::vector<std::string>& args) {
  const auto state = load_checkpoint(a.checkpoint);
  const auto data = load_training_data(a.data, state.config);
  const auto conf = critic_confusion(state, data, a.n, a.seed);
  write_manifest(a.manifest.empty() ? "confusion.manifest" : a.manifest, args, "confusion",
                 {{"checkpoint", a.checkpoint}, {"data", a.data}, {"n", std::to_string(a.n)},
                  {"seed", std::to_string(a.seed)}});
  for (const auto& row : conf) {
    for (std::size_t j = 0; j < row.size(); ++j) std::printf(j ? "\t%.6f" : "%.6f", row[j]);
    std::printf("\n");
  }
  return 0;
}

int do_gradcheck(std::uint64_t seed, const std::string& manifest, const std::vector<std::string>& args) {
  double worst = 0.0;
  for (const auto& r : run_gradcheck_suite(seed)) {
    std::printf("%-50s %.3e  (%zu coordinates", r.name.c_str(), r.max_relative_error, r.checked);
    if (r.skipped_nonsmooth) std::printf(", %zu at a kink skipped", r.skipped_nonsmooth);
    std::printf(")\n");
    worst = std::max(worst, r.max_relative_error);
  }
  std::printf("max relative error %.3e\n", worst);
  write_manifest(manifest.empty() ? "gradcheck.manifest" : manifest, args, "gradcheck",
                 {{"seed", std::to_string(seed)}, {"tolerance", fmt17(kGradcheckTolerance)}});
  if (worst >= kGradcheckTolerance) {
    std::fprintf(stderr, "error: max relative error %.3e exceeds %.0e\n", worst, kGradcheckTolerance);
    return 1;
  }
  return 0;
}

// export-plots --------------------------------------------------------------

/// Tab-separated table with a '#'-prefixed header, one file per input.
std::string columnar_from_dataset(const Dataset& ds) {
  std::string out = "#";
  for (const auto& c : ds.columns()) {
    for (std::size_t j = 0; j < c.values.cols; ++j) out += (out.size() > 1 ? "\t" : "") + c.name + std::to_string(j);
  }
  out += "\n";
  for (std::size_t r = 0; r < ds.rows(); ++r) {
    bool first = true;
    for (const auto& c : ds.columns()) {
      for (double v : c.values.row(r)) {
        out += (first ? "" : "\t") + fmt17(v);
        first = false;
      }
    }
    out += "\n";
  }
  return out;
}

std::string columnar_from_tsv(const std::string& text) {
  std::istringstream in(text);
  std::string line, out;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out += (header ? "#" : "") + line + "\n";
    header = false;
  }
  return out;
}

struct ExportArgs {
  std::vector<std::string> logs;
  std::vector<std::string> samples;
  std::string out_dir;
  std::string manifest;
};

int do_export(const ExportArgs& a, const std::vector<std::string>& args) {
  if (a.logs.empty() && a.samples.empty()) throw UsageError("export-plots needs --log and/or --samples");
  fs::create_directories(a.out_dir);
  Entries opts{{"out_dir", a.out_dir}};
  auto target = [&](const std::string& in) {
    return (fs::path(a.out_dir) / (fs::path(in).stem().string() + ".dat")).string();
  };
  for (const auto& p : a.logs) {
    write_text(target(p), columnar_from_tsv(read_text(p)));
    opts.emplace_back("log", p);
    std::cout << "wrote " << target(p) << "\n";
  }
  for (const auto& p : a.samples) {
    write_text(target(p), columnar_from_dataset(load_dataset_as_stored(p)));
    opts.emplace_back("samples", p);
    std::cout << "wrote " << target(p) << "\n";
  }
  write_manifest(a.manifest.empty() ? (fs::path(a.out_dir) / "manifest.txt").string() : a.manifest, args,
                 "export-plots", opts);
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Joint-distribution adversarial learning toolkit", "jointgan"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* g = app.add_subcommand("gen-data", "Write a synthetic benchmark dataset");
  static const char* spec_keys[] = {"family", "rows", "dim", "rho", "components", "weights", "radius",
                                    "component_sd", "rotation", "ring_radius_y", "map_scale", "noise", "pairing"};
  for (const char* key : spec_keys) {
    std::string flag = std::string("--") + key;
    g->add_option_function<std::string>(flag, [&gen, key](const std::string& v) { gen.spec_fields[key] = v; },
                                        std::string("synthetic spec field ") + key);
  }
  g->add_option("--seed", gen.seed, "generation seed");
  g->add_option("--out", gen.out, "output dataset file")->required();
  g->add_option("--test-out", gen.test_out, "also split off a held-out test file");
  g->add_option("--test-fraction", gen.test_fraction, "test fraction for --test-out")->check(CLI::Range(0.0, 1.0));
  g->add_option("--manifest", gen.manifest, "manifest path (default <out>.manifest)");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model and write checkpoints and a loss log");
  t->add_option("--config", tr.config_path, "config file of key = value lines");
  t->add_option("--set", tr.sets, "key=value config override (repeatable)");
  t->add_option("--data", tr.data, "training dataset file")->required();
  t->add_option("--out-dir", tr.out_dir, "directory for checkpoints, log and manifest")->required();
  t->add_option("--resume", tr.resume, "continue from this checkpoint");
  t->add_option("--manifest", tr.manifest, "manifest path (default <out-dir>/manifest.txt)");

  SampleArgs sa;
  auto* s = app.add_subcommand("sample", "Draw samples from a trained checkpoint");
  s->add_option("--checkpoint", sa.checkpoint, "checkpoint file")->required();
  s->add_option("--source", sa.source, "marginal, conditional or joint")->required()->check(CLI::IsMember({"marginal", "conditional", "joint"}));
  s->add_option("--domain", sa.domain, "domain for --source marginal")->capture_default_str();
  s->add_option("--given", sa.given, "dataset file of observed domains for --source conditional");
  s->add_option("--n", sa.n, "number of samples")->capture_default_str()->check(CLI::PositiveNumber);
  s->add_option("--seed", sa.seed, "sampling seed")->capture_default_str();
  s->add_option("--out", sa.out, "output dataset file")->required();
  s->add_option("--manifest", sa.manifest, "manifest path (default <out>.manifest)");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "Compute the metric report against held-out data");
  e->add_option("--checkpoint", ev.checkpoint, "checkpoint file")->required();
  e->add_option("--data", ev.data, "held-out dataset file")->required();
  e->add_option("--samples", ev.options.samples, "generated and true samples compared")->capture_default_str();
  e->add_option("--permutations", ev.options.permutations, "permutation-null size (0 skips)")->capture_default_str();
  e->add_option("--null-quantile", ev.options.null_quantile, "null quantile for the threshold")->capture_default_str();
  e->add_option("--seed", ev.options.seed, "evaluation seed")->capture_default_str();
  e->add_option("--bandwidths", ev.options.bandwidth_multipliers, "multipliers of the median-heuristic bandwidth")
      ->delimiter(',')
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  e->add_option("--report", ev.report, "append a tab-separated metric row here");
  e->add_option("--summary", ev.summary, "write key=value metrics here");
  e->add_option("--manifest", ev.manifest, "manifest path");

  std::uint64_t gc_seed = 0;
  std::string gc_manifest;
  auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every op and loss");
  gc->add_option("--seed", gc_seed, "seed for inputs and networks")->capture_default_str();
  gc->add_option("--manifest", gc_manifest, "manifest path (default gradcheck.manifest)");

  ConfusionArgs co;
  auto* c = app.add_subcommand("confusion", "Print the critic's K x K confusion matrix");
  c->add_option("--checkpoint", co.checkpoint, "checkpoint file")->required();
  c->add_option("--data", co.data, "training dataset file")->required();
  c->add_option("--n", co.n, "samples per source")->capture_default_str()->check(CLI::PositiveNumber);
  c->add_option("--seed", co.seed, "sampling seed")->capture_default_str();
  c->add_option("--manifest", co.manifest, "manifest path (default confusion.manifest)");

  ExportArgs ex;
  auto* x = app.add_subcommand("export-plots", "Convert logs and sample files to plain columnar data");
  x->add_option("--log", ex.logs, "training log or metric report (repeatable)");
  x->add_option("--samples", ex.samples, "dataset file (repeatable)");
  x->add_option("--out-dir", ex.out_dir, "output directory")->required();
  x->add_option("--manifest", ex.manifest, "manifest path (default <out-dir>/manifest.txt)");

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return 2;
  }

  try {
    if (g->parsed()) return do_gen_data(gen, args);
    if (t->parsed()) return do_train(tr, args);
    if (s->parsed()) return do_sample(sa, args);
    if (e->parsed()) return do_eval(ev, args);
    if (gc->parsed()) return do_gradcheck(gc_seed, gc_manifest, args);
    if (c->parsed()) return do_confusion(co, args);
    if (x->parsed()) return do_export(ex, args);
  } catch (const UsageError& err) {
    std::cerr << "usage error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  }
  return 2;
}

int run_cli(int argc, const char* const* argv) {
  return run_cli(std::vector<std::string>(argv, argv + argc));
}

}  // namespace jointgan
