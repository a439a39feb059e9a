#include "jointgan/sampling.hpp"

#include <algorithm>
#include <cctype>

namespace jointgan {

namespace {

RecipeFactor emp(Domain d, std::string table) { return {d, true, "", {}, std::move(table)}; }
RecipeFactor gen(Domain d, std::string net, std::vector<Domain> given) {
  return {d, false, std::move(net), std::move(given), ""};
}

std::string strip(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (!std::isspace(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

}  // namespace

std::string to_string(SourceMode m) {
  switch (m) {
    case SourceMode::Paired5: return "paired_5";
    case SourceMode::Unpaired4: return "unpaired_4";
    case SourceMode::ThreeDomain6: return "three_domain_6";
    case SourceMode::Gan2: return "gan_2";
    case SourceMode::Ali2: return "ali_2";
  }
  return "paired_5";
}

SourceMode parse_source_mode(const std::string& s) {
  for (auto m : {SourceMode::Paired5, SourceMode::Unpaired4, SourceMode::ThreeDomain6, SourceMode::Gan2,
                 SourceMode::Ali2}) {
    if (to_string(m) == s) return m;
  }
  throw SamplingError("unknown source mode '" + s + "'");
}

std::size_t num_sources(SourceMode m) {
  switch (m) {
    case SourceMode::Paired5: return 5;
    case SourceMode::Unpaired4: return 4;
    case SourceMode::ThreeDomain6: return 6;
    case SourceMode::Gan2:
    case SourceMode::Ali2: return 2;
  }
  return 0;
}

bool SourceRecipe::is_empirical(Domain d) const { return factor(d).empirical; }

const RecipeFactor& SourceRecipe::factor(Domain d) const {
  for (const auto& f : factors) {
    if (f.domain == d) return f;
  }
  throw SamplingError("recipe " + text + " has no " + to_string(d) + " component");
}

SourceSpec SourceSpec::for_mode(SourceMode mode) {
  using D = Domain;
  SourceSpec s{mode, {}};
  const SourceRecipe p1{1, "q(x)p_theta(y|x)", {emp(D::X, "x"), gen(D::Y, "theta", {D::X})}};
  const SourceRecipe p2{2, "q(y)p_phi(x|y)", {emp(D::Y, "y"), gen(D::X, "phi", {D::Y})}};
  const SourceRecipe p3{3, "p_alpha(x)p_theta(y|x)", {gen(D::X, "alpha", {}), gen(D::Y, "theta", {D::X})}};
  const SourceRecipe p4{4, "p_beta(y)p_phi(x|y)", {gen(D::Y, "beta", {}), gen(D::X, "phi", {D::Y})}};
  const SourceRecipe p5{5, "q(x,y)", {emp(D::X, "xy"), emp(D::Y, "xy")}};
  switch (mode) {
    case SourceMode::Paired5: s.sources = {p1, p2, p3, p4, p5}; break;
    case SourceMode::Unpaired4: s.sources = {p1, p2, p3, p4}; break;
    case SourceMode::Ali2: s.sources = {p1, p2}; break;
    case SourceMode::Gan2:
      // Single-domain marginal stage: class 1 real, class 2 generated.
      s.sources = {{1, "q(x)", {emp(D::X, "x")}}, {2, "p_alpha(x)", {gen(D::X, "alpha", {})}}};
      break;
    case SourceMode::ThreeDomain6:
      s.sources = {
          {1, "p_alpha(x)p_nu(y|x)p_gamma(z|x,y)",
           {gen(D::X, "alpha", {}), gen(D::Y, "nu", {D::X}), gen(D::Z, "gamma", {D::X, D::Y})}},
          {2, "p_beta(z)p_psi(y|z)p_eta(x|y,z)",
           {gen(D::Z, "beta", {}), gen(D::Y, "psi", {D::Z}), gen(D::X, "eta", {D::Y, D::Z})}},
          {3, "q(x)p_nu(y|x)p_gamma(z|x,y)",
           {emp(D::X, "xy"), gen(D::Y, "nu", {D::X}), gen(D::Z, "gamma", {D::X, D::Y})}},
          {4, "q(z)p_psi(y|z)p_eta(x|y,z)",
           {emp(D::Z, "yz"), gen(D::Y, "psi", {D::Z}), gen(D::X, "eta", {D::Y, D::Z})}},
          {5, "q(x,y)p_gamma(z|x,y)", {emp(D::X, "xy"), emp(D::Y, "xy"), gen(D::Z, "gamma", {D::X, D::Y})}},
          {6, "q(y,z)p_eta(x|y,z)", {emp(D::Y, "yz"), emp(D::Z, "yz"), gen(D::X, "eta", {D::Y, D::Z})}},
      };
      break;
  }
  return s;
}

const SourceRecipe& SourceSpec::source(std::size_t k) const {
  if (k < 1 || k > sources.size()) {
    if (mode == SourceMode::Unpaired4 && k == 5) {
      throw SamplingError("source 5 is unavailable in unpaired mode: there are no draws from q(x,y)");
    }
    throw SamplingError("source " + std::to_string(k) + " is outside 1.." + std::to_string(sources.size()) +
                        " for mode " + to_string(mode));
  }
  return sources[k - 1];
}

std::size_t SourceSpec::find(const std::string& text) const {
  const auto key = strip(text);
  for (const auto& r : sources) {
    if (r.text == key) return r.k;
  }
  if (mode == SourceMode::ThreeDomain6 &&
      (key.find("q(x,z)") != std::string::npos || key.find("q(x,y,z)") != std::string::npos)) {
    throw SamplingError("empirical draws '" + text + "' are never available: only q(x,y) and q(y,z) tables exist");
  }
  if (mode == SourceMode::Unpaired4 && key == "q(x,y)") {
    throw SamplingError("source 5 is unavailable in unpaired mode: there are no draws from q(x,y)");
  }
  throw SamplingError("malformed recipe '" + text + "' for mode " + to_string(mode));
}

std::vector<std::size_t> draw_rows(std::size_t rows, std::size_t n, Rng& rng) {
  if (rows == 0) throw SamplingError("cannot draw from an empty table");
  std::vector<std::size_t> idx(n);
  for (auto& i : idx) i = rng.index(rows);
  return idx;
}

JointBatch draw_batch(const SourceSpec& spec, std::size_t k, const GeneratorBank& bank,
                      const TwoDomainView& data, std::size_t n, Rng& rng, bool detach_chain) {
  if (spec.mode == SourceMode::ThreeDomain6 || spec.mode == SourceMode::Gan2) {
    throw SamplingError("draw_batch handles two-domain joint recipes only, not " + to_string(spec.mode));
  }
  if (n == 0) throw SamplingError("batch size must be positive");
  spec.source(k);  // validates k for the mode
  const auto* paired = std::get_if<PairedView>(&data);
  const auto* unpaired = std::get_if<UnpairedView>(&data);
  if (spec.mode == SourceMode::Unpaired4 && !unpaired) {
    throw SamplingError("unpaired mode requires an unpaired dataset view");
  }
  if (spec.mode == SourceMode::Paired5 && !paired) {
    throw SamplingError("requested paired joint draws from an unpaired dataset");
  }
  const Matrix& xcol = paired ? paired->x() : unpaired->x();
  const Matrix& ycol = paired ? paired->y() : unpaired->y();

  const bool grad = ad::grad_mode_enabled();
  JointBatch out;
  out.mode = spec.mode;
  out.source = k;
  switch (k) {
    case 1: {
      auto x = xcol.gather(draw_rows(xcol.rows, n, rng));
      auto y = bank.sample_conditional(Direction::YGivenX, x, rng.normal_tensor(n, bank.noise_dim(Domain::Y)));
      out.values = {x, y};
      out.graph_connected = {false, grad};
      break;
    }
    case 2: {
      auto y = ycol.gather(draw_rows(ycol.rows, n, rng));
      auto x = bank.sample_conditional(Direction::XGivenY, y, rng.normal_tensor(n, bank.noise_dim(Domain::X)));
      out.values = {x, y};
      out.graph_connected = {grad, false};
      break;
    }
    case 3: {
      auto e1 = rng.normal_tensor(n, bank.noise_dim(Domain::X));
      auto e2 = rng.normal_tensor(n, bank.noise_dim(Domain::Y));
      auto p = bank.sample_joint_chain(ChainOrder::XThenY, e1, e2, detach_chain);
      out.values = {p.x, p.y};
      out.graph_connected = {grad, grad};
      break;
    }
    case 4: {
      auto e1 = rng.normal_tensor(n, bank.noise_dim(Domain::Y));
      auto e2 = rng.normal_tensor(n, bank.noise_dim(Domain::X));
      auto p = bank.sample_joint_chain(ChainOrder::YThenX, e1, e2, detach_chain);
      out.values = {p.x, p.y};
      out.graph_connected = {grad, grad};
      break;
    }
    case 5: {
      const auto rows = draw_rows(paired->rows(), n, rng);
      out.values = {paired->x().gather(rows), paired->y().gather(rows)};
      out.graph_connected = {false, false};
      break;
    }
  }
  return out;
}

std::vector<JointBatch> draw_all(const SourceSpec& spec, const GeneratorBank& bank,
                                 const TwoDomainView& data, std::size_t n, Rng& rng, bool detach_chain) {
  std::vector<JointBatch> out;
  for (std::size_t k = 1; k <= spec.num_classes(); ++k) out.push_back(draw_batch(spec, k, bank, data, n, rng, detach_chain));
  return out;
}

JointBatch draw_three_domain_batch(std::size_t k, const ThreeDomainBank& bank,
                                   const OverlappingPairsView& data, std::size_t n, Rng& rng) {
  static const SourceSpec spec = SourceSpec::for_mode(SourceMode::ThreeDomain6);
  if (n == 0) throw SamplingError("batch size must be positive");
  const auto& recipe = spec.source(k);
  const auto e = bank.spec().noise_dim;
  const bool forward = recipe.factors.front().domain == Domain::X;

  ObservedPrefix prefix;
  const auto& lead = recipe.factors[0];
  const bool second_empirical = recipe.factors[1].empirical;
  if (lead.empirical) {
    const bool xy = lead.table == "xy";
    const auto rows = draw_rows(xy ? data.xy_x().rows : data.yz_y().rows, n, rng);
    if (forward) {
      prefix.x = data.xy_x().gather(rows);
      if (second_empirical) prefix.y = data.xy_y().gather(rows);
    } else {
      prefix.z = data.yz_z().gather(rows);
      if (second_empirical) prefix.y = data.yz_y().gather(rows);
    }
  }
  // Noise for every stage is drawn so that the rng stream does not depend on
  // which stages the prefix skips.
  auto e1 = rng.normal_tensor(n, e);
  auto e2 = rng.normal_tensor(n, e);
  auto e3 = rng.normal_tensor(n, e);
  auto t = bank.sample_chain(forward ? ThreeDomainOrder::XYZ : ThreeDomainOrder::ZYX, e1, e2, e3, prefix);

  const bool grad = ad::grad_mode_enabled();
  JointBatch out;
  out.mode = SourceMode::ThreeDomain6;
  out.source = k;
  out.values = {t.x, t.y, t.z};
  for (auto d : {Domain::X, Domain::Y, Domain::Z}) out.graph_connected.push_back(grad && !recipe.is_empirical(d));
  return out;
}

std::vector<JointBatch> draw_three_domain_all(const ThreeDomainBank& bank,
                                              const OverlappingPairsView& data, std::size_t n,
                                              Rng& rng) {
  std::vector<JointBatch> out;
  for (std::size_t k = 1; k <= 6; ++k) out.push_back(draw_three_domain_batch(k, bank, data, n, rng));
  return out;
}

}  // namespace jointgan
