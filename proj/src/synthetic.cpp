#include "jointgan/synthetic.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace jointgan {

namespace {

double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || v.empty()) throw DataError("invalid value '" + v + "' for " + key);
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  const double d = to_double(key, v);
  if (d < 0 || d != std::floor(d)) throw DataError("invalid count '" + v + "' for " + key);
  return static_cast<std::size_t>(d);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::vector<double> mixture_weights(const SyntheticSpec& s) {
  if (!s.weights.empty()) return s.weights;
  return std::vector<double>(s.components, 1.0 / static_cast<double>(s.components));
}

std::size_t draw_component(Rng& rng, const std::vector<double>& w) {
  double u = rng.uniform();
  for (std::size_t k = 0; k + 1 < w.size(); ++k) {
    if (u < w[k]) return k;
    u -= w[k];
  }
  return w.size() - 1;
}

}  // namespace

std::string to_string(Family f) {
  switch (f) {
    case Family::CorrelatedGaussian: return "correlated_gaussian";
    case Family::GaussianMixturePairs: return "gaussian_mixture_pairs";
    case Family::RingPairs: return "ring_pairs";
    case Family::DeterministicMap: return "deterministic_map";
    case Family::Chain: return "chain";
  }
  return "correlated_gaussian";
}

Family parse_family(const std::string& s) {
  if (s == "correlated_gaussian") return Family::CorrelatedGaussian;
  if (s == "gaussian_mixture_pairs") return Family::GaussianMixturePairs;
  if (s == "ring_pairs") return Family::RingPairs;
  if (s == "deterministic_map") return Family::DeterministicMap;
  if (s == "chain") return Family::Chain;
  throw DataError("unknown synthetic family '" + s + "'");
}

void SyntheticSpec::validate() const {
  if (rows == 0) throw DataError("synthetic spec needs at least one row");
  if (dim == 0) throw DataError("synthetic spec dimension must be positive");
  if (noise < 0.0) throw DataError("noise scale must be nonnegative");
  switch (family) {
    case Family::CorrelatedGaussian:
      // Covariance [[1, rho], [rho, 1]] is positive definite iff |rho| < 1.
      if (!(std::abs(rho) < 1.0)) throw DataError("correlation must satisfy |rho| < 1 (covariance not positive definite)");
      break;
    case Family::GaussianMixturePairs: {
      if (dim != 2) throw DataError("gaussian_mixture_pairs is two-dimensional");
      if (components == 0) throw DataError("mixture needs at least one component");
      if (!(component_sd > 0.0)) throw DataError("component covariance must be positive definite");
      auto w = mixture_weights(*this);
      if (w.size() != components) throw DataError("mixture weight count does not match components");
      double total = 0.0;
      for (double v : w) {
        if (!(v >= 0.0)) throw DataError("mixture weights must be nonnegative");
        total += v;
      }
      if (std::abs(total - 1.0) > 1e-9) throw DataError("mixture weights must sum to one");
      break;
    }
    case Family::RingPairs:
      if (dim != 2) throw DataError("ring_pairs is two-dimensional");
      if (!(radius > 0.0) || !(ring_radius_y > 0.0)) throw DataError("ring radii must be positive");
      break;
    case Family::DeterministicMap:
    case Family::Chain:
      break;
  }
  if (pairing == Pairing::TwoOverlappingPairs && family != Family::Chain) {
    throw DataError("only the chain family produces overlapping pair tables");
  }
  if (family == Family::Chain && pairing != Pairing::TwoOverlappingPairs) {
    throw DataError("the chain family is stored as two overlapping pair tables");
  }
}

std::map<std::string, std::string> SyntheticSpec::to_map() const {
  std::map<std::string, std::string> kv;
  kv["family"] = to_string(family);
  kv["rows"] = std::to_string(rows);
  kv["dim"] = std::to_string(dim);
  kv["pairing"] = to_string(pairing);
  kv["noise"] = fmt(noise);
  switch (family) {
    case Family::CorrelatedGaussian: kv["rho"] = fmt(rho); break;
    case Family::GaussianMixturePairs: {
      kv["components"] = std::to_string(components);
      kv["radius"] = fmt(radius);
      kv["component_sd"] = fmt(component_sd);
      kv["rotation"] = fmt(rotation);
      if (!weights.empty()) {
        std::string w;
        for (std::size_t i = 0; i < weights.size(); ++i) w += (i ? "," : "") + fmt(weights[i]);
        kv["weights"] = w;
      }
      break;
    }
    case Family::RingPairs:
      kv["radius"] = fmt(radius);
      kv["ring_radius_y"] = fmt(ring_radius_y);
      kv["rotation"] = fmt(rotation);
      break;
    case Family::DeterministicMap: kv["map_scale"] = fmt(map_scale); break;
    case Family::Chain: break;
  }
  return kv;
}

SyntheticSpec SyntheticSpec::from_map(const std::map<std::string, std::string>& kv) {
  SyntheticSpec s;
  for (const auto& [k, v] : kv) {
    if (k == "family") s.family = parse_family(v);
    else if (k == "rows") s.rows = to_size(k, v);
    else if (k == "dim") s.dim = to_size(k, v);
    else if (k == "rho") s.rho = to_double(k, v);
    else if (k == "components") s.components = to_size(k, v);
    else if (k == "radius") s.radius = to_double(k, v);
    else if (k == "component_sd") s.component_sd = to_double(k, v);
    else if (k == "rotation") s.rotation = to_double(k, v);
    else if (k == "ring_radius_y") s.ring_radius_y = to_double(k, v);
    else if (k == "map_scale") s.map_scale = to_double(k, v);
    else if (k == "noise") s.noise = to_double(k, v);
    else if (k == "pairing") s.pairing = parse_pairing(v);
    else if (k == "weights") {
      s.weights.clear();
      std::stringstream ss(v);
      std::string item;
      while (std::getline(ss, item, ',')) s.weights.push_back(to_double(k, item));
    } else {
      throw DataError("unknown synthetic spec field '" + k + "'");
    }
  }
  if (s.family == Family::GaussianMixturePairs || s.family == Family::RingPairs) {
    if (!kv.count("dim")) s.dim = 2;
  }
  if (s.family == Family::Chain && !kv.count("pairing")) s.pairing = Pairing::TwoOverlappingPairs;
  return s;
}

std::string SyntheticSpec::echo() const {
  std::string out;
  for (const auto& [k, v] : to_map()) out += (out.empty() ? "" : ";") + k + "=" + v;
  return out;
}

SyntheticSpec SyntheticSpec::parse_echo(const std::string& s) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw DataError("malformed spec echo '" + s + "'");
    kv[item.substr(0, eq)] = item.substr(eq + 1);
  }
  return from_map(kv);
}

Matrix sample_x_marginal(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed) {
  auto s = spec;
  s.rows = n;
  if (s.family == Family::Chain) {
    auto ds = generate(s, seed);
    return ds.column("xy.x");
  }
  s.pairing = Pairing::Paired;
  return generate(s, seed).column("x");
}

std::vector<Matrix> sample_chain_triples(const SyntheticSpec& spec, std::size_t n, std::uint64_t seed) {
  if (spec.family != Family::Chain) throw DataError("chain triples need a chain spec");
  const auto d = spec.dim;
  Rng rng(seed);
  Matrix x(n, d), y(n, d), z(n, d);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      x(r, j) = rng.normal();
      y(r, j) = x(r, j) + spec.noise * rng.normal();
      z(r, j) = -y(r, j) + spec.noise * rng.normal();
    }
  }
  return {x, y, z};
}

Matrix ground_truth_map(const SyntheticSpec& spec, const Matrix& x) {
  if (!spec.has_ground_truth_map()) {
    throw DataError("benchmark '" + to_string(spec.family) + "' has no ground-truth map");
  }
  Matrix y = x;
  for (auto& v : y.values) v *= spec.map_scale;
  return y;
}

Dataset generate(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  const auto n = spec.rows, d = spec.dim;
  std::map<std::string, std::string> meta{{"spec", spec.echo()}, {"seed", std::to_string(seed)}};

  if (spec.family == Family::Chain) {
    // Each table comes from its own chain draws, so rows never align across
    // all three domains.
    Matrix xy_x(n, d), xy_y(n, d), yz_y(n, d), yz_z(n, d);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        const double x = rng.normal();
        xy_x(r, j) = x;
        xy_y(r, j) = x + spec.noise * rng.normal();
      }
    }
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        const double x = rng.normal();
        const double y = x + spec.noise * rng.normal();
        yz_y(r, j) = y;
        yz_z(r, j) = -y + spec.noise * rng.normal();
      }
    }
    return Dataset(Pairing::TwoOverlappingPairs,
                   {{"xy.x", xy_x}, {"xy.y", xy_y}, {"yz.y", yz_y}, {"yz.z", yz_z}}, meta);
  }

  Matrix x(n, d), y(n, d);
  const auto weights = mixture_weights(spec);
  const double c = std::cos(spec.rotation), s = std::sin(spec.rotation);
  for (std::size_t r = 0; r < n; ++r) {
    switch (spec.family) {
      case Family::CorrelatedGaussian: {
        const double tail = std::sqrt(1.0 - spec.rho * spec.rho);
        for (std::size_t j = 0; j < d; ++j) {
          x(r, j) = rng.normal();
          y(r, j) = spec.rho * x(r, j) + tail * rng.normal();
        }
        break;
      }
      case Family::GaussianMixturePairs: {
        const auto k = draw_component(rng, weights);
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(spec.components);
        x(r, 0) = spec.radius * std::cos(angle) + spec.component_sd * rng.normal();
        x(r, 1) = spec.radius * std::sin(angle) + spec.component_sd * rng.normal();
        y(r, 0) = c * x(r, 0) - s * x(r, 1) + spec.noise * rng.normal();
        y(r, 1) = s * x(r, 0) + c * x(r, 1) + spec.noise * rng.normal();
        break;
      }
      case Family::RingPairs: {
        const double angle = 2.0 * std::numbers::pi * rng.uniform();
        x(r, 0) = spec.radius * std::cos(angle) + spec.noise * rng.normal();
        x(r, 1) = spec.radius * std::sin(angle) + spec.noise * rng.normal();
        y(r, 0) = spec.ring_radius_y * std::cos(angle + spec.rotation) + spec.noise * rng.normal();
        y(r, 1) = spec.ring_radius_y * std::sin(angle + spec.rotation) + spec.noise * rng.normal();
        break;
      }
      case Family::DeterministicMap: {
        for (std::size_t j = 0; j < d; ++j) {
          x(r, j) = rng.normal();
          y(r, j) = spec.map_scale * x(r, j);
          if (spec.noise > 0.0) y(r, j) += spec.noise * rng.normal();
        }
        break;
      }
      case Family::Chain: break;
    }
  }
  Dataset ds(Pairing::Paired, {{"x", x}, {"y", y}}, meta);
  if (spec.pairing == Pairing::Unpaired) {
    auto shuffled = ds.unpaired(derive_seed(seed, 17));
    shuffled.metadata().erase("view_seed");
    return shuffled;
  }
  return ds;
}

std::optional<SyntheticSpec> spec_from_metadata(const Dataset& ds) {
  auto it = ds.metadata().find("spec");
  if (it == ds.metadata().end()) return std::nullopt;
  return SyntheticSpec::parse_echo(it->second);
}

}  // namespace jointgan
