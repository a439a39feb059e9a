#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

#include "jointgan/dataset.hpp"
#include "jointgan/generators.hpp"
#include "jointgan/rng.hpp"
#include "jointgan/tensor.hpp"

namespace jointgan {

class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class SourceMode { Paired5, Unpaired4, ThreeDomain6, Gan2, Ali2 };

std::string to_string(SourceMode m);
SourceMode parse_source_mode(const std::string& s);
std::size_t num_sources(SourceMode m);

/// One factor of a recipe, listed in generation order. Empirical factors of
/// one recipe that share `table` are drawn from the same dataset row.
struct RecipeFactor {
  Domain domain;
  bool empirical;
  std::string network;       // generating network; empty when empirical
  std::vector<Domain> given;  // conditioning domains of a generated factor
  std::string table;          // empirical table ("x", "y", "xy", "yz"); empty when generated
};

struct SourceRecipe {
  std::size_t k;     // 1-based class label
  std::string text;  // canonical factorisation, e.g. "q(x)p_theta(y|x)"
  std::vector<RecipeFactor> factors;

  bool is_empirical(Domain d) const;
  const RecipeFactor& factor(Domain d) const;
};

struct SourceSpec {
  SourceMode mode;
  std::vector<SourceRecipe> sources;  // sources[k - 1] has label k

  static SourceSpec for_mode(SourceMode mode);
  const SourceRecipe& source(std::size_t k) const;
  std::size_t num_classes() const { return sources.size(); }
  /// Label of the recipe whose canonical text matches `text` (whitespace
  /// ignored). Throws SamplingError for recipes outside the mode, including
  /// empirical tables the mode never has.
  std::size_t find(const std::string& text) const;
};

/// n joint samples from one source; row i of every component is sample i.
/// `values` follows domain order (x, y[, z]).
struct JointBatch {
  SourceMode mode = SourceMode::Paired5;
  std::size_t source = 0;
  std::vector<ad::Tensor> values;
  std::vector<bool> graph_connected;

  std::size_t rows() const { return values.empty() ? 0 : values.front().rows(); }
};

/// Two-domain draw for paired_5, unpaired_4 and ali_2 recipes. Empirical
/// marginals are uniform with-replacement row draws from the matching column.
/// Generated components are graph-connected whenever grad mode is on;
/// `detach_chain` cuts the p_3/p_4 chains between marginal and conditional.
JointBatch draw_batch(const SourceSpec& spec, std::size_t k, const GeneratorBank& bank,
                      const TwoDomainView& data, std::size_t n, Rng& rng, bool detach_chain = false);

/// draw_batch for every source 1..K in order.
std::vector<JointBatch> draw_all(const SourceSpec& spec, const GeneratorBank& bank,
                                 const TwoDomainView& data, std::size_t n, Rng& rng, bool detach_chain = false);

/// Three-domain draw; k indexes SourceSpec::for_mode(ThreeDomain6).
JointBatch draw_three_domain_batch(std::size_t k, const ThreeDomainBank& bank,
                                   const OverlappingPairsView& data, std::size_t n, Rng& rng);
std::vector<JointBatch> draw_three_domain_all(const ThreeDomainBank& bank,
                                              const OverlappingPairsView& data, std::size_t n,
                                              Rng& rng);

/// n uniform with-replacement row indices in [0, rows).
std::vector<std::size_t> draw_rows(std::size_t rows, std::size_t n, Rng& rng);

}  // namespace jointgan
