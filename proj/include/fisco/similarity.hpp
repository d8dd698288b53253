#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "fisco/entailment.hpp"

namespace fisco {

/// Per-label weights. Must satisfy 0 <= gamma <= beta <= alpha <= 1.
struct WeightConfig {
  double alpha = 1.0;
  double beta = 0.0;
  double gamma = 0.0;

  void validate() const;
};

struct LabelCounts {
  std::size_t c_e = 0;
  std::size_t c_n = 0;
  std::size_t c_c = 0;

  [[nodiscard]] std::size_t total() const noexcept { return c_e + c_n + c_c; }
  bool operator==(const LabelCounts&) const = default;
};

struct SimilarityScore {
  double value = 0.0;
  std::string response_id_a;
  std::string response_id_b;
  LabelCounts counts;
};

/// Tallies labels over the verdicts of one response pair.
LabelCounts count_labels(std::span<const ClaimVerdict> verdicts);

/// (alpha*c_e + beta*c_n + gamma*c_c) / (c_e + c_n + c_c). No rounding.
double score_similarity(const LabelCounts& counts, const WeightConfig& weights);

/// Claim-level similarity of two responses, given their extracted claim sets.
SimilarityScore score_pair(const ClaimSet& c1, const ResponseText& r1, const ClaimSet& c2, const ResponseText& r2,
                           const EntailmentChecker& checker, const WeightConfig& weights);

/// Convenience overload that extracts claims first.
SimilarityScore score_pair(const ResponseText& r1, const ResponseText& r2, const EntailmentChecker& checker,
                           const WeightConfig& weights);

}  // namespace fisco
