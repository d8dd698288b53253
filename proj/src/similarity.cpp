#include "fisco/similarity.hpp"

#include <cmath>

#include "fisco/errors.hpp"

namespace fisco {

void WeightConfig::validate() const {
  const bool finite = std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma);
  if (!finite || gamma < 0.0 || gamma > beta || beta > alpha || alpha > 1.0) {
    throw Error(ErrorCode::ConfigError, "weights must satisfy 0 <= gamma <= beta <= alpha <= 1 (got alpha=" +
                                            std::to_string(alpha) + ", beta=" + std::to_string(beta) +
                                            ", gamma=" + std::to_string(gamma) + ")");
  }
}

LabelCounts count_labels(std::span<const ClaimVerdict> verdicts) {
  if (verdicts.empty()) throw Error(ErrorCode::EmptyVerdicts, "no verdicts to count");
  LabelCounts counts;
  for (const auto& v : verdicts) {
    switch (v.label) {
      case EntailmentLabel::Entailment: ++counts.c_e; break;
      case EntailmentLabel::Neutral: ++counts.c_n; break;
      case EntailmentLabel::Contradiction: ++counts.c_c; break;
    }
  }
  return counts;
}

double score_similarity(const LabelCounts& counts, const WeightConfig& weights) {
  const std::size_t total = counts.total();
  if (total == 0) throw Error(ErrorCode::ZeroClaims, "similarity of a pair with zero claims");
  const double weighted = weights.alpha * static_cast<double>(counts.c_e) +
                          weights.beta * static_cast<double>(counts.c_n) +
                          weights.gamma * static_cast<double>(counts.c_c);
  return weighted / static_cast<double>(total);
}

SimilarityScore score_pair(const ClaimSet& c1, const ResponseText& r1, const ClaimSet& c2, const ResponseText& r2,
                           const EntailmentChecker& checker, const WeightConfig& weights) {
  const auto verdicts = check_pair(c1, r1, c2, r2, checker);
  SimilarityScore s;
  s.counts = count_labels(verdicts);
  s.value = score_similarity(s.counts, weights);
  s.response_id_a = r1.response_id;
  s.response_id_b = r2.response_id;
  return s;
}

SimilarityScore score_pair(const ResponseText& r1, const ResponseText& r2, const EntailmentChecker& checker,
                           const WeightConfig& weights) {
  return score_pair(extract_claims(r1, checker), r1, extract_claims(r2, checker), r2, checker, weights);
}

}  // namespace fisco
