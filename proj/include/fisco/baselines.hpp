#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "fisco/entailment.hpp"
#include "fisco/http.hpp"
#include "fisco/similarity.hpp"
#include "fisco/stats.hpp"

namespace fisco::baselines {

struct TokenSequence {
  std::vector<std::string> tokens;
  std::string source;  // original text, for embedders that need it

  static TokenSequence from_text(std::string_view text);
  [[nodiscard]] std::size_t size() const noexcept { return tokens.size(); }
  [[nodiscard]] bool empty() const noexcept { return tokens.empty(); }
};

enum class Metric { Bleu, RougeL, Cosine };
std::string_view to_string(Metric m) noexcept;
Metric parse_metric(std::string_view s);

struct MetricScore {
  Metric metric = Metric::Bleu;
  double value = 0.0;
};

// ---------------------------------------------------------------------------
// BLEU

inline constexpr double kBleuEpsilon = 1e-9;
inline constexpr std::size_t kBleuMaxOrder = 4;

struct BleuDetail {
  /// Clipped n-gram precision per order; zero precisions are replaced by
  /// kBleuEpsilon. Orders for which the candidate has no n-grams are skipped.
  std::array<double, kBleuMaxOrder> precisions{};
  std::size_t orders_used = 0;
  double brevity_penalty = 1.0;
  double value = 0.0;
};

BleuDetail bleu_detail(const TokenSequence& candidate, const TokenSequence& reference);
MetricScore bleu(const TokenSequence& candidate, const TokenSequence& reference);

// ---------------------------------------------------------------------------
// ROUGE-L

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b);
MetricScore rouge_l(const TokenSequence& candidate, const TokenSequence& reference);

// ---------------------------------------------------------------------------
// Cosine

class Embedder {
 public:
  virtual ~Embedder() = default;
  /// Embeds both sides; implementations may use the pair jointly.
  [[nodiscard]] virtual std::array<std::vector<double>, 2> embed(const TokenSequence& a,
                                                                 const TokenSequence& b) const = 0;
};

/// Term-frequency vectors over the pair's joint vocabulary.
class TermFrequencyEmbedder final : public Embedder {
 public:
  [[nodiscard]] std::array<std::vector<double>, 2> embed(const TokenSequence& a,
                                                         const TokenSequence& b) const override;
};

/// Embeddings from an /embeddings endpoint. Client failures surface as
/// BackendUnavailable.
class RemoteEmbedder final : public Embedder {
 public:
  RemoteEmbedder(http::Endpoint endpoint, http::RetryPolicy retry);
  [[nodiscard]] std::array<std::vector<double>, 2> embed(const TokenSequence& a,
                                                         const TokenSequence& b) const override;

 private:
  [[nodiscard]] std::vector<double> one(const std::string& text) const;
  http::ChatClient client_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, std::vector<double>> cache_;
};

/// Cosine of the embeddings, clamped to [0, 1].
MetricScore cosine(const TokenSequence& candidate, const TokenSequence& reference,
                   const Embedder& embedder = TermFrequencyEmbedder{});

// ---------------------------------------------------------------------------
// Pair scorers shared by FiSCo and the baselines

/// Similarity of `other` to `reference`. Baselines treat `other` as the
/// candidate side.
using PairScorer = std::function<double(const ResponseText& reference, const ResponseText& other)>;

PairScorer metric_scorer(Metric metric, std::shared_ptr<const Embedder> embedder = nullptr);

/// FiSCo similarity with claim sets extracted once per response id and label
/// counts computed once per unordered pair of ids, so rescoring under other
/// weights costs no further checker calls.
class FiscoScorer {
 public:
  FiscoScorer(std::shared_ptr<const EntailmentChecker> checker, WeightConfig weights);

  [[nodiscard]] SimilarityScore score(const ResponseText& a, const ResponseText& b) const;
  [[nodiscard]] SimilarityScore score(const ResponseText& a, const ResponseText& b,
                                      const WeightConfig& weights) const;
  [[nodiscard]] LabelCounts counts(const ResponseText& a, const ResponseText& b) const;
  [[nodiscard]] const ClaimSet& claims(const ResponseText& r) const;
  [[nodiscard]] PairScorer as_scorer() const;
  [[nodiscard]] PairScorer as_scorer(const WeightConfig& weights) const;
  [[nodiscard]] const WeightConfig& weights() const noexcept { return weights_; }

 private:
  std::shared_ptr<const EntailmentChecker> checker_;
  WeightConfig weights_;
  mutable std::mutex mutex_;
  mutable std::unordered_map<std::string, std::shared_ptr<const ClaimSet>> claims_;
  mutable std::map<std::pair<std::string, std::string>, LabelCounts> counts_;
};

/// Scores every inter- and intra-group pair with `scorer` and applies the
/// same Welch decision as the FiSCo pipeline.
stats::CaseResult group_metric_decision(const std::string& case_id, const PairScorer& scorer,
                                        std::span<const ResponseText> group1, std::span<const ResponseText> group2,
                                        double significance_level = stats::kDefaultSignificance);

}  // namespace fisco::baselines
