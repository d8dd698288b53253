#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fisco/baselines.hpp"
#include "fisco/stats.hpp"
#include "fisco/synthgen.hpp"

namespace fisco::eval {

using synth::Closer;

inline constexpr double kTieEpsilon = 1e-6;

// ---------------------------------------------------------------------------
// Triple agreement

/// R2Closer when s2 exceeds s3 by at least tie_epsilon, R3Closer in the
/// mirrored case, Tie otherwise.
Closer judge_scores(double s2, double s3, double tie_epsilon = kTieEpsilon);

Closer judge_triple(const baselines::PairScorer& scorer, const synth::TripleCase& c,
                    double tie_epsilon = kTieEpsilon);

struct TriplePredictions {
  std::string method;
  std::vector<Closer> predictions;
};

TriplePredictions predict_triples(std::string method, const baselines::PairScorer& scorer,
                                  std::span<const synth::TripleCase> cases, double tie_epsilon = kTieEpsilon);

struct BootstrapOptions {
  double level = 0.95;
  std::size_t resamples = 1000;
  std::uint64_t seed = 0;
};

struct AgreementReport {
  std::string method;
  std::size_t n = 0;
  std::size_t matches = 0;
  stats::BootstrapCI ci;
  std::optional<std::string> comparator;
  std::optional<stats::PairedTestResult> paired;
  /// 1 where the prediction equals gold, else 0.
  std::vector<double> correct;

  [[nodiscard]] double agreement() const noexcept {
    return n == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(n);
  }
};

/// Exact-match rate against gold with a bootstrap interval; when a comparator
/// is given, a paired t test on the per-case 0/1 vectors.
AgreementReport triple_agreement(const TriplePredictions& method, std::span<const synth::TripleCase> cases,
                                 const TriplePredictions* comparator = nullptr, const BootstrapOptions& boot = {});

// ---------------------------------------------------------------------------
// Group-level agreement

/// Returns true for "biased" (predicts an Inter pairing).
using GroupDecider = std::function<bool(const std::string& pairing_id, std::span<const ResponseText> first,
                                        std::span<const ResponseText> second)>;

/// Welch decision over `scorer` similarities.
GroupDecider welch_decider(baselines::PairScorer scorer, double significance_level = stats::kDefaultSignificance);

struct PairingDecision {
  std::string case_id;
  std::size_t first = 0;
  std::size_t second = 0;
  synth::PairingKind truth = synth::PairingKind::Intra;
  synth::PairingKind predicted = synth::PairingKind::Intra;
};

struct GroupAgreementReport {
  std::string method;
  std::size_t inter_total = 0;
  std::size_t inter_correct = 0;
  std::size_t intra_total = 0;
  std::size_t intra_correct = 0;
  std::vector<PairingDecision> decisions;

  [[nodiscard]] double inter_acc() const noexcept;
  [[nodiscard]] double intra_acc() const noexcept;
  /// Over all pairings, i.e. the count-weighted mean of the two.
  [[nodiscard]] double total_acc() const noexcept;
};

std::vector<ResponseText> as_responses(const std::vector<synth::SynthResponse>& set);

GroupAgreementReport group_agreement(std::string method, const GroupDecider& decide,
                                     std::span<const synth::GroupCase> cases);

// ---------------------------------------------------------------------------
// Bias benchmark

struct BiasCell {
  std::size_t biased = 0;
  std::size_t total = 0;
  std::size_t excluded = 0;  // cases dropped, e.g. underfilled groups

  [[nodiscard]] double rate() const noexcept {
    return total == 0 ? 0.0 : static_cast<double>(biased) / static_cast<double>(total);
  }
};

/// Rows are model ids, columns axis names.
class BiasRateTable {
 public:
  void record(const std::string& model_id, const std::string& axis, bool biased);
  void record_excluded(const std::string& model_id, const std::string& axis);

  [[nodiscard]] const std::map<std::string, std::map<std::string, BiasCell>>& cells() const noexcept {
    return cells_;
  }
  [[nodiscard]] BiasCell cell(const std::string& model_id, const std::string& axis) const;
  [[nodiscard]] std::vector<std::string> models() const;
  [[nodiscard]] std::vector<std::string> axes() const;

  /// model,axis,biased,total,excluded,rate with the rate to 2 decimals.
  [[nodiscard]] std::string to_csv() const;
  /// Exact counts plus the rate as a double and as a 2-decimal string.
  [[nodiscard]] nlohmann::json to_json() const;

 private:
  std::map<std::string, std::map<std::string, BiasCell>> cells_;
};

/// "13% of evaluated prompt cases were classified as biased"
std::string describe_rate(double rate);

/// Two-decimal fixed rendering used in every table.
std::string format2(double v);

/// One collected case: both groups' responses for one (model, axis, case).
struct CollectedGroups {
  std::string model_id;
  std::string axis;
  std::string case_id;
  std::vector<ResponseText> group1;
  std::vector<ResponseText> group2;
  /// Set when collection gave up; the case is excluded from the rates.
  bool underfilled = false;
};

struct BenchmarkResult {
  BiasRateTable table;
  std::vector<std::pair<CollectedGroups, stats::CaseResult>> cases;
};

BenchmarkResult benchmark_models(std::span<const CollectedGroups> cases, const baselines::PairScorer& scorer,
                                 double significance_level = stats::kDefaultSignificance);

}  // namespace fisco::eval
