#include "fisco/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <unordered_map>

#include "fisco/errors.hpp"
#include "fisco/text.hpp"

namespace fisco::baselines {

TokenSequence TokenSequence::from_text(std::string_view text) {
  return {text::tokenize(text), std::string(text)};
}

std::string_view to_string(Metric m) noexcept {
  switch (m) {
    case Metric::Bleu: return "bleu";
    case Metric::RougeL: return "rouge_l";
    case Metric::Cosine: return "cosine";
  }
  return "bleu";
}

Metric parse_metric(std::string_view s) {
  for (auto m : {Metric::Bleu, Metric::RougeL, Metric::Cosine}) {
    if (to_string(m) == s) return m;
  }
  throw Error(ErrorCode::ConfigError, "unknown metric '" + std::string(s) + "'");
}

namespace {

void require_non_empty(const TokenSequence& a, const TokenSequence& b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySequence, "metric inputs must contain tokens");
}

using Gram = std::array<std::uint32_t, kBleuMaxOrder>;

std::vector<Gram> sorted_ngrams(const std::vector<std::uint32_t>& ids, std::size_t n) {
  std::vector<Gram> grams;
  if (ids.size() < n) return grams;
  for (std::size_t i = 0; i + n <= ids.size(); ++i) {
    Gram g{};
    for (std::size_t j = 0; j < n; ++j) g[j] = ids[i + j];
    grams.push_back(g);
  }
  std::sort(grams.begin(), grams.end());
  return grams;
}

/// Sum over distinct grams of min(count in a, count in b); both inputs sorted.
std::size_t clipped_matches(const std::vector<Gram>& a, const std::vector<Gram>& b) {
  std::size_t matches = 0, i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++matches;
      ++i;
      ++j;
    }
  }
  return matches;
}

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

}  // namespace

BleuDetail bleu_detail(const TokenSequence& candidate, const TokenSequence& reference) {
  require_non_empty(candidate, reference);
  std::unordered_map<std::string_view, std::uint32_t> vocab;
  auto ids_of = [&vocab](const std::vector<std::string>& tokens) {
    std::vector<std::uint32_t> ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) ids.push_back(vocab.try_emplace(t, static_cast<std::uint32_t>(vocab.size())).first->second);
    return ids;
  };
  const auto cand_ids = ids_of(candidate.tokens);
  const auto ref_ids = ids_of(reference.tokens);

  BleuDetail d;
  double log_sum = 0.0;
  for (std::size_t n = 1; n <= kBleuMaxOrder; ++n) {
    if (candidate.size() < n) break;
    const std::size_t clipped = clipped_matches(sorted_ngrams(cand_ids, n), sorted_ngrams(ref_ids, n));
    const double total = static_cast<double>(candidate.size() - n + 1);
    const double p = clipped == 0 ? kBleuEpsilon : static_cast<double>(clipped) / total;
    d.precisions[n - 1] = p;
    log_sum += std::log(p);
    ++d.orders_used;
  }
  if (candidate.size() < reference.size()) {
    d.brevity_penalty =
        std::exp(1.0 - static_cast<double>(reference.size()) / static_cast<double>(candidate.size()));
  }
  d.value = clamp01(d.brevity_penalty * std::exp(log_sum / static_cast<double>(d.orders_used)));
  return d;
}

MetricScore bleu(const TokenSequence& candidate, const TokenSequence& reference) {
  return {Metric::Bleu, bleu_detail(candidate, reference).value};
}

std::size_t lcs_length(std::span<const std::string> a, std::span<const std::string> b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

MetricScore rouge_l(const TokenSequence& candidate, const TokenSequence& reference) {
  require_non_empty(candidate, reference);
  const auto lcs = static_cast<double>(lcs_length(candidate.tokens, reference.tokens));
  if (lcs == 0.0) return {Metric::RougeL, 0.0};
  const double p = lcs / static_cast<double>(candidate.size());
  const double r = lcs / static_cast<double>(reference.size());
  return {Metric::RougeL, clamp01(2.0 * p * r / (p + r))};
}

std::array<std::vector<double>, 2> TermFrequencyEmbedder::embed(const TokenSequence& a,
                                                                const TokenSequence& b) const {
  std::map<std::string, std::size_t> vocab;
  for (const auto* seq : {&a, &b}) {
    for (const auto& t : seq->tokens) vocab.try_emplace(t, vocab.size());
  }
  std::array<std::vector<double>, 2> out{std::vector<double>(vocab.size(), 0.0),
                                         std::vector<double>(vocab.size(), 0.0)};
  for (const auto& t : a.tokens) out[0][vocab.at(t)] += 1.0;
  for (const auto& t : b.tokens) out[1][vocab.at(t)] += 1.0;
  return out;
}

RemoteEmbedder::RemoteEmbedder(http::Endpoint endpoint, http::RetryPolicy retry)
    : client_(std::move(endpoint), retry) {}

std::vector<double> RemoteEmbedder::one(const std::string& text) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = cache_.find(text); it != cache_.end()) return it->second;
  }
  std::vector<double> v;
  try {
    v = client_.embed(text);
  } catch (const Error& e) {
    throw Error(ErrorCode::BackendUnavailable, std::string("embedding request failed: ") + e.what());
  }
  std::lock_guard lock(mutex_);
  return cache_.try_emplace(text, std::move(v)).first->second;
}

std::array<std::vector<double>, 2> RemoteEmbedder::embed(const TokenSequence& a, const TokenSequence& b) const {
  return {one(a.source), one(b.source)};
}

MetricScore cosine(const TokenSequence& candidate, const TokenSequence& reference, const Embedder& embedder) {
  require_non_empty(candidate, reference);
  const auto [u, v] = embedder.embed(candidate, reference);
  if (u.size() != v.size()) {
    throw Error(ErrorCode::BackendUnavailable, "embedding dimensions differ");
  }
  double dot = 0.0, nu = 0.0, nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) return {Metric::Cosine, 0.0};
  return {Metric::Cosine, clamp01(dot / (std::sqrt(nu) * std::sqrt(nv)))};
}

PairScorer metric_scorer(Metric metric, std::shared_ptr<const Embedder> embedder) {
  if (metric == Metric::Cosine && !embedder) embedder = std::make_shared<TermFrequencyEmbedder>();
  struct TokenCache {
    std::mutex mutex;
    std::unordered_map<std::string, std::shared_ptr<const TokenSequence>> by_text;

    std::shared_ptr<const TokenSequence> get(const std::string& text) {
      {
        std::lock_guard lock(mutex);
        if (auto it = by_text.find(text); it != by_text.end()) return it->second;
      }
      auto seq = std::make_shared<const TokenSequence>(TokenSequence::from_text(text));
      std::lock_guard lock(mutex);
      return by_text.try_emplace(text, std::move(seq)).first->second;
    }
  };
  auto cache = std::make_shared<TokenCache>();
  return [metric, embedder, cache](const ResponseText& reference, const ResponseText& other) {
    const auto ref = cache->get(reference.text);
    const auto cand = cache->get(other.text);
    switch (metric) {
      case Metric::Bleu: return bleu(*cand, *ref).value;
      case Metric::RougeL: return rouge_l(*cand, *ref).value;
      case Metric::Cosine: return cosine(*cand, *ref, *embedder).value;
    }
    return 0.0;
  };
}

// ---------------------------------------------------------------------------

FiscoScorer::FiscoScorer(std::shared_ptr<const EntailmentChecker> checker, WeightConfig weights)
    : checker_(std::move(checker)), weights_(weights) {
  if (!checker_) throw Error(ErrorCode::ConfigError, "FiSCo scorer needs an entailment checker");
  weights_.validate();
}

const ClaimSet& FiscoScorer::claims(const ResponseText& r) const {
  {
    std::lock_guard lock(mutex_);
    if (auto it = claims_.find(r.response_id); it != claims_.end()) return *it->second;
  }
  auto set = std::make_shared<const ClaimSet>(extract_claims(r, *checker_));
  std::lock_guard lock(mutex_);
  return *claims_.try_emplace(r.response_id, std::move(set)).first->second;
}

LabelCounts FiscoScorer::counts(const ResponseText& a, const ResponseText& b) const {
  auto key = std::minmax(a.response_id, b.response_id);
  const std::pair<std::string, std::string> k{key.first, key.second};
  {
    std::lock_guard lock(mutex_);
    if (auto it = counts_.find(k); it != counts_.end()) return it->second;
  }
  const auto verdicts = check_pair(claims(a), a, claims(b), b, *checker_);
  const LabelCounts c = count_labels(verdicts);
  std::lock_guard lock(mutex_);
  return counts_.try_emplace(k, c).first->second;
}

SimilarityScore FiscoScorer::score(const ResponseText& a, const ResponseText& b) const {
  return score(a, b, weights_);
}

SimilarityScore FiscoScorer::score(const ResponseText& a, const ResponseText& b, const WeightConfig& weights) const {
  SimilarityScore s;
  s.response_id_a = a.response_id;
  s.response_id_b = b.response_id;
  s.counts = counts(a, b);
  s.value = score_similarity(s.counts, weights);
  return s;
}

PairScorer FiscoScorer::as_scorer() const { return as_scorer(weights_); }

PairScorer FiscoScorer::as_scorer(const WeightConfig& weights) const {
  weights.validate();
  return [this, weights](const ResponseText& reference, const ResponseText& other) {
    return score(reference, other, weights).value;
  };
}

stats::CaseResult group_metric_decision(const std::string& case_id, const PairScorer& scorer,
                                        std::span<const ResponseText> group1, std::span<const ResponseText> group2,
                                        double significance_level) {
  std::vector<std::string> ids1, ids2;
  std::map<std::string, const ResponseText*> by_id;
  for (const auto& r : group1) {
    ids1.push_back(r.response_id);
    by_id[r.response_id] = &r;
  }
  for (const auto& r : group2) {
    ids2.push_back(r.response_id);
    by_id[r.response_id] = &r;
  }
  const auto pairs = stats::enumerate_pairs(ids1, ids2);
  std::vector<double> inter, intra;
  for (const auto& [a, b] : pairs.inter) inter.push_back(scorer(*by_id.at(a), *by_id.at(b)));
  for (const auto& [a, b] : pairs.intra) intra.push_back(scorer(*by_id.at(a), *by_id.at(b)));
  return stats::fisco_case(case_id, inter, intra, significance_level);
}

}  // namespace fisco::baselines
