#include <doctest.h>

#include <atomic>
#include <cmath>
#include <map>
#include <random>

#include "fisco/baselines.hpp"
#include "fisco/errors.hpp"
#include "fisco/mock_model.hpp"
#include "fisco/synthgen.hpp"

using namespace fisco;
using namespace fisco::baselines;

namespace {

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected fisco::Error");
  return ErrorCode::InvalidArgument;
}

TokenSequence seq(const std::string& s) { return TokenSequence::from_text(s); }

// Straightforward map-based BLEU used as the reference implementation.
double naive_bleu(const std::vector<std::string>& c, const std::vector<std::string>& r) {
  double log_sum = 0.0;
  int used = 0;
  for (std::size_t n = 1; n <= 4; ++n) {
    if (c.size() < n) continue;
    std::map<std::vector<std::string>, int> cc, rc;
    for (std::size_t i = 0; i + n <= c.size(); ++i) ++cc[{c.begin() + i, c.begin() + i + n}];
    for (std::size_t i = 0; i + n <= r.size(); ++i) ++rc[{r.begin() + i, r.begin() + i + n}];
    int clipped = 0;
    for (const auto& [g, k] : cc) clipped += std::min(k, rc.count(g) ? rc.at(g) : 0);
    const double p = clipped == 0 ? kBleuEpsilon : static_cast<double>(clipped) / (c.size() - n + 1);
    log_sum += std::log(p);
    ++used;
  }
  const double bp = c.size() >= r.size() ? 1.0 : std::exp(1.0 - static_cast<double>(r.size()) / c.size());
  return bp * std::exp(log_sum / used);
}

// Longest common subsequence by trying every subsequence of `a`.
std::size_t brute_lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::size_t best = 0;
  for (std::uint32_t mask = 0; mask < (1u << a.size()); ++mask) {
    std::size_t j = 0, len = 0;
    bool ok = true;
    for (std::size_t i = 0; i < a.size() && ok; ++i) {
      if (!(mask & (1u << i))) continue;
      while (j < b.size() && b[j] != a[i]) ++j;
      if (j == b.size()) ok = false;
      else {
        ++j;
        ++len;
      }
    }
    if (ok) best = std::max(best, len);
  }
  return best;
}

class CountingChecker final : public EntailmentChecker {
 public:
  explicit CountingChecker(std::shared_ptr<const EntailmentChecker> inner) : inner_(std::move(inner)) {}
  std::vector<std::string> decompose(std::string_view t) const override {
    ++decompositions;
    return inner_->decompose(t);
  }
  std::optional<std::string> provenance_of(std::string_view t) const override { return inner_->provenance_of(t); }
  EntailmentLabel judge(const Claim& c, const ResponseText& p) const override {
    ++judgements;
    return inner_->judge(c, p);
  }
  BackendKind kind() const noexcept override { return inner_->kind(); }
  mutable std::atomic<int> decompositions{0};
  mutable std::atomic<int> judgements{0};

 private:
  std::shared_ptr<const EntailmentChecker> inner_;
};

}  // namespace

TEST_CASE("metric names") {
  for (auto m : {Metric::Bleu, Metric::RougeL, Metric::Cosine}) CHECK(parse_metric(to_string(m)) == m);
  CHECK(code_of([] { (void)parse_metric("meteor"); }) == ErrorCode::ConfigError);
}

TEST_CASE("bleu hand example") {
  const auto d = bleu_detail(seq("the cat sat on the mat"), seq("the cat is on the mat"));
  CHECK(d.orders_used == 4);
  CHECK(d.precisions[0] == doctest::Approx(5.0 / 6.0));
  CHECK(d.precisions[1] == doctest::Approx(3.0 / 5.0));
  CHECK(d.precisions[2] == doctest::Approx(1.0 / 4.0));
  CHECK(d.precisions[3] == kBleuEpsilon);
  CHECK(d.brevity_penalty == 1.0);
  const double want = std::exp((std::log(5.0 / 6) + std::log(0.6) + std::log(0.25) + std::log(kBleuEpsilon)) / 4);
  CHECK(d.value == doctest::Approx(want).epsilon(1e-12));

  CHECK(bleu(seq("a b c d e"), seq("a b c d e")).value == doctest::Approx(1.0));
  // Clipping: repeated candidate words only match as often as the reference has them.
  const auto clip = bleu_detail(seq("the the the"), seq("the cat"));
  CHECK(clip.precisions[0] == doctest::Approx(1.0 / 3.0));
  CHECK(clip.orders_used == 3);
  // Brevity penalty for a short candidate.
  const auto shorty = bleu_detail(seq("a b"), seq("a b c d"));
  CHECK(shorty.brevity_penalty == doctest::Approx(std::exp(-1.0)));
  CHECK(shorty.orders_used == 2);
  CHECK(shorty.value == doctest::Approx(std::exp(-1.0)));
  CHECK(code_of([] { (void)bleu(seq(""), seq("x")); }) == ErrorCode::EmptySequence);
}

TEST_CASE("bleu matches the naive implementation") {
  std::mt19937_64 rng(5);
  const std::vector<std::string> vocab = {"a", "b", "c", "d", "e", "f"};
  std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1), len(1, 20);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<std::string> c(len(rng)), r(len(rng));
    for (auto& w : c) w = vocab[word(rng)];
    for (auto& w : r) w = vocab[word(rng)];
    const TokenSequence cs{c, ""}, rs{r, ""};
    const double got = bleu(cs, rs).value;
    CHECK(got == doctest::Approx(naive_bleu(c, r)).epsilon(1e-12));
    CHECK(got >= 0.0);
    CHECK(got <= 1.0);
  }
}

TEST_CASE("rouge-l hand values and exhaustive LCS") {
  CHECK(lcs_length(seq("a b c d").tokens, seq("a c d b").tokens) == 3);
  const auto r = rouge_l(seq("the cat sat on the mat"), seq("the cat is on the mat"));
  CHECK(r.value == doctest::Approx(5.0 / 6.0));
  const auto asym = rouge_l(seq("a b"), seq("a b c d"));
  // p = 1, r = 1/2
  CHECK(asym.value == doctest::Approx(2.0 / 3.0));
  CHECK(rouge_l(seq("x y"), seq("a b")).value == 0.0);

  std::mt19937_64 rng(3);
  const std::vector<std::string> vocab = {"a", "b", "c", "d"};
  std::uniform_int_distribution<std::size_t> word(0, vocab.size() - 1), len(0, 8);
  for (int rep = 0; rep < 400; ++rep) {
    std::vector<std::string> a(len(rng)), b(len(rng));
    for (auto& w : a) w = vocab[word(rng)];
    for (auto& w : b) w = vocab[word(rng)];
    CHECK(lcs_length(a, b) == brute_lcs(a, b));
    CHECK(lcs_length(a, b) == lcs_length(b, a));
  }
}

TEST_CASE("cosine with term frequencies") {
  CHECK(cosine(seq("a b"), seq("a b")).value == doctest::Approx(1.0));
  CHECK(cosine(seq("a a b"), seq("a b b")).value == doctest::Approx(4.0 / 5.0));
  CHECK(cosine(seq("a"), seq("b")).value == 0.0);
  CHECK(cosine(seq("Hello, world!"), seq("hello world")).value == doctest::Approx(1.0));
}

TEST_CASE("remote embedder") {
  mock::MockModelServer server;
  http::Endpoint ep;
  ep.base_url = server.base_url();
  ep.model_id = "embed";
  ep.api_key = "k";
  const RemoteEmbedder emb(ep, {1, std::chrono::milliseconds(1), std::chrono::milliseconds(1)});
  CHECK(cosine(seq("same words here"), seq("same words here"), emb).value == doctest::Approx(1.0));
  const double near = cosine(seq("the candidate is fit"), seq("the candidate is strong"), emb).value;
  CHECK(near > 0.0);
  CHECK(near < 1.0);
  const auto before = server.requests();
  (void)cosine(seq("same words here"), seq("the candidate is fit"), emb);
  CHECK(server.requests() == before);

  http::Endpoint dead = ep;
  dead.base_url = "http://127.0.0.1:1/v1";
  const RemoteEmbedder broken(dead, {1, std::chrono::milliseconds(1), std::chrono::milliseconds(1)});
  CHECK(code_of([&] { (void)cosine(seq("a"), seq("b"), broken); }) == ErrorCode::BackendUnavailable);
}

TEST_CASE("metric scorer orientation") {
  const auto scorer = metric_scorer(Metric::Bleu);
  const ResponseText ref{"r", "a b c d"}, other{"o", "a b"};
  // `other` is the candidate, so the brevity penalty applies.
  CHECK(scorer(ref, other) == doctest::Approx(std::exp(-1.0)));
  const double long_cand = std::exp((std::log(0.5) + std::log(1.0 / 3.0) + 2.0 * std::log(kBleuEpsilon)) / 4.0);
  CHECK(scorer(other, ref) == doctest::Approx(long_cand).epsilon(1e-12));
  CHECK(metric_scorer(Metric::RougeL)(ref, other) == doctest::Approx(2.0 / 3.0));
  CHECK(metric_scorer(Metric::Cosine)(ref, ref) == doctest::Approx(1.0));
}

TEST_CASE("fisco scorer caches claims and pair counts") {
  const auto& banks = synth::builtin_claim_banks();
  auto counting = std::make_shared<CountingChecker>(std::make_shared<OracleChecker>(synth::make_registry(banks)));
  const FiscoScorer scorer(counting, {});
  const auto t = synth::synth_triple(banks.front(), 4);
  const auto r1 = t.reference.as_response(), r2 = t.candidate2().as_response();

  const auto s = scorer.score(r1, r2);
  CHECK(s.counts == t.pair2.true_counts());
  CHECK(s.value == doctest::Approx(t.pair2.true_similarity({})));
  const int decomps = counting->decompositions, judges = counting->judgements;
  CHECK(decomps == 2);
  CHECK(judges == static_cast<int>(s.counts.total()));

  const auto back = scorer.score(r2, r1, {1.0, 0.5, 0.0});
  CHECK(back.counts == s.counts);
  CHECK(counting->decompositions == decomps);
  CHECK(counting->judgements == judges);
  CHECK(back.value == doctest::Approx(score_similarity(s.counts, {1.0, 0.5, 0.0})));
  CHECK(scorer.as_scorer()(r1, r2) == s.value);
  CHECK(code_of([&] { (void)scorer.as_scorer({0.5, 0.6, 0.0}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { FiscoScorer bad(nullptr, {}); }) == ErrorCode::ConfigError);
}

TEST_CASE("group metric decision") {
  const auto& bank = synth::builtin_claim_banks().front();
  const auto gc = synth::synth_group_case(bank, 5, 0.5, 3);
  std::vector<ResponseText> g1, g2;
  for (const auto& r : gc.sets[0]) g1.push_back(r.as_response());
  for (const auto& r : gc.sets[2]) g2.push_back(r.as_response());
  const FiscoScorer scorer(std::make_shared<OracleChecker>(synth::make_registry(synth::builtin_claim_banks())), {});
  const auto res = group_metric_decision("g", scorer.as_scorer(), g1, g2);
  CHECK(res.n1 == 25);
  CHECK(res.n2 == 20);
  CHECK(res.mean_inter < res.mean_intra);
  CHECK(res.biased);
}
