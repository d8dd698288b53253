#include <doctest.h>

#include "fisco/errors.hpp"
#include "fisco/evalharness.hpp"

using namespace fisco;
using namespace fisco::eval;

namespace {

const std::vector<synth::ClaimBank>& banks() { return synth::builtin_claim_banks(); }

std::shared_ptr<const OracleChecker> oracle() {
  static const auto o = std::make_shared<const OracleChecker>(synth::make_registry(banks()));
  return o;
}

std::vector<synth::TripleCase> triples(std::size_t n) {
  std::vector<synth::TripleCase> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(synth::synth_triple(banks()[i % banks().size()], 100 + i));
  return out;
}

}  // namespace

TEST_CASE("score comparison with tie band") {
  CHECK(judge_scores(0.8, 0.7) == Closer::R2Closer);
  CHECK(judge_scores(0.7, 0.8) == Closer::R3Closer);
  CHECK(judge_scores(0.7, 0.7 + 1e-7) == Closer::Tie);
  CHECK(judge_scores(0.7, 0.7) == Closer::Tie);
}

TEST_CASE("oracle-backed FiSCo reproduces gold on triples") {
  const auto cases = triples(60);
  const baselines::FiscoScorer scorer(oracle(), {});
  const auto pred = predict_triples("fisco", scorer.as_scorer(), cases);
  CHECK(pred.predictions.size() == cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) CHECK(pred.predictions[i] == cases[i].gold);
  const auto rep = triple_agreement(pred, cases);
  CHECK(rep.agreement() == 1.0);
  CHECK(rep.ci.lower == 1.0);
  CHECK_FALSE(rep.paired.has_value());
}

TEST_CASE("agreement counts and paired comparison") {
  const auto cases = triples(10);
  TriplePredictions gold{"gold", {}}, flipped{"flipped", {}};
  for (const auto& c : cases) {
    gold.predictions.push_back(c.gold);
    flipped.predictions.push_back(c.gold == Closer::R2Closer ? Closer::R3Closer : Closer::R2Closer);
  }
  // Half right.
  TriplePredictions half{"half", flipped.predictions};
  for (std::size_t i = 0; i < 5; ++i) half.predictions[i] = gold.predictions[i];
  const auto rep = triple_agreement(half, cases, &gold, {0.9, 200, 7});
  CHECK(rep.n == 10);
  CHECK(rep.matches == 5);
  CHECK(rep.agreement() == 0.5);
  REQUIRE(rep.paired.has_value());
  CHECK(*rep.comparator == "gold");
  CHECK(rep.paired->mean_diff == doctest::Approx(-0.5));
  CHECK(rep.ci.lower <= 0.5);
  CHECK(rep.ci.upper >= 0.5);
  CHECK(rep.correct == std::vector<double>{1, 1, 1, 1, 1, 0, 0, 0, 0, 0});
  CHECK_THROWS_AS(triple_agreement(half, std::span<const synth::TripleCase>{}), Error);
}

TEST_CASE("group agreement with the oracle") {
  std::vector<synth::GroupCase> cases;
  for (std::uint64_t s = 0; s < 6; ++s) cases.push_back(synth::synth_group_case(banks()[0], 6, 0.5, s));
  cases.push_back(synth::synth_group_case(banks()[1], 6, 0.0, 99));
  const baselines::FiscoScorer scorer(oracle(), {});
  const auto rep = group_agreement("fisco", welch_decider(scorer.as_scorer()), cases);
  CHECK(rep.decisions.size() == 21);
  CHECK(rep.inter_total == 12);
  CHECK(rep.intra_total == 9);
  CHECK(rep.inter_acc() == 1.0);
  CHECK(rep.total_acc() ==
        doctest::Approx(static_cast<double>(rep.inter_correct + rep.intra_correct) / 21.0));
  for (const auto& d : rep.decisions) {
    if (d.case_id == cases.back().case_id) CHECK(d.truth == synth::PairingKind::Intra);
  }
}

TEST_CASE("decider receives the pairing's two sets") {
  const auto gc = synth::synth_group_case(banks()[0], 3, 0.5, 1);
  std::vector<std::string> seen;
  const GroupDecider spy = [&](const std::string& id, std::span<const ResponseText> a,
                               std::span<const ResponseText> b) {
    seen.push_back(id + ":" + a[0].response_id + "|" + b[0].response_id);
    return b[0].response_id.find("/s2/") != std::string::npos;
  };
  const std::vector<synth::GroupCase> cases = {gc};
  const auto rep = group_agreement("spy", spy, cases);
  REQUIRE(seen.size() == 3);
  CHECK(seen[0] == gc.case_id + "/0-1:" + gc.case_id + "/s0/0|" + gc.case_id + "/s1/0");
  CHECK(seen[2] == gc.case_id + "/1-2:" + gc.case_id + "/s1/0|" + gc.case_id + "/s2/0");
  CHECK(rep.total_acc() == 1.0);
}

TEST_CASE("bias rate table") {
  BiasRateTable t;
  for (int i = 0; i < 8; ++i) t.record("m1", "gender", i < 1);
  t.record("m1", "race", false);
  t.record_excluded("m1", "race");
  t.record("m0", "age", true);
  CHECK(t.cell("m1", "gender").rate() == 0.125);
  CHECK(t.cell("m1", "race").excluded == 1);
  CHECK(t.cell("zz", "gender").total == 0);
  CHECK(t.models() == std::vector<std::string>{"m0", "m1"});
  CHECK(t.axes() == std::vector<std::string>{"age", "gender", "race"});
  CHECK(t.to_csv() ==
        "model,axis,biased,total,excluded,rate\n"
        "m0,age,1,1,0,1.00\n"
        "m1,gender,1,8,0,0.12\n"
        "m1,race,0,1,1,0.00\n");
  const auto j = t.to_json();
  REQUIRE(j.size() == 3);
  CHECK(j[1]["rate"].get<double>() == 0.125);
  CHECK(j[1]["rate_display"] == "0.12");
  CHECK(j[1]["description"] == "13% of evaluated prompt cases were classified as biased");
}

TEST_CASE("rate rendering") {
  CHECK(format2(0.0) == "0.00");
  CHECK(format2(1.0 / 3.0) == "0.33");
  CHECK(format2(0.675) == "0.68");
  CHECK(describe_rate(0.0) == "0% of evaluated prompt cases were classified as biased");
  CHECK(describe_rate(1.0).starts_with("100% "));
  CHECK(describe_rate(0.125).starts_with("13% "));
}

TEST_CASE("benchmark over collected groups") {
  const auto same = synth::synth_group_case(banks()[0], 4, 0.0, 3, {0.5, 0.2, 0.0});
  const auto diff = synth::synth_group_case(banks()[0], 4, 0.5, 3, {0.5, 0.2, 0.0});
  CollectedGroups fair{"fair", "gender", "c1", as_responses(same.sets[0]), as_responses(same.sets[1]), false};
  CollectedGroups biased{"biased", "gender", "c1", as_responses(diff.sets[0]), as_responses(diff.sets[2]), false};
  CollectedGroups dropped{"biased", "race", "c2", {}, {}, true};
  const std::vector<CollectedGroups> cases = {fair, biased, dropped};
  const baselines::FiscoScorer scorer(oracle(), {});
  const auto res = benchmark_models(cases, scorer.as_scorer());
  CHECK(res.cases.size() == 2);
  CHECK(res.table.cell("fair", "gender").biased == 0);
  CHECK(res.table.cell("biased", "gender").biased == 1);
  CHECK(res.table.cell("biased", "race").total == 0);
  CHECK(res.table.cell("biased", "race").excluded == 1);
}
