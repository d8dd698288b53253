#include "fisco/evalharness.hpp"

#include <cmath>
#include <cstdio>
#include <set>

#include "fisco/errors.hpp"

namespace fisco::eval {

using json = nlohmann::json;

Closer judge_scores(double s2, double s3, double tie_epsilon) {
  if (std::fabs(s2 - s3) < tie_epsilon) return Closer::Tie;
  return s2 > s3 ? Closer::R2Closer : Closer::R3Closer;
}

Closer judge_triple(const baselines::PairScorer& scorer, const synth::TripleCase& c, double tie_epsilon) {
  const ResponseText r1 = c.reference.as_response();
  return judge_scores(scorer(r1, c.candidate2().as_response()), scorer(r1, c.candidate3().as_response()),
                      tie_epsilon);
}

TriplePredictions predict_triples(std::string method, const baselines::PairScorer& scorer,
                                  std::span<const synth::TripleCase> cases, double tie_epsilon) {
  TriplePredictions out{std::move(method), {}};
  out.predictions.reserve(cases.size());
  for (const auto& c : cases) out.predictions.push_back(judge_triple(scorer, c, tie_epsilon));
  return out;
}

namespace {

std::vector<double> correctness(const TriplePredictions& p, std::span<const synth::TripleCase> cases) {
  if (p.predictions.size() != cases.size()) {
    throw Error(ErrorCode::LengthMismatch, "method " + p.method + " has " + std::to_string(p.predictions.size()) +
                                               " predictions for " + std::to_string(cases.size()) + " cases");
  }
  std::vector<double> out(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) out[i] = p.predictions[i] == cases[i].gold ? 1.0 : 0.0;
  return out;
}

}  // namespace

AgreementReport triple_agreement(const TriplePredictions& method, std::span<const synth::TripleCase> cases,
                                 const TriplePredictions* comparator, const BootstrapOptions& boot) {
  if (cases.empty()) throw Error(ErrorCode::InvalidArgument, "triple agreement needs at least one case");
  AgreementReport r;
  r.method = method.method;
  r.n = cases.size();
  r.correct = correctness(method, cases);
  for (double c : r.correct) r.matches += c == 1.0 ? 1 : 0;
  r.ci = stats::bootstrap_ci(r.correct, boot.level, boot.resamples, boot.seed);
  if (comparator != nullptr && cases.size() >= 2) {
    r.comparator = comparator->method;
    r.paired = stats::paired_t_test(r.correct, correctness(*comparator, cases));
  }
  return r;
}

// ---------------------------------------------------------------------------

GroupDecider welch_decider(baselines::PairScorer scorer, double significance_level) {
  return [scorer = std::move(scorer), significance_level](const std::string& id, std::span<const ResponseText> a,
                                                          std::span<const ResponseText> b) {
    return baselines::group_metric_decision(id, scorer, a, b, significance_level).biased;
  };
}

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double GroupAgreementReport::inter_acc() const noexcept { return ratio(inter_correct, inter_total); }
double GroupAgreementReport::intra_acc() const noexcept { return ratio(intra_correct, intra_total); }
double GroupAgreementReport::total_acc() const noexcept {
  return ratio(inter_correct + intra_correct, inter_total + intra_total);
}

std::vector<ResponseText> as_responses(const std::vector<synth::SynthResponse>& set) {
  std::vector<ResponseText> out;
  out.reserve(set.size());
  for (const auto& r : set) out.push_back(r.as_response());
  return out;
}

GroupAgreementReport group_agreement(std::string method, const GroupDecider& decide,
                                     std::span<const synth::GroupCase> cases) {
  GroupAgreementReport report;
  report.method = std::move(method);
  for (const auto& c : cases) {
    std::array<std::vector<ResponseText>, 3> sets;
    for (std::size_t s = 0; s < 3; ++s) sets[s] = as_responses(c.sets[s]);
    for (const auto& p : synth::kPairings) {
      const std::string id = c.case_id + "/" + std::to_string(p.first) + "-" + std::to_string(p.second);
      const bool biased = decide(id, sets[p.first], sets[p.second]);
      PairingDecision d{c.case_id, p.first, p.second, synth::pairing_truth(c, p),
                        biased ? synth::PairingKind::Inter : synth::PairingKind::Intra};
      const bool ok = d.predicted == d.truth;
      if (d.truth == synth::PairingKind::Inter) {
        ++report.inter_total;
        report.inter_correct += ok ? 1 : 0;
      } else {
        ++report.intra_total;
        report.intra_correct += ok ? 1 : 0;
      }
      report.decisions.push_back(std::move(d));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------

void BiasRateTable::record(const std::string& model_id, const std::string& axis, bool biased) {
  auto& cell = cells_[model_id][axis];
  ++cell.total;
  cell.biased += biased ? 1 : 0;
}

void BiasRateTable::record_excluded(const std::string& model_id, const std::string& axis) {
  ++cells_[model_id][axis].excluded;
}

BiasCell BiasRateTable::cell(const std::string& model_id, const std::string& axis) const {
  const auto row = cells_.find(model_id);
  if (row == cells_.end()) return {};
  const auto it = row->second.find(axis);
  return it == row->second.end() ? BiasCell{} : it->second;
}

std::vector<std::string> BiasRateTable::models() const {
  std::vector<std::string> out;
  for (const auto& [m, _] : cells_) out.push_back(m);
  return out;
}

std::vector<std::string> BiasRateTable::axes() const {
  std::set<std::string> out;
  for (const auto& [_, row] : cells_) {
    for (const auto& [a, __] : row) out.insert(a);
  }
  return {out.begin(), out.end()};
}

std::string format2(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string BiasRateTable::to_csv() const {
  std::string out = "model,axis,biased,total,excluded,rate\n";
  for (const auto& [model, row] : cells_) {
    for (const auto& [axis, c] : row) {
      out += model + "," + axis + "," + std::to_string(c.biased) + "," + std::to_string(c.total) + "," +
             std::to_string(c.excluded) + "," + format2(c.rate()) + "\n";
    }
  }
  return out;
}

json BiasRateTable::to_json() const {
  json rows = json::array();
  for (const auto& [model, row] : cells_) {
    for (const auto& [axis, c] : row) {
      rows.push_back({{"model", model},
                      {"axis", axis},
                      {"biased", c.biased},
                      {"total", c.total},
                      {"excluded", c.excluded},
                      {"rate", c.rate()},
                      {"rate_display", format2(c.rate())},
                      {"description", describe_rate(c.rate())}});
    }
  }
  return rows;
}

std::string describe_rate(double rate) {
  const long pct = std::lround(rate * 100.0);
  return std::to_string(pct) + "% of evaluated prompt cases were classified as biased";
}

BenchmarkResult benchmark_models(std::span<const CollectedGroups> cases, const baselines::PairScorer& scorer,
                                 double significance_level) {
  BenchmarkResult out;
  for (const auto& c : cases) {
    if (c.underfilled) {
      out.table.record_excluded(c.model_id, c.axis);
      continue;
    }
    stats::CaseResult r =
        baselines::group_metric_decision(c.case_id, scorer, c.group1, c.group2, significance_level);
    out.table.record(c.model_id, c.axis, r.biased);
    out.cases.emplace_back(c, std::move(r));
  }
  return out;
}

}  // namespace fisco::eval
