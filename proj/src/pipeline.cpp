#include "fisco/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <mutex>
#include <set>
#include <tuple>

#include "fisco/baselines.hpp"
#include "fisco/collector.hpp"
#include "fisco/evalharness.hpp"
#include "fisco/hash.hpp"
#include "fisco/io.hpp"
#include "fisco/random.hpp"

namespace fisco::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* const kPrompts = "prompts.jsonl";
const char* const kResponses = "responses.jsonl";
const char* const kUnderfilled = "underfilled.jsonl";
const char* const kExclusions = "exclusions.jsonl";
const char* const kClaims = "claims.jsonl";
const char* const kVerdicts = "verdicts.jsonl";
const char* const kSimilarities = "similarities.jsonl";
const char* const kScoreExclusions = "score_exclusions.jsonl";
const char* const kResults = "results.jsonl";
const char* const kSummary = "summary.csv";
const char* const kReport = "report.json";
const char* const kSynthCases = "synth_cases.jsonl";
const char* const kSynthTriples = "synth_triples.jsonl";
const char* const kAgreement = "agreement.csv";
const char* const kGroupAgreement = "group_agreement.csv";
const char* const kEvaluation = "evaluation.json";
const char* const kFiscoMetric = "fisco";

fs::path out_path(const RunConfig& cfg, const char* name) { return fs::path(cfg.output_dir) / name; }

std::vector<json> read_stage_input(const RunConfig& cfg, const char* name, const char* producer) {
  const fs::path p = out_path(cfg, name);
  if (!fs::exists(p)) {
    throw Error(ErrorCode::IoError, p.string() + " not found; run '" + producer + "' first");
  }
  auto rows = io::read_jsonl(p);
  if (rows.empty()) throw Error(ErrorCode::IoError, p.string() + " is empty");
  return rows;
}

std::vector<json> read_optional(const RunConfig& cfg, const char* name) {
  const fs::path p = out_path(cfg, name);
  return fs::exists(p) ? io::read_jsonl(p) : std::vector<json>{};
}

std::uint64_t salt_of(const std::string& key) { return std::stoull(sha256_hex(key).substr(0, 16), nullptr, 16); }

std::string axis_of_case(const std::string& case_id) {
  const auto a = case_id.find('/');
  const auto b = a == std::string::npos ? a : case_id.find('/', a + 1);
  if (b == std::string::npos) throw Error(ErrorCode::IoError, "malformed case id " + case_id);
  return case_id.substr(a + 1, b - a - 1);
}

json number_or_text(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

/// Keeps first-appearance order of keys.
template <typename Key, typename Value>
struct OrderedGroups {
  std::vector<Key> order;
  std::map<Key, Value> items;

  Value& at(const Key& k) {
    auto [it, inserted] = items.try_emplace(k);
    if (inserted) order.push_back(k);
    return it->second;
  }
};

bool recoverable_checker_error(ErrorCode c) {
  return c == ErrorCode::BackendUnavailable || c == ErrorCode::EmptyDecomposition;
}

StageResult finish(const RunConfig& cfg, StageResult r) {
  write_manifest(cfg);
  return r;
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidTemplate:
    case ErrorCode::UnboundPlaceholder:
    case ErrorCode::PoolExhausted:
    case ErrorCode::InvalidArgument:
    case ErrorCode::IoError:
      return kExitConfig;
    case ErrorCode::BackendUnavailable:
    case ErrorCode::AuthError:
    case ErrorCode::RateLimited:
    case ErrorCode::MalformedReply:
      return kExitBackend;
    case ErrorCode::UnderfilledGroup:
    case ErrorCode::InsufficientPairs:
      return kExitUnderfilled;
    default:
      return kExitFailure;
  }
}

std::vector<promptgen::TemplateSpec> load_templates(const RunConfig& cfg) {
  std::vector<promptgen::TemplateSpec> all =
      cfg.templates_file ? promptgen::parse_templates_jsonl(io::read_file(*cfg.templates_file))
                         : promptgen::builtin_templates();
  if (cfg.templates.empty()) return all;
  std::vector<promptgen::TemplateSpec> picked;
  for (const auto& id : cfg.templates) {
    const auto it = std::find_if(all.begin(), all.end(), [&](const auto& t) { return t.template_id == id; });
    if (it == all.end()) throw Error(ErrorCode::ConfigError, "unknown template id " + id);
    picked.push_back(*it);
  }
  return picked;
}

std::vector<synth::ClaimBank> load_banks(const RunConfig& cfg) {
  if (cfg.claim_bank_file) return synth::parse_claim_banks(io::read_file(*cfg.claim_bank_file));
  return synth::builtin_claim_banks();
}

std::shared_ptr<const EntailmentChecker> make_run_checker(const RunConfig& cfg) {
  CheckerBackendConfig c;
  c.kind = cfg.checker.kind;
  c.retry = cfg.checker.retry;
  c.max_parallel = cfg.checker.max_parallel;
  c.lexical.entail_recall = cfg.checker.entail_recall;
  if (c.kind == BackendKind::Oracle) c.registry = synth::make_registry(load_banks(cfg));
  if (c.kind == BackendKind::RemoteModel) {
    c.endpoint.base_url = cfg.checker.base_url;
    c.endpoint.model_id = cfg.checker.model_id;
    if (const char* key = std::getenv(cfg.checker.api_key_env.c_str())) c.endpoint.api_key = key;
  }
  return make_checker(c);
}

void write_manifest(const RunConfig& cfg) {
  json files = json::object();
  for (const char* name : {kPrompts, kResponses, kUnderfilled, kExclusions, kClaims, kVerdicts, kSimilarities,
                           kScoreExclusions, kResults, kSummary, kReport, kSynthCases, kSynthTriples, kAgreement,
                           kGroupAgreement, kEvaluation}) {
    const fs::path p = out_path(cfg, name);
    if (fs::exists(p)) files[name] = sha256_hex(io::read_file(p));
  }
  const json manifest = {{"tool", "fisco"},
                         {"version", kToolVersion},
                         {"config_sha256", cfg.hash()},
                         {"seed", cfg.seed},
                         {"files", files}};
  io::write_file(out_path(cfg, "manifest.json"), manifest.dump(2) + "\n");
}

// ---------------------------------------------------------------------------
// generate

StageResult cmd_generate(const RunConfig& cfg) {
  cfg.validate();
  const auto templates = load_templates(cfg);
  std::vector<json> rows;
  std::size_t n_cases = 0;
  for (auto axis : cfg.axes) {
    for (const auto& t : templates) {
      if (!t.supports(axis)) continue;
      const std::string axis_name(promptgen::to_string(axis));
      const std::uint64_t seed = Rng::mix(cfg.seed, salt_of(t.template_id + "/" + axis_name));
      const auto [g1, g2] = promptgen::build_case(t, axis, cfg.k, seed, cfg.case_options);
      ++n_cases;
      for (const auto* g : {&g1, &g2}) {
        for (std::size_t i = 0; i < g->prompts.size(); ++i) {
          const auto& p = g->personas[i];
          json persona = {{"name", p.name},
                          {"gender", promptgen::to_string(p.gender)},
                          {"race", promptgen::to_string(p.race)}};
          if (p.age) persona["age"] = *p.age;
          if (p.state) persona["state"] = *p.state;
          if (p.occupation) persona["occupation"] = *p.occupation;
          rows.push_back({{"case_id", g->case_id},
                          {"axis", axis_name},
                          {"template_id", g->template_id},
                          {"group_label", g->group_label},
                          {"index", i},
                          {"prompt_text", g->prompts[i]},
                          {"prompt_hash", sha256_hex(g->prompts[i])},
                          {"persona", persona}});
        }
      }
    }
  }
  if (n_cases == 0) throw Error(ErrorCode::ConfigError, "no template supports the configured axes");
  io::write_jsonl(out_path(cfg, kPrompts), rows);
  StageResult r;
  r.written = {kPrompts};
  r.lines.push_back(std::to_string(rows.size()) + " prompts in " + std::to_string(n_cases) + " cases");
  return finish(cfg, r);
}

// ---------------------------------------------------------------------------
// collect

StageResult cmd_collect(const RunConfig& cfg, const CollectOverrides& overrides) {
  cfg.validate();
  const auto rows = read_stage_input(cfg, kPrompts, "generate");

  // case -> group label -> index -> prompt
  OrderedGroups<std::string, OrderedGroups<std::string, std::map<std::size_t, std::string>>> cases;
  std::map<std::string, std::pair<std::string, std::string>> case_meta;  // axis, template
  for (const auto& row : rows) {
    const auto case_id = row.at("case_id").get<std::string>();
    cases.at(case_id).at(row.at("group_label").get<std::string>())[row.at("index").get<std::size_t>()] =
        row.at("prompt_text").get<std::string>();
    case_meta[case_id] = {row.at("axis").get<std::string>(), row.at("template_id").get<std::string>()};
  }

  std::vector<collect::ModelEndpointConfig> models;
  if (overrides.model) {
    const auto it = std::find_if(cfg.models.begin(), cfg.models.end(),
                                 [&](const auto& m) { return m.model_id == *overrides.model; });
    collect::ModelEndpointConfig m;
    if (it != cfg.models.end()) {
      m = *it;
    } else if (overrides.base_url) {
      m.model_id = *overrides.model;
    } else {
      throw Error(ErrorCode::ConfigError, "model " + *overrides.model + " is not configured; pass --base-url");
    }
    models.push_back(m);
  } else {
    models = cfg.models;
  }
  if (models.empty()) throw Error(ErrorCode::ConfigError, "no model endpoints configured");
  for (auto& m : models) {
    if (overrides.base_url) m.base_url = *overrides.base_url;
    if (overrides.max_parallel) m.max_parallel = *overrides.max_parallel;
    m.validate();
  }
  const std::size_t k = overrides.k.value_or(cfg.k);
  if (k < 2) throw Error(ErrorCode::ConfigError, "k must be >= 2");

  const fs::path cache_path = cfg.cache_file ? fs::path(*cfg.cache_file) : out_path(cfg, "cache.jsonl");
  auto cache = std::make_shared<collect::ResponseCache>(cache_path);

  std::vector<json> responses, underfilled, exclusions;
  std::mutex exclusion_mutex;
  std::uint64_t calls = 0;
  for (const auto& m : models) {
    collect::CollectOptions options;
    options.max_requery = cfg.max_requery;
    options.on_excluded = [&, model_id = m.model_id](const collect::ExclusionEvent& e) {
      std::lock_guard lock(exclusion_mutex);
      exclusions.push_back({{"model_id", model_id},
                            {"case_id", e.case_id},
                            {"group_label", e.group_label},
                            {"index", e.index},
                            {"attempt", e.attempt},
                            {"prompt_hash", e.prompt_hash},
                            {"word_count", e.word_count},
                            {"reason", "under " + std::to_string(collect::kMinWords) + " words"},
                            {"text", e.text}});
    };
    collect::Collector collector(m, cache, options);
    for (const auto& case_id : cases.order) {
      auto& groups = cases.items.at(case_id);
      if (groups.order.size() != 2) {
        throw Error(ErrorCode::IoError, "case " + case_id + " does not have exactly two groups");
      }
      std::pair<promptgen::QuestionGroup, promptgen::QuestionGroup> qg;
      for (std::size_t gi = 0; gi < 2; ++gi) {
        auto& g = gi == 0 ? qg.first : qg.second;
        g.case_id = case_id;
        g.axis = promptgen::parse_axis(case_meta.at(case_id).first);
        g.template_id = case_meta.at(case_id).second;
        g.group_label = groups.order[gi];
        for (const auto& [index, prompt] : groups.items.at(g.group_label)) {
          if (g.prompts.size() == k) break;
          if (index != g.prompts.size()) throw Error(ErrorCode::IoError, "case " + case_id + " skips an index");
          g.prompts.push_back(prompt);
        }
        if (g.prompts.size() < k) {
          throw Error(ErrorCode::ConfigError, "case " + case_id + " has fewer than k=" + std::to_string(k) +
                                                  " prompts per group");
        }
      }
      try {
        const auto got = collector.collect_case(qg);
        for (const auto* group : {&got.group1, &got.group2}) {
          for (const auto& rec : *group) responses.push_back(collect::to_json(rec));
        }
      } catch (const Error& e) {
        if (e.code() != ErrorCode::UnderfilledGroup) throw;
        underfilled.push_back({{"model_id", m.model_id},
                               {"case_id", case_id},
                               {"axis", case_meta.at(case_id).first},
                               {"error", e.what()}});
      }
    }
    calls += collector.network_calls();
  }
  cache->compact();

  std::sort(exclusions.begin(), exclusions.end(), [](const json& a, const json& b) {
    return std::tie(a["model_id"], a["case_id"], a["group_label"], a["index"], a["attempt"]) <
           std::tie(b["model_id"], b["case_id"], b["group_label"], b["index"], b["attempt"]);
  });
  io::write_jsonl(out_path(cfg, kResponses), responses);
  io::write_jsonl(out_path(cfg, kUnderfilled), underfilled);
  io::write_jsonl(out_path(cfg, kExclusions), exclusions);

  StageResult r;
  r.written = {kResponses, kUnderfilled, kExclusions};
  r.lines.push_back(std::to_string(responses.size()) + " responses, " + std::to_string(calls) + " network calls, " +
                    std::to_string(underfilled.size()) + " underfilled cases");
  if (!underfilled.empty()) r.exit_code = kExitUnderfilled;
  return finish(cfg, r);
}

// ---------------------------------------------------------------------------
// score

StageResult cmd_score(const RunConfig& cfg) {
  cfg.validate();
  const auto rows = read_stage_input(cfg, kResponses, "collect");

  struct CaseData {
    std::string model_id;
    std::string case_id;
    OrderedGroups<std::string, std::vector<ResponseText>> groups;
  };
  OrderedGroups<std::pair<std::string, std::string>, CaseData> cases;
  std::vector<ResponseText> all;
  for (const auto& row : rows) {
    const auto rec = collect::record_from_json(row);
    auto& c = cases.at({rec.model_id, rec.case_id});
    c.model_id = rec.model_id;
    c.case_id = rec.case_id;
    c.groups.at(rec.group_label).push_back({rec.response_id, rec.text});
    all.push_back({rec.response_id, rec.text});
  }

  const auto checker = make_run_checker(cfg);
  const int workers = cfg.checker.max_parallel;

  // Claims, once per response.
  std::vector<std::optional<ClaimSet>> claim_sets(all.size());
  std::vector<std::string> claim_errors(all.size());
  collect::parallel_for(all.size(), workers, [&](std::size_t i) {
    try {
      claim_sets[i] = extract_claims(all[i], *checker);
    } catch (const Error& e) {
      if (!recoverable_checker_error(e.code())) throw;
      claim_errors[i] = e.what();
    }
  });
  std::map<std::string, std::size_t> index_of;
  std::vector<json> claim_rows;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (!index_of.emplace(all[i].response_id, i).second) {
      throw Error(ErrorCode::IoError, "duplicate response id " + all[i].response_id);
    }
    if (!claim_sets[i]) continue;
    for (const auto& c : claim_sets[i]->claims) {
      claim_rows.push_back(
          {{"claim_id", c.claim_id}, {"response_id", c.source_response_id}, {"ordinal", c.ordinal}, {"text", c.text}});
    }
  }

  struct PairJob {
    std::string model_id, case_id, axis, kind;
    std::size_t a = 0, b = 0;
  };
  std::vector<PairJob> jobs;
  for (const auto& key : cases.order) {
    auto& c = cases.items.at(key);
    if (c.groups.order.size() != 2) {
      throw Error(ErrorCode::IoError, "case " + c.case_id + " for " + c.model_id + " needs exactly two groups");
    }
    std::vector<std::string> ids1, ids2;
    for (const auto& r : c.groups.items.at(c.groups.order[0])) ids1.push_back(r.response_id);
    for (const auto& r : c.groups.items.at(c.groups.order[1])) ids2.push_back(r.response_id);
    const auto pairs = stats::enumerate_pairs(ids1, ids2);
    const std::string axis = axis_of_case(c.case_id);
    for (const auto& [a, b] : pairs.inter) jobs.push_back({c.model_id, c.case_id, axis, "inter", index_of[a], index_of[b]});
    for (const auto& [a, b] : pairs.intra) jobs.push_back({c.model_id, c.case_id, axis, "intra", index_of[a], index_of[b]});
  }

  struct PairOutcome {
    std::vector<ClaimVerdict> verdicts;
    LabelCounts counts;
    double score = 0.0;
    std::string error;
  };
  std::vector<PairOutcome> outcomes(jobs.size());
  collect::parallel_for(jobs.size(), workers, [&](std::size_t j) {
    const auto& job = jobs[j];
    auto& out = outcomes[j];
    const auto& ca = claim_sets[job.a];
    const auto& cb = claim_sets[job.b];
    if (!ca || !cb) {
      out.error = !ca ? claim_errors[job.a] : claim_errors[job.b];
      return;
    }
    try {
      out.verdicts = check_pair(*ca, all[job.a], *cb, all[job.b], *checker);
      out.counts = count_labels(out.verdicts);
      out.score = score_similarity(out.counts, cfg.weights);
    } catch (const Error& e) {
      if (!recoverable_checker_error(e.code())) throw;
      out.verdicts.clear();
      out.error = e.what();
    }
  });

  std::vector<baselines::Metric> metrics;
  for (const auto& name : cfg.baselines) metrics.push_back(baselines::parse_metric(name));

  std::vector<json> verdict_rows, sim_rows, exclusion_rows;
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& job = jobs[j];
    const auto& out = outcomes[j];
    const json base = {{"case_id", job.case_id},
                       {"model_id", job.model_id},
                       {"axis", job.axis},
                       {"metric", kFiscoMetric},
                       {"response_id_a", all[job.a].response_id},
                       {"response_id_b", all[job.b].response_id},
                       {"pair_kind", job.kind}};
    if (!out.error.empty()) {
      json e = base;
      e["error"] = out.error;
      exclusion_rows.push_back(e);
    } else {
      for (const auto& v : out.verdicts) {
        verdict_rows.push_back({{"claim_id", v.claim_id},
                                {"source_response_id", v.source_response_id},
                                {"premise_response_id", v.premise_response_id},
                                {"label", to_string(v.label)}});
      }
      json s = base;
      s["score"] = io::round6(out.score);
      s["c_e"] = out.counts.c_e;
      s["c_n"] = out.counts.c_n;
      s["c_c"] = out.counts.c_c;
      sim_rows.push_back(s);
    }
  }
  for (auto metric : metrics) {
    const auto scorer = baselines::metric_scorer(metric);
    std::vector<double> values(jobs.size());
    std::vector<std::string> errors(jobs.size());
    collect::parallel_for(jobs.size(), workers, [&](std::size_t j) {
      try {
        values[j] = scorer(all[jobs[j].a], all[jobs[j].b]);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::EmptySequence && e.code() != ErrorCode::BackendUnavailable) throw;
        errors[j] = e.what();
      }
    });
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      const auto& job = jobs[j];
      json row = {{"case_id", job.case_id},
                  {"model_id", job.model_id},
                  {"axis", job.axis},
                  {"metric", baselines::to_string(metric)},
                  {"response_id_a", all[job.a].response_id},
                  {"response_id_b", all[job.b].response_id},
                  {"pair_kind", job.kind}};
      if (errors[j].empty()) {
        row["score"] = io::round6(values[j]);
        sim_rows.push_back(row);
      } else {
        row["error"] = errors[j];
        exclusion_rows.push_back(row);
      }
    }
  }

  io::write_jsonl(out_path(cfg, kClaims), claim_rows);
  io::write_jsonl(out_path(cfg, kVerdicts), verdict_rows);
  io::write_jsonl(out_path(cfg, kSimilarities), sim_rows);
  io::write_jsonl(out_path(cfg, kScoreExclusions), exclusion_rows);

  StageResult r;
  r.written = {kClaims, kVerdicts, kSimilarities, kScoreExclusions};
  r.lines.push_back(std::to_string(sim_rows.size()) + " similarity scores over " +
                    std::to_string(cases.order.size()) + " cases, " + std::to_string(exclusion_rows.size()) +
                    " pairs excluded");
  return finish(cfg, r);
}

// ---------------------------------------------------------------------------
// test

namespace {

eval::BiasRateTable table_from_results(const std::vector<json>& results, const std::vector<json>& underfilled,
                                       const std::string& metric) {
  eval::BiasRateTable table;
  for (const auto& row : results) {
    if (row.at("metric").get<std::string>() != metric) continue;
    const auto model = row.at("model_id").get<std::string>();
    const auto axis = row.at("axis").get<std::string>();
    if (row.value("status", "decided") == "decided") {
      table.record(model, axis, row.at("biased").get<bool>());
    } else {
      table.record_excluded(model, axis);
    }
  }
  for (const auto& row : underfilled) {
    table.record_excluded(row.at("model_id").get<std::string>(), row.at("axis").get<std::string>());
  }
  return table;
}

std::vector<std::string> metrics_in(const std::vector<json>& results) {
  std::vector<std::string> out;
  for (const auto& row : results) {
    const auto m = row.at("metric").get<std::string>();
    if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
  }
  return out;
}

}  // namespace

StageResult cmd_test(const RunConfig& cfg) {
  cfg.validate();
  const auto sims = read_stage_input(cfg, kSimilarities, "score");
  const auto excluded = read_optional(cfg, kScoreExclusions);
  const auto underfilled = read_optional(cfg, kUnderfilled);

  using Key = std::tuple<std::string, std::string, std::string>;  // model, case, metric
  struct Scores {
    std::string axis;
    std::vector<double> inter, intra;
    std::size_t excluded = 0;
  };
  OrderedGroups<Key, Scores> groups;
  for (const auto& row : sims) {
    auto& s = groups.at({row.at("model_id").get<std::string>(), row.at("case_id").get<std::string>(),
                         row.at("metric").get<std::string>()});
    s.axis = row.at("axis").get<std::string>();
    (row.at("pair_kind").get<std::string>() == "inter" ? s.inter : s.intra).push_back(row.at("score").get<double>());
  }
  for (const auto& row : excluded) {
    auto& s = groups.at({row.at("model_id").get<std::string>(), row.at("case_id").get<std::string>(),
                         row.at("metric").get<std::string>()});
    s.axis = row.at("axis").get<std::string>();
    ++s.excluded;
  }

  std::vector<json> results;
  for (const auto& key : groups.order) {
    const auto& [model, case_id, metric] = key;
    const auto& s = groups.items.at(key);
    json row = {{"model_id", model}, {"axis", s.axis}, {"case_id", case_id}, {"metric", metric}};
    try {
      const auto c = stats::fisco_case(case_id, s.inter, s.intra, cfg.significance_level, s.excluded);
      row["status"] = "decided";
      row["mean_inter"] = c.mean_inter;
      row["mean_intra"] = c.mean_intra;
      row["var_inter"] = c.var_inter;
      row["var_intra"] = c.var_intra;
      row["n1"] = c.n1;
      row["n2"] = c.n2;
      row["t"] = number_or_text(c.welch.t);
      row["df"] = number_or_text(c.welch.df);
      row["p_value"] = c.welch.p_two_sided;
      row["biased"] = c.biased;
      row["excluded_pairs"] = c.excluded_pairs;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::InsufficientPairs) throw;
      row["status"] = "insufficient_pairs";
      row["excluded_pairs"] = s.excluded;
      row["error"] = e.what();
    }
    results.push_back(row);
  }
  io::write_jsonl(out_path(cfg, kResults), results);

  StageResult r;
  r.written = {kResults};
  for (const auto& metric : metrics_in(results)) {
    const auto table = table_from_results(results, underfilled, metric);
    const std::string name = metric == kFiscoMetric ? kSummary : "summary_" + metric + ".csv";
    io::write_file(out_path(cfg, name.c_str()), table.to_csv());
    r.written.push_back(name);
  }
  std::size_t biased = 0, decided = 0;
  for (const auto& row : results) {
    if (row.at("metric") != kFiscoMetric || row.at("status") != "decided") continue;
    ++decided;
    biased += row.at("biased").get<bool>() ? 1 : 0;
  }
  r.lines.push_back(std::to_string(biased) + " of " + std::to_string(decided) + " cases flagged as biased");
  return finish(cfg, r);
}

// ---------------------------------------------------------------------------
// report

StageResult cmd_report(const RunConfig& cfg) {
  cfg.validate();
  const auto results = read_stage_input(cfg, kResults, "test");
  const auto underfilled = read_optional(cfg, kUnderfilled);

  StageResult r;
  json tables = json::object();
  for (const auto& metric : metrics_in(results)) {
    const auto table = table_from_results(results, underfilled, metric);
    tables[metric] = table.to_json();
    if (metric != kFiscoMetric) continue;
    for (const auto& [model, row] : table.cells()) {
      for (const auto& [axis, cell] : row) {
        r.lines.push_back(model + " / " + axis + ": " + eval::describe_rate(cell.rate()) + " (" +
                          std::to_string(cell.biased) + " of " + std::to_string(cell.total) + ")");
      }
    }
  }
  std::vector<json> cases;
  for (const auto& row : results) {
    if (row.at("metric") != kFiscoMetric) continue;
    json c = {{"model_id", row.at("model_id")}, {"axis", row.at("axis")}, {"case_id", row.at("case_id")},
              {"status", row.at("status")}};
    if (row.at("status") == "decided") {
      c["biased"] = row.at("biased");
      c["p_value"] = row.at("p_value");
      c["p_value_display"] = eval::format2(row.at("p_value").get<double>());
      c["t"] = row.at("t");
      c["mean_inter"] = row.at("mean_inter");
      c["mean_intra"] = row.at("mean_intra");
    }
    cases.push_back(c);
  }
  const json report = {{"tool", "fisco"},
                       {"version", kToolVersion},
                       {"config_sha256", cfg.hash()},
                       {"seed", cfg.seed},
                       {"significance_level", cfg.significance_level},
                       {"weights", {{"alpha", cfg.weights.alpha}, {"beta", cfg.weights.beta}, {"gamma", cfg.weights.gamma}}},
                       {"bias_rates", tables},
                       {"underfilled_cases", underfilled.size()},
                       {"cases", cases},
                       {"summary", r.lines}};
  io::write_file(out_path(cfg, kReport), report.dump(2) + "\n");
  r.written = {kReport};
  return finish(cfg, r);
}

// ---------------------------------------------------------------------------
// synth

StageResult cmd_synth(const RunConfig& cfg) {
  cfg.validate();
  const auto all_banks = load_banks(cfg);
  std::vector<synth::ClaimBank> banks;
  if (cfg.synth.banks.empty()) {
    banks = all_banks;
  } else {
    for (const auto& id : cfg.synth.banks) banks.push_back(synth::find_bank(all_banks, id));
  }

  std::vector<json> case_rows;
  for (std::size_t di = 0; di < cfg.synth.deltas.size(); ++di) {
    const double delta = cfg.synth.deltas[di];
    const std::uint64_t delta_seed = Rng::mix(cfg.seed, salt_of("group/" + std::to_string(di)));
    for (std::size_t i = 0; i < cfg.synth.n_group_cases; ++i) {
      char id[64];
      std::snprintf(id, sizeof id, "group/d%.2f/%04zu", delta, i);
      const auto gc = synth::synth_group_case(banks[i % banks.size()], cfg.synth.k, delta, Rng::mix(delta_seed, i),
                                              {}, id);
      case_rows.push_back(synth::to_json(gc));
    }
  }
  std::vector<json> triple_rows;
  const std::uint64_t triple_seed = Rng::mix(cfg.seed, salt_of("triple"));
  synth::TripleOptions options;
  options.weights = cfg.weights;
  for (std::size_t i = 0; i < cfg.synth.n_triples; ++i) {
    char id[32];
    std::snprintf(id, sizeof id, "triple/%04zu", i);
    triple_rows.push_back(
        synth::to_json(synth::synth_triple(banks[i % banks.size()], Rng::mix(triple_seed, i), options, id)));
  }
  io::write_jsonl(out_path(cfg, kSynthCases), case_rows);
  io::write_jsonl(out_path(cfg, kSynthTriples), triple_rows);

  StageResult r;
  r.written = {kSynthCases, kSynthTriples};
  r.lines.push_back(std::to_string(case_rows.size()) + " group cases, " + std::to_string(triple_rows.size()) +
                    " triples");
  return finish(cfg, r);
}

// ---------------------------------------------------------------------------
// evaluate

StageResult cmd_evaluate(const RunConfig& cfg) {
  cfg.validate();
  std::vector<synth::TripleCase> triples;
  for (const auto& row : read_optional(cfg, kSynthTriples)) triples.push_back(synth::triple_from_json(row));
  std::vector<synth::GroupCase> groups;
  for (const auto& row : read_optional(cfg, kSynthCases)) groups.push_back(synth::group_case_from_json(row));
  if (triples.empty() && groups.empty()) {
    throw Error(ErrorCode::IoError, "no synthetic data in " + cfg.output_dir + "; run 'synth' first");
  }

  const auto checker = make_run_checker(cfg);
  const baselines::FiscoScorer fisco(checker, cfg.weights);
  std::vector<std::pair<std::string, baselines::PairScorer>> methods = {{kFiscoMetric, fisco.as_scorer()}};
  for (const auto& name : cfg.synth.baselines) {
    methods.emplace_back(name, baselines::metric_scorer(baselines::parse_metric(name)));
  }

  StageResult r;
  json evaluation = {{"tool", "fisco"}, {"version", kToolVersion}, {"config_sha256", cfg.hash()}, {"seed", cfg.seed}};

  // Triples.
  if (!triples.empty()) {
    std::vector<eval::TriplePredictions> preds;
    for (const auto& [name, scorer] : methods) preds.push_back(eval::predict_triples(name, scorer, triples));
    const eval::BootstrapOptions boot{0.95, cfg.synth.bootstrap_resamples, cfg.seed};
    std::string csv = "method,n,matches,agreement,ci_lower,ci_upper,comparator,paired_mean_diff,paired_p\n";
    json rows = json::array();
    for (std::size_t m = 0; m < preds.size(); ++m) {
      const auto rep = eval::triple_agreement(preds[m], triples, m == 0 ? nullptr : &preds[0], boot);
      csv += rep.method + "," + std::to_string(rep.n) + "," + std::to_string(rep.matches) + "," +
             eval::format2(rep.agreement()) + "," + eval::format2(rep.ci.lower) + "," + eval::format2(rep.ci.upper) +
             "," + rep.comparator.value_or("") + "," +
             (rep.paired ? eval::format2(rep.paired->mean_diff) : std::string()) + "," +
             (rep.paired ? eval::format2(rep.paired->p_two_sided) : std::string()) + "\n";
      json row = {{"method", rep.method}, {"n", rep.n},           {"matches", rep.matches},
                  {"agreement", rep.agreement()}, {"ci_lower", rep.ci.lower}, {"ci_upper", rep.ci.upper}};
      if (rep.paired) {
        row["comparator"] = *rep.comparator;
        row["paired_mean_diff"] = rep.paired->mean_diff;
        row["paired_t"] = number_or_text(rep.paired->t);
        row["paired_p"] = rep.paired->p_two_sided;
      }
      rows.push_back(row);
      r.lines.push_back("triples " + rep.method + ": agreement " + eval::format2(rep.agreement()) + " [" +
                        eval::format2(rep.ci.lower) + ", " + eval::format2(rep.ci.upper) + "]");
    }
    io::write_file(out_path(cfg, kAgreement), csv);
    r.written.push_back(kAgreement);
    evaluation["triples"] = rows;
  }

  // Group cases, per delta.
  std::vector<double> deltas;
  for (const auto& g : groups) {
    if (std::find(deltas.begin(), deltas.end(), g.delta) == deltas.end()) deltas.push_back(g.delta);
  }
  if (!groups.empty()) {
    std::string csv = "delta,method,inter_total,inter_correct,inter_acc,intra_total,intra_correct,intra_acc,total_acc\n";
    json rows = json::array();
    for (double delta : deltas) {
      std::vector<synth::GroupCase> subset;
      for (const auto& g : groups) {
        if (g.delta == delta) subset.push_back(g);
      }
      for (const auto& [name, scorer] : methods) {
        const auto rep =
            eval::group_agreement(name, eval::welch_decider(scorer, cfg.significance_level), subset);
        csv += eval::format2(delta) + "," + name + "," + std::to_string(rep.inter_total) + "," +
               std::to_string(rep.inter_correct) + "," + eval::format2(rep.inter_acc()) + "," +
               std::to_string(rep.intra_total) + "," + std::to_string(rep.intra_correct) + "," +
               eval::format2(rep.intra_acc()) + "," + eval::format2(rep.total_acc()) + "\n";
        rows.push_back({{"delta", delta},
                        {"method", name},
                        {"inter_total", rep.inter_total},
                        {"inter_correct", rep.inter_correct},
                        {"inter_acc", rep.inter_acc()},
                        {"intra_total", rep.intra_total},
                        {"intra_correct", rep.intra_correct},
                        {"intra_acc", rep.intra_acc()},
                        {"total_acc", rep.total_acc()}});
        r.lines.push_back("groups delta=" + eval::format2(delta) + " " + name + ": inter " +
                          eval::format2(rep.inter_acc()) + ", intra " + eval::format2(rep.intra_acc()) + ", total " +
                          eval::format2(rep.total_acc()));
      }
    }
    io::write_file(out_path(cfg, kGroupAgreement), csv);
    r.written.push_back(kGroupAgreement);
    evaluation["groups"] = rows;
  }

  // Sensitivity to the neutral weight.
  json betas = json::array();
  std::vector<bool> first_decisions;
  for (double beta : cfg.synth.betas) {
    WeightConfig w = cfg.weights;
    w.beta = beta;
    w.gamma = std::min(w.gamma, beta);
    double abs_err = 0.0;
    std::size_t n_pairs = 0;
    for (const auto& t : triples) {
      const ResponseText r1 = t.reference.as_response();
      for (const auto* pair : {&t.pair2, &t.pair3}) {
        abs_err += std::fabs(fisco.score(r1, pair->modified.as_response(), w).value - pair->true_similarity(w));
        ++n_pairs;
      }
    }
    std::vector<bool> decisions;
    const auto decide = eval::welch_decider(fisco.as_scorer(w), cfg.significance_level);
    for (const auto& g : groups) {
      std::array<std::vector<ResponseText>, 3> sets;
      for (std::size_t s = 0; s < 3; ++s) sets[s] = eval::as_responses(g.sets[s]);
      for (const auto& p : synth::kPairings) decisions.push_back(decide(g.case_id, sets[p.first], sets[p.second]));
    }
    if (first_decisions.empty()) first_decisions = decisions;
    const double mae = n_pairs == 0 ? 0.0 : abs_err / static_cast<double>(n_pairs);
    betas.push_back({{"beta", beta},
                     {"gamma", w.gamma},
                     {"mean_abs_error", mae},
                     {"pairs", n_pairs},
                     {"decisions_match_first_beta", decisions == first_decisions}});
    r.lines.push_back("beta=" + eval::format2(beta) + ": mean |computed - true| " + eval::format2(mae) +
                      (decisions == first_decisions ? ", decisions unchanged" : ", decisions changed"));
  }
  evaluation["beta_stability"] = betas;
  io::write_file(out_path(cfg, kEvaluation), evaluation.dump(2) + "\n");
  r.written.push_back(kEvaluation);
  return finish(cfg, r);
}

}  // namespace fisco::pipeline
