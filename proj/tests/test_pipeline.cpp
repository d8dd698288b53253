#include <doctest.h>

#include <fstream>

#include "fisco/hash.hpp"
#include "fisco/io.hpp"
#include "fisco/mock_model.hpp"
#include "fisco/pipeline.hpp"
#include "support.hpp"

using namespace fisco;
using namespace fisco::pipeline;
using nlohmann::json;
using testing_support::EnvGuard;
using testing_support::TempDir;

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

collect::ModelEndpointConfig model(const mock::MockModelServer& server, const std::string& id) {
  collect::ModelEndpointConfig m;
  m.base_url = server.base_url();
  m.model_id = id;
  m.retry.max_attempts = 1;
  return m;
}

RunConfig small_run(const mock::MockModelServer& server, const TempDir& dir) {
  RunConfig cfg;
  cfg.k = 4;
  cfg.templates = {"advice-home"};
  cfg.models = {model(server, "fair-1"), model(server, "biased-1")};
  cfg.baselines = {"rouge_l"};
  cfg.seed = 11;
  cfg.output_dir = dir.str();
  return cfg;
}

}  // namespace

TEST_CASE("exit code mapping") {
  CHECK(exit_code_for(ErrorCode::ConfigError) == kExitConfig);
  CHECK(exit_code_for(ErrorCode::InvalidTemplate) == kExitConfig);
  CHECK(exit_code_for(ErrorCode::UnboundPlaceholder) == kExitConfig);
  CHECK(exit_code_for(ErrorCode::PoolExhausted) == kExitConfig);
  CHECK(exit_code_for(ErrorCode::IoError) == kExitConfig);
  CHECK(exit_code_for(ErrorCode::BackendUnavailable) == kExitBackend);
  CHECK(exit_code_for(ErrorCode::AuthError) == kExitBackend);
  CHECK(exit_code_for(ErrorCode::RateLimited) == kExitBackend);
  CHECK(exit_code_for(ErrorCode::MalformedReply) == kExitBackend);
  CHECK(exit_code_for(ErrorCode::UnderfilledGroup) == kExitUnderfilled);
  CHECK(exit_code_for(ErrorCode::InsufficientPairs) == kExitUnderfilled);
  CHECK(exit_code_for(ErrorCode::EmptySequence) == kExitFailure);
}

TEST_CASE("config defaults, strict parsing and round-trip") {
  RunConfig d;
  CHECK_NOTHROW(d.validate());
  CHECK(d.k == 10);
  CHECK(d.weights.alpha == 1.0);
  CHECK(d.significance_level == 0.05);

  const json j = {{"k", 6},
                  {"seed", 3},
                  {"axes", {"gender"}},
                  {"weights", {{"alpha", 1.0}, {"beta", 0.2}, {"gamma", 0.0}}},
                  {"models", {{{"model_id", "m"}, {"base_url", "http://127.0.0.1:9/v1"}}}},
                  {"synth", {{"n_triples", 5}}}};
  const auto c = RunConfig::from_json(j);
  CHECK(c.k == 6);
  CHECK(c.axes == std::vector<promptgen::Axis>{promptgen::Axis::Gender});
  CHECK(c.weights.beta == 0.2);
  CHECK(c.models.at(0).max_parallel == 4);
  CHECK(c.synth.n_triples == 5);
  CHECK(RunConfig::from_json(c.to_json()).to_json() == c.to_json());

  CHECK(code_of([] { (void)RunConfig::from_json({{"kk", 1}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { (void)RunConfig::from_json({{"synth", {{"nope", 1}}}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { (void)RunConfig::from_json({{"axes", {"height"}}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { (void)RunConfig::from_json({{"k", "ten"}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { (void)RunConfig::from_json({{"k", 1}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] {
          (void)RunConfig::from_json({{"weights", {{"alpha", 0.5}, {"beta", 0.7}, {"gamma", 0.0}}}});
        }) == ErrorCode::ConfigError);
  CHECK(code_of([] { (void)RunConfig::from_json({{"significance_level", 1.5}}); }) == ErrorCode::ConfigError);
  CHECK(code_of([] { (void)RunConfig::load("/nonexistent/fisco.json"); }) == ErrorCode::ConfigError);
}

TEST_CASE("config hash ignores output locations") {
  RunConfig a, b;
  b.output_dir = "elsewhere";
  b.cache_file = "/tmp/c.jsonl";
  CHECK(a.hash() == b.hash());
  b.seed = 1;
  CHECK(a.hash() != b.hash());
  CHECK(a.hash().size() == 64);
}

TEST_CASE("generate writes prompts") {
  TempDir dir("gen");
  RunConfig cfg;
  cfg.k = 3;
  cfg.templates = {"advice-home", "insight-02"};
  cfg.output_dir = dir.str();
  const auto r = cmd_generate(cfg);
  CHECK(r.exit_code == kExitOk);
  const auto rows = io::read_jsonl(dir.path() / "prompts.jsonl");
  // 2 templates x 3 axes x 2 groups x k
  CHECK(rows.size() == 36);
  CHECK(rows[0].at("case_id") == "advice-home/gender/female-male");
  CHECK(rows[0].at("prompt_hash") == sha256_hex(rows[0].at("prompt_text").get<std::string>()));
  CHECK(rows[0].at("persona").contains("name"));
  CHECK(std::filesystem::exists(dir.path() / "manifest.json"));

  TempDir again("gen2");
  cfg.output_dir = again.str();
  (void)cmd_generate(cfg);
  CHECK(io::read_file(dir.path() / "prompts.jsonl") == io::read_file(again.path() / "prompts.jsonl"));
}

TEST_CASE("generate rejects unknown templates") {
  TempDir dir("gen-bad");
  RunConfig cfg;
  cfg.templates = {"no-such-template"};
  cfg.output_dir = dir.str();
  CHECK(exit_code_for(ErrorCode::ConfigError) == kExitConfig);
  CHECK_THROWS_AS(cmd_generate(cfg), Error);
}

TEST_CASE("later stages need earlier outputs") {
  TempDir dir("missing");
  RunConfig cfg;
  cfg.output_dir = dir.str();
  CHECK_THROWS_AS(cmd_collect(cfg), Error);
  CHECK_THROWS_AS(cmd_score(cfg), Error);
  CHECK_THROWS_AS(cmd_test(cfg), Error);
  CHECK_THROWS_AS(cmd_report(cfg), Error);
}

TEST_CASE("end-to-end against the mock server") {
  EnvGuard key(collect::kApiKeyEnv, "test-key");
  EnvGuard epoch("SOURCE_DATE_EPOCH", "1700000000");
  mock::MockModelServer server;
  TempDir dir("e2e");
  const RunConfig cfg = small_run(server, dir);

  CHECK(cmd_generate(cfg).exit_code == kExitOk);
  const auto col = cmd_collect(cfg);
  CHECK(col.exit_code == kExitOk);
  CHECK(io::read_jsonl(dir.path() / "responses.jsonl").size() == 2 * 3 * 2 * 4);
  CHECK(cmd_score(cfg).exit_code == kExitOk);
  CHECK(cmd_test(cfg).exit_code == kExitOk);
  CHECK(cmd_report(cfg).exit_code == kExitOk);

  const auto sims = io::read_jsonl(dir.path() / "similarities.jsonl");
  std::size_t fisco_rows = 0;
  for (const auto& s : sims) {
    if (s.at("metric") != "fisco") continue;
    ++fisco_rows;
    CHECK(s.at("c_e").get<std::size_t>() + s.at("c_n").get<std::size_t>() + s.at("c_c").get<std::size_t>() > 0);
  }
  // per case: 16 inter + 12 intra pairs
  CHECK(fisco_rows == 2 * 3 * 28);

  const auto report = json::parse(io::read_file(dir.path() / "report.json"));
  std::map<std::string, std::size_t> flagged;
  for (const auto& row : report.at("bias_rates").at("fisco")) {
    flagged[row.at("model").get<std::string>() + "/" + row.at("axis").get<std::string>()] =
        row.at("biased").get<std::size_t>();
    CHECK(row.at("total") == 1);
  }
  CHECK(flagged.at("biased-1/gender") == 1);
  CHECK(flagged.at("biased-1/race") == 0);
  CHECK(flagged.at("biased-1/age") == 0);
  CHECK(flagged.at("fair-1/gender") == 0);
  CHECK(flagged.at("fair-1/race") == 0);
  CHECK(flagged.at("fair-1/age") == 0);
  CHECK(report.at("bias_rates").contains("rouge_l"));
  CHECK(report.at("config_sha256") == cfg.hash());

  const auto manifest = json::parse(io::read_file(dir.path() / "manifest.json"));
  CHECK(manifest.at("files").contains("report.json"));
  CHECK(manifest.at("files").at("report.json") == sha256_hex(io::read_file(dir.path() / "report.json")));

  // A second collect is served from the cache.
  const auto requests = server.requests();
  CHECK(cmd_collect(cfg).exit_code == kExitOk);
  CHECK(server.requests() == requests);
}

TEST_CASE("collect overrides and underfilled cases") {
  EnvGuard key(collect::kApiKeyEnv, "test-key");
  mock::MockModelServer server;
  TempDir dir("underfill");
  RunConfig cfg = small_run(server, dir);
  cfg.axes = {promptgen::Axis::Gender};
  cfg.models = {model(server, "short-1")};
  cfg.max_requery = 2;
  (void)cmd_generate(cfg);
  const auto r = cmd_collect(cfg);
  CHECK(r.exit_code == kExitUnderfilled);
  const auto under = io::read_jsonl(dir.path() / "underfilled.jsonl");
  REQUIRE(under.size() == 1);
  CHECK(under[0].at("model_id") == "short-1");
  CHECK(!io::read_jsonl(dir.path() / "exclusions.jsonl").empty());

  CollectOverrides o;
  o.model = "fair-2";
  o.base_url = server.base_url();
  o.k = 2;
  CHECK(cmd_collect(cfg, o).exit_code == kExitOk);
  const auto rows = io::read_jsonl(dir.path() / "responses.jsonl");
  REQUIRE(rows.size() == 4);
  CHECK(rows[0].at("model_id") == "fair-2");
}

TEST_CASE("missing credential is a backend failure") {
  EnvGuard key(collect::kApiKeyEnv, std::nullopt);
  mock::MockModelServer server;
  TempDir dir("nokey");
  const RunConfig cfg = small_run(server, dir);
  (void)cmd_generate(cfg);
  CHECK(code_of([&] { (void)cmd_collect(cfg); }) == ErrorCode::AuthError);
}

TEST_CASE("synth and evaluate on a small corpus") {
  TempDir dir("synth");
  RunConfig cfg;
  cfg.output_dir = dir.str();
  cfg.seed = 4;
  cfg.synth.n_group_cases = 6;
  cfg.synth.n_triples = 12;
  cfg.synth.k = 4;
  cfg.synth.baselines = {"rouge_l"};
  cfg.synth.bootstrap_resamples = 50;
  CHECK(cmd_synth(cfg).exit_code == kExitOk);
  const auto cases = io::read_jsonl(dir.path() / "synth_cases.jsonl");
  CHECK(cases.size() == 12);
  CHECK(cases[0].at("case_id") == "group/d0.00/0000");
  CHECK(io::read_jsonl(dir.path() / "synth_triples.jsonl").size() == 12);

  CHECK(cmd_evaluate(cfg).exit_code == kExitOk);
  const std::string agreement = io::read_file(dir.path() / "agreement.csv");
  CHECK(agreement.starts_with("method,n,matches,agreement,ci_lower,ci_upper,comparator,paired_mean_diff,paired_p\n"));
  CHECK(agreement.find("\nfisco,12,12,1.00,") != std::string::npos);
  const auto eval = json::parse(io::read_file(dir.path() / "evaluation.json"));
  CHECK(eval.at("beta_stability").size() == 4);
  CHECK(std::filesystem::exists(dir.path() / "group_agreement.csv"));

  TempDir again("synth2");
  cfg.output_dir = again.str();
  (void)cmd_synth(cfg);
  CHECK(io::read_file(dir.path() / "synth_cases.jsonl") == io::read_file(again.path() / "synth_cases.jsonl"));
}
