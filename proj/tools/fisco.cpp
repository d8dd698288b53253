// Command-line front end: one subcommand per pipeline stage.
#include <CLI11.hpp>

#include <iostream>
#include <optional>

#include "fisco/config.hpp"
#include "fisco/pipeline.hpp"

namespace {

int run(int argc, char** argv) {
  CLI::App app{"Group fairness audits for long-form model responses"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fisco::kToolVersion);

  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  app.add_option("--config", config_path, "Run configuration (JSON)");
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--out", out_dir, "Override the output directory");

  auto* generate = app.add_subcommand("generate", "Expand templates into prompts.jsonl");
  auto* collect = app.add_subcommand("collect", "Query model endpoints into responses.jsonl");
  auto* score = app.add_subcommand("score", "Extract claims and score response pairs");
  auto* test = app.add_subcommand("test", "Welch test per case into results.jsonl and summary.csv");
  auto* synth = app.add_subcommand("synth", "Write synthetic group cases and triples");
  auto* evaluate = app.add_subcommand("evaluate", "Agreement of similarity methods on synthetic data");
  auto* report = app.add_subcommand("report", "Bias-rate report into report.json");

  fisco::pipeline::CollectOverrides overrides;
  collect->add_option("--model", overrides.model, "Model id (from the config, or new with --base-url)");
  collect->add_option("--base-url", overrides.base_url, "Endpoint base URL, e.g. http://host:8000/v1");
  collect->add_option("--max-parallel", overrides.max_parallel, "Concurrent requests")->check(CLI::PositiveNumber);
  collect->add_option("--k", overrides.k, "Prompts per group")->check(CLI::Range(2, 1000));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : fisco::pipeline::kExitConfig;
  }

  try {
    fisco::RunConfig cfg = config_path ? fisco::RunConfig::load(*config_path) : fisco::RunConfig{};
    if (seed) cfg.seed = *seed;
    if (out_dir) cfg.output_dir = *out_dir;
    cfg.validate();

    fisco::pipeline::StageResult result;
    if (generate->parsed()) {
      result = fisco::pipeline::cmd_generate(cfg);
    } else if (collect->parsed()) {
      result = fisco::pipeline::cmd_collect(cfg, overrides);
    } else if (score->parsed()) {
      result = fisco::pipeline::cmd_score(cfg);
    } else if (test->parsed()) {
      result = fisco::pipeline::cmd_test(cfg);
    } else if (synth->parsed()) {
      result = fisco::pipeline::cmd_synth(cfg);
    } else if (evaluate->parsed()) {
      result = fisco::pipeline::cmd_evaluate(cfg);
    } else if (report->parsed()) {
      result = fisco::pipeline::cmd_report(cfg);
    }
    for (const auto& line : result.lines) std::cout << line << '\n';
    for (const auto& f : result.written) std::cout << "wrote " << cfg.output_dir << "/" << f << '\n';
    if (result.exit_code == fisco::pipeline::kExitUnderfilled) {
      std::cerr << "some cases could not be filled; see " << cfg.output_dir << "/underfilled.jsonl\n";
    }
    return result.exit_code;
  } catch (const fisco::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fisco::pipeline::exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return fisco::pipeline::kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
