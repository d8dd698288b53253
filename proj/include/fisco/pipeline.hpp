#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "fisco/config.hpp"
#include "fisco/errors.hpp"
#include "fisco/synthgen.hpp"

namespace fisco::pipeline {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitBackend = 3;
inline constexpr int kExitUnderfilled = 4;

int exit_code_for(ErrorCode code) noexcept;

struct StageResult {
  int exit_code = kExitOk;
  std::vector<std::string> written;
  /// Human-readable lines for stdout.
  std::vector<std::string> lines;
};

struct CollectOverrides {
  std::optional<std::string> model;
  std::optional<std::string> base_url;
  std::optional<int> max_parallel;
  std::optional<std::size_t> k;
};

/// prompts.jsonl
StageResult cmd_generate(const RunConfig& cfg);
/// responses.jsonl, underfilled.jsonl, exclusions.jsonl. Exit 4 when any case
/// stayed underfilled; the other cases are still written.
StageResult cmd_collect(const RunConfig& cfg, const CollectOverrides& overrides = {});
/// claims.jsonl, verdicts.jsonl, similarities.jsonl, score_exclusions.jsonl
StageResult cmd_score(const RunConfig& cfg);
/// results.jsonl, summary.csv
StageResult cmd_test(const RunConfig& cfg);
/// report.json
StageResult cmd_report(const RunConfig& cfg);
/// synth_cases.jsonl, synth_triples.jsonl
StageResult cmd_synth(const RunConfig& cfg);
/// agreement.csv, group_agreement.csv, evaluation.json
StageResult cmd_evaluate(const RunConfig& cfg);

// Helpers shared with tests.
std::vector<promptgen::TemplateSpec> load_templates(const RunConfig& cfg);
std::vector<synth::ClaimBank> load_banks(const RunConfig& cfg);
std::shared_ptr<const EntailmentChecker> make_run_checker(const RunConfig& cfg);
/// manifest.json: tool, version, config hash, seed and a digest per output file.
void write_manifest(const RunConfig& cfg);

}  // namespace fisco::pipeline
