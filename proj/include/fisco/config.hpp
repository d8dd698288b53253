#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fisco/collector.hpp"
#include "fisco/entailment.hpp"
#include "fisco/promptgen.hpp"
#include "fisco/similarity.hpp"
#include "fisco/stats.hpp"

namespace fisco {

inline constexpr const char* kToolVersion = "0.4.0";

struct CheckerConfig {
  BackendKind kind = BackendKind::Oracle;
  /// Remote backend only.
  std::string base_url;
  std::string model_id;
  std::string api_key_env = collect::kApiKeyEnv;
  int max_parallel = 4;
  http::RetryPolicy retry;
  double entail_recall = 0.8;
};

struct SynthConfig {
  std::size_t n_group_cases = 200;
  std::size_t n_triples = 200;
  std::size_t k = 10;
  std::vector<double> deltas{0.0, 0.5};
  /// Empty means all banks, assigned round-robin.
  std::vector<std::string> banks;
  std::vector<double> betas{0.0, 0.2, 0.4, 0.6};
  std::vector<std::string> baselines{"bleu", "rouge_l", "cosine"};
  std::size_t bootstrap_resamples = 1000;
};

struct RunConfig {
  std::size_t k = 10;
  WeightConfig weights;
  double significance_level = stats::kDefaultSignificance;
  std::vector<promptgen::Axis> axes{promptgen::Axis::Gender, promptgen::Axis::Race, promptgen::Axis::Age};
  /// Template ids to use; empty means every template declared for the axis.
  std::vector<std::string> templates;
  std::optional<std::string> templates_file;
  std::optional<std::string> claim_bank_file;
  promptgen::CaseOptions case_options;
  std::vector<collect::ModelEndpointConfig> models;
  CheckerConfig checker;
  /// Extra metrics scored next to FiSCo in the score stage.
  std::vector<std::string> baselines;
  std::uint64_t seed = 0;
  std::string output_dir = "fisco-run";
  std::optional<std::string> cache_file;
  int max_requery = 3;
  SynthConfig synth;

  /// Re-checks every component invariant. Throws ConfigError.
  void validate() const;

  /// Strict parse: unknown keys are rejected at every level.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig load(const std::string& path);
  [[nodiscard]] nlohmann::json to_json() const;
  /// sha256 of the canonical JSON rendering, output locations excluded.
  [[nodiscard]] std::string hash() const;
};

}  // namespace fisco
