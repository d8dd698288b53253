#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fisco/http.hpp"
#include "fisco/promptgen.hpp"

namespace fisco::collect {

inline constexpr std::size_t kMinWords = 30;
inline constexpr const char* kApiKeyEnv = "FISCO_API_KEY";

struct ModelEndpointConfig {
  std::string base_url;
  std::string model_id;
  double temperature = 0.0;
  int max_tokens = 1024;
  int max_parallel = 4;
  http::RetryPolicy retry;
  std::chrono::milliseconds timeout{60000};
  /// Name of the environment variable holding the bearer token.
  std::string api_key_env = kApiKeyEnv;

  void validate() const;
};

struct ResponseRecord {
  std::string response_id;
  std::string case_id;
  std::string group_label;
  std::string prompt_hash;
  std::string model_id;
  std::string text;
  std::size_t word_count = 0;
  std::string created_at;
};

nlohmann::json to_json(const ResponseRecord& r);
ResponseRecord record_from_json(const nlohmann::json& j);

/// true iff the reply has at least kMinWords whitespace tokens.
bool filter_response(std::string_view text);

/// ISO-8601 UTC. Honours SOURCE_DATE_EPOCH so repeated runs can be byte-identical.
std::string timestamp_now();

struct CacheEntry {
  std::string text;
  std::string created_at;
};

/// Append-only JSONL cache keyed by (sha256(prompt), model_id). The file is
/// read once at construction; later appends go through one mutex-guarded writer.
/// Without a path the cache lives in memory only.
class ResponseCache {
 public:
  explicit ResponseCache(std::optional<std::filesystem::path> path = std::nullopt);

  [[nodiscard]] std::optional<CacheEntry> find(const std::string& prompt_hash, const std::string& model_id) const;
  /// First write wins; returns the stored entry.
  CacheEntry put(const std::string& prompt_hash, const std::string& model_id, CacheEntry entry);
  [[nodiscard]] std::size_t size() const;
  /// Rewrites the backing file in key order (appends land in completion order).
  void compact() const;

 private:
  std::optional<std::filesystem::path> path_;
  mutable std::mutex mutex_;
  std::map<std::pair<std::string, std::string>, CacheEntry> entries_;
};

struct ExclusionEvent {
  std::string case_id;
  std::string group_label;
  std::size_t index = 0;
  int attempt = 0;
  std::string prompt_hash;
  std::size_t word_count = 0;
  std::string text;
};

struct CollectOptions {
  /// Queries per prompt before a group is declared underfilled.
  int max_requery = 3;
  std::function<void(const ExclusionEvent&)> on_excluded;
};

struct CollectedCase {
  std::vector<ResponseRecord> group1;
  std::vector<ResponseRecord> group2;
};

class Collector {
 public:
  /// Reads the credential from cfg.api_key_env; throws AuthError when unset.
  Collector(ModelEndpointConfig cfg, std::shared_ptr<ResponseCache> cache, CollectOptions options = {});

  /// Cached text when present; otherwise one chat request (with retries).
  /// Replies passing the length filter are written to the cache.
  std::string fetch_response(const std::string& prompt);

  /// Exactly k admitted records per group, in prompt order. A filtered-out
  /// reply is re-requested with the identical prompt up to max_requery times.
  CollectedCase collect_case(const std::pair<promptgen::QuestionGroup, promptgen::QuestionGroup>& groups);

  [[nodiscard]] const ModelEndpointConfig& config() const noexcept { return cfg_; }
  [[nodiscard]] std::uint64_t network_calls() const noexcept { return client_.requests_sent(); }
  [[nodiscard]] std::uint64_t cache_hits() const noexcept { return cache_hits_.load(); }

 private:
  struct Fetched {
    std::string text;
    std::string created_at;
  };
  Fetched fetch(const std::string& prompt, const std::string& prompt_hash);

  ModelEndpointConfig cfg_;
  std::shared_ptr<ResponseCache> cache_;
  CollectOptions options_;
  http::ChatClient client_;
  std::atomic<std::uint64_t> cache_hits_{0};
};

/// Runs `task(i)` for i in [0, n) on at most `workers` threads. The first
/// exception (lowest index) is rethrown after all workers finish.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task);

}  // namespace fisco::collect
