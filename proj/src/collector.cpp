#include "fisco/collector.hpp"

#include <array>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <thread>

#include "fisco/errors.hpp"
#include "fisco/hash.hpp"
#include "fisco/io.hpp"
#include "fisco/text.hpp"

namespace fisco::collect {

using json = nlohmann::json;

void ModelEndpointConfig::validate() const {
  if (base_url.empty()) throw Error(ErrorCode::ConfigError, "model endpoint needs a base_url");
  if (model_id.empty()) throw Error(ErrorCode::ConfigError, "model endpoint needs a model_id");
  if (max_parallel < 1) throw Error(ErrorCode::ConfigError, "max_parallel must be >= 1");
  if (!(temperature >= 0.0)) throw Error(ErrorCode::ConfigError, "temperature must be >= 0");
  if (max_tokens < 1) throw Error(ErrorCode::ConfigError, "max_tokens must be >= 1");
  if (retry.max_attempts < 1) throw Error(ErrorCode::ConfigError, "retry max_attempts must be >= 1");
  http::parse_base_url(base_url);
}

json to_json(const ResponseRecord& r) {
  return {{"response_id", r.response_id}, {"case_id", r.case_id},   {"group_label", r.group_label},
          {"prompt_hash", r.prompt_hash}, {"model_id", r.model_id}, {"text", r.text},
          {"word_count", r.word_count},   {"created_at", r.created_at}};
}

ResponseRecord record_from_json(const json& j) {
  ResponseRecord r;
  r.response_id = j.at("response_id").get<std::string>();
  r.case_id = j.at("case_id").get<std::string>();
  r.group_label = j.at("group_label").get<std::string>();
  r.prompt_hash = j.at("prompt_hash").get<std::string>();
  r.model_id = j.at("model_id").get<std::string>();
  r.text = j.at("text").get<std::string>();
  r.word_count = j.at("word_count").get<std::size_t>();
  r.created_at = j.value("created_at", "");
  return r;
}

bool filter_response(std::string_view text) { return text::word_count(text) >= kMinWords; }

std::string timestamp_now() {
  std::time_t t = 0;
  const char* epoch = std::getenv("SOURCE_DATE_EPOCH");
  if (epoch != nullptr && *epoch != '\0') {
    char* end = nullptr;
    const long long v = std::strtoll(epoch, &end, 10);
    if (end == nullptr || *end != '\0' || v < 0) {
      throw Error(ErrorCode::ConfigError, "SOURCE_DATE_EPOCH must be a non-negative integer");
    }
    t = static_cast<std::time_t>(v);
  } else {
    t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// ---------------------------------------------------------------------------

ResponseCache::ResponseCache(std::optional<std::filesystem::path> path) : path_(std::move(path)) {
  if (!path_ || !std::filesystem::exists(*path_)) return;
  std::ifstream in(*path_);
  if (!in) throw Error(ErrorCode::IoError, "cannot read cache " + path_->string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      const json j = json::parse(line);
      entries_.try_emplace({j.at("prompt_hash").get<std::string>(), j.at("model_id").get<std::string>()},
                           CacheEntry{j.at("text").get<std::string>(), j.value("created_at", "")});
    } catch (const json::exception& e) {
      throw Error(ErrorCode::IoError, path_->string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

std::optional<CacheEntry> ResponseCache::find(const std::string& prompt_hash, const std::string& model_id) const {
  std::lock_guard lock(mutex_);
  const auto it = entries_.find({prompt_hash, model_id});
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

CacheEntry ResponseCache::put(const std::string& prompt_hash, const std::string& model_id, CacheEntry entry) {
  std::lock_guard lock(mutex_);
  const auto [it, inserted] = entries_.try_emplace({prompt_hash, model_id}, std::move(entry));
  if (inserted && path_) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
    std::ofstream out(*path_, std::ios::app);
    const json line = {{"prompt_hash", prompt_hash},
                       {"model_id", model_id},
                       {"text", it->second.text},
                       {"created_at", it->second.created_at}};
    out << line.dump() << '\n';
    if (!out) throw Error(ErrorCode::IoError, "cannot append to cache " + path_->string());
  }
  return it->second;
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

void ResponseCache::compact() const {
  std::lock_guard lock(mutex_);
  if (!path_) return;
  std::vector<json> rows;
  rows.reserve(entries_.size());
  for (const auto& [key, e] : entries_) {
    rows.push_back({{"prompt_hash", key.first}, {"model_id", key.second}, {"text", e.text}, {"created_at", e.created_at}});
  }
  io::write_jsonl(*path_, rows);
}

// ---------------------------------------------------------------------------

namespace {

http::Endpoint endpoint_from(const ModelEndpointConfig& cfg) {
  cfg.validate();
  const char* key = std::getenv(cfg.api_key_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw Error(ErrorCode::AuthError, "environment variable " + cfg.api_key_env + " is not set");
  }
  http::Endpoint e;
  e.base_url = cfg.base_url;
  e.model_id = cfg.model_id;
  e.api_key = key;
  e.temperature = cfg.temperature;
  e.max_tokens = cfg.max_tokens;
  e.timeout = cfg.timeout;
  return e;
}

}  // namespace

Collector::Collector(ModelEndpointConfig cfg, std::shared_ptr<ResponseCache> cache, CollectOptions options)
    : cfg_(std::move(cfg)),
      cache_(cache ? std::move(cache) : std::make_shared<ResponseCache>()),
      options_(std::move(options)),
      client_(endpoint_from(cfg_), cfg_.retry) {
  if (options_.max_requery < 1) throw Error(ErrorCode::ConfigError, "max_requery must be >= 1");
}

Collector::Fetched Collector::fetch(const std::string& prompt, const std::string& prompt_hash) {
  if (auto hit = cache_->find(prompt_hash, cfg_.model_id)) {
    cache_hits_.fetch_add(1);
    return {std::move(hit->text), std::move(hit->created_at)};
  }
  std::string reply = client_.complete({{"user", prompt}});
  if (!filter_response(reply)) return {std::move(reply), timestamp_now()};
  const CacheEntry stored = cache_->put(prompt_hash, cfg_.model_id, {std::move(reply), timestamp_now()});
  return {stored.text, stored.created_at};
}

std::string Collector::fetch_response(const std::string& prompt) { return fetch(prompt, sha256_hex(prompt)).text; }

CollectedCase Collector::collect_case(
    const std::pair<promptgen::QuestionGroup, promptgen::QuestionGroup>& groups) {
  const std::array<const promptgen::QuestionGroup*, 2> gs = {&groups.first, &groups.second};
  const std::size_t k1 = gs[0]->prompts.size();
  const std::size_t n = k1 + gs[1]->prompts.size();
  std::vector<ResponseRecord> records(n);

  parallel_for(n, cfg_.max_parallel, [&](std::size_t slot) {
    const auto& group = *gs[slot < k1 ? 0 : 1];
    const std::size_t index = slot < k1 ? slot : slot - k1;
    const std::string& prompt = group.prompts[index];
    const std::string hash = sha256_hex(prompt);
    for (int attempt = 1; attempt <= options_.max_requery; ++attempt) {
      Fetched got = fetch(prompt, hash);
      const std::size_t words = text::word_count(got.text);
      if (words >= kMinWords) {
        ResponseRecord& r = records[slot];
        r.response_id = cfg_.model_id + "/" + group.case_id + "/" + group.group_label + "/" + std::to_string(index);
        r.case_id = group.case_id;
        r.group_label = group.group_label;
        r.prompt_hash = hash;
        r.model_id = cfg_.model_id;
        r.word_count = words;
        r.text = std::move(got.text);
        r.created_at = std::move(got.created_at);
        return;
      }
      if (options_.on_excluded) {
        options_.on_excluded({group.case_id, group.group_label, index, attempt, hash, words, got.text});
      }
    }
    throw Error(ErrorCode::UnderfilledGroup, "case " + group.case_id + " group " + group.group_label + " prompt " +
                                                 std::to_string(index) + " stayed under " +
                                                 std::to_string(kMinWords) + " words after " +
                                                 std::to_string(options_.max_requery) + " queries");
  });

  CollectedCase out;
  out.group1.assign(std::make_move_iterator(records.begin()),
                    std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(k1)));
  out.group2.assign(std::make_move_iterator(records.begin() + static_cast<std::ptrdiff_t>(k1)),
                    std::make_move_iterator(records.end()));
  return out;
}

// ---------------------------------------------------------------------------

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task) {
  if (n == 0) return;
  const auto w = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  auto run = [&] {
    for (;;) {
      if (failed.load()) return;
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
        failed.store(true);
      }
    }
  };
  if (w == 1) {
    run();
  } else {
    std::vector<std::jthread> threads;
    threads.reserve(w);
    for (std::size_t t = 0; t < w; ++t) threads.emplace_back(run);
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace fisco::collect
