#include <doctest.h>

#include <fstream>
#include <mutex>
#include <set>
#include <thread>

#include "fisco/collector.hpp"
#include "fisco/errors.hpp"
#include "fisco/hash.hpp"
#include "fisco/io.hpp"
#include "fisco/mock_model.hpp"
#include "support.hpp"

using namespace fisco;
using namespace fisco::collect;
using fisco::io::read_jsonl;
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

std::string words(std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < n; ++i) out += (i ? " w" : "w") + std::to_string(i);
  return out;
}

ModelEndpointConfig endpoint(const mock::MockModelServer& server, const std::string& model, int parallel = 4) {
  ModelEndpointConfig cfg;
  cfg.base_url = server.base_url();
  cfg.model_id = model;
  cfg.max_parallel = parallel;
  cfg.retry.max_attempts = 2;
  cfg.retry.base_delay = std::chrono::milliseconds(1);
  cfg.retry.max_delay = std::chrono::milliseconds(2);
  return cfg;
}

std::pair<promptgen::QuestionGroup, promptgen::QuestionGroup> small_case(std::size_t k) {
  const auto& t = promptgen::builtin_templates().front();
  return promptgen::build_case(t, promptgen::Axis::Gender, k, 42);
}

}  // namespace

TEST_CASE("length filter boundary") {
  CHECK_FALSE(filter_response(""));
  CHECK_FALSE(filter_response(words(kMinWords - 1)));
  CHECK(filter_response(words(kMinWords)));
  CHECK(filter_response("  " + words(kMinWords) + "\n\n"));
}

TEST_CASE("timestamps honour SOURCE_DATE_EPOCH") {
  {
    EnvGuard g("SOURCE_DATE_EPOCH", "1700000000");
    CHECK(timestamp_now() == "2023-11-14T22:13:20Z");
  }
  {
    EnvGuard g("SOURCE_DATE_EPOCH", "0");
    CHECK(timestamp_now() == "1970-01-01T00:00:00Z");
  }
  EnvGuard g("SOURCE_DATE_EPOCH", std::nullopt);
  const auto now = timestamp_now();
  CHECK(now.size() == 20);
  CHECK(now.back() == 'Z');
}

TEST_CASE("endpoint validation") {
  ModelEndpointConfig cfg;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
  cfg.base_url = "http://127.0.0.1:1/v1";
  cfg.model_id = "m";
  CHECK_NOTHROW(cfg.validate());
  cfg.max_parallel = 0;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
  cfg.max_parallel = 1;
  cfg.temperature = -1.0;
  CHECK(code_of([&] { cfg.validate(); }) == ErrorCode::ConfigError);
}

TEST_CASE("response record json round-trip") {
  ResponseRecord r{"m/c/g/0", "c", "g", "abc", "m", "some text", 2, "2023-01-01T00:00:00Z"};
  const auto back = record_from_json(to_json(r));
  CHECK(back.response_id == r.response_id);
  CHECK(back.text == r.text);
  CHECK(back.word_count == 2);
  CHECK(back.created_at == r.created_at);
  CHECK(to_json(back) == to_json(r));
}

TEST_CASE("cache: first write wins and persists") {
  TempDir dir("cache");
  const auto path = dir.path() / "sub" / "cache.jsonl";
  {
    ResponseCache cache(path);
    CHECK(cache.size() == 0);
    CHECK(cache.put("h1", "m", {"first", "t1"}).text == "first");
    CHECK(cache.put("h1", "m", {"second", "t2"}).text == "first");
    cache.put("h1", "other", {"third", "t3"});
    CHECK(cache.find("h1", "m")->text == "first");
    CHECK_FALSE(cache.find("h2", "m").has_value());
    CHECK(cache.size() == 2);
  }
  CHECK(read_jsonl(path).size() == 2);
  ResponseCache reloaded(path);
  CHECK(reloaded.size() == 2);
  CHECK(reloaded.find("h1", "other")->created_at == "t3");

  std::ofstream(path, std::ios::app) << "{broken\n";
  CHECK(code_of([&] { ResponseCache bad(path); }) == ErrorCode::IoError);
}

TEST_CASE("cache: concurrent appends keep one line per key") {
  TempDir dir("cache-mt");
  const auto path = dir.path() / "cache.jsonl";
  {
    ResponseCache cache(path);
    std::vector<std::jthread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&, t] {
        for (int i = 0; i < 50; ++i) cache.put("h" + std::to_string(i), "m", {"v" + std::to_string(t), "x"});
      });
    }
  }
  const auto lines = read_jsonl(path);
  CHECK(lines.size() == 50);
  std::set<std::string> keys;
  for (const auto& j : lines) keys.insert(j.at("prompt_hash").get<std::string>());
  CHECK(keys.size() == 50);

  ResponseCache reread(path);
  reread.compact();
  const auto sorted = read_jsonl(path);
  REQUIRE(sorted.size() == 50);
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    CHECK(sorted[i - 1].at("prompt_hash").get<std::string>() < sorted[i].at("prompt_hash").get<std::string>());
  }
}

TEST_CASE("collector needs a credential") {
  mock::MockModelServer server;
  EnvGuard key(kApiKeyEnv, std::nullopt);
  CHECK(code_of([&] { Collector c(endpoint(server, "fair-1"), nullptr); }) == ErrorCode::AuthError);
  auto cfg = endpoint(server, "fair-1");
  cfg.api_key_env = "FISCO_TEST_OTHER_KEY";
  EnvGuard other("FISCO_TEST_OTHER_KEY", "secret");
  CHECK_NOTHROW(Collector(cfg, nullptr));
}

TEST_CASE("collect a case and reuse the cache") {
  EnvGuard key(kApiKeyEnv, "test-key");
  EnvGuard epoch("SOURCE_DATE_EPOCH", "1700000000");
  mock::MockModelServer server;
  TempDir dir("collect");
  const auto groups = small_case(3);

  Collector first(endpoint(server, "fair-1"), std::make_shared<ResponseCache>(dir.path() / "cache.jsonl"));
  const auto got = first.collect_case(groups);
  REQUIRE(got.group1.size() == 3);
  REQUIRE(got.group2.size() == 3);
  CHECK(first.network_calls() == 6);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto& r = got.group2[i];
    CHECK(r.response_id == "fair-1/" + groups.second.case_id + "/male/" + std::to_string(i));
    CHECK(r.prompt_hash == sha256_hex(groups.second.prompts[i]));
    CHECK(r.word_count >= kMinWords);
    CHECK(r.created_at == "2023-11-14T22:13:20Z");
    CHECK(r.text == mock::scripted_reply("fair-1", groups.second.prompts[i], 1));
  }

  Collector second(endpoint(server, "fair-1"), std::make_shared<ResponseCache>(dir.path() / "cache.jsonl"));
  const auto again = second.collect_case(groups);
  CHECK(second.network_calls() == 0);
  CHECK(second.cache_hits() == 6);
  for (std::size_t i = 0; i < 3; ++i) CHECK(to_json(again.group1[i]) == to_json(got.group1[i]));

  // The cache is keyed by model as well.
  Collector third(endpoint(server, "biased-1"), std::make_shared<ResponseCache>(dir.path() / "cache.jsonl"));
  (void)third.collect_case(groups);
  CHECK(third.network_calls() == 6);
}

TEST_CASE("short replies are re-queried and then underfill") {
  EnvGuard key(kApiKeyEnv, "test-key");
  mock::MockModelServer server;
  const auto groups = small_case(2);

  std::mutex m;
  std::vector<ExclusionEvent> events;
  CollectOptions opts;
  opts.max_requery = 3;
  opts.on_excluded = [&](const ExclusionEvent& e) {
    std::lock_guard lock(m);
    events.push_back(e);
  };

  SUBCASE("flaky model recovers on the second query") {
    auto cache = std::make_shared<ResponseCache>();
    Collector c(endpoint(server, "flaky-1"), cache, opts);
    const auto got = c.collect_case(groups);
    CHECK(got.group1.size() == 2);
    CHECK(events.size() == 4);
    for (const auto& e : events) {
      CHECK(e.attempt == 1);
      CHECK(e.word_count < kMinWords);
    }
    CHECK(c.network_calls() == 8);
    // Only admitted replies are cached.
    CHECK(cache->size() == 4);
  }

  SUBCASE("short model exhausts the requery budget") {
    Collector c(endpoint(server, "short-1", 1), nullptr, opts);
    CHECK(code_of([&] { (void)c.collect_case(groups); }) == ErrorCode::UnderfilledGroup);
    REQUIRE(events.size() == 3);
    CHECK(events[2].attempt == 3);
    CHECK(events[0].index == 0);
    CHECK(c.network_calls() == 3);
  }
}

TEST_CASE("backend failures map to error codes") {
  EnvGuard key(kApiKeyEnv, "test-key");
  SUBCASE("server errors exhaust retries") {
    mock::MockModelServer server;
    Collector c(endpoint(server, "error-1"), nullptr);
    CHECK(code_of([&] { (void)c.fetch_response("hello"); }) == ErrorCode::RateLimited);
    CHECK(c.network_calls() == 2);
  }
  SUBCASE("rejected credentials are not retried") {
    mock::MockModelServer server([](const std::string&, const std::string&, std::size_t) -> mock::Reply {
      return {401, "no"};
    });
    Collector c(endpoint(server, "any"), nullptr);
    CHECK(code_of([&] { (void)c.fetch_response("hello"); }) == ErrorCode::AuthError);
    CHECK(c.network_calls() == 1);
  }
  SUBCASE("unknown model is a malformed reply") {
    mock::MockModelServer server;
    Collector c(endpoint(server, "nobody"), nullptr);
    CHECK(code_of([&] { (void)c.fetch_response("hello"); }) == ErrorCode::MalformedReply);
  }
  SUBCASE("nothing listening") {
    ModelEndpointConfig cfg;
    cfg.base_url = "http://127.0.0.1:1/v1";
    cfg.model_id = "m";
    cfg.retry.max_attempts = 1;
    Collector c(cfg, nullptr);
    CHECK(code_of([&] { (void)c.fetch_response("hello"); }) == ErrorCode::RateLimited);
  }
}

TEST_CASE("collector respects max_parallel") {
  EnvGuard key(kApiKeyEnv, "test-key");
  mock::MockModelServer server(mock::scripted_handler, std::chrono::milliseconds(30));
  Collector c(endpoint(server, "fair-1", 3), nullptr);
  (void)c.collect_case(small_case(5));
  CHECK(server.requests() == 10);
  CHECK(server.max_in_flight() <= 3);
  CHECK(server.max_in_flight() >= 2);
}

TEST_CASE("parallel_for visits every index and reports the lowest failure") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));

  try {
    parallel_for(10, 1, [](std::size_t i) {
      if (i == 3 || i == 7) throw Error(ErrorCode::InvalidArgument, "slot " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("slot 3") != std::string::npos);
  }
  parallel_for(0, 4, [](std::size_t) { FAIL("not called"); });
}
