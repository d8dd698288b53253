#include "fisco/http.hpp"

#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <thread>

#include "fisco/errors.hpp"

namespace fisco::http {

using json = nlohmann::json;

std::chrono::milliseconds RetryPolicy::delay_after(int attempt) const {
  auto delay = base_delay;
  for (int i = 1; i < attempt && delay < max_delay; ++i) delay *= 2;
  return std::min(delay, max_delay);
}

ParsedUrl parse_base_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCode::ConfigError, "base_url must include a scheme: " + base_url);
  }
  const auto path_start = base_url.find('/', scheme_end + 3);
  ParsedUrl out;
  if (path_start == std::string::npos) {
    out.origin = base_url;
  } else {
    out.origin = base_url.substr(0, path_start);
    out.path_prefix = base_url.substr(path_start);
    while (!out.path_prefix.empty() && out.path_prefix.back() == '/') out.path_prefix.pop_back();
  }
  return out;
}

ChatClient::ChatClient(Endpoint endpoint, RetryPolicy retry)
    : endpoint_(std::move(endpoint)),
      retry_(retry),
      url_(parse_base_url(endpoint_.base_url)),
      requests_(std::make_shared<std::atomic<std::uint64_t>>(0)) {
  if (retry_.max_attempts < 1) throw Error(ErrorCode::ConfigError, "max_attempts must be >= 1");
}

std::string ChatClient::post_json(const std::string& path, const std::string& body) const {
  std::string last_problem;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    httplib::Client client(url_.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    httplib::Headers headers;
    if (!endpoint_.api_key.empty()) headers.emplace("Authorization", "Bearer " + endpoint_.api_key);

    requests_->fetch_add(1);
    auto res = client.Post(url_.path_prefix + path, headers, body, "application/json");

    if (!res) {
      last_problem = "transport error: " + httplib::to_string(res.error());
    } else if (res->status == 401 || res->status == 403) {
      throw Error(ErrorCode::AuthError, "endpoint rejected credentials (HTTP " + std::to_string(res->status) + ")");
    } else if (res->status == 200) {
      return res->body;
    } else if (res->status == 408 || res->status == 429 || res->status >= 500) {
      last_problem = "HTTP " + std::to_string(res->status);
    } else {
      throw Error(ErrorCode::MalformedReply, "unexpected HTTP " + std::to_string(res->status) + ": " + res->body);
    }

    if (attempt < retry_.max_attempts) std::this_thread::sleep_for(retry_.delay_after(attempt));
  }
  throw Error(ErrorCode::RateLimited,
              "gave up after " + std::to_string(retry_.max_attempts) + " attempts (" + last_problem + ")");
}

std::string ChatClient::complete(const std::vector<ChatMessage>& messages) const {
  json body;
  body["model"] = endpoint_.model_id;
  body["temperature"] = endpoint_.temperature;
  body["max_tokens"] = endpoint_.max_tokens;
  body["messages"] = json::array();
  for (const auto& m : messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  const std::string raw = post_json("/chat/completions", body.dump());
  try {
    const json reply = json::parse(raw);
    const auto& content = reply.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw Error(ErrorCode::MalformedReply, "message content is not a string");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedReply, std::string("cannot read chat completion: ") + e.what());
  }
}

std::vector<double> ChatClient::embed(const std::string& input) const {
  const json body = {{"model", endpoint_.model_id}, {"input", input}};
  const std::string raw = post_json("/embeddings", body.dump());
  try {
    const json reply = json::parse(raw);
    return reply.at("data").at(0).at("embedding").get<std::vector<double>>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::MalformedReply, std::string("cannot read embedding: ") + e.what());
  }
}

}  // namespace fisco::http
