#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace fisco::http {

/// Exponential backoff: attempt n (1-based) waits base_delay * 2^(n-1),
/// capped at max_delay, before attempt n+1.
struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_delay{250};
  std::chrono::milliseconds max_delay{8000};

  [[nodiscard]] std::chrono::milliseconds delay_after(int attempt) const;
};

struct Endpoint {
  std::string base_url;  // e.g. "https://api.example.com/v1"
  std::string model_id;
  std::string api_key;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::chrono::milliseconds timeout{60000};
};

struct ChatMessage {
  std::string role;
  std::string content;
};

/// Splits "scheme://host:port/prefix" into the origin and path prefix.
struct ParsedUrl {
  std::string origin;
  std::string path_prefix;
};
ParsedUrl parse_base_url(const std::string& base_url);

/// Minimal chat-completion client: POST {prefix}/chat/completions with
/// {model, messages, temperature, max_tokens} and read
/// choices[0].message.content from the reply.
///
/// Status handling: 401/403 raise AuthError immediately. 408, 429 and 5xx and
/// transport failures are retried per the policy and raise RateLimited once
/// attempts are exhausted. A 200 without the expected shape, or any other
/// status, raises MalformedReply.
///
/// Safe to share between threads; each call opens its own connection.
class ChatClient {
 public:
  ChatClient(Endpoint endpoint, RetryPolicy retry);

  [[nodiscard]] std::string complete(const std::vector<ChatMessage>& messages) const;

  /// POST {prefix}/embeddings with {model, input}; reads data[0].embedding.
  [[nodiscard]] std::vector<double> embed(const std::string& input) const;

  [[nodiscard]] const Endpoint& endpoint() const noexcept { return endpoint_; }
  /// Number of HTTP requests issued so far, including retries.
  [[nodiscard]] std::uint64_t requests_sent() const noexcept { return requests_->load(); }

 private:
  [[nodiscard]] std::string post_json(const std::string& path, const std::string& body) const;

  Endpoint endpoint_;
  RetryPolicy retry_;
  ParsedUrl url_;
  std::shared_ptr<std::atomic<std::uint64_t>> requests_;
};

}  // namespace fisco::http
