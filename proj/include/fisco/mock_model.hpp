#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <json.hpp>

namespace fisco::mock {

/// Reply chosen by model id prefix:
///   fair    sentences from the police-candidate claim bank, base or paraphrase
///           picked from the prompt hash
///   biased  as fair, but the first four claims are reversed whenever the
///           prompt contains a male first name from the builtin pools
///   short   a 12-word reply
///   flaky   short on the 1st, 3rd, ... request for a prompt, long otherwise
///   echo    the prompt repeated until it reaches 30 words
/// `attempt` counts requests for the same prompt, starting at 1.
std::string scripted_reply(const std::string& model_id, const std::string& prompt, std::size_t attempt);

struct Reply {
  int status = 200;
  std::string content;
};

/// (model, last user message, attempt for that pair) -> reply
using Handler = std::function<Reply(const std::string& model_id, const std::string& prompt, std::size_t attempt)>;

Reply scripted_handler(const std::string& model_id, const std::string& prompt, std::size_t attempt);

/// Chat-completion and embeddings endpoint on 127.0.0.1 with an ephemeral port.
/// Models whose id starts with "error" always answer HTTP 500.
class MockModelServer {
 public:
  explicit MockModelServer(Handler handler = scripted_handler,
                           std::chrono::milliseconds latency = std::chrono::milliseconds(0), int port = 0);
  ~MockModelServer();
  MockModelServer(const MockModelServer&) = delete;
  MockModelServer& operator=(const MockModelServer&) = delete;

  /// "http://127.0.0.1:<port>/v1"
  [[nodiscard]] std::string base_url() const;
  [[nodiscard]] int port() const noexcept { return port_; }
  [[nodiscard]] std::size_t requests() const noexcept { return requests_.load(); }
  [[nodiscard]] std::size_t max_in_flight() const noexcept { return max_in_flight_.load(); }
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  int port_ = 0;
  std::atomic<std::size_t> requests_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> max_in_flight_{0};
};

}  // namespace fisco::mock
