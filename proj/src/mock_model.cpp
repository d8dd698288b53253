#include "fisco/mock_model.hpp"

#include <httplib.h>

#include <algorithm>
#include <set>

#include "fisco/errors.hpp"
#include "fisco/hash.hpp"
#include "fisco/promptgen.hpp"
#include "fisco/synthgen.hpp"
#include "fisco/text.hpp"

namespace fisco::mock {

using json = nlohmann::json;

namespace {

bool starts_with(const std::string& s, std::string_view prefix) { return s.rfind(prefix, 0) == 0; }

const std::set<std::string>& male_names() {
  static const std::set<std::string> names = [] {
    std::set<std::string> out;
    for (const auto& [key, pool] : promptgen::NamePool::builtin().pools()) {
      if (key.second != promptgen::Gender::Male) continue;
      for (const auto& n : pool) out.insert(text::to_lower(n));
    }
    return out;
  }();
  return names;
}

bool names_male(const std::string& prompt) {
  const auto& males = male_names();
  for (const auto& t : text::tokenize(prompt)) {
    if (males.contains(t)) return true;
  }
  return false;
}

std::string bank_reply(const std::string& prompt, bool reverse_first_four) {
  const auto& bank = synth::find_bank(synth::builtin_claim_banks(), "police-candidate");
  const std::string h = sha256_hex(prompt);
  std::string out;
  for (std::size_t i = 0; i < bank.entries.size(); ++i) {
    const auto& e = bank.entries[i];
    const bool para = (std::stoi(h.substr(i % h.size(), 1), nullptr, 16) & 1) != 0;
    const std::string& s = reverse_first_four && i < 4 ? e.contradiction : (para ? e.paraphrase : e.base);
    if (!out.empty()) out.push_back(' ');
    out += s;
  }
  return out;
}

}  // namespace

std::string scripted_reply(const std::string& model_id, const std::string& prompt, std::size_t attempt) {
  static const std::string kShort = "I am not able to say much about this question right now, sorry.";
  if (starts_with(model_id, "fair")) return bank_reply(prompt, false);
  if (starts_with(model_id, "biased")) return bank_reply(prompt, names_male(prompt));
  if (starts_with(model_id, "short")) return kShort;
  if (starts_with(model_id, "flaky")) return attempt % 2 == 1 ? kShort : bank_reply(prompt, false);
  if (starts_with(model_id, "echo")) {
    std::string out = prompt;
    while (text::word_count(out) < 30) out += " " + prompt;
    return out;
  }
  throw Error(ErrorCode::InvalidArgument, "no scripted behaviour for model '" + model_id + "'");
}

Reply scripted_handler(const std::string& model_id, const std::string& prompt, std::size_t attempt) {
  if (starts_with(model_id, "error")) return {500, "scripted failure"};
  try {
    return {200, scripted_reply(model_id, prompt, attempt)};
  } catch (const Error& e) {
    return {400, e.what()};
  }
}

// ---------------------------------------------------------------------------

struct MockModelServer::Impl {
  httplib::Server server;
  std::thread thread;
  std::mutex mutex;
  std::map<std::pair<std::string, std::string>, std::size_t> attempts;
};

namespace {

std::vector<double> hashed_embedding(const std::string& input) {
  std::vector<double> v(64, 0.0);
  for (const auto& t : text::tokenize(input)) {
    const std::string h = sha256_hex(t);
    v[std::stoul(h.substr(0, 4), nullptr, 16) % v.size()] += 1.0;
  }
  return v;
}

}  // namespace

MockModelServer::MockModelServer(Handler handler, std::chrono::milliseconds latency, int port)
    : impl_(std::make_unique<Impl>()) {
  auto track = [this, latency](auto&& body) {
    requests_.fetch_add(1);
    const std::size_t now = in_flight_.fetch_add(1) + 1;
    std::size_t prev = max_in_flight_.load();
    while (now > prev && !max_in_flight_.compare_exchange_weak(prev, now)) {
    }
    if (latency.count() > 0) std::this_thread::sleep_for(latency);
    body();
    in_flight_.fetch_sub(1);
  };

  impl_->server.Post(R"(/v1/chat/completions)", [this, handler, track](const httplib::Request& req,
                                                                       httplib::Response& res) {
    track([&] {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        res.status = 400;
        res.set_content("bad json", "text/plain");
        return;
      }
      const std::string model = body.value("model", "");
      std::string prompt;
      for (const auto& m : body.value("messages", json::array())) {
        if (m.value("role", "") == "user") prompt = m.value("content", "");
      }
      std::size_t attempt = 0;
      {
        std::lock_guard lock(impl_->mutex);
        attempt = ++impl_->attempts[{model, prompt}];
      }
      const Reply reply = handler(model, prompt, attempt);
      res.status = reply.status;
      if (reply.status != 200) {
        res.set_content(reply.content, "text/plain");
        return;
      }
      const json out = {{"object", "chat.completion"},
                        {"model", model},
                        {"choices", {{{"index", 0},
                                      {"message", {{"role", "assistant"}, {"content", reply.content}}},
                                      {"finish_reason", "stop"}}}}};
      res.set_content(out.dump(), "application/json");
    });
  });

  impl_->server.Post(R"(/v1/embeddings)", [track](const httplib::Request& req, httplib::Response& res) {
    track([&] {
      json body;
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        res.status = 400;
        return;
      }
      const json out = {{"object", "list"},
                        {"data", {{{"index", 0}, {"embedding", hashed_embedding(body.value("input", ""))}}}}};
      res.set_content(out.dump(), "application/json");
    });
  });

  if (port == 0) {
    port_ = impl_->server.bind_to_any_port("127.0.0.1");
  } else if (impl_->server.bind_to_port("127.0.0.1", port)) {
    port_ = port;
  } else {
    port_ = -1;
  }
  if (port_ <= 0) throw Error(ErrorCode::IoError, "mock server could not bind");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockModelServer::~MockModelServer() { stop(); }

std::string MockModelServer::base_url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

void MockModelServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockModelServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace fisco::mock
