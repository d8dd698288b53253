#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fisco/http.hpp"

namespace fisco {

enum class EntailmentLabel { Entailment, Neutral, Contradiction };

/// "entailment" | "neutral" | "contradiction"
std::string_view to_string(EntailmentLabel label) noexcept;
EntailmentLabel parse_label(std::string_view s);

struct Claim {
  std::string claim_id;
  std::string source_response_id;
  std::size_t ordinal = 0;
  std::string text;
  /// Hidden synthesis label; only the oracle backend reads it.
  std::optional<std::string> provenance_tag;
};

struct ClaimSet {
  std::string response_id;
  std::vector<Claim> claims;
};

struct ClaimVerdict {
  std::string claim_id;
  std::string source_response_id;
  std::string premise_response_id;
  EntailmentLabel label = EntailmentLabel::Neutral;
};

/// A response as seen by the checker: id plus full text.
struct ResponseText {
  std::string response_id;
  std::string text;
};

// ---------------------------------------------------------------------------
// Provenance tags used by the oracle backend.
//
// A tag is "<bank>/<entry>/<variant>" where variant is one of base, para,
// contra, unrel. Claims sharing (bank, entry) talk about the same fact:
// base and para agree with each other, contra disagrees with both, unrel is
// a replacement on a different subject and only matches itself.

enum class Variant { Base, Paraphrase, Contradiction, Unrelated };

struct ProvenanceTag {
  std::string bank_id;
  std::size_t entry = 0;
  Variant variant = Variant::Base;

  [[nodiscard]] std::string str() const;
  static ProvenanceTag parse(std::string_view s);
  auto operator<=>(const ProvenanceTag&) const = default;
};

/// Ground-truth relation of a tagged claim to a premise given the premise's tags.
EntailmentLabel oracle_label(const ProvenanceTag& claim, std::span<const ProvenanceTag> premise);

/// Exact-text lookup from claim sentence to provenance tag.
class ProvenanceRegistry {
 public:
  void add(std::string text, ProvenanceTag tag);
  [[nodiscard]] std::optional<ProvenanceTag> find(std::string_view text) const;
  [[nodiscard]] std::size_t size() const noexcept { return by_text_.size(); }

 private:
  std::map<std::string, ProvenanceTag, std::less<>> by_text_;
};

// ---------------------------------------------------------------------------
// Backends

enum class BackendKind { RemoteModel, Oracle, LexicalHeuristic };
std::string_view to_string(BackendKind kind) noexcept;
BackendKind parse_backend_kind(std::string_view s);

struct CheckerPrompts {
  /// {response} is replaced by the response text.
  std::string extract;
  /// {claim} and {premise} are replaced.
  std::string check;
  std::string reformat_extract;
  std::string reformat_check;

  static CheckerPrompts defaults();
};

struct LexicalThresholds {
  double entail_recall = 0.8;
};

struct CheckerBackendConfig {
  BackendKind kind = BackendKind::LexicalHeuristic;
  http::Endpoint endpoint;
  http::RetryPolicy retry;
  CheckerPrompts prompts = CheckerPrompts::defaults();
  int max_parallel = 4;
  LexicalThresholds lexical;
  std::shared_ptr<const ProvenanceRegistry> registry;
};

/// Backend interface. Implementations are safe to call concurrently.
class EntailmentChecker {
 public:
  virtual ~EntailmentChecker() = default;

  /// Claim texts in response order. May return an empty list; the free
  /// function `extract_claims` turns that into EmptyDecomposition.
  [[nodiscard]] virtual std::vector<std::string> decompose(std::string_view response_text) const = 0;
  [[nodiscard]] virtual std::optional<std::string> provenance_of(std::string_view claim_text) const {
    (void)claim_text;
    return std::nullopt;
  }
  [[nodiscard]] virtual EntailmentLabel judge(const Claim& claim, const ResponseText& premise) const = 0;
  [[nodiscard]] virtual BackendKind kind() const noexcept = 0;
};

std::unique_ptr<EntailmentChecker> make_checker(const CheckerBackendConfig& config);

/// Sentence + conjunction split with content-token recall labels.
class LexicalChecker final : public EntailmentChecker {
 public:
  explicit LexicalChecker(LexicalThresholds thresholds = {}) : thresholds_(thresholds) {}

  [[nodiscard]] std::vector<std::string> decompose(std::string_view response_text) const override;
  [[nodiscard]] EntailmentLabel judge(const Claim& claim, const ResponseText& premise) const override;
  [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::LexicalHeuristic; }

 private:
  LexicalThresholds thresholds_;
};

/// Test-only backend returning labels implied by provenance tags.
class OracleChecker final : public EntailmentChecker {
 public:
  explicit OracleChecker(std::shared_ptr<const ProvenanceRegistry> registry);

  [[nodiscard]] std::vector<std::string> decompose(std::string_view response_text) const override;
  [[nodiscard]] std::optional<std::string> provenance_of(std::string_view claim_text) const override;
  [[nodiscard]] EntailmentLabel judge(const Claim& claim, const ResponseText& premise) const override;
  [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::Oracle; }

 private:
  std::shared_ptr<const ProvenanceRegistry> registry_;
};

/// Chat-model backend. Extraction expects a JSON array of strings; checking
/// expects a single label word. One reformat request is sent for
/// non-conforming output before giving up with BackendUnavailable.
class RemoteChecker final : public EntailmentChecker {
 public:
  explicit RemoteChecker(const CheckerBackendConfig& config);
  ~RemoteChecker() override;

  [[nodiscard]] std::vector<std::string> decompose(std::string_view response_text) const override;
  [[nodiscard]] EntailmentLabel judge(const Claim& claim, const ResponseText& premise) const override;
  [[nodiscard]] BackendKind kind() const noexcept override { return BackendKind::RemoteModel; }

 private:
  struct Limiter;
  [[nodiscard]] std::string ask(const std::vector<http::ChatMessage>& messages) const;

  http::ChatClient client_;
  CheckerPrompts prompts_;
  std::unique_ptr<Limiter> limiter_;
};

// ---------------------------------------------------------------------------
// Operations

ClaimSet extract_claims(const ResponseText& response, const EntailmentChecker& checker);

ClaimVerdict check_claim(const Claim& claim, const ResponseText& premise, const EntailmentChecker& checker);

/// All claims of r1 against r2's text, then all claims of r2 against r1's
/// text, each in ordinal order. Any failure aborts the whole pair.
std::vector<ClaimVerdict> check_pair(const ClaimSet& c1, const ResponseText& r1, const ClaimSet& c2,
                                     const ResponseText& r2, const EntailmentChecker& checker);

}  // namespace fisco
