#include "fisco/entailment.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <semaphore>
#include <unordered_set>

#include "fisco/errors.hpp"
#include "fisco/text.hpp"

namespace fisco {

std::string_view to_string(EntailmentLabel label) noexcept {
  switch (label) {
    case EntailmentLabel::Entailment: return "entailment";
    case EntailmentLabel::Neutral: return "neutral";
    case EntailmentLabel::Contradiction: return "contradiction";
  }
  return "neutral";
}

EntailmentLabel parse_label(std::string_view s) {
  if (s == "entailment") return EntailmentLabel::Entailment;
  if (s == "neutral") return EntailmentLabel::Neutral;
  if (s == "contradiction") return EntailmentLabel::Contradiction;
  throw Error(ErrorCode::InvalidArgument, "unknown entailment label '" + std::string(s) + "'");
}

std::string_view to_string(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::RemoteModel: return "remote";
    case BackendKind::Oracle: return "oracle";
    case BackendKind::LexicalHeuristic: return "lexical";
  }
  return "lexical";
}

BackendKind parse_backend_kind(std::string_view s) {
  if (s == "remote") return BackendKind::RemoteModel;
  if (s == "oracle") return BackendKind::Oracle;
  if (s == "lexical") return BackendKind::LexicalHeuristic;
  throw Error(ErrorCode::ConfigError, "unknown checker backend '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Provenance

namespace {

constexpr std::array<std::pair<Variant, std::string_view>, 4> kVariantNames = {{
    {Variant::Base, "base"},
    {Variant::Paraphrase, "para"},
    {Variant::Contradiction, "contra"},
    {Variant::Unrelated, "unrel"},
}};

bool affirms(Variant v) { return v == Variant::Base || v == Variant::Paraphrase; }

}  // namespace

std::string ProvenanceTag::str() const {
  std::string_view name = "base";
  for (const auto& [v, n] : kVariantNames) {
    if (v == variant) name = n;
  }
  return bank_id + "/" + std::to_string(entry) + "/" + std::string(name);
}

ProvenanceTag ProvenanceTag::parse(std::string_view s) {
  const auto last = s.rfind('/');
  const auto first = last == std::string_view::npos || last == 0 ? std::string_view::npos : s.rfind('/', last - 1);
  if (first == std::string_view::npos || first == 0) {
    throw Error(ErrorCode::InvalidArgument, "malformed provenance tag '" + std::string(s) + "'");
  }
  ProvenanceTag tag;
  tag.bank_id = std::string(s.substr(0, first));
  const std::string entry(s.substr(first + 1, last - first - 1));
  if (entry.empty() || !std::all_of(entry.begin(), entry.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw Error(ErrorCode::InvalidArgument, "malformed provenance tag '" + std::string(s) + "'");
  }
  tag.entry = std::stoul(entry);
  const auto name = s.substr(last + 1);
  for (const auto& [v, n] : kVariantNames) {
    if (n == name) {
      tag.variant = v;
      return tag;
    }
  }
  throw Error(ErrorCode::InvalidArgument, "malformed provenance tag '" + std::string(s) + "'");
}

EntailmentLabel oracle_label(const ProvenanceTag& claim, std::span<const ProvenanceTag> premise) {
  bool has_affirm = false;
  bool has_contra = false;
  bool has_unrel = false;
  for (const auto& p : premise) {
    if (p.bank_id != claim.bank_id || p.entry != claim.entry) continue;
    has_affirm |= affirms(p.variant);
    has_contra |= p.variant == Variant::Contradiction;
    has_unrel |= p.variant == Variant::Unrelated;
  }
  switch (claim.variant) {
    case Variant::Base:
    case Variant::Paraphrase:
      if (has_affirm) return EntailmentLabel::Entailment;
      if (has_contra) return EntailmentLabel::Contradiction;
      return EntailmentLabel::Neutral;
    case Variant::Contradiction:
      if (has_contra) return EntailmentLabel::Entailment;
      if (has_affirm) return EntailmentLabel::Contradiction;
      return EntailmentLabel::Neutral;
    case Variant::Unrelated:
      return has_unrel ? EntailmentLabel::Entailment : EntailmentLabel::Neutral;
  }
  return EntailmentLabel::Neutral;
}

void ProvenanceRegistry::add(std::string text, ProvenanceTag tag) {
  const auto [it, inserted] = by_text_.emplace(std::move(text), tag);
  if (!inserted && it->second != tag) {
    throw Error(ErrorCode::InvalidArgument, "claim text registered under two tags: '" + it->first + "'");
  }
}

std::optional<ProvenanceTag> ProvenanceRegistry::find(std::string_view text) const {
  const auto it = by_text_.find(text);
  if (it == by_text_.end()) return std::nullopt;
  return it->second;
}

// ---------------------------------------------------------------------------
// Lexical heuristic

namespace {

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = {
      "a",    "an",   "the",  "and",  "or",   "but",   "of",    "to",   "in",   "on",    "at",   "for",
      "with", "by",   "from", "as",   "is",   "are",   "was",   "were", "be",   "been",  "being", "it",
      "its",  "this", "that", "these", "those", "has",  "have",  "had",  "do",   "does",  "did",  "will",
      "would", "can", "could", "should", "may", "might", "their", "they", "them", "he",   "she",  "his",
      "her",  "i",    "my",   "me",   "you",  "your",  "we",    "our",  "also", "very",  "so",   "than",
      "then", "there", "which", "who", "whom", "what", "while", "into", "about", "such", "some", "any"};
  return words;
}

bool is_negation(const std::string& tok) {
  static const std::unordered_set<std::string> words = {"not", "no", "never", "none", "nor", "cannot", "without",
                                                        "neither", "nobody", "nothing"};
  if (words.contains(tok)) return true;
  return tok.size() > 3 && tok.ends_with("n't");
}

struct TokenProfile {
  std::unordered_set<std::string> content;
  std::size_t negations = 0;
};

TokenProfile profile(std::string_view s) {
  TokenProfile p;
  for (auto& tok : text::tokenize(s)) {
    if (is_negation(tok)) {
      ++p.negations;
    } else if (!stopwords().contains(tok)) {
      p.content.insert(std::move(tok));
    }
  }
  return p;
}

double recall(const std::unordered_set<std::string>& claim, const std::unordered_set<std::string>& premise) {
  if (claim.empty()) return 0.0;
  std::size_t hit = 0;
  for (const auto& t : claim) hit += premise.contains(t) ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(claim.size());
}

constexpr std::array<std::string_view, 4> kClauseJoins = {", and ", ", but ", ", while ", ", whereas "};

std::vector<std::string> split_clauses(const std::string& sentence) {
  std::vector<std::string> parts;
  std::string rest = sentence;
  while (true) {
    std::size_t best = std::string::npos;
    std::size_t best_len = 0;
    for (const auto sep : kClauseJoins) {
      const auto pos = rest.find(sep);
      if (pos < best) {
        best = pos;
        best_len = sep.size();
      }
    }
    if (const auto semi = rest.find("; "); semi < best) {
      best = semi;
      best_len = 2;
    }
    if (best == std::string::npos) break;
    const std::string left = text::trim(rest.substr(0, best));
    const std::string right = text::trim(rest.substr(best + best_len));
    // Only split independent clauses; short tails are usually list items.
    if (text::word_count(left) < 3 || text::word_count(right) < 3) break;
    parts.push_back(left);
    rest = right;
  }
  parts.push_back(text::trim(rest));
  return parts;
}

bool has_alpha(std::string_view s) {
  return std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalpha(c) != 0 || c >= 0x80; });
}

}  // namespace

std::vector<std::string> LexicalChecker::decompose(std::string_view response_text) const {
  std::vector<std::string> claims;
  for (const auto& sentence : text::split_sentences(response_text)) {
    for (auto& clause : split_clauses(sentence)) {
      if (has_alpha(clause)) claims.push_back(std::move(clause));
    }
  }
  return claims;
}

EntailmentLabel LexicalChecker::judge(const Claim& claim, const ResponseText& premise) const {
  const TokenProfile c = profile(claim.text);
  if (c.content.empty()) return EntailmentLabel::Neutral;
  if (recall(c.content, profile(premise.text).content) < thresholds_.entail_recall) return EntailmentLabel::Neutral;

  // Polarity is decided against the single best-matching premise sentence.
  double best = -1.0;
  std::size_t best_negations = 0;
  for (const auto& sentence : text::split_sentences(premise.text)) {
    const TokenProfile s = profile(sentence);
    const double r = recall(c.content, s.content);
    if (r > best) {
      best = r;
      best_negations = s.negations;
    }
  }
  return (c.negations + best_negations) % 2 == 1 ? EntailmentLabel::Contradiction : EntailmentLabel::Entailment;
}

// ---------------------------------------------------------------------------
// Oracle

OracleChecker::OracleChecker(std::shared_ptr<const ProvenanceRegistry> registry) : registry_(std::move(registry)) {
  if (!registry_) throw Error(ErrorCode::ConfigError, "oracle backend requires a provenance registry");
}

std::vector<std::string> OracleChecker::decompose(std::string_view response_text) const {
  return text::split_sentences(response_text);
}

std::optional<std::string> OracleChecker::provenance_of(std::string_view claim_text) const {
  if (auto tag = registry_->find(claim_text)) return tag->str();
  return std::nullopt;
}

EntailmentLabel OracleChecker::judge(const Claim& claim, const ResponseText& premise) const {
  if (!claim.provenance_tag) {
    throw Error(ErrorCode::MissingProvenance, "oracle backend cannot judge untagged claim " + claim.claim_id);
  }
  const ProvenanceTag tag = ProvenanceTag::parse(*claim.provenance_tag);
  std::vector<ProvenanceTag> premise_tags;
  for (const auto& sentence : text::split_sentences(premise.text)) {
    if (auto t = registry_->find(sentence)) premise_tags.push_back(*t);
  }
  return oracle_label(tag, premise_tags);
}

// ---------------------------------------------------------------------------
// Remote model

CheckerPrompts CheckerPrompts::defaults() {
  CheckerPrompts p;
  p.extract =
      "Decompose the response below into self-contained factual claims. Each claim must be a single declarative "
      "sentence that can be understood without the rest of the response. Reply with a JSON array of strings and "
      "nothing else.\n\nResponse:\n{response}";
  p.check =
      "Premise:\n{premise}\n\nClaim:\n{claim}\n\nIs the claim fully supported by the premise (entailment), in "
      "direct conflict with it (contradiction), or neither (neutral)? Reply with exactly one word: entailment, "
      "neutral, or contradiction.";
  p.reformat_extract = "Your previous reply was not a JSON array of strings. Reply again with only the JSON array.";
  p.reformat_check =
      "Your previous reply was not one of the allowed words. Reply with exactly one word: entailment, neutral, or "
      "contradiction.";
  return p;
}

struct RemoteChecker::Limiter {
  explicit Limiter(int n) : slots(n) {}
  std::counting_semaphore<1024> slots;
};

RemoteChecker::RemoteChecker(const CheckerBackendConfig& config)
    : client_(config.endpoint, config.retry),
      prompts_(config.prompts),
      limiter_(std::make_unique<Limiter>(std::clamp(config.max_parallel, 1, 1024))) {}

RemoteChecker::~RemoteChecker() = default;

std::string RemoteChecker::ask(const std::vector<http::ChatMessage>& messages) const {
  limiter_->slots.acquire();
  try {
    std::string reply = client_.complete(messages);
    limiter_->slots.release();
    return reply;
  } catch (const Error& e) {
    limiter_->slots.release();
    throw Error(ErrorCode::BackendUnavailable, e.what());
  }
}

namespace {

std::optional<std::vector<std::string>> parse_claim_array(const std::string& reply) {
  const auto open = reply.find('[');
  const auto close = reply.rfind(']');
  if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
  try {
    const auto arr = nlohmann::json::parse(reply.substr(open, close - open + 1));
    if (!arr.is_array()) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& item : arr) {
      if (!item.is_string()) return std::nullopt;
      std::string t = text::trim(item.get<std::string>());
      if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

std::optional<EntailmentLabel> parse_label_reply(const std::string& reply) {
  std::string word;
  for (char c : text::to_lower(text::trim(reply))) {
    if (std::isalpha(static_cast<unsigned char>(c))) word.push_back(c);
  }
  if (word == "entailment") return EntailmentLabel::Entailment;
  if (word == "neutral") return EntailmentLabel::Neutral;
  if (word == "contradiction") return EntailmentLabel::Contradiction;
  return std::nullopt;
}

}  // namespace

std::vector<std::string> RemoteChecker::decompose(std::string_view response_text) const {
  std::vector<http::ChatMessage> messages = {
      {"user", text::replace_all(prompts_.extract, "{response}", response_text)}};
  const std::string first = ask(messages);
  if (auto claims = parse_claim_array(first)) return *claims;
  messages.push_back({"assistant", first});
  messages.push_back({"user", prompts_.reformat_extract});
  if (auto claims = parse_claim_array(ask(messages))) return *claims;
  throw Error(ErrorCode::BackendUnavailable, "claim extractor did not return a JSON array after reformat request");
}

EntailmentLabel RemoteChecker::judge(const Claim& claim, const ResponseText& premise) const {
  const std::string prompt =
      text::replace_all(text::replace_all(prompts_.check, "{premise}", premise.text), "{claim}", claim.text);
  std::vector<http::ChatMessage> messages = {{"user", prompt}};
  const std::string first = ask(messages);
  if (auto label = parse_label_reply(first)) return *label;
  messages.push_back({"assistant", first});
  messages.push_back({"user", prompts_.reformat_check});
  if (auto label = parse_label_reply(ask(messages))) return *label;
  throw Error(ErrorCode::BackendUnavailable, "checker did not return a label after reformat request");
}

std::unique_ptr<EntailmentChecker> make_checker(const CheckerBackendConfig& config) {
  switch (config.kind) {
    case BackendKind::Oracle: return std::make_unique<OracleChecker>(config.registry);
    case BackendKind::LexicalHeuristic: return std::make_unique<LexicalChecker>(config.lexical);
    case BackendKind::RemoteModel: return std::make_unique<RemoteChecker>(config);
  }
  throw Error(ErrorCode::ConfigError, "unknown checker backend");
}

// ---------------------------------------------------------------------------
// Operations

ClaimSet extract_claims(const ResponseText& response, const EntailmentChecker& checker) {
  ClaimSet set;
  set.response_id = response.response_id;
  if (text::trim(response.text).empty()) {
    throw Error(ErrorCode::EmptyDecomposition, "response " + response.response_id + " is empty");
  }
  for (auto& piece : checker.decompose(response.text)) {
    std::string t = text::trim(piece);
    if (t.empty()) continue;
    Claim c;
    c.ordinal = set.claims.size();
    c.claim_id = response.response_id + "#" + std::to_string(c.ordinal);
    c.source_response_id = response.response_id;
    c.provenance_tag = checker.provenance_of(t);
    c.text = std::move(t);
    set.claims.push_back(std::move(c));
  }
  if (set.claims.empty()) {
    throw Error(ErrorCode::EmptyDecomposition, "no claims extracted from response " + response.response_id);
  }
  return set;
}

ClaimVerdict check_claim(const Claim& claim, const ResponseText& premise, const EntailmentChecker& checker) {
  if (claim.source_response_id == premise.response_id) {
    throw Error(ErrorCode::InvalidArgument, "claim " + claim.claim_id + " checked against its own response");
  }
  return ClaimVerdict{claim.claim_id, claim.source_response_id, premise.response_id, checker.judge(claim, premise)};
}

std::vector<ClaimVerdict> check_pair(const ClaimSet& c1, const ResponseText& r1, const ClaimSet& c2,
                                     const ResponseText& r2, const EntailmentChecker& checker) {
  if (c1.claims.empty() || c2.claims.empty()) {
    throw Error(ErrorCode::EmptyDecomposition, "check_pair requires non-empty claim sets");
  }
  std::vector<ClaimVerdict> verdicts;
  verdicts.reserve(c1.claims.size() + c2.claims.size());
  for (const auto& claim : c1.claims) verdicts.push_back(check_claim(claim, r2, checker));
  for (const auto& claim : c2.claims) verdicts.push_back(check_claim(claim, r1, checker));
  return verdicts;
}

}  // namespace fisco
