#include <doctest.h>

#include <atomic>
#include <chrono>
#include <thread>
#include <vector>

#include "fisco/entailment.hpp"
#include "fisco/errors.hpp"
#include "fisco/mock_model.hpp"
#include "fisco/synthgen.hpp"

using namespace fisco;

namespace {

Claim claim_of(const std::string& text, const std::string& source = "r1") {
  Claim c;
  c.claim_id = source + "#0";
  c.source_response_id = source;
  c.text = text;
  return c;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected fisco::Error");
  return ErrorCode::InvalidArgument;
}

CheckerBackendConfig remote_config(const mock::MockModelServer& server, int max_parallel = 4) {
  CheckerBackendConfig cfg;
  cfg.kind = BackendKind::RemoteModel;
  cfg.endpoint.base_url = server.base_url();
  cfg.endpoint.model_id = "checker";
  cfg.endpoint.api_key = "k";
  cfg.retry.max_attempts = 2;
  cfg.retry.base_delay = std::chrono::milliseconds(1);
  cfg.retry.max_delay = std::chrono::milliseconds(2);
  cfg.max_parallel = max_parallel;
  return cfg;
}

}  // namespace

TEST_CASE("label and backend names round-trip") {
  for (auto l : {EntailmentLabel::Entailment, EntailmentLabel::Neutral, EntailmentLabel::Contradiction}) {
    CHECK(parse_label(to_string(l)) == l);
  }
  for (auto k : {BackendKind::RemoteModel, BackendKind::Oracle, BackendKind::LexicalHeuristic}) {
    CHECK(parse_backend_kind(to_string(k)) == k);
  }
  CHECK(code_of([] { (void)parse_label("maybe"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { (void)parse_backend_kind("gpu"); }) == ErrorCode::ConfigError);
}

TEST_CASE("provenance tags parse and print") {
  const auto t = ProvenanceTag::parse("police-candidate/3/contra");
  CHECK(t.bank_id == "police-candidate");
  CHECK(t.entry == 3);
  CHECK(t.variant == Variant::Contradiction);
  CHECK(t.str() == "police-candidate/3/contra");
  CHECK(ProvenanceTag::parse("a/b/0/unrel").bank_id == "a/b");
  CHECK(code_of([] { (void)ProvenanceTag::parse("bank/x/base"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { (void)ProvenanceTag::parse("bank/1/other"); }) == ErrorCode::InvalidArgument);
  CHECK(code_of([] { (void)ProvenanceTag::parse("bank"); }) == ErrorCode::InvalidArgument);
}

TEST_CASE("oracle label table") {
  auto tag = [](std::size_t e, Variant v) { return ProvenanceTag{"b", e, v}; };
  const std::vector<ProvenanceTag> premise = {tag(0, Variant::Paraphrase), tag(1, Variant::Contradiction),
                                              tag(2, Variant::Unrelated)};
  CHECK(oracle_label(tag(0, Variant::Base), premise) == EntailmentLabel::Entailment);
  CHECK(oracle_label(tag(0, Variant::Contradiction), premise) == EntailmentLabel::Contradiction);
  CHECK(oracle_label(tag(1, Variant::Base), premise) == EntailmentLabel::Contradiction);
  CHECK(oracle_label(tag(1, Variant::Contradiction), premise) == EntailmentLabel::Entailment);
  CHECK(oracle_label(tag(2, Variant::Base), premise) == EntailmentLabel::Neutral);
  CHECK(oracle_label(tag(2, Variant::Unrelated), premise) == EntailmentLabel::Entailment);
  CHECK(oracle_label(tag(0, Variant::Unrelated), premise) == EntailmentLabel::Neutral);
  CHECK(oracle_label(tag(5, Variant::Base), premise) == EntailmentLabel::Neutral);
  // Same entry number in another bank is a different fact.
  const std::vector<ProvenanceTag> other = {ProvenanceTag{"c", 0, Variant::Base}};
  CHECK(oracle_label(tag(0, Variant::Base), other) == EntailmentLabel::Neutral);
}

TEST_CASE("registry rejects one text under two tags") {
  ProvenanceRegistry reg;
  reg.add("A sentence.", {"b", 0, Variant::Base});
  reg.add("A sentence.", {"b", 0, Variant::Base});
  CHECK(reg.size() == 1);
  CHECK(code_of([&] { reg.add("A sentence.", {"b", 1, Variant::Base}); }) == ErrorCode::InvalidArgument);
  CHECK_FALSE(reg.find("Missing.").has_value());
}

TEST_CASE("lexical checker labels") {
  const LexicalChecker lex;
  const ResponseText premise{"r2", "Dana has 5 years experience as a guard. She enjoys hiking on weekends."};
  CHECK(lex.judge(claim_of("Dana has 5 years experience."), premise) == EntailmentLabel::Entailment);
  CHECK(lex.judge(claim_of("Dana does not have 5 years experience."), premise) == EntailmentLabel::Contradiction);
  CHECK(lex.judge(claim_of("The budget was approved by the council."), premise) == EntailmentLabel::Neutral);

  const ResponseText negated{"r2", "The candidate is not reliable."};
  CHECK(lex.judge(claim_of("The candidate is reliable."), negated) == EntailmentLabel::Contradiction);
  CHECK(lex.judge(claim_of("The candidate isn't reliable."), negated) == EntailmentLabel::Entailment);
  // Stopword-only claims carry no content.
  CHECK(lex.judge(claim_of("It is what it is."), premise) == EntailmentLabel::Neutral);
}

TEST_CASE("lexical decomposition splits sentences and independent clauses") {
  const LexicalChecker lex;
  const auto claims = lex.decompose("She is kind to everyone, and she works hard every day. He left.");
  REQUIRE(claims.size() == 3);
  CHECK(claims[0] == "She is kind to everyone");
  CHECK(claims[1] == "she works hard every day.");
  CHECK(claims[2] == "He left.");
  // Short list tails stay attached.
  CHECK(lex.decompose("He likes tea, and coffee.").size() == 1);
  CHECK(lex.decompose("1. 2. 3.").empty());
  CHECK(lex.decompose("Same text. Same text.") == lex.decompose("Same text. Same text."));
}

TEST_CASE("extract_claims numbering and empty input") {
  const LexicalChecker lex;
  const auto set = extract_claims({"resp", "First claim here. Second claim here."}, lex);
  REQUIRE(set.claims.size() == 2);
  CHECK(set.response_id == "resp");
  CHECK(set.claims[1].claim_id == "resp#1");
  CHECK(set.claims[1].ordinal == 1);
  CHECK(set.claims[1].source_response_id == "resp");
  CHECK_FALSE(set.claims[0].provenance_tag.has_value());
  CHECK(code_of([&] { (void)extract_claims({"e", "   "}, lex); }) == ErrorCode::EmptyDecomposition);
  CHECK(code_of([&] { (void)extract_claims({"e", "1. 2."}, lex); }) == ErrorCode::EmptyDecomposition);
}

TEST_CASE("oracle checker on synthetic edits") {
  const auto& bank = synth::find_bank(synth::builtin_claim_banks(), "police-candidate");
  const auto registry = synth::make_registry(synth::builtin_claim_banks());
  const OracleChecker oracle(registry);
  const std::vector<std::size_t> entries = {0, 1, 2, 3, 4, 5};
  const auto original = synth::make_original(bank, entries, "orig");

  SUBCASE("delete one claim") {
    const std::vector<synth::OpApplication> ops = {{synth::ModOp::Delete, 2}};
    const auto pair = synth::apply_ops(original, bank, ops, "mod");
    const auto c1 = extract_claims(pair.original.as_response(), oracle);
    const auto c2 = extract_claims(pair.modified.as_response(), oracle);
    REQUIRE(c1.claims.size() == 6);
    REQUIRE(c2.claims.size() == 5);
    for (std::size_t i = 0; i < c1.claims.size(); ++i) {
      CHECK(c1.claims[i].provenance_tag == original.claims[i].tag.str());
    }
    const auto v = check_pair(c2, pair.modified.as_response(), c1, pair.original.as_response(), oracle);
    REQUIRE(v.size() == 11);
    std::size_t e = 0, n = 0;
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(v[i].source_response_id == "mod");
      CHECK(v[i].premise_response_id == "orig");
      e += v[i].label == EntailmentLabel::Entailment;
    }
    for (std::size_t i = 5; i < 11; ++i) {
      CHECK(v[i].premise_response_id == "mod");
      n += v[i].label == EntailmentLabel::Neutral;
    }
    CHECK(e == 5);
    CHECK(n == 1);
    CHECK(v[7].label == EntailmentLabel::Neutral);
  }

  SUBCASE("contradict one claim") {
    const std::vector<synth::OpApplication> ops = {{synth::ModOp::Contradict, 4}};
    const auto pair = synth::apply_ops(original, bank, ops, "mod");
    const auto c1 = extract_claims(pair.original.as_response(), oracle);
    const auto c2 = extract_claims(pair.modified.as_response(), oracle);
    const auto v = check_pair(c1, pair.original.as_response(), c2, pair.modified.as_response(), oracle);
    REQUIRE(v.size() == 12);
    std::size_t e = 0, c = 0;
    for (const auto& x : v) {
      e += x.label == EntailmentLabel::Entailment;
      c += x.label == EntailmentLabel::Contradiction;
    }
    CHECK(e == 10);
    CHECK(c == 2);
    for (std::size_t i = 0; i < 6; ++i) CHECK(v[i].label == pair.labels_original_to_modified[i]);
    for (std::size_t i = 0; i < 6; ++i) CHECK(v[6 + i].label == pair.labels_modified_to_original[i]);
  }

  SUBCASE("untagged claim") {
    const auto set = extract_claims({"x", "This sentence is in no bank."}, oracle);
    CHECK(code_of([&] { (void)check_claim(set.claims[0], original.as_response(), oracle); }) ==
          ErrorCode::MissingProvenance);
  }

  SUBCASE("claim against its own response") {
    const auto set = extract_claims(original.as_response(), oracle);
    CHECK(code_of([&] { (void)check_claim(set.claims[0], original.as_response(), oracle); }) ==
          ErrorCode::InvalidArgument);
  }

  CHECK(code_of([] { OracleChecker bad(nullptr); }) == ErrorCode::ConfigError);
}

TEST_CASE("remote checker parses, reformats and fails cleanly") {
  std::atomic<int> mode{0};
  mock::MockModelServer server([&](const std::string&, const std::string& prompt, std::size_t) -> mock::Reply {
    const bool reformat = prompt.starts_with("Your previous reply");
    switch (mode.load()) {
      case 0:
        if (prompt.find("Claim:") != std::string::npos) return {200, " Contradiction.\n"};
        return {200, "Here you go: [\"Claim one.\", \" \", \"Claim two.\"]"};
      case 1:
        if (!reformat) return {200, "I think there are two claims."};
        return {200, "[\"Only claim.\"]"};
      case 2: return {200, "not an answer"};
      default: return {500, "boom"};
    }
  });
  const auto cfg = remote_config(server);
  const auto checker = make_checker(cfg);
  CHECK(checker->kind() == BackendKind::RemoteModel);

  mode = 0;
  CHECK(checker->decompose("whatever") == std::vector<std::string>{"Claim one.", "Claim two."});
  CHECK(checker->judge(claim_of("x"), {"r2", "y"}) == EntailmentLabel::Contradiction);

  mode = 1;
  const auto before = server.requests();
  CHECK(checker->decompose("whatever") == std::vector<std::string>{"Only claim."});
  CHECK(server.requests() - before == 2);

  mode = 2;
  CHECK(code_of([&] { (void)checker->decompose("t"); }) == ErrorCode::BackendUnavailable);
  CHECK(code_of([&] { (void)checker->judge(claim_of("x"), {"r2", "y"}); }) == ErrorCode::BackendUnavailable);

  mode = 3;
  CHECK(code_of([&] { (void)checker->judge(claim_of("x"), {"r2", "y"}); }) == ErrorCode::BackendUnavailable);
}

TEST_CASE("remote checker respects max_parallel") {
  mock::MockModelServer server(
      [](const std::string&, const std::string&, std::size_t) -> mock::Reply { return {200, "neutral"}; },
      std::chrono::milliseconds(40));
  const auto checker = make_checker(remote_config(server, 2));
  std::vector<std::jthread> threads;
  for (int i = 0; i < 6; ++i) {
    threads.emplace_back([&, i] {
      CHECK(checker->judge(claim_of("c" + std::to_string(i)), {"r2", "p"}) == EntailmentLabel::Neutral);
    });
  }
  threads.clear();
  CHECK(server.requests() == 6);
  CHECK(server.max_in_flight() <= 2);
  CHECK(server.max_in_flight() >= 1);
}
