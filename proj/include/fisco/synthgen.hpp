#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "fisco/entailment.hpp"
#include "fisco/similarity.hpp"

namespace fisco::synth {

struct ClaimBankEntry {
  std::string base;
  std::string paraphrase;
  std::string contradiction;
  std::string unrelated;

  [[nodiscard]] const std::string& text(Variant v) const;
};

struct ClaimBank {
  std::string bank_id;
  std::string topic;
  std::vector<ClaimBankEntry> entries;

  /// At least 6 entries; the four texts of an entry pairwise distinct.
  void validate() const;
};

std::vector<ClaimBank> parse_claim_banks(std::string_view json_text);
const std::vector<ClaimBank>& builtin_claim_banks();
const ClaimBank& find_bank(std::span<const ClaimBank> banks, std::string_view bank_id);

/// Registers every text of every bank. Throws if two banks share a text.
std::shared_ptr<const ProvenanceRegistry> make_registry(std::span<const ClaimBank> banks);

// ---------------------------------------------------------------------------
// Modified responses with known claim-level ground truth

enum class ModOp { Delete, Contradict, Paraphrase, MakeUnrelated, AddUnrelated, AddSimilar };
inline constexpr std::array<ModOp, 6> kAllOps = {ModOp::Delete,        ModOp::Contradict,   ModOp::Paraphrase,
                                                 ModOp::MakeUnrelated, ModOp::AddUnrelated, ModOp::AddSimilar};

std::string_view to_string(ModOp op) noexcept;
ModOp parse_mod_op(std::string_view s);

struct OpApplication {
  ModOp op = ModOp::Paraphrase;
  std::size_t index = 0;
};

struct SynthClaim {
  std::string text;
  ProvenanceTag tag;
};

struct SynthResponse {
  std::string response_id;
  std::vector<SynthClaim> claims;

  /// Claims joined by single spaces.
  [[nodiscard]] std::string text() const;
  [[nodiscard]] ResponseText as_response() const { return {response_id, text()}; }
};

struct SynthPair {
  SynthResponse original;
  SynthResponse modified;
  std::vector<OpApplication> ops;
  /// One label per original claim, judged against the modified response.
  std::vector<EntailmentLabel> labels_original_to_modified;
  /// One label per modified claim, judged against the original response.
  std::vector<EntailmentLabel> labels_modified_to_original;

  [[nodiscard]] LabelCounts true_counts() const;
  [[nodiscard]] double true_similarity(const WeightConfig& weights) const;
};

/// Base-variant response over the given bank entries, in order.
SynthResponse make_original(const ClaimBank& bank, std::span<const std::size_t> entries, std::string response_id);

/// Applies `ops` to `original` (whose claims must all be base variants of
/// `bank`). Replacements stay in place; AddUnrelated/AddSimilar append to the
/// bottom in index order. Labels are recorded from the operation semantics.
SynthPair apply_ops(const SynthResponse& original, const ClaimBank& bank, std::span<const OpApplication> ops,
                    std::string modified_id);

/// Original of `n_claims` seeded-random bank entries, then `apply_ops`.
SynthPair synth_pair(const ClaimBank& bank, std::size_t n_claims, std::span<const OpApplication> ops,
                     std::uint64_t seed, const std::string& id_prefix = "pair");

// ---------------------------------------------------------------------------
// Triples

enum class Closer { R2Closer, R3Closer, Tie };
std::string_view to_string(Closer c) noexcept;
Closer parse_closer(std::string_view s);

inline constexpr double kGoldTieEpsilon = 1e-9;

struct TripleCase {
  std::string case_id;
  std::string bank_id;
  SynthResponse reference;
  SynthPair pair2;  // reference -> candidate 2
  SynthPair pair3;  // reference -> candidate 3
  WeightConfig gold_weights;
  Closer gold = Closer::Tie;

  [[nodiscard]] const SynthResponse& candidate2() const { return pair2.modified; }
  [[nodiscard]] const SynthResponse& candidate3() const { return pair3.modified; }
};

/// Gold = argmax of true similarity to the reference, Tie within `tie_epsilon`.
Closer gold_closer(double sim2, double sim3, double tie_epsilon = kGoldTieEpsilon);

TripleCase make_triple(std::string case_id, const ClaimBank& bank, std::span<const std::size_t> entries,
                       std::span<const OpApplication> ops2, std::span<const OpApplication> ops3,
                       const WeightConfig& weights = {});

struct TripleOptions {
  std::size_t min_claims = 6;
  std::size_t max_claims = 8;
  std::size_t max_ops = 3;
  WeightConfig weights;
};

/// Random reference plus two independently modified candidates, each with
/// 1..max_ops operations; the three texts are distinct.
TripleCase synth_triple(const ClaimBank& bank, std::uint64_t seed, const TripleOptions& options = {},
                        const std::string& case_id = "");

// ---------------------------------------------------------------------------
// Group-level cases

enum class PairingKind { Inter, Intra };
std::string_view to_string(PairingKind k) noexcept;
PairingKind parse_pairing_kind(std::string_view s);

struct Pairing {
  std::size_t first = 0;
  std::size_t second = 0;
  PairingKind truth = PairingKind::Intra;
};

/// Sets 0 and 1 share a persona; set 2 uses the other persona. `truth` is the
/// kind when set 2 actually diverges; see `pairing_truth`.
inline constexpr std::array<Pairing, 3> kPairings = {{
    {0, 1, PairingKind::Intra},
    {0, 2, PairingKind::Inter},
    {1, 2, PairingKind::Inter},
}};

/// Within-set variation. Every claim slot is stated as the base or the
/// paraphrase text; `add_similar` appends a restatement of an affirmed slot;
/// `stance_flip` occasionally states the opposite of the persona's position,
/// which is what makes similarity scores vary from pair to pair.
struct GroupNoise {
  double paraphrase = 0.5;
  double add_similar = 0.2;
  double stance_flip = 0.1;
};

struct GroupCase {
  std::string case_id;
  std::string bank_id;
  std::size_t k = 0;
  double delta = 0.0;
  /// Slots whose default stance is reversed for set 2 (ceil(delta * n) of them).
  std::vector<std::size_t> divergent_slots;
  std::array<std::vector<SynthResponse>, 3> sets;
};

/// Inter only when the pairing crosses personas and the personas differ in at
/// least one slot; with delta = 0 every pairing is Intra.
PairingKind pairing_truth(const GroupCase& c, const Pairing& p);

GroupCase synth_group_case(const ClaimBank& bank, std::size_t k, double delta, std::uint64_t seed,
                           const GroupNoise& noise = {}, const std::string& case_id = "");

// ---------------------------------------------------------------------------
// Serialization (synth_cases.jsonl / synth_triples.jsonl records)

nlohmann::json to_json(const SynthResponse& r);
SynthResponse response_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthPair& p);
SynthPair pair_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TripleCase& t);
TripleCase triple_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroupCase& c);
GroupCase group_case_from_json(const nlohmann::json& j);

}  // namespace fisco::synth
