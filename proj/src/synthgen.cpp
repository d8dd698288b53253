#include "fisco/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "embedded_data.hpp"
#include "fisco/errors.hpp"
#include "fisco/random.hpp"

namespace fisco::synth {

using json = nlohmann::json;

const std::string& ClaimBankEntry::text(Variant v) const {
  switch (v) {
    case Variant::Base: return base;
    case Variant::Paraphrase: return paraphrase;
    case Variant::Contradiction: return contradiction;
    case Variant::Unrelated: return unrelated;
  }
  return base;
}

void ClaimBank::validate() const {
  if (bank_id.empty() || bank_id.find('/') != std::string::npos) {
    throw Error(ErrorCode::ConfigError, "claim bank id must be non-empty and contain no '/'");
  }
  if (entries.size() < 6) {
    throw Error(ErrorCode::ConfigError, "claim bank " + bank_id + " needs at least 6 entries");
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::set<std::string> distinct = {e.base, e.paraphrase, e.contradiction, e.unrelated};
    if (distinct.size() != 4 || distinct.contains("")) {
      throw Error(ErrorCode::ConfigError,
                  "claim bank " + bank_id + " entry " + std::to_string(i) + " needs four distinct non-empty texts");
    }
  }
}

std::vector<ClaimBank> parse_claim_banks(std::string_view json_text) {
  try {
    const json doc = json::parse(json_text);
    std::vector<ClaimBank> banks;
    for (const auto& b : doc.at("banks")) {
      ClaimBank bank;
      bank.bank_id = b.at("bank_id").get<std::string>();
      bank.topic = b.value("topic", "");
      for (const auto& e : b.at("entries")) {
        bank.entries.push_back({e.at("base").get<std::string>(), e.at("paraphrase").get<std::string>(),
                                e.at("contradiction").get<std::string>(), e.at("unrelated").get<std::string>()});
      }
      bank.validate();
      banks.push_back(std::move(bank));
    }
    return banks;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("claim banks: ") + e.what());
  }
}

const std::vector<ClaimBank>& builtin_claim_banks() {
  static const std::vector<ClaimBank> banks = parse_claim_banks(data::kClaimBanks);
  return banks;
}

const ClaimBank& find_bank(std::span<const ClaimBank> banks, std::string_view bank_id) {
  for (const auto& b : banks) {
    if (b.bank_id == bank_id) return b;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown claim bank '" + std::string(bank_id) + "'");
}

std::shared_ptr<const ProvenanceRegistry> make_registry(std::span<const ClaimBank> banks) {
  auto registry = std::make_shared<ProvenanceRegistry>();
  for (const auto& bank : banks) {
    for (std::size_t i = 0; i < bank.entries.size(); ++i) {
      for (auto v : {Variant::Base, Variant::Paraphrase, Variant::Contradiction, Variant::Unrelated}) {
        registry->add(bank.entries[i].text(v), ProvenanceTag{bank.bank_id, i, v});
      }
    }
  }
  return registry;
}

// ---------------------------------------------------------------------------

std::string_view to_string(ModOp op) noexcept {
  switch (op) {
    case ModOp::Delete: return "delete";
    case ModOp::Contradict: return "contradict";
    case ModOp::Paraphrase: return "paraphrase";
    case ModOp::MakeUnrelated: return "make_unrelated";
    case ModOp::AddUnrelated: return "add_unrelated";
    case ModOp::AddSimilar: return "add_similar";
  }
  return "paraphrase";
}

ModOp parse_mod_op(std::string_view s) {
  for (auto op : kAllOps) {
    if (to_string(op) == s) return op;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown modification op '" + std::string(s) + "'");
}

std::string SynthResponse::text() const {
  std::string out;
  for (const auto& c : claims) {
    if (!out.empty()) out.push_back(' ');
    out += c.text;
  }
  return out;
}

LabelCounts SynthPair::true_counts() const {
  LabelCounts counts;
  for (const auto* labels : {&labels_original_to_modified, &labels_modified_to_original}) {
    for (auto l : *labels) {
      switch (l) {
        case EntailmentLabel::Entailment: ++counts.c_e; break;
        case EntailmentLabel::Neutral: ++counts.c_n; break;
        case EntailmentLabel::Contradiction: ++counts.c_c; break;
      }
    }
  }
  return counts;
}

double SynthPair::true_similarity(const WeightConfig& weights) const {
  return score_similarity(true_counts(), weights);
}

SynthResponse make_original(const ClaimBank& bank, std::span<const std::size_t> entries, std::string response_id) {
  SynthResponse r;
  r.response_id = std::move(response_id);
  for (auto e : entries) {
    if (e >= bank.entries.size()) throw Error(ErrorCode::IndexOutOfRange, "bank entry " + std::to_string(e));
    r.claims.push_back({bank.entries[e].base, ProvenanceTag{bank.bank_id, e, Variant::Base}});
  }
  return r;
}

SynthPair apply_ops(const SynthResponse& original, const ClaimBank& bank, std::span<const OpApplication> ops,
                    std::string modified_id) {
  const std::size_t n = original.claims.size();
  std::map<std::size_t, ModOp> by_index;
  for (const auto& o : ops) {
    if (o.index >= n) {
      throw Error(ErrorCode::IndexOutOfRange,
                  "op index " + std::to_string(o.index) + " outside a response of " + std::to_string(n) + " claims");
    }
    if (!by_index.emplace(o.index, o.op).second) {
      throw Error(ErrorCode::ConflictingOps, "more than one op targets claim " + std::to_string(o.index));
    }
  }
  for (const auto& c : original.claims) {
    if (c.tag.bank_id != bank.bank_id || c.tag.variant != Variant::Base) {
      throw Error(ErrorCode::InvalidArgument, "original claims must be base variants of bank " + bank.bank_id);
    }
  }

  SynthPair pair;
  pair.original = original;
  pair.ops.assign(ops.begin(), ops.end());
  pair.modified.response_id = std::move(modified_id);

  using L = EntailmentLabel;
  std::vector<SynthClaim> appended;
  std::vector<L> appended_labels;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& claim = original.claims[i];
    const auto& entry = bank.entries[claim.tag.entry];
    auto variant_of = [&](Variant v) { return SynthClaim{entry.text(v), ProvenanceTag{bank.bank_id, claim.tag.entry, v}}; };

    const auto it = by_index.find(i);
    if (it == by_index.end()) {
      pair.modified.claims.push_back(claim);
      pair.labels_original_to_modified.push_back(L::Entailment);
      pair.labels_modified_to_original.push_back(L::Entailment);
      continue;
    }
    switch (it->second) {
      case ModOp::Delete:
        pair.labels_original_to_modified.push_back(L::Neutral);
        break;
      case ModOp::Contradict:
        pair.modified.claims.push_back(variant_of(Variant::Contradiction));
        pair.labels_original_to_modified.push_back(L::Contradiction);
        pair.labels_modified_to_original.push_back(L::Contradiction);
        break;
      case ModOp::Paraphrase:
        pair.modified.claims.push_back(variant_of(Variant::Paraphrase));
        pair.labels_original_to_modified.push_back(L::Entailment);
        pair.labels_modified_to_original.push_back(L::Entailment);
        break;
      case ModOp::MakeUnrelated:
        pair.modified.claims.push_back(variant_of(Variant::Unrelated));
        pair.labels_original_to_modified.push_back(L::Neutral);
        pair.labels_modified_to_original.push_back(L::Neutral);
        break;
      case ModOp::AddUnrelated:
        pair.modified.claims.push_back(claim);
        pair.labels_original_to_modified.push_back(L::Entailment);
        pair.labels_modified_to_original.push_back(L::Entailment);
        appended.push_back(variant_of(Variant::Unrelated));
        appended_labels.push_back(L::Neutral);
        break;
      case ModOp::AddSimilar:
        pair.modified.claims.push_back(claim);
        pair.labels_original_to_modified.push_back(L::Entailment);
        pair.labels_modified_to_original.push_back(L::Entailment);
        appended.push_back(variant_of(Variant::Paraphrase));
        appended_labels.push_back(L::Entailment);
        break;
    }
  }
  for (std::size_t j = 0; j < appended.size(); ++j) {
    pair.modified.claims.push_back(std::move(appended[j]));
    pair.labels_modified_to_original.push_back(appended_labels[j]);
  }
  if (pair.modified.claims.empty()) {
    throw Error(ErrorCode::ConflictingOps, "operations delete every claim of the response");
  }
  return pair;
}

namespace {

std::vector<std::size_t> pick_entries(const ClaimBank& bank, std::size_t n, Rng& rng) {
  if (n < 1 || n > bank.entries.size()) {
    throw Error(ErrorCode::IndexOutOfRange, "cannot draw " + std::to_string(n) + " claims from bank " +
                                                bank.bank_id + " of " + std::to_string(bank.entries.size()));
  }
  std::vector<std::size_t> idx(bank.entries.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  rng.shuffle(idx);
  idx.resize(n);
  return idx;
}

std::vector<OpApplication> random_ops(std::size_t n_claims, std::size_t max_ops, Rng& rng) {
  const std::size_t m = 1 + rng.below(std::min(max_ops, n_claims));
  std::vector<std::size_t> positions(n_claims);
  for (std::size_t i = 0; i < n_claims; ++i) positions[i] = i;
  rng.shuffle(positions);
  std::vector<OpApplication> ops;
  for (std::size_t j = 0; j < m; ++j) ops.push_back({kAllOps[rng.below(kAllOps.size())], positions[j]});
  std::sort(ops.begin(), ops.end(), [](const auto& a, const auto& b) { return a.index < b.index; });
  return ops;
}

}  // namespace

SynthPair synth_pair(const ClaimBank& bank, std::size_t n_claims, std::span<const OpApplication> ops,
                     std::uint64_t seed, const std::string& id_prefix) {
  Rng rng(seed);
  const auto entries = pick_entries(bank, n_claims, rng);
  return apply_ops(make_original(bank, entries, id_prefix + "/original"), bank, ops, id_prefix + "/modified");
}

// ---------------------------------------------------------------------------

std::string_view to_string(Closer c) noexcept {
  switch (c) {
    case Closer::R2Closer: return "r2_closer";
    case Closer::R3Closer: return "r3_closer";
    case Closer::Tie: return "tie";
  }
  return "tie";
}

Closer parse_closer(std::string_view s) {
  for (auto c : {Closer::R2Closer, Closer::R3Closer, Closer::Tie}) {
    if (to_string(c) == s) return c;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown closer label '" + std::string(s) + "'");
}

Closer gold_closer(double sim2, double sim3, double tie_epsilon) {
  if (std::fabs(sim2 - sim3) < tie_epsilon) return Closer::Tie;
  return sim2 > sim3 ? Closer::R2Closer : Closer::R3Closer;
}

TripleCase make_triple(std::string case_id, const ClaimBank& bank, std::span<const std::size_t> entries,
                       std::span<const OpApplication> ops2, std::span<const OpApplication> ops3,
                       const WeightConfig& weights) {
  weights.validate();
  TripleCase t;
  t.case_id = std::move(case_id);
  t.bank_id = bank.bank_id;
  t.reference = make_original(bank, entries, t.case_id + "/r1");
  t.pair2 = apply_ops(t.reference, bank, ops2, t.case_id + "/r2");
  t.pair3 = apply_ops(t.reference, bank, ops3, t.case_id + "/r3");
  t.gold_weights = weights;
  t.gold = gold_closer(t.pair2.true_similarity(weights), t.pair3.true_similarity(weights));
  return t;
}

TripleCase synth_triple(const ClaimBank& bank, std::uint64_t seed, const TripleOptions& options,
                        const std::string& case_id) {
  if (options.min_claims < 1 || options.min_claims > options.max_claims || options.max_ops < 1) {
    throw Error(ErrorCode::InvalidArgument, "invalid triple options");
  }
  Rng rng(seed);
  const std::size_t max_claims = std::min(options.max_claims, bank.entries.size());
  if (options.min_claims > max_claims) {
    throw Error(ErrorCode::IndexOutOfRange, "bank " + bank.bank_id + " is too small for the requested triples");
  }
  const std::size_t n = options.min_claims + rng.below(max_claims - options.min_claims + 1);
  const auto entries = pick_entries(bank, n, rng);
  const std::string id = case_id.empty() ? bank.bank_id + "/triple-" + std::to_string(seed) : case_id;

  for (int attempt = 0; attempt < 64; ++attempt) {
    const auto ops2 = random_ops(n, options.max_ops, rng);
    const auto ops3 = random_ops(n, options.max_ops, rng);
    TripleCase t = make_triple(id, bank, entries, ops2, ops3, options.weights);
    const std::string r1 = t.reference.text();
    const std::string r2 = t.candidate2().text();
    const std::string r3 = t.candidate3().text();
    if (r1 != r2 && r1 != r3 && r2 != r3) return t;
  }
  throw Error(ErrorCode::InvalidArgument, "could not draw three distinct texts for triple " + id);
}

// ---------------------------------------------------------------------------

std::string_view to_string(PairingKind k) noexcept { return k == PairingKind::Inter ? "inter" : "intra"; }

PairingKind parse_pairing_kind(std::string_view s) {
  if (s == "inter") return PairingKind::Inter;
  if (s == "intra") return PairingKind::Intra;
  throw Error(ErrorCode::InvalidArgument, "unknown pairing kind '" + std::string(s) + "'");
}

PairingKind pairing_truth(const GroupCase& c, const Pairing& p) {
  return p.truth == PairingKind::Inter && !c.divergent_slots.empty() ? PairingKind::Inter : PairingKind::Intra;
}

GroupCase synth_group_case(const ClaimBank& bank, std::size_t k, double delta, std::uint64_t seed,
                           const GroupNoise& noise, const std::string& case_id) {
  if (k < 2) throw Error(ErrorCode::GroupTooSmall, "group cases need k >= 2");
  if (!(delta >= 0.0 && delta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "delta must lie in [0, 1]");

  Rng rng(seed);
  GroupCase gc;
  gc.case_id = case_id.empty() ? bank.bank_id + "/group-" + std::to_string(seed) : case_id;
  gc.bank_id = bank.bank_id;
  gc.k = k;
  gc.delta = delta;

  const std::size_t n = bank.entries.size();
  const auto n_divergent = static_cast<std::size_t>(std::ceil(delta * static_cast<double>(n) - 1e-12));
  std::vector<std::size_t> slots(n);
  for (std::size_t i = 0; i < n; ++i) slots[i] = i;
  rng.shuffle(slots);
  gc.divergent_slots.assign(slots.begin(), slots.begin() + static_cast<std::ptrdiff_t>(n_divergent));
  std::sort(gc.divergent_slots.begin(), gc.divergent_slots.end());
  const std::set<std::size_t> divergent(gc.divergent_slots.begin(), gc.divergent_slots.end());

  for (std::size_t s = 0; s < 3; ++s) {
    for (std::size_t i = 0; i < k; ++i) {
      SynthResponse r;
      r.response_id = gc.case_id + "/s" + std::to_string(s) + "/" + std::to_string(i);
      std::vector<SynthClaim> extras;
      for (std::size_t slot = 0; slot < n; ++slot) {
        bool affirm = !(s == 2 && divergent.contains(slot));
        if (rng.bernoulli(noise.stance_flip)) affirm = !affirm;
        const auto& entry = bank.entries[slot];
        if (!affirm) {
          r.claims.push_back({entry.contradiction, ProvenanceTag{bank.bank_id, slot, Variant::Contradiction}});
          continue;
        }
        const Variant v = rng.bernoulli(noise.paraphrase) ? Variant::Paraphrase : Variant::Base;
        r.claims.push_back({entry.text(v), ProvenanceTag{bank.bank_id, slot, v}});
        if (rng.bernoulli(noise.add_similar)) {
          const Variant other = v == Variant::Base ? Variant::Paraphrase : Variant::Base;
          extras.push_back({entry.text(other), ProvenanceTag{bank.bank_id, slot, other}});
        }
      }
      for (auto& e : extras) r.claims.push_back(std::move(e));
      gc.sets[s].push_back(std::move(r));
    }
  }
  return gc;
}

// ---------------------------------------------------------------------------

json to_json(const SynthResponse& r) {
  json claims = json::array();
  for (const auto& c : r.claims) claims.push_back({{"text", c.text}, {"tag", c.tag.str()}});
  return {{"response_id", r.response_id}, {"text", r.text()}, {"claims", claims}};
}

SynthResponse response_from_json(const json& j) {
  SynthResponse r;
  r.response_id = j.at("response_id").get<std::string>();
  for (const auto& c : j.at("claims")) {
    r.claims.push_back({c.at("text").get<std::string>(), ProvenanceTag::parse(c.at("tag").get<std::string>())});
  }
  return r;
}

namespace {

json labels_json(const std::vector<EntailmentLabel>& labels) {
  json out = json::array();
  for (auto l : labels) out.push_back(std::string(to_string(l)));
  return out;
}

std::vector<EntailmentLabel> labels_from(const json& j) {
  std::vector<EntailmentLabel> out;
  for (const auto& l : j) out.push_back(parse_label(l.get<std::string>()));
  return out;
}

json weights_json(const WeightConfig& w) { return {{"alpha", w.alpha}, {"beta", w.beta}, {"gamma", w.gamma}}; }

}  // namespace

json to_json(const SynthPair& p) {
  json ops = json::array();
  for (const auto& o : p.ops) ops.push_back({{"op", std::string(to_string(o.op))}, {"index", o.index}});
  const LabelCounts c = p.true_counts();
  return {{"original", to_json(p.original)},
          {"modified", to_json(p.modified)},
          {"ops", ops},
          {"labels_original_to_modified", labels_json(p.labels_original_to_modified)},
          {"labels_modified_to_original", labels_json(p.labels_modified_to_original)},
          {"true_counts", {{"c_e", c.c_e}, {"c_n", c.c_n}, {"c_c", c.c_c}}}};
}

SynthPair pair_from_json(const json& j) {
  SynthPair p;
  p.original = response_from_json(j.at("original"));
  p.modified = response_from_json(j.at("modified"));
  for (const auto& o : j.at("ops")) {
    p.ops.push_back({parse_mod_op(o.at("op").get<std::string>()), o.at("index").get<std::size_t>()});
  }
  p.labels_original_to_modified = labels_from(j.at("labels_original_to_modified"));
  p.labels_modified_to_original = labels_from(j.at("labels_modified_to_original"));
  return p;
}

json to_json(const TripleCase& t) {
  return {{"case_id", t.case_id},
          {"bank_id", t.bank_id},
          {"reference", to_json(t.reference)},
          {"pair2", to_json(t.pair2)},
          {"pair3", to_json(t.pair3)},
          {"gold_weights", weights_json(t.gold_weights)},
          {"true_similarity2", t.pair2.true_similarity(t.gold_weights)},
          {"true_similarity3", t.pair3.true_similarity(t.gold_weights)},
          {"gold", std::string(to_string(t.gold))}};
}

TripleCase triple_from_json(const json& j) {
  TripleCase t;
  t.case_id = j.at("case_id").get<std::string>();
  t.bank_id = j.at("bank_id").get<std::string>();
  t.reference = response_from_json(j.at("reference"));
  t.pair2 = pair_from_json(j.at("pair2"));
  t.pair3 = pair_from_json(j.at("pair3"));
  const auto& w = j.at("gold_weights");
  t.gold_weights = {w.at("alpha").get<double>(), w.at("beta").get<double>(), w.at("gamma").get<double>()};
  t.gold = parse_closer(j.at("gold").get<std::string>());
  return t;
}

json to_json(const GroupCase& c) {
  json sets = json::array();
  for (const auto& set : c.sets) {
    json responses = json::array();
    for (const auto& r : set) responses.push_back(to_json(r));
    sets.push_back(responses);
  }
  json pairings = json::array();
  for (const auto& p : kPairings) {
    pairings.push_back(
        {{"first", p.first}, {"second", p.second}, {"truth", std::string(to_string(pairing_truth(c, p)))}});
  }
  return {{"case_id", c.case_id},      {"bank_id", c.bank_id}, {"k", c.k},
          {"delta", c.delta},          {"divergent_slots", c.divergent_slots},
          {"pairings", pairings},      {"sets", sets}};
}

GroupCase group_case_from_json(const json& j) {
  GroupCase c;
  c.case_id = j.at("case_id").get<std::string>();
  c.bank_id = j.at("bank_id").get<std::string>();
  c.k = j.at("k").get<std::size_t>();
  c.delta = j.at("delta").get<double>();
  c.divergent_slots = j.at("divergent_slots").get<std::vector<std::size_t>>();
  const auto& sets = j.at("sets");
  if (sets.size() != 3) throw Error(ErrorCode::InvalidArgument, "group case " + c.case_id + " needs three sets");
  for (std::size_t s = 0; s < 3; ++s) {
    for (const auto& r : sets.at(s)) c.sets[s].push_back(response_from_json(r));
  }
  return c;
}

}  // namespace fisco::synth
