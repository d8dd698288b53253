#include "fisco/promptgen.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cctype>
#include <regex>
#include <set>

#include "embedded_data.hpp"
#include "fisco/errors.hpp"
#include "fisco/random.hpp"
#include "fisco/text.hpp"

namespace fisco::promptgen {

std::string_view to_string(Gender g) noexcept {
  switch (g) {
    case Gender::Female: return "female";
    case Gender::Male: return "male";
    case Gender::Unspecified: return "unspecified";
  }
  return "unspecified";
}

std::string_view to_string(Race r) noexcept {
  switch (r) {
    case Race::White: return "white";
    case Race::Black: return "black";
    case Race::Asian: return "asian";
    case Race::MENA: return "mena";
    case Race::NativeAmerican: return "native_american";
  }
  return "white";
}

std::string_view to_string(Axis a) noexcept {
  switch (a) {
    case Axis::Gender: return "gender";
    case Axis::Race: return "race";
    case Axis::Age: return "age";
  }
  return "gender";
}

std::string_view to_string(TemplateKind k) noexcept {
  return k == TemplateKind::Advice ? "advice" : "insight";
}

Gender parse_gender(std::string_view s) {
  for (auto g : {Gender::Female, Gender::Male, Gender::Unspecified}) {
    if (to_string(g) == s) return g;
  }
  throw Error(ErrorCode::ConfigError, "unknown gender '" + std::string(s) + "'");
}

Race parse_race(std::string_view s) {
  for (auto r : {Race::White, Race::Black, Race::Asian, Race::MENA, Race::NativeAmerican}) {
    if (to_string(r) == s) return r;
  }
  throw Error(ErrorCode::ConfigError, "unknown race '" + std::string(s) + "'");
}

Axis parse_axis(std::string_view s) {
  for (auto a : {Axis::Gender, Axis::Race, Axis::Age}) {
    if (to_string(a) == s) return a;
  }
  throw Error(ErrorCode::ConfigError, "unknown axis '" + std::string(s) + "'");
}

TemplateKind parse_template_kind(std::string_view s) {
  if (s == "advice") return TemplateKind::Advice;
  if (s == "insight") return TemplateKind::Insight;
  throw Error(ErrorCode::ConfigError, "unknown template kind '" + std::string(s) + "'");
}

// ---------------------------------------------------------------------------
// Name pools

std::string_view builtin_name_pool_text() { return data::kNamePools; }

NamePool NamePool::parse(std::string_view text_in) {
  static const std::array<std::pair<std::string_view, std::pair<Race, Gender>>, 7> kLabels = {{
      {"White female", {Race::White, Gender::Female}},
      {"Black female", {Race::Black, Gender::Female}},
      {"White male", {Race::White, Gender::Male}},
      {"Black male", {Race::Black, Gender::Male}},
      {"Asian", {Race::Asian, Gender::Unspecified}},
      {"MENA", {Race::MENA, Gender::Unspecified}},
      {"Native American", {Race::NativeAmerican, Gender::Unspecified}},
  }};
  NamePool pool;
  const std::string text(text_in);
  for (const auto& sentence : text::split_sentences(text)) {
    const auto marker = sentence.find(" names include ");
    if (marker == std::string::npos) continue;
    const std::string label = sentence.substr(0, marker);
    const auto it = std::find_if(kLabels.begin(), kLabels.end(), [&](const auto& l) { return l.first == label; });
    if (it == kLabels.end()) throw Error(ErrorCode::InvalidArgument, "unknown name pool label '" + label + "'");

    std::string list = sentence.substr(marker + std::string_view(" names include ").size());
    if (!list.empty() && list.back() == '.') list.pop_back();
    std::vector<std::string> names;
    std::size_t pos = 0;
    while (pos <= list.size()) {
      const auto comma = list.find(',', pos);
      std::string item = text::trim(list.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
      if (item.starts_with("and ")) item = text::trim(item.substr(4));
      if (!item.empty()) names.push_back(item);
      if (comma == std::string::npos) break;
      pos = comma + 1;
    }
    pool.pools_[it->second] = std::move(names);
  }
  return pool;
}

const NamePool& NamePool::builtin() {
  static const NamePool pool = [] {
    NamePool p = NamePool::parse(builtin_name_pool_text());
    p.validate();
    return p;
  }();
  return pool;
}

const std::vector<std::string>& NamePool::names(Race race, Gender gender) const {
  if (auto it = pools_.find({race, gender}); it != pools_.end()) return it->second;
  if (auto it = pools_.find({race, Gender::Unspecified}); it != pools_.end()) return it->second;
  throw Error(ErrorCode::InvalidArgument,
              "no name pool for " + std::string(to_string(race)) + "/" + std::string(to_string(gender)));
}

bool NamePool::has_gendered(Race race) const {
  return pools_.contains({race, Gender::Female}) && pools_.contains({race, Gender::Male});
}

void NamePool::validate(std::size_t expected_size) const {
  std::set<std::string> seen;
  for (const auto& [key, names] : pools_) {
    if (names.size() != expected_size) {
      throw Error(ErrorCode::InvalidArgument, "name pool " + std::string(to_string(key.first)) + "/" +
                                                  std::string(to_string(key.second)) + " has " +
                                                  std::to_string(names.size()) + " names");
    }
    for (const auto& n : names) {
      if (!seen.insert(n).second) throw Error(ErrorCode::InvalidArgument, "name '" + n + "' appears in two pools");
    }
  }
}

// ---------------------------------------------------------------------------
// Templates

namespace {

constexpr std::array<std::string_view, 4> kPlaceholders = {"[NAME]", "[AGE]", "[STATE]", "[OCCUPATION]"};

// Words that name a protected attribute outright. "old" is absent on purpose:
// age cues are phrased as "[AGE] years old".
const std::set<std::string>& protected_words() {
  static const std::set<std::string> words = {
      "male",     "female",    "man",      "woman",   "men",        "women",    "boy",     "girl",
      "he",       "she",       "him",      "her",     "his",        "hers",     "black",   "white",
      "asian",    "african",   "hispanic", "latino",  "latina",     "caucasian", "arab",   "indigenous",
      "elderly",  "young",     "younger",  "older",   "senior",     "teenager", "retiree", "millennial"};
  return words;
}

std::string strip_placeholders(std::string_view s) {
  std::string out(s);
  for (auto ph : kPlaceholders) out = text::replace_all(out, ph, " ");
  return out;
}

const std::vector<std::string>& default_states() {
  static const std::vector<std::string> v = {"Ohio",     "Texas",   "Oregon",   "Georgia",  "Michigan",
                                             "Arizona",  "Vermont", "Colorado", "Virginia", "Wisconsin",
                                             "Kentucky", "Nevada"};
  return v;
}

const std::vector<std::string>& default_occupations() {
  static const std::vector<std::string> v = {"accountant",       "nurse",          "software engineer",
                                             "project manager",  "electrician",    "pharmacist",
                                             "sales associate",  "civil engineer", "hotel manager",
                                             "graphic designer", "teacher",        "logistics coordinator"};
  return v;
}

}  // namespace

bool TemplateSpec::supports(Axis axis) const {
  return axes.empty() || std::find(axes.begin(), axes.end(), axis) != axes.end();
}

void TemplateSpec::validate() const {
  auto fail = [&](const std::string& why) {
    throw Error(ErrorCode::InvalidTemplate, "template " + template_id + ": " + why);
  };
  if (template_id.empty()) fail("missing template_id");
  if (text::trim(text).empty()) fail("empty text");

  static const std::regex bracket(R"(\[[A-Z_]+\])");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), bracket); it != std::sregex_iterator(); ++it) {
    const std::string token = it->str();
    if (std::find(kPlaceholders.begin(), kPlaceholders.end(), token) == kPlaceholders.end()) {
      fail("unknown placeholder " + token);
    }
  }
  if ((supports(Axis::Gender) || supports(Axis::Race)) && text.find("[NAME]") == std::string::npos) {
    fail("name-based axes need [NAME] at least once");
  }
  if (kind == TemplateKind::Advice) {
    const std::string trimmed = text::trim(text);
    if (!text::contains_icase(trimmed, "can you suggest") || trimmed.back() != '?') {
      fail("advice templates must end in a \"can you suggest\" question");
    }
    for (const auto& tok : text::tokenize(strip_placeholders(text))) {
      if (protected_words().contains(tok)) fail("mentions protected attribute word '" + tok + "'");
    }
  }
}

std::vector<TemplateSpec> parse_templates_jsonl(std::string_view jsonl) {
  std::vector<TemplateSpec> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < jsonl.size()) {
    const auto nl = jsonl.find('\n', pos);
    const std::string line = text::trim(jsonl.substr(pos, nl == std::string_view::npos ? nl : nl - pos));
    pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
    ++line_no;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      for (const auto& [key, _] : j.items()) {
        if (key != "template_id" && key != "kind" && key != "text" && key != "axes") {
          throw Error(ErrorCode::ConfigError, "unknown key '" + key + "'");
        }
      }
      TemplateSpec t;
      t.template_id = j.at("template_id").get<std::string>();
      t.kind = parse_template_kind(j.at("kind").get<std::string>());
      t.text = j.at("text").get<std::string>();
      if (j.contains("axes")) {
        for (const auto& a : j.at("axes")) t.axes.push_back(parse_axis(a.get<std::string>()));
      }
      t.validate();
      out.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorCode::ConfigError, "templates line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

const std::vector<TemplateSpec>& builtin_templates() {
  static const std::vector<TemplateSpec> templates = parse_templates_jsonl(data::kTemplates);
  return templates;
}

// ---------------------------------------------------------------------------
// Expansion

std::string expand_template(const TemplateSpec& t, const Persona& p) {
  auto unbound = [&](std::string_view ph) {
    throw Error(ErrorCode::UnboundPlaceholder,
                "template " + t.template_id + " uses " + std::string(ph) + " but the persona has no value");
  };
  std::string out = t.text;
  if (out.find("[NAME]") != std::string::npos) {
    if (p.name.empty()) unbound("[NAME]");
    out = text::replace_all(out, "[NAME]", p.name);
  }
  if (out.find("[AGE]") != std::string::npos) {
    if (!p.age) unbound("[AGE]");
    out = text::replace_all(out, "[AGE]", std::to_string(*p.age));
  }
  if (out.find("[STATE]") != std::string::npos) {
    if (!p.state) unbound("[STATE]");
    out = text::replace_all(out, "[STATE]", *p.state);
  }
  if (out.find("[OCCUPATION]") != std::string::npos) {
    if (!p.occupation) unbound("[OCCUPATION]");
    out = text::replace_all(out, "[OCCUPATION]", *p.occupation);
  }
  return out;
}

void CaseOptions::validate() const {
  if (young_age < 18) throw Error(ErrorCode::ConfigError, "young_age must be at least 18");
  if (young_age > kOldAgeThreshold || old_age <= kOldAgeThreshold) {
    throw Error(ErrorCode::ConfigError, "ages must satisfy young <= 50 < old");
  }
  if (race_pair.first == race_pair.second) throw Error(ErrorCode::ConfigError, "race_pair needs two distinct races");
}

namespace {

std::vector<std::string> draw_names(const std::vector<std::string>& pool, std::size_t k, Rng& rng,
                                    const std::string& what) {
  if (k > pool.size()) {
    throw Error(ErrorCode::PoolExhausted, "need " + std::to_string(k) + " names from the " + what + " pool of " +
                                              std::to_string(pool.size()));
  }
  std::vector<std::string> names = pool;
  rng.shuffle(names);
  names.resize(k);
  return names;
}

std::string race_label(Race r) { return std::string(to_string(r)); }

}  // namespace

std::pair<QuestionGroup, QuestionGroup> build_case(const TemplateSpec& t, Axis axis, std::size_t k,
                                                   std::uint64_t seed, const CaseOptions& options,
                                                   const NamePool& pool) {
  options.validate();
  if (k < 1) throw Error(ErrorCode::InvalidArgument, "k must be positive");
  if (!t.supports(axis)) {
    throw Error(ErrorCode::InvalidTemplate,
                "template " + t.template_id + " is not declared for the " + std::string(to_string(axis)) + " axis");
  }

  TemplateSpec tmpl = t;
  if (axis == Axis::Age && tmpl.text.find("[AGE]") == std::string::npos) {
    tmpl.text = "I am [AGE] years old. " + tmpl.text;
  }
  if (axis != Axis::Age && tmpl.text.find("[NAME]") == std::string::npos) {
    throw Error(ErrorCode::InvalidTemplate, "template " + t.template_id + " lacks [NAME]");
  }

  Rng rng(seed);
  const auto& states = options.states.empty() ? default_states() : options.states;
  const auto& occupations = options.occupations.empty() ? default_occupations() : options.occupations;

  // Attributes shared index-by-index across both groups.
  std::vector<Persona> shared(k);
  for (auto& p : shared) {
    p.age = 25 + static_cast<int>(rng.below(36));
    p.state = states[rng.below(states.size())];
    p.occupation = occupations[rng.below(occupations.size())];
  }

  QuestionGroup g1;
  QuestionGroup g2;
  g1.axis = g2.axis = axis;
  g1.template_id = g2.template_id = t.template_id;
  std::vector<Persona> p1 = shared;
  std::vector<Persona> p2 = shared;

  switch (axis) {
    case Axis::Gender: {
      g1.group_label = "female";
      g2.group_label = "male";
      if (options.gender_race_mode == GenderRaceMode::HeldConstant) {
        const Race race = options.gender_axis_race;
        if (!pool.has_gendered(race)) {
          throw Error(ErrorCode::ConfigError, "no gendered name pools for race " + race_label(race));
        }
        const auto female = draw_names(pool.names(race, Gender::Female), k, rng, race_label(race) + " female");
        const auto male = draw_names(pool.names(race, Gender::Male), k, rng, race_label(race) + " male");
        for (std::size_t i = 0; i < k; ++i) {
          p1[i].name = female[i];
          p1[i].gender = Gender::Female;
          p1[i].race = race;
          p2[i].name = male[i];
          p2[i].gender = Gender::Male;
          p2[i].race = race;
        }
      } else {
        const std::size_t n_white = (k + 1) / 2;
        const std::size_t n_black = k / 2;
        const auto wf = draw_names(pool.names(Race::White, Gender::Female), n_white, rng, "white female");
        const auto wm = draw_names(pool.names(Race::White, Gender::Male), n_white, rng, "white male");
        const auto bf = draw_names(pool.names(Race::Black, Gender::Female), n_black, rng, "black female");
        const auto bm = draw_names(pool.names(Race::Black, Gender::Male), n_black, rng, "black male");
        for (std::size_t i = 0; i < k; ++i) {
          const bool white = i % 2 == 0;
          const Race race = white ? Race::White : Race::Black;
          p1[i].name = white ? wf[i / 2] : bf[i / 2];
          p2[i].name = white ? wm[i / 2] : bm[i / 2];
          p1[i].gender = Gender::Female;
          p2[i].gender = Gender::Male;
          p1[i].race = p2[i].race = race;
        }
      }
      break;
    }
    case Axis::Race: {
      const auto [ra, rb] = options.race_pair;
      g1.group_label = race_label(ra);
      g2.group_label = race_label(rb);
      const auto gender_for = [&](Race r) {
        return pool.has_gendered(r) ? options.race_axis_gender : Gender::Unspecified;
      };
      const auto a = draw_names(pool.names(ra, options.race_axis_gender), k, rng, race_label(ra));
      const auto b = draw_names(pool.names(rb, options.race_axis_gender), k, rng, race_label(rb));
      for (std::size_t i = 0; i < k; ++i) {
        p1[i].name = a[i];
        p1[i].race = ra;
        p1[i].gender = gender_for(ra);
        p2[i].name = b[i];
        p2[i].race = rb;
        p2[i].gender = gender_for(rb);
      }
      break;
    }
    case Axis::Age: {
      g1.group_label = "young";
      g2.group_label = "old";
      const Race race = options.age_axis_race;
      const Gender gender = pool.has_gendered(race) ? options.age_axis_gender : Gender::Unspecified;
      const auto names = draw_names(pool.names(race, gender), k, rng, race_label(race));
      for (std::size_t i = 0; i < k; ++i) {
        p1[i].name = p2[i].name = names[i];
        p1[i].race = p2[i].race = race;
        p1[i].gender = p2[i].gender = gender;
        p1[i].age = options.young_age;
        p2[i].age = options.old_age;
      }
      break;
    }
  }

  const std::string case_id =
      t.template_id + "/" + std::string(to_string(axis)) + "/" + g1.group_label + "-" + g2.group_label;
  g1.case_id = g2.case_id = case_id;
  for (std::size_t i = 0; i < k; ++i) {
    g1.prompts.push_back(expand_template(tmpl, p1[i]));
    g2.prompts.push_back(expand_template(tmpl, p2[i]));
  }
  g1.personas = std::move(p1);
  g2.personas = std::move(p2);
  return {std::move(g1), std::move(g2)};
}

}  // namespace fisco::promptgen
