#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fisco::promptgen {

enum class Gender { Female, Male, Unspecified };
enum class Race { White, Black, Asian, MENA, NativeAmerican };
enum class Axis { Gender, Race, Age };
enum class TemplateKind { Advice, Insight };

std::string_view to_string(Gender g) noexcept;
std::string_view to_string(Race r) noexcept;
std::string_view to_string(Axis a) noexcept;
std::string_view to_string(TemplateKind k) noexcept;
Gender parse_gender(std::string_view s);
Race parse_race(std::string_view s);
Axis parse_axis(std::string_view s);
TemplateKind parse_template_kind(std::string_view s);

inline constexpr int kOldAgeThreshold = 50;  // older than this counts as old

struct Persona {
  std::string name;
  Gender gender = Gender::Unspecified;
  Race race = Race::White;
  std::optional<int> age;
  std::optional<std::string> state;
  std::optional<std::string> occupation;
};

/// Names keyed by (race, gender). Some pools carry no gender split; those are
/// stored under Gender::Unspecified.
class NamePool {
 public:
  /// Parses the "<Label> names include A, B, ..., and Z." sentences.
  static NamePool parse(std::string_view text);
  /// The pools shipped in data/name_pools.txt.
  static const NamePool& builtin();

  /// Gendered pool when one exists for (race, gender), otherwise the race's
  /// unsplit pool. Throws InvalidArgument when neither exists.
  [[nodiscard]] const std::vector<std::string>& names(Race race, Gender gender) const;
  [[nodiscard]] bool has_gendered(Race race) const;
  [[nodiscard]] const std::map<std::pair<Race, Gender>, std::vector<std::string>>& pools() const noexcept {
    return pools_;
  }

  /// Pools pairwise disjoint and of `expected_size` names each.
  void validate(std::size_t expected_size = 10) const;

 private:
  std::map<std::pair<Race, Gender>, std::vector<std::string>> pools_;
};

/// Raw text of the shipped name-pool data file.
std::string_view builtin_name_pool_text();

struct TemplateSpec {
  std::string template_id;
  TemplateKind kind = TemplateKind::Insight;
  std::string text;
  /// Axes this template may be used for; empty means all.
  std::vector<Axis> axes;

  [[nodiscard]] bool supports(Axis axis) const;
  /// Placeholder, suggestion-question and protected-attribute rules.
  void validate() const;
};

std::vector<TemplateSpec> parse_templates_jsonl(std::string_view jsonl);
const std::vector<TemplateSpec>& builtin_templates();

struct QuestionGroup {
  std::string case_id;
  Axis axis = Axis::Gender;
  std::string group_label;
  std::string template_id;
  std::vector<std::string> prompts;
  std::vector<Persona> personas;
};

/// How names are drawn for the gender axis: one race for the whole case, or
/// alternating White/Black by persona index (same race at the same index in
/// both groups).
enum class GenderRaceMode { HeldConstant, Alternating };

struct CaseOptions {
  Race gender_axis_race = Race::White;
  GenderRaceMode gender_race_mode = GenderRaceMode::HeldConstant;
  Gender race_axis_gender = Gender::Female;
  std::pair<Race, Race> race_pair{Race::White, Race::Black};
  Race age_axis_race = Race::White;
  Gender age_axis_gender = Gender::Female;
  int young_age = 28;
  int old_age = 62;
  std::vector<std::string> states;       // defaults to a built-in list when empty
  std::vector<std::string> occupations;  // defaults to a built-in list when empty

  void validate() const;
};

/// Replaces [NAME], [AGE], [STATE], [OCCUPATION]. Pure string replacement.
std::string expand_template(const TemplateSpec& t, const Persona& p);

/// Two groups of k prompts differing only in the protected attribute of
/// `axis`. All other persona attributes match index by index.
std::pair<QuestionGroup, QuestionGroup> build_case(const TemplateSpec& t, Axis axis, std::size_t k,
                                                   std::uint64_t seed, const CaseOptions& options = {},
                                                   const NamePool& pool = NamePool::builtin());

}  // namespace fisco::promptgen
