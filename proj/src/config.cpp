#include "fisco/config.hpp"

#include <algorithm>
#include <set>

#include "fisco/baselines.hpp"
#include "fisco/errors.hpp"
#include "fisco/hash.hpp"
#include "fisco/io.hpp"

namespace fisco {

using json = nlohmann::json;

namespace {

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::ConfigError, where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw Error(ErrorCode::ConfigError, "unknown key '" + key + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

http::RetryPolicy parse_retry(const json& j, const std::string& where) {
  check_keys(j, {"max_attempts", "base_delay_ms", "max_delay_ms"}, where);
  http::RetryPolicy r;
  read(j, "max_attempts", r.max_attempts);
  if (j.contains("base_delay_ms")) r.base_delay = std::chrono::milliseconds(j.at("base_delay_ms").get<long>());
  if (j.contains("max_delay_ms")) r.max_delay = std::chrono::milliseconds(j.at("max_delay_ms").get<long>());
  return r;
}

json retry_json(const http::RetryPolicy& r) {
  return {{"max_attempts", r.max_attempts},
          {"base_delay_ms", r.base_delay.count()},
          {"max_delay_ms", r.max_delay.count()}};
}

collect::ModelEndpointConfig parse_model(const json& j, std::size_t i) {
  const std::string where = "models[" + std::to_string(i) + "]";
  check_keys(j,
             {"model_id", "base_url", "temperature", "max_tokens", "max_parallel", "retry", "timeout_ms",
              "api_key_env"},
             where);
  collect::ModelEndpointConfig m;
  read(j, "model_id", m.model_id);
  read(j, "base_url", m.base_url);
  read(j, "temperature", m.temperature);
  read(j, "max_tokens", m.max_tokens);
  read(j, "max_parallel", m.max_parallel);
  read(j, "api_key_env", m.api_key_env);
  if (j.contains("timeout_ms")) m.timeout = std::chrono::milliseconds(j.at("timeout_ms").get<long>());
  if (j.contains("retry")) m.retry = parse_retry(j.at("retry"), where + ".retry");
  return m;
}

json model_json(const collect::ModelEndpointConfig& m) {
  return {{"model_id", m.model_id},         {"base_url", m.base_url},
          {"temperature", m.temperature},   {"max_tokens", m.max_tokens},
          {"max_parallel", m.max_parallel}, {"retry", retry_json(m.retry)},
          {"timeout_ms", m.timeout.count()}, {"api_key_env", m.api_key_env}};
}

promptgen::CaseOptions parse_case_options(const json& j) {
  check_keys(j,
             {"gender_axis_race", "gender_race_mode", "race_axis_gender", "race_pair", "age_axis_race",
              "age_axis_gender", "young_age", "old_age", "states", "occupations"},
             "case_options");
  promptgen::CaseOptions o;
  if (j.contains("gender_axis_race")) o.gender_axis_race = promptgen::parse_race(j.at("gender_axis_race").get<std::string>());
  if (j.contains("gender_race_mode")) {
    const auto mode = j.at("gender_race_mode").get<std::string>();
    if (mode == "held_constant") {
      o.gender_race_mode = promptgen::GenderRaceMode::HeldConstant;
    } else if (mode == "alternating") {
      o.gender_race_mode = promptgen::GenderRaceMode::Alternating;
    } else {
      throw Error(ErrorCode::ConfigError, "gender_race_mode must be held_constant or alternating");
    }
  }
  if (j.contains("race_axis_gender")) o.race_axis_gender = promptgen::parse_gender(j.at("race_axis_gender").get<std::string>());
  if (j.contains("race_pair")) {
    const auto& p = j.at("race_pair");
    if (!p.is_array() || p.size() != 2) throw Error(ErrorCode::ConfigError, "race_pair must list two races");
    o.race_pair = {promptgen::parse_race(p[0].get<std::string>()), promptgen::parse_race(p[1].get<std::string>())};
  }
  if (j.contains("age_axis_race")) o.age_axis_race = promptgen::parse_race(j.at("age_axis_race").get<std::string>());
  if (j.contains("age_axis_gender")) o.age_axis_gender = promptgen::parse_gender(j.at("age_axis_gender").get<std::string>());
  read(j, "young_age", o.young_age);
  read(j, "old_age", o.old_age);
  read(j, "states", o.states);
  read(j, "occupations", o.occupations);
  return o;
}

json case_options_json(const promptgen::CaseOptions& o) {
  using promptgen::to_string;
  return {{"gender_axis_race", to_string(o.gender_axis_race)},
          {"gender_race_mode",
           o.gender_race_mode == promptgen::GenderRaceMode::HeldConstant ? "held_constant" : "alternating"},
          {"race_axis_gender", to_string(o.race_axis_gender)},
          {"race_pair", {to_string(o.race_pair.first), to_string(o.race_pair.second)}},
          {"age_axis_race", to_string(o.age_axis_race)},
          {"age_axis_gender", to_string(o.age_axis_gender)},
          {"young_age", o.young_age},
          {"old_age", o.old_age},
          {"states", o.states},
          {"occupations", o.occupations}};
}

CheckerConfig parse_checker(const json& j) {
  check_keys(j, {"kind", "base_url", "model_id", "api_key_env", "max_parallel", "retry", "entail_recall"}, "checker");
  CheckerConfig c;
  if (j.contains("kind")) c.kind = parse_backend_kind(j.at("kind").get<std::string>());
  read(j, "base_url", c.base_url);
  read(j, "model_id", c.model_id);
  read(j, "api_key_env", c.api_key_env);
  read(j, "max_parallel", c.max_parallel);
  read(j, "entail_recall", c.entail_recall);
  if (j.contains("retry")) c.retry = parse_retry(j.at("retry"), "checker.retry");
  return c;
}

json checker_json(const CheckerConfig& c) {
  return {{"kind", to_string(c.kind)},         {"base_url", c.base_url},
          {"model_id", c.model_id},            {"api_key_env", c.api_key_env},
          {"max_parallel", c.max_parallel},    {"retry", retry_json(c.retry)},
          {"entail_recall", c.entail_recall}};
}

SynthConfig parse_synth(const json& j) {
  check_keys(j, {"n_group_cases", "n_triples", "k", "deltas", "banks", "betas", "baselines", "bootstrap_resamples"},
             "synth");
  SynthConfig s;
  read(j, "n_group_cases", s.n_group_cases);
  read(j, "n_triples", s.n_triples);
  read(j, "k", s.k);
  read(j, "deltas", s.deltas);
  read(j, "banks", s.banks);
  read(j, "betas", s.betas);
  read(j, "baselines", s.baselines);
  read(j, "bootstrap_resamples", s.bootstrap_resamples);
  return s;
}

json synth_json(const SynthConfig& s) {
  return {{"n_group_cases", s.n_group_cases}, {"n_triples", s.n_triples}, {"k", s.k},
          {"deltas", s.deltas},               {"banks", s.banks},         {"betas", s.betas},
          {"baselines", s.baselines},         {"bootstrap_resamples", s.bootstrap_resamples}};
}

void validate_metric_names(const std::vector<std::string>& names, const std::string& where) {
  std::set<std::string> seen;
  for (const auto& n : names) {
    try {
      baselines::parse_metric(n);
    } catch (const Error&) {
      throw Error(ErrorCode::ConfigError, where + ": unknown metric '" + n + "'");
    }
    if (!seen.insert(n).second) throw Error(ErrorCode::ConfigError, where + ": duplicate metric '" + n + "'");
  }
}

}  // namespace

void RunConfig::validate() const {
  if (k < 2) throw Error(ErrorCode::ConfigError, "k must be >= 2");
  weights.validate();
  if (!(significance_level > 0.0 && significance_level < 1.0)) {
    throw Error(ErrorCode::ConfigError, "significance_level must lie in (0, 1)");
  }
  if (axes.empty()) throw Error(ErrorCode::ConfigError, "at least one axis is required");
  if (std::set<promptgen::Axis>(axes.begin(), axes.end()).size() != axes.size()) {
    throw Error(ErrorCode::ConfigError, "axes must not repeat");
  }
  try {
    case_options.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  std::set<std::string> ids;
  for (const auto& m : models) {
    m.validate();
    if (m.model_id.find('/') != std::string::npos) {
      throw Error(ErrorCode::ConfigError, "model_id must not contain '/': " + m.model_id);
    }
    if (!ids.insert(m.model_id).second) throw Error(ErrorCode::ConfigError, "duplicate model_id " + m.model_id);
  }
  if (checker.max_parallel < 1) throw Error(ErrorCode::ConfigError, "checker.max_parallel must be >= 1");
  if (checker.retry.max_attempts < 1) throw Error(ErrorCode::ConfigError, "checker.retry.max_attempts must be >= 1");
  if (!(checker.entail_recall > 0.0 && checker.entail_recall <= 1.0)) {
    throw Error(ErrorCode::ConfigError, "checker.entail_recall must lie in (0, 1]");
  }
  if (checker.kind == BackendKind::RemoteModel) {
    if (checker.base_url.empty() || checker.model_id.empty()) {
      throw Error(ErrorCode::ConfigError, "remote checker needs base_url and model_id");
    }
    http::parse_base_url(checker.base_url);
  }
  validate_metric_names(baselines, "baselines");
  if (output_dir.empty()) throw Error(ErrorCode::ConfigError, "output_dir must not be empty");
  if (max_requery < 1) throw Error(ErrorCode::ConfigError, "max_requery must be >= 1");
  if (synth.k < 2) throw Error(ErrorCode::ConfigError, "synth.k must be >= 2");
  if (synth.n_group_cases == 0 && synth.n_triples == 0) {
    throw Error(ErrorCode::ConfigError, "synth needs group cases or triples");
  }
  for (double d : synth.deltas) {
    if (!(d >= 0.0 && d <= 1.0)) throw Error(ErrorCode::ConfigError, "synth.deltas must lie in [0, 1]");
  }
  for (double b : synth.betas) {
    WeightConfig w = weights;
    w.beta = b;
    w.gamma = std::min(w.gamma, b);
    try {
      w.validate();
    } catch (const Error&) {
      throw Error(ErrorCode::ConfigError, "synth.betas value " + std::to_string(b) + " violates weight ordering");
    }
  }
  validate_metric_names(synth.baselines, "synth.baselines");
  if (synth.bootstrap_resamples == 0) throw Error(ErrorCode::ConfigError, "synth.bootstrap_resamples must be > 0");
}

RunConfig RunConfig::from_json(const json& j) {
  check_keys(j,
             {"k", "weights", "significance_level", "axes", "templates", "templates_file", "claim_bank_file",
              "case_options", "models", "checker", "baselines", "seed", "output_dir", "cache_file", "max_requery",
              "synth"},
             "config");
  RunConfig c;
  try {
    read(j, "k", c.k);
    if (j.contains("weights")) {
      const auto& w = j.at("weights");
      check_keys(w, {"alpha", "beta", "gamma"}, "weights");
      read(w, "alpha", c.weights.alpha);
      read(w, "beta", c.weights.beta);
      read(w, "gamma", c.weights.gamma);
    }
    read(j, "significance_level", c.significance_level);
    if (j.contains("axes")) {
      c.axes.clear();
      for (const auto& a : j.at("axes")) c.axes.push_back(promptgen::parse_axis(a.get<std::string>()));
    }
    read(j, "templates", c.templates);
    if (j.contains("templates_file")) c.templates_file = j.at("templates_file").get<std::string>();
    if (j.contains("claim_bank_file")) c.claim_bank_file = j.at("claim_bank_file").get<std::string>();
    if (j.contains("case_options")) c.case_options = parse_case_options(j.at("case_options"));
    if (j.contains("models")) {
      const auto& ms = j.at("models");
      if (!ms.is_array()) throw Error(ErrorCode::ConfigError, "models must be an array");
      for (std::size_t i = 0; i < ms.size(); ++i) c.models.push_back(parse_model(ms[i], i));
    }
    if (j.contains("checker")) c.checker = parse_checker(j.at("checker"));
    read(j, "baselines", c.baselines);
    read(j, "seed", c.seed);
    read(j, "output_dir", c.output_dir);
    if (j.contains("cache_file")) c.cache_file = j.at("cache_file").get<std::string>();
    read(j, "max_requery", c.max_requery);
    if (j.contains("synth")) c.synth = parse_synth(j.at("synth"));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, std::string("config: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::ConfigError) throw;
    throw Error(ErrorCode::ConfigError, e.what());
  }
  c.validate();
  return c;
}

RunConfig RunConfig::load(const std::string& path) {
  json j;
  try {
    j = json::parse(io::read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ConfigError, path + ": " + e.what());
  } catch (const Error& e) {
    throw Error(ErrorCode::ConfigError, e.what());
  }
  return from_json(j);
}

json RunConfig::to_json() const {
  json axes_json = json::array();
  for (auto a : axes) axes_json.push_back(promptgen::to_string(a));
  json models_json = json::array();
  for (const auto& m : models) models_json.push_back(model_json(m));
  json j = {{"k", k},
            {"weights", {{"alpha", weights.alpha}, {"beta", weights.beta}, {"gamma", weights.gamma}}},
            {"significance_level", significance_level},
            {"axes", axes_json},
            {"templates", templates},
            {"case_options", case_options_json(case_options)},
            {"models", models_json},
            {"checker", checker_json(checker)},
            {"baselines", baselines},
            {"seed", seed},
            {"output_dir", output_dir},
            {"max_requery", max_requery},
            {"synth", synth_json(synth)}};
  if (templates_file) j["templates_file"] = *templates_file;
  if (claim_bank_file) j["claim_bank_file"] = *claim_bank_file;
  if (cache_file) j["cache_file"] = *cache_file;
  return j;
}

std::string RunConfig::hash() const {
  // Where a run is written does not change what it computes.
  json j = to_json();
  j.erase("output_dir");
  j.erase("cache_file");
  return sha256_hex(j.dump());
}

}  // namespace fisco
