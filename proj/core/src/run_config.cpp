#include "rtmc/run_config.hpp"

#include <array>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <istream>

#include "rtmc/trace_io.hpp"

namespace rtmc {

namespace {

constexpr std::array<std::string_view, 25> kKeys = {
    "estimator",  "gamma",      "n_prior",          "beta",          "normalize",
    "std_floor",  "first_visit_dedup", "valid_bonus", "invalid_penalty", "validation_bonus",
    "step_rewards", "grpo_step_raw", "rules",        "out",           "per_token",
    "problem",    "threshold",  "report",           "seed",          "groups",
    "rollouts",   "mdp",        "min_visits",       "sigmas",        "threads"};

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view want) {
  throw ConfigError("invalid value '" + std::string(value) + "' for " + std::string(key) +
                    " (expected " + std::string(want) + ")");
}

double parse_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

template <typename Int>
Int parse_int(std::string_view key, std::string_view v) {
  Int out{};
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc{} || res.ptr != v.data() + v.size()) bad_value(key, v, "an integer");
  return out;
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(key, v, "true or false");
}

}  // namespace

std::span<const std::string_view> config_keys() { return kKeys; }

void apply_setting(RunConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view v = trim(raw);
  EstimatorConfig& e = c.estimator_config;
  StepRewardConfig& s = c.step_reward_config;
  if (key == "estimator") {
    const auto m = parse_method(v);
    if (!m) bad_value(key, v, "grpo, grpo_step or rtmc");
    c.estimator = *m;
  } else if (key == "gamma") {
    e.gamma = parse_double(key, v);
  } else if (key == "n_prior") {
    e.n_prior = parse_double(key, v);
  } else if (key == "beta") {
    e.beta = parse_double(key, v);
  } else if (key == "normalize") {
    e.normalize = parse_bool(key, v);
  } else if (key == "std_floor") {
    e.std_floor = parse_double(key, v);
  } else if (key == "first_visit_dedup") {
    e.first_visit_dedup = parse_bool(key, v);
  } else if (key == "valid_bonus") {
    s.valid_bonus = parse_double(key, v);
  } else if (key == "invalid_penalty") {
    s.invalid_penalty = parse_double(key, v);
  } else if (key == "validation_bonus") {
    s.validation_bonus = parse_double(key, v);
  } else if (key == "step_rewards") {
    c.step_rewards = parse_bool(key, v);
  } else if (key == "grpo_step_raw") {
    c.grpo_step_raw = parse_bool(key, v);
  } else if (key == "rules") {
    c.rules = std::string(v);
  } else if (key == "out") {
    c.out = std::string(v);
  } else if (key == "per_token") {
    c.per_token = parse_bool(key, v);
  } else if (key == "problem") {
    c.problem = std::string(v);
  } else if (key == "threshold") {
    c.threshold = parse_double(key, v);
    if (!(c.threshold >= 0.0)) bad_value(key, v, "a nonnegative number");
  } else if (key == "report") {
    c.report = std::string(v);
  } else if (key == "seed") {
    c.seed = parse_int<std::uint64_t>(key, v);
  } else if (key == "groups") {
    c.groups = parse_int<int>(key, v);
    if (c.groups < 100) bad_value(key, v, "an integer of at least 100");
  } else if (key == "rollouts") {
    c.rollouts = parse_int<int>(key, v);
    if (c.rollouts < 1) bad_value(key, v, "a positive integer");
  } else if (key == "mdp") {
    c.mdp = std::string(v);
  } else if (key == "min_visits") {
    c.min_visits = parse_int<std::size_t>(key, v);
  } else if (key == "sigmas") {
    c.sigmas = parse_double(key, v);
    if (!(c.sigmas > 0.0)) bad_value(key, v, "a positive number");
  } else if (key == "threads") {
    c.threads = parse_int<int>(key, v);
    if (c.threads < 0) bad_value(key, v, "a nonnegative integer");
  } else {
    throw ConfigError("unknown setting '" + std::string(key) + "'");
  }
}

void load_config(std::istream& in, RunConfig& config) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      apply_setting(config, trim(view.substr(0, eq)), view.substr(eq + 1));
    } catch (const ConfigError& err) {
      throw ConfigError("config line " + std::to_string(line_no) + ": " + err.what());
    }
  }
}

void load_config_file(const std::string& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  load_config(in, config);
}

std::string resolved_rules_path(const RunConfig& config) {
  if (!config.rules.empty()) return config.rules;
  if (const char* env = std::getenv(std::string(kRulesEnv).c_str()); env && *env) return env;
  return {};
}

ClassifierRules resolve_rules(const RunConfig& config) {
  const std::string path = resolved_rules_path(config);
  return path.empty() ? ClassifierRules::defaults() : load_rules_file(path);
}

}  // namespace rtmc
