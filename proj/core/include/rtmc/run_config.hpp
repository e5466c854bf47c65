#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>

#include "rtmc/baselines.hpp"
#include "rtmc/estimator.hpp"

namespace rtmc {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  Method estimator = Method::rtmc;
  EstimatorConfig estimator_config;
  StepRewardConfig step_reward_config;
  // rtmc: assigned step rewards instead of the trace's step_reward values.
  bool step_rewards = false;
  bool grpo_step_raw = false;
  // Empty: $RTMC_RULES if set, else the built-in table.
  std::string rules;
  std::string out = "-";
  bool per_token = false;
  // Restrict trace commands to one problem_id.
  std::string problem;

  // compare
  double threshold = 0.01;
  std::string report;

  // simulate
  std::uint64_t seed = 7;
  int groups = 10000;
  int rollouts = 8;
  // Empty: the built-in validation MDP.
  std::string mdp;
  std::size_t min_visits = 100;
  double sigmas = 4.0;

  // 0: hardware concurrency.
  int threads = 0;
};

inline constexpr std::string_view kRulesEnv = "RTMC_RULES";

// Every settable key, in the spelling used by config files; the command-line
// flag is the same name with '_' replaced by '-'.
std::span<const std::string_view> config_keys();

// Throws ConfigError for unknown keys or unparsable values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// Flat "key = value" lines, '#' comments.
void load_config(std::istream& in, RunConfig& config);
void load_config_file(const std::string& path, RunConfig& config);

// The rules file the config resolves to, or empty for the built-in table.
std::string resolved_rules_path(const RunConfig& config);
ClassifierRules resolve_rules(const RunConfig& config);

}  // namespace rtmc
