#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "rtmc/signature.hpp"
#include "rtmc/trajectory.hpp"

namespace rtmc {

struct EstimatorConfig {
  double gamma = 0.99;
  // Pseudo-count pulling V toward the group success rate.
  double n_prior = 2.0;
  // Bonus for validation actions taken after a modification.
  double beta = 0.05;
  bool normalize = true;
  double std_floor = 1e-8;
  bool first_visit_dedup = true;
};

// Throws std::invalid_argument on out-of-domain values.
void check(const EstimatorConfig& config);

enum class Method { grpo, grpo_step, rtmc };

std::string_view to_string(Method m);
std::optional<Method> parse_method(std::string_view text);

// Per-step estimator output. For every method adv == q - v_smoothed; the
// baselines fill q with the return they credit and v with the baseline they
// subtract.
struct AdvantageRecord {
  std::string rollout_id;
  int step = 0;
  std::string state_sig;
  std::string action_sig;
  double ret = 0.0;
  double q = 0.0;
  double v_raw = 0.0;
  double v_smoothed = 0.0;
  double adv = 0.0;
  double adv_normalized = 0.0;
  TokenSpan token_span;
  Method method = Method::rtmc;

  friend bool operator==(const AdvantageRecord&, const AdvantageRecord&) = default;
};

// Visit counts and return sums keyed by (state, action) signature.
class StatsTable {
 public:
  struct Cell {
    std::size_t count = 0;
    double return_sum = 0.0;
  };

  struct Key {
    std::uint32_t state = 0;
    std::uint32_t action = 0;

    std::uint64_t packed() const { return (std::uint64_t{state} << 32) | action; }
  };

  struct Entry {
    std::string state;
    std::string action;
    Cell cell;
  };

  // Interns both signatures without touching the statistics.
  Key key(const std::string& state, const std::string& action);
  void record(Key key, double ret);
  void record(const std::string& state, const std::string& action, double ret) {
    record(key(state, action), ret);
  }

  // nullptr when the pair / state was never recorded.
  const Cell* find(const std::string& state, const std::string& action) const;
  const Cell* find_state(const std::string& state) const;

  const Cell& cell(Key key) const;
  const Cell& state_cell(std::uint32_t state) const;

  std::size_t size() const { return pairs_.size(); }
  std::size_t state_count() const { return state_cells_.size(); }

  // All (state, action) entries, sorted by state then action.
  std::vector<Entry> entries() const;

 private:
  std::unordered_map<std::string, std::uint32_t> state_ids_;
  std::unordered_map<std::string, std::uint32_t> action_ids_;
  std::vector<std::string> state_names_;
  std::vector<std::string> action_names_;
  std::vector<Cell> state_cells_;
  std::unordered_map<std::uint64_t, Cell> pairs_;
};

// r'_t = r_t + beta * [state before t has an M:/I:/C entry] * [a_t is validation].
std::vector<double> shape_rewards(std::span<const double> rewards, std::span<const StepKeys> keys,
                                  double beta);
std::vector<double> shape_rewards(const Rollout& rollout, const SignatureScheme& scheme,
                                  const EstimatorConfig& config);

// G_t = r_t + gamma * G_{t+1}; the terminal reward is added to the final
// step's reward. Empty input yields an empty result.
std::vector<double> discounted_returns(std::span<const double> rewards, double terminal_reward,
                                       double gamma);
std::vector<double> discounted_returns(const Rollout& rollout, double gamma);

std::vector<double> trace_rewards(const Rollout& rollout);

// Optional per-rollout replacement for the trace step rewards (indexed like
// group.rollouts). Empty means "use StepRecord::step_reward".
using BaseRewards = std::span<const std::vector<double>>;

StatsTable build_tree(const ProblemGroup& group, const SignatureScheme& scheme,
                      const EstimatorConfig& config, BaseRewards base_rewards = {});

// Throw std::out_of_range for keys the table has never seen.
double q_hat(const StatsTable& table, const std::string& state, const std::string& action);
double v_hat(const StatsTable& table, const std::string& state);
double v_smoothed(const StatsTable& table, const std::string& state, double prior,
                  const EstimatorConfig& config);
double v_smoothed(std::size_t visits, double state_return_sum, double prior, double n_prior);

// Rollout-tree Monte Carlo advantages for every step of every rollout, in
// rollout order then step order.
std::vector<AdvantageRecord> advantages(const ProblemGroup& group, const SignatureScheme& scheme,
                                        const EstimatorConfig& config,
                                        BaseRewards base_rewards = {});

double population_std(std::span<const double> values);

// Sets adv_normalized = adv / max(population std of adv, std_floor).
void normalize_group(std::span<AdvantageRecord> records, double std_floor);

struct TokenAdvantage {
  std::string rollout_id;
  std::int64_t token = 0;
  double adv = 0.0;

  friend bool operator==(const TokenAdvantage&, const TokenAdvantage&) = default;
};

// Expands each record's adv_normalized over its token span. Tokens outside
// every span get no entry. Throws std::invalid_argument when two spans of the
// same rollout overlap.
std::vector<TokenAdvantage> broadcast_tokens(std::span<const AdvantageRecord> records);

}  // namespace rtmc
