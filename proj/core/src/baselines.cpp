#include "rtmc/baselines.hpp"

#include <algorithm>
#include <stdexcept>

namespace rtmc {

GrpoResult grpo_advantages(const ProblemGroup& group) {
  GrpoResult res;
  const std::size_t n = group.rollouts.size();
  res.advantages.assign(n, 0.0);
  if (n == 0) {
    res.filtered = true;
    return res;
  }
  std::vector<double> rewards;
  rewards.reserve(n);
  for (const Rollout& r : group.rollouts) rewards.push_back(r.terminal_reward);
  for (double x : rewards) res.mean += x;
  res.mean /= static_cast<double>(n);
  res.std = population_std(rewards);
  if (is_uniform_outcome(group)) {
    res.filtered = true;
    return res;
  }
  for (std::size_t i = 0; i < n; ++i) res.advantages[i] = (rewards[i] - res.mean) / res.std;
  return res;
}

std::vector<AdvantageRecord> grpo_records(const ProblemGroup& group,
                                          const SignatureScheme& scheme) {
  const GrpoResult g = grpo_advantages(group);
  std::vector<AdvantageRecord> out;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const Rollout& r = group.rollouts[i];
    auto keys = scheme.annotate(r);
    for (std::size_t t = 0; t < r.steps.size(); ++t) {
      AdvantageRecord rec;
      rec.rollout_id = r.rollout_id;
      rec.step = static_cast<int>(t);
      rec.state_sig = std::move(keys[t].state);
      rec.action_sig = std::move(keys[t].action);
      rec.ret = r.terminal_reward;
      rec.q = r.terminal_reward;
      rec.v_raw = g.mean;
      rec.v_smoothed = g.mean;
      rec.adv = rec.q - rec.v_smoothed;
      rec.adv_normalized = g.advantages[i];
      rec.token_span = r.steps[t].token_span;
      rec.method = Method::grpo;
      out.push_back(std::move(rec));
    }
  }
  return out;
}

std::vector<double> assign_step_rewards(const Rollout& rollout, std::span<const StepKeys> keys,
                                        const StepRewardConfig& config) {
  if (keys.size() != rollout.steps.size()) {
    throw std::invalid_argument("assign_step_rewards: keys and steps differ in length");
  }
  std::vector<double> out(rollout.steps.size());
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (keys[t].is_validation && keys[t].has_modifications) {
      out[t] = config.validation_bonus;
    } else if (rollout.steps[t].result_status == ResultStatus::error) {
      out[t] = config.invalid_penalty;
    } else {
      out[t] = config.valid_bonus;
    }
  }
  return out;
}

std::vector<double> assign_step_rewards(const Rollout& rollout, const SignatureScheme& scheme,
                                        const StepRewardConfig& config) {
  const auto keys = scheme.annotate(rollout);
  return assign_step_rewards(rollout, keys, config);
}

std::vector<AdvantageRecord> grpo_step_advantages(const ProblemGroup& group,
                                                  const SignatureScheme& scheme,
                                                  const GrpoStepOptions& options) {
  std::vector<AdvantageRecord> out;
  std::vector<double> all_returns;
  for (const Rollout& r : group.rollouts) {
    auto keys = scheme.annotate(r);
    const auto rewards = assign_step_rewards(r, keys, options.rewards);
    const auto returns = discounted_returns(rewards, r.terminal_reward, options.gamma);
    for (std::size_t t = 0; t < r.steps.size(); ++t) {
      AdvantageRecord rec;
      rec.rollout_id = r.rollout_id;
      rec.step = static_cast<int>(t);
      rec.state_sig = std::move(keys[t].state);
      rec.action_sig = std::move(keys[t].action);
      rec.ret = returns[t];
      rec.q = returns[t];
      rec.token_span = r.steps[t].token_span;
      rec.method = Method::grpo_step;
      out.push_back(std::move(rec));
      all_returns.push_back(returns[t]);
    }
  }
  if (out.empty()) return out;

  double mean = 0.0;
  double scale = 1.0;
  if (!options.raw) {
    for (double g : all_returns) mean += g;
    mean /= static_cast<double>(all_returns.size());
    scale = std::max(population_std(all_returns), options.std_floor);
  }
  for (auto& rec : out) {
    rec.v_raw = mean;
    rec.v_smoothed = mean;
    rec.adv = rec.q - mean;
    rec.adv_normalized = rec.adv / scale;
  }
  return out;
}

}  // namespace rtmc
