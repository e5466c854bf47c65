#pragma once

#include <span>
#include <vector>

#include "rtmc/estimator.hpp"
#include "rtmc/signature.hpp"
#include "rtmc/trajectory.hpp"

namespace rtmc {

struct StepRewardConfig {
  double valid_bonus = 0.005;
  double invalid_penalty = -0.005;
  double validation_bonus = 0.05;
};

struct GrpoResult {
  // One scalar per rollout, in group order.
  std::vector<double> advantages;
  double mean = 0.0;
  double std = 0.0;
  // Uniform-outcome group: every advantage is zero and the group would be
  // dropped from a training batch.
  bool filtered = false;
};

// A_i = (R_i - mean) / population_std over terminal rewards.
GrpoResult grpo_advantages(const ProblemGroup& group);

// GRPO scalar attached to every step of its rollout.
std::vector<AdvantageRecord> grpo_records(const ProblemGroup& group, const SignatureScheme& scheme);

// Validation steps (test after a modification) take validation_bonus, other
// failed steps take invalid_penalty, other successful steps valid_bonus.
std::vector<double> assign_step_rewards(const Rollout& rollout, std::span<const StepKeys> keys,
                                        const StepRewardConfig& config);
std::vector<double> assign_step_rewards(const Rollout& rollout, const SignatureScheme& scheme,
                                        const StepRewardConfig& config);

struct GrpoStepOptions {
  double gamma = 0.99;
  StepRewardConfig rewards;
  // Emit raw discounted returns instead of group-centred, scaled ones.
  bool raw = false;
  double std_floor = 1e-8;
};

// Per-step (G_t - mean_G) / max(std_G, std_floor), moments taken over every
// step return in the group.
std::vector<AdvantageRecord> grpo_step_advantages(const ProblemGroup& group,
                                                  const SignatureScheme& scheme,
                                                  const GrpoStepOptions& options);

}  // namespace rtmc
