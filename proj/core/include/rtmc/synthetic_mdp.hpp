#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "rtmc/estimator.hpp"
#include "rtmc/signature.hpp"
#include "rtmc/trajectory.hpp"

namespace rtmc {

// Finite episodic MDP. Entering a terminal state ends the episode and pays
// that state's terminal reward (0 or 1) on the final transition; episodes that
// reach the horizon without terminating are incomplete and pay nothing extra.
struct TabularMDP {
  int num_states = 0;
  int num_actions = 0;
  // P(s'|s,a) at [(s * num_actions + a) * num_states + s'].
  std::vector<double> transition;
  // r(s,a,s'), same layout as transition.
  std::vector<double> reward;
  std::vector<bool> terminal;
  // Per state; only read for terminal states.
  std::vector<double> terminal_reward;
  int start_state = 0;
  double gamma = 0.99;
  int horizon = 8;

  std::size_t index(int s, int a, int next) const {
    return (static_cast<std::size_t>(s) * num_actions + a) * num_states + next;
  }
  double p(int s, int a, int next) const { return transition[index(s, a, next)]; }
  double r(int s, int a, int next) const { return reward[index(s, a, next)]; }
};

struct TabularPolicy {
  int num_states = 0;
  int num_actions = 0;
  // pi(a|s) at [s * num_actions + a].
  std::vector<double> probs;

  double operator()(int s, int a) const {
    return probs[static_cast<std::size_t>(s) * num_actions + a];
  }
};

// Exact time-indexed values; t runs over 0..horizon-1.
struct OracleValues {
  int horizon = 0;
  int num_states = 0;
  int num_actions = 0;
  std::vector<double> q;  // [(t * S + s) * A + a]
  std::vector<double> v;  // [t * S + s]

  double Q(int t, int s, int a) const {
    return q[(static_cast<std::size_t>(t) * num_states + s) * num_actions + a];
  }
  double V(int t, int s) const { return v[static_cast<std::size_t>(t) * num_states + s]; }
  double A(int t, int s, int a) const { return Q(t, s, a) - V(t, s); }
};

// Throw std::invalid_argument describing the first broken invariant.
void validate(const TabularMDP& mdp);
void validate(const TabularPolicy& policy, const TabularMDP& mdp);

// Finite-horizon backward induction.
OracleValues solve_policy_values(const TabularMDP& mdp, const TabularPolicy& policy);

// Max |Q - (expected reward + discounted next value)| and |V - E_pi[Q]|.
double bellman_residual(const TabularMDP& mdp, const TabularPolicy& policy,
                        const OracleValues& values);

// N rollouts under the policy. Step t records the acting state in target_path
// ("s<k>"), the action in action_kind ("a<k>") and the successor in new_text.
// Deterministic in (seed); group index g of a batch should use
// stream_seed(seed, g).
ProblemGroup sample_group(const TabularMDP& mdp, const TabularPolicy& policy, int rollouts,
                          std::uint64_t seed, const std::string& problem_id = "mdp");

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream);

// States are (step index, tabular state) so that the key is Markov for the
// finite-horizon problem; actions are the tabular action id.
class TabularSignatureScheme final : public SignatureScheme {
 public:
  std::vector<StepKeys> annotate(const Rollout& rollout) const override;
  std::string terminal_state(const Rollout& rollout) const override;

  static std::string state_key(int t, int s);
  static std::string action_key(int a);
};

// Running mean and variance (Welford).
struct Moments {
  std::size_t n = 0;
  double mean_value = 0.0;
  double m2 = 0.0;

  void add(double x) {
    ++n;
    const double delta = x - mean_value;
    mean_value += delta / static_cast<double>(n);
    m2 += delta * (x - mean_value);
  }
  double mean() const { return mean_value; }
  // Unbiased sample variance; 0 for fewer than two samples.
  double variance() const { return n < 2 ? 0.0 : m2 / static_cast<double>(n - 1); }
};

struct BiasEntry {
  int t = 0;
  int state = 0;
  int action = 0;
  double oracle_q = 0.0;
  // Q-hat moments over the groups that visited (t, s, a).
  Moments q_hat;
  std::size_t total_visits = 0;
  // visit count within a group -> number of groups
  std::map<std::size_t, std::size_t> visit_histogram;
  // visit count within a group -> Q-hat moments over those groups
  std::map<std::size_t, Moments> q_hat_by_count;

  double bias() const { return q_hat.mean() - oracle_q; }
  double standard_error() const;
  bool within(double sigmas) const;
};

struct BiasReport {
  int rollouts_per_group = 0;
  int groups = 0;
  std::uint64_t seed = 0;
  double sigmas = 4.0;
  std::size_t min_visits = 100;
  std::vector<BiasEntry> entries;

  // Every entry with at least min_visits aggregate visits is within the gate.
  bool passed() const;
};

BiasReport estimate_bias(const TabularMDP& mdp, const TabularPolicy& policy, int rollouts,
                         int groups, std::uint64_t seed, std::size_t min_visits = 100,
                         double sigmas = 4.0);

// Var[Q-hat | n visits] / Var[Q-hat | 2n visits] for one (t, s, a) cell;
// roughly 2 when the estimator variance scales as sigma^2 / n.
struct VarianceRatio {
  int action = 0;
  std::size_t visits = 0;
  std::size_t groups_at_n = 0;
  std::size_t groups_at_2n = 0;
  double var_n = 0.0;
  double var_2n = 0.0;
  double ratio = 0.0;
};

// Every (n, 2n) pair at the start state (t = 0) where both visit counts were
// seen in at least min_groups groups.
std::vector<VarianceRatio> root_variance_ratios(const BiasReport& report, const TabularMDP& mdp,
                                                std::size_t min_groups);

// 5 states (start, two interior, success, failure), 3 actions, H = 8.
TabularMDP default_validation_mdp();
TabularPolicy default_validation_policy();

}  // namespace rtmc
