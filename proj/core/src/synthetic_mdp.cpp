#include "rtmc/synthetic_mdp.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <random>
#include <stdexcept>

namespace rtmc {
namespace {

constexpr double kRowTolerance = 1e-12;

// Uniform double in [0, 1) from the top 53 bits; identical on every platform,
// unlike std::uniform_real_distribution.
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int sample_index(std::mt19937_64& rng, const double* probs, int n) {
  const double u = uniform01(rng);
  double acc = 0.0;
  int last_positive = 0;
  for (int i = 0; i < n; ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  return last_positive;
}

int parse_prefixed(const std::string& text, char prefix) {
  int value = -1;
  if (text.size() < 2 || text[0] != prefix) return -1;
  const auto res = std::from_chars(text.data() + 1, text.data() + text.size(), value);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return -1;
  return value;
}

}  // namespace

void validate(const TabularMDP& mdp) {
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  if (S < 1 || A < 1) throw std::invalid_argument("mdp needs at least one state and action");
  const std::size_t cube = static_cast<std::size_t>(S) * A * S;
  if (mdp.transition.size() != cube || mdp.reward.size() != cube) {
    throw std::invalid_argument("mdp transition/reward tensors have the wrong size");
  }
  if (mdp.terminal.size() != static_cast<std::size_t>(S) ||
      mdp.terminal_reward.size() != static_cast<std::size_t>(S)) {
    throw std::invalid_argument("mdp terminal vectors have the wrong size");
  }
  if (mdp.start_state < 0 || mdp.start_state >= S) throw std::invalid_argument("bad start state");
  if (!(mdp.gamma > 0.0 && mdp.gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0, 1]");
  if (mdp.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  for (int s = 0; s < S; ++s) {
    if (mdp.terminal[s] && mdp.terminal_reward[s] != 0.0 && mdp.terminal_reward[s] != 1.0) {
      throw std::invalid_argument("terminal rewards must be 0 or 1 (state " + std::to_string(s) + ")");
    }
    for (int a = 0; a < A; ++a) {
      double row = 0.0;
      for (int n = 0; n < S; ++n) {
        const double p = mdp.p(s, a, n);
        if (!(p >= 0.0)) throw std::invalid_argument("negative transition probability");
        if (!std::isfinite(mdp.r(s, a, n))) throw std::invalid_argument("reward is not finite");
        row += p;
      }
      if (std::abs(row - 1.0) > kRowTolerance) {
        throw std::invalid_argument("transition row (" + std::to_string(s) + "," +
                                    std::to_string(a) + ") is not stochastic");
      }
      if (mdp.terminal[s] && mdp.p(s, a, s) != 1.0) {
        throw std::invalid_argument("terminal state " + std::to_string(s) + " does not absorb");
      }
    }
  }
}

void validate(const TabularPolicy& policy, const TabularMDP& mdp) {
  if (policy.num_states != mdp.num_states || policy.num_actions != mdp.num_actions ||
      policy.probs.size() != static_cast<std::size_t>(mdp.num_states) * mdp.num_actions) {
    throw std::invalid_argument("policy shape does not match the mdp");
  }
  for (int s = 0; s < policy.num_states; ++s) {
    double row = 0.0;
    for (int a = 0; a < policy.num_actions; ++a) {
      if (!(policy(s, a) >= 0.0)) throw std::invalid_argument("negative policy probability");
      row += policy(s, a);
    }
    if (std::abs(row - 1.0) > kRowTolerance) {
      throw std::invalid_argument("policy row " + std::to_string(s) + " is not stochastic");
    }
  }
}

OracleValues solve_policy_values(const TabularMDP& mdp, const TabularPolicy& policy) {
  validate(mdp);
  validate(policy, mdp);
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  const int H = mdp.horizon;
  OracleValues out;
  out.horizon = H;
  out.num_states = S;
  out.num_actions = A;
  out.q.assign(static_cast<std::size_t>(H) * S * A, 0.0);
  out.v.assign(static_cast<std::size_t>(H) * S, 0.0);

  std::vector<double> next_v(S, 0.0);  // V at t + 1; zero past the horizon
  for (int t = H - 1; t >= 0; --t) {
    for (int s = 0; s < S; ++s) {
      if (mdp.terminal[s]) continue;
      double v = 0.0;
      for (int a = 0; a < A; ++a) {
        double q = 0.0;
        for (int n = 0; n < S; ++n) {
          const double p = mdp.p(s, a, n);
          if (p == 0.0) continue;
          const double cont = mdp.terminal[n] ? mdp.terminal_reward[n] : mdp.gamma * next_v[n];
          q += p * (mdp.r(s, a, n) + cont);
        }
        out.q[(static_cast<std::size_t>(t) * S + s) * A + a] = q;
        v += policy(s, a) * q;
      }
      out.v[static_cast<std::size_t>(t) * S + s] = v;
    }
    for (int s = 0; s < S; ++s) next_v[s] = out.V(t, s);
  }
  return out;
}

double bellman_residual(const TabularMDP& mdp, const TabularPolicy& policy,
                        const OracleValues& values) {
  double worst = 0.0;
  for (int t = 0; t < mdp.horizon; ++t) {
    for (int s = 0; s < mdp.num_states; ++s) {
      if (mdp.terminal[s]) continue;
      double v = 0.0;
      for (int a = 0; a < mdp.num_actions; ++a) {
        double target = 0.0;
        for (int n = 0; n < mdp.num_states; ++n) {
          double cont = 0.0;
          if (mdp.terminal[n]) {
            cont = mdp.terminal_reward[n];
          } else if (t + 1 < mdp.horizon) {
            cont = mdp.gamma * values.V(t + 1, n);
          }
          target += mdp.p(s, a, n) * (mdp.r(s, a, n) + cont);
        }
        worst = std::max(worst, std::abs(values.Q(t, s, a) - target));
        v += policy(s, a) * values.Q(t, s, a);
      }
      worst = std::max(worst, std::abs(values.V(t, s) - v));
    }
  }
  return worst;
}

std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
  std::array<std::uint32_t, 2> out;
  seq.generate(out.begin(), out.end());
  return (std::uint64_t{out[0]} << 32) | out[1];
}

ProblemGroup sample_group(const TabularMDP& mdp, const TabularPolicy& policy, int rollouts,
                          std::uint64_t seed, const std::string& problem_id) {
  if (rollouts < 1) throw std::invalid_argument("sample_group needs at least one rollout");
  std::mt19937_64 rng(seed);
  ProblemGroup group;
  group.problem_id = problem_id;
  group.rollouts.reserve(rollouts);
  for (int i = 0; i < rollouts; ++i) {
    Rollout r;
    r.rollout_id = problem_id + "/" + std::to_string(i);
    r.problem_id = problem_id;
    int s = mdp.start_state;
    for (int t = 0; t < mdp.horizon && !mdp.terminal[s]; ++t) {
      const int a = sample_index(rng, &policy.probs[static_cast<std::size_t>(s) * mdp.num_actions],
                                 mdp.num_actions);
      const int next =
          sample_index(rng, &mdp.transition[mdp.index(s, a, 0)], mdp.num_states);
      StepRecord step;
      step.index = t;
      step.tool = "mdp";
      step.action_kind = "a" + std::to_string(a);
      step.target_path = "s" + std::to_string(s);
      step.new_text = "s" + std::to_string(next);
      step.step_reward = mdp.r(s, a, next);
      step.token_span = {2 * static_cast<std::int64_t>(t), 2 * static_cast<std::int64_t>(t) + 1};
      r.steps.push_back(std::move(step));
      s = next;
    }
    if (mdp.terminal[s]) {
      r.terminal_reward = mdp.terminal_reward[s];
      r.outcome = r.terminal_reward == 1.0 ? Outcome::success : Outcome::fail;
    } else {
      r.terminal_reward = 0.0;
      r.outcome = Outcome::incomplete;
    }
    group.rollouts.push_back(std::move(r));
  }
  return group;
}

std::string TabularSignatureScheme::state_key(int t, int s) {
  return "t" + std::to_string(t) + ":s" + std::to_string(s);
}

std::string TabularSignatureScheme::action_key(int a) { return "a" + std::to_string(a); }

std::vector<StepKeys> TabularSignatureScheme::annotate(const Rollout& rollout) const {
  std::vector<StepKeys> keys;
  keys.reserve(rollout.steps.size());
  for (const StepRecord& step : rollout.steps) {
    StepKeys k;
    k.state = "t" + std::to_string(step.index) + ":" + step.target_path.value_or("?");
    k.action = step.action_kind;
    k.label = step.action_kind;
    keys.push_back(std::move(k));
  }
  return keys;
}

std::string TabularSignatureScheme::terminal_state(const Rollout& rollout) const {
  if (rollout.steps.empty()) return "t0:?";
  const StepRecord& last = rollout.steps.back();
  return "t" + std::to_string(last.index + 1) + ":" + last.new_text.value_or("?");
}

double BiasEntry::standard_error() const {
  if (q_hat.n == 0) return 0.0;
  return std::sqrt(q_hat.variance() / static_cast<double>(q_hat.n));
}

bool BiasEntry::within(double sigmas) const {
  const double se = standard_error();
  if (se == 0.0) return std::abs(bias()) <= 1e-12;
  return std::abs(bias()) < sigmas * se;
}

bool BiasReport::passed() const {
  for (const BiasEntry& e : entries) {
    if (e.total_visits >= min_visits && !e.within(sigmas)) return false;
  }
  return true;
}

BiasReport estimate_bias(const TabularMDP& mdp, const TabularPolicy& policy, int rollouts,
                         int groups, std::uint64_t seed, std::size_t min_visits, double sigmas) {
  if (groups < 100) throw std::invalid_argument("estimate_bias needs at least 100 groups");
  const OracleValues oracle = solve_policy_values(mdp, policy);

  EstimatorConfig cfg;
  cfg.gamma = mdp.gamma;
  cfg.n_prior = 0.0;
  cfg.beta = 0.0;
  cfg.normalize = false;
  cfg.first_visit_dedup = true;

  const TabularSignatureScheme scheme;
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  std::vector<BiasEntry> cells(static_cast<std::size_t>(mdp.horizon) * S * A);
  for (int t = 0; t < mdp.horizon; ++t) {
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < A; ++a) {
        BiasEntry& e = cells[(static_cast<std::size_t>(t) * S + s) * A + a];
        e.t = t;
        e.state = s;
        e.action = a;
        e.oracle_q = oracle.Q(t, s, a);
      }
    }
  }

  for (int g = 0; g < groups; ++g) {
    const ProblemGroup group =
        sample_group(mdp, policy, rollouts, stream_seed(seed, static_cast<std::uint64_t>(g)));
    const StatsTable table = build_tree(group, scheme, cfg);
    for (const auto& entry : table.entries()) {
      const auto colon = entry.state.find(':');
      const int t = parse_prefixed(entry.state.substr(0, colon), 't');
      const int s = parse_prefixed(entry.state.substr(colon + 1), 's');
      const int a = parse_prefixed(entry.action, 'a');
      if (t < 0 || s < 0 || a < 0 || t >= mdp.horizon || s >= S || a >= A) {
        throw std::logic_error("unexpected tabular key " + entry.state + " / " + entry.action);
      }
      BiasEntry& e = cells[(static_cast<std::size_t>(t) * S + s) * A + a];
      const double q = entry.cell.return_sum / static_cast<double>(entry.cell.count);
      e.q_hat.add(q);
      e.total_visits += entry.cell.count;
      e.visit_histogram[entry.cell.count] += 1;
      e.q_hat_by_count[entry.cell.count].add(q);
    }
  }

  BiasReport report;
  report.rollouts_per_group = rollouts;
  report.groups = groups;
  report.seed = seed;
  report.sigmas = sigmas;
  report.min_visits = min_visits;
  for (BiasEntry& e : cells) {
    if (e.q_hat.n > 0) report.entries.push_back(std::move(e));
  }
  return report;
}

std::vector<VarianceRatio> root_variance_ratios(const BiasReport& report, const TabularMDP& mdp,
                                                std::size_t min_groups) {
  std::vector<VarianceRatio> out;
  for (const BiasEntry& e : report.entries) {
    if (e.t != 0 || e.state != mdp.start_state) continue;
    for (const auto& [n, moments] : e.q_hat_by_count) {
      const auto twice = e.q_hat_by_count.find(2 * n);
      if (twice == e.q_hat_by_count.end()) continue;
      if (moments.n < min_groups || twice->second.n < min_groups) continue;
      VarianceRatio r;
      r.action = e.action;
      r.visits = n;
      r.groups_at_n = moments.n;
      r.groups_at_2n = twice->second.n;
      r.var_n = moments.variance();
      r.var_2n = twice->second.variance();
      r.ratio = r.var_2n > 0.0 ? r.var_n / r.var_2n : 0.0;
      out.push_back(r);
    }
  }
  return out;
}

TabularMDP default_validation_mdp() {
  TabularMDP m;
  m.num_states = 5;
  m.num_actions = 3;
  m.gamma = 0.99;
  m.horizon = 8;
  m.start_state = 0;
  m.transition.assign(5 * 3 * 5, 0.0);
  m.reward.assign(5 * 3 * 5, 0.0);
  m.terminal = {false, false, false, true, true};
  m.terminal_reward = {0.0, 0.0, 0.0, 1.0, 0.0};

  // Rows over successor states {0, 1, 2, success, failure}.
  const double rows[3][3][5] = {
      {{0.0, 0.7, 0.2, 0.0, 0.1}, {0.3, 0.0, 0.6, 0.0, 0.1}, {0.0, 0.3, 0.0, 0.2, 0.5}},
      {{0.0, 0.0, 0.3, 0.5, 0.2}, {0.4, 0.3, 0.0, 0.0, 0.3}, {0.0, 0.0, 0.0, 0.3, 0.7}},
      {{0.0, 0.5, 0.0, 0.2, 0.3}, {0.0, 0.0, 0.2, 0.6, 0.2}, {0.5, 0.0, 0.0, 0.0, 0.5}},
  };
  for (int s = 0; s < 3; ++s) {
    for (int a = 0; a < 3; ++a) {
      for (int n = 0; n < 5; ++n) {
        m.transition[m.index(s, a, n)] = rows[s][a][n];
        // Small cost on the second action so step rewards enter the returns.
        if (a == 1) m.reward[m.index(s, a, n)] = -0.01;
      }
    }
  }
  for (int s = 3; s < 5; ++s) {
    for (int a = 0; a < 3; ++a) m.transition[m.index(s, a, s)] = 1.0;
  }
  return m;
}

TabularPolicy default_validation_policy() {
  TabularPolicy p;
  p.num_states = 5;
  p.num_actions = 3;
  p.probs = {0.5, 0.3, 0.2,  //
             0.4, 0.3, 0.3,  //
             0.3, 0.5, 0.2,  //
             1.0, 0.0, 0.0,  //
             1.0, 0.0, 0.0};
  return p;
}

}  // namespace rtmc
