#include "rtmc/estimator.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>
#include <tuple>
#include <unordered_set>

namespace rtmc {

void check(const EstimatorConfig& config) {
  if (!(config.gamma > 0.0 && config.gamma <= 1.0)) {
    throw std::invalid_argument("gamma must lie in (0, 1]");
  }
  if (!(config.n_prior >= 0.0) || !std::isfinite(config.n_prior)) {
    throw std::invalid_argument("n_prior must be a finite value >= 0");
  }
  if (!(config.beta >= 0.0) || !std::isfinite(config.beta)) {
    throw std::invalid_argument("beta must be a finite value >= 0");
  }
  if (!(config.std_floor > 0.0)) throw std::invalid_argument("std_floor must be > 0");
}

std::string_view to_string(Method m) {
  switch (m) {
    case Method::grpo:
      return "grpo";
    case Method::grpo_step:
      return "grpo_step";
    case Method::rtmc:
      return "rtmc";
  }
  return "rtmc";
}

std::optional<Method> parse_method(std::string_view text) {
  if (text == "grpo") return Method::grpo;
  if (text == "grpo_step") return Method::grpo_step;
  if (text == "rtmc") return Method::rtmc;
  return std::nullopt;
}

// --- StatsTable -------------------------------------------------------------

StatsTable::Key StatsTable::key(const std::string& state, const std::string& action) {
  auto [sit, s_new] = state_ids_.try_emplace(state, static_cast<std::uint32_t>(state_names_.size()));
  if (s_new) {
    state_names_.push_back(state);
    state_cells_.emplace_back();
  }
  auto [ait, a_new] =
      action_ids_.try_emplace(action, static_cast<std::uint32_t>(action_names_.size()));
  if (a_new) action_names_.push_back(action);
  return {sit->second, ait->second};
}

void StatsTable::record(Key key, double ret) {
  Cell& pair = pairs_[key.packed()];
  pair.count += 1;
  pair.return_sum += ret;
  Cell& state = state_cells_.at(key.state);
  state.count += 1;
  state.return_sum += ret;
}

const StatsTable::Cell* StatsTable::find(const std::string& state, const std::string& action) const {
  const auto s = state_ids_.find(state);
  const auto a = action_ids_.find(action);
  if (s == state_ids_.end() || a == action_ids_.end()) return nullptr;
  const auto it = pairs_.find(Key{s->second, a->second}.packed());
  return it == pairs_.end() ? nullptr : &it->second;
}

const StatsTable::Cell* StatsTable::find_state(const std::string& state) const {
  const auto s = state_ids_.find(state);
  if (s == state_ids_.end() || state_cells_[s->second].count == 0) return nullptr;
  return &state_cells_[s->second];
}

const StatsTable::Cell& StatsTable::cell(Key key) const {
  const auto it = pairs_.find(key.packed());
  if (it == pairs_.end()) throw std::out_of_range("state-action key was never recorded");
  return it->second;
}

const StatsTable::Cell& StatsTable::state_cell(std::uint32_t state) const {
  const Cell& c = state_cells_.at(state);
  if (c.count == 0) throw std::out_of_range("state was never recorded");
  return c;
}

std::vector<StatsTable::Entry> StatsTable::entries() const {
  std::vector<Entry> out;
  out.reserve(pairs_.size());
  for (const auto& [packed, c] : pairs_) {
    out.push_back({state_names_[packed >> 32], action_names_[packed & 0xffffffffu], c});
  }
  std::sort(out.begin(), out.end(), [](const Entry& a, const Entry& b) {
    return std::tie(a.state, a.action) < std::tie(b.state, b.action);
  });
  return out;
}

// --- rewards and returns ----------------------------------------------------

std::vector<double> trace_rewards(const Rollout& rollout) {
  std::vector<double> r;
  r.reserve(rollout.steps.size());
  for (const StepRecord& s : rollout.steps) r.push_back(s.step_reward);
  return r;
}

std::vector<double> shape_rewards(std::span<const double> rewards, std::span<const StepKeys> keys,
                                  double beta) {
  if (rewards.size() != keys.size()) {
    throw std::invalid_argument("shape_rewards: rewards and keys differ in length");
  }
  std::vector<double> out(rewards.begin(), rewards.end());
  if (beta == 0.0) return out;
  for (std::size_t t = 0; t < out.size(); ++t) {
    if (keys[t].has_modifications && keys[t].is_validation) out[t] += beta;
  }
  return out;
}

std::vector<double> shape_rewards(const Rollout& rollout, const SignatureScheme& scheme,
                                  const EstimatorConfig& config) {
  const auto keys = scheme.annotate(rollout);
  return shape_rewards(trace_rewards(rollout), keys, config.beta);
}

std::vector<double> discounted_returns(std::span<const double> rewards, double terminal_reward,
                                       double gamma) {
  std::vector<double> g(rewards.size());
  double next = 0.0;
  for (std::size_t i = rewards.size(); i-- > 0;) {
    double r = rewards[i];
    if (i + 1 == rewards.size()) r += terminal_reward;
    next = r + gamma * next;
    g[i] = next;
  }
  return g;
}

std::vector<double> discounted_returns(const Rollout& rollout, double gamma) {
  const auto r = trace_rewards(rollout);
  return discounted_returns(r, rollout.terminal_reward, gamma);
}

// --- tree --------------------------------------------------------------------

namespace {

struct RolloutPass {
  std::vector<StepKeys> keys;
  std::vector<double> returns;
  std::vector<StatsTable::Key> ids;
};

struct TreePass {
  StatsTable table;
  std::vector<RolloutPass> rollouts;
};

TreePass run_phase_one(const ProblemGroup& group, const SignatureScheme& scheme,
                       const EstimatorConfig& config, BaseRewards base_rewards) {
  check(config);
  if (!base_rewards.empty() && base_rewards.size() != group.rollouts.size()) {
    throw std::invalid_argument("base rewards must cover every rollout of the group");
  }
  TreePass pass;
  pass.rollouts.reserve(group.rollouts.size());
  std::unordered_set<std::uint64_t> seen;
  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const Rollout& rollout = group.rollouts[i];
    RolloutPass rp;
    rp.keys = scheme.annotate(rollout);
    const std::vector<double> base =
        base_rewards.empty() ? trace_rewards(rollout) : base_rewards[i];
    if (base.size() != rollout.steps.size()) {
      throw std::invalid_argument("base rewards length differs from step count for " +
                                  rollout.rollout_id);
    }
    const auto shaped = shape_rewards(base, rp.keys, config.beta);
    rp.returns = discounted_returns(shaped, rollout.terminal_reward, config.gamma);

    seen.clear();
    rp.ids.reserve(rp.keys.size());
    for (std::size_t t = 0; t < rp.keys.size(); ++t) {
      const auto id = pass.table.key(rp.keys[t].state, rp.keys[t].action);
      rp.ids.push_back(id);
      if (config.first_visit_dedup && !seen.insert(id.packed()).second) continue;
      pass.table.record(id, rp.returns[t]);
    }
    pass.rollouts.push_back(std::move(rp));
  }
  return pass;
}

}  // namespace

StatsTable build_tree(const ProblemGroup& group, const SignatureScheme& scheme,
                      const EstimatorConfig& config, BaseRewards base_rewards) {
  return run_phase_one(group, scheme, config, base_rewards).table;
}

double q_hat(const StatsTable& table, const std::string& state, const std::string& action) {
  const auto* c = table.find(state, action);
  if (!c) throw std::out_of_range("q_hat: unvisited (state, action)");
  return c->return_sum / static_cast<double>(c->count);
}

double v_hat(const StatsTable& table, const std::string& state) {
  const auto* c = table.find_state(state);
  if (!c) throw std::out_of_range("v_hat: unvisited state");
  return c->return_sum / static_cast<double>(c->count);
}

double v_smoothed(std::size_t visits, double state_return_sum, double prior, double n_prior) {
  const double n = static_cast<double>(visits);
  return (state_return_sum + n_prior * prior) / (n + n_prior);
}

double v_smoothed(const StatsTable& table, const std::string& state, double prior,
                  const EstimatorConfig& config) {
  const auto* c = table.find_state(state);
  if (!c) throw std::out_of_range("v_smoothed: unvisited state");
  return v_smoothed(c->count, c->return_sum, prior, config.n_prior);
}

std::vector<AdvantageRecord> advantages(const ProblemGroup& group, const SignatureScheme& scheme,
                                        const EstimatorConfig& config, BaseRewards base_rewards) {
  TreePass pass = run_phase_one(group, scheme, config, base_rewards);
  const double prior = success_rate(group);

  std::vector<AdvantageRecord> out;
  std::size_t total = 0;
  for (const Rollout& r : group.rollouts) total += r.steps.size();
  out.reserve(total);

  for (std::size_t i = 0; i < group.rollouts.size(); ++i) {
    const Rollout& rollout = group.rollouts[i];
    RolloutPass& rp = pass.rollouts[i];
    for (std::size_t t = 0; t < rp.keys.size(); ++t) {
      const auto& pair = pass.table.cell(rp.ids[t]);
      const auto& state = pass.table.state_cell(rp.ids[t].state);
      AdvantageRecord rec;
      rec.rollout_id = rollout.rollout_id;
      rec.step = static_cast<int>(t);
      rec.state_sig = std::move(rp.keys[t].state);
      rec.action_sig = std::move(rp.keys[t].action);
      rec.ret = rp.returns[t];
      rec.q = pair.return_sum / static_cast<double>(pair.count);
      rec.v_raw = state.return_sum / static_cast<double>(state.count);
      rec.v_smoothed = v_smoothed(state.count, state.return_sum, prior, config.n_prior);
      rec.adv = rec.q - rec.v_smoothed;
      rec.adv_normalized = rec.adv;
      rec.token_span = rollout.steps[t].token_span;
      rec.method = Method::rtmc;
      out.push_back(std::move(rec));
    }
  }
  if (config.normalize && !out.empty()) normalize_group(out, config.std_floor);
  return out;
}

double population_std(std::span<const double> values) {
  if (values.empty()) return 0.0;
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(values.size());
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / static_cast<double>(values.size()));
}

void normalize_group(std::span<AdvantageRecord> records, double std_floor) {
  std::vector<double> adv;
  adv.reserve(records.size());
  for (const auto& r : records) adv.push_back(r.adv);
  const double scale = std::max(population_std(adv), std_floor);
  for (auto& r : records) r.adv_normalized = r.adv / scale;
}

std::vector<TokenAdvantage> broadcast_tokens(std::span<const AdvantageRecord> records) {
  std::vector<TokenAdvantage> out;
  std::map<std::string, std::vector<TokenSpan>> spans;
  for (const auto& r : records) {
    if (r.token_span.begin < 0 || r.token_span.end < r.token_span.begin) {
      throw std::invalid_argument("broadcast_tokens: malformed span in " + r.rollout_id);
    }
    spans[r.rollout_id].push_back(r.token_span);
  }
  for (auto& [id, list] : spans) {
    std::sort(list.begin(), list.end(),
              [](const TokenSpan& a, const TokenSpan& b) { return a.begin < b.begin; });
    for (std::size_t i = 1; i < list.size(); ++i) {
      if (list[i].begin <= list[i - 1].end) {
        throw std::invalid_argument("broadcast_tokens: overlapping token spans in " + id);
      }
    }
  }
  for (const auto& r : records) {
    for (std::int64_t tok = r.token_span.begin; tok <= r.token_span.end; ++tok) {
      out.push_back({r.rollout_id, tok, r.adv_normalized});
    }
  }
  return out;
}

}  // namespace rtmc
