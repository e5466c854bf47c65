#include "rtmc/trajectory.hpp"

#include <cmath>
#include <set>
#include <unordered_map>
#include <utility>

namespace rtmc {

std::string_view to_string(ResultStatus s) {
  return s == ResultStatus::ok ? "ok" : "error";
}

std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::success:
      return "success";
    case Outcome::fail:
      return "fail";
    case Outcome::incomplete:
      return "incomplete";
  }
  return "fail";
}

std::optional<ResultStatus> parse_result_status(std::string_view text) {
  if (text == "ok") return ResultStatus::ok;
  if (text == "error") return ResultStatus::error;
  return std::nullopt;
}

std::optional<Outcome> parse_outcome(std::string_view text) {
  if (text == "success") return Outcome::success;
  if (text == "fail") return Outcome::fail;
  if (text == "incomplete") return Outcome::incomplete;
  return std::nullopt;
}

std::string to_string(const Violation& v) {
  std::string out = v.rollout_id;
  if (v.step) out += " step " + std::to_string(*v.step);
  out += ": " + v.kind + ": " + v.message;
  return out;
}

namespace {

void check_rollout(const Rollout& r, const std::string& problem_id,
                   std::vector<Violation>& out) {
  auto add = [&](std::optional<int> step, std::string kind, std::string msg) {
    out.push_back({r.rollout_id, step, std::move(kind), std::move(msg)});
  };

  if (r.problem_id != problem_id) {
    add(std::nullopt, "problem_mismatch",
        "rollout problem_id '" + r.problem_id + "' differs from group '" + problem_id + "'");
  }
  if (!std::isfinite(r.terminal_reward) || r.terminal_reward < 0.0 || r.terminal_reward > 1.0) {
    add(std::nullopt, "terminal_reward_range",
        "terminal_reward " + std::to_string(r.terminal_reward) + " outside [0, 1]");
  }
  const double expected = r.outcome == Outcome::success ? 1.0 : 0.0;
  if (r.terminal_reward != expected) {
    add(std::nullopt, "outcome_reward_mismatch",
        "outcome " + std::string(to_string(r.outcome)) + " requires terminal_reward " +
            std::to_string(expected) + ", got " + std::to_string(r.terminal_reward));
  }

  for (std::size_t t = 0; t < r.steps.size(); ++t) {
    const StepRecord& s = r.steps[t];
    const int step = static_cast<int>(t);
    if (s.index != step) {
      add(step, "step_index", "expected index " + std::to_string(t) + ", got " +
                                  std::to_string(s.index));
    }
    if (!std::isfinite(s.step_reward)) add(step, "step_reward", "step reward is not finite");
    if (s.token_span.begin < 0 || s.token_span.begin > s.token_span.end) {
      add(step, "token_span", "invalid token span [" + std::to_string(s.token_span.begin) +
                                  "," + std::to_string(s.token_span.end) + "]");
    }
    if (s.line_range) {
      const LineRange& lr = *s.line_range;
      if (lr.start < 1 || lr.end < 1 || lr.start > lr.end) {
        add(step, "line_range", "invalid line range " + std::to_string(lr.start) + "-" +
                                    std::to_string(lr.end));
      }
    }
    if (t > 0) {
      const TokenSpan& prev = r.steps[t - 1].token_span;
      if (s.token_span.begin <= prev.end) {
        const bool overlaps = s.token_span.end >= prev.begin;
        add(step, overlaps ? "span_overlap" : "span_order",
            "span [" + std::to_string(s.token_span.begin) + "," +
                std::to_string(s.token_span.end) + "] does not follow [" +
                std::to_string(prev.begin) + "," + std::to_string(prev.end) + "]");
      }
    }
  }
}

}  // namespace

std::vector<Violation> validate_group(const ProblemGroup& group) {
  std::vector<Violation> out;
  if (group.rollouts.empty()) {
    out.push_back({"", std::nullopt, "empty_group", "group '" + group.problem_id + "' has no rollouts"});
    return out;
  }
  std::set<std::string_view> seen;
  for (const Rollout& r : group.rollouts) {
    if (!seen.insert(r.rollout_id).second) {
      out.push_back({r.rollout_id, std::nullopt, "duplicate_rollout_id", "rollout_id is not unique"});
    }
    check_rollout(r, group.problem_id, out);
  }
  return out;
}

bool is_uniform_outcome(const ProblemGroup& group) {
  for (const Rollout& r : group.rollouts) {
    if (r.terminal_reward != group.rollouts.front().terminal_reward) return false;
  }
  return true;
}

double success_rate(const ProblemGroup& group) {
  if (group.rollouts.empty()) return 0.0;
  std::size_t wins = 0;
  for (const Rollout& r : group.rollouts) wins += r.terminal_reward == 1.0 ? 1 : 0;
  return static_cast<double>(wins) / static_cast<double>(group.rollouts.size());
}

std::vector<ProblemGroup> group_by_problem(std::vector<Rollout> rollouts) {
  std::vector<ProblemGroup> groups;
  std::unordered_map<std::string, std::size_t> slot;
  for (Rollout& r : rollouts) {
    auto [it, inserted] = slot.try_emplace(r.problem_id, groups.size());
    if (inserted) groups.push_back({r.problem_id, {}});
    groups[it->second].rollouts.push_back(std::move(r));
  }
  return groups;
}

}  // namespace rtmc
