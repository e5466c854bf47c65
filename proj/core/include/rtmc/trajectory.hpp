#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rtmc {

enum class ResultStatus { ok, error };
enum class Outcome { success, fail, incomplete };

std::string_view to_string(ResultStatus s);
std::string_view to_string(Outcome o);
std::optional<ResultStatus> parse_result_status(std::string_view text);
std::optional<Outcome> parse_outcome(std::string_view text);

// Inclusive, 1-based.
struct LineRange {
  int start = 1;
  int end = 1;

  friend bool operator==(const LineRange&, const LineRange&) = default;
};

// Inclusive, 0-based indices into the rollout's token stream.
struct TokenSpan {
  std::int64_t begin = 0;
  std::int64_t end = 0;

  std::int64_t size() const { return end - begin + 1; }
  friend bool operator==(const TokenSpan&, const TokenSpan&) = default;
};

// One tool call of an episode, as reported by the rollout producer.
struct StepRecord {
  int index = 0;
  std::string tool;
  // Editor subcommand ("view", "str_replace", ...) or the full shell command line.
  std::string action_kind;
  std::optional<std::string> target_path;
  std::optional<LineRange> line_range;
  std::optional<std::string> old_text;
  std::optional<std::string> new_text;
  ResultStatus result_status = ResultStatus::ok;
  double step_reward = 0.0;
  TokenSpan token_span;

  friend bool operator==(const StepRecord&, const StepRecord&) = default;
};

struct Rollout {
  std::string rollout_id;
  std::string problem_id;
  std::vector<StepRecord> steps;
  double terminal_reward = 0.0;
  Outcome outcome = Outcome::fail;

  friend bool operator==(const Rollout&, const Rollout&) = default;
};

// All rollouts sampled for one problem; the unit advantages are computed over.
struct ProblemGroup {
  std::string problem_id;
  std::vector<Rollout> rollouts;

  friend bool operator==(const ProblemGroup&, const ProblemGroup&) = default;
};

struct Violation {
  std::string rollout_id;
  std::optional<int> step;
  std::string kind;
  std::string message;
};

std::string to_string(const Violation& v);

// Checks every data-model invariant. Returns one entry per failure; an empty
// result means the group is well formed.
std::vector<Violation> validate_group(const ProblemGroup& group);

// True iff all terminal rewards in the group are equal (such groups carry no
// gradient signal under group-relative estimators).
bool is_uniform_outcome(const ProblemGroup& group);

// Fraction of rollouts whose terminal reward is exactly 1.
double success_rate(const ProblemGroup& group);

// Buckets rollouts by problem_id, preserving first-appearance order of
// problems and the input order of rollouts within each problem.
std::vector<ProblemGroup> group_by_problem(std::vector<Rollout> rollouts);

}  // namespace rtmc
