#pragma once

#include <array>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "rtmc/trajectory.hpp"

namespace rtmc {

// Action categories, grouped by effect on problem-solving progress rather
// than by tool name.
enum class Category { view, search, modify, create, execute, test, install, fileop, think, finish };

inline constexpr std::array<Category, 10> kAllCategories = {
    Category::view,    Category::search, Category::modify,  Category::create, Category::execute,
    Category::test,    Category::install, Category::fileop, Category::think,  Category::finish};

std::string_view to_string(Category c);
std::optional<Category> parse_category(std::string_view text);

enum class MatchKind { tool, bash_prefix };

struct ClassifierRule {
  MatchKind kind = MatchKind::tool;
  // tool:        "NAME" or "NAME SUBCOMMAND" (subcommand = first word of action_kind)
  // bash_prefix: leading words of a shell command, matched on word boundaries
  std::string pattern;
  Category category = Category::execute;
};

struct ClassifierRules {
  std::vector<ClassifierRule> rules;
  // Tools whose action_kind is a shell command line; bash_prefix rules only
  // apply to these.
  std::set<std::string> shell_tools;
  Category fallback = Category::execute;

  // Built-in table for editor/shell agent traces.
  static ClassifierRules defaults();
};

// First matching rule wins; unmatched steps get rules.fallback.
Category classify_action(const StepRecord& step, const ClassifierRules& rules);

// The first simple command of a shell line, with leading `cd ... &&` segments
// and VAR=value assignments dropped.
std::string primary_command(std::string_view command_line);

// 0-based 100-line bucket indices covered by an inclusive 1-based range.
std::pair<int, int> view_buckets(const LineRange& range);
inline constexpr int kLinesPerBucket = 100;

// First four lowercase hex digits of MD5(old_text + new_text).
std::string content_hash(std::string_view old_text, std::string_view new_text);

std::string action_signature(const StepRecord& step, const ClassifierRules& rules);
// Same, for a step already classified as `category`.
std::string action_signature(const StepRecord& step, Category category);

// Cumulative per-file record of what a rollout has done so far. Feeding steps
// one at a time and rendering after each gives the state signature of every
// prefix in linear time.
class StateAccumulator {
 public:
  explicit StateAccumulator(const ClassifierRules& rules) : rules_(&rules) {}

  void add(const StepRecord& step);
  void add(const StepRecord& step, Category category);

  // "file_1:OPS_1 | ... | (think=K,test_ok=P,test_fail=Q)"
  std::string render() const;

  // Any M:, I: or C entry recorded so far.
  bool has_modifications() const { return has_modifications_; }

  const std::map<std::string, std::set<std::string>>& files() const { return files_; }

 private:
  const ClassifierRules* rules_;
  std::map<std::string, std::set<std::string>> files_;
  int think_ = 0;
  int test_ok_ = 0;
  int test_fail_ = 0;
  bool has_modifications_ = false;
};

// Signature of the state reached after `history` (all steps strictly before t).
std::string state_signature(std::span<const StepRecord> history, const ClassifierRules& rules);

// Per-step keys an estimator needs, as produced by a signature scheme.
struct StepKeys {
  std::string state;
  std::string action;
  // Short label for visualization (the action category for SWE traces).
  std::string label;
  bool is_validation = false;
  bool has_modifications = false;
};

// Maps a rollout onto comparable (state, action) keys. The estimator only
// sees this interface, so any abstraction can be plugged in.
class SignatureScheme {
 public:
  virtual ~SignatureScheme() = default;

  // One entry per step; entry t describes the state before step t and the
  // action taken there.
  virtual std::vector<StepKeys> annotate(const Rollout& rollout) const = 0;

  // State reached after the final step.
  virtual std::string terminal_state(const Rollout& rollout) const = 0;
};

class SweSignatureScheme final : public SignatureScheme {
 public:
  explicit SweSignatureScheme(ClassifierRules rules = ClassifierRules::defaults())
      : rules_(std::move(rules)) {}

  std::vector<StepKeys> annotate(const Rollout& rollout) const override;
  std::string terminal_state(const Rollout& rollout) const override;

  const ClassifierRules& rules() const { return rules_; }

 private:
  ClassifierRules rules_;
};

}  // namespace rtmc
