#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <memory>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "rtmc/estimator.hpp"
#include "rtmc/signature.hpp"
#include "rtmc/synthetic_mdp.hpp"
#include "rtmc/trajectory.hpp"

namespace rtmc {

// Malformed input; line is 1-based, 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& message)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// An input file that could not be opened.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Collects the names of fields the reader skipped.
struct UnknownFields {
  std::set<std::string> names;
};

// One rollout per line:
//   {problem_id, rollout_id, outcome, terminal_reward,
//    steps: [{index, tool, action_kind, target_path?, line_start?, line_end?,
//             old_text?, new_text?, result_status, step_reward?, token_begin,
//             token_end}]}
Rollout parse_rollout(std::string_view line, std::size_t line_no = 0,
                      UnknownFields* unknown = nullptr);
std::string serialize_rollout(const Rollout& rollout);

// Blank lines are skipped.
std::vector<Rollout> read_trace(std::istream& in, UnknownFields* unknown = nullptr);
void write_trace(std::ostream& out, std::span<const Rollout> rollouts);

// Line-oriented trace reader that keeps only byte offsets in memory and loads
// one problem group at a time.
class TraceSource {
 public:
  // "-" reads standard input (buffered whole).
  static TraceSource open(const std::string& path);
  static TraceSource from_string(std::string text);

  std::size_t group_count() const { return groups_.size(); }
  const std::string& problem_id(std::size_t g) const { return groups_[g].problem_id; }
  ProblemGroup load(std::size_t g);

  // Unparsed lines of group g, so parsing can happen off the reading thread.
  struct RawGroup {
    std::string problem_id;
    std::vector<std::string> lines;
    std::vector<std::size_t> line_numbers;
  };
  RawGroup read_raw(std::size_t g);
  static ProblemGroup parse(const RawGroup& raw);

  // Rollout-level invariant violations found while indexing.
  const std::vector<Violation>& violations() const { return violations_; }
  const UnknownFields& unknown_fields() const { return unknown_; }

 private:
  struct LineRef {
    std::uint64_t offset = 0;
    std::size_t line_no = 0;
  };
  struct GroupRef {
    std::string problem_id;
    std::vector<LineRef> lines;
  };

  void index(std::istream& in);
  std::string read_line(const LineRef& ref);

  std::unique_ptr<std::ifstream> file_;
  std::string buffer_;
  std::vector<GroupRef> groups_;
  std::vector<Violation> violations_;
  UnknownFields unknown_;
};

// "kind pattern... category" per line, '#' comments; kinds are `tool` and
// `bash_prefix`. Two directives: `shell TOOL` marks a shell tool and
// `fallback CATEGORY` sets the unmatched category.
ClassifierRules parse_rules(std::istream& in);
ClassifierRules load_rules_file(const std::string& path);
void write_rules(std::ostream& out, const ClassifierRules& rules);

// One output line per step (fields in fixed order).
std::string serialize_record(const AdvantageRecord& record, bool uniform_outcome);
std::string serialize_token(const TokenAdvantage& token, bool uniform_outcome);

std::string json_escape(std::string_view text);

// {"states", "actions", "gamma", "horizon", "start"?, "transitions": P[s][a][s'],
//  "rewards"?: r[s][a][s'], "terminal": [{"state", "reward"}], "policy": pi[s][a]}
struct MdpSpec {
  TabularMDP mdp;
  TabularPolicy policy;
};
MdpSpec parse_mdp_json(std::string_view text);
MdpSpec load_mdp_file(const std::string& path);

}  // namespace rtmc
