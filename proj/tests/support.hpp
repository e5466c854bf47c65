#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "rtmc/signature.hpp"
#include "rtmc/trajectory.hpp"

namespace rtmc::testing {

inline StepRecord editor(std::string kind, std::string path) {
  StepRecord s;
  s.tool = "file_editor";
  s.action_kind = std::move(kind);
  s.target_path = std::move(path);
  return s;
}

inline StepRecord view(std::string path, std::optional<LineRange> range = std::nullopt) {
  StepRecord s = editor("view", std::move(path));
  s.line_range = range;
  return s;
}

inline StepRecord replace(std::string path, std::string old_text, std::string new_text) {
  StepRecord s = editor("str_replace", std::move(path));
  s.old_text = std::move(old_text);
  s.new_text = std::move(new_text);
  return s;
}

inline StepRecord insert(std::string path, std::string new_text) {
  StepRecord s = editor("insert", std::move(path));
  s.new_text = std::move(new_text);
  return s;
}

inline StepRecord bash(std::string command, ResultStatus status = ResultStatus::ok,
                       std::optional<std::string> target = std::nullopt) {
  StepRecord s;
  s.tool = "bash";
  s.action_kind = std::move(command);
  s.target_path = std::move(target);
  s.result_status = status;
  return s;
}

inline StepRecord named(std::string tool) {
  StepRecord s;
  s.tool = std::move(tool);
  s.action_kind = s.tool;
  return s;
}

inline StepRecord finish() { return named("finish"); }
inline StepRecord think() { return named("think"); }

// Fills in indices and disjoint increasing token spans (10 tokens per step
// with a one-token gap) and derives the terminal reward from the outcome.
inline Rollout make_rollout(std::string id, std::vector<StepRecord> steps, Outcome outcome,
                            std::string problem = "p") {
  Rollout r;
  r.rollout_id = std::move(id);
  r.problem_id = std::move(problem);
  r.outcome = outcome;
  r.terminal_reward = outcome == Outcome::success ? 1.0 : 0.0;
  std::int64_t tok = 0;
  for (std::size_t t = 0; t < steps.size(); ++t) {
    steps[t].index = static_cast<int>(t);
    steps[t].token_span = {tok, tok + 9};
    tok += 11;
  }
  r.steps = std::move(steps);
  return r;
}

inline ProblemGroup make_group(std::vector<Rollout> rollouts, std::string problem = "p") {
  for (Rollout& r : rollouts) r.problem_id = problem;
  return {std::move(problem), std::move(rollouts)};
}

// Four rollouts over core.py:
//   r1: finish                      -> fail
//   r2: view, finish                -> success
//   r3: view, modify, finish        -> success
//   r4: view, modify, run (error)   -> fail
inline ProblemGroup four_rollout_group() {
  const auto edit = [] { return replace("core.py", "return a - b", "return a + b"); };
  return make_group({
      make_rollout("r1", {finish()}, Outcome::fail),
      make_rollout("r2", {view("core.py"), finish()}, Outcome::success),
      make_rollout("r3", {view("core.py"), edit(), finish()}, Outcome::success),
      make_rollout("r4", {view("core.py"), edit(), bash("python core.py", ResultStatus::error)},
                   Outcome::fail),
  });
}

// Collapses every state to one key and makes every rollout its own action,
// so the tree degenerates into N independent branches off a single root.
class DegenerateScheme final : public SignatureScheme {
 public:
  std::vector<StepKeys> annotate(const Rollout& rollout) const override {
    std::vector<StepKeys> keys(rollout.steps.size());
    for (StepKeys& k : keys) {
      k.state = "root";
      k.action = rollout.rollout_id;
      k.label = "x";
    }
    return keys;
  }
  std::string terminal_state(const Rollout&) const override { return "root"; }
};

// Random SWE-looking step over a small file / command vocabulary.
inline StepRecord random_step(std::mt19937_64& rng) {
  static const char* const kFiles[] = {"core.py", "utils.py", "a/b.py", "test_main.py", "z.py"};
  static const char* const kCommands[] = {"pytest -x",         "python -m unittest",
                                          "grep -rn foo src/", "ls",
                                          "cat setup.py",      "python run.py",
                                          "pip install six",   "./custom --flag",
                                          "cd src && pytest",  "mkdir build"};
  std::uniform_int_distribution<int> pick(0, 9);
  const std::string file = kFiles[pick(rng) % 5];
  switch (pick(rng)) {
    case 0:
      return view(file);
    case 1: {
      std::uniform_int_distribution<int> line(1, 900);
      int a = line(rng);
      int b = line(rng);
      if (a > b) std::swap(a, b);
      return view(file, LineRange{a, b});
    }
    case 2:
      return replace(file, "x" + std::to_string(pick(rng)), "y" + std::to_string(pick(rng)));
    case 3:
      return insert(file, "line " + std::to_string(pick(rng)));
    case 4: {
      StepRecord s = editor("create", file);
      s.new_text = "body";
      return s;
    }
    case 5: {
      StepRecord s = named("search");
      if (pick(rng) < 5) s.target_path = file;
      return s;
    }
    case 6:
      return think();
    default: {
      const auto status = pick(rng) < 3 ? ResultStatus::error : ResultStatus::ok;
      std::optional<std::string> target;
      if (pick(rng) < 5) target = file;
      return bash(kCommands[pick(rng)], status, target);
    }
  }
}

inline Rollout random_rollout(std::mt19937_64& rng, std::string id, int max_steps = 12,
                              std::string problem = "p") {
  std::uniform_int_distribution<int> len(0, max_steps);
  std::vector<StepRecord> steps;
  const int n = len(rng);
  for (int i = 0; i < n; ++i) steps.push_back(random_step(rng));
  const Outcome outcomes[] = {Outcome::success, Outcome::fail, Outcome::incomplete};
  std::uniform_int_distribution<int> o(0, 2);
  Rollout r = make_rollout(std::move(id), std::move(steps), outcomes[o(rng)], std::move(problem));
  for (StepRecord& s : r.steps) {
    if (o(rng) == 0) s.step_reward = std::uniform_real_distribution<double>(-0.1, 0.1)(rng);
  }
  return r;
}

// Groups built from a shared random prefix so the tree actually branches.
inline ProblemGroup random_group(std::mt19937_64& rng, int rollouts, std::string problem = "p") {
  std::vector<StepRecord> prefix;
  std::uniform_int_distribution<int> plen(0, 4);
  for (int i = plen(rng); i > 0; --i) prefix.push_back(random_step(rng));
  std::vector<Rollout> out;
  for (int i = 0; i < rollouts; ++i) {
    Rollout tail = random_rollout(rng, "r" + std::to_string(i), 6, problem);
    std::vector<StepRecord> steps = prefix;
    steps.insert(steps.end(), tail.steps.begin(), tail.steps.end());
    Rollout r = make_rollout(tail.rollout_id, std::move(steps), tail.outcome, problem);
    out.push_back(std::move(r));
  }
  return make_group(std::move(out), std::move(problem));
}

}  // namespace rtmc::testing
