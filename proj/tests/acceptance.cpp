// Acceptance run: one PASS/FAIL line per criterion; exit status 1 if any fail.

#include <openssl/evp.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <nlohmann/json.hpp>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rtmc/commands.hpp"
#include "rtmc/estimator.hpp"
#include "rtmc/reporting.hpp"
#include "rtmc/synthetic_mdp.hpp"
#include "rtmc/trace_io.hpp"
#include "support.hpp"

namespace {

using namespace rtmc;
using namespace rtmc::testing;
using Clock = std::chrono::steady_clock;

// Tolerances and limits.
constexpr double kGoldenTol = 1e-12;
constexpr double kGoldenSeconds = 1.0;
constexpr double kCollapseTol = 1e-9;
constexpr int kBiasGroups = 10000;
constexpr double kBiasSeconds = 60.0;
constexpr double kRatioLo = 1.6;
constexpr double kRatioHi = 2.5;
constexpr std::size_t kRatioMinGroups = 100;
constexpr int kOrderTrials = 1000;
constexpr double kQuadrantThreshold = 0.01;
constexpr double kPercentTol = 0.1;
constexpr int kThroughputRollouts = 10000;
constexpr int kThroughputSteps = 100;
constexpr int kRolloutsPerProblem = 8;
constexpr double kThroughputSeconds = 30.0;
// Peak RSS on the 10x trace may be at most this multiple of the small one.
constexpr double kMemoryGrowth = 2.0;

int failures = 0;

void report(const char* id, bool ok, const std::string& detail) {
  std::printf("%s %s %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  failures += ok ? 0 : 1;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, double a, double b = 0, double c = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

std::vector<nlohmann::json> json_lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(nlohmann::json::parse(line));
  return out;
}

void ac1() {
  const auto t0 = Clock::now();
  RunConfig cfg;
  cfg.estimator_config.gamma = 0.99;
  cfg.estimator_config.n_prior = 0.0;
  cfg.threads = 1;
  std::ostringstream out;
  std::ostringstream err;
  const int code = cmd_advantage(RTMC_FOUR_ROLLOUTS, cfg, out, err);
  const double elapsed = seconds_since(t0);
  const auto recs = json_lines(out.str());
  bool ok = code == 0 && recs.size() == 9;
  double q1 = NAN, q2 = NAN, v = NAN, a1 = NAN, a2 = NAN;
  for (const auto& r : recs) {
    if (r["step"] != 0) continue;
    if (r["action_sig"] == "finish") {
      q1 = r["q"];
      a1 = r["adv"];
    } else if (r["action_sig"] == "view:full@core.py") {
      q2 = r["q"];
      a2 = r["adv"];
    }
    v = r["v_raw"];
  }
  const double want_q2 = (0.99 + 0.9801) / 3.0;
  const double want_v = (0.99 + 0.9801) / 4.0;
  ok = ok && std::abs(q1) <= kGoldenTol && std::abs(q2 - want_q2) <= kGoldenTol &&
       std::abs(v - want_v) <= kGoldenTol && a2 > 0 && a1 < 0 && elapsed < kGoldenSeconds;
  report("AC1", ok,
         fmt("four-rollout fixture: Q(a1)=%.12g Q(a2)=%.12g V(s0)=%.12g", q1, q2, v) +
             fmt(" A(a1)=%.6f A(a2)=%.6f in %.3fs", a1, a2, elapsed));
}

void ac2() {
  const double rewards[] = {1, 0, 0, 1};
  std::vector<Rollout> rollouts;
  for (int i = 0; i < 4; ++i) {
    rollouts.push_back(make_rollout("r" + std::to_string(i), {finish()},
                                    rewards[i] > 0 ? Outcome::success : Outcome::fail));
  }
  const auto group = make_group(std::move(rollouts));
  EstimatorConfig cfg;
  cfg.gamma = 1.0;
  const auto recs = advantages(group, DegenerateScheme(), cfg);
  const auto grpo = grpo_advantages(group);
  const double want[] = {1, -1, -1, 1};
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) {
    worst = std::max(worst, std::abs(recs[i].adv_normalized - want[i]));
    worst = std::max(worst, std::abs(grpo.advantages[i] - want[i]));
  }
  report("AC2", recs.size() == 4 && worst <= kCollapseTol,
         fmt("degenerate signatures reduce to group-normalised rewards, max err %.3g", worst));
}

void ac3_ac4() {
  const auto mdp = default_validation_mdp();
  const auto t0 = Clock::now();
  const auto rep = estimate_bias(mdp, default_validation_policy(), 8, kBiasGroups, 7);
  const double elapsed = seconds_since(t0);
  std::size_t gated = 0;
  double worst = 0.0;
  for (const auto& e : rep.entries) {
    if (e.total_visits < rep.min_visits) continue;
    ++gated;
    if (e.standard_error() > 0) worst = std::max(worst, std::abs(e.bias()) / e.standard_error());
  }
  report("AC3", rep.passed() && gated > 0 && elapsed < kBiasSeconds,
         fmt("%g cells with >=100 visits, worst |bias|/SE = %.2f (< 4), %.1fs", double(gated),
             worst, elapsed));

  const auto ratios = root_variance_ratios(rep, mdp, kRatioMinGroups);
  bool ok = !ratios.empty();
  std::string list;
  for (const auto& r : ratios) {
    ok = ok && r.ratio >= kRatioLo && r.ratio <= kRatioHi;
    list += fmt(" a%g:n=%g:%.3f", r.action, double(r.visits), r.ratio);
  }
  report("AC4", ok, "root Var(n)/Var(2n) in [1.6, 2.5]:" + list);
}

void ac5() {
  bool ok = v_smoothed(1, 0.0, 1.0, 2.0) == 2.0 / 3.0;
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double q = u(rng);
    const double p = u(rng);
    ok = ok && std::abs(v_smoothed(1, q, p, 2.0) - (q / 3.0 + 2.0 * p / 3.0)) <= 1e-15;
  }
  // Every rollout diverges at the root, so each interior state has one visit.
  const auto group = make_group({
      make_rollout("a", {view("a.py"), insert("a.py", "x"), finish()}, Outcome::success),
      make_rollout("b", {view("b.py"), think(), finish()}, Outcome::fail),
      make_rollout("c", {think(), bash("pytest", ResultStatus::error)}, Outcome::fail),
      make_rollout("d", {finish()}, Outcome::success),
  });
  EstimatorConfig cfg;
  cfg.n_prior = 0.0;
  cfg.normalize = false;
  const SweSignatureScheme scheme;
  const StatsTable table = build_tree(group, scheme, cfg);
  std::size_t interior = 0;
  for (const auto& r : advantages(group, scheme, cfg)) {
    ok = ok && r.adv == r.q - r.v_raw;
    if (r.step > 0) {
      ok = ok && table.find_state(r.state_sig)->count == 1 && r.adv == 0.0;
      ++interior;
    }
  }
  EstimatorConfig prior = cfg;
  prior.n_prior = 2.0;
  std::size_t revived = 0;
  for (const auto& r : advantages(group, scheme, prior)) revived += r.step > 0 && r.adv != 0.0;
  report("AC5", ok && interior == 5 && revived > 0,
         fmt("singleton prior weight 2/3; %g interior singleton advantages all 0 without the "
             "prior, %g nonzero with it",
             double(interior), double(revived)));
}

std::string md5_hex(const std::string& text) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_Digest(text.data(), text.size(), digest, &len, EVP_md5(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 15]);
  }
  return out;
}

void ac6() {
  // Find an edit whose digest starts with the documented prefix.
  const std::string old_text = "return a - b";
  std::string new_text;
  for (int i = 0;; ++i) {
    new_text = "return a + b  # " + std::to_string(i);
    if (md5_hex(old_text + new_text).compare(0, 4, "a3f2") == 0) break;
  }
  StepRecord edit = replace("core.py", old_text, new_text);
  StepRecord test = bash("pytest test_main.py", ResultStatus::ok, std::string("test_main.py"));
  const auto group = make_group({
      make_rollout("full", {view("core.py"), edit, test, finish()}, Outcome::success),
      make_rollout("part", {view("core.py", LineRange{101, 300}), finish()}, Outcome::fail),
      make_rollout("deep", {view("core.py", LineRange{201, 300}), finish()}, Outcome::fail),
  });
  const std::string path = (std::filesystem::temp_directory_path() / "rtmc_ac6.jsonl").string();
  {
    std::ofstream f(path);
    write_trace(f, group.rollouts);
  }
  std::ostringstream out;
  std::ostringstream err;
  const int code = cmd_signatures(path, RunConfig{}, out, err);
  const std::string text = out.str();
  std::vector<std::string> actions;
  std::vector<std::string> states;
  for (const auto& j : json_lines(text)) {
    if (j.contains("action_sig")) actions.push_back(j["action_sig"]);
    states.push_back(j["state_sig"]);
  }
  auto has_action = [&](const std::string& s) {
    return std::find(actions.begin(), actions.end(), s) != actions.end();
  };
  auto has_state_part = [&](const std::string& s) {
    return std::any_of(states.begin(), states.end(), [&](const std::string& st) {
      return st.rfind(s + " | ", 0) == 0 || st.find(" | " + s + " | ") != std::string::npos;
    });
  };
  std::string missing;
  for (const char* a : {"view:full@core.py", "view:partial[1-2]@core.py",
                        "modify:replace:a3f2@core.py", "test@test_main.py:ok"}) {
    if (!has_action(a)) missing += std::string(" ") + a;
  }
  for (const char* s : {"core.py:Vf", "core.py:V[2]"}) {
    if (!has_state_part(s)) missing += std::string(" ") + s;
  }
  std::filesystem::remove(path);
  report("AC6", code == 0 && missing.empty(),
         missing.empty() ? "all six literal signatures reproduced by the signatures command"
                         : "missing:" + missing);
}

void ac7() {
  std::mt19937_64 rng(77);
  const ClassifierRules rules = ClassifierRules::defaults();
  int mismatches = 0;
  for (int i = 0; i < kOrderTrials; ++i) {
    std::vector<StepRecord> history;
    const int n = std::uniform_int_distribution<int>(1, 25)(rng);
    for (int k = 0; k < n; ++k) history.push_back(random_step(rng));
    const std::string before = state_signature(history, rules);
    std::shuffle(history.begin(), history.end(), rng);
    mismatches += state_signature(history, rules) != before;
  }
  report("AC7", mismatches == 0,
         fmt("%g randomized histories permuted, %g signature mismatches", kOrderTrials,
             mismatches));
}

void ac8() {
  // Four successes and four failures. Three successes open with a view that
  // one failure shares; the fourth success opens with a search taken by the
  // other three failures. Outcome-level (x) and tree (y) signs then disagree
  // on the off-diagonal rollouts.
  const auto vw = [] { return view("core.py"); };
  const auto sr = [] { return named("search"); };
  const auto edit = [] { return replace("core.py", "a - b", "a + b"); };
  const auto run_tests = [](ResultStatus s) { return bash("pytest", s); };
  const auto group = make_group({
      make_rollout("s1", {vw(), edit(), run_tests(ResultStatus::ok), finish()}, Outcome::success),
      make_rollout("s2", {vw(), edit(), finish()}, Outcome::success),
      make_rollout("s3", {vw(), think(), edit(), finish()}, Outcome::success),
      make_rollout("s4", {sr(), vw(), edit(), finish()}, Outcome::success),
      make_rollout("f1", {vw(), think(), finish()}, Outcome::fail),
      make_rollout("f2", {sr(), run_tests(ResultStatus::error), finish()}, Outcome::fail),
      make_rollout("f3", {sr(), think(), finish()}, Outcome::fail),
      make_rollout("f4", {sr(), finish()}, Outcome::fail),
  });
  const SweSignatureScheme scheme;
  const auto x = grpo_step_advantages(group, scheme, GrpoStepOptions{});
  const auto y = advantages(group, scheme, EstimatorConfig{});
  const auto rep = quadrant_analysis(group, x, y, kQuadrantThreshold);
  QuadrantSplit all;
  for (const auto* s : {&rep.success, &rep.fail}) {
    for (std::size_t q = 0; q < 4; ++q) all.counts[q] += s->counts[q];
    all.neutral += s->neutral;
  }
  bool ok = true;
  std::string detail;
  for (Quadrant q : kAllQuadrants) {
    ok = ok && all.count(q) > 0;
    detail += " " + std::string(to_string(q)) + "=" + std::to_string(all.count(q));
  }
  for (const auto* s : {&rep.success, &rep.fail}) {
    if (s->classified() == 0) continue;
    double sum = 0.0;
    for (Quadrant q : kAllQuadrants) sum += s->percent(q);
    ok = ok && std::abs(sum - 100.0) <= kPercentTol;
  }
  report("AC8", ok, "quadrants at threshold 0.01:" + detail + " neutral=" +
                        std::to_string(all.neutral) + "; split percentages sum to 100");
}

void ac9() {
  std::printf(
      "AC9 N/A pass@1 tables, the ablation and learning curves need full LLM training; not "
      "reproduced, and no criterion here depends on them\n");
}

std::string write_synthetic_trace(int rollouts, std::uint64_t seed) {
  const std::string path = (std::filesystem::temp_directory_path() /
                            ("rtmc_ac10_" + std::to_string(rollouts) + ".jsonl"))
                               .string();
  std::ofstream f(path, std::ios::binary);
  std::mt19937_64 rng(seed);
  for (int p = 0; p < rollouts / kRolloutsPerProblem; ++p) {
    const std::string problem = "problem-" + std::to_string(p);
    std::vector<StepRecord> prefix;
    for (int k = 0; k < 10; ++k) prefix.push_back(random_step(rng));
    for (int i = 0; i < kRolloutsPerProblem; ++i) {
      std::vector<StepRecord> steps = prefix;
      while (static_cast<int>(steps.size()) < kThroughputSteps) steps.push_back(random_step(rng));
      const Outcome o = (i + p) % 3 == 0 ? Outcome::success : Outcome::fail;
      f << serialize_rollout(make_rollout(problem + "/" + std::to_string(i), std::move(steps), o,
                                          problem))
        << '\n';
    }
  }
  return path;
}

struct ChildRun {
  int status = -1;
  double seconds = 0.0;
  long max_rss_kb = 0;
};

ChildRun run_cli(const std::string& trace) {
  ChildRun r;
  const auto t0 = Clock::now();
  const pid_t pid = fork();
  if (pid == 0) {
    const int null = open("/dev/null", O_WRONLY);
    dup2(null, 1);
    dup2(null, 2);
    execl(RTMC_CLI, RTMC_CLI, "advantage", trace.c_str(), "--threads", "4",
          static_cast<char*>(nullptr));
    _exit(127);
  }
  int status = 0;
  rusage usage{};
  wait4(pid, &status, 0, &usage);
  r.seconds = seconds_since(t0);
  r.status = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.max_rss_kb = usage.ru_maxrss;
  return r;
}

void ac10() {
  const std::string small = write_synthetic_trace(kThroughputRollouts / 10, 1);
  const std::string large = write_synthetic_trace(kThroughputRollouts, 2);
  const auto bytes = std::filesystem::file_size(large);
  const ChildRun a = run_cli(small);
  const ChildRun b = run_cli(large);
  std::filesystem::remove(small);
  std::filesystem::remove(large);
  const bool ok = a.status == 0 && b.status == 0 && b.seconds < kThroughputSeconds &&
                  b.max_rss_kb < kMemoryGrowth * a.max_rss_kb;
  report("AC10", ok,
         fmt("10000x100 trace (%.0f MB) in %.2fs; peak RSS ", bytes / 1e6, b.seconds) +
             fmt("%.1f MB vs %.1f MB on 1/10 of the rollouts", b.max_rss_kb / 1024.0,
                 a.max_rss_kb / 1024.0));
}

}  // namespace

int main() {
  const std::pair<const char*, std::function<void()>> checks[] = {
      {"AC1", ac1}, {"AC2", ac2}, {"AC3", ac3_ac4}, {"AC5", ac5}, {"AC6", ac6},
      {"AC7", ac7}, {"AC8", ac8}, {"AC9", ac9},     {"AC10", ac10},
  };
  for (const auto& [id, fn] : checks) {
    try {
      fn();
    } catch (const std::exception& e) {
      report(id, false, std::string("threw: ") + e.what());
    }
  }
  std::printf("%s\n", failures ? "acceptance: FAILED" : "acceptance: all criteria passed");
  return failures ? 1 : 0;
}
