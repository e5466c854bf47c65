#include "rtmc/commands.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <nlohmann/json.hpp>
#include <optional>
#include <ostream>
#include <sstream>
#include <thread>
#include <tuple>
#include <type_traits>

#include "rtmc/baselines.hpp"
#include "rtmc/reporting.hpp"
#include "rtmc/synthetic_mdp.hpp"
#include "rtmc/trace_io.hpp"

namespace rtmc {

namespace {

using ordered_json = nlohmann::ordered_json;

unsigned worker_count(const RunConfig& config) {
  if (config.threads > 0) return static_cast<unsigned>(config.threads);
  return std::max(1u, std::thread::hardware_concurrency());
}

// Groups are read in batches on the calling thread, parsed and processed on
// a pool, and handed to `sink` in file order.
template <typename Work, typename Sink>
void for_each_group(TraceSource& source, const RunConfig& config, Work work, Sink sink) {
  using Result = std::invoke_result_t<Work, const ProblemGroup&>;
  std::vector<std::size_t> selected;
  for (std::size_t g = 0; g < source.group_count(); ++g) {
    if (config.problem.empty() || source.problem_id(g) == config.problem) selected.push_back(g);
  }
  const unsigned threads = worker_count(config);
  const std::size_t batch = static_cast<std::size_t>(threads) * 4;

  for (std::size_t start = 0; start < selected.size(); start += batch) {
    const std::size_t n = std::min(batch, selected.size() - start);
    std::vector<TraceSource::RawGroup> raw;
    raw.reserve(n);
    for (std::size_t i = 0; i < n; ++i) raw.push_back(source.read_raw(selected[start + i]));

    std::vector<ProblemGroup> groups(n);
    std::vector<std::optional<Result>> results(n);
    auto run = [&](std::size_t k) {
      groups[k] = TraceSource::parse(raw[k]);
      raw[k] = {};
      results[k].emplace(work(groups[k]));
    };

    if (threads == 1 || n == 1) {
      for (std::size_t k = 0; k < n; ++k) run(k);
    } else {
      std::atomic<std::size_t> next{0};
      std::exception_ptr error;
      std::mutex error_mutex;
      {
        std::vector<std::jthread> pool;
        for (unsigned i = 0; i < std::min<std::size_t>(threads, n); ++i) {
          pool.emplace_back([&] {
            for (std::size_t k; (k = next.fetch_add(1)) < n;) {
              try {
                run(k);
              } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
              }
            }
          });
        }
      }
      if (error) std::rethrow_exception(error);
    }
    for (std::size_t k = 0; k < n; ++k) sink(groups[k], *results[k]);
  }
}

CompareConfig compare_config(const RunConfig& config) {
  CompareConfig c;
  c.estimator = config.estimator_config;
  c.grpo_step.gamma = config.estimator_config.gamma;
  c.grpo_step.rewards = config.step_reward_config;
  c.grpo_step.raw = config.grpo_step_raw;
  c.grpo_step.std_floor = config.estimator_config.std_floor;
  c.rtmc_step_rewards = config.step_rewards;
  return c;
}

std::vector<AdvantageRecord> method_records(const ProblemGroup& group,
                                            const SignatureScheme& scheme,
                                            const RunConfig& config, Method method) {
  const CompareConfig c = compare_config(config);
  switch (method) {
    case Method::grpo:
      return grpo_records(group, scheme);
    case Method::grpo_step:
      return grpo_step_advantages(group, scheme, c.grpo_step);
    case Method::rtmc:
      return rtmc_records(group, scheme, c);
  }
  return {};
}

// Opens the trace and reports unknown fields and invariant violations.
// Returns an exit code when the command should stop.
std::optional<int> open_trace(const std::string& trace, std::optional<TraceSource>& source,
                              std::ostream& err) {
  source.emplace(TraceSource::open(trace));
  for (const std::string& name : source->unknown_fields().names) {
    err << "warning: ignoring unknown field '" << name << "'\n";
  }
  if (!source->violations().empty()) {
    for (const Violation& v : source->violations()) err << "invalid: " << to_string(v) << '\n';
    err << "error: " << source->violations().size() << " invariant violation(s)\n";
    return kExitValidation;
  }
  return std::nullopt;
}

void check_config(const RunConfig& config) {
  try {
    check(config.estimator_config);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
}

template <typename Fn>
int guarded(std::ostream& err, Fn fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const InputError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

ordered_json split_json(const QuadrantSplit& split) {
  ordered_json counts = ordered_json::object();
  ordered_json percent = ordered_json::object();
  ordered_json percent_all = ordered_json::object();
  for (Quadrant q : kAllQuadrants) {
    const std::string name(to_string(q));
    counts[name] = split.count(q);
    percent[name] = split.percent(q);
    percent_all[name] = split.percent_of_all(q);
  }
  ordered_json out;
  out["counts"] = counts;
  out["neutral"] = split.neutral;
  out["classified"] = split.classified();
  out["total"] = split.total();
  out["percent"] = percent;
  out["percent_of_all"] = percent_all;
  return out;
}

void merge(QuadrantSplit& into, const QuadrantSplit& from) {
  for (std::size_t i = 0; i < into.counts.size(); ++i) into.counts[i] += from.counts[i];
  into.neutral += from.neutral;
}

}  // namespace

int cmd_advantage(const std::string& trace, const RunConfig& config, std::ostream& out,
                  std::ostream& err) {
  return guarded(err, [&] {
    check_config(config);
    const SweSignatureScheme scheme(resolve_rules(config));
    std::optional<TraceSource> source;
    if (auto code = open_trace(trace, source, err)) return *code;

    std::size_t groups = 0;
    std::size_t uniform = 0;
    std::size_t lines = 0;
    for_each_group(
        *source, config,
        [&](const ProblemGroup& group) {
          const auto records = method_records(group, scheme, config, config.estimator);
          const bool flat = is_uniform_outcome(group);
          std::string text;
          std::size_t count = 0;
          if (config.per_token) {
            for (const TokenAdvantage& t : broadcast_tokens(records)) {
              text += serialize_token(t, flat);
              text += '\n';
              ++count;
            }
          } else {
            for (const AdvantageRecord& r : records) {
              text += serialize_record(r, flat);
              text += '\n';
              ++count;
            }
          }
          return std::tuple{std::move(text), flat, count};
        },
        [&](const ProblemGroup&, const std::tuple<std::string, bool, std::size_t>& result) {
          out << std::get<0>(result);
          ++groups;
          uniform += std::get<1>(result) ? 1 : 0;
          lines += std::get<2>(result);
        });
    out.flush();
    err << "advantage: " << groups << " group(s), " << uniform << " uniform-outcome, " << lines
        << (config.per_token ? " token" : " step") << " record(s)\n";
    return static_cast<int>(kExitOk);
  });
}

int cmd_tree(const std::string& trace, const RunConfig& config, std::ostream& out,
             std::ostream& err) {
  return guarded(err, [&] {
    check_config(config);
    const SweSignatureScheme scheme(resolve_rules(config));
    std::optional<TraceSource> source;
    if (auto code = open_trace(trace, source, err)) return *code;
    for_each_group(
        *source, config,
        [&](const ProblemGroup& group) {
          return export_tree_dot(group, scheme, config.estimator_config);
        },
        [&](const ProblemGroup&, const std::string& dot) { out << dot; });
    out.flush();
    return static_cast<int>(kExitOk);
  });
}

int cmd_compare(const std::string& trace, const RunConfig& config, std::ostream& out,
                std::ostream& err) {
  return guarded(err, [&] {
    check_config(config);
    const SweSignatureScheme scheme(resolve_rules(config));
    const CompareConfig c = compare_config(config);
    std::optional<TraceSource> source;
    if (auto code = open_trace(trace, source, err)) return *code;

    QuadrantReport pooled;
    pooled.threshold = config.threshold;
    std::size_t groups = 0;
    out << "rollout_id,outcome,method,step,advantage\n";
    for_each_group(
        *source, config,
        [&](const ProblemGroup& group) {
          const auto rows = compare_per_rollout(group, scheme, c);
          std::ostringstream csv;
          write_compare_csv(csv, rows);
          std::string text = csv.str();
          text.erase(0, text.find('\n') + 1);
          const auto x = grpo_step_advantages(group, scheme, c.grpo_step);
          const auto y = rtmc_records(group, scheme, c);
          return std::pair{std::move(text), quadrant_analysis(group, x, y, config.threshold)};
        },
        [&](const ProblemGroup&, const std::pair<std::string, QuadrantReport>& result) {
          out << result.first;
          merge(pooled.success, result.second.success);
          merge(pooled.fail, result.second.fail);
          ++groups;
        });
    out.flush();

    ordered_json report;
    report["x"] = "grpo_step";
    report["y"] = "rtmc";
    report["threshold"] = pooled.threshold;
    report["groups"] = groups;
    report["success"] = split_json(pooled.success);
    report["fail"] = split_json(pooled.fail);
    const std::string text = report.dump(2) + "\n";
    if (config.report.empty()) {
      err << text;
    } else {
      std::ofstream file(config.report);
      if (!file) throw ConfigError("cannot write report '" + config.report + "'");
      file << text;
    }
    return static_cast<int>(kExitOk);
  });
}

int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    MdpSpec spec{default_validation_mdp(), default_validation_policy()};
    if (!config.mdp.empty()) spec = load_mdp_file(config.mdp);
    if (config.groups < 100) throw ConfigError("simulate needs groups >= 100");

    const BiasReport report = estimate_bias(spec.mdp, spec.policy, config.rollouts, config.groups,
                                            config.seed, config.min_visits, config.sigmas);
    const auto ratios = root_variance_ratios(report, spec.mdp, config.min_visits);

    ordered_json doc;
    doc["rollouts"] = report.rollouts_per_group;
    doc["groups"] = report.groups;
    doc["seed"] = report.seed;
    doc["gamma"] = spec.mdp.gamma;
    doc["horizon"] = spec.mdp.horizon;
    doc["sigmas"] = report.sigmas;
    doc["min_visits"] = report.min_visits;
    doc["passed"] = report.passed();
    std::size_t gated = 0;
    ordered_json cells = ordered_json::array();
    for (const BiasEntry& e : report.entries) {
      const bool checked = e.total_visits >= report.min_visits;
      gated += checked ? 1 : 0;
      ordered_json histogram = ordered_json::object();
      for (const auto& [visits, n] : e.visit_histogram) histogram[std::to_string(visits)] = n;
      ordered_json cell;
      cell["t"] = e.t;
      cell["state"] = e.state;
      cell["action"] = e.action;
      cell["oracle_q"] = e.oracle_q;
      cell["mean_q_hat"] = e.q_hat.mean();
      cell["bias"] = e.bias();
      cell["standard_error"] = e.standard_error();
      cell["groups"] = e.q_hat.n;
      cell["total_visits"] = e.total_visits;
      cell["checked"] = checked;
      cell["within"] = e.within(report.sigmas);
      cell["visit_histogram"] = histogram;
      cells.push_back(std::move(cell));
    }
    doc["cells"] = std::move(cells);
    ordered_json variance = ordered_json::array();
    for (const VarianceRatio& r : ratios) {
      ordered_json v;
      v["action"] = r.action;
      v["visits"] = r.visits;
      v["groups_at_n"] = r.groups_at_n;
      v["groups_at_2n"] = r.groups_at_2n;
      v["var_n"] = r.var_n;
      v["var_2n"] = r.var_2n;
      v["ratio"] = r.ratio;
      variance.push_back(std::move(v));
    }
    doc["root_variance_ratios"] = std::move(variance);
    out << doc.dump(2) << '\n';
    out.flush();

    err << "simulate: bias gate " << (report.passed() ? "PASS" : "FAIL") << " (" << gated
        << " cell(s) with >= " << report.min_visits << " visits, " << report.sigmas << " SE)\n";
    return static_cast<int>(report.passed() ? kExitOk : kExitValidation);
  });
}

int cmd_signatures(const std::string& trace, const RunConfig& config, std::ostream& out,
                   std::ostream& err) {
  return guarded(err, [&] {
    const SweSignatureScheme scheme(resolve_rules(config));
    std::optional<TraceSource> source;
    if (auto code = open_trace(trace, source, err)) return *code;
    for_each_group(
        *source, config,
        [&](const ProblemGroup& group) {
          std::string text;
          for (const Rollout& r : group.rollouts) {
            const auto keys = scheme.annotate(r);
            for (std::size_t t = 0; t < keys.size(); ++t) {
              ordered_json line;
              line["rollout_id"] = r.rollout_id;
              line["step"] = t;
              line["category"] = keys[t].label;
              line["state_sig"] = keys[t].state;
              line["action_sig"] = keys[t].action;
              line["is_validation"] = keys[t].is_validation;
              line["has_modifications"] = keys[t].has_modifications;
              text += line.dump() + "\n";
            }
            ordered_json last;
            last["rollout_id"] = r.rollout_id;
            last["step"] = keys.size();
            last["state_sig"] = scheme.terminal_state(r);
            text += last.dump() + "\n";
          }
          return text;
        },
        [&](const ProblemGroup&, const std::string& text) { out << text; });
    out.flush();
    return static_cast<int>(kExitOk);
  });
}

}  // namespace rtmc
