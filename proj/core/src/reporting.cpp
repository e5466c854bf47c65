#include "rtmc/reporting.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <set>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

namespace rtmc {

std::string format_number(double value) {
  if (!std::isfinite(value)) return std::isnan(value) ? "nan" : (value > 0 ? "inf" : "-inf");
  if (value == 0.0) return "0";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

namespace {

std::string dot_quote(std::string_view text) {
  std::string out = "\"";
  for (char c : text) {
    if (c == '"' || c == '\\') out.push_back('\\');
    if (c == '\n') {
      out += "\\n";
      continue;
    }
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

std::string_view outcome_color(const std::set<Outcome>& outcomes) {
  if (outcomes.size() != 1) return "black";
  switch (*outcomes.begin()) {
    case Outcome::success:
      return "green";
    case Outcome::fail:
      return "red";
    case Outcome::incomplete:
      return "gray";
  }
  return "black";
}

struct DotNode {
  std::size_t id = 0;
  int depth = 0;
  std::size_t visits = 0;
  std::set<Outcome> outcomes;
};

struct DotEdge {
  std::size_t from = 0;
  std::size_t to = 0;
  std::string action;
  std::string label;
  std::size_t traversals = 0;
  std::set<Outcome> outcomes;
  double q = 0.0;
  double adv = 0.0;
};

}  // namespace

std::string export_tree_dot(const ProblemGroup& group, const SignatureScheme& scheme,
                            const EstimatorConfig& config) {
  // Advantages annotate edges; normalisation does not change the picture.
  EstimatorConfig cfg = config;
  cfg.normalize = false;
  const auto records = advantages(group, scheme, cfg);
  std::map<std::pair<std::string, std::string>, const AdvantageRecord*> by_key;
  for (const auto& r : records) by_key.try_emplace({r.state_sig, r.action_sig}, &r);

  std::unordered_map<std::string, std::size_t> node_index;
  std::vector<DotNode> nodes;
  std::map<std::tuple<std::size_t, std::string, std::size_t>, std::size_t> edge_index;
  std::vector<DotEdge> edges;

  auto node_for = [&](const std::string& state, int depth) -> std::size_t {
    auto [it, inserted] = node_index.try_emplace(state, nodes.size());
    if (inserted) nodes.push_back({nodes.size(), depth, 0, {}});
    return it->second;
  };

  for (const Rollout& rollout : group.rollouts) {
    const auto keys = scheme.annotate(rollout);
    std::vector<std::string> states;
    states.reserve(keys.size() + 1);
    for (const auto& k : keys) states.push_back(k.state);
    states.push_back(scheme.terminal_state(rollout));

    std::set<std::size_t> visited;
    std::set<std::size_t> traversed;
    std::vector<std::size_t> path;
    for (std::size_t t = 0; t < states.size(); ++t) {
      path.push_back(node_for(states[t], static_cast<int>(t)));
    }
    for (std::size_t t = 0; t < path.size(); ++t) {
      DotNode& n = nodes[path[t]];
      if (visited.insert(path[t]).second) n.visits += 1;
      n.outcomes.insert(rollout.outcome);
      if (t + 1 == path.size()) break;

      const auto key = std::make_tuple(path[t], keys[t].action, path[t + 1]);
      auto [it, inserted] = edge_index.try_emplace(key, edges.size());
      if (inserted) {
        DotEdge e;
        e.from = path[t];
        e.to = path[t + 1];
        e.action = keys[t].action;
        e.label = keys[t].label;
        if (auto rec = by_key.find({keys[t].state, keys[t].action}); rec != by_key.end()) {
          e.q = rec->second->q;
          e.adv = rec->second->adv;
        }
        edges.push_back(std::move(e));
      }
      DotEdge& e = edges[it->second];
      if (traversed.insert(it->second).second) e.traversals += 1;
      e.outcomes.insert(rollout.outcome);
    }
  }

  std::string out = "digraph " + dot_quote(group.problem_id) + " {\n";
  out += "  node [shape=ellipse];\n";
  for (const DotNode& n : nodes) {
    out += "  n" + std::to_string(n.id) + " [label=" +
           dot_quote("S" + std::to_string(n.depth) + "\nN=" + std::to_string(n.visits)) +
           ", color=" + std::string(outcome_color(n.outcomes)) + "];\n";
  }
  for (const DotEdge& e : edges) {
    out += "  n" + std::to_string(e.from) + " -> n" + std::to_string(e.to) +
           " [label=" + dot_quote(e.label) + ", color=" + std::string(outcome_color(e.outcomes)) +
           ", tooltip=" +
           dot_quote(e.action + " N=" + std::to_string(e.traversals) + " Q=" + format_number(e.q) +
                     " A=" + format_number(e.adv)) +
           "];\n";
  }
  out += "}\n";
  return out;
}

std::vector<AdvantageRecord> rtmc_records(const ProblemGroup& group, const SignatureScheme& scheme,
                                          const CompareConfig& config) {
  if (!config.rtmc_step_rewards) return advantages(group, scheme, config.estimator);
  StepRewardConfig step = config.grpo_step.rewards;
  step.validation_bonus = 0.0;
  std::vector<std::vector<double>> base;
  base.reserve(group.rollouts.size());
  for (const Rollout& r : group.rollouts) base.push_back(assign_step_rewards(r, scheme, step));
  return advantages(group, scheme, config.estimator, base);
}

std::vector<CompareRow> compare_per_rollout(const ProblemGroup& group,
                                            const SignatureScheme& scheme,
                                            const CompareConfig& config) {
  std::vector<CompareRow> rows;
  if (group.rollouts.empty()) return rows;

  const auto grpo = grpo_records(group, scheme);
  const auto step = grpo_step_advantages(group, scheme, config.grpo_step);
  const auto tree = rtmc_records(group, scheme, config);

  std::size_t offset = 0;
  for (const Rollout& r : group.rollouts) {
    const std::size_t len = r.steps.size();
    const std::pair<Method, const std::vector<AdvantageRecord>*> methods[] = {
        {Method::grpo, &grpo}, {Method::grpo_step, &step}, {Method::rtmc, &tree}};
    for (const auto& [method, records] : methods) {
      CompareRow row;
      row.rollout_id = r.rollout_id;
      row.outcome = r.outcome;
      row.method = method;
      for (std::size_t t = 0; t < len; ++t) {
        row.advantages.push_back((*records)[offset + t].adv_normalized);
      }
      rows.push_back(std::move(row));
    }
    offset += len;
  }
  return rows;
}

namespace {

std::string csv_field(std::string_view text) {
  if (text.find_first_of(",\"\n") == std::string_view::npos) return std::string(text);
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

}  // namespace

void write_compare_csv(std::ostream& out, std::span<const CompareRow> rows) {
  out << "rollout_id,outcome,method,step,advantage\n";
  for (const CompareRow& row : rows) {
    const std::string prefix = csv_field(row.rollout_id) + "," + std::string(to_string(row.outcome)) +
                               "," + std::string(to_string(row.method)) + ",";
    for (std::size_t t = 0; t < row.advantages.size(); ++t) {
      out << prefix << t << "," << format_number(row.advantages[t]) << "\n";
    }
  }
}

std::string_view to_string(Quadrant q) {
  switch (q) {
    case Quadrant::both_plus:
      return "both_plus";
    case Quadrant::x_minus_y_plus:
      return "x_minus_y_plus";
    case Quadrant::both_minus:
      return "both_minus";
    case Quadrant::x_plus_y_minus:
      return "x_plus_y_minus";
  }
  return "both_minus";
}

Quadrant classify_quadrant(double x, double y) {
  const bool xp = x > 0.0;
  const bool yp = y > 0.0;
  if (xp && yp) return Quadrant::both_plus;
  if (!xp && yp) return Quadrant::x_minus_y_plus;
  if (!xp && !yp) return Quadrant::both_minus;
  return Quadrant::x_plus_y_minus;
}

std::size_t QuadrantSplit::classified() const {
  std::size_t n = 0;
  for (std::size_t c : counts) n += c;
  return n;
}

double QuadrantSplit::percent(Quadrant q) const {
  const std::size_t n = classified();
  return n ? 100.0 * static_cast<double>(count(q)) / static_cast<double>(n) : 0.0;
}

double QuadrantSplit::percent_of_all(Quadrant q) const {
  const std::size_t n = total();
  return n ? 100.0 * static_cast<double>(count(q)) / static_cast<double>(n) : 0.0;
}

QuadrantReport quadrant_analysis(const ProblemGroup& group, std::span<const AdvantageRecord> x,
                                 std::span<const AdvantageRecord> y, double threshold) {
  if (x.size() != y.size()) {
    throw std::invalid_argument("quadrant_analysis: record counts differ (" +
                                std::to_string(x.size()) + " vs " + std::to_string(y.size()) + ")");
  }
  std::unordered_map<std::string, Outcome> outcomes;
  for (const Rollout& r : group.rollouts) outcomes.emplace(r.rollout_id, r.outcome);

  QuadrantReport report;
  report.threshold = threshold;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i].rollout_id != y[i].rollout_id || x[i].step != y[i].step) {
      throw std::invalid_argument("quadrant_analysis: records misaligned at index " +
                                  std::to_string(i));
    }
    const auto it = outcomes.find(x[i].rollout_id);
    if (it == outcomes.end()) {
      throw std::invalid_argument("quadrant_analysis: unknown rollout " + x[i].rollout_id);
    }
    QuadrantSplit& split = it->second == Outcome::success ? report.success : report.fail;
    const double ax = x[i].adv_normalized;
    const double ay = y[i].adv_normalized;
    if (std::abs(ax) <= threshold && std::abs(ay) <= threshold) {
      split.neutral += 1;
      continue;
    }
    split.counts[static_cast<std::size_t>(classify_quadrant(ax, ay))] += 1;
  }
  return report;
}

}  // namespace rtmc
