#include <gtest/gtest.h>

#include <boost/graph/adjacency_list.hpp>
#include <boost/graph/graphviz.hpp>
#include <random>
#include <sstream>

#include "rtmc/reporting.hpp"
#include "support.hpp"

namespace {

using namespace rtmc;
using namespace rtmc::testing;

struct Vertex {
  std::string name;
  std::string label;
  std::string color;
};
struct Edge {
  std::string label;
  std::string color;
  std::string tooltip;
};
using Graph = boost::adjacency_list<boost::vecS, boost::vecS, boost::directedS, Vertex, Edge>;

Graph parse_dot(const std::string& dot) {
  Graph g;
  boost::dynamic_properties dp(boost::ignore_other_properties);
  dp.property("node_id", boost::get(&Vertex::name, g));
  dp.property("label", boost::get(&Vertex::label, g));
  dp.property("color", boost::get(&Vertex::color, g));
  dp.property("label", boost::get(&Edge::label, g));
  dp.property("color", boost::get(&Edge::color, g));
  dp.property("tooltip", boost::get(&Edge::tooltip, g));
  std::istringstream in(dot);
  if (!boost::read_graphviz(in, g, dp)) throw std::runtime_error("read_graphviz failed");
  return g;
}

EstimatorConfig no_prior() {
  EstimatorConfig c;
  c.n_prior = 0.0;
  return c;
}

TEST(Dot, FourRolloutTreeParses) {
  const SweSignatureScheme scheme;
  const std::string dot = export_tree_dot(four_rollout_group(), scheme, no_prior());
  const Graph g = parse_dot(dot);
  // root, after view, after view+edit; finishing and the plain run leave the
  // state unchanged and show up as self-loops
  EXPECT_EQ(boost::num_vertices(g), 3u);
  bool root_found = false;
  for (auto v : boost::make_iterator_range(boost::vertices(g))) {
    if (g[v].label == "S0\\nN=4") {
      root_found = true;
      EXPECT_EQ(g[v].color, "black");
    }
  }
  EXPECT_TRUE(root_found) << dot;

  std::map<std::string, std::string> edge_colors;
  for (auto e : boost::make_iterator_range(boost::edges(g))) {
    edge_colors[g[e].tooltip.substr(0, g[e].tooltip.find(' '))] = g[e].color;
  }
  EXPECT_EQ(edge_colors.at("view:full@core.py"), "black");
  EXPECT_EQ(edge_colors.at("execute:error"), "red");
}

TEST(Dot, OutcomeColours) {
  const SweSignatureScheme scheme;
  const auto g = parse_dot(export_tree_dot(four_rollout_group(), scheme, no_prior()));
  std::map<std::string, std::string> by_label;
  for (auto v : boost::make_iterator_range(boost::vertices(g))) by_label[g[v].label] = g[v].color;
  // r3 and r4 share the state after the edit.
  EXPECT_EQ(by_label.at("S2\\nN=2"), "black");
  std::size_t self_loops = 0;
  for (auto e : boost::make_iterator_range(boost::edges(g))) {
    self_loops += boost::source(e, g) == boost::target(e, g);
  }
  EXPECT_EQ(self_loops, 4u);
}

TEST(Dot, SingleSuccessIsGreen) {
  const auto group = make_group({make_rollout("only", {view("a.py"), insert("a.py", "x"), finish()},
                                              Outcome::success)});
  const auto g = parse_dot(export_tree_dot(group, SweSignatureScheme(), EstimatorConfig{}));
  EXPECT_GT(boost::num_vertices(g), 1u);
  for (auto v : boost::make_iterator_range(boost::vertices(g))) EXPECT_EQ(g[v].color, "green");
  for (auto e : boost::make_iterator_range(boost::edges(g))) EXPECT_EQ(g[e].color, "green");
}

TEST(Dot, IncompleteIsGray) {
  const auto group =
      make_group({make_rollout("only", {view("a.py"), think()}, Outcome::incomplete)});
  const auto g = parse_dot(export_tree_dot(group, SweSignatureScheme(), EstimatorConfig{}));
  for (auto v : boost::make_iterator_range(boost::vertices(g))) EXPECT_EQ(g[v].color, "gray");
}

TEST(Dot, DeterministicAndParsableOnRandomGroups) {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto group = random_group(rng, 6);
    const SweSignatureScheme scheme;
    const std::string a = export_tree_dot(group, scheme, EstimatorConfig{});
    ASSERT_EQ(a, export_tree_dot(group, scheme, EstimatorConfig{}));
    const Graph g = parse_dot(a);
    std::size_t root_visits = 0;
    for (auto v : boost::make_iterator_range(boost::vertices(g))) {
      const auto& label = g[v].label;
      if (label.rfind("S0\\n", 0) == 0) root_visits = std::stoul(label.substr(label.find('=') + 1));
    }
    EXPECT_EQ(root_visits, 6u);
  }
}

TEST(Dot, QuotesProblemIds) {
  auto group = make_group({make_rollout("r\"1", {think()}, Outcome::fail)}, "we\"ird");
  const std::string dot = export_tree_dot(group, SweSignatureScheme(), EstimatorConfig{});
  EXPECT_NE(dot.find("digraph \"we\\\"ird\""), std::string::npos);
  EXPECT_NO_THROW(parse_dot(dot));
}

TEST(Compare, RowsPerRolloutAndMethod) {
  const auto group = four_rollout_group();
  CompareConfig cfg;
  cfg.estimator = no_prior();
  const auto rows = compare_per_rollout(group, SweSignatureScheme(), cfg);
  ASSERT_EQ(rows.size(), 12u);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const Rollout& r = group.rollouts[i / 3];
    EXPECT_EQ(rows[i].rollout_id, r.rollout_id);
    EXPECT_EQ(rows[i].advantages.size(), r.steps.size());
    const Method order[] = {Method::grpo, Method::grpo_step, Method::rtmc};
    EXPECT_EQ(rows[i].method, order[i % 3]);
  }
  // GRPO is flat along a rollout; the tree estimator changes sign somewhere.
  bool sign_change = false;
  for (const auto& row : rows) {
    if (row.method == Method::grpo) {
      for (double a : row.advantages) EXPECT_EQ(a, row.advantages.front());
    }
    if (row.method == Method::rtmc) {
      bool pos = false;
      bool neg = false;
      for (double a : row.advantages) {
        pos |= a > 0;
        neg |= a < 0;
      }
      sign_change |= pos && neg;
    }
  }
  EXPECT_TRUE(sign_change);
}

TEST(Compare, CsvShape) {
  const auto group = four_rollout_group();
  const auto rows = compare_per_rollout(group, SweSignatureScheme(), CompareConfig{});
  std::ostringstream out;
  write_compare_csv(out, rows);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "rollout_id,outcome,method,step,advantage");
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 4) << line;
  }
  EXPECT_EQ(n, 3u * (1 + 2 + 3 + 3));
  EXPECT_NE(out.str().find("r4,fail,grpo_step,2,"), std::string::npos);
}

TEST(Compare, CsvQuotesIds) {
  CompareRow row{"a,b", Outcome::success, Method::rtmc, {0.5}};
  std::ostringstream out;
  write_compare_csv(out, std::span(&row, 1));
  EXPECT_NE(out.str().find("\"a,b\",success,rtmc,0,0.5\n"), std::string::npos);
}

TEST(Compare, EmptyGroup) {
  EXPECT_TRUE(compare_per_rollout(ProblemGroup{"p", {}}, SweSignatureScheme(), CompareConfig{})
                  .empty());
}

AdvantageRecord rec(std::string id, int step, double a) {
  AdvantageRecord r;
  r.rollout_id = std::move(id);
  r.step = step;
  r.adv_normalized = a;
  return r;
}

TEST(Quadrant, Classification) {
  EXPECT_EQ(classify_quadrant(1, 1), Quadrant::both_plus);
  EXPECT_EQ(classify_quadrant(-1, 1), Quadrant::x_minus_y_plus);
  EXPECT_EQ(classify_quadrant(-1, -1), Quadrant::both_minus);
  EXPECT_EQ(classify_quadrant(1, -1), Quadrant::x_plus_y_minus);
  EXPECT_EQ(classify_quadrant(0, 1), Quadrant::x_minus_y_plus);
  EXPECT_EQ(classify_quadrant(0, 0), Quadrant::both_minus);
}

TEST(Quadrant, CountsAndThreshold) {
  const auto group = make_group({make_rollout("s", {think(), think(), think()}, Outcome::success),
                                 make_rollout("f", {think(), think()}, Outcome::fail)});
  const std::vector<AdvantageRecord> x = {rec("s", 0, 0.5), rec("s", 1, -0.5), rec("s", 2, 0.005),
                                          rec("f", 0, -0.2), rec("f", 1, 0.2)};
  const std::vector<AdvantageRecord> y = {rec("s", 0, 0.5), rec("s", 1, 0.5), rec("s", 2, -0.009),
                                          rec("f", 0, -0.3), rec("f", 1, -0.001)};
  const auto report = quadrant_analysis(group, x, y, 0.01);
  EXPECT_EQ(report.success.count(Quadrant::both_plus), 1u);
  EXPECT_EQ(report.success.count(Quadrant::x_minus_y_plus), 1u);
  EXPECT_EQ(report.success.neutral, 1u);
  EXPECT_DOUBLE_EQ(report.success.percent(Quadrant::both_plus), 50.0);
  EXPECT_NEAR(report.success.percent_of_all(Quadrant::both_plus), 100.0 / 3.0, 1e-12);
  EXPECT_EQ(report.fail.count(Quadrant::both_minus), 1u);
  EXPECT_EQ(report.fail.count(Quadrant::x_plus_y_minus), 1u);
  EXPECT_EQ(report.fail.neutral, 0u);
  // Only one side above threshold is enough to classify.
  EXPECT_EQ(report.fail.total(), 2u);
}

TEST(Quadrant, IncompletePoolsWithFail) {
  const auto group = make_group({make_rollout("i", {think()}, Outcome::incomplete)});
  const std::vector<AdvantageRecord> x = {rec("i", 0, 1.0)};
  const auto report = quadrant_analysis(group, x, x);
  EXPECT_EQ(report.fail.count(Quadrant::both_plus), 1u);
  EXPECT_EQ(report.success.total(), 0u);
}

TEST(Quadrant, RejectsMisalignedInput) {
  const auto group = make_group({make_rollout("a", {think(), think()}, Outcome::success)});
  const std::vector<AdvantageRecord> x = {rec("a", 0, 1), rec("a", 1, 1)};
  const std::vector<AdvantageRecord> shorter = {rec("a", 0, 1)};
  const std::vector<AdvantageRecord> swapped = {rec("a", 1, 1), rec("a", 0, 1)};
  const std::vector<AdvantageRecord> unknown = {rec("b", 0, 1), rec("b", 1, 1)};
  EXPECT_THROW(quadrant_analysis(group, x, shorter), std::invalid_argument);
  EXPECT_THROW(quadrant_analysis(group, x, swapped), std::invalid_argument);
  EXPECT_THROW(quadrant_analysis(group, unknown, unknown), std::invalid_argument);
}

TEST(Quadrant, PartitionProperty) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 200; ++i) {
    const auto group = random_group(rng, 5);
    std::vector<AdvantageRecord> x;
    std::vector<AdvantageRecord> y;
    for (const auto& r : group.rollouts) {
      for (const auto& s : r.steps) {
        x.push_back(rec(r.rollout_id, s.index, u(rng) * (i % 3 == 0 ? 0.01 : 1.0)));
        y.push_back(rec(r.rollout_id, s.index, u(rng)));
      }
    }
    const auto report = quadrant_analysis(group, x, y, 0.05);
    ASSERT_EQ(report.success.total() + report.fail.total(), x.size());
    for (const auto* split : {&report.success, &report.fail}) {
      if (split->classified() == 0) continue;
      double sum = 0.0;
      for (Quadrant q : kAllQuadrants) sum += split->percent(q);
      ASSERT_NEAR(sum, 100.0, 1e-9);
    }
  }
}

TEST(Format, Numbers) {
  EXPECT_EQ(format_number(0.0), "0");
  EXPECT_EQ(format_number(-0.0), "0");
  EXPECT_EQ(format_number(0.5), "0.5");
  EXPECT_EQ(format_number(0.1 + 0.2), "0.30000000000000004");
  EXPECT_EQ(std::stod(format_number(1.0 / 3.0)), 1.0 / 3.0);
}

}  // namespace
