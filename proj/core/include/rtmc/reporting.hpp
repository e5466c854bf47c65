#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rtmc/baselines.hpp"
#include "rtmc/estimator.hpp"
#include "rtmc/signature.hpp"
#include "rtmc/trajectory.hpp"

namespace rtmc {

// Graphviz digraph of the merged rollout tree. Nodes are state signatures
// labelled "S<depth>" (first-visit step index) with their visit count; edges
// are actions labelled by category. Green/red/gray mark nodes and edges
// traversed only by successful/failed/incomplete rollouts, black otherwise.
std::string export_tree_dot(const ProblemGroup& group, const SignatureScheme& scheme,
                            const EstimatorConfig& config);

struct CompareConfig {
  EstimatorConfig estimator;
  GrpoStepOptions grpo_step;
  // Replace trace step rewards with assigned step rewards for the tree
  // estimator (validation credit then comes from beta alone).
  bool rtmc_step_rewards = false;
};

struct CompareRow {
  std::string rollout_id;
  Outcome outcome = Outcome::fail;
  Method method = Method::rtmc;
  std::vector<double> advantages;
};

// Rows for every rollout and each of grpo, grpo_step and rtmc, in that order.
std::vector<CompareRow> compare_per_rollout(const ProblemGroup& group,
                                            const SignatureScheme& scheme,
                                            const CompareConfig& config);

// Header "rollout_id,outcome,method,step,advantage", one line per step.
void write_compare_csv(std::ostream& out, std::span<const CompareRow> rows);

// Tree-estimator records under a compare configuration.
std::vector<AdvantageRecord> rtmc_records(const ProblemGroup& group, const SignatureScheme& scheme,
                                          const CompareConfig& config);

enum class Quadrant { both_plus, x_minus_y_plus, both_minus, x_plus_y_minus };

inline constexpr std::array<Quadrant, 4> kAllQuadrants = {
    Quadrant::both_plus, Quadrant::x_minus_y_plus, Quadrant::both_minus, Quadrant::x_plus_y_minus};

std::string_view to_string(Quadrant q);

// Values at or below zero count as negative.
Quadrant classify_quadrant(double x, double y);

struct QuadrantSplit {
  std::array<std::size_t, 4> counts{};
  std::size_t neutral = 0;

  std::size_t count(Quadrant q) const { return counts[static_cast<std::size_t>(q)]; }
  std::size_t classified() const;
  std::size_t total() const { return classified() + neutral; }
  // Over classified (non-neutral) steps.
  double percent(Quadrant q) const;
  // Over every step including neutral ones.
  double percent_of_all(Quadrant q) const;
};

struct QuadrantReport {
  double threshold = 0.01;
  QuadrantSplit success;
  // Failed and incomplete rollouts.
  QuadrantSplit fail;
};

// Classifies each step by (sign x, sign y) unless both |x| and |y| are within
// the threshold. Inputs must list the same (rollout_id, step) sequence;
// throws std::invalid_argument otherwise.
QuadrantReport quadrant_analysis(const ProblemGroup& group, std::span<const AdvantageRecord> x,
                                 std::span<const AdvantageRecord> y, double threshold = 0.01);

std::string format_number(double value);

}  // namespace rtmc
