#pragma once

#include <iosfwd>
#include <string>

#include "rtmc/run_config.hpp"

namespace rtmc {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitParse = 2,
  // Trace invariant violations, or a failed simulate gate.
  kExitValidation = 3,
  kExitInternal = 4,
};

// Each command writes its primary output to `out` and diagnostics to `err`,
// and maps failures onto ExitCode rather than throwing. `trace` is a path or
// "-" for standard input.

// One JSON line per step (or per token with config.per_token).
int cmd_advantage(const std::string& trace, const RunConfig& config, std::ostream& out,
                  std::ostream& err);

// One digraph per problem group.
int cmd_tree(const std::string& trace, const RunConfig& config, std::ostream& out,
             std::ostream& err);

// Per-rollout CSV on `out`; the quadrant report (GRPO+Step vs RTMC, pooled
// over groups) goes to config.report, or to `err` when that is empty.
int cmd_compare(const std::string& trace, const RunConfig& config, std::ostream& out,
                std::ostream& err);

// Bias gate and root variance ratios as one JSON document.
int cmd_simulate(const RunConfig& config, std::ostream& out, std::ostream& err);

// One JSON line per step with its category and signatures.
int cmd_signatures(const std::string& trace, const RunConfig& config, std::ostream& out,
                   std::ostream& err);

}  // namespace rtmc
