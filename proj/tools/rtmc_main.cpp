#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <map>
#include <string>

#include "rtmc/commands.hpp"
#include "rtmc/run_config.hpp"

namespace {

bool is_bool_key(std::string_view key) {
  return key == "normalize" || key == "first_visit_dedup" || key == "step_rewards" ||
         key == "grpo_step_raw" || key == "per_token";
}

std::string flag_name(std::string_view key) {
  std::string name = "--";
  for (char c : key) name.push_back(c == '_' ? '-' : c);
  return name;
}

struct Settings {
  std::string config_file;
  std::string trace = "-";
  std::map<std::string, std::string> values;
  std::map<std::string, bool> flags;
};

// Every config key becomes a flag of the same name on the subcommand.
void add_settings(CLI::App& cmd, Settings& s, bool takes_trace) {
  if (takes_trace) cmd.add_option("trace", s.trace, "Rollout trace (JSONL), '-' for stdin");
  cmd.add_option("--config", s.config_file, "key = value config file");
  for (std::string_view key : rtmc::config_keys()) {
    const std::string k(key);
    if (is_bool_key(key)) {
      cmd.add_flag(flag_name(key), s.flags[k], "Set " + k + " (use " + flag_name(key) + "=false to clear)");
    } else {
      cmd.add_option(flag_name(key), s.values[k], "Set " + k);
    }
  }
}

int run(CLI::App& cmd, const Settings& s, const std::string& name) {
  rtmc::RunConfig config;
  try {
    if (!s.config_file.empty()) rtmc::load_config_file(s.config_file, config);
    for (const auto& [key, value] : s.values) {
      if (cmd.count(flag_name(key))) rtmc::apply_setting(config, key, value);
    }
    for (const auto& [key, value] : s.flags) {
      if (cmd.count(flag_name(key))) rtmc::apply_setting(config, key, value ? "true" : "false");
    }
  } catch (const rtmc::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return rtmc::kExitUsage;
  }

  std::ofstream file;
  if (config.out != "-") {
    file.open(config.out, std::ios::binary);
    if (!file) {
      std::cerr << "error: cannot write '" << config.out << "'\n";
      return rtmc::kExitUsage;
    }
  }
  std::ostream& out = config.out == "-" ? std::cout : file;

  if (name == "advantage") return rtmc::cmd_advantage(s.trace, config, out, std::cerr);
  if (name == "tree") return rtmc::cmd_tree(s.trace, config, out, std::cerr);
  if (name == "compare") return rtmc::cmd_compare(s.trace, config, out, std::cerr);
  if (name == "simulate") return rtmc::cmd_simulate(config, out, std::cerr);
  return rtmc::cmd_signatures(s.trace, config, out, std::cerr);
}

}  // namespace

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  CLI::App app{"Critic-free step-level advantages from rollout trees"};
  app.require_subcommand(1);

  const std::pair<const char*, const char*> commands[] = {
      {"advantage", "Per-step (or per-token) advantages for every rollout"},
      {"tree", "Graphviz DOT of each problem's merged rollout tree"},
      {"compare", "GRPO / GRPO+Step / RTMC per-rollout CSV and quadrant report"},
      {"simulate", "Bias and variance check against the exact tabular oracle"},
      {"signatures", "Per-step category, state and action signatures"},
  };
  std::map<std::string, Settings> settings;
  std::map<std::string, CLI::App*> subs;
  for (const auto& [name, help] : commands) {
    CLI::App* cmd = app.add_subcommand(name, help);
    add_settings(*cmd, settings[name], std::string_view(name) != "simulate");
    subs[name] = cmd;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return rtmc::kExitUsage;
  }

  for (const auto& [name, cmd] : subs) {
    if (cmd->parsed()) return run(*cmd, settings[name], name);
  }
  return rtmc::kExitUsage;
}
