#include "rtmc/signature.hpp"

#include <algorithm>
#include <cctype>

#include "rtmc/md5.hpp"

namespace rtmc {

std::string_view to_string(Category c) {
  switch (c) {
    case Category::view:
      return "view";
    case Category::search:
      return "search";
    case Category::modify:
      return "modify";
    case Category::create:
      return "create";
    case Category::execute:
      return "execute";
    case Category::test:
      return "test";
    case Category::install:
      return "install";
    case Category::fileop:
      return "fileop";
    case Category::think:
      return "think";
    case Category::finish:
      return "finish";
  }
  return "execute";
}

std::optional<Category> parse_category(std::string_view text) {
  for (Category c : kAllCategories) {
    if (to_string(c) == text) return c;
  }
  return std::nullopt;
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && is_space(text[i])) ++i;
    const std::size_t start = i;
    while (i < text.size() && !is_space(text[i])) ++i;
    if (i > start) words.push_back(text.substr(start, i - start));
  }
  return words;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Splits on unquoted `|`, `||`, `&&`, `;` and newlines.
std::vector<std::string_view> split_pipeline(std::string_view line) {
  std::vector<std::string_view> segments;
  char quote = 0;
  std::size_t start = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') {
        ++i;
      } else if (c == quote) {
        quote = 0;
      }
      continue;
    }
    if (c == '\\') {
      ++i;
      continue;
    }
    if (c == '\'' || c == '"') {
      quote = c;
      continue;
    }
    std::size_t sep = 0;
    if (c == ';' || c == '\n') {
      sep = 1;
    } else if (c == '|' || c == '&') {
      if (i + 1 < line.size() && line[i + 1] == c) {
        sep = 2;
      } else if (c == '|') {
        sep = 1;
      }
    }
    if (sep) {
      segments.push_back(line.substr(start, i - start));
      i += sep - 1;
      start = i + 1;
    }
  }
  segments.push_back(line.substr(start));
  return segments;
}

bool is_assignment(std::string_view word) {
  const auto eq = word.find('=');
  if (eq == std::string_view::npos || eq == 0) return false;
  return std::all_of(word.begin(), word.begin() + static_cast<std::ptrdiff_t>(eq), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
  });
}

// Pops the next whitespace-delimited word off the front of `text`.
std::string_view next_word(std::string_view& text) {
  std::size_t i = 0;
  while (i < text.size() && is_space(text[i])) ++i;
  std::size_t j = i;
  while (j < text.size() && !is_space(text[j])) ++j;
  const std::string_view word = text.substr(i, j - i);
  text.remove_prefix(j);
  return word;
}

std::string_view first_word(std::string_view text) { return next_word(text); }

// True when the words of `pattern` (at least one) lead the words of `text`.
bool starts_with_words(std::string_view text, std::string_view pattern) {
  bool any = false;
  for (std::string_view p = next_word(pattern); !p.empty(); p = next_word(pattern)) {
    if (next_word(text) != p) return false;
    any = true;
  }
  return any;
}

bool is_insert(const StepRecord& step) { return first_word(step.action_kind) == "insert"; }

std::string edit_hash(const StepRecord& step) {
  if (!step.old_text && !step.new_text) return content_hash("", step.action_kind);
  return content_hash(step.old_text.value_or(""), step.new_text.value_or(""));
}

std::string bucket_text(const LineRange& range) {
  const auto [lo, hi] = view_buckets(range);
  if (lo == hi) return "[" + std::to_string(lo) + "]";
  return "[" + std::to_string(lo) + "-" + std::to_string(hi) + "]";
}

}  // namespace

ClassifierRules ClassifierRules::defaults() {
  using enum Category;
  ClassifierRules r;
  r.shell_tools = {"bash", "execute_bash", "sh", "shell"};
  auto tool = [&](std::string p, Category c) { r.rules.push_back({MatchKind::tool, std::move(p), c}); };
  auto bash = [&](std::string p, Category c) {
    r.rules.push_back({MatchKind::bash_prefix, std::move(p), c});
  };

  for (const char* editor : {"file_editor", "str_replace_editor"}) {
    const std::string e = editor;
    tool(e + " view", view);
    tool(e + " create", create);
    tool(e + " str_replace", modify);
    tool(e + " insert", modify);
    tool(e + " undo_edit", modify);
  }
  tool("search", search);
  tool("think", think);
  tool("finish", finish);
  tool("submit", finish);

  for (const char* p : {"pytest", "py.test", "python -m pytest", "python3 -m pytest",
                        "python -m unittest", "python3 -m unittest", "tox"}) {
    bash(p, test);
  }
  for (const char* p : {"pip install", "pip3 install", "python -m pip install",
                        "python3 -m pip install", "conda install", "apt-get install"}) {
    bash(p, install);
  }
  for (const char* p : {"cat", "head", "tail", "less", "more", "nl", "sed -n"}) bash(p, view);
  for (const char* p : {"grep", "egrep", "rg", "find", "ls", "tree", "git grep"}) bash(p, search);
  for (const char* p : {"cp", "mv", "mkdir", "rm", "rmdir", "touch", "ln"}) bash(p, fileop);
  bash("python", execute);
  bash("python3", execute);
  r.fallback = execute;
  return r;
}

std::string primary_command(std::string_view command_line) {
  for (std::string_view segment : split_pipeline(command_line)) {
    auto words = split_words(segment);
    std::size_t skip = 0;
    while (skip < words.size() && is_assignment(words[skip])) ++skip;
    if (skip == words.size()) continue;
    if (words[skip] == "cd") continue;
    std::string out;
    for (std::size_t i = skip; i < words.size(); ++i) {
      if (!out.empty()) out.push_back(' ');
      out.append(words[i]);
    }
    return out;
  }
  return std::string(trim(command_line));
}

Category classify_action(const StepRecord& step, const ClassifierRules& rules) {
  const bool shell = rules.shell_tools.contains(step.tool);
  const std::string_view kind_word = first_word(step.action_kind);
  std::string command;
  if (shell) command = primary_command(step.action_kind);

  for (const ClassifierRule& rule : rules.rules) {
    if (rule.kind == MatchKind::tool) {
      std::string_view rest = rule.pattern;
      const std::string_view tool = next_word(rest);
      if (tool.empty() || tool != step.tool) continue;
      const std::string_view kind = next_word(rest);
      if (!kind.empty() && kind != kind_word) continue;
      return rule.category;
    }
    if (shell && starts_with_words(command, rule.pattern)) return rule.category;
  }
  return rules.fallback;
}

std::pair<int, int> view_buckets(const LineRange& range) {
  return {(range.start - 1) / kLinesPerBucket, (range.end - 1) / kLinesPerBucket};
}

std::string content_hash(std::string_view old_text, std::string_view new_text) {
  Md5 h;
  h.update(old_text);
  h.update(new_text);
  return Md5::hex(h.finish()).substr(0, 4);
}

std::string action_signature(const StepRecord& step, const ClassifierRules& rules) {
  return action_signature(step, classify_action(step, rules));
}

std::string action_signature(const StepRecord& step, Category c) {
  const std::string target = step.target_path ? "@" + *step.target_path : std::string();
  const std::string cat(to_string(c));
  switch (c) {
    case Category::think:
    case Category::finish:
      return cat;
    case Category::view:
      if (step.line_range) return "view:partial" + bucket_text(*step.line_range) + target;
      return "view:full" + target;
    case Category::modify:
      return std::string(is_insert(step) ? "modify:insert:" : "modify:replace:") +
             edit_hash(step) + target;
    case Category::test:
    case Category::execute:
      return cat + target + ":" + std::string(to_string(step.result_status));
    case Category::create:
    case Category::search:
    case Category::install:
    case Category::fileop:
      return cat + target;
  }
  return cat;
}

void StateAccumulator::add(const StepRecord& step) { add(step, classify_action(step, *rules_)); }

void StateAccumulator::add(const StepRecord& step, Category category) {
  switch (category) {
    case Category::think:
      ++think_;
      return;
    case Category::test:
      ++(step.result_status == ResultStatus::ok ? test_ok_ : test_fail_);
      return;
    default:
      break;
  }
  if (!step.target_path) return;
  auto& ops = files_[*step.target_path];
  switch (category) {
    case Category::view:
      if (step.line_range) {
        const auto [lo, hi] = view_buckets(*step.line_range);
        for (int b = lo; b <= hi; ++b) ops.insert("V[" + std::to_string(b) + "]");
      } else {
        ops.insert("Vf");
      }
      break;
    case Category::modify:
      ops.insert((is_insert(step) ? "I:" : "M:") + edit_hash(step));
      has_modifications_ = true;
      break;
    case Category::create:
      ops.insert("C");
      has_modifications_ = true;
      break;
    case Category::search:
      ops.insert("S");
      break;
    default:
      break;
  }
  if (ops.empty()) files_.erase(*step.target_path);
}

std::string StateAccumulator::render() const {
  std::string out;
  for (const auto& [file, ops] : files_) {
    out += file;
    out.push_back(':');
    bool first = true;
    for (const std::string& op : ops) {
      if (!first) out.push_back(',');
      out += op;
      first = false;
    }
    out += " | ";
  }
  out += "(think=" + std::to_string(think_) + ",test_ok=" + std::to_string(test_ok_) +
         ",test_fail=" + std::to_string(test_fail_) + ")";
  return out;
}

std::string state_signature(std::span<const StepRecord> history, const ClassifierRules& rules) {
  StateAccumulator acc(rules);
  for (const StepRecord& step : history) acc.add(step);
  return acc.render();
}

std::vector<StepKeys> SweSignatureScheme::annotate(const Rollout& rollout) const {
  std::vector<StepKeys> keys;
  keys.reserve(rollout.steps.size());
  StateAccumulator acc(rules_);
  for (const StepRecord& step : rollout.steps) {
    const Category c = classify_action(step, rules_);
    StepKeys k;
    k.state = acc.render();
    k.action = action_signature(step, c);
    k.label = std::string(to_string(c));
    k.is_validation = c == Category::test;
    k.has_modifications = acc.has_modifications();
    keys.push_back(std::move(k));
    acc.add(step, c);
  }
  return keys;
}

std::string SweSignatureScheme::terminal_state(const Rollout& rollout) const {
  return state_signature(rollout.steps, rules_);
}

}  // namespace rtmc
