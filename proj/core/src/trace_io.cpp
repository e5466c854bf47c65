#include "rtmc/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <iostream>
#include <iterator>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

namespace rtmc {

namespace {

using nlohmann::json;

const std::set<std::string, std::less<>> kRolloutFields = {
    "problem_id", "rollout_id", "outcome", "terminal_reward", "steps"};
const std::set<std::string, std::less<>> kStepFields = {
    "index",    "tool",          "action_kind", "target_path", "line_start", "line_end",
    "old_text", "new_text",      "result_status", "step_reward", "token_begin", "token_end"};

class Fields {
 public:
  Fields(const json& obj, std::string where, std::size_t line_no)
      : obj_(obj), where_(std::move(where)), line_no_(line_no) {
    if (!obj.is_object()) fail("expected an object");
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw ParseError(line_no_, where_ + message);
  }

  const json* get(const char* name) const {
    auto it = obj_.find(name);
    if (it == obj_.end() || it->is_null()) return nullptr;
    return &*it;
  }

  const json& need(const char* name) const {
    const json* v = get(name);
    if (!v) fail(std::string("missing field '") + name + "'");
    return *v;
  }

  std::string text(const char* name) const { return as_text(need(name), name); }

  std::optional<std::string> optional_text(const char* name) const {
    const json* v = get(name);
    if (!v) return std::nullopt;
    return as_text(*v, name);
  }

  double number(const char* name) const { return as_number(need(name), name); }

  std::int64_t integer(const char* name) const { return as_integer(need(name), name); }

  std::optional<std::int64_t> optional_integer(const char* name) const {
    const json* v = get(name);
    if (!v) return std::nullopt;
    return as_integer(*v, name);
  }

  void note_unknown(const std::set<std::string, std::less<>>& known, UnknownFields* unknown,
                    std::string_view prefix = {}) const {
    if (!unknown) return;
    for (auto it = obj_.begin(); it != obj_.end(); ++it) {
      if (!known.contains(it.key())) unknown->names.insert(std::string(prefix) + it.key());
    }
  }

 private:
  std::string as_text(const json& v, const char* name) const {
    if (!v.is_string()) fail(std::string("field '") + name + "' must be a string");
    return v.get<std::string>();
  }

  double as_number(const json& v, const char* name) const {
    if (!v.is_number()) fail(std::string("field '") + name + "' must be a number");
    return v.get<double>();
  }

  std::int64_t as_integer(const json& v, const char* name) const {
    if (v.is_number_integer()) return v.get<std::int64_t>();
    if (v.is_number_float()) {
      const double d = v.get<double>();
      if (std::floor(d) == d && std::abs(d) < 9.0e15) return static_cast<std::int64_t>(d);
    }
    fail(std::string("field '") + name + "' must be an integer");
  }

  const json& obj_;
  std::string where_;
  std::size_t line_no_;
};

int to_int(std::int64_t v, const Fields& f, const char* name) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    f.fail(std::string("field '") + name + "' out of range");
  }
  return static_cast<int>(v);
}

StepRecord parse_step(const json& obj, std::size_t pos, std::size_t line_no,
                      UnknownFields* unknown) {
  const Fields f(obj, "steps[" + std::to_string(pos) + "]: ", line_no);
  f.note_unknown(kStepFields, unknown, "steps.");

  StepRecord s;
  s.index = to_int(f.integer("index"), f, "index");
  s.tool = f.text("tool");
  s.action_kind = f.text("action_kind");
  s.target_path = f.optional_text("target_path");
  const auto ls = f.optional_integer("line_start");
  const auto le = f.optional_integer("line_end");
  if (ls.has_value() != le.has_value()) f.fail("line_start and line_end must appear together");
  if (ls) s.line_range = LineRange{to_int(*ls, f, "line_start"), to_int(*le, f, "line_end")};
  s.old_text = f.optional_text("old_text");
  s.new_text = f.optional_text("new_text");
  const std::string status = f.text("result_status");
  const auto parsed = parse_result_status(status);
  if (!parsed) f.fail("unknown result_status '" + status + "'");
  s.result_status = *parsed;
  if (f.get("step_reward")) s.step_reward = f.number("step_reward");
  s.token_span = TokenSpan{f.integer("token_begin"), f.integer("token_end")};
  return s;
}

void append_number(std::string& out, double value) {
  if (!std::isfinite(value)) {
    out += "null";
    return;
  }
  if (value == 0.0) {
    out += '0';
    return;
  }
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  out.append(buf, res.ptr);
}

void append_string(std::string& out, std::string_view text) {
  out += '"';
  out += json_escape(text);
  out += '"';
}

}  // namespace

std::string json_escape(std::string_view text) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    const auto u = static_cast<unsigned char>(c);
    switch (c) {
      case '"':
        out += "\\\"";
        break;
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      case '\b':
        out += "\\b";
        break;
      case '\f':
        out += "\\f";
        break;
      default:
        if (u < 0x20) {
          out += "\\u00";
          out += kHex[u >> 4];
          out += kHex[u & 0xF];
        } else {
          out += c;
        }
    }
  }
  return out;
}

Rollout parse_rollout(std::string_view line, std::size_t line_no, UnknownFields* unknown) {
  json doc;
  try {
    doc = json::parse(line.begin(), line.end());
  } catch (const json::parse_error& e) {
    throw ParseError(line_no, std::string("malformed JSON: ") + e.what());
  }
  const Fields f(doc, "", line_no);
  f.note_unknown(kRolloutFields, unknown);

  Rollout r;
  r.problem_id = f.text("problem_id");
  r.rollout_id = f.text("rollout_id");
  const std::string outcome = f.text("outcome");
  const auto parsed = parse_outcome(outcome);
  if (!parsed) f.fail("unknown outcome '" + outcome + "'");
  r.outcome = *parsed;
  r.terminal_reward = f.number("terminal_reward");
  const json& steps = f.need("steps");
  if (!steps.is_array()) f.fail("field 'steps' must be an array");
  r.steps.reserve(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    r.steps.push_back(parse_step(steps[i], i, line_no, unknown));
  }
  return r;
}

std::string serialize_rollout(const Rollout& rollout) {
  std::string out;
  out.reserve(128 + rollout.steps.size() * 160);
  out += "{\"problem_id\":";
  append_string(out, rollout.problem_id);
  out += ",\"rollout_id\":";
  append_string(out, rollout.rollout_id);
  out += ",\"outcome\":";
  append_string(out, to_string(rollout.outcome));
  out += ",\"terminal_reward\":";
  append_number(out, rollout.terminal_reward);
  out += ",\"steps\":[";
  for (std::size_t i = 0; i < rollout.steps.size(); ++i) {
    const StepRecord& s = rollout.steps[i];
    if (i) out += ',';
    out += "{\"index\":" + std::to_string(s.index);
    out += ",\"tool\":";
    append_string(out, s.tool);
    out += ",\"action_kind\":";
    append_string(out, s.action_kind);
    if (s.target_path) {
      out += ",\"target_path\":";
      append_string(out, *s.target_path);
    }
    if (s.line_range) {
      out += ",\"line_start\":" + std::to_string(s.line_range->start);
      out += ",\"line_end\":" + std::to_string(s.line_range->end);
    }
    if (s.old_text) {
      out += ",\"old_text\":";
      append_string(out, *s.old_text);
    }
    if (s.new_text) {
      out += ",\"new_text\":";
      append_string(out, *s.new_text);
    }
    out += ",\"result_status\":";
    append_string(out, to_string(s.result_status));
    out += ",\"step_reward\":";
    append_number(out, s.step_reward);
    out += ",\"token_begin\":" + std::to_string(s.token_span.begin);
    out += ",\"token_end\":" + std::to_string(s.token_span.end);
    out += '}';
  }
  out += "]}";
  return out;
}

namespace {

bool is_blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

}  // namespace

std::vector<Rollout> read_trace(std::istream& in, UnknownFields* unknown) {
  std::vector<Rollout> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    out.push_back(parse_rollout(line, line_no, unknown));
  }
  return out;
}

void write_trace(std::ostream& out, std::span<const Rollout> rollouts) {
  for (const Rollout& r : rollouts) out << serialize_rollout(r) << '\n';
}

TraceSource TraceSource::open(const std::string& path) {
  TraceSource src;
  if (path == "-") {
    src.buffer_.assign(std::istreambuf_iterator<char>(std::cin), std::istreambuf_iterator<char>());
    std::istringstream in(src.buffer_);
    src.index(in);
    return src;
  }
  src.file_ = std::make_unique<std::ifstream>(path, std::ios::binary);
  if (!*src.file_) throw InputError("cannot open trace '" + path + "'");
  src.index(*src.file_);
  src.file_->clear();
  return src;
}

TraceSource TraceSource::from_string(std::string text) {
  TraceSource src;
  src.buffer_ = std::move(text);
  std::istringstream in(src.buffer_);
  src.index(in);
  return src;
}

void TraceSource::index(std::istream& in) {
  // Rollout-level checks run here so that problems anywhere in the file are
  // reported before any output is produced; rollout ids are the only state
  // kept per rollout.
  std::unordered_map<std::string, std::size_t> group_of;
  std::vector<std::unordered_set<std::string>> ids;
  std::string line;
  std::size_t line_no = 0;
  std::uint64_t offset = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::uint64_t here = offset;
    offset += line.size() + 1;
    if (is_blank(line)) continue;
    Rollout r = parse_rollout(line, line_no, &unknown_);
    auto [it, inserted] = group_of.try_emplace(r.problem_id, groups_.size());
    if (inserted) {
      groups_.push_back({r.problem_id, {}});
      ids.emplace_back();
    }
    groups_[it->second].lines.push_back({here, line_no});
    if (!ids[it->second].insert(r.rollout_id).second) {
      violations_.push_back({r.rollout_id, std::nullopt, "duplicate_rollout_id",
                             "rollout_id is not unique (line " + std::to_string(line_no) + ")"});
    }
    r.steps.shrink_to_fit();
    ProblemGroup single{r.problem_id, {std::move(r)}};
    for (Violation& v : validate_group(single)) violations_.push_back(std::move(v));
  }
}

std::string TraceSource::read_line(const LineRef& ref) {
  std::string line;
  if (file_) {
    file_->clear();
    file_->seekg(static_cast<std::streamoff>(ref.offset));
    std::getline(*file_, line);
  } else {
    const std::size_t end = buffer_.find('\n', ref.offset);
    line = buffer_.substr(ref.offset, end == std::string::npos ? std::string::npos : end - ref.offset);
  }
  return line;
}

TraceSource::RawGroup TraceSource::read_raw(std::size_t g) {
  const GroupRef& ref = groups_.at(g);
  RawGroup raw;
  raw.problem_id = ref.problem_id;
  raw.lines.reserve(ref.lines.size());
  raw.line_numbers.reserve(ref.lines.size());
  for (const LineRef& line : ref.lines) {
    raw.lines.push_back(read_line(line));
    raw.line_numbers.push_back(line.line_no);
  }
  return raw;
}

ProblemGroup TraceSource::parse(const RawGroup& raw) {
  ProblemGroup group;
  group.problem_id = raw.problem_id;
  group.rollouts.reserve(raw.lines.size());
  for (std::size_t i = 0; i < raw.lines.size(); ++i) {
    group.rollouts.push_back(parse_rollout(raw.lines[i], raw.line_numbers[i]));
  }
  return group;
}

ProblemGroup TraceSource::load(std::size_t g) { return parse(read_raw(g)); }

namespace {

std::vector<std::string> split_words(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

Category need_category(const std::string& text, std::size_t line_no) {
  const auto c = parse_category(text);
  if (!c) throw ParseError(line_no, "unknown category '" + text + "'");
  return *c;
}

}  // namespace

ClassifierRules parse_rules(std::istream& in) {
  ClassifierRules rules;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto words = split_words(line);
    if (words.empty()) continue;
    const std::string& kind = words.front();
    if (kind == "shell") {
      if (words.size() != 2) throw ParseError(line_no, "expected 'shell TOOL'");
      rules.shell_tools.insert(words[1]);
      continue;
    }
    if (kind == "fallback") {
      if (words.size() != 2) throw ParseError(line_no, "expected 'fallback CATEGORY'");
      rules.fallback = need_category(words[1], line_no);
      continue;
    }
    ClassifierRule rule;
    if (kind == "tool") {
      rule.kind = MatchKind::tool;
    } else if (kind == "bash_prefix") {
      rule.kind = MatchKind::bash_prefix;
    } else {
      throw ParseError(line_no, "unknown rule kind '" + kind + "'");
    }
    if (words.size() < 3) throw ParseError(line_no, "expected 'KIND PATTERN... CATEGORY'");
    for (std::size_t i = 1; i + 1 < words.size(); ++i) {
      if (i > 1) rule.pattern += ' ';
      rule.pattern += words[i];
    }
    rule.category = need_category(words.back(), line_no);
    rules.rules.push_back(std::move(rule));
  }
  return rules;
}

ClassifierRules load_rules_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open rules file '" + path + "'");
  try {
    return parse_rules(in);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.what());
  }
}

void write_rules(std::ostream& out, const ClassifierRules& rules) {
  for (const std::string& tool : rules.shell_tools) out << "shell " << tool << '\n';
  out << "fallback " << to_string(rules.fallback) << '\n';
  for (const ClassifierRule& r : rules.rules) {
    out << (r.kind == MatchKind::tool ? "tool" : "bash_prefix") << ' ' << r.pattern << ' '
        << to_string(r.category) << '\n';
  }
}

std::string serialize_record(const AdvantageRecord& r, bool uniform_outcome) {
  std::string out;
  out.reserve(160 + r.state_sig.size() + r.action_sig.size());
  out += "{\"rollout_id\":";
  append_string(out, r.rollout_id);
  out += ",\"step\":" + std::to_string(r.step);
  out += ",\"state_sig\":";
  append_string(out, r.state_sig);
  out += ",\"action_sig\":";
  append_string(out, r.action_sig);
  out += ",\"q\":";
  append_number(out, r.q);
  out += ",\"v_raw\":";
  append_number(out, r.v_raw);
  out += ",\"v_smoothed\":";
  append_number(out, r.v_smoothed);
  out += ",\"adv\":";
  append_number(out, r.adv);
  out += ",\"adv_normalized\":";
  append_number(out, r.adv_normalized);
  out += ",\"token_begin\":" + std::to_string(r.token_span.begin);
  out += ",\"token_end\":" + std::to_string(r.token_span.end);
  out += ",\"uniform_outcome\":";
  out += uniform_outcome ? "true" : "false";
  out += '}';
  return out;
}

std::string serialize_token(const TokenAdvantage& t, bool uniform_outcome) {
  std::string out = "{\"rollout_id\":";
  append_string(out, t.rollout_id);
  out += ",\"token\":" + std::to_string(t.token);
  out += ",\"adv\":";
  append_number(out, t.adv);
  out += ",\"uniform_outcome\":";
  out += uniform_outcome ? "true" : "false";
  out += '}';
  return out;
}

namespace {

int need_int(const json& doc, const char* name) {
  auto it = doc.find(name);
  if (it == doc.end() || !it->is_number_integer()) {
    throw ParseError(0, std::string("mdp: '") + name + "' must be an integer");
  }
  return it->get<int>();
}

// Reads a [S][A][S] tensor into the flat layout.
std::vector<double> read_tensor(const json& v, const char* name, int S, int A) {
  const std::string where = std::string("mdp: '") + name + "'";
  std::vector<double> out(static_cast<std::size_t>(S) * A * S);
  if (!v.is_array() || v.size() != static_cast<std::size_t>(S)) {
    throw ParseError(0, where + " must have one entry per state");
  }
  for (int s = 0; s < S; ++s) {
    const json& row = v[s];
    if (!row.is_array() || row.size() != static_cast<std::size_t>(A)) {
      throw ParseError(0, where + "[" + std::to_string(s) + "] must have one entry per action");
    }
    for (int a = 0; a < A; ++a) {
      const json& col = row[a];
      if (!col.is_array() || col.size() != static_cast<std::size_t>(S)) {
        throw ParseError(0, where + "[" + std::to_string(s) + "][" + std::to_string(a) +
                                "] must have one entry per state");
      }
      for (int n = 0; n < S; ++n) {
        if (!col[n].is_number()) throw ParseError(0, where + " entries must be numbers");
        out[(static_cast<std::size_t>(s) * A + a) * S + n] = col[n].get<double>();
      }
    }
  }
  return out;
}

}  // namespace

MdpSpec parse_mdp_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(0, std::string("mdp: malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError(0, "mdp: expected an object");

  MdpSpec spec;
  TabularMDP& mdp = spec.mdp;
  mdp.num_states = need_int(doc, "states");
  mdp.num_actions = need_int(doc, "actions");
  mdp.horizon = need_int(doc, "horizon");
  if (mdp.num_states < 1 || mdp.num_actions < 1) {
    throw ParseError(0, "mdp: need at least one state and one action");
  }
  const int S = mdp.num_states;
  const int A = mdp.num_actions;
  if (!doc.contains("gamma") || !doc["gamma"].is_number()) {
    throw ParseError(0, "mdp: 'gamma' must be a number");
  }
  mdp.gamma = doc["gamma"].get<double>();
  if (doc.contains("start")) mdp.start_state = need_int(doc, "start");
  if (!doc.contains("transitions")) throw ParseError(0, "mdp: missing 'transitions'");
  mdp.transition = read_tensor(doc["transitions"], "transitions", S, A);
  mdp.reward = doc.contains("rewards") ? read_tensor(doc["rewards"], "rewards", S, A)
                                       : std::vector<double>(mdp.transition.size(), 0.0);
  mdp.terminal.assign(S, false);
  mdp.terminal_reward.assign(S, 0.0);
  if (doc.contains("terminal")) {
    const json& term = doc["terminal"];
    if (!term.is_array()) throw ParseError(0, "mdp: 'terminal' must be an array");
    for (const json& t : term) {
      if (!t.is_object()) throw ParseError(0, "mdp: terminal entries are {state, reward}");
      const int s = need_int(t, "state");
      if (s < 0 || s >= S) throw ParseError(0, "mdp: terminal state out of range");
      if (!t.contains("reward") || !t["reward"].is_number()) {
        throw ParseError(0, "mdp: terminal reward must be a number");
      }
      mdp.terminal[s] = true;
      mdp.terminal_reward[s] = t["reward"].get<double>();
    }
  }

  TabularPolicy& policy = spec.policy;
  policy.num_states = S;
  policy.num_actions = A;
  if (!doc.contains("policy")) throw ParseError(0, "mdp: missing 'policy'");
  const json& pi = doc["policy"];
  if (!pi.is_array() || pi.size() != static_cast<std::size_t>(S)) {
    throw ParseError(0, "mdp: 'policy' must have one row per state");
  }
  policy.probs.resize(static_cast<std::size_t>(S) * A);
  for (int s = 0; s < S; ++s) {
    if (!pi[s].is_array() || pi[s].size() != static_cast<std::size_t>(A)) {
      throw ParseError(0, "mdp: policy row " + std::to_string(s) + " must have one entry per action");
    }
    for (int a = 0; a < A; ++a) {
      if (!pi[s][a].is_number()) throw ParseError(0, "mdp: policy entries must be numbers");
      policy.probs[static_cast<std::size_t>(s) * A + a] = pi[s][a].get<double>();
    }
  }

  try {
    validate(mdp);
    validate(policy, mdp);
  } catch (const std::invalid_argument& e) {
    throw ParseError(0, std::string("mdp: ") + e.what());
  }
  return spec;
}

MdpSpec load_mdp_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mdp file '" + path + "'");
  const std::string text{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return parse_mdp_json(text);
}

}  // namespace rtmc
