#pragma once

// Intent/strategy data model, the strategy DSL, and deployed-strategy
// satisfaction checks against telemetry.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <istream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "ssafl/error.hpp"
#include "ssafl/format.hpp"

namespace ssafl {

enum class RelationalOp { LT, GT, LEQ, GEQ };

inline std::string_view to_string(RelationalOp op) {
  switch (op) {
    case RelationalOp::LT: return "<";
    case RelationalOp::GT: return ">";
    case RelationalOp::LEQ: return "<=";
    case RelationalOp::GEQ: return ">=";
  }
  return "?";
}

inline std::optional<RelationalOp> parse_op(std::string_view s) {
  if (s == "<") return RelationalOp::LT;
  if (s == ">") return RelationalOp::GT;
  if (s == "<=") return RelationalOp::LEQ;
  if (s == ">=") return RelationalOp::GEQ;
  return std::nullopt;
}

/// One intent condition: `metric op threshold`.
struct Goal {
  std::string metric;
  RelationalOp op = RelationalOp::LT;
  double threshold = 0.0;

  bool operator==(const Goal&) const = default;
};

using ParamValue = std::variant<double, std::string>;

struct ActionItem {
  std::string kind;
  std::vector<std::pair<std::string, ParamValue>> params;

  bool operator==(const ActionItem&) const = default;
};

struct TimeWindow {
  double start = 0.0;
  double end = 0.0;

  bool contains(double t) const { return t >= start && t <= end; }
  bool operator==(const TimeWindow&) const = default;
};

/// Executable strategy <U, G', E', A', T>. The pre-refinement intent tuple uses
/// the same type.
struct StrategyTuple {
  std::string user;
  std::vector<Goal> goals;
  std::vector<std::string> entities;
  std::vector<ActionItem> actions;
  TimeWindow window;

  bool operator==(const StrategyTuple&) const = default;
};

struct TelemetrySample {
  double time = 0.0;
  std::vector<std::pair<std::string, double>> readings;

  std::optional<double> reading(std::string_view metric) const {
    for (const auto& [name, value] : readings)
      if (name == metric) return value;
    return std::nullopt;
  }
};

/// Intended configuration state c_e of one entity; the controller mapping is
/// recorded, not executed.
struct ConfigurationState {
  std::string entity;
  std::vector<ActionItem> actions;
};

enum class Verdict { Stable, ReVerify };

inline bool is_metric_name(std::string_view s) {
  if (s.empty() || !(s[0] >= 'a' && s[0] <= 'z')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
  });
}

inline bool is_identifier(std::string_view s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

/// Checks every StrategyTuple invariant; throws SemanticError naming the first breach.
inline void validate(const StrategyTuple& s) {
  if (!is_identifier(s.user)) throw SemanticError("strategy user must be a non-empty identifier");
  if (s.goals.empty()) throw SemanticError("strategy has no goals");
  if (s.entities.empty()) throw SemanticError("strategy has no entities");
  if (s.actions.empty()) throw SemanticError("strategy has no actions");
  std::set<std::string> metrics;
  for (const auto& g : s.goals) {
    if (!is_metric_name(g.metric)) throw SemanticError("invalid metric name '" + g.metric + "'");
    if (!std::isfinite(g.threshold)) throw SemanticError("goal threshold for '" + g.metric + "' is not finite");
    if (!metrics.insert(g.metric).second) throw SemanticError("duplicate goal metric '" + g.metric + "'");
  }
  for (const auto& e : s.entities)
    if (!is_identifier(e)) throw SemanticError("invalid entity '" + e + "'");
  for (const auto& a : s.actions) {
    if (!is_identifier(a.kind)) throw SemanticError("action kind must be a non-empty identifier");
    std::set<std::string> keys;
    for (const auto& [k, v] : a.params)
      if (!keys.insert(k).second) throw SemanticError("duplicate parameter '" + k + "' in action " + a.kind);
  }
  if (!(s.window.start >= 0.0)) throw SemanticError("window start must be non-negative");
  if (!(s.window.start < s.window.end)) throw SemanticError("window start must precede its end");
}

namespace detail {

class DslParser {
 public:
  explicit DslParser(std::string_view text) : text_(text) {}

  StrategyTuple parse() {
    StrategyTuple s;
    bool have_user = false;
    bool have_window = false;
    while (true) {
      skip_separators();
      if (pos_ >= text_.size()) break;
      const std::size_t clause_start = pos_;
      const std::string keyword = word();
      if (keyword == "user") {
        skip_blanks();
        expect('=', "'=' after user");
        skip_blanks();
        s.user = identifier("user identifier");
        have_user = true;
      } else if (keyword == "goal") {
        Goal g;
        skip_blanks();
        const std::size_t at = pos_;
        g.metric = identifier("metric name");
        if (!is_metric_name(g.metric)) throw SyntaxError(at, "lowercase metric name [a-z][a-z0-9_]*");
        skip_blanks();
        g.op = relational_op();
        skip_blanks();
        g.threshold = number("goal threshold");
        s.goals.push_back(std::move(g));
      } else if (keyword == "entity") {
        skip_blanks();
        s.entities.push_back(identifier("entity identifier"));
      } else if (keyword == "action") {
        skip_blanks();
        s.actions.push_back(action());
      } else if (keyword == "window") {
        skip_blanks();
        s.window.start = number("window start");
        skip_blanks();
        s.window.end = number("window end");
        have_window = true;
      } else {
        throw SyntaxError(clause_start, "clause keyword (user, goal, entity, action, window)");
      }
      skip_blanks();
      if (pos_ < text_.size() && text_[pos_] != ';' && text_[pos_] != '\n')
        throw SyntaxError(pos_, "';' or end of line");
    }
    if (!have_user) throw SemanticError("strategy lacks a user clause");
    if (!have_window) throw SemanticError("strategy lacks a window clause");
    validate(s);
    return s;
  }

 private:
  void skip_blanks() {
    while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\t' || text_[pos_] == '\r')) ++pos_;
  }
  void skip_separators() {
    while (pos_ < text_.size() && (std::isspace(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == ';')) ++pos_;
  }
  void expect(char c, const char* what) {
    if (pos_ >= text_.size() || text_[pos_] != c) throw SyntaxError(pos_, what);
    ++pos_;
  }
  static bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  }
  std::string word() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && std::isalpha(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    return std::string(text_.substr(start, pos_ - start));
  }
  std::string identifier(const char* what) {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && ident_char(text_[pos_])) ++pos_;
    if (pos_ == start) throw SyntaxError(start, what);
    return std::string(text_.substr(start, pos_ - start));
  }
  RelationalOp relational_op() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() && (text_[pos_] == '<' || text_[pos_] == '>' || text_[pos_] == '=')) ++pos_;
    auto op = parse_op(text_.substr(start, pos_ - start));
    if (!op) throw SyntaxError(start, "relational operator (<, >, <=, >=)");
    return *op;
  }
  std::string_view number_token() {
    const std::size_t start = pos_;
    while (pos_ < text_.size() &&
           (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.' || text_[pos_] == '-' ||
            text_[pos_] == '+' || text_[pos_] == 'e' || text_[pos_] == 'E'))
      ++pos_;
    return text_.substr(start, pos_ - start);
  }
  double number(const char* what) {
    const std::size_t start = pos_;
    double v = 0.0;
    if (!parse_number(number_token(), v)) throw SyntaxError(start, std::string("number for ") + what);
    return v;
  }
  ActionItem action() {
    ActionItem a;
    a.kind = identifier("action kind");
    skip_blanks();
    expect('(', "'(' after action kind");
    skip_blanks();
    if (pos_ < text_.size() && text_[pos_] == ')') {
      ++pos_;
      return a;
    }
    while (true) {
      skip_blanks();
      std::string key = identifier("parameter name");
      skip_blanks();
      expect('=', "'=' after parameter name");
      skip_blanks();
      const std::size_t at = pos_;
      std::string raw = identifier("parameter value");
      double v = 0.0;
      if (parse_number(raw, v))
        a.params.emplace_back(std::move(key), v);
      else if (std::isdigit(static_cast<unsigned char>(raw[0])) || raw[0] == '-' || raw[0] == '.')
        throw SyntaxError(at, "numeric or identifier parameter value");
      else
        a.params.emplace_back(std::move(key), std::move(raw));
      skip_blanks();
      if (pos_ < text_.size() && text_[pos_] == ',') {
        ++pos_;
        continue;
      }
      expect(')', "',' or ')' in action parameters");
      return a;
    }
  }

  std::string_view text_;
  std::size_t pos_ = 0;
};

inline std::string format_param(const ParamValue& v) {
  if (const double* d = std::get_if<double>(&v)) return format_number(*d);
  return std::get<std::string>(v);
}

}  // namespace detail

/// Parses the `;`/newline separated strategy DSL.
///   user=<id>; goal <metric> <op> <number>; entity <id>; action <kind>(k=v,...); window <start> <end>
inline StrategyTuple parse_strategy(std::string_view text) { return detail::DslParser(text).parse(); }

/// Canonical DSL text; parse_strategy(to_dsl(s)) == s.
inline std::string to_dsl(const StrategyTuple& s) {
  std::ostringstream out;
  out << "user=" << s.user;
  for (const auto& g : s.goals) out << "; goal " << g.metric << ' ' << to_string(g.op) << ' ' << format_number(g.threshold);
  for (const auto& e : s.entities) out << "; entity " << e;
  for (const auto& a : s.actions) {
    out << "; action " << a.kind << '(';
    for (std::size_t i = 0; i < a.params.size(); ++i) {
      if (i) out << ',';
      out << a.params[i].first << '=' << detail::format_param(a.params[i].second);
    }
    out << ')';
  }
  out << "; window " << format_number(s.window.start) << ' ' << format_number(s.window.end);
  return out.str();
}

/// sigma_n(t): whether the measured value satisfies the goal's relation.
inline bool goal_satisfied(const Goal& g, double measured) {
  switch (g.op) {
    case RelationalOp::LT: return measured < g.threshold;
    case RelationalOp::GT: return measured > g.threshold;
    case RelationalOp::LEQ: return measured <= g.threshold;
    case RelationalOp::GEQ: return measured >= g.threshold;
  }
  return false;
}

/// J_S(t): every goal satisfied by the sample.
inline bool strategy_satisfied(const StrategyTuple& s, const TelemetrySample& sample) {
  bool all = true;
  for (const auto& g : s.goals) {
    auto m = sample.reading(g.metric);
    if (!m) throw MissingMetric(g.metric);
    all = all && goal_satisfied(g, *m);
  }
  return all;
}

/// p_S: fraction of samples in which the strategy is fully satisfied.
inline double empirical_satisfaction(const StrategyTuple& s, const std::vector<TelemetrySample>& samples) {
  if (samples.empty()) throw EmptyWindow();
  std::size_t hits = 0;
  for (const auto& sample : samples) hits += strategy_satisfied(s, sample) ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

/// Samples whose timestamps fall inside the strategy window.
inline std::vector<TelemetrySample> samples_in_window(const StrategyTuple& s, const std::vector<TelemetrySample>& samples) {
  std::vector<TelemetrySample> out;
  for (const auto& x : samples)
    if (s.window.contains(x.time)) out.push_back(x);
  return out;
}

inline Verdict reliability_verdict(double p_s, double p_min = 0.9) {
  return p_s < p_min ? Verdict::ReVerify : Verdict::Stable;
}

inline std::vector<ConfigurationState> configuration_states(const StrategyTuple& s) {
  std::vector<ConfigurationState> out;
  out.reserve(s.entities.size());
  for (const auto& e : s.entities) out.push_back({e, s.actions});
  return out;
}

/// Reads `time,<metric1>,<metric2>,...` CSV telemetry.
inline std::vector<TelemetrySample> read_telemetry_csv(std::istream& in) {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) {
      while (!cell.empty() && std::isspace(static_cast<unsigned char>(cell.back()))) cell.pop_back();
      std::size_t b = 0;
      while (b < cell.size() && std::isspace(static_cast<unsigned char>(cell[b]))) ++b;
      cells.push_back(cell.substr(b));
    }
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw BadSpec("telemetry CSV is empty");
  const auto header = split(line);
  if (header.empty() || header[0] != "time") throw BadSpec("telemetry CSV header must start with 'time'");
  std::set<std::string> seen;
  for (std::size_t i = 1; i < header.size(); ++i)
    if (!is_metric_name(header[i]) || !seen.insert(header[i]).second)
      throw BadSpec("bad or duplicate telemetry column '" + header[i] + "'");
  std::vector<TelemetrySample> out;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) throw BadSpec("telemetry row " + std::to_string(row) + " has wrong column count");
    TelemetrySample sample;
    if (!parse_number(cells[0], sample.time) || sample.time < 0.0)
      throw BadSpec("telemetry row " + std::to_string(row) + " has a bad time");
    for (std::size_t i = 1; i < cells.size(); ++i) {
      double v = 0.0;
      if (!parse_number(cells[i], v)) throw BadSpec("telemetry row " + std::to_string(row) + " has a bad value");
      sample.readings.emplace_back(header[i], v);
    }
    out.push_back(std::move(sample));
  }
  return out;
}

// JSON encoding --------------------------------------------------------------

inline void to_json(nlohmann::json& j, const Goal& g) {
  j = {{"metric", g.metric}, {"op", std::string(to_string(g.op))}, {"threshold", g.threshold}};
}

inline void from_json(const nlohmann::json& j, Goal& g) {
  g.metric = j.at("metric").get<std::string>();
  auto op = parse_op(j.at("op").get<std::string>());
  if (!op) throw SemanticError("unknown relational operator in goal '" + g.metric + "'");
  g.op = *op;
  g.threshold = j.at("threshold").get<double>();
}

inline void to_json(nlohmann::json& j, const ActionItem& a) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [k, v] : a.params) {
    if (const double* d = std::get_if<double>(&v))
      params[k] = *d;
    else
      params[k] = std::get<std::string>(v);
  }
  j = {{"kind", a.kind}, {"params", params}};
}

// nlohmann objects are key-sorted, so parameter order after a JSON round trip is
// lexicographic.
inline void from_json(const nlohmann::json& j, ActionItem& a) {
  a.kind = j.at("kind").get<std::string>();
  a.params.clear();
  if (j.contains("params")) {
    for (const auto& [k, v] : j.at("params").items()) {
      if (v.is_number())
        a.params.emplace_back(k, v.get<double>());
      else if (v.is_string())
        a.params.emplace_back(k, v.get<std::string>());
      else
        throw SemanticError("action parameter '" + k + "' must be a scalar");
    }
  }
}

inline void to_json(nlohmann::json& j, const StrategyTuple& s) {
  j = {{"user", s.user},
       {"goals", s.goals},
       {"entities", s.entities},
       {"actions", s.actions},
       {"window", {{"start", s.window.start}, {"end", s.window.end}}}};
}

inline void from_json(const nlohmann::json& j, StrategyTuple& s) {
  s.user = j.at("user").get<std::string>();
  s.goals = j.at("goals").get<std::vector<Goal>>();
  s.entities = j.at("entities").get<std::vector<std::string>>();
  s.actions = j.at("actions").get<std::vector<ActionItem>>();
  s.window.start = j.at("window").at("start").get<double>();
  s.window.end = j.at("window").at("end").get<double>();
  validate(s);
}

}  // namespace ssafl
