#pragma once

// Experiment configuration: a TOML-style file of `[section]` headers and
// `key = value` lines (numbers, "strings", booleans, flat [arrays]).

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "ssafl/error.hpp"
#include "ssafl/format.hpp"
#include "ssafl/intent.hpp"
#include "ssafl/sim.hpp"

namespace ssafl {

struct ExperimentConfig {
  SimulationConfig sim;
  std::vector<Method> methods = {Method::SSAFL, Method::SSAFLNoAdaptive, Method::FedAvg, Method::FedAsyn,
                                 Method::SemiAsyn};
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5};
  std::string output_dir = "out";

  bool operator==(const ExperimentConfig&) const = default;
};

namespace toml {

struct Value {
  enum class Type { String, Number, Bool, Array } type = Type::String;
  std::string text;  // string contents, number literal, or true/false
  std::vector<Value> items;
};

using Table = std::map<std::string, Value>;  // "section.key" -> value

inline std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

class Parser {
 public:
  Parser(std::string_view text, std::size_t line) : text_(text), line_(line) {}

  Value value() {
    skip();
    if (pos_ >= text_.size()) fail("a value");
    const char c = text_[pos_];
    Value v;
    if (c == '"') {
      v.type = Value::Type::String;
      ++pos_;
      while (pos_ < text_.size() && text_[pos_] != '"') {
        if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
          const char n = text_[++pos_];
          v.text += n == 'n' ? '\n' : n == 't' ? '\t' : n;
        } else {
          v.text += text_[pos_];
        }
        ++pos_;
      }
      if (pos_ >= text_.size()) fail("closing quote");
      ++pos_;
    } else if (c == '[') {
      v.type = Value::Type::Array;
      ++pos_;
      skip();
      if (pos_ < text_.size() && text_[pos_] == ']') {
        ++pos_;
        return v;
      }
      while (true) {
        v.items.push_back(value());
        skip();
        if (pos_ < text_.size() && text_[pos_] == ',') {
          ++pos_;
          skip();
          if (pos_ < text_.size() && text_[pos_] == ']') {
            ++pos_;
            break;
          }
          continue;
        }
        if (pos_ < text_.size() && text_[pos_] == ']') {
          ++pos_;
          break;
        }
        fail("',' or ']'");
      }
    } else {
      const std::size_t start = pos_;
      while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])) && text_[pos_] != ',' &&
             text_[pos_] != ']' && text_[pos_] != '#')
        ++pos_;
      v.text = std::string(text_.substr(start, pos_ - start));
      if (v.text == "true" || v.text == "false") {
        v.type = Value::Type::Bool;
      } else {
        double d = 0.0;
        if (!parse_number(v.text, d)) fail("number, string, boolean or array");
        v.type = Value::Type::Number;
      }
    }
    return v;
  }

  void finish() {
    skip();
    if (pos_ < text_.size() && text_[pos_] != '#') fail("end of line");
  }

 private:
  void skip() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }
  [[noreturn]] void fail(const char* what) const {
    throw ConfigError("line " + std::to_string(line_), std::string("expected ") + what);
  }

  std::string_view text_;
  std::size_t line_;
  std::size_t pos_ = 0;
};

inline Table parse(std::string_view text) {
  Table table;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    std::string s = trim(raw);
    if (s.empty() || s[0] == '#') continue;
    if (s[0] == '[') {
      const auto close = s.find(']');
      if (close == std::string::npos) throw ConfigError("line " + std::to_string(line), "unterminated section header");
      section = trim(std::string_view(s).substr(1, close - 1));
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(line), "expected key = value");
    const std::string key = (section.empty() ? "" : section + ".") + trim(std::string_view(s).substr(0, eq));
    Parser p(std::string_view(s).substr(eq + 1), line);
    Value v = p.value();
    p.finish();
    if (!table.emplace(key, std::move(v)).second) throw ConfigError(key, "duplicate key");
  }
  return table;
}

}  // namespace toml

namespace detail {

class ConfigReader {
 public:
  explicit ConfigReader(toml::Table t) : table_(std::move(t)) {}

  void number(const std::string& key, double& out) {
    if (const auto* v = find(key)) {
      if (v->type != toml::Value::Type::Number) throw ConfigError(key, "expected a number");
      parse_number(v->text, out);
    }
  }
  void count(const std::string& key, std::size_t& out) {
    std::uint64_t x = out;
    unsigned_int(key, x);
    out = static_cast<std::size_t>(x);
  }
  void integer(const std::string& key, int& out) {
    std::uint64_t x = static_cast<std::uint64_t>(out);
    unsigned_int(key, x);
    out = static_cast<int>(x);
  }
  void unsigned_int(const std::string& key, std::uint64_t& out) {
    if (const auto* v = find(key)) out = parse_u64(key, *v);
  }
  void string(const std::string& key, std::string& out) {
    if (const auto* v = find(key)) {
      if (v->type != toml::Value::Type::String) throw ConfigError(key, "expected a quoted string");
      out = v->text;
    }
  }
  const toml::Value* array(const std::string& key) {
    const auto* v = find(key);
    if (v && v->type != toml::Value::Type::Array) throw ConfigError(key, "expected an array");
    return v;
  }
  static std::uint64_t parse_u64(const std::string& key, const toml::Value& v) {
    std::uint64_t x = 0;
    auto [p, ec] = std::from_chars(v.text.data(), v.text.data() + v.text.size(), x);
    if (v.type != toml::Value::Type::Number || ec != std::errc{} || p != v.text.data() + v.text.size())
      throw ConfigError(key, "expected a non-negative integer");
    return x;
  }
  void reject_unknown() const {
    for (const auto& [key, v] : table_)
      if (!used_.count(key)) throw ConfigError(key, "unknown configuration key");
  }

 private:
  const toml::Value* find(const std::string& key) {
    auto it = table_.find(key);
    if (it == table_.end()) return nullptr;
    used_.insert(key);
    return &it->second;
  }

  toml::Table table_;
  std::set<std::string> used_;
};

inline void require(bool ok, const std::string& field, const std::string& message) {
  if (!ok) throw ConfigError(field, message);
}

inline bool unit(double x) { return x >= 0.0 && x <= 1.0; }

}  // namespace detail

/// Checks every sub-config invariant; the ConfigError names the offending field.
inline void validate(const ExperimentConfig& c) {
  using detail::require;
  using detail::unit;
  const SimulationConfig& s = c.sim;
  require(s.data.n_nodes >= 2, "data.n_nodes", "must be at least 2");
  require(s.data.input_dim >= 2, "data.input_dim", "must be at least 2");
  require(s.data.samples_min >= 1, "data.samples_min", "must be at least 1");
  require(s.data.samples_max >= s.data.samples_min, "data.samples_max", "must be >= data.samples_min");
  require(s.data.test_size >= 2, "data.test_size", "must be at least 2");
  require(s.data.context_shift >= 0.0 && std::isfinite(s.data.context_shift), "data.context_shift", "must be >= 0");
  require(s.data.noise_sd >= 0.0 && std::isfinite(s.data.noise_sd), "data.noise_sd", "must be >= 0");
  require(s.pool_size >= 1, "data.pool_size", "must be at least 1");
  require(s.arch == ArchKind::Linear || s.hidden >= 1, "model.hidden", "must be at least 1");
  try {
    (void)parse_strategy(s.strategy);
  } catch (const Error& e) {
    throw ConfigError("strategy.text", e.what());
  }
  const auto& w = s.sim_weights;
  require(unit(w.gamma1) && unit(w.gamma2) && std::abs(w.gamma1 + w.gamma2 - 1.0) <= 1e-12, "similarity.gamma",
          "gamma1 and gamma2 must lie in [0,1] and sum to 1");
  require(w.a_g > 0.0, "similarity.a_g", "must be positive");
  const auto& sel = s.selection;
  require(unit(sel.beta1) && unit(sel.beta2) && std::abs(sel.beta1 + sel.beta2 - 1.0) <= 1e-12, "selection.beta",
          "beta1 and beta2 must lie in [0,1] and sum to 1 (got " + format_number(sel.beta1 + sel.beta2) + ")");
  require(unit(sel.delta1) && unit(sel.delta2) && std::abs(sel.delta1 + sel.delta2 - 1.0) <= 1e-12,
          "selection.delta", "delta1 and delta2 must lie in [0,1] and sum to 1");
  require(unit(sel.tau_s), "selection.tau_s", "must lie in [0,1]");
  require(s.training.eta > 0.0, "training.eta", "must be positive");
  require(s.training.local_epochs >= 1, "training.local_epochs", "must be at least 1");
  require(s.training.batch >= 1, "training.batch", "must be at least 1");
  require(s.upload.eps_base > 0.0, "upload.eps_base", "must be positive");
  require(s.upload.lambda_s >= 0.0, "upload.lambda_s", "must be >= 0");
  const auto& a = s.aggregation;
  require(a.w_min >= 0.0 && a.w_min < 1.0, "aggregation.w_min", "must lie in [0,1)");
  require(a.micro_batch >= 1, "aggregation.micro_batch", "must be at least 1");
  require(a.w_min * static_cast<double>(a.micro_batch) <= 1.0, "aggregation.w_min",
          "w_min * micro_batch must not exceed 1");
  require(a.window > 0.0, "aggregation.window", "must be positive");
  const auto& b = s.baselines;
  require(b.fedasync_alpha > 0.0 && b.fedasync_alpha <= 1.0, "baselines.fedasync_alpha", "must lie in (0,1]");
  require(b.fedasync_decay >= 0.0, "baselines.fedasync_decay", "must be >= 0");
  require(b.semiasync_k >= 1, "baselines.semiasync_k", "must be at least 1");
  const auto& l = s.latency;
  require(l.train_time_base > 0.0, "latency.train_time_base", "must be positive");
  require(l.upload_time_base > 0.0, "latency.upload_time_base", "must be positive");
  require(l.fast > 0.0 && l.medium > 0.0 && l.slow > 0.0, "latency.factor", "class factors must be positive");
  require(l.jitter_pct >= 0.0 && l.jitter_pct < 1.0, "latency.jitter_pct", "must lie in [0,1)");
  require(s.stop.t_max >= 1, "stop.t_max", "must be at least 1");
  require(s.stop.patience >= 1, "stop.patience", "must be at least 1");
  require(s.stop.rel_improve >= 0.0, "stop.rel_improve", "must be >= 0");
  require(s.stop.horizon >= 0.0, "stop.horizon", "must be >= 0");
  require(!c.methods.empty(), "run.methods", "must list at least one method");
  require(!c.seeds.empty(), "run.seeds", "must list at least one seed");
  require(!c.output_dir.empty(), "run.output_dir", "must not be empty");
}

inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  SimulationConfig& s = c.sim;
  detail::ConfigReader r(toml::parse(text));
  r.count("data.n_nodes", s.data.n_nodes);
  r.count("data.samples_min", s.data.samples_min);
  r.count("data.samples_max", s.data.samples_max);
  r.count("data.input_dim", s.data.input_dim);
  r.count("data.test_size", s.data.test_size);
  r.number("data.context_shift", s.data.context_shift);
  r.number("data.noise_sd", s.data.noise_sd);
  r.count("data.pool_size", s.pool_size);
  std::string arch = s.arch == ArchKind::Linear ? "linear" : "mlp";
  r.string("model.arch", arch);
  if (arch == "linear")
    s.arch = ArchKind::Linear;
  else if (arch == "mlp")
    s.arch = ArchKind::Mlp;
  else
    throw ConfigError("model.arch", "must be \"mlp\" or \"linear\"");
  r.count("model.hidden", s.hidden);
  r.string("strategy.text", s.strategy);
  r.number("similarity.gamma1", s.sim_weights.gamma1);
  r.number("similarity.gamma2", s.sim_weights.gamma2);
  r.number("similarity.a_g", s.sim_weights.a_g);
  r.number("selection.beta1", s.selection.beta1);
  r.number("selection.beta2", s.selection.beta2);
  r.number("selection.delta1", s.selection.delta1);
  r.number("selection.delta2", s.selection.delta2);
  r.number("selection.tau_s", s.selection.tau_s);
  r.count("selection.fallback_top_k", s.fallback_top_k);
  r.number("training.eta", s.training.eta);
  r.integer("training.local_epochs", s.training.local_epochs);
  r.count("training.batch", s.training.batch);
  r.number("upload.eps_base", s.upload.eps_base);
  r.number("upload.lambda_s", s.upload.lambda_s);
  r.number("aggregation.w_min", s.aggregation.w_min);
  r.count("aggregation.micro_batch", s.aggregation.micro_batch);
  r.number("aggregation.window", s.aggregation.window);
  r.number("baselines.fedasync_alpha", s.baselines.fedasync_alpha);
  r.number("baselines.fedasync_decay", s.baselines.fedasync_decay);
  r.count("baselines.semiasync_k", s.baselines.semiasync_k);
  r.number("latency.train_time_base", s.latency.train_time_base);
  r.number("latency.upload_time_base", s.latency.upload_time_base);
  r.number("latency.fast", s.latency.fast);
  r.number("latency.medium", s.latency.medium);
  r.number("latency.slow", s.latency.slow);
  r.number("latency.jitter_pct", s.latency.jitter_pct);
  r.count("stop.t_max", s.stop.t_max);
  r.number("stop.loss_floor", s.stop.loss_floor);
  r.count("stop.patience", s.stop.patience);
  r.number("stop.rel_improve", s.stop.rel_improve);
  r.number("stop.horizon", s.stop.horizon);
  if (const auto* m = r.array("run.methods")) {
    c.methods.clear();
    for (const auto& item : m->items) {
      auto method = parse_method(item.text);
      if (item.type != toml::Value::Type::String || !method)
        throw ConfigError("run.methods", "unknown method '" + item.text + "'");
      c.methods.push_back(*method);
    }
  }
  if (const auto* seeds = r.array("run.seeds")) {
    c.seeds.clear();
    for (const auto& item : seeds->items) c.seeds.push_back(detail::ConfigReader::parse_u64("run.seeds", item));
  }
  r.string("run.output_dir", c.output_dir);
  r.reject_unknown();
  validate(c);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

inline std::string to_toml(const ExperimentConfig& c) {
  const SimulationConfig& s = c.sim;
  auto n = [](double v) { return format_number(v); };
  auto quote = [](const std::string& v) {
    std::string out = "\"";
    for (char ch : v) {
      if (ch == '"' || ch == '\\') out += '\\';
      out += ch;
    }
    return out + "\"";
  };
  std::ostringstream o;
  o << "# SSAFL experiment configuration\n\n";
  o << "[data]\n"
    << "n_nodes = " << s.data.n_nodes << "\n"
    << "samples_min = " << s.data.samples_min << "\n"
    << "samples_max = " << s.data.samples_max << "\n"
    << "input_dim = " << s.data.input_dim << "\n"
    << "test_size = " << s.data.test_size << "\n"
    << "context_shift = " << n(s.data.context_shift) << "\n"
    << "noise_sd = " << n(s.data.noise_sd) << "\n"
    << "pool_size = " << s.pool_size << "\n\n";
  o << "[model]\n"
    << "arch = " << quote(s.arch == ArchKind::Linear ? "linear" : "mlp") << "\n"
    << "hidden = " << s.hidden << "\n\n";
  o << "[strategy]\n"
    << "text = " << quote(s.strategy) << "\n\n";
  o << "[similarity]\n"
    << "gamma1 = " << n(s.sim_weights.gamma1) << "\n"
    << "gamma2 = " << n(s.sim_weights.gamma2) << "\n"
    << "a_g = " << n(s.sim_weights.a_g) << "\n\n";
  o << "[selection]\n"
    << "beta1 = " << n(s.selection.beta1) << "\n"
    << "beta2 = " << n(s.selection.beta2) << "\n"
    << "delta1 = " << n(s.selection.delta1) << "\n"
    << "delta2 = " << n(s.selection.delta2) << "\n"
    << "tau_s = " << n(s.selection.tau_s) << "\n"
    << "fallback_top_k = " << s.fallback_top_k << "\n\n";
  o << "[training]\n"
    << "eta = " << n(s.training.eta) << "\n"
    << "local_epochs = " << s.training.local_epochs << "\n"
    << "batch = " << s.training.batch << "\n\n";
  o << "[upload]\n"
    << "eps_base = " << n(s.upload.eps_base) << "\n"
    << "lambda_s = " << n(s.upload.lambda_s) << "\n\n";
  o << "[aggregation]\n"
    << "w_min = " << n(s.aggregation.w_min) << "\n"
    << "micro_batch = " << s.aggregation.micro_batch << "\n"
    << "window = " << n(s.aggregation.window) << "\n\n";
  o << "[baselines]\n"
    << "fedasync_alpha = " << n(s.baselines.fedasync_alpha) << "\n"
    << "fedasync_decay = " << n(s.baselines.fedasync_decay) << "\n"
    << "semiasync_k = " << s.baselines.semiasync_k << "\n\n";
  o << "[latency]\n"
    << "train_time_base = " << n(s.latency.train_time_base) << "\n"
    << "upload_time_base = " << n(s.latency.upload_time_base) << "\n"
    << "fast = " << n(s.latency.fast) << "\n"
    << "medium = " << n(s.latency.medium) << "\n"
    << "slow = " << n(s.latency.slow) << "\n"
    << "jitter_pct = " << n(s.latency.jitter_pct) << "\n\n";
  o << "[stop]\n"
    << "t_max = " << s.stop.t_max << "\n"
    << "loss_floor = " << n(s.stop.loss_floor) << "\n"
    << "patience = " << s.stop.patience << "\n"
    << "rel_improve = " << n(s.stop.rel_improve) << "\n"
    << "horizon = " << n(s.stop.horizon) << "\n\n";
  o << "[run]\nmethods = [";
  for (std::size_t i = 0; i < c.methods.size(); ++i) o << (i ? ", " : "") << quote(std::string(to_string(c.methods[i])));
  o << "]\nseeds = [";
  for (std::size_t i = 0; i < c.seeds.size(); ++i) o << (i ? ", " : "") << c.seeds[i];
  o << "]\noutput_dir = " << quote(c.output_dir) << "\n";
  return o.str();
}

}  // namespace ssafl
