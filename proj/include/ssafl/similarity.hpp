#pragma once

// Strategy similarity, resource availability and suitability scoring, and
// threshold-based node selection.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "ssafl/error.hpp"
#include "ssafl/intent.hpp"

namespace ssafl {

struct SimilarityWeights {
  double gamma1 = 0.6;  // action term
  double gamma2 = 0.4;  // condition term
  double a_g = 2.0;     // threshold-gap decay scale

  bool operator==(const SimilarityWeights&) const = default;
};

struct SelectionConfig {
  double beta1 = 0.7;   // similarity
  double beta2 = 0.3;   // resources
  double delta1 = 0.5;  // CPU headroom
  double delta2 = 0.5;  // bandwidth
  double tau_s = 0.5;

  bool operator==(const SelectionConfig&) const = default;
};

enum class LatencyClass { Fast, Medium, Slow };

inline std::string_view to_string(LatencyClass c) {
  switch (c) {
    case LatencyClass::Fast: return "Fast";
    case LatencyClass::Medium: return "Medium";
    case LatencyClass::Slow: return "Slow";
  }
  return "?";
}

struct NodeProfile {
  int node_id = 1;
  double cpu_util = 0.0;   // U_i, normalized
  double bandwidth = 1.0;  // B_i, normalized
  std::vector<StrategyTuple> history;
  LatencyClass latency_class = LatencyClass::Fast;
  std::string dataset_ref;

  bool operator==(const NodeProfile&) const = default;
};

/// Node chosen for a round, with the scores later used for its upload threshold
/// and aggregation pre-weight.
struct Selection {
  int node_id = 0;
  double suitability = 0.0;
  double similarity = 0.0;
};

inline std::set<std::string> action_kinds(const std::vector<ActionItem>& actions) {
  std::set<std::string> kinds;
  for (const auto& a : actions) kinds.insert(a.kind);
  return kinds;
}

/// Jaccard index; two empty sets count as identical.
inline double action_similarity(const std::set<std::string>& a, const std::set<std::string>& b) {
  if (a.empty() && b.empty()) return 1.0;
  std::size_t common = 0;
  for (const auto& x : a) common += b.count(x);
  const std::size_t all = a.size() + b.size() - common;
  return static_cast<double>(common) / static_cast<double>(all);
}

/// h(g, g'): exp(-a_g |mu_g - mu_g'| / |mu_g|) for matching metrics, else 0.
inline double condition_similarity(const Goal& g, const Goal& other, double a_g) {
  if (g.metric != other.metric) return 0.0;
  if (g.threshold == 0.0) throw ZeroThreshold(g.metric);
  return std::exp(-a_g * std::abs(g.threshold - other.threshold) / std::abs(g.threshold));
}

/// Mean over current goals of the best-matching historical goal.
inline double goal_set_similarity(const std::vector<Goal>& current, const std::vector<Goal>& historical, double a_g) {
  if (current.empty()) return 0.0;
  double total = 0.0;
  for (const auto& g : current) {
    double best = 0.0;
    for (const auto& h : historical) best = std::max(best, condition_similarity(g, h, a_g));
    total += best;
  }
  return total / static_cast<double>(current.size());
}

/// Sim_i(S): best score over the node's historical strategies.
inline double strategy_similarity(const StrategyTuple& s, const NodeProfile& profile, const SimilarityWeights& w) {
  const auto kinds = action_kinds(s.actions);
  double best = 0.0;
  for (const auto& past : profile.history) {
    const double sim = w.gamma1 * action_similarity(kinds, action_kinds(past.actions)) +
                       w.gamma2 * goal_set_similarity(s.goals, past.goals, w.a_g);
    best = std::max(best, sim);
  }
  return std::clamp(best, 0.0, 1.0);
}

/// Res_i = delta1 (1 - U_i) + delta2 B_i.
inline double resource_score(const NodeProfile& p, const SelectionConfig& c) {
  return c.delta1 * (1.0 - p.cpu_util) + c.delta2 * p.bandwidth;
}

/// H_i = beta1 Sim_i + beta2 Res_i.
inline double suitability(double sim, double res, const SelectionConfig& c) { return c.beta1 * sim + c.beta2 * res; }

/// Nodes with H_i >= tau_s, ordered by node_id. Throws EmptySelection when none qualify.
inline std::vector<Selection> select_nodes(const StrategyTuple& s, const std::vector<NodeProfile>& population,
                                           const SelectionConfig& c, const SimilarityWeights& w) {
  std::vector<Selection> picked;
  for (const auto& p : population) {
    const double sim = strategy_similarity(s, p, w);
    const double h = suitability(sim, resource_score(p, c), c);
    if (h >= c.tau_s) picked.push_back({p.node_id, h, sim});
  }
  if (picked.empty()) throw EmptySelection();
  std::sort(picked.begin(), picked.end(), [](const Selection& a, const Selection& b) { return a.node_id < b.node_id; });
  return picked;
}

/// Scores every node without filtering, ordered by node_id.
inline std::vector<Selection> score_nodes(const StrategyTuple& s, const std::vector<NodeProfile>& population,
                                          const SelectionConfig& c, const SimilarityWeights& w) {
  std::vector<Selection> all;
  for (const auto& p : population) {
    const double sim = strategy_similarity(s, p, w);
    all.push_back({p.node_id, suitability(sim, resource_score(p, c), c), sim});
  }
  std::sort(all.begin(), all.end(), [](const Selection& a, const Selection& b) { return a.node_id < b.node_id; });
  return all;
}

// JSON ------------------------------------------------------------------------

inline void to_json(nlohmann::json& j, const NodeProfile& p) {
  j = {{"node_id", p.node_id},
       {"cpu_util", p.cpu_util},
       {"bandwidth", p.bandwidth},
       {"history", p.history},
       {"latency_class", std::string(to_string(p.latency_class))},
       {"dataset_ref", p.dataset_ref}};
}

inline void from_json(const nlohmann::json& j, NodeProfile& p) {
  p.node_id = j.at("node_id").get<int>();
  p.cpu_util = j.at("cpu_util").get<double>();
  p.bandwidth = j.at("bandwidth").get<double>();
  if (p.cpu_util < 0.0 || p.cpu_util > 1.0 || p.bandwidth < 0.0 || p.bandwidth > 1.0)
    throw SemanticError("node " + std::to_string(p.node_id) + ": cpu_util and bandwidth must lie in [0,1]");
  p.history = j.value("history", nlohmann::json::array()).get<std::vector<StrategyTuple>>();
  const auto cls = j.at("latency_class").get<std::string>();
  if (cls == "Fast")
    p.latency_class = LatencyClass::Fast;
  else if (cls == "Medium")
    p.latency_class = LatencyClass::Medium;
  else if (cls == "Slow")
    p.latency_class = LatencyClass::Slow;
  else
    throw SemanticError("unknown latency class '" + cls + "'");
  p.dataset_ref = j.value("dataset_ref", std::string{});
}

}  // namespace ssafl
