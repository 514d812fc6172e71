#pragma once

// Seeded synthetic benchmark: feature-skewed node partitions for the strategy
// effectiveness regression task, and node populations with strategy histories.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "ssafl/error.hpp"
#include "ssafl/intent.hpp"
#include "ssafl/model.hpp"
#include "ssafl/rng.hpp"
#include "ssafl/similarity.hpp"

namespace ssafl {

struct DataSpec {
  std::size_t n_nodes = 10;
  std::size_t samples_min = 200;
  std::size_t samples_max = 400;
  std::size_t input_dim = 16;
  std::size_t test_size = 1000;
  double context_shift = 1.0;
  double noise_sd = 0.02;
  std::uint64_t seed = 1;

  bool operator==(const DataSpec&) const = default;
};

/// Ground truth of the generator: y = clamp01(sigmoid(v.x + u x_a x_b) + noise).
struct GeneratorTruth {
  std::size_t strategy_dim = 0;  // x = [strategy block (strategy_dim) | context block]
  std::vector<double> v;
  double u = 0.0;
  std::size_t a_index = 0;  // strategy feature in the interaction
  std::size_t b_index = 0;  // context feature in the interaction
  std::vector<std::vector<double>> node_means;  // context offset m_i per node
};

struct GeneratedData {
  std::vector<LocalDataset> partitions;
  LocalDataset test;
  GeneratorTruth truth;
};

inline void validate(const DataSpec& s) {
  if (s.n_nodes < 2) throw BadSpec("data.n_nodes must be at least 2");
  if (s.input_dim < 2) throw BadSpec("data.input_dim must be at least 2");
  if (s.samples_min < 1 || s.samples_max < s.samples_min) throw BadSpec("data.samples_min/max must satisfy 1 <= min <= max");
  if (s.test_size < 2) throw BadSpec("data.test_size must be at least 2");
  if (!(s.noise_sd >= 0.0) || !std::isfinite(s.noise_sd)) throw BadSpec("data.noise_sd must be >= 0");
  if (!(s.context_shift >= 0.0) || !std::isfinite(s.context_shift)) throw BadSpec("data.context_shift must be >= 0");
}

namespace detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

inline double truth_target(const GeneratorTruth& t, std::span<const double> x) {
  double z = t.u * x[t.a_index] * x[t.b_index];
  for (std::size_t k = 0; k < x.size(); ++k) z += t.v[k] * x[k];
  return sigmoid(z);
}

inline void draw_sample(const GeneratorTruth& t, std::span<const double> mean, double noise_sd, Rng& rng,
                        std::vector<double>& inputs, std::vector<double>& targets) {
  const std::size_t d = t.v.size();
  const std::size_t start = inputs.size();
  for (std::size_t k = 0; k < d; ++k) {
    double x = rng.uniform(-1.0, 1.0);
    if (k >= t.strategy_dim) x += mean[k - t.strategy_dim];
    inputs.push_back(x);
  }
  const double clean = truth_target(t, std::span<const double>(inputs.data() + start, d));
  targets.push_back(std::clamp(clean + noise_sd * rng.normal(), 0.0, 1.0));
}

}  // namespace detail

/// Noise-free target of the generator at x.
inline double truth_target(const GeneratorTruth& t, std::span<const double> x) { return detail::truth_target(t, x); }

/// Draws node context offsets m_i uniformly in a ball of radius context_shift;
/// node rows get the shifted context block, test rows mix all node offsets.
inline GeneratedData generate_dataset(const DataSpec& spec) {
  validate(spec);
  GeneratedData out;
  GeneratorTruth& t = out.truth;
  const std::size_t d = spec.input_dim;
  t.strategy_dim = d / 2;
  const std::size_t dc = d - t.strategy_dim;

  Rng truth_rng(derive_seed(spec.seed, {0x7472757468ULL}));
  const double v_sd = 1.5 * std::sqrt(3.0 / static_cast<double>(d));
  t.v.resize(d);
  for (double& v : t.v) v = v_sd * truth_rng.normal();
  t.u = truth_rng.normal();
  t.a_index = 0;
  t.b_index = t.strategy_dim;

  t.node_means.resize(spec.n_nodes);
  for (auto& m : t.node_means) {
    m.resize(dc);
    double len = 0.0;
    for (double& x : m) {
      x = truth_rng.normal();
      len += x * x;
    }
    len = std::sqrt(len);
    const double radius = spec.context_shift * std::pow(truth_rng.uniform(), 1.0 / static_cast<double>(dc));
    for (double& x : m) x = len > 0.0 ? x / len * radius : 0.0;
  }

  for (std::size_t i = 0; i < spec.n_nodes; ++i) {
    Rng rng(derive_seed(spec.seed, {0x6e6f6465ULL, i}));
    const std::size_t n = spec.samples_min + rng.below(spec.samples_max - spec.samples_min + 1);
    std::vector<double> inputs, targets;
    inputs.reserve(n * d);
    targets.reserve(n);
    for (std::size_t s = 0; s < n; ++s) detail::draw_sample(t, t.node_means[i], spec.noise_sd, rng, inputs, targets);
    out.partitions.emplace_back(d, std::move(inputs), std::move(targets));
  }

  Rng test_rng(derive_seed(spec.seed, {0x74657374ULL}));
  std::vector<double> inputs, targets;
  for (std::size_t s = 0; s < spec.test_size; ++s) {
    const std::size_t node = test_rng.below(spec.n_nodes);
    detail::draw_sample(t, t.node_means[node], spec.noise_sd, test_rng, inputs, targets);
  }
  out.test = LocalDataset(d, std::move(inputs), std::move(targets));
  return out;
}

namespace detail {

struct CanonicalGoal {
  const char* metric;
  RelationalOp op;
  double threshold;
};

inline constexpr std::array<const char*, 8> kActionVocabulary = {
    "qos_adjustment", "rate_limit",        "route_update",   "bandwidth_reservation",
    "priority_queue", "traffic_shaping",   "load_balancing", "failover_switch"};

inline constexpr std::array<CanonicalGoal, 5> kCanonicalGoals = {{
    {"latency", RelationalOp::LT, 15.0},
    {"throughput", RelationalOp::GT, 100.0},
    {"packet_loss", RelationalOp::LT, 0.01},
    {"jitter", RelationalOp::LT, 5.0},
    {"energy", RelationalOp::LEQ, 50.0},
}};

inline constexpr std::array<const char*, 4> kEntities = {"ultrasonic_module", "pump_station", "line_b_plc", "edge_gateway"};

template <std::size_t N>
std::vector<std::size_t> pick_distinct(Rng& rng, std::size_t count) {
  std::vector<std::size_t> idx(N);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  rng.shuffle(idx);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// Pool of historical strategies: 1-3 actions from an 8-kind vocabulary and 1-3
/// goals with thresholds perturbed by up to +/-50% around canonical values.
inline std::vector<StrategyTuple> generate_strategy_pool(std::size_t size, std::uint64_t seed) {
  std::vector<StrategyTuple> pool;
  Rng rng(derive_seed(seed, {0x706f6f6cULL}));
  for (std::size_t j = 0; j < size; ++j) {
    StrategyTuple s;
    s.user = "operator_" + std::to_string(j + 1);
    for (std::size_t g : detail::pick_distinct<detail::kCanonicalGoals.size()>(rng, 1 + rng.below(3))) {
      const auto& c = detail::kCanonicalGoals[g];
      s.goals.push_back({c.metric, c.op, c.threshold * (1.0 + rng.uniform(-0.5, 0.5))});
    }
    s.entities.push_back(detail::kEntities[rng.below(detail::kEntities.size())]);
    for (std::size_t a : detail::pick_distinct<detail::kActionVocabulary.size()>(rng, 1 + rng.below(3))) {
      ActionItem item{detail::kActionVocabulary[a], {}};
      item.params.emplace_back("priority", static_cast<double>(1 + rng.below(7)));
      s.actions.push_back(std::move(item));
    }
    s.window = {0.0, 600.0};
    pool.push_back(std::move(s));
  }
  return pool;
}

/// Node profiles with 1-5 pool strategies as history, U_i, B_i ~ U[0,1], and
/// latency classes assigned round-robin Fast, Medium, Slow.
inline std::vector<NodeProfile> generate_population(const DataSpec& spec, std::size_t strategy_pool_size,
                                                    std::uint64_t seed) {
  validate(spec);
  if (strategy_pool_size < 1) throw BadSpec("strategy pool size must be at least 1");
  const auto pool = generate_strategy_pool(strategy_pool_size, seed);
  Rng rng(derive_seed(seed, {0x706f70ULL}));
  std::vector<NodeProfile> nodes;
  for (std::size_t i = 0; i < spec.n_nodes; ++i) {
    NodeProfile p;
    p.node_id = static_cast<int>(i + 1);
    p.cpu_util = rng.uniform();
    p.bandwidth = rng.uniform();
    p.latency_class = static_cast<LatencyClass>(i % 3);
    p.dataset_ref = "node_" + std::to_string(i + 1);
    const std::size_t want = std::min<std::size_t>(1 + rng.below(5), pool.size());
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    rng.shuffle(idx);
    idx.resize(want);
    std::sort(idx.begin(), idx.end());
    for (std::size_t j : idx) p.history.push_back(pool[j]);
    nodes.push_back(std::move(p));
  }
  return nodes;
}

inline void validate_population(const std::vector<NodeProfile>& population) {
  if (population.empty()) throw BadSpec("population is empty");
  std::set<int> ids;
  for (const auto& p : population)
    if (!ids.insert(p.node_id).second) throw BadSpec("duplicate node_id " + std::to_string(p.node_id));
}

}  // namespace ssafl
