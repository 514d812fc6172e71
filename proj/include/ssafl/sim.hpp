#pragma once

// Deterministic discrete-event simulation of SSAFL (similarity-aware node
// selection, thresholded client uploads, min-weight-protected micro-batch
// aggregation) and of the FedAvg / FedAsync / SemiAsync baselines.
//
// The engine is generic over a FederatedTask so the same protocol code drives
// the regression benchmark and the quadratic convergence diagnostic.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ssafl/aggregation.hpp"
#include "ssafl/data.hpp"
#include "ssafl/error.hpp"
#include "ssafl/intent.hpp"
#include "ssafl/model.hpp"
#include "ssafl/rng.hpp"
#include "ssafl/similarity.hpp"

namespace ssafl {

enum class Method { SSAFL, SSAFLNoAdaptive, FedAvg, FedAsyn, SemiAsyn };

inline constexpr std::array<Method, 5> kAllMethods = {Method::SSAFL, Method::SSAFLNoAdaptive, Method::FedAvg,
                                                      Method::FedAsyn, Method::SemiAsyn};

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::SSAFL: return "SSAFL";
    case Method::SSAFLNoAdaptive: return "SSAFLNoAdaptive";
    case Method::FedAvg: return "FedAvg";
    case Method::FedAsyn: return "FedAsyn";
    case Method::SemiAsyn: return "SemiAsyn";
  }
  return "?";
}

inline std::optional<Method> parse_method(std::string_view s) {
  for (Method m : kAllMethods)
    if (to_string(m) == s) return m;
  return std::nullopt;
}

inline bool is_ssafl(Method m) { return m == Method::SSAFL || m == Method::SSAFLNoAdaptive; }

struct LatencyModel {
  double train_time_base = 1.0;   // seconds per local epoch
  double upload_time_base = 0.5;  // seconds
  double fast = 1.0;
  double medium = 2.5;
  double slow = 5.0;
  double jitter_pct = 0.1;

  double factor(LatencyClass c) const {
    switch (c) {
      case LatencyClass::Fast: return fast;
      case LatencyClass::Medium: return medium;
      case LatencyClass::Slow: return slow;
    }
    return 1.0;
  }
  bool operator==(const LatencyModel&) const = default;
};

/// Stops when the loss reaches `loss_floor`, when the last `patience`
/// aggregations brought no relative improvement of at least `rel_improve`, after
/// `t_max` aggregations, or at the first aggregation at or past `horizon`
/// simulated seconds (0 disables the horizon).
struct StopRule {
  std::size_t t_max = 2000;
  double loss_floor = 0.0;
  std::size_t patience = 1000;
  double rel_improve = 1e-4;
  double horizon = 1000.0;

  bool operator==(const StopRule&) const = default;
};

struct BaselineConfig {
  double fedasync_alpha = 0.6;
  double fedasync_decay = 0.5;
  std::size_t semiasync_k = 3;

  bool operator==(const BaselineConfig&) const = default;
};

enum class EventKind { TrainDone, Upload, Apply, Aggregate };

inline std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::TrainDone: return "train_done";
    case EventKind::Upload: return "upload";
    case EventKind::Apply: return "apply";
    case EventKind::Aggregate: return "aggregate";
  }
  return "?";
}

/// One trace line. `tau` is the number of global versions between the client's
/// base model and the current one (for Apply: the staleness of the applied
/// update). Aggregate lines carry node -1 and the norm of the global step.
struct TraceEvent {
  std::uint64_t event_id = 0;
  double time = 0.0;
  int node = -1;
  EventKind kind = EventKind::TrainDone;
  double delta_norm = 0.0;
  double eps = 0.0;
  std::int64_t tau = 0;
  bool accepted = false;

  bool operator==(const TraceEvent&) const = default;
};

/// Weights of one SSAFL micro-batch Q(t): raw pre-weights w', normalized w~,
/// protected w, plus the deltas they multiplied.
struct WindowRecord {
  std::uint64_t index = 0;
  double time = 0.0;
  std::vector<int> nodes;
  std::vector<double> pre_weights;
  std::vector<double> normalized;
  std::vector<double> weights;
  std::vector<std::vector<double>> deltas;
};

struct EventTrace {
  std::vector<TraceEvent> events;
  std::vector<std::uint64_t> gamma;   // accepted uploads per node (index = node_id - 1)
  std::vector<std::uint64_t> rounds;  // local training rounds per node
  std::vector<std::pair<std::uint64_t, double>> loss_history;  // (aggregation index, F)
  std::vector<WindowRecord> windows;
  std::size_t aggregations = 0;
  double last_aggregation_time = 0.0;

  std::uint64_t total_uploads() const {
    std::uint64_t s = 0;
    for (auto g : gamma) s += g;
    return s;
  }
};

struct MetricsRow {
  std::uint64_t event_id = 0;
  double sim_time = 0.0;
  Metrics metrics;
  double global_loss = 0.0;
};

/// Stop test evaluated after every aggregation.
inline bool stop_check(const EventTrace& trace, const StopRule& rule) {
  if (trace.loss_history.empty()) return false;
  if (trace.aggregations >= rule.t_max) return true;
  if (trace.loss_history.back().second <= rule.loss_floor) return true;
  if (rule.horizon > 0.0 && trace.last_aggregation_time >= rule.horizon) return true;
  const auto& h = trace.loss_history;
  if (rule.patience >= 1 && h.size() > rule.patience) {
    const std::size_t split = h.size() - rule.patience;
    double best_before = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < split; ++i) best_before = std::min(best_before, h[i].second);
    double best_recent = std::numeric_limits<double>::infinity();
    for (std::size_t i = split; i < h.size(); ++i) best_recent = std::min(best_recent, h[i].second);
    if (best_recent > best_before * (1.0 - rule.rel_improve)) return true;
  }
  return false;
}

/// A federated learning problem as seen by the protocol engine.
template <class T>
concept FederatedTask = requires(const T& t, std::span<const double> p, std::size_t i, const TrainingConfig& c) {
  { t.num_clients() } -> std::convertible_to<std::size_t>;
  { t.client_size(i) } -> std::convertible_to<std::size_t>;
  { t.train(p, i, c) } -> std::same_as<std::vector<double>>;
  { t.global_loss(p) } -> std::convertible_to<double>;
  { t.evaluate(p) } -> std::same_as<Metrics>;
};

/// Regression benchmark: one LocalDataset per node plus a server-side test set.
class RegressionTask {
 public:
  RegressionTask(Arch arch, std::vector<LocalDataset> clients, LocalDataset test)
      : arch_(arch), clients_(std::move(clients)), test_(std::move(test)) {}

  std::size_t num_clients() const { return clients_.size(); }
  std::size_t client_size(std::size_t i) const { return clients_.at(i).size(); }
  const Arch& arch() const { return arch_; }
  const std::vector<LocalDataset>& clients() const { return clients_; }
  const LocalDataset& test() const { return test_; }

  std::vector<double> train(std::span<const double> p, std::size_t i, const TrainingConfig& cfg) const {
    return local_train(model(p), clients_.at(i), cfg).params;
  }
  double global_loss(std::span<const double> p) const { return ssafl::global_loss(model(p), clients_); }
  Metrics evaluate(std::span<const double> p) const { return ssafl::evaluate(model(p), test_); }

 private:
  ModelState model(std::span<const double> p) const { return {arch_, std::vector<double>(p.begin(), p.end())}; }

  Arch arch_;
  std::vector<LocalDataset> clients_;
  LocalDataset test_;
};

/// Participating client: which task partition it trains on, its latency class,
/// and (for SSAFL) its similarity and upload threshold.
struct ClientPlan {
  int node_id = 1;
  std::size_t task_index = 0;
  LatencyClass latency_class = LatencyClass::Fast;
  double similarity = 1.0;
  double eps = 0.0;
};

struct ProtocolConfig {
  Method method = Method::SSAFL;
  std::vector<ClientPlan> clients;
  std::size_t population_size = 0;  // sizes the per-node counters; defaults to max node_id
  TrainingConfig training;
  AggregationConfig aggregation;
  LatencyModel latency;
  StopRule stop;
  BaselineConfig baselines;
  std::uint64_t seed = 0;
};

struct SimOutcome {
  std::vector<double> params;
  EventTrace trace;
  std::vector<MetricsRow> metrics;
  std::size_t wall_events = 0;
};

namespace detail {

enum class QueueKind { TrainDone, UploadArrive, WindowClose };

struct QueuedEvent {
  double time;
  std::uint64_t seq;
  QueueKind kind;
  std::size_t client;
  std::uint64_t tag;
};

struct LaterFirst {
  bool operator()(const QueuedEvent& a, const QueuedEvent& b) const {
    return a.time != b.time ? a.time > b.time : a.seq > b.seq;
  }
};

/// Strict (time, insertion sequence) ordering.
class EventQueue {
 public:
  void push(double time, QueueKind kind, std::size_t client, std::uint64_t tag = 0) {
    heap_.push({time, next_seq_++, kind, client, tag});
  }
  bool empty() const { return heap_.empty(); }
  QueuedEvent pop() {
    QueuedEvent e = heap_.top();
    heap_.pop();
    return e;
  }

 private:
  std::priority_queue<QueuedEvent, std::vector<QueuedEvent>, LaterFirst> heap_;
  std::uint64_t next_seq_ = 0;
};

template <FederatedTask Task>
class ProtocolEngine {
 public:
  ProtocolEngine(const Task& task, std::vector<double> init, const ProtocolConfig& cfg)
      : task_(task), cfg_(cfg), theta_(std::move(init)), latency_rng_(derive_seed(cfg.seed, {0x6c6174ULL})) {
    if (cfg_.clients.empty()) throw EmptySelection();
    if (is_ssafl(cfg_.method)) {
      if (cfg_.aggregation.micro_batch < 1) throw BadSpec("aggregation.micro_batch must be at least 1");
      if (cfg_.aggregation.w_min * static_cast<double>(cfg_.aggregation.micro_batch) > 1.0 + 1e-12)
        throw InfeasibleFloor();
    }
    if (cfg_.method == Method::SemiAsyn && cfg_.baselines.semiasync_k < 1) throw BadSpec("SemiAsync quorum must be >= 1");
    std::size_t n = cfg_.population_size;
    for (const auto& c : cfg_.clients) {
      if (c.node_id < 1) throw BadSpec("node ids start at 1");
      if (c.task_index >= task_.num_clients()) throw BadSpec("client plan refers to a missing partition");
      n = std::max(n, static_cast<std::size_t>(c.node_id));
    }
    out_.trace.gamma.assign(n, 0);
    out_.trace.rounds.assign(n, 0);
    states_.resize(cfg_.clients.size());
  }

  SimOutcome run() {
    record_metrics(0, 0.0);
    for (std::size_t c = 0; c < states_.size(); ++c) restart(c, 0.0);
    while (!queue_.empty() && !stopped_) {
      const QueuedEvent e = queue_.pop();
      ++out_.wall_events;
      now_ = e.time;
      switch (e.kind) {
        case QueueKind::TrainDone: on_train_done(e.client); break;
        case QueueKind::UploadArrive: on_upload(e.client); break;
        case QueueKind::WindowClose:
          if (e.tag == window_gen_ && !pending_.empty()) aggregate_ssafl();
          break;
      }
    }
    out_.params = theta_;
    return std::move(out_);
  }

 private:
  struct ClientState {
    std::vector<double> base;
    std::vector<double> local;
    std::int64_t base_version = 0;
    UpdateDelta pending;
  };

  double jitter() {
    const double j = cfg_.latency.jitter_pct;
    return j > 0.0 ? 1.0 + latency_rng_.uniform(-j, j) : 1.0;
  }
  double train_duration(std::size_t c) {
    return cfg_.latency.train_time_base * static_cast<double>(cfg_.training.local_epochs) *
           cfg_.latency.factor(cfg_.clients[c].latency_class) * jitter();
  }
  double upload_duration(std::size_t c) {
    return cfg_.latency.upload_time_base * cfg_.latency.factor(cfg_.clients[c].latency_class) * jitter();
  }
  std::size_t slot(std::size_t c) const { return static_cast<std::size_t>(cfg_.clients[c].node_id - 1); }

  void log(int node, EventKind kind, double norm, double eps, std::int64_t tau, bool accepted) {
    out_.trace.events.push_back({out_.trace.events.size(), now_, node, kind, norm, eps, tau, accepted});
  }

  /// Hands the current global model to client c and starts a local round unless
  /// the simulated horizon has passed.
  void restart(std::size_t c, double at) {
    ClientState& s = states_[c];
    s.base = theta_;
    s.local = theta_;
    s.base_version = version_;
    schedule_training(c, at);
  }

  void schedule_training(std::size_t c, double at) {
    if (stopped_) return;
    if (cfg_.stop.horizon > 0.0 && at > cfg_.stop.horizon) return;
    queue_.push(at + train_duration(c), QueueKind::TrainDone, c);
  }

  void on_train_done(std::size_t c) {
    ClientState& s = states_[c];
    const ClientPlan& plan = cfg_.clients[c];
    TrainingConfig tc = cfg_.training;
    tc.seed = derive_seed(cfg_.seed, {0x747261696eULL, static_cast<std::uint64_t>(plan.node_id),
                                      out_.trace.rounds[slot(c)]});
    s.local = task_.train(s.local, plan.task_index, tc);
    ++out_.trace.rounds[slot(c)];
    // Every client stuck below its threshold with no horizon would never end.
    if (++rounds_since_aggregation_ > kStallRoundsPerClient * states_.size()) stopped_ = true;
    s.pending = update_delta(s.local, s.base);
    const std::int64_t tau = version_ - s.base_version;
    const double eps = is_ssafl(cfg_.method) ? plan.eps : 0.0;
    const bool upload = s.pending.norm >= eps;
    log(plan.node_id, EventKind::TrainDone, s.pending.norm, eps, tau, upload);
    if (upload)
      queue_.push(now_ + upload_duration(c), QueueKind::UploadArrive, c);
    else
      schedule_training(c, now_);  // keep accumulating against the same base
  }

  void on_upload(std::size_t c) {
    ClientState& s = states_[c];
    const ClientPlan& plan = cfg_.clients[c];
    const double eps = is_ssafl(cfg_.method) ? plan.eps : 0.0;
    const bool accepted = s.pending.norm >= eps;
    log(plan.node_id, EventKind::Upload, s.pending.norm, eps, version_ - s.base_version, accepted);
    if (!accepted) {
      schedule_training(c, now_);
      return;
    }
    ++out_.trace.gamma[slot(c)];
    switch (cfg_.method) {
      case Method::SSAFL:
      case Method::SSAFLNoAdaptive:
        pending_.push_back(c);
        if (pending_.size() >= cfg_.aggregation.micro_batch)
          aggregate_ssafl();
        else if (pending_.size() == 1)
          queue_.push(now_ + cfg_.aggregation.window, QueueKind::WindowClose, c, window_gen_);
        break;
      case Method::FedAsyn: {
        const std::vector<double> before = theta_;
        const std::int64_t tau = version_ - s.base_version;
        const double a = fedasync_rate(cfg_.baselines.fedasync_alpha, tau, cfg_.baselines.fedasync_decay);
        for (std::size_t k = 0; k < theta_.size(); ++k) theta_[k] = (1.0 - a) * theta_[k] + a * s.local[k];
        log(plan.node_id, EventKind::Apply, s.pending.norm, eps, tau, true);
        finish_aggregation(before, {c}, tau);
        break;
      }
      case Method::SemiAsyn:
        pending_.push_back(c);
        if (pending_.size() >= cfg_.baselines.semiasync_k) aggregate_average();
        break;
      case Method::FedAvg:
        pending_.push_back(c);
        if (pending_.size() == states_.size()) aggregate_average();
        break;
    }
  }

  /// Dataset-size weighted average of the buffered local models (FedAvg, SemiAsync).
  void aggregate_average() {
    const std::vector<double> before = theta_;
    double n = 0.0;
    for (std::size_t c : pending_) n += static_cast<double>(task_.client_size(cfg_.clients[c].task_index));
    std::vector<double> next(theta_.size(), 0.0);
    std::int64_t tau_max = 0;
    for (std::size_t c : pending_) {
      const ClientState& s = states_[c];
      const double w = static_cast<double>(task_.client_size(cfg_.clients[c].task_index)) / n;
      for (std::size_t k = 0; k < next.size(); ++k) next[k] += w * s.local[k];
      const std::int64_t tau = version_ - s.base_version;
      tau_max = std::max(tau_max, tau);
      log(cfg_.clients[c].node_id, EventKind::Apply, s.pending.norm, 0.0, tau, true);
    }
    theta_ = std::move(next);
    std::vector<std::size_t> done;
    done.swap(pending_);
    finish_aggregation(before, done, tau_max);
  }

  /// Micro-batch update theta += sum_j w_j delta_j with min-weight protection.
  void aggregate_ssafl() {
    const std::vector<double> before = theta_;
    WindowRecord w;
    w.index = static_cast<std::uint64_t>(version_ + 1);
    w.time = now_;
    std::int64_t tau_max = 0;
    for (std::size_t c : pending_) {
      const ClientState& s = states_[c];
      w.nodes.push_back(cfg_.clients[c].node_id);
      w.pre_weights.push_back(cfg_.method == Method::SSAFL ? pre_weight(cfg_.clients[c].similarity, s.pending.norm)
                                                           : 1.0);
      w.deltas.push_back(s.pending.delta);
    }
    w.normalized = normalize_weights(w.pre_weights);
    w.weights = protected_weights(w.pre_weights, cfg_.aggregation.w_min);
    theta_ = apply_update(theta_, w.deltas, w.weights);
    for (std::size_t c : pending_) {
      const std::int64_t tau = version_ - states_[c].base_version;
      tau_max = std::max(tau_max, tau);
      log(cfg_.clients[c].node_id, EventKind::Apply, states_[c].pending.norm, cfg_.clients[c].eps, tau, true);
    }
    out_.trace.windows.push_back(std::move(w));
    ++window_gen_;
    std::vector<std::size_t> done;
    done.swap(pending_);
    finish_aggregation(before, done, tau_max);
  }

  void finish_aggregation(const std::vector<double>& before, const std::vector<std::size_t>& receivers,
                          std::int64_t tau_max) {
    ++version_;
    rounds_since_aggregation_ = 0;
    const UpdateDelta step = update_delta(theta_, before);
    log(-1, EventKind::Aggregate, step.norm, 0.0, tau_max, true);
    EventTrace& t = out_.trace;
    ++t.aggregations;
    t.last_aggregation_time = now_;
    const double loss = record_metrics(static_cast<std::uint64_t>(version_), now_);
    if (!std::isfinite(loss) || loss > 1e6) throw NonFiniteLoss();
    t.loss_history.emplace_back(static_cast<std::uint64_t>(version_), loss);
    if (stop_check(t, cfg_.stop)) {
      stopped_ = true;
      return;
    }
    for (std::size_t c : receivers) restart(c, now_);
  }

  double record_metrics(std::uint64_t event_id, double time) {
    MetricsRow row;
    row.event_id = event_id;
    row.sim_time = time;
    row.metrics = task_.evaluate(theta_);
    row.global_loss = task_.global_loss(theta_);
    out_.metrics.push_back(row);
    return row.global_loss;
  }

  const Task& task_;
  const ProtocolConfig& cfg_;
  std::vector<double> theta_;
  Rng latency_rng_;
  EventQueue queue_;
  std::vector<ClientState> states_;
  std::vector<std::size_t> pending_;
  std::int64_t version_ = 0;
  std::uint64_t window_gen_ = 0;
  static constexpr std::size_t kStallRoundsPerClient = 1000;
  std::size_t rounds_since_aggregation_ = 0;
  double now_ = 0.0;
  bool stopped_ = false;
  SimOutcome out_;
};

}  // namespace detail

/// Runs one protocol to completion; fully determined by (task, init, cfg).
template <FederatedTask Task>
SimOutcome simulate(const Task& task, std::vector<double> init, const ProtocolConfig& cfg) {
  return detail::ProtocolEngine<Task>(task, std::move(init), cfg).run();
}

// Experiment-level wiring --------------------------------------------------------

/// Everything a single run needs apart from the method and seed.
struct SimulationConfig {
  DataSpec data;
  std::size_t pool_size = 20;
  ArchKind arch = ArchKind::Mlp;
  std::size_t hidden = 16;
  std::string strategy =
      "user=operator_02; goal latency < 15; goal throughput > 100; entity ultrasonic_module; "
      "action qos_adjustment(priority=5); action rate_limit(priority=3); window 0 600";
  SelectionConfig selection;
  std::size_t fallback_top_k = 3;  // used when no node clears tau_s; 0 = fail
  SimilarityWeights sim_weights;
  TrainingConfig training;
  UploadPolicy upload;
  AggregationConfig aggregation;
  LatencyModel latency;
  StopRule stop;
  BaselineConfig baselines;

  bool operator==(const SimulationConfig&) const = default;
};

/// Data, population and initial model shared by every method at one seed.
struct Scenario {
  std::uint64_t seed = 0;
  GeneratedData data;
  std::vector<NodeProfile> population;
  StrategyTuple strategy;
  ModelState init;
};

inline Arch model_arch(const SimulationConfig& cfg) {
  return cfg.arch == ArchKind::Linear ? Arch::linear(cfg.data.input_dim) : Arch::mlp(cfg.data.input_dim, cfg.hidden);
}

inline Scenario make_scenario(const SimulationConfig& cfg, std::uint64_t seed) {
  Scenario s;
  s.seed = seed;
  DataSpec spec = cfg.data;
  spec.seed = derive_seed(seed, {0x64617461ULL});
  s.data = generate_dataset(spec);
  s.population = generate_population(spec, cfg.pool_size, derive_seed(seed, {0x706f70ULL}));
  s.strategy = parse_strategy(cfg.strategy);
  s.init = ModelState::initialized(model_arch(cfg), derive_seed(seed, {0x696e6974ULL}));
  return s;
}

struct RunResult {
  Method method = Method::SSAFL;
  std::uint64_t seed = 0;
  ModelState final;
  EventTrace trace;
  std::vector<MetricsRow> metrics;
  std::vector<Selection> selected;
  bool fallback_used = false;
  std::size_t wall_events = 0;
};

/// SSAFL node set: H_i >= tau_s, or the fallback_top_k best nodes when none qualify.
inline std::vector<Selection> ssafl_selection(const Scenario& sc, const SimulationConfig& cfg, bool* fallback = nullptr) {
  if (fallback) *fallback = false;
  try {
    return select_nodes(sc.strategy, sc.population, cfg.selection, cfg.sim_weights);
  } catch (const EmptySelection&) {
    if (cfg.fallback_top_k == 0) throw;
    auto all = score_nodes(sc.strategy, sc.population, cfg.selection, cfg.sim_weights);
    std::stable_sort(all.begin(), all.end(),
                     [](const Selection& a, const Selection& b) { return a.suitability > b.suitability; });
    all.resize(std::min(all.size(), cfg.fallback_top_k));
    std::sort(all.begin(), all.end(), [](const Selection& a, const Selection& b) { return a.node_id < b.node_id; });
    if (fallback) *fallback = true;
    return all;
  }
}

namespace detail {

inline const NodeProfile& profile_of(const Scenario& sc, int node_id) {
  for (const auto& p : sc.population)
    if (p.node_id == node_id) return p;
  throw BadSpec("unknown node " + std::to_string(node_id));
}

inline RunResult execute(Method method, const Scenario& sc, const SimulationConfig& cfg,
                         std::vector<ClientPlan> clients, std::vector<Selection> selected, bool fallback) {
  const RegressionTask task(sc.init.arch, sc.data.partitions, sc.data.test);
  ProtocolConfig pc;
  pc.method = method;
  pc.clients = std::move(clients);
  pc.population_size = sc.population.size();
  pc.training = cfg.training;
  pc.aggregation = cfg.aggregation;
  pc.latency = cfg.latency;
  pc.stop = cfg.stop;
  pc.baselines = cfg.baselines;
  pc.seed = derive_seed(sc.seed, {0x72756eULL});
  SimOutcome o = simulate(task, sc.init.params, pc);
  RunResult r;
  r.method = method;
  r.seed = sc.seed;
  r.final = {sc.init.arch, std::move(o.params)};
  r.trace = std::move(o.trace);
  r.metrics = std::move(o.metrics);
  r.selected = std::move(selected);
  r.fallback_used = fallback;
  r.wall_events = o.wall_events;
  return r;
}

}  // namespace detail

/// SSAFL, or with `adaptive = false` the ablation that replaces pre-weights by
/// uniform weights while keeping selection and thresholds.
inline RunResult run_ssafl(const Scenario& sc, const SimulationConfig& cfg, bool adaptive = true) {
  bool fallback = false;
  auto selected = ssafl_selection(sc, cfg, &fallback);
  std::vector<ClientPlan> clients;
  for (const auto& sel : selected) {
    const NodeProfile& p = detail::profile_of(sc, sel.node_id);
    clients.push_back({sel.node_id, static_cast<std::size_t>(sel.node_id - 1), p.latency_class, sel.similarity,
                       upload_threshold(cfg.upload, sel.similarity)});
  }
  return detail::execute(adaptive ? Method::SSAFL : Method::SSAFLNoAdaptive, sc, cfg, std::move(clients),
                         std::move(selected), fallback);
}

/// Baselines use every node and count every upload.
inline RunResult run_baseline(Method method, const Scenario& sc, const SimulationConfig& cfg) {
  if (is_ssafl(method)) throw BadSpec("run_baseline expects FedAvg, FedAsyn or SemiAsyn");
  std::vector<ClientPlan> clients;
  std::vector<Selection> selected;
  for (const auto& p : sc.population) {
    const double sim = strategy_similarity(sc.strategy, p, cfg.sim_weights);
    clients.push_back({p.node_id, static_cast<std::size_t>(p.node_id - 1), p.latency_class, sim, 0.0});
    selected.push_back({p.node_id, suitability(sim, resource_score(p, cfg.selection), cfg.selection), sim});
  }
  return detail::execute(method, sc, cfg, std::move(clients), std::move(selected), false);
}

inline RunResult run_method(Method method, const Scenario& sc, const SimulationConfig& cfg) {
  switch (method) {
    case Method::SSAFL: return run_ssafl(sc, cfg, true);
    case Method::SSAFLNoAdaptive: return run_ssafl(sc, cfg, false);
    default: return run_baseline(method, sc, cfg);
  }
}

inline RunResult run_method(Method method, const SimulationConfig& cfg, std::uint64_t seed) {
  return run_method(method, make_scenario(cfg, seed), cfg);
}

}  // namespace ssafl
