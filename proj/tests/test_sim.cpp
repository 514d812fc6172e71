#include <gtest/gtest.h>

#include <map>

#include "ssafl/diagnostics.hpp"
#include "ssafl/sim.hpp"

using namespace ssafl;

namespace {

RegressionTask small_task(std::size_t clients, std::uint64_t seed = 3) {
  DataSpec spec;
  spec.n_nodes = std::max<std::size_t>(clients, 2);
  spec.input_dim = 4;
  spec.samples_min = 40;
  spec.samples_max = 60;
  spec.test_size = 100;
  spec.seed = seed;
  auto g = generate_dataset(spec);
  g.partitions.resize(clients);
  return RegressionTask(Arch::mlp(4, 4), g.partitions, g.test);
}

ProtocolConfig protocol(Method m, std::size_t clients, double horizon = 60.0) {
  ProtocolConfig pc;
  pc.method = m;
  for (std::size_t i = 0; i < clients; ++i)
    pc.clients.push_back({static_cast<int>(i + 1), i, static_cast<LatencyClass>(i % 3), 1.0, 0.0});
  pc.training = {0.05, 2, 16, 0};
  pc.stop.horizon = horizon;
  pc.seed = 42;
  return pc;
}

std::vector<double> init_params(const RegressionTask& t) { return ModelState::initialized(t.arch(), 5).params; }

SimulationConfig small_sim() {
  SimulationConfig c;
  c.data.n_nodes = 6;
  c.data.input_dim = 6;
  c.data.samples_min = 60;
  c.data.samples_max = 90;
  c.data.test_size = 200;
  c.hidden = 6;
  c.selection.tau_s = 0.35;
  c.stop.horizon = 80.0;
  return c;
}

// Replays the trace: Γ moves only on accepted uploads; gate decisions match
// the norm/threshold comparison.
void check_trace_invariants(const EventTrace& t) {
  std::vector<std::uint64_t> gamma(t.gamma.size(), 0);
  for (const auto& e : t.events) {
    if (e.kind == EventKind::Upload && e.accepted) ++gamma[e.node - 1];
    if (e.kind == EventKind::TrainDone || e.kind == EventKind::Upload) {
      EXPECT_EQ(e.accepted, e.delta_norm >= e.eps) << "event " << e.event_id;
    }
  }
  EXPECT_EQ(gamma, t.gamma);
  for (std::size_t i = 1; i < t.events.size(); ++i) {
    EXPECT_EQ(t.events[i].event_id, i);
    EXPECT_GE(t.events[i].time, t.events[i - 1].time);
  }
}

}  // namespace

TEST(Stop, Rules) {
  EventTrace t;
  StopRule r;
  r.horizon = 0;
  EXPECT_FALSE(stop_check(t, r));
  t.loss_history = {{1, 0.5}};
  t.aggregations = 1;
  r.t_max = 1;
  EXPECT_TRUE(stop_check(t, r));
  r.t_max = 100;
  r.loss_floor = 0.05;
  t.loss_history = {{1, 0.049}};
  EXPECT_TRUE(stop_check(t, r));
  r.loss_floor = 0.0;
  r.patience = 3;
  t.loss_history.clear();
  for (int i = 0; i < 10; ++i) {
    t.loss_history.emplace_back(i, 1.0 / (1 + i));
    EXPECT_FALSE(stop_check(t, r));
  }
  for (int i = 0; i < 3; ++i) t.loss_history.emplace_back(10 + i, 0.5);
  EXPECT_TRUE(stop_check(t, r));
  r.patience = 1000;
  r.horizon = 50;
  t.last_aggregation_time = 49.9;
  EXPECT_FALSE(stop_check(t, r));
  t.last_aggregation_time = 50.0;
  EXPECT_TRUE(stop_check(t, r));
}

TEST(Engine, SingleClientFollowsLocalModel) {
  const auto task = small_task(1);
  auto pc = protocol(Method::SSAFL, 1, 40.0);
  pc.clients[0].eps = 1e-9;
  const auto out = simulate(task, init_params(task), pc);
  ASSERT_GT(out.trace.aggregations, 2u);
  ASSERT_EQ(out.trace.windows.size(), out.trace.aggregations);
  for (const auto& w : out.trace.windows) EXPECT_EQ(w.weights, std::vector<double>{1.0});
  // Replaying the client's local training from the initial model reproduces the
  // global trajectory (theta + (local - theta) can differ from local in the last bit).
  std::vector<double> theta = init_params(task);
  for (std::size_t r = 0; r < out.trace.aggregations; ++r) {
    TrainingConfig tc = pc.training;
    tc.seed = derive_seed(pc.seed, {0x747261696eULL, 1, r});
    theta = task.train(theta, 0, tc);
  }
  ASSERT_EQ(theta.size(), out.params.size());
  for (std::size_t k = 0; k < theta.size(); ++k) EXPECT_NEAR(theta[k], out.params[k], 1e-9);
  const auto st = measure_staleness(out.trace);
  EXPECT_EQ(st.tau_max, 0);
}

TEST(Engine, RejectedNodeKeepsZeroGamma) {
  const auto task = small_task(3);
  auto pc = protocol(Method::SSAFL, 3, 60.0);
  pc.clients[0].eps = 1e-9;
  pc.clients[1].eps = 1e9;
  pc.clients[2].eps = 1e-9;
  const auto out = simulate(task, init_params(task), pc);
  EXPECT_EQ(out.trace.gamma[1], 0u);
  EXPECT_GT(out.trace.rounds[1], 1u);
  EXPECT_GT(out.trace.gamma[0], 0u);
  bool saw_reject = false;
  for (const auto& e : out.trace.events)
    if (e.node == 2 && e.kind == EventKind::TrainDone) {
      EXPECT_FALSE(e.accepted);
      saw_reject = true;
    }
  EXPECT_TRUE(saw_reject);
  check_trace_invariants(out.trace);
}

TEST(Engine, RejectedUpdatesAccumulateAgainstSameBase) {
  const auto task = small_task(1);
  auto pc = protocol(Method::SSAFL, 1, 0.0);
  pc.training.eta = 0.002;
  pc.clients[0].eps = 0.05;
  pc.stop.t_max = 3;
  const auto out = simulate(task, init_params(task), pc);
  std::vector<double> norms;
  for (const auto& e : out.trace.events) {
    if (e.kind == EventKind::TrainDone) {
      norms.push_back(e.delta_norm);
      if (e.accepted) break;
      EXPECT_EQ(e.tau, 0);
    }
  }
  ASSERT_GE(norms.size(), 2u);
  for (std::size_t i = 1; i < norms.size(); ++i) EXPECT_GT(norms[i], norms[i - 1]);
}

TEST(Engine, Deterministic) {
  const auto task = small_task(4);
  for (Method m : kAllMethods) {
    auto pc = protocol(m, 4);
    for (auto& c : pc.clients) c.eps = is_ssafl(m) ? 0.05 : 0.0;
    const auto a = simulate(task, init_params(task), pc);
    const auto b = simulate(task, init_params(task), pc);
    EXPECT_EQ(a.trace.events, b.trace.events);
    EXPECT_EQ(a.params, b.params);
    EXPECT_EQ(a.trace.gamma, b.trace.gamma);
  }
}

TEST(Engine, FedAsyncSingleClientEqualsSemiAsyncQuorumOne) {
  const auto task = small_task(1);
  auto fa = protocol(Method::FedAsyn, 1);
  fa.baselines.fedasync_alpha = 1.0;
  auto sa = protocol(Method::SemiAsyn, 1);
  sa.baselines.semiasync_k = 1;
  const auto a = simulate(task, init_params(task), fa);
  const auto b = simulate(task, init_params(task), sa);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.trace.loss_history.size(), b.trace.loss_history.size());
  for (std::size_t i = 0; i < a.trace.loss_history.size(); ++i)
    EXPECT_EQ(a.trace.loss_history[i], b.trace.loss_history[i]);
}

TEST(Engine, SemiAsyncFullQuorumMatchesFedAvgBarriers) {
  const auto task = small_task(5);
  auto fa = protocol(Method::FedAvg, 5);
  fa.latency.jitter_pct = 0.0;
  auto sa = protocol(Method::SemiAsyn, 5);
  sa.latency.jitter_pct = 0.0;
  sa.baselines.semiasync_k = 5;
  const auto a = simulate(task, init_params(task), fa);
  const auto b = simulate(task, init_params(task), sa);
  auto agg_times = [](const EventTrace& t) {
    std::vector<double> ts;
    for (const auto& e : t.events)
      if (e.kind == EventKind::Aggregate) ts.push_back(e.time);
    return ts;
  };
  EXPECT_EQ(agg_times(a.trace), agg_times(b.trace));
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(measure_staleness(a.trace).tau_max, 0);
}

TEST(Engine, FedAvgGammaEqualAtEverySyncPoint) {
  const auto task = small_task(6);
  const auto out = simulate(task, init_params(task), protocol(Method::FedAvg, 6, 120.0));
  std::vector<std::uint64_t> gamma(6, 0);
  for (const auto& e : out.trace.events) {
    if (e.kind == EventKind::Upload && e.accepted) ++gamma[e.node - 1];
    if (e.kind == EventKind::Aggregate) {
      for (auto g : gamma) EXPECT_EQ(g, gamma[0]);
    }
  }
  for (auto g : out.trace.gamma) EXPECT_EQ(g, out.trace.gamma[0]);
  EXPECT_EQ(measure_staleness(out.trace).tau_max, 0);
}

TEST(Engine, OnlyUploaderReceivesNewModel) {
  const auto task = small_task(3);
  const auto out = simulate(task, init_params(task), protocol(Method::FedAsyn, 3));
  // A client's base version only changes after its own upload is applied, so
  // between two of its own rounds the staleness it reports grows with every
  // aggregation of the others.
  std::map<int, std::int64_t> applied_version;
  std::int64_t version = 0;
  std::int64_t max_tau = 0;
  for (const auto& e : out.trace.events) {
    if (e.kind == EventKind::Aggregate) ++version;
    if (e.kind == EventKind::Apply) applied_version[e.node] = version + 1;
    if (e.kind == EventKind::TrainDone) {
      EXPECT_EQ(e.tau, version - applied_version[e.node]);
      max_tau = std::max(max_tau, e.tau);
    }
  }
  EXPECT_GT(max_tau, 0);
}

TEST(Engine, StalenessRecomputedFromIndices) {
  const auto task = small_task(3);
  const auto out = simulate(task, init_params(task), protocol(Method::FedAsyn, 3));
  std::map<int, std::int64_t> base;
  std::int64_t version = 0;
  for (const auto& e : out.trace.events) {
    if (e.kind == EventKind::Apply) {
      EXPECT_EQ(e.tau, version - base[e.node]);
      base[e.node] = version + 1;
    }
    if (e.kind == EventKind::Aggregate) ++version;
  }
  const auto st = measure_staleness(out.trace);
  EXPECT_GT(st.tau_max, 0);
  std::uint64_t applied = 0;
  for (const auto& [tau, n] : st.histogram) applied += n;
  EXPECT_EQ(applied, out.trace.total_uploads());
}

TEST(Engine, MicroBatchWindows) {
  const auto task = small_task(4);
  auto pc = protocol(Method::SSAFL, 4, 80.0);
  pc.aggregation = {0.2, 3, 1.5};
  for (std::size_t i = 0; i < 4; ++i) {
    pc.clients[i].eps = 1e-9;
    pc.clients[i].similarity = 0.25 * static_cast<double>(i + 1);
  }
  const auto out = simulate(task, init_params(task), pc);
  ASSERT_FALSE(out.trace.windows.empty());
  bool partial = false, full = false;
  for (const auto& w : out.trace.windows) {
    ASSERT_LE(w.nodes.size(), 3u);
    partial = partial || w.nodes.size() < 3;
    full = full || w.nodes.size() == 3;
    double s = 0.0, floored_total = 0.0;
    for (double x : w.normalized) floored_total += std::max(0.2, x);
    for (std::size_t j = 0; j < w.weights.size(); ++j) {
      s += w.weights[j];
      EXPECT_NEAR(w.weights[j], std::max(0.2, w.normalized[j]) / floored_total, 1e-15);
      const double sim = pc.clients[static_cast<std::size_t>(w.nodes[j] - 1)].similarity;
      EXPECT_NEAR(w.pre_weights[j], sim * l2_norm(w.deltas[j]), 1e-12);
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  EXPECT_TRUE(partial);
  EXPECT_TRUE(full);
  EXPECT_GE(estimate_trigger_bias(out.trace), 0.0);
  check_trace_invariants(out.trace);
}

TEST(Engine, NoAdaptiveUsesUniformPreWeights) {
  const auto task = small_task(4);
  auto pc = protocol(Method::SSAFLNoAdaptive, 4, 60.0);
  pc.aggregation = {0.1, 2, 3.0};
  const auto out = simulate(task, init_params(task), pc);
  for (const auto& w : out.trace.windows)
    for (double p : w.pre_weights) EXPECT_EQ(p, 1.0);
}

TEST(Engine, StallGuardEndsRunWithoutHorizon) {
  const auto task = small_task(2);
  auto pc = protocol(Method::SSAFL, 2, 0.0);
  for (auto& c : pc.clients) c.eps = 1e9;
  const auto out = simulate(task, init_params(task), pc);
  EXPECT_EQ(out.trace.aggregations, 0u);
  EXPECT_EQ(out.trace.total_uploads(), 0u);
  EXPECT_EQ(out.metrics.size(), 1u);
}

TEST(Engine, RejectsBadPlans) {
  const auto task = small_task(2);
  auto pc = protocol(Method::SSAFL, 2);
  pc.clients[1].task_index = 7;
  EXPECT_THROW(simulate(task, init_params(task), pc), BadSpec);
  pc = protocol(Method::SSAFL, 2);
  pc.aggregation = {0.6, 2, 1.0};
  EXPECT_THROW(simulate(task, init_params(task), pc), InfeasibleFloor);
  pc.clients.clear();
  EXPECT_THROW(simulate(task, init_params(task), pc), EmptySelection);
}

TEST(Runs, TraceInvariantsForEveryMethod) {
  const auto cfg = small_sim();
  for (std::uint64_t seed : {1, 2}) {
    const Scenario sc = make_scenario(cfg, seed);
    for (Method m : kAllMethods) {
      const RunResult r = run_method(m, sc, cfg);
      check_trace_invariants(r.trace);
      EXPECT_EQ(r.metrics.size(), r.trace.aggregations + 1);
      EXPECT_EQ(r.trace.loss_history.size(), r.trace.aggregations);
      if (!is_ssafl(m)) {
        EXPECT_EQ(r.selected.size(), sc.population.size());
      }
    }
  }
}

TEST(Runs, SsaflUsesOnlySelectedNodes) {
  const auto cfg = small_sim();
  const Scenario sc = make_scenario(cfg, 3);
  const RunResult r = run_method(Method::SSAFL, sc, cfg);
  std::set<int> chosen;
  for (const auto& s : r.selected) chosen.insert(s.node_id);
  for (const auto& e : r.trace.events)
    if (e.node > 0) {
      EXPECT_TRUE(chosen.count(e.node)) << e.node;
    }
  for (const auto& s : r.selected) {
    if (!r.fallback_used) {
      EXPECT_GE(s.suitability, cfg.selection.tau_s);
    }
    for (const auto& e : r.trace.events)
      if (e.node == s.node_id && e.kind == EventKind::TrainDone) {
        EXPECT_DOUBLE_EQ(e.eps, upload_threshold(cfg.upload, s.similarity));
      }
  }
}

TEST(Runs, FallbackWhenNobodyQualifies) {
  auto cfg = small_sim();
  cfg.selection.tau_s = 1.0;
  const Scenario sc = make_scenario(cfg, 1);
  bool fallback = false;
  const auto sel = ssafl_selection(sc, cfg, &fallback);
  EXPECT_TRUE(fallback);
  EXPECT_EQ(sel.size(), cfg.fallback_top_k);
  auto all = score_nodes(sc.strategy, sc.population, cfg.selection, cfg.sim_weights);
  std::sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.suitability > b.suitability; });
  for (const auto& s : sel) EXPECT_GE(s.suitability, all[cfg.fallback_top_k - 1].suitability);
  cfg.fallback_top_k = 0;
  EXPECT_THROW(ssafl_selection(sc, cfg), EmptySelection);
}

TEST(Runs, FastClientsUploadMoreUnderAsync) {
  auto cfg = small_sim();
  const Scenario sc = make_scenario(cfg, 4);
  for (Method m : {Method::FedAsyn, Method::SemiAsyn}) {
    const RunResult r = run_method(m, sc, cfg);
    double fast = 0, slow = 0;
    for (const auto& p : sc.population) {
      if (p.latency_class == LatencyClass::Fast) fast += r.trace.gamma[p.node_id - 1];
      if (p.latency_class == LatencyClass::Slow) slow += r.trace.gamma[p.node_id - 1];
    }
    EXPECT_GT(fast, slow) << to_string(m);
  }
}
