#include <gtest/gtest.h>

#include <sstream>

#include "ssafl/intent.hpp"
#include "ssafl/rng.hpp"

using namespace ssafl;

namespace {

StrategyTuple random_strategy(Rng& rng) {
  static const char* metrics[] = {"latency", "throughput", "packet_loss", "jitter", "energy", "m2"};
  static const char* kinds[] = {"qos_adjustment", "rate_limit", "reroute", "scale_out"};
  StrategyTuple s;
  s.user = "user_" + std::to_string(rng.below(100));
  const std::size_t ng = 1 + rng.below(4);
  std::vector<std::string> pool(std::begin(metrics), std::end(metrics));
  rng.shuffle(pool);
  for (std::size_t i = 0; i < ng; ++i) {
    Goal g;
    g.metric = pool[i];
    g.op = static_cast<RelationalOp>(rng.below(4));
    g.threshold = std::round(rng.uniform(-500.0, 500.0) * 1000.0) / 1000.0;
    if (rng.below(4) == 0) g.threshold = rng.normal() * 1e-7;
    s.goals.push_back(g);
  }
  for (std::size_t i = 0, n = 1 + rng.below(3); i < n; ++i) s.entities.push_back("dev-" + std::to_string(i) + ".a");
  for (std::size_t i = 0, n = 1 + rng.below(3); i < n; ++i) {
    ActionItem a;
    a.kind = kinds[rng.below(4)];
    for (std::size_t p = 0, np = rng.below(3); p < np; ++p) {
      const std::string key = "k" + std::to_string(p);
      if (rng.below(2))
        a.params.emplace_back(key, rng.uniform(-10.0, 10.0));
      else
        a.params.emplace_back(key, std::string("mode_") + std::to_string(rng.below(5)));
    }
    s.actions.push_back(a);
  }
  s.window.start = rng.uniform(0.0, 100.0);
  s.window.end = s.window.start + 0.5 + rng.uniform(0.0, 1000.0);
  return s;
}

TelemetrySample sample(double t, std::vector<std::pair<std::string, double>> r) { return {t, std::move(r)}; }

}  // namespace

TEST(Parse, OperatorWorkedExample) {
  const auto s = parse_strategy(
      "user=operator_02; goal latency < 15; entity ultrasonic_module; action qos_adjustment(priority=5); window 0 600");
  EXPECT_EQ(s.user, "operator_02");
  ASSERT_EQ(s.goals.size(), 1u);
  EXPECT_EQ(s.goals[0], (Goal{"latency", RelationalOp::LT, 15.0}));
  EXPECT_EQ(s.entities, std::vector<std::string>{"ultrasonic_module"});
  ASSERT_EQ(s.actions.size(), 1u);
  EXPECT_EQ(s.actions[0].kind, "qos_adjustment");
  ASSERT_EQ(s.actions[0].params.size(), 1u);
  EXPECT_EQ(s.actions[0].params[0].first, "priority");
  EXPECT_EQ(std::get<double>(s.actions[0].params[0].second), 5.0);
  EXPECT_EQ(s.window, (TimeWindow{0.0, 600.0}));
}

TEST(Parse, EmptyWindowIsSemanticError) {
  EXPECT_THROW(parse_strategy("user=u; goal x < 1; entity e; action a(); window 5 5"), SemanticError);
}

TEST(Parse, DuplicateMetricIsSemanticError) {
  EXPECT_THROW(parse_strategy("user=u; goal x < 1; goal x > 0; entity e; action a(); window 0 1"), SemanticError);
}

TEST(Parse, NewlinesSeparateClauses) {
  const auto a = parse_strategy("user=u\ngoal jitter >= 2.5\nentity e\naction reroute(path=b, w=-1)\nwindow 1 2\n");
  const auto b = parse_strategy("user=u; goal jitter >= 2.5; entity e; action reroute(path=b,w=-1); window 1 2");
  EXPECT_EQ(a, b);
  EXPECT_EQ(std::get<std::string>(a.actions[0].params[0].second), "b");
  EXPECT_EQ(std::get<double>(a.actions[0].params[1].second), -1.0);
}

TEST(Parse, SyntaxErrorsCarryPosition) {
  try {
    parse_strategy("user=u; goal latency ~ 3; entity e; action a(); window 0 1");
    FAIL();
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.position(), 21u);
  }
  EXPECT_THROW(parse_strategy("user=u; goal latency < abc; entity e; action a(); window 0 1"), SyntaxError);
  EXPECT_THROW(parse_strategy("user=u; bogus 1; window 0 1"), SyntaxError);
  EXPECT_THROW(parse_strategy("user=u; goal Latency < 1; entity e; action a(); window 0 1"), SyntaxError);
  EXPECT_THROW(parse_strategy("user=u; goal latency < 1 2; entity e; action a(); window 0 1"), SyntaxError);
  EXPECT_THROW(parse_strategy("user=u; goal latency < 1; entity e; action a(k=1; window 0 1"), SyntaxError);
}

TEST(Parse, MissingClausesAreSemanticErrors) {
  EXPECT_THROW(parse_strategy("goal x < 1; entity e; action a(); window 0 1"), SemanticError);
  EXPECT_THROW(parse_strategy("user=u; entity e; action a(); window 0 1"), SemanticError);
  EXPECT_THROW(parse_strategy("user=u; goal x < 1; action a(); window 0 1"), SemanticError);
  EXPECT_THROW(parse_strategy("user=u; goal x < 1; entity e; window 0 1"), SemanticError);
  EXPECT_THROW(parse_strategy("user=u; goal x < 1; entity e; action a()"), SemanticError);
  EXPECT_THROW(parse_strategy("user=u; goal x < 1; entity e; action a(k=1,k=2); window 0 1"), SemanticError);
  EXPECT_THROW(parse_strategy("user=u; goal x < 1; entity e; action a(); window -1 1"), SemanticError);
}

TEST(Parse, RoundTripProperty) {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const StrategyTuple s = random_strategy(rng);
    const std::string text = to_dsl(s);
    const StrategyTuple back = parse_strategy(text);
    ASSERT_EQ(back, s) << text;
    ASSERT_EQ(to_dsl(back), text);
  }
}

TEST(Parse, Deterministic) {
  const std::string t = "user=u; goal a < 1; goal b > 2; entity e; action z(k=v); window 0 9";
  EXPECT_EQ(parse_strategy(t), parse_strategy(t));
}

TEST(Json, StrategyRoundTrip) {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    StrategyTuple s = random_strategy(rng);
    for (auto& a : s.actions)
      std::sort(a.params.begin(), a.params.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    const nlohmann::json j = s;
    EXPECT_EQ(j.get<StrategyTuple>(), s);
  }
}

TEST(Json, InvalidStrategyRejected) {
  nlohmann::json j = parse_strategy("user=u; goal x < 1; entity e; action a(); window 0 1");
  j["window"]["end"] = 0.0;
  EXPECT_THROW(j.get<StrategyTuple>(), SemanticError);
  j = parse_strategy("user=u; goal x < 1; entity e; action a(); window 0 1");
  j["goals"][0]["op"] = "!=";
  EXPECT_THROW(j.get<StrategyTuple>(), SemanticError);
}

TEST(Goal, Satisfaction) {
  EXPECT_TRUE(goal_satisfied({"latency", RelationalOp::LT, 15}, 12));
  EXPECT_FALSE(goal_satisfied({"latency", RelationalOp::LT, 15}, 15));
  EXPECT_TRUE(goal_satisfied({"throughput", RelationalOp::GEQ, 100}, 100));
  EXPECT_TRUE(goal_satisfied({"x", RelationalOp::LEQ, 1}, 1));
  EXPECT_FALSE(goal_satisfied({"x", RelationalOp::GT, 1}, 1));
}

TEST(Goal, MonotoneInMeasurement) {
  Rng rng(3);
  for (int i = 0; i < 2000; ++i) {
    const Goal g{"m", static_cast<RelationalOp>(rng.below(4)), rng.uniform(-5.0, 5.0)};
    double m = rng.uniform(-10.0, 10.0);
    if (rng.below(4) == 0) m = g.threshold;
    const double other = rng.uniform(-10.0, 10.0);
    if (!goal_satisfied(g, m)) continue;
    const bool lower = g.op == RelationalOp::LT || g.op == RelationalOp::LEQ;
    if (lower && other < m) {
      EXPECT_TRUE(goal_satisfied(g, other));
    }
    if (!lower && other > m) {
      EXPECT_TRUE(goal_satisfied(g, other));
    }
  }
}

TEST(Strategy, SatisfiedIsConjunction) {
  const auto s = parse_strategy("user=u; goal latency < 15; goal throughput > 100; entity e; action a(); window 0 1");
  EXPECT_TRUE(strategy_satisfied(s, sample(0, {{"latency", 10}, {"throughput", 120}})));
  EXPECT_FALSE(strategy_satisfied(s, sample(0, {{"latency", 10}, {"throughput", 90}})));
  EXPECT_THROW(strategy_satisfied(s, sample(0, {{"latency", 10}})), MissingMetric);
}

TEST(Strategy, ConjunctionExhaustive) {
  for (std::size_t n = 1; n <= 4; ++n) {
    StrategyTuple s;
    s.user = "u";
    s.entities = {"e"};
    s.actions = {{"a", {}}};
    s.window = {0, 1};
    for (std::size_t k = 0; k < n; ++k) s.goals.push_back({"g" + std::to_string(k), RelationalOp::LT, 0.0});
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      TelemetrySample x;
      bool all = true;
      for (std::size_t k = 0; k < n; ++k) {
        const bool ok = (mask >> k) & 1u;
        all = all && ok;
        x.readings.emplace_back("g" + std::to_string(k), ok ? -1.0 : 1.0);
      }
      EXPECT_EQ(strategy_satisfied(s, x), all);
    }
  }
}

TEST(Strategy, EmpiricalSatisfaction) {
  const auto s = parse_strategy("user=u; goal latency < 15; entity e; action a(); window 0 100");
  std::vector<TelemetrySample> xs;
  for (int i = 0; i < 10; ++i) xs.push_back(sample(i, {{"latency", i < 7 ? 10.0 : 20.0}}));
  EXPECT_DOUBLE_EQ(empirical_satisfaction(s, xs), 0.7);
  std::vector<TelemetrySample> good(5, sample(0, {{"latency", 1}}));
  std::vector<TelemetrySample> bad(5, sample(0, {{"latency", 99}}));
  EXPECT_EQ(empirical_satisfaction(s, good), 1.0);
  EXPECT_EQ(empirical_satisfaction(s, bad), 0.0);
  EXPECT_THROW(empirical_satisfaction(s, {}), EmptyWindow);
}

TEST(Strategy, EmpiricalEqualsMeanOfIndicator) {
  Rng rng(9);
  const auto s = parse_strategy("user=u; goal a < 0; goal b >= 0.5; entity e; action x(); window 0 1");
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TelemetrySample> xs;
    for (std::size_t i = 0, n = 1 + rng.below(20); i < n; ++i)
      xs.push_back(sample(0, {{"a", rng.uniform(-1.0, 1.0)}, {"b", rng.uniform()}}));
    double hits = 0;
    for (const auto& x : xs) hits += strategy_satisfied(s, x) ? 1.0 : 0.0;
    EXPECT_DOUBLE_EQ(empirical_satisfaction(s, xs), hits / static_cast<double>(xs.size()));
  }
}

TEST(Strategy, ReliabilityVerdict) {
  EXPECT_EQ(reliability_verdict(0.95, 0.9), Verdict::Stable);
  EXPECT_EQ(reliability_verdict(0.5, 0.9), Verdict::ReVerify);
  EXPECT_EQ(reliability_verdict(0.9, 0.9), Verdict::Stable);
  EXPECT_EQ(reliability_verdict(0.89), Verdict::ReVerify);
}

TEST(Strategy, WindowAndConfigurationStates) {
  const auto s = parse_strategy("user=u; goal a < 1; entity e1; entity e2; action x(k=1); window 10 20");
  std::vector<TelemetrySample> xs = {sample(5, {{"a", 0}}), sample(10, {{"a", 0}}), sample(20, {{"a", 0}}),
                                     sample(21, {{"a", 0}})};
  const auto in = samples_in_window(s, xs);
  ASSERT_EQ(in.size(), 2u);
  EXPECT_EQ(in[0].time, 10);
  EXPECT_EQ(in[1].time, 20);
  const auto states = configuration_states(s);
  ASSERT_EQ(states.size(), 2u);
  EXPECT_EQ(states[1].entity, "e2");
  EXPECT_EQ(states[1].actions, s.actions);
}

TEST(Telemetry, ReadsCsv) {
  std::istringstream in("time,latency,throughput\n0,12,110\n\n1.5, 16 ,90\n");
  const auto xs = read_telemetry_csv(in);
  ASSERT_EQ(xs.size(), 2u);
  EXPECT_EQ(xs[1].time, 1.5);
  EXPECT_EQ(xs[1].reading("latency"), 16.0);
  EXPECT_FALSE(xs[1].reading("jitter").has_value());

  std::istringstream bad_header("t,latency\n0,1\n");
  EXPECT_THROW(read_telemetry_csv(bad_header), BadSpec);
  std::istringstream short_row("time,latency\n0\n");
  EXPECT_THROW(read_telemetry_csv(short_row), BadSpec);
  std::istringstream bad_value("time,latency\n0,fast\n");
  EXPECT_THROW(read_telemetry_csv(bad_value), BadSpec);
}
