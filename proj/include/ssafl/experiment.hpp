#pragma once

// Experiment driver: runs (method, seed) grids, writes trace / metrics /
// summary artifacts, and aggregates summaries into comparison tables.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "ssafl/config.hpp"
#include "ssafl/diagnostics.hpp"
#include "ssafl/format.hpp"
#include "ssafl/sim.hpp"

namespace ssafl {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRuntime = 3;

/// JSON-lines, one event per line.
inline void write_trace_jsonl(std::ostream& out, const EventTrace& trace) {
  for (const auto& e : trace.events) {
    nlohmann::ordered_json j = {{"event_id", e.event_id},
                                {"time", e.time},
                                {"node", e.node},
                                {"kind", std::string(to_string(e.kind))},
                                {"delta_norm", e.delta_norm},
                                {"eps", e.eps},
                                {"tau", e.tau},
                                {"accepted", e.accepted}};
    out << j.dump() << '\n';
  }
}

inline std::vector<TraceEvent> read_trace_jsonl(std::istream& in) {
  std::vector<TraceEvent> events;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    TraceEvent e;
    e.event_id = j.at("event_id").get<std::uint64_t>();
    e.time = j.at("time").get<double>();
    e.node = j.at("node").get<int>();
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "train_done")
      e.kind = EventKind::TrainDone;
    else if (kind == "upload")
      e.kind = EventKind::Upload;
    else if (kind == "apply")
      e.kind = EventKind::Apply;
    else if (kind == "aggregate")
      e.kind = EventKind::Aggregate;
    else
      throw BadSpec("unknown trace event kind '" + kind + "'");
    e.delta_norm = j.at("delta_norm").get<double>();
    e.eps = j.at("eps").get<double>();
    e.tau = j.at("tau").get<std::int64_t>();
    e.accepted = j.at("accepted").get<bool>();
    events.push_back(e);
  }
  return events;
}

inline void write_metrics_csv(std::ostream& out, Method method, const std::vector<MetricsRow>& rows) {
  out << "event_id,sim_time,method,mae,rmse,r2,global_loss\n";
  for (const auto& r : rows)
    out << r.event_id << ',' << format_number(r.sim_time) << ',' << to_string(method) << ','
        << format_number(r.metrics.mae) << ',' << format_number(r.metrics.rmse) << ',' << format_number(r.metrics.r2)
        << ',' << format_number(r.global_loss) << '\n';
}

inline nlohmann::ordered_json summary_json(const RunResult& r) {
  const Metrics& last = r.metrics.back().metrics;
  nlohmann::ordered_json j;
  j["method"] = std::string(to_string(r.method));
  j["seed"] = r.seed;
  j["final_mae"] = last.mae;
  j["final_rmse"] = last.rmse;
  j["final_r2"] = last.r2;
  j["total_uploads"] = r.trace.total_uploads();
  j["per_node_gamma"] = r.trace.gamma;
  j["tau_max"] = measure_staleness(r.trace).tau_max;
  if (r.trace.windows.empty())
    j["zeta_hat"] = nullptr;
  else
    j["zeta_hat"] = estimate_trigger_bias(r.trace);
  j["wall_events"] = r.wall_events;
  j["aggregations"] = r.trace.aggregations;
  j["final_sim_time"] = r.trace.last_aggregation_time;
  std::vector<int> nodes;
  for (const auto& s : r.selected) nodes.push_back(s.node_id);
  j["participants"] = nodes;
  j["selection_fallback"] = r.fallback_used;
  return j;
}

inline std::string run_stem(Method m, std::uint64_t seed) { return std::string(to_string(m)) + "_" + std::to_string(seed); }

namespace detail {

/// Writes `content` to `path` through a temporary file and a rename.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out << content;
    if (!out) throw Error("short write to '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::size_t worker_count(std::size_t jobs) {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("SSAFL_SIM_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) n = std::min(n, static_cast<std::size_t>(cap));
  }
  return std::max<std::size_t>(1, std::min(n, jobs));
}

}  // namespace detail

/// Files written for one run.
inline std::vector<std::filesystem::path> write_run_outputs(const std::filesystem::path& dir, const RunResult& r) {
  const std::string stem = run_stem(r.method, r.seed);
  std::ostringstream trace, metrics;
  write_trace_jsonl(trace, r.trace);
  write_metrics_csv(metrics, r.method, r.metrics);
  std::vector<std::filesystem::path> files = {dir / (stem + ".trace.jsonl"), dir / (stem + ".metrics.csv"),
                                              dir / (stem + ".summary.json")};
  detail::write_atomic(files[0], trace.str());
  detail::write_atomic(files[1], metrics.str());
  detail::write_atomic(files[2], summary_json(r).dump(2) + "\n");
  return files;
}

/// Runs every (method, seed) pair; returns an exit status (0 ok, 3 runtime
/// failure). On failure every file written by this call is removed.
inline int run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  namespace fs = std::filesystem;
  const fs::path dir(cfg.output_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    log << "error: cannot create output directory '" << cfg.output_dir << "': " << ec.message() << '\n';
    return kExitRuntime;
  }
  struct Job {
    Method method;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::uint64_t seed : cfg.seeds)
    for (Method m : cfg.methods) jobs.push_back({m, seed});

  std::mutex mu;
  std::vector<fs::path> written;
  std::vector<std::string> lines(jobs.size());
  std::optional<std::string> failure;
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};

  auto worker = [&] {
    while (!failed) {
      const std::size_t i = next++;
      if (i >= jobs.size()) return;
      const Job& job = jobs[i];
      try {
        const RunResult r = run_method(job.method, cfg.sim, job.seed);
        auto files = write_run_outputs(dir, r);
        std::ostringstream line;
        const auto& m = r.metrics.back().metrics;
        line << run_stem(job.method, job.seed) << ": r2=" << format_number(m.r2)
             << " uploads=" << r.trace.total_uploads() << " aggregations=" << r.trace.aggregations;
        std::lock_guard lock(mu);
        written.insert(written.end(), files.begin(), files.end());
        lines[i] = line.str();
      } catch (const std::exception& e) {
        std::lock_guard lock(mu);
        if (!failure) failure = run_stem(job.method, job.seed) + ": " + e.what();
        failed = true;
        const std::string stem = run_stem(job.method, job.seed);
        for (const char* ext : {".trace.jsonl", ".metrics.csv", ".summary.json"}) {
          fs::remove(dir / (stem + ext), ec);
          fs::remove(dir / (stem + ext + ".tmp"), ec);
        }
      }
    }
  };
  const std::size_t n = detail::worker_count(jobs.size());
  if (n == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (failure) {
    for (const auto& f : written) fs::remove(f, ec);
    log << "error: " << *failure << '\n';
    return kExitRuntime;
  }
  for (const auto& l : lines) log << l << '\n';
  return kExitOk;
}

inline int run_experiment(const std::string& config_path, std::ostream& log) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path);
  } catch (const ConfigError& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const Error& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return run_experiment(cfg, log);
}

// Comparison tables -------------------------------------------------------------

struct MeanSd {
  double mean = 0.0;
  double sd = 0.0;  // population standard deviation
};

inline MeanSd mean_sd(const std::vector<double>& xs) {
  MeanSd r;
  if (xs.empty()) return r;
  for (double x : xs) r.mean += x;
  r.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - r.mean) * (x - r.mean);
  r.sd = std::sqrt(ss / static_cast<double>(xs.size()));
  return r;
}

struct ComparisonRow {
  std::string method;
  std::size_t runs = 0;
  MeanSd mae, rmse, r2, uploads;
  std::optional<double> upload_reduction_pct;  // vs the reference method
};

/// Per-method aggregates across seeds, rows in canonical method order (unknown
/// methods after, alphabetically).
inline std::vector<ComparisonRow> compare_summaries(const std::vector<nlohmann::json>& summaries,
                                                    const std::string& reference) {
  std::map<std::string, std::vector<const nlohmann::json*>> by_method;
  for (const auto& s : summaries) by_method[s.at("method").get<std::string>()].push_back(&s);
  std::vector<std::string> order;
  for (Method m : kAllMethods)
    if (by_method.count(std::string(to_string(m)))) order.emplace_back(to_string(m));
  for (const auto& [name, v] : by_method)
    if (!parse_method(name)) order.push_back(name);

  std::vector<ComparisonRow> rows;
  for (const auto& name : order) {
    ComparisonRow row;
    row.method = name;
    std::vector<double> mae, rmse, r2, up;
    for (const auto* s : by_method[name]) {
      mae.push_back(s->at("final_mae").get<double>());
      rmse.push_back(s->at("final_rmse").get<double>());
      r2.push_back(s->at("final_r2").get<double>());
      up.push_back(s->at("total_uploads").get<double>());
    }
    row.runs = mae.size();
    row.mae = mean_sd(mae);
    row.rmse = mean_sd(rmse);
    row.r2 = mean_sd(r2);
    row.uploads = mean_sd(up);
    rows.push_back(row);
  }
  const ComparisonRow* ref = nullptr;
  for (const auto& r : rows)
    if (r.method == reference) ref = &r;
  if (ref && ref->uploads.mean > 0.0) {
    const double base = ref->uploads.mean;
    for (auto& r : rows) r.upload_reduction_pct = 100.0 * (1.0 - r.uploads.mean / base);
  }
  return rows;
}

inline void write_comparison_csv(std::ostream& out, const std::vector<ComparisonRow>& rows, const std::string& reference) {
  out << "# sd columns are population standard deviations (divide by n)\n";
  out << "method,runs,mae_mean,mae_sd,rmse_mean,rmse_sd,r2_mean,r2_sd,uploads_mean,uploads_sd,upload_reduction_vs_"
      << reference << "\n";
  for (const auto& r : rows) {
    out << r.method << ',' << r.runs << ',' << format_number(r.mae.mean) << ',' << format_number(r.mae.sd) << ','
        << format_number(r.rmse.mean) << ',' << format_number(r.rmse.sd) << ',' << format_number(r.r2.mean) << ','
        << format_number(r.r2.sd) << ',' << format_number(r.uploads.mean) << ',' << format_number(r.uploads.sd) << ',';
    if (r.upload_reduction_pct) out << format_number(*r.upload_reduction_pct);
    out << '\n';
  }
}

inline void print_comparison(std::ostream& out, const std::vector<ComparisonRow>& rows, const std::string& reference) {
  char buf[256];
  out << "mean +/- population sd across seeds\n";
  std::snprintf(buf, sizeof buf, "%-16s %4s %-18s %-18s %-18s %-16s %s\n", "method", "runs", "MAE", "RMSE", "R2",
                "uploads", ("reduction_vs_" + reference).c_str());
  out << buf;
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%-16s %4zu %.4f+/-%.4f    %.4f+/-%.4f    %.4f+/-%.4f    %7.1f+/-%-6.1f ",
                  r.method.c_str(), r.runs, r.mae.mean, r.mae.sd, r.rmse.mean, r.rmse.sd, r.r2.mean, r.r2.sd,
                  r.uploads.mean, r.uploads.sd);
    out << buf;
    if (r.upload_reduction_pct) {
      std::snprintf(buf, sizeof buf, "%.1f%%", *r.upload_reduction_pct);
      out << buf;
    } else {
      out << "-";
    }
    out << '\n';
  }
}

inline std::vector<nlohmann::json> load_summaries(const std::vector<std::string>& paths) {
  std::vector<nlohmann::json> out;
  for (const auto& p : paths) {
    std::ifstream in(p);
    if (!in) throw Error("cannot read summary '" + p + "'");
    out.push_back(nlohmann::json::parse(in));
  }
  return out;
}

/// Expands a glob with `*` / `?` in the final path component, sorted.
inline std::vector<std::string> expand_glob(const std::string& pattern) {
  namespace fs = std::filesystem;
  const fs::path p(pattern);
  fs::path dir = p.parent_path();
  if (dir.empty()) dir = ".";
  const std::string pat = p.filename().string();
  auto match = [](const std::string& s, const std::string& g) {
    std::size_t si = 0, gi = 0, star = std::string::npos, mark = 0;
    while (si < s.size()) {
      if (gi < g.size() && (g[gi] == '?' || g[gi] == s[si])) {
        ++si;
        ++gi;
      } else if (gi < g.size() && g[gi] == '*') {
        star = gi++;
        mark = si;
      } else if (star != std::string::npos) {
        gi = star + 1;
        si = ++mark;
      } else {
        return false;
      }
    }
    while (gi < g.size() && g[gi] == '*') ++gi;
    return gi == g.size();
  };
  std::vector<std::string> out;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  for (const auto& entry : fs::directory_iterator(dir, ec))
    if (entry.is_regular_file() && match(entry.path().filename().string(), pat)) out.push_back(entry.path().string());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace ssafl
