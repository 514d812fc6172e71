// Command-line front end: data and population generation, experiment runs,
// comparison tables and convergence diagnostics.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ssafl/ssafl.hpp"

namespace fs = std::filesystem;
using namespace ssafl;

namespace {

struct CommonOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string method;
};

/// Loads the config (or defaults) and applies command-line overrides.
ExperimentConfig resolve(const CommonOptions& o) {
  ExperimentConfig cfg = o.config.empty() ? ExperimentConfig{} : load_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (o.seed) cfg.seeds = {*o.seed};
  if (!o.method.empty()) {
    auto m = parse_method(o.method);
    if (!m) throw ConfigError("run.methods", "unknown method '" + o.method + "'");
    cfg.methods = {*m};
  }
  validate(cfg);
  return cfg;
}

void write_dataset_csv(const fs::path& path, const LocalDataset& d) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  for (std::size_t k = 0; k < d.dim(); ++k) out << 'x' << k + 1 << ',';
  out << "y\n";
  for (std::size_t i = 0; i < d.size(); ++i) {
    for (double x : d.row(i)) out << format_number(x) << ',';
    out << format_number(d.target(i)) << '\n';
  }
}

int gen_data(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve(o);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  for (std::uint64_t seed : cfg.seeds) {
    const Scenario sc = make_scenario(cfg.sim, seed);
    const fs::path sub = dir / ("data_" + std::to_string(seed));
    fs::create_directories(sub);
    for (std::size_t i = 0; i < sc.data.partitions.size(); ++i)
      write_dataset_csv(sub / ("node_" + std::to_string(i + 1) + ".csv"), sc.data.partitions[i]);
    write_dataset_csv(sub / "test.csv", sc.data.test);
    std::cout << sub.string() << ": " << sc.data.partitions.size() << " partitions, " << sc.data.test.size()
              << " test rows\n";
  }
  return kExitOk;
}

int gen_population(const CommonOptions& o) {
  const ExperimentConfig cfg = resolve(o);
  const fs::path dir = cfg.output_dir;
  fs::create_directories(dir);
  for (std::uint64_t seed : cfg.seeds) {
    const Scenario sc = make_scenario(cfg.sim, seed);
    const fs::path path = dir / ("population_" + std::to_string(seed) + ".json");
    std::ofstream out(path);
    if (!out) throw Error("cannot write '" + path.string() + "'");
    out << nlohmann::json(sc.population).dump(2) << '\n';
    std::cout << path.string() << ": " << sc.population.size() << " nodes\n";
  }
  return kExitOk;
}

int run(const CommonOptions& o) {
  ExperimentConfig cfg;
  try {
    cfg = resolve(o);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  return run_experiment(cfg, std::cout);
}

int compare(const std::vector<std::string>& inputs, const std::string& reference, const std::string& csv_path) {
  std::vector<std::string> paths;
  for (const auto& in : inputs) {
    if (fs::is_directory(in)) {
      auto found = expand_glob((fs::path(in) / "*.summary.json").string());
      paths.insert(paths.end(), found.begin(), found.end());
    } else if (in.find_first_of("*?") != std::string::npos) {
      auto found = expand_glob(in);
      paths.insert(paths.end(), found.begin(), found.end());
    } else {
      paths.push_back(in);
    }
  }
  if (paths.empty()) {
    std::cerr << "error: no summary files matched\n";
    return kExitConfig;
  }
  const auto rows = compare_summaries(load_summaries(paths), reference);
  print_comparison(std::cout, rows, reference);
  if (!csv_path.empty()) {
    std::ofstream out(csv_path);
    if (!out) throw Error("cannot write '" + csv_path + "'");
    write_comparison_csv(out, rows, reference);
  }
  return kExitOk;
}

void print_staleness(const StalenessReport& s) {
  std::cout << "  tau_max " << s.tau_max << "\n  tau histogram:";
  for (const auto& [tau, n] : s.histogram) std::cout << ' ' << tau << ':' << n;
  std::cout << '\n';
}

int diagnose(const CommonOptions& o, const std::string& trace_path, double mu, double L, std::size_t quad_dim,
             double noise) {
  if (!trace_path.empty()) {
    std::ifstream in(trace_path);
    if (!in) throw Error("cannot read '" + trace_path + "'");
    EventTrace trace;
    trace.events = read_trace_jsonl(in);
    std::cout << trace_path << '\n';
    print_staleness(measure_staleness(trace));
    return kExitOk;
  }
  CommonOptions oo = o;
  if (oo.method.empty()) oo.method = "SSAFL";
  const ExperimentConfig cfg = resolve(oo);
  for (std::uint64_t seed : cfg.seeds) {
    for (Method m : cfg.methods) {
      const RunResult r = run_method(m, cfg.sim, seed);
      std::cout << run_stem(m, seed) << '\n';
      print_staleness(measure_staleness(r.trace));
      if (r.trace.windows.empty())
        std::cout << "  zeta_hat n/a (no micro-batch windows)\n";
      else
        std::cout << "  zeta_hat " << format_number(estimate_trigger_bias(r.trace)) << " over "
                  << r.trace.windows.size() << " windows\n";
    }
  }
  PlConfig pc;
  pc.noise_sd = noise;
  const PlReport rep = pl_diagnostic(quad_dim, mu, L, pc);
  std::cout << "quadratic (dim " << quad_dim << ", mu " << format_number(mu) << ", L " << format_number(L)
            << ", eta " << format_number(rep.eta) << ", noise " << format_number(noise) << ")\n"
            << "  contraction " << format_number(rep.contraction) << " from " << rep.fitted_points << " points\n"
            << "  plateau " << format_number(rep.plateau) << "\n  monotone " << (rep.monotone ? "yes" : "no")
            << "\n  tau_max " << rep.tau_max << "\n  " << (rep.ok ? "linear convergence observed" : "NOT converging linearly")
            << '\n';
  return rep.ok ? kExitOk : kExitRuntime;
}

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "experiment config (TOML)");
  cmd->add_option("--out", o.out, "output directory");
  cmd->add_option("--seed", o.seed, "run only this seed");
  cmd->add_option("--method", o.method, "run only this method (SSAFL, SSAFLNoAdaptive, FedAvg, FedAsyn, SemiAsyn)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Strategy-similarity-aware asynchronous federated learning simulator"};
  app.require_subcommand(1);
  CommonOptions common;

  auto* data_cmd = app.add_subcommand("gen-data", "write the synthetic node partitions and test set as CSV");
  add_common(data_cmd, common);
  auto* pop_cmd = app.add_subcommand("gen-population", "write node profiles as JSON");
  add_common(pop_cmd, common);
  auto* run_cmd = app.add_subcommand("run", "run every (method, seed) pair and write traces, metrics and summaries");
  add_common(run_cmd, common);

  auto* cmp_cmd = app.add_subcommand("compare", "aggregate run summaries into a mean +/- sd table");
  std::vector<std::string> inputs;
  std::string reference = "SemiAsyn";
  std::string csv_path;
  cmp_cmd->add_option("inputs", inputs, "summary files, globs or run directories")->required();
  cmp_cmd->add_option("--reference", reference, "method the upload reduction is measured against");
  cmp_cmd->add_option("--csv", csv_path, "also write the table as CSV");

  auto* diag_cmd = app.add_subcommand("diagnose", "staleness, trigger bias and a PL convergence check");
  add_common(diag_cmd, common);
  std::string trace_path;
  double mu = 0.5, L = 2.0, noise = 0.0;
  std::size_t quad_dim = 8;
  diag_cmd->add_option("--trace", trace_path, "only report staleness of a saved trace");
  diag_cmd->add_option("--mu", mu, "smallest curvature of the quadratic");
  diag_cmd->add_option("--L", L, "largest curvature of the quadratic");
  diag_cmd->add_option("--dim", quad_dim, "quadratic dimension");
  diag_cmd->add_option("--noise", noise, "target noise of the quadratic");

  auto* print_cmd = app.add_subcommand("print-default-config", "print the default experiment config");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitConfig;
  }

  try {
    if (*print_cmd) {
      std::cout << to_toml(ExperimentConfig{});
      return kExitOk;
    }
    if (*data_cmd) return gen_data(common);
    if (*pop_cmd) return gen_population(common);
    if (*run_cmd) return run(common);
    if (*cmp_cmd) return compare(inputs, reference, csv_path);
    if (*diag_cmd) return diagnose(common, trace_path, mu, L, quad_dim, noise);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return kExitOk;
}
