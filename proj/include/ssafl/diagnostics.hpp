#pragma once

// Empirical checks of the convergence assumptions: bounded staleness, trigger
// bias of min-weight protection, and linear contraction on a PL quadratic.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <span>
#include <vector>

#include "ssafl/aggregation.hpp"
#include "ssafl/error.hpp"
#include "ssafl/model.hpp"
#include "ssafl/rng.hpp"
#include "ssafl/sim.hpp"

namespace ssafl {

struct StalenessReport {
  std::int64_t tau_max = 0;
  std::map<std::int64_t, std::uint64_t> histogram;  // tau -> number of applied updates
};

/// Staleness of every applied update (aggregation index minus the version the
/// client trained from).
inline StalenessReport measure_staleness(const EventTrace& trace) {
  StalenessReport r;
  for (const auto& e : trace.events) {
    if (e.kind != EventKind::Apply) continue;
    ++r.histogram[e.tau];
    r.tau_max = std::max(r.tau_max, e.tau);
  }
  return r;
}

/// Relative deviation ||sum w~ d - sum w d|| / ||sum w~ d|| of one window.
inline std::optional<double> window_trigger_bias(const WindowRecord& w) {
  if (w.deltas.empty()) return std::nullopt;
  const std::size_t n = w.deltas.front().size();
  std::vector<double> pre(n, 0.0), prot(n, 0.0);
  for (std::size_t j = 0; j < w.deltas.size(); ++j)
    for (std::size_t k = 0; k < n; ++k) {
      pre[k] += w.normalized[j] * w.deltas[j][k];
      prot[k] += w.weights[j] * w.deltas[j][k];
    }
  const double denom = l2_norm(pre);
  if (!(denom > 0.0)) return std::nullopt;
  for (std::size_t k = 0; k < n; ++k) prot[k] -= pre[k];
  return l2_norm(prot) / denom;
}

/// zeta_hat: maximum window trigger bias; windows with a zero pre-weighted
/// update are skipped.
inline double estimate_trigger_bias(std::span<const WindowRecord> windows) {
  if (windows.empty()) throw NoWindows();
  double zeta = 0.0;
  for (const auto& w : windows)
    if (auto z = window_trigger_bias(w)) zeta = std::max(zeta, *z);
  return zeta;
}

inline double estimate_trigger_bias(const EventTrace& trace) { return estimate_trigger_bias(trace.windows); }

/// Consistent least-squares problem whose pooled MSE Hessian is Q diag(lambda) Q^T
/// with lambda evenly spread over [mu, L]. Every client holds the same design
/// (random row signs, repeated), so each local objective shares the Hessian;
/// targets are x.theta_true plus Gaussian noise.
class QuadraticTask {
 public:
  QuadraticTask(std::size_t dim, double mu, double L, std::size_t clients, std::size_t repeats, double noise_sd,
                std::uint64_t seed)
      : dim_(dim) {
    if (dim < 1 || clients < 1 || repeats < 1) throw BadSpec("quadratic task needs dim, clients, repeats >= 1");
    if (!(mu > 0.0) || !(L >= mu)) throw BadSpec("quadratic spectrum needs 0 < mu <= L");
    Rng rng(seed);
    // Orthonormal basis by Gram-Schmidt on a Gaussian matrix.
    std::vector<std::vector<double>> q(dim, std::vector<double>(dim));
    for (auto& row : q)
      for (double& x : row) x = rng.normal();
    for (std::size_t i = 0; i < dim; ++i) {
      for (std::size_t j = 0; j < i; ++j) {
        double dot = 0.0;
        for (std::size_t k = 0; k < dim; ++k) dot += q[i][k] * q[j][k];
        for (std::size_t k = 0; k < dim; ++k) q[i][k] -= dot * q[j][k];
      }
      const double n = l2_norm(q[i]);
      for (double& x : q[i]) x /= n;
    }
    lambda_.resize(dim);
    for (std::size_t k = 0; k < dim; ++k)
      lambda_[k] = dim == 1 ? mu : mu + (L - mu) * static_cast<double>(k) / static_cast<double>(dim - 1);
    theta_true_.resize(dim);
    for (double& x : theta_true_) x = rng.normal();

    rows_.resize(clients);
    targets_.resize(clients);
    for (std::size_t c = 0; c < clients; ++c) {
      for (std::size_t r = 0; r < repeats; ++r)
        for (std::size_t k = 0; k < dim; ++k) {
          const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
          const double scale = sign * std::sqrt(static_cast<double>(dim) * lambda_[k] / 2.0);
          double y = noise_sd * rng.normal();
          for (std::size_t m = 0; m < dim; ++m) {
            rows_[c].push_back(scale * q[k][m]);
            y += scale * q[k][m] * theta_true_[m];
          }
          targets_[c].push_back(y);
        }
    }
    // theta* = Q diag(1/lambda) Q^T b with b = (2/N) sum_j x_j y_j.
    std::vector<double> b(dim, 0.0);
    std::size_t total = 0;
    for (std::size_t c = 0; c < clients; ++c) {
      total += targets_[c].size();
      for (std::size_t j = 0; j < targets_[c].size(); ++j)
        for (std::size_t m = 0; m < dim; ++m) b[m] += rows_[c][j * dim + m] * targets_[c][j];
    }
    for (double& x : b) x *= 2.0 / static_cast<double>(total);
    optimum_.assign(dim, 0.0);
    for (std::size_t k = 0; k < dim; ++k) {
      double proj = 0.0;
      for (std::size_t m = 0; m < dim; ++m) proj += q[k][m] * b[m];
      for (std::size_t m = 0; m < dim; ++m) optimum_[m] += q[k][m] * proj / lambda_[k];
    }
    f_star_ = global_loss(optimum_);
  }

  std::size_t num_clients() const { return rows_.size(); }
  std::size_t client_size(std::size_t i) const { return targets_.at(i).size(); }
  std::size_t dim() const { return dim_; }
  double f_star() const { return f_star_; }
  const std::vector<double>& optimum() const { return optimum_; }
  const std::vector<double>& spectrum() const { return lambda_; }

  double local_loss(std::span<const double> p, std::size_t c) const {
    double sse = 0.0;
    for (std::size_t j = 0; j < targets_[c].size(); ++j) {
      const double r = residual(p, c, j);
      sse += r * r;
    }
    return sse / static_cast<double>(targets_[c].size());
  }

  double global_loss(std::span<const double> p) const {
    double total = 0.0;
    std::size_t n = 0;
    for (std::size_t c = 0; c < rows_.size(); ++c) {
      total += local_loss(p, c) * static_cast<double>(targets_[c].size());
      n += targets_[c].size();
    }
    return total / static_cast<double>(n);
  }

  std::vector<double> train(std::span<const double> p, std::size_t c, const TrainingConfig& cfg) const {
    std::vector<double> theta(p.begin(), p.end());
    const std::size_t n = targets_[c].size();
    const std::size_t batch = std::min(cfg.batch, n);
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> grad(dim_);
    for (int e = 0; e < cfg.local_epochs; ++e) {
      rng.shuffle(order);
      for (std::size_t start = 0; start < n; start += batch) {
        const std::size_t stop = std::min(n, start + batch);
        const double inv = 1.0 / static_cast<double>(stop - start);
        std::fill(grad.begin(), grad.end(), 0.0);
        double sse = 0.0;
        for (std::size_t b = start; b < stop; ++b) {
          const double r = residual(theta, c, order[b]);
          sse += r * r;
          const double* x = rows_[c].data() + order[b] * dim_;
          for (std::size_t m = 0; m < dim_; ++m) grad[m] += 2.0 * inv * r * x[m];
        }
        if (!std::isfinite(sse) || sse * inv > 1e6) throw NonFiniteLoss();
        for (std::size_t m = 0; m < dim_; ++m) theta[m] -= cfg.eta * grad[m];
      }
    }
    return theta;
  }

  Metrics evaluate(std::span<const double> p) const {
    std::vector<double> pred, y;
    for (std::size_t c = 0; c < rows_.size(); ++c)
      for (std::size_t j = 0; j < targets_[c].size(); ++j) {
        pred.push_back(targets_[c][j] + residual(p, c, j));
        y.push_back(targets_[c][j]);
      }
    return evaluate_predictions(pred, y);
  }

 private:
  double residual(std::span<const double> p, std::size_t c, std::size_t j) const {
    const double* x = rows_[c].data() + j * dim_;
    double acc = -targets_[c][j];
    for (std::size_t m = 0; m < dim_; ++m) acc += x[m] * p[m];
    return acc;
  }

  std::size_t dim_;
  std::vector<double> lambda_;
  std::vector<double> theta_true_;
  std::vector<std::vector<double>> rows_;
  std::vector<std::vector<double>> targets_;
  std::vector<double> optimum_;
  double f_star_ = 0.0;
};

struct PlConfig {
  std::size_t clients = 4;
  std::size_t repeats = 8;  // copies of the design per client
  double noise_sd = 0.0;
  double eta = 0.0;         // 0 selects 1/(2L)
  int local_epochs = 1;
  std::size_t batch = 0;    // 0 selects full-batch gradients
  double eps_base = 1e-6;
  std::size_t events = 300;
  double jitter_pct = 0.1;
  std::uint64_t seed = 7;
};

struct PlReport {
  double contraction = 0.0;  // fitted per-aggregation factor on log(F - F*)
  double plateau = 0.0;      // mean F - F* over the last fifth of the run
  double f_star = 0.0;
  double eta = 0.0;
  double L = 0.0;
  bool monotone = true;      // F never increased between aggregations
  std::size_t fitted_points = 0;
  std::int64_t tau_max = 0;
  std::vector<double> gap;   // F(theta^t) - F* per aggregation, starting at t = 0
  bool ok = false;           // contraction in (0,1) and bounded plateau
};

/// Runs SSAFL (unit similarity per client) on a PL quadratic with spectrum
/// [mu, L], then fits log(F - F*) over the initial descent.
inline PlReport pl_diagnostic(std::size_t quad_dim, double mu, double L, const PlConfig& cfg) {
  const QuadraticTask task(quad_dim, mu, L, cfg.clients, cfg.repeats, cfg.noise_sd, derive_seed(cfg.seed, {1}));
  PlReport rep;
  rep.f_star = task.f_star();
  rep.L = L;
  rep.eta = cfg.eta > 0.0 ? cfg.eta : 1.0 / (2.0 * L);

  ProtocolConfig pc;
  pc.method = Method::SSAFL;
  for (std::size_t c = 0; c < cfg.clients; ++c)
    pc.clients.push_back({static_cast<int>(c + 1), c, static_cast<LatencyClass>(c % 3), 1.0, cfg.eps_base});
  pc.training = {rep.eta, cfg.local_epochs, cfg.batch == 0 ? task.client_size(0) : cfg.batch, 0};
  pc.aggregation = {0.1, 1, 2.0};
  pc.latency.jitter_pct = cfg.jitter_pct;
  pc.stop = {cfg.events, -std::numeric_limits<double>::infinity(), cfg.events + 1, 0.0, 0.0};
  pc.seed = derive_seed(cfg.seed, {2});

  Rng init_rng(derive_seed(cfg.seed, {3}));
  std::vector<double> init(quad_dim);
  for (double& x : init) x = 3.0 * init_rng.normal();

  SimOutcome o = simulate(task, init, pc);
  for (const auto& row : o.metrics) rep.gap.push_back(std::max(0.0, row.global_loss - rep.f_star));
  for (std::size_t i = 1; i < rep.gap.size(); ++i)
    if (rep.gap[i] > rep.gap[i - 1] * (1.0 + 1e-12) + 1e-300) rep.monotone = false;
  rep.tau_max = measure_staleness(o.trace).tau_max;
  if (rep.gap.size() < 3) throw Diverged("PL diagnostic produced fewer than two aggregations");

  const std::size_t tail = std::max<std::size_t>(1, rep.gap.size() / 5);
  double plateau = 0.0;
  for (std::size_t i = rep.gap.size() - tail; i < rep.gap.size(); ++i) plateau += rep.gap[i];
  rep.plateau = plateau / static_cast<double>(tail);
  if (!std::isfinite(rep.plateau) || rep.plateau > rep.gap.front() * 10.0) throw Diverged("PL diagnostic diverged");

  // Initial descent: points still well above the plateau and numerical noise.
  const double cutoff = std::max({10.0 * rep.plateau, 1e-12 * rep.gap.front(), 1e-14});
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < rep.gap.size() && rep.gap[i] > cutoff; ++i) {
    xs.push_back(static_cast<double>(i));
    ys.push_back(std::log(rep.gap[i]));
  }
  rep.fitted_points = xs.size();
  if (xs.size() >= 2) {
    const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / static_cast<double>(ys.size());
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      sxy += (xs[i] - mx) * (ys[i] - my);
      sxx += (xs[i] - mx) * (xs[i] - mx);
    }
    rep.contraction = std::exp(sxy / sxx);
  }
  rep.ok = rep.contraction > 0.0 && rep.contraction < 1.0 && rep.plateau <= rep.gap.front();
  return rep;
}

}  // namespace ssafl
