#pragma once

// Update norms, similarity-aware upload thresholds and weights, and the global
// update rules of SSAFL and the FedAvg / FedAsync / SemiAsync baselines.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "ssafl/error.hpp"
#include "ssafl/model.hpp"

namespace ssafl {

struct UploadPolicy {
  double eps_base = 0.01;
  double lambda_s = 1.0;

  bool operator==(const UploadPolicy&) const = default;
};

struct AggregationConfig {
  double w_min = 0.1;
  std::size_t micro_batch = 1;
  double window = 2.0;  // seconds; only consulted when micro_batch > 1

  bool operator==(const AggregationConfig&) const = default;
};

struct UpdateDelta {
  std::vector<double> delta;
  double norm = 0.0;
};

inline double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

inline UpdateDelta update_delta(std::span<const double> local, std::span<const double> global) {
  if (local.size() != global.size()) throw ArchMismatch();
  UpdateDelta out;
  out.delta.resize(local.size());
  for (std::size_t k = 0; k < local.size(); ++k) out.delta[k] = local[k] - global[k];
  out.norm = l2_norm(out.delta);
  return out;
}

inline UpdateDelta update_delta(const ModelState& local, const ModelState& global) {
  if (!(local.arch == global.arch)) throw ArchMismatch();
  return update_delta(local.params, global.params);
}

/// eps_i = eps_base (1 + lambda_s (1 - Sim_i)).
inline double upload_threshold(const UploadPolicy& p, double sim) {
  return p.eps_base * (1.0 + p.lambda_s * (1.0 - sim));
}

/// w'_i = Sim_i * ||delta_i||.
inline double pre_weight(double sim, double norm) { return sim * norm; }

/// w~_i = w'_i / sum w'_j; uniform when the pre-weights sum to zero.
inline std::vector<double> normalize_weights(std::span<const double> pre) {
  if (pre.empty()) throw BadWeights("no weights to normalize");
  double total = 0.0;
  for (double w : pre) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw BadWeights("pre-weights must be finite and non-negative");
    total += w;
  }
  std::vector<double> out(pre.size(), 1.0 / static_cast<double>(pre.size()));
  if (total > 0.0)
    for (std::size_t i = 0; i < pre.size(); ++i) out[i] = pre[i] / total;
  return out;
}

/// Min-weight protection: normalize, floor at w_min, renormalize. All-zero
/// pre-weights fall back to uniform weights.
inline std::vector<double> protected_weights(std::span<const double> pre, double w_min) {
  if (w_min < 0.0 || w_min * static_cast<double>(pre.size()) > 1.0 + 1e-12) throw InfeasibleFloor();
  std::vector<double> w = normalize_weights(pre);
  if (std::none_of(w.begin(), w.end(), [&](double x) { return x < w_min; })) return w;
  double total = 0.0;
  for (double& x : w) {
    x = std::max(w_min, x);
    total += x;
  }
  for (double& x : w) x /= total;
  return w;
}

/// theta + sum_j w_j delta_j.
inline std::vector<double> apply_update(std::span<const double> theta, const std::vector<std::vector<double>>& deltas,
                                        std::span<const double> weights) {
  if (deltas.size() != weights.size() || deltas.empty()) throw BadWeights("one weight per delta required");
  double total = 0.0;
  for (double w : weights) total += w;
  if (std::abs(total - 1.0) > 1e-9) throw BadWeights("aggregation weights must sum to 1");
  std::vector<double> out(theta.begin(), theta.end());
  for (std::size_t j = 0; j < deltas.size(); ++j) {
    if (deltas[j].size() != out.size()) throw ArchMismatch();
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += weights[j] * deltas[j][k];
  }
  return out;
}

inline ModelState apply_update(const ModelState& theta, const std::vector<std::vector<double>>& deltas,
                               std::span<const double> weights) {
  return {theta.arch, apply_update(theta.params, deltas, weights)};
}

/// A model together with the size of the dataset that produced it.
struct SizedModel {
  ModelState model;
  std::size_t samples = 0;
};

/// |D_i|-weighted parameter average.
inline ModelState fedavg_round(const ModelState& theta_global, const std::vector<SizedModel>& locals) {
  if (locals.empty()) throw BadWeights("FedAvg needs at least one local model");
  double n = 0.0;
  for (const auto& l : locals) {
    if (!(l.model.arch == theta_global.arch)) throw ArchMismatch();
    if (l.samples == 0) throw BadWeights("local dataset size must be positive");
    n += static_cast<double>(l.samples);
  }
  ModelState out{theta_global.arch, std::vector<double>(theta_global.params.size(), 0.0)};
  for (const auto& l : locals) {
    const double w = static_cast<double>(l.samples) / n;
    for (std::size_t k = 0; k < out.params.size(); ++k) out.params[k] += w * l.model.params[k];
  }
  return out;
}

/// Mixing rate alpha (staleness + 1)^(-decay_a).
inline double fedasync_rate(double alpha, std::int64_t staleness, double decay_a) {
  return alpha * std::pow(static_cast<double>(staleness) + 1.0, -decay_a);
}

/// (1 - alpha_t) theta_global + alpha_t theta_local.
inline ModelState fedasync_update(const ModelState& theta_global, const ModelState& theta_local, double alpha,
                                  std::int64_t staleness, double decay_a) {
  if (!(theta_global.arch == theta_local.arch)) throw ArchMismatch();
  const double a = fedasync_rate(alpha, staleness, decay_a);
  ModelState out = theta_global;
  for (std::size_t k = 0; k < out.params.size(); ++k)
    out.params[k] = (1.0 - a) * theta_global.params[k] + a * theta_local.params[k];
  return out;
}

/// Quorum-k buffering: nothing until k models are buffered, then their
/// |D_i|-weighted average; the buffer is consumed on aggregation.
inline std::optional<ModelState> semiasync_update(std::vector<SizedModel>& buffer, std::size_t k,
                                                  const ModelState& theta_global) {
  if (k == 0) throw BadSpec("SemiAsync quorum must be at least 1");
  if (buffer.size() < k) return std::nullopt;
  ModelState out = fedavg_round(theta_global, buffer);
  buffer.clear();
  return out;
}

}  // namespace ssafl
