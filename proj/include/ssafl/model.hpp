#pragma once

// Regression models over flat parameter vectors: forward pass, analytic MSE
// gradients, seeded mini-batch SGD and evaluation metrics.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ssafl/error.hpp"
#include "ssafl/rng.hpp"

namespace ssafl {

enum class ArchKind { Linear, Mlp };

/// Architecture descriptor. MLP layout in `params`: W1 (hidden x input, row-major),
/// b1 (hidden), w2 (hidden), b2.
struct Arch {
  ArchKind kind = ArchKind::Mlp;
  std::size_t input_dim = 1;
  std::size_t hidden = 0;

  static Arch linear(std::size_t d) { return {ArchKind::Linear, d, 0}; }
  static Arch mlp(std::size_t d, std::size_t h = 16) { return {ArchKind::Mlp, d, h}; }

  std::size_t param_count() const {
    return kind == ArchKind::Linear ? input_dim + 1 : (input_dim + 1) * hidden + (hidden + 1);
  }
  bool operator==(const Arch&) const = default;
};

struct ModelState {
  Arch arch;
  std::vector<double> params;

  static ModelState zeros(const Arch& arch) { return {arch, std::vector<double>(arch.param_count(), 0.0)}; }

  /// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) per layer.
  static ModelState initialized(const Arch& arch, std::uint64_t seed) {
    ModelState m = zeros(arch);
    Rng rng(seed);
    const std::size_t d = arch.input_dim;
    if (arch.kind == ArchKind::Linear) {
      const double r = 1.0 / std::sqrt(static_cast<double>(d));
      for (double& p : m.params) p = rng.uniform(-r, r);
      return m;
    }
    const std::size_t h = arch.hidden;
    const double r1 = 1.0 / std::sqrt(static_cast<double>(d));
    const double r2 = 1.0 / std::sqrt(static_cast<double>(h));
    for (std::size_t i = 0; i < h * d + h; ++i) m.params[i] = rng.uniform(-r1, r1);
    for (std::size_t i = h * d + h; i < m.params.size(); ++i) m.params[i] = rng.uniform(-r2, r2);
    return m;
  }

  bool operator==(const ModelState&) const = default;
};

/// Local dataset D_i: row-major inputs with targets in [0,1].
class LocalDataset {
 public:
  LocalDataset() = default;
  LocalDataset(std::size_t dim, std::vector<double> inputs, std::vector<double> targets)
      : dim_(dim), inputs_(std::move(inputs)), targets_(std::move(targets)) {
    if (dim_ == 0 || targets_.empty() || inputs_.size() != dim_ * targets_.size())
      throw DimensionMismatch("dataset rows and targets disagree or are empty");
    for (double v : inputs_)
      if (!std::isfinite(v)) throw BadSpec("dataset holds a non-finite input");
    for (double y : targets_)
      if (!std::isfinite(y) || y < 0.0 || y > 1.0) throw BadSpec("dataset target outside [0,1]");
  }

  std::size_t size() const { return targets_.size(); }
  std::size_t dim() const { return dim_; }
  std::span<const double> row(std::size_t i) const { return {inputs_.data() + i * dim_, dim_}; }
  double target(std::size_t i) const { return targets_[i]; }
  const std::vector<double>& inputs() const { return inputs_; }
  const std::vector<double>& targets() const { return targets_; }

  static LocalDataset concat(const std::vector<LocalDataset>& parts) {
    if (parts.empty()) throw DimensionMismatch("nothing to concatenate");
    std::vector<double> in;
    std::vector<double> out;
    for (const auto& p : parts) {
      if (p.dim() != parts.front().dim()) throw DimensionMismatch("datasets differ in input dimension");
      in.insert(in.end(), p.inputs_.begin(), p.inputs_.end());
      out.insert(out.end(), p.targets_.begin(), p.targets_.end());
    }
    return {parts.front().dim(), std::move(in), std::move(out)};
  }

  bool operator==(const LocalDataset&) const = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> inputs_;
  std::vector<double> targets_;
};

struct TrainingConfig {
  double eta = 0.01;
  int local_epochs = 5;
  std::size_t batch = 32;
  std::uint64_t seed = 0;

  bool operator==(const TrainingConfig&) const = default;
};

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  double r2 = 0.0;
};

namespace detail {

inline void check_input(const Arch& arch, std::span<const double> x) {
  if (x.size() != arch.input_dim)
    throw DimensionMismatch("input has dimension " + std::to_string(x.size()) + ", model expects " +
                            std::to_string(arch.input_dim));
}

/// Forward pass; if `hidden_out` is non-empty the tanh activations are stored there.
inline double forward(const Arch& arch, std::span<const double> p, std::span<const double> x,
                      std::span<double> hidden_out = {}) {
  const std::size_t d = arch.input_dim;
  if (arch.kind == ArchKind::Linear) {
    double acc = p[d];
    for (std::size_t k = 0; k < d; ++k) acc += p[k] * x[k];
    return acc;
  }
  const std::size_t h = arch.hidden;
  const double* w1 = p.data();
  const double* b1 = w1 + h * d;
  const double* w2 = b1 + h;
  const double b2 = w2[h];
  double out = b2;
  for (std::size_t j = 0; j < h; ++j) {
    double z = b1[j];
    const double* wr = w1 + j * d;
    for (std::size_t k = 0; k < d; ++k) z += wr[k] * x[k];
    const double a = std::tanh(z);
    if (!hidden_out.empty()) hidden_out[j] = a;
    out += w2[j] * a;
  }
  return out;
}

/// grad += scale * d(prediction)/d(params) at x; returns the prediction.
inline double accumulate_output_gradient(const Arch& arch, std::span<const double> p, std::span<const double> x,
                                         double scale, std::span<double> grad, std::vector<double>& hidden) {
  const std::size_t d = arch.input_dim;
  if (arch.kind == ArchKind::Linear) {
    const double pred = forward(arch, p, x);
    for (std::size_t k = 0; k < d; ++k) grad[k] += scale * x[k];
    grad[d] += scale;
    return pred;
  }
  const std::size_t h = arch.hidden;
  hidden.resize(h);
  const double pred = forward(arch, p, x, hidden);
  const double* w2 = p.data() + h * d + h;
  double* g_w1 = grad.data();
  double* g_b1 = g_w1 + h * d;
  double* g_w2 = g_b1 + h;
  for (std::size_t j = 0; j < h; ++j) {
    const double a = hidden[j];
    g_w2[j] += scale * a;
    const double back = scale * w2[j] * (1.0 - a * a);
    g_b1[j] += back;
    double* gr = g_w1 + j * d;
    for (std::size_t k = 0; k < d; ++k) gr[k] += back * x[k];
  }
  g_w2[h] += scale;
  return pred;
}

}  // namespace detail

inline double predict(const ModelState& m, std::span<const double> x) {
  detail::check_input(m.arch, x);
  return detail::forward(m.arch, m.params, x);
}

/// F_i(theta): mean squared error on the dataset.
inline double local_loss(const ModelState& m, const LocalDataset& d) {
  if (d.dim() != m.arch.input_dim) throw DimensionMismatch("dataset dimension differs from model input");
  double sse = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double r = detail::forward(m.arch, m.params, d.row(i)) - d.target(i);
    sse += r * r;
  }
  return sse / static_cast<double>(d.size());
}

/// F(theta) = sum_i |D_i|/|D| F_i(theta).
inline double global_loss(const ModelState& m, const std::vector<LocalDataset>& datasets) {
  if (datasets.empty()) throw DimensionMismatch("global loss needs at least one dataset");
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& d : datasets) {
    total += static_cast<double>(d.size()) * local_loss(m, d);
    n += d.size();
  }
  return total / static_cast<double>(n);
}

/// Gradient of the MSE over the given rows of `d`.
inline std::vector<double> loss_gradient(const ModelState& m, const LocalDataset& d, std::span<const std::size_t> rows) {
  std::vector<double> grad(m.params.size(), 0.0);
  std::vector<double> hidden;
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (std::size_t i : rows) {
    const double pred = detail::forward(m.arch, m.params, d.row(i));
    detail::accumulate_output_gradient(m.arch, m.params, d.row(i), 2.0 * inv * (pred - d.target(i)), grad, hidden);
  }
  return grad;
}

inline std::vector<double> loss_gradient(const ModelState& m, const LocalDataset& d) {
  std::vector<std::size_t> rows(d.size());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return loss_gradient(m, d, rows);
}

/// E epochs of mini-batch SGD on the MSE with seeded reshuffling each epoch.
inline ModelState local_train(const ModelState& m, const LocalDataset& d, const TrainingConfig& cfg) {
  if (!(cfg.eta >= 0.0) || cfg.local_epochs < 1 || cfg.batch < 1)
    throw BadSpec("training config needs eta >= 0, local_epochs >= 1, batch >= 1");
  if (d.dim() != m.arch.input_dim) throw DimensionMismatch("dataset dimension differs from model input");
  const std::size_t batch = std::min(cfg.batch, d.size());
  ModelState out = m;
  Rng rng(cfg.seed);
  std::vector<std::size_t> order(d.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> grad(out.params.size());
  std::vector<double> hidden;
  for (int epoch = 0; epoch < cfg.local_epochs; ++epoch) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t stop = std::min(order.size(), start + batch);
      const double inv = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double sse = 0.0;
      for (std::size_t b = start; b < stop; ++b) {
        const std::size_t i = order[b];
        const double pred = detail::forward(out.arch, out.params, d.row(i));
        const double r = pred - d.target(i);
        sse += r * r;
        detail::accumulate_output_gradient(out.arch, out.params, d.row(i), 2.0 * inv * r, grad, hidden);
      }
      const double batch_loss = sse * inv;
      if (!std::isfinite(batch_loss) || batch_loss > 1e6) throw NonFiniteLoss();
      for (std::size_t k = 0; k < grad.size(); ++k) out.params[k] -= cfg.eta * grad[k];
    }
  }
  for (double p : out.params)
    if (!std::isfinite(p)) throw NonFiniteLoss();
  return out;
}

/// MAE, RMSE and R^2 (SST about the target mean).
inline Metrics evaluate_predictions(std::span<const double> predicted, std::span<const double> targets) {
  if (predicted.size() != targets.size() || targets.size() < 2)
    throw DimensionMismatch("evaluation needs at least two paired predictions");
  const double n = static_cast<double>(targets.size());
  const double mean = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double abs_sum = 0.0, sse = 0.0, sst = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double r = predicted[i] - targets[i];
    abs_sum += std::abs(r);
    sse += r * r;
    sst += (targets[i] - mean) * (targets[i] - mean);
  }
  if (!(sst > 0.0)) throw DegenerateTargets();
  return {abs_sum / n, std::sqrt(sse / n), 1.0 - sse / sst};
}

inline Metrics evaluate(const ModelState& m, const LocalDataset& test) {
  std::vector<double> pred(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) pred[i] = predict(m, test.row(i));
  return evaluate_predictions(pred, test.targets());
}

// Checkpoint JSON: {"arch": {...}, "params": [...]} ----------------------------

inline void to_json(nlohmann::json& j, const ModelState& m) {
  nlohmann::json arch = {{"kind", m.arch.kind == ArchKind::Linear ? "linear" : "mlp"}, {"input_dim", m.arch.input_dim}};
  if (m.arch.kind == ArchKind::Mlp) arch["hidden"] = m.arch.hidden;
  j = {{"arch", arch}, {"params", m.params}};
}

inline void from_json(const nlohmann::json& j, ModelState& m) {
  const auto& a = j.at("arch");
  const auto kind = a.at("kind").get<std::string>();
  if (kind == "linear")
    m.arch = Arch::linear(a.at("input_dim").get<std::size_t>());
  else if (kind == "mlp")
    m.arch = Arch::mlp(a.at("input_dim").get<std::size_t>(), a.at("hidden").get<std::size_t>());
  else
    throw BadSpec("unknown model arch '" + kind + "'");
  m.params = j.at("params").get<std::vector<double>>();
  if (m.params.size() != m.arch.param_count()) throw DimensionMismatch("checkpoint parameter count disagrees with arch");
}

}  // namespace ssafl
