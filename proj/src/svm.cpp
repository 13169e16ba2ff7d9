#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "hashing.hpp"
#include "natcmd/classifiers.hpp"
#include "preprocess.hpp"

namespace natcmd {

void SvmConfig::validate() const {
  if (!(c > 0.0) || !std::isfinite(c)) throw ConfigError("svm C must be positive");
  if (max_epochs < 1) throw ConfigError("svm max_epochs must be at least 1");
  if (!(tolerance > 0.0)) throw ConfigError("svm tolerance must be positive");
}

double svm_objective(std::span<const double> w, std::span<const double> rows,
                     std::span<const double> targets, double c) {
  double reg = 0.0;
  for (const double v : w) reg += v * v;
  double hinge = 0.0;
  for (std::size_t n = 0; n < targets.size(); ++n) {
    const double* x = rows.data() + n * kAugmentedWidth;
    double d = 0.0;
    for (std::size_t i = 0; i < kAugmentedWidth; ++i) d += w[i] * x[i];
    const double slack = 1.0 - targets[n] * d;
    if (slack > 0.0) hinge += slack;
  }
  return 0.5 * reg + c * hinge;
}

namespace {

double dot(const double* a, const double* b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kAugmentedWidth; ++i) s += a[i] * b[i];
  return s;
}

/// Fits one binary problem. The iterate is stored as scale * v so the
/// (1 - 1/t) shrink costs O(1); an epoch's result is kept only if it lowers
/// the objective, and training stops once the relative decrease falls below
/// the tolerance or several epochs in a row fail to improve.
std::vector<double> fit_binary(const std::vector<double>& rows, const std::vector<double>& sq_norms,
                               const std::vector<double>& targets, const SvmConfig& cfg,
                               std::uint64_t seed, std::vector<double>& objective_trace) {
  const std::size_t n = targets.size();
  const double lambda = 1.0 / (cfg.c * static_cast<double>(n));
  const double radius = 1.0 / std::sqrt(lambda);

  std::vector<double> v(kAugmentedWidth, 0.0);
  double scale = 1.0;
  double v_norm2 = 0.0;

  std::vector<double> best(kAugmentedWidth, 0.0);
  double best_objective = svm_objective(best, rows, targets, cfg.c);
  objective_trace.assign(1, best_objective);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::uint64_t t = 0;

  constexpr std::size_t kPatience = 5;
  std::size_t stalled = 0;
  std::vector<double> w(kAugmentedWidth);
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (const auto i : order) {
      ++t;
      const double* x = rows.data() + i * kAugmentedWidth;
      const double y = targets[i];
      const double vx = dot(v.data(), x);
      const double margin = y * scale * vx;
      if (t == 1) {
        // (1 - 1/t) = 0 wipes the iterate.
        std::fill(v.begin(), v.end(), 0.0);
        scale = 1.0;
        v_norm2 = 0.0;
      } else {
        scale *= 1.0 - 1.0 / static_cast<double>(t);
      }
      if (margin < 1.0) {
        const double step = 1.0 / (lambda * static_cast<double>(t));
        const double coef = step * y / scale;
        const double vx_now = t == 1 ? 0.0 : vx;
        v_norm2 += 2.0 * coef * vx_now + coef * coef * sq_norms[i];
        for (std::size_t j = 0; j < kAugmentedWidth; ++j) v[j] += coef * x[j];
      }
      const double norm = scale * std::sqrt(std::max(v_norm2, 0.0));
      if (norm > radius) scale *= radius / norm;
    }

    for (std::size_t j = 0; j < kAugmentedWidth; ++j) {
      v[j] *= scale;
      w[j] = v[j];
    }
    v_norm2 = dot(v.data(), v.data());
    scale = 1.0;

    const double obj = svm_objective(w, rows, targets, cfg.c);
    if (obj < best_objective) {
      const double decrease = (best_objective - obj) / best_objective;
      best = w;
      best_objective = obj;
      objective_trace.push_back(best_objective);
      stalled = 0;
      if (decrease < cfg.tolerance) break;
    } else {
      // Single stochastic epochs are noisy; give up only after a few misses.
      objective_trace.push_back(best_objective);
      if (++stalled >= kPatience) break;
    }
  }
  return best;
}

}  // namespace

GestureModel train_linear_svm(const LabeledDataset& train, const SvmConfig& cfg, SvmTrainingTrace* trace) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  if (train.label_set().size() < 2) throw DataError("svm training needs at least 2 distinct labels");

  const std::size_t n = train.size();
  std::vector<double> rows(n * kAugmentedWidth);
  std::vector<double> sq_norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto frame_x = detail::preprocess(train.frames()[i], cfg.preprocessing);
    const auto x = frame_x.coords();
    double* row = rows.data() + i * kAugmentedWidth;
    std::copy(x.begin(), x.end(), row);
    row[kFrameWidth] = 1.0;
    sq_norms[i] = dot(row, row);
    if (!std::isfinite(sq_norms[i])) throw DataError("non-finite feature in training frame " + std::to_string(i));
  }

  const auto label_idx = train.label_indices();
  const std::size_t classes = train.label_set().size();
  SvmParameters params;
  params.weights.reserve(classes);
  SvmTrainingTrace local;
  std::vector<double> targets(n);
  for (std::size_t k = 0; k < classes; ++k) {
    for (std::size_t i = 0; i < n; ++i) targets[i] = label_idx[i] == k ? 1.0 : -1.0;
    std::vector<double> series;
    params.weights.push_back(fit_binary(rows, sq_norms, targets, cfg, detail::derive_seed(cfg.seed, k), series));
    local.epochs.push_back(series.size() - 1);
    local.objective.push_back(std::move(series));
  }
  if (trace != nullptr) *trace = std::move(local);

  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return GestureModel::make_svm(train.label_set(), std::move(params), ms, cfg.preprocessing);
}

}  // namespace natcmd
