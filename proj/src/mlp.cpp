#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>

#include "hashing.hpp"
#include "natcmd/classifiers.hpp"
#include "preprocess.hpp"

namespace natcmd {

void MlpConfig::validate() const {
  if (hidden_units < 1) throw ConfigError("mlp hidden_units must be at least 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("mlp learning_rate must be positive");
  if (batch_size < 1) throw ConfigError("mlp batch_size must be at least 1");
}

MlpParameters init_mlp_parameters(std::size_t hidden, std::size_t outputs, std::uint64_t seed) {
  auto p = MlpParameters::zeros(hidden, outputs);
  std::mt19937_64 rng(detail::mix64(seed));
  const double limit1 = std::sqrt(6.0 / static_cast<double>(kFrameWidth + hidden));
  const double limit2 = std::sqrt(6.0 / static_cast<double>(hidden + outputs));
  std::uniform_real_distribution<double> u1(-limit1, limit1);
  std::uniform_real_distribution<double> u2(-limit2, limit2);
  for (auto& w : p.w1) w = u1(rng);
  for (auto& w : p.w2) w = u2(rng);
  return p;
}

namespace {

/// Forward + backward pass over `count` rows of `inputs` (63 wide). Gradients
/// are accumulated into `grad` (which must be zeroed) as batch means.
double accumulate_gradients(const MlpParameters& p, const double* inputs, const double* targets,
                            std::size_t count, MlpParameters& grad) {
  const std::size_t H = p.hidden;
  const std::size_t K = p.outputs;
  const double inv = 1.0 / static_cast<double>(count);
  std::vector<double> pre(H), act(H), logits(K), d_logits(K), d_pre(H);
  double loss = 0.0;

  for (std::size_t n = 0; n < count; ++n) {
    const double* x = inputs + n * kFrameWidth;
    const double* t = targets + n * K;

    std::copy(p.b1.begin(), p.b1.end(), pre.begin());
    for (std::size_t i = 0; i < kFrameWidth; ++i) {
      const double xi = x[i];
      const double* row = &p.w1[i * H];
      for (std::size_t h = 0; h < H; ++h) pre[h] += xi * row[h];
    }
    for (std::size_t h = 0; h < H; ++h) act[h] = pre[h] > 0.0 ? pre[h] : 0.0;

    std::copy(p.b2.begin(), p.b2.end(), logits.begin());
    for (std::size_t h = 0; h < H; ++h) {
      if (act[h] == 0.0) continue;
      const double* row = &p.w2[h * K];
      for (std::size_t k = 0; k < K; ++k) logits[k] += act[h] * row[k];
    }

    // log-sum-exp for a stable cross-entropy.
    const double peak = *std::max_element(logits.begin(), logits.end());
    double sum = 0.0;
    for (std::size_t k = 0; k < K; ++k) sum += std::exp(logits[k] - peak);
    const double log_z = peak + std::log(sum);
    double mass = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      loss -= t[k] * (logits[k] - log_z);
      mass += t[k];
    }
    for (std::size_t k = 0; k < K; ++k) {
      d_logits[k] = (std::exp(logits[k] - log_z) * mass - t[k]) * inv;
      grad.b2[k] += d_logits[k];
    }

    for (std::size_t h = 0; h < H; ++h) {
      const double* row = &p.w2[h * K];
      double* grow = &grad.w2[h * K];
      double back = 0.0;
      for (std::size_t k = 0; k < K; ++k) {
        grow[k] += act[h] * d_logits[k];
        back += row[k] * d_logits[k];
      }
      d_pre[h] = pre[h] > 0.0 ? back : 0.0;
      grad.b1[h] += d_pre[h];
    }
    for (std::size_t i = 0; i < kFrameWidth; ++i) {
      const double xi = x[i];
      if (xi == 0.0) continue;
      double* grow = &grad.w1[i * H];
      for (std::size_t h = 0; h < H; ++h) grow[h] += xi * d_pre[h];
    }
  }
  return loss * inv;
}

}  // namespace

MlpLossAndGradients compute_mlp_gradients(const GestureModel& model, std::span<const LandmarkFrame> frames,
                                          const std::vector<std::vector<double>>& targets) {
  const auto& p = model.mlp();
  if (frames.empty()) throw DataError("gradient batch is empty");
  if (targets.size() != frames.size()) throw DataError("gradient batch has mismatched frame and target counts");
  std::vector<double> inputs(frames.size() * kFrameWidth);
  std::vector<double> flat_targets(frames.size() * p.outputs);
  for (std::size_t n = 0; n < frames.size(); ++n) {
    const auto frame_x = detail::preprocess(frames[n], model.preprocessing());
    const auto x = frame_x.coords();
    std::copy(x.begin(), x.end(), inputs.begin() + static_cast<std::ptrdiff_t>(n * kFrameWidth));
    if (targets[n].size() != p.outputs) {
      throw DataError("target row " + std::to_string(n) + " has width " + std::to_string(targets[n].size()) +
                      ", expected " + std::to_string(p.outputs));
    }
    std::copy(targets[n].begin(), targets[n].end(), flat_targets.begin() + static_cast<std::ptrdiff_t>(n * p.outputs));
  }
  MlpLossAndGradients out;
  out.gradients = MlpParameters::zeros(p.hidden, p.outputs);
  out.loss = accumulate_gradients(p, inputs.data(), flat_targets.data(), frames.size(), out.gradients);
  return out;
}

std::vector<std::vector<double>> to_targets(const OneHotMatrix& one_hot) {
  std::vector<std::vector<double>> out(one_hot.rows(), std::vector<double>(one_hot.cols(), 0.0));
  for (std::size_t r = 0; r < one_hot.rows(); ++r) out[r][one_hot.hot_column(r)] = 1.0;
  return out;
}

GestureModel train_mlp(const LabeledDataset& train, const MlpConfig& cfg) {
  cfg.validate();
  const auto start = std::chrono::steady_clock::now();
  if (train.empty()) throw ConfigError("mlp training needs at least one frame");

  const std::size_t n = train.size();
  const std::size_t K = train.label_set().size();
  const auto one_hot = one_hot_encode(train.labels(), train.label_set());

  std::vector<double> inputs(n * kFrameWidth);
  for (std::size_t i = 0; i < n; ++i) {
    const auto frame_x = detail::preprocess(train.frames()[i], cfg.preprocessing);
    const auto x = frame_x.coords();
    std::copy(x.begin(), x.end(), inputs.begin() + static_cast<std::ptrdiff_t>(i * kFrameWidth));
  }

  auto params = init_mlp_parameters(cfg.hidden_units, K, cfg.seed);
  auto grad = MlpParameters::zeros(cfg.hidden_units, K);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(detail::derive_seed(cfg.seed, 0x6d6c70ULL));

  std::vector<double> batch_x(cfg.batch_size * kFrameWidth);
  std::vector<double> batch_t(cfg.batch_size * K);
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < n; begin += cfg.batch_size) {
      const std::size_t count = std::min(cfg.batch_size, n - begin);
      std::fill(batch_t.begin(), batch_t.end(), 0.0);
      for (std::size_t j = 0; j < count; ++j) {
        const auto src = order[begin + j];
        std::copy_n(inputs.begin() + static_cast<std::ptrdiff_t>(src * kFrameWidth), kFrameWidth,
                    batch_x.begin() + static_cast<std::ptrdiff_t>(j * kFrameWidth));
        batch_t[j * K + one_hot.hot_column(src)] = 1.0;
      }
      grad.for_each([](double& g) { g = 0.0; });
      accumulate_gradients(params, batch_x.data(), batch_t.data(), count, grad);

      auto step = [&](std::vector<double>& w, const std::vector<double>& g) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= cfg.learning_rate * g[i];
      };
      step(params.w1, grad.w1);
      step(params.b1, grad.b1);
      step(params.w2, grad.w2);
      step(params.b2, grad.b2);
    }
  }

  const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return GestureModel::make_mlp(train.label_set(), std::move(params), ms, cfg.preprocessing);
}

}  // namespace natcmd
