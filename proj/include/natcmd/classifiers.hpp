#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "natcmd/dataset.hpp"
#include "natcmd/errors.hpp"

namespace natcmd {

enum class ModelKind { svm, mlp };
std::string_view to_string(ModelKind kind);

/// Optional per-frame transform applied before both training and prediction.
enum class Preprocessing { none, wrist_center };
std::string_view to_string(Preprocessing p);

/// Width of an SVM weight vector: 63 coordinates plus the constant bias feature.
inline constexpr std::size_t kAugmentedWidth = kFrameWidth + 1;

struct SvmConfig {
  double c = 1.0;
  std::size_t max_epochs = 1000;
  double tolerance = 1e-4;
  std::uint64_t seed = 42;
  Preprocessing preprocessing = Preprocessing::none;

  void validate() const;
};

struct MlpConfig {
  std::size_t hidden_units = 30;
  double learning_rate = 1e-3;
  std::size_t batch_size = 32;
  std::size_t epochs = 50;
  std::uint64_t seed = 42;
  Preprocessing preprocessing = Preprocessing::none;

  void validate() const;
};

struct SvmParameters {
  std::vector<std::vector<double>> weights;  // K rows of kAugmentedWidth

  friend bool operator==(const SvmParameters&, const SvmParameters&) = default;
};

/// Row-major dense layers: w1 is 63 x hidden, w2 is hidden x outputs.
struct MlpParameters {
  std::size_t hidden = 0;
  std::size_t outputs = 0;
  std::vector<double> w1;
  std::vector<double> b1;
  std::vector<double> w2;
  std::vector<double> b2;

  static MlpParameters zeros(std::size_t hidden, std::size_t outputs);
  double& w1_at(std::size_t in, std::size_t h) { return w1[in * hidden + h]; }
  double& w2_at(std::size_t h, std::size_t out) { return w2[h * outputs + out]; }
  double w1_at(std::size_t in, std::size_t h) const { return w1[in * hidden + h]; }
  double w2_at(std::size_t h, std::size_t out) const { return w2[h * outputs + out]; }

  /// Visits every scalar parameter in a fixed order (w1, b1, w2, b2).
  template <typename F>
  void for_each(F&& f) {
    for (auto* block : {&w1, &b1, &w2, &b2}) {
      for (auto& v : *block) f(v);
    }
  }

  friend bool operator==(const MlpParameters&, const MlpParameters&) = default;
};

/// A trained classifier with its ordered label set. Immutable once built.
class GestureModel {
 public:
  /// Both factories throw DataError on inconsistent shapes or non-finite values.
  static GestureModel make_svm(std::vector<std::string> labels, SvmParameters params,
                               double training_time_ms = 0.0,
                               Preprocessing preprocessing = Preprocessing::none);
  static GestureModel make_mlp(std::vector<std::string> labels, MlpParameters params,
                               double training_time_ms = 0.0,
                               Preprocessing preprocessing = Preprocessing::none);

  ModelKind kind() const noexcept { return std::holds_alternative<SvmParameters>(params_) ? ModelKind::svm : ModelKind::mlp; }
  const std::vector<std::string>& label_set() const noexcept { return labels_; }
  double training_time_ms() const noexcept { return training_time_ms_; }
  Preprocessing preprocessing() const noexcept { return preprocessing_; }

  /// Throw ConfigError when the model is of the other kind.
  const SvmParameters& svm() const;
  const MlpParameters& mlp() const;

  friend bool operator==(const GestureModel&, const GestureModel&) = default;

 private:
  GestureModel() = default;

  std::vector<std::string> labels_;
  std::variant<SvmParameters, MlpParameters> params_;
  double training_time_ms_ = 0.0;
  Preprocessing preprocessing_ = Preprocessing::none;
};

/// Epoch-end objective values, one series per one-vs-rest problem. Entry 0 is
/// the objective at w = 0.
struct SvmTrainingTrace {
  std::vector<std::vector<double>> objective;
  std::vector<std::size_t> epochs;
};

/// (1/2)||w||^2 + C * sum_i max(0, 1 - y_i w.x_i) for one binary problem over
/// augmented rows (row-major, kAugmentedWidth wide).
double svm_objective(std::span<const double> w, std::span<const double> rows,
                     std::span<const double> targets, double c);

/// One-vs-rest linear SVM fitted by Pegasos-style primal subgradient descent.
GestureModel train_linear_svm(const LabeledDataset& train, const SvmConfig& cfg,
                              SvmTrainingTrace* trace = nullptr);

/// 63 -> hidden (ReLU) -> K (softmax), mini-batch SGD on mean cross-entropy.
GestureModel train_mlp(const LabeledDataset& train, const MlpConfig& cfg);

/// Glorot-uniform weights and zero biases.
MlpParameters init_mlp_parameters(std::size_t hidden, std::size_t outputs, std::uint64_t seed);

struct MlpLossAndGradients {
  double loss = 0.0;
  MlpParameters gradients;
};

/// Mean cross-entropy over the batch and its analytic gradient. Each target row
/// has one entry per label (one-hot or any non-negative distribution).
MlpLossAndGradients compute_mlp_gradients(const GestureModel& model,
                                          std::span<const LandmarkFrame> frames,
                                          const std::vector<std::vector<double>>& targets);

/// Target rows for compute_mlp_gradients from a one-hot encoding.
std::vector<std::vector<double>> to_targets(const OneHotMatrix& one_hot);

struct Prediction {
  std::string label;
  std::size_t index = 0;
  std::vector<double> scores;  // SVM margins, or MLP softmax probabilities
  double elapsed_ms = 0.0;
};

/// Raw per-label scores without timing.
std::vector<double> decision_scores(const GestureModel& model, const LandmarkFrame& frame);

/// Index of the maximum; ties go to the lowest index.
std::size_t argmax(std::span<const double> scores);

Prediction predict(const GestureModel& model, const LandmarkFrame& frame);
/// Throws DataError unless `coords` is a valid 63-value frame.
Prediction predict(const GestureModel& model, std::span<const double> coords);
std::vector<Prediction> predict_batch(const GestureModel& model, std::span<const LandmarkFrame> frames);

/// Model files are versioned JSON; see save_model.
class UnsupportedModelKind : public ModelLoadError {
 public:
  using ModelLoadError::ModelLoadError;
};

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const GestureModel& model);
GestureModel model_from_json(std::string_view text);
void save_model(const GestureModel& model, const std::filesystem::path& path);
GestureModel load_model(const std::filesystem::path& path);

}  // namespace natcmd
