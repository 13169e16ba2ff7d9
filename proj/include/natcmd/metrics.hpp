#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "natcmd/classifiers.hpp"
#include "natcmd/dataset.hpp"

namespace natcmd {

/// Rows are true labels, columns predicted labels.
class ConfusionMatrix {
 public:
  /// Throws DataError unless `counts` is square with side label_set.size().
  ConfusionMatrix(std::vector<std::string> label_set, std::vector<std::vector<std::size_t>> counts);

  const std::vector<std::string>& label_set() const noexcept { return labels_; }
  const std::vector<std::vector<std::size_t>>& counts() const noexcept { return counts_; }
  std::size_t size() const noexcept { return labels_.size(); }
  std::size_t at(std::size_t truth, std::size_t predicted) const { return counts_.at(truth).at(predicted); }

  std::size_t total() const;
  std::size_t row_sum(std::size_t k) const;
  std::size_t column_sum(std::size_t k) const;

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;

 private:
  std::vector<std::string> labels_;
  std::vector<std::vector<std::size_t>> counts_;
};

ConfusionMatrix confusion_matrix(std::span<const std::string> truth, std::span<const std::string> predicted,
                                 std::span<const std::string> label_set);

/// trace / total. Throws MetricError on an empty matrix.
double accuracy(const ConfusionMatrix& cm);

/// Unweighted means over classes of TP/(TP+FP) and TP/(TP+FN). A class whose
/// denominator is zero contributes 0 and still counts in the mean.
double macro_precision(const ConfusionMatrix& cm);
double macro_recall(const ConfusionMatrix& cm);

/// Harmonic mean 2pr/(p+r), 0 when p + r = 0.
double f1(double precision, double recall);

struct EvaluationReport {
  double accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double f1 = 0.0;
  std::optional<double> training_time_ms;  // absent for untrained recognizers
  double mean_prediction_time_ms = 0.0;
  ConfusionMatrix confusion{{}, {}};
};

/// Fills the four quality metrics from `cm`.
EvaluationReport make_report(ConfusionMatrix cm, std::optional<double> training_time_ms,
                             double mean_prediction_time_ms);

/// Predicts every test frame and scores against the model's label set.
EvaluationReport evaluate_model(const GestureModel& model, const LabeledDataset& test);

std::string report_to_json(const EvaluationReport& report);
std::string render_report_table(const EvaluationReport& report);

}  // namespace natcmd
