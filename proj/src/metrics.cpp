#include "natcmd/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <map>
#include <sstream>

#include <json.hpp>

namespace natcmd {

ConfusionMatrix::ConfusionMatrix(std::vector<std::string> label_set, std::vector<std::vector<std::size_t>> counts)
    : labels_(std::move(label_set)), counts_(std::move(counts)) {
  if (counts_.size() != labels_.size()) throw DataError("confusion matrix row count does not match label count");
  for (const auto& row : counts_) {
    if (row.size() != labels_.size()) throw DataError("confusion matrix must be square");
  }
}

std::size_t ConfusionMatrix::total() const {
  std::size_t s = 0;
  for (const auto& row : counts_) {
    for (const auto c : row) s += c;
  }
  return s;
}

std::size_t ConfusionMatrix::row_sum(std::size_t k) const {
  std::size_t s = 0;
  for (const auto c : counts_.at(k)) s += c;
  return s;
}

std::size_t ConfusionMatrix::column_sum(std::size_t k) const {
  std::size_t s = 0;
  for (const auto& row : counts_) s += row.at(k);
  return s;
}

ConfusionMatrix confusion_matrix(std::span<const std::string> truth, std::span<const std::string> predicted,
                                 std::span<const std::string> label_set) {
  if (truth.size() != predicted.size()) {
    throw DataError("confusion matrix needs equal-length label sequences (" + std::to_string(truth.size()) +
                    " vs " + std::to_string(predicted.size()) + ")");
  }
  std::map<std::string_view, std::size_t> index;
  for (std::size_t k = 0; k < label_set.size(); ++k) {
    if (!index.emplace(label_set[k], k).second) throw DataError("duplicate label '" + label_set[k] + "'");
  }
  auto lookup = [&](const std::string& l) {
    const auto it = index.find(l);
    if (it == index.end()) throw DataError("unknown label '" + l + "'");
    return it->second;
  };
  std::vector<std::vector<std::size_t>> counts(label_set.size(), std::vector<std::size_t>(label_set.size(), 0));
  for (std::size_t n = 0; n < truth.size(); ++n) ++counts[lookup(truth[n])][lookup(predicted[n])];
  return ConfusionMatrix(std::vector<std::string>(label_set.begin(), label_set.end()), std::move(counts));
}

namespace {

void require_non_empty(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw MetricError("metric is undefined for an empty confusion matrix");
}

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

double accuracy(const ConfusionMatrix& cm) {
  require_non_empty(cm);
  std::size_t diag = 0;
  for (std::size_t k = 0; k < cm.size(); ++k) diag += cm.at(k, k);
  return ratio(diag, cm.total());
}

double macro_precision(const ConfusionMatrix& cm) {
  require_non_empty(cm);
  double sum = 0.0;
  for (std::size_t k = 0; k < cm.size(); ++k) sum += ratio(cm.at(k, k), cm.column_sum(k));
  return sum / static_cast<double>(cm.size());
}

double macro_recall(const ConfusionMatrix& cm) {
  require_non_empty(cm);
  double sum = 0.0;
  for (std::size_t k = 0; k < cm.size(); ++k) sum += ratio(cm.at(k, k), cm.row_sum(k));
  return sum / static_cast<double>(cm.size());
}

double f1(double precision, double recall) {
  const double s = precision + recall;
  return s == 0.0 ? 0.0 : 2.0 * precision * recall / s;
}

EvaluationReport make_report(ConfusionMatrix cm, std::optional<double> training_time_ms,
                             double mean_prediction_time_ms) {
  EvaluationReport r;
  r.accuracy = accuracy(cm);
  r.macro_precision = macro_precision(cm);
  r.macro_recall = macro_recall(cm);
  r.f1 = f1(r.macro_precision, r.macro_recall);
  r.training_time_ms = training_time_ms;
  r.mean_prediction_time_ms = mean_prediction_time_ms;
  r.confusion = std::move(cm);
  return r;
}

EvaluationReport evaluate_model(const GestureModel& model, const LabeledDataset& test) {
  if (test.empty()) throw DataError("test set is empty");
  const auto& known = model.label_set();
  for (const auto& l : test.label_set()) {
    if (std::find(known.begin(), known.end(), l) == known.end()) {
      throw DataError("test label '" + l + "' is not in the model's label set");
    }
  }
  const auto predictions = predict_batch(model, test.frames());
  std::vector<std::string> predicted;
  predicted.reserve(predictions.size());
  double elapsed = 0.0;
  for (const auto& p : predictions) {
    predicted.push_back(p.label);
    elapsed += p.elapsed_ms;
  }
  auto cm = confusion_matrix(test.labels(), predicted, known);
  return make_report(std::move(cm), model.training_time_ms(), elapsed / static_cast<double>(predictions.size()));
}

std::string report_to_json(const EvaluationReport& report) {
  nlohmann::ordered_json doc;
  doc["accuracy"] = report.accuracy;
  doc["macro_precision"] = report.macro_precision;
  doc["macro_recall"] = report.macro_recall;
  doc["f1"] = report.f1;
  doc["training_time_ms"] = report.training_time_ms ? nlohmann::ordered_json(*report.training_time_ms) : nullptr;
  doc["mean_prediction_time_ms"] = report.mean_prediction_time_ms;
  doc["confusion"] = {{"labels", report.confusion.label_set()}, {"counts", report.confusion.counts()}};
  return doc.dump();
}

std::string render_report_table(const EvaluationReport& report) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "Accuracy         " << report.accuracy * 100.0 << "%\n";
  out << "Precision        " << report.macro_precision * 100.0 << "%\n";
  out << "Recall           " << report.macro_recall * 100.0 << "%\n";
  out << "F1 score         " << report.f1 * 100.0 << "%\n";
  if (report.training_time_ms) out << "Training time    " << *report.training_time_ms << " ms\n";
  out << std::setprecision(4);
  out << "Prediction time  " << report.mean_prediction_time_ms << " ms/prediction\n\n";

  const auto& labels = report.confusion.label_set();
  std::size_t width = 9;
  for (const auto& l : labels) width = std::max(width, l.size());
  out << std::setw(static_cast<int>(width)) << "true\\pred";
  for (std::size_t j = 0; j < labels.size(); ++j) out << ' ' << std::setw(6) << j;
  out << '\n';
  for (std::size_t i = 0; i < labels.size(); ++i) {
    out << std::setw(static_cast<int>(width)) << labels[i];
    for (std::size_t j = 0; j < labels.size(); ++j) out << ' ' << std::setw(6) << report.confusion.at(i, j);
    out << "  [" << i << "]\n";
  }
  return out.str();
}

}  // namespace natcmd
