#include <chrono>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "natcmd/classifiers.hpp"
#include "preprocess.hpp"

namespace natcmd {

using nlohmann::json;

std::string_view to_string(ModelKind kind) { return kind == ModelKind::svm ? "svm" : "mlp"; }

std::string_view to_string(Preprocessing p) {
  return p == Preprocessing::none ? "none" : "wrist_center";
}

MlpParameters MlpParameters::zeros(std::size_t hidden, std::size_t outputs) {
  MlpParameters p;
  p.hidden = hidden;
  p.outputs = outputs;
  p.w1.assign(kFrameWidth * hidden, 0.0);
  p.b1.assign(hidden, 0.0);
  p.w2.assign(hidden * outputs, 0.0);
  p.b2.assign(outputs, 0.0);
  return p;
}

namespace {

void check_labels(const std::vector<std::string>& labels) {
  if (labels.empty()) throw DataError("model needs at least one label");
  std::set<std::string> seen;
  for (const auto& l : labels) {
    if (!seen.insert(l).second) throw DataError("duplicate model label '" + l + "'");
  }
}

void check_finite(const std::vector<double>& v, std::string_view what) {
  for (const double x : v) {
    if (!std::isfinite(x)) throw DataError(std::string(what) + " contains a non-finite value");
  }
}

}  // namespace

GestureModel GestureModel::make_svm(std::vector<std::string> labels, SvmParameters params,
                                    double training_time_ms, Preprocessing preprocessing) {
  check_labels(labels);
  if (params.weights.size() != labels.size()) {
    throw DataError("svm model has " + std::to_string(params.weights.size()) + " weight vectors for " +
                    std::to_string(labels.size()) + " labels");
  }
  for (const auto& w : params.weights) {
    if (w.size() != kAugmentedWidth) throw DataError("svm weight vector must have 64 entries");
    check_finite(w, "svm weights");
  }
  GestureModel m;
  m.labels_ = std::move(labels);
  m.params_ = std::move(params);
  m.training_time_ms_ = training_time_ms;
  m.preprocessing_ = preprocessing;
  return m;
}

GestureModel GestureModel::make_mlp(std::vector<std::string> labels, MlpParameters params,
                                    double training_time_ms, Preprocessing preprocessing) {
  check_labels(labels);
  if (params.hidden == 0) throw DataError("mlp needs at least one hidden unit");
  if (params.outputs != labels.size()) throw DataError("mlp output width does not match label count");
  if (params.w1.size() != kFrameWidth * params.hidden || params.b1.size() != params.hidden ||
      params.w2.size() != params.hidden * params.outputs || params.b2.size() != params.outputs) {
    throw DataError("mlp parameter shapes are inconsistent");
  }
  check_finite(params.w1, "mlp w1");
  check_finite(params.b1, "mlp b1");
  check_finite(params.w2, "mlp w2");
  check_finite(params.b2, "mlp b2");
  GestureModel m;
  m.labels_ = std::move(labels);
  m.params_ = std::move(params);
  m.training_time_ms_ = training_time_ms;
  m.preprocessing_ = preprocessing;
  return m;
}

const SvmParameters& GestureModel::svm() const {
  if (const auto* p = std::get_if<SvmParameters>(&params_)) return *p;
  throw ConfigError("model is not an svm");
}

const MlpParameters& GestureModel::mlp() const {
  if (const auto* p = std::get_if<MlpParameters>(&params_)) return *p;
  throw ConfigError("model is not an mlp");
}

std::size_t argmax(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k) {
    if (scores[k] > scores[best]) best = k;
  }
  return best;
}

std::vector<double> decision_scores(const GestureModel& model, const LandmarkFrame& frame) {
  const auto x = detail::preprocess(frame, model.preprocessing());
  const auto c = x.coords();
  if (model.kind() == ModelKind::svm) {
    const auto& weights = model.svm().weights;
    std::vector<double> scores(weights.size());
    for (std::size_t k = 0; k < weights.size(); ++k) {
      double s = weights[k][kFrameWidth];
      for (std::size_t i = 0; i < kFrameWidth; ++i) s += weights[k][i] * c[i];
      scores[k] = s;
    }
    return scores;
  }
  const auto& p = model.mlp();
  std::vector<double> hidden(p.b1);
  for (std::size_t i = 0; i < kFrameWidth; ++i) {
    const double xi = c[i];
    const double* row = &p.w1[i * p.hidden];
    for (std::size_t h = 0; h < p.hidden; ++h) hidden[h] += xi * row[h];
  }
  std::vector<double> logits(p.b2);
  for (std::size_t h = 0; h < p.hidden; ++h) {
    const double a = hidden[h] > 0.0 ? hidden[h] : 0.0;
    if (a == 0.0) continue;
    const double* row = &p.w2[h * p.outputs];
    for (std::size_t k = 0; k < p.outputs; ++k) logits[k] += a * row[k];
  }
  detail::softmax_in_place(logits);
  return logits;
}

Prediction predict(const GestureModel& model, const LandmarkFrame& frame) {
  const auto start = std::chrono::steady_clock::now();
  Prediction out;
  out.scores = decision_scores(model, frame);
  out.index = argmax(out.scores);
  out.label = model.label_set()[out.index];
  out.elapsed_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  return out;
}

Prediction predict(const GestureModel& model, std::span<const double> coords) {
  return predict(model, LandmarkFrame(coords));
}

std::vector<Prediction> predict_batch(const GestureModel& model, std::span<const LandmarkFrame> frames) {
  std::vector<Prediction> out;
  out.reserve(frames.size());
  for (const auto& f : frames) out.push_back(predict(model, f));
  return out;
}

std::string model_to_json(const GestureModel& model) {
  json params;
  if (model.kind() == ModelKind::svm) {
    params["weights"] = model.svm().weights;
  } else {
    const auto& p = model.mlp();
    json w1 = json::array();
    for (std::size_t i = 0; i < kFrameWidth; ++i) {
      w1.push_back(std::vector<double>(p.w1.begin() + static_cast<std::ptrdiff_t>(i * p.hidden),
                                       p.w1.begin() + static_cast<std::ptrdiff_t>((i + 1) * p.hidden)));
    }
    json w2 = json::array();
    for (std::size_t h = 0; h < p.hidden; ++h) {
      w2.push_back(std::vector<double>(p.w2.begin() + static_cast<std::ptrdiff_t>(h * p.outputs),
                                       p.w2.begin() + static_cast<std::ptrdiff_t>((h + 1) * p.outputs)));
    }
    params = {{"hidden_units", p.hidden}, {"w1", w1}, {"b1", p.b1}, {"w2", w2}, {"b2", p.b2}};
  }
  json doc = {{"version", kModelFormatVersion},
              {"kind", to_string(model.kind())},
              {"labels", model.label_set()},
              {"preprocessing", to_string(model.preprocessing())},
              {"training_time_ms", model.training_time_ms()},
              {"params", params}};
  return doc.dump();
}

namespace {

const json& require(const json& obj, const char* key) {
  const auto it = obj.find(key);
  if (it == obj.end()) throw ModelLoadError(std::string("model file is missing '") + key + "'");
  return *it;
}

std::vector<double> number_array(const json& j, const char* what, std::size_t expected) {
  if (!j.is_array()) throw ModelLoadError(std::string(what) + " must be an array");
  if (j.size() != expected) {
    throw ModelLoadError(std::string(what) + " has " + std::to_string(j.size()) + " entries, expected " +
                         std::to_string(expected));
  }
  std::vector<double> out;
  out.reserve(expected);
  for (const auto& v : j) {
    if (!v.is_number()) throw ModelLoadError(std::string(what) + " holds a non-number");
    out.push_back(v.get<double>());
  }
  return out;
}

std::vector<double> matrix_rows(const json& j, const char* what, std::size_t rows, std::size_t cols) {
  if (!j.is_array() || j.size() != rows) {
    throw ModelLoadError(std::string(what) + " must be an array of " + std::to_string(rows) + " rows");
  }
  std::vector<double> flat;
  flat.reserve(rows * cols);
  for (const auto& row : j) {
    const auto r = number_array(row, what, cols);
    flat.insert(flat.end(), r.begin(), r.end());
  }
  return flat;
}

}  // namespace

GestureModel model_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelLoadError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ModelLoadError("model file must hold a JSON object");

  const auto& version = require(doc, "version");
  if (!version.is_number_integer() || version.get<int>() != kModelFormatVersion) {
    throw ModelLoadError("unsupported model file version " + version.dump());
  }
  const auto& kind = require(doc, "kind");
  if (!kind.is_string()) throw ModelLoadError("'kind' must be a string");
  const auto kind_name = kind.get<std::string>();
  if (kind_name != "svm" && kind_name != "mlp") throw UnsupportedModelKind("unsupported model kind '" + kind_name + "'");

  const auto& labels_json = require(doc, "labels");
  if (!labels_json.is_array()) throw ModelLoadError("'labels' must be an array");
  std::vector<std::string> labels;
  for (const auto& l : labels_json) {
    if (!l.is_string()) throw ModelLoadError("'labels' must hold strings");
    labels.push_back(l.get<std::string>());
  }

  Preprocessing preprocessing = Preprocessing::none;
  if (const auto it = doc.find("preprocessing"); it != doc.end()) {
    if (*it == "wrist_center") {
      preprocessing = Preprocessing::wrist_center;
    } else if (*it != "none") {
      throw ModelLoadError("unknown preprocessing " + it->dump());
    }
  }
  double training_ms = 0.0;
  if (const auto it = doc.find("training_time_ms"); it != doc.end()) {
    if (!it->is_number()) throw ModelLoadError("'training_time_ms' must be a number");
    training_ms = it->get<double>();
  }

  const auto& params = require(doc, "params");
  if (!params.is_object()) throw ModelLoadError("'params' must be an object");
  try {
    if (kind_name == "svm") {
      SvmParameters p;
      const auto flat = matrix_rows(require(params, "weights"), "weights", labels.size(), kAugmentedWidth);
      for (std::size_t k = 0; k < labels.size(); ++k) {
        p.weights.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(k * kAugmentedWidth),
                               flat.begin() + static_cast<std::ptrdiff_t>((k + 1) * kAugmentedWidth));
      }
      return GestureModel::make_svm(std::move(labels), std::move(p), training_ms, preprocessing);
    }
    const auto& hidden_json = require(params, "hidden_units");
    if (!hidden_json.is_number_unsigned() || hidden_json.get<std::size_t>() == 0) {
      throw ModelLoadError("'hidden_units' must be a positive integer");
    }
    MlpParameters p;
    p.hidden = hidden_json.get<std::size_t>();
    p.outputs = labels.size();
    p.w1 = matrix_rows(require(params, "w1"), "w1", kFrameWidth, p.hidden);
    p.b1 = number_array(require(params, "b1"), "b1", p.hidden);
    p.w2 = matrix_rows(require(params, "w2"), "w2", p.hidden, p.outputs);
    p.b2 = number_array(require(params, "b2"), "b2", p.outputs);
    return GestureModel::make_mlp(std::move(labels), std::move(p), training_ms, preprocessing);
  } catch (const DataError& e) {
    throw ModelLoadError(e.what());
  }
}

void save_model(const GestureModel& model, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write model '" + path.string() + "'");
  out << model_to_json(model) << '\n';
  if (!out) throw Error("write failed for '" + path.string() + "'");
}

GestureModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ModelLoadError("cannot open model '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return model_from_json(buf.str());
}

}  // namespace natcmd
