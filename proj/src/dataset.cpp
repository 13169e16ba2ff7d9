#include "natcmd/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <istream>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "hashing.hpp"
#include "natcmd/errors.hpp"
#include "text_util.hpp"

namespace natcmd {

using nlohmann::json;

LandmarkFrame::LandmarkFrame(std::span<const double> coords) {
  if (coords.size() != kFrameWidth) {
    throw DataError("landmark frame needs " + std::to_string(kFrameWidth) + " values, got " +
                    std::to_string(coords.size()));
  }
  for (std::size_t i = 0; i < kFrameWidth; ++i) {
    if (!std::isfinite(coords[i])) {
      throw DataError("landmark frame value " + std::to_string(i) + " is not finite");
    }
    coords_[i] = coords[i];
  }
}

LandmarkFrame wrist_centered(const LandmarkFrame& frame) {
  std::array<double, kFrameWidth> out{};
  const auto c = frame.coords();
  for (std::size_t i = 0; i < kFrameWidth; ++i) out[i] = c[i] - c[i % 3];
  return LandmarkFrame(out);
}

LabeledDataset::LabeledDataset(std::vector<LandmarkFrame> frames, std::vector<std::string> labels)
    : frames_(std::move(frames)), labels_(std::move(labels)) {
  if (frames_.size() != labels_.size()) {
    throw DataError("dataset has " + std::to_string(frames_.size()) + " frames but " +
                    std::to_string(labels_.size()) + " labels");
  }
  std::set<std::string> unique(labels_.begin(), labels_.end());
  label_set_.assign(unique.begin(), unique.end());
}

std::vector<std::size_t> LabeledDataset::label_indices() const {
  std::vector<std::size_t> out;
  out.reserve(labels_.size());
  for (const auto& l : labels_) {
    const auto it = std::lower_bound(label_set_.begin(), label_set_.end(), l);
    out.push_back(static_cast<std::size_t>(it - label_set_.begin()));
  }
  return out;
}

const std::vector<std::string>& default_gesture_labels() {
  static const std::vector<std::string> labels = {
      "look_up",  "look_down",   "look_left",     "look_right",    "move_forward",
      "move_back", "move_left",  "move_right",    "two",           "three",
      "four",     "reverse_two", "reverse_three", "reverse_four",  "neutral"};
  return labels;
}

DatasetFormat dataset_format_for(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return DatasetFormat::csv;
  if (ext == ".jsonl" || ext == ".ndjson") return DatasetFormat::jsonl;
  throw ConfigError("cannot infer dataset format from '" + path.string() +
                    "' (expected .csv or .jsonl)");
}

std::string csv_header() {
  std::string h = "label";
  for (std::size_t i = 0; i < kLandmarkCount; ++i) {
    for (const char axis : {'x', 'y', 'z'}) {
      h += ',';
      h += axis;
      h += std::to_string(i);
    }
  }
  return h;
}

namespace {

void check_label_text(const std::string& label) {
  if (label.empty()) throw DataError("empty label");
  if (label.find_first_of(",\n\r\"") != std::string::npos) {
    throw DataError("label '" + label + "' contains a delimiter character");
  }
  if (detail::trim(label).size() != label.size()) {
    throw DataError("label '" + label + "' has surrounding whitespace");
  }
}

LabeledDataset read_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  const auto header = csv_header();
  std::vector<LandmarkFrame> frames;
  std::vector<std::string> labels;
  std::array<double, kFrameWidth> coords{};

  while (std::getline(in, line)) {
    ++line_no;
    const auto text = detail::trim(line);
    if (text.empty()) continue;
    if (!saw_header) {
      const auto cols = detail::split(text, ',');
      if (cols.size() != kFrameWidth + 1) {
        throw ParseError("header has " + std::to_string(cols.size()) + " columns, expected " +
                             std::to_string(kFrameWidth + 1),
                         line_no);
      }
      const auto expected = detail::split(header, ',');
      for (std::size_t i = 0; i < cols.size(); ++i) {
        if (detail::trim(cols[i]) != expected[i]) {
          throw ParseError("unknown header column '" + std::string(cols[i]) + "' (expected '" +
                               std::string(expected[i]) + "')",
                           line_no);
        }
      }
      saw_header = true;
      continue;
    }
    const auto fields = detail::split(text, ',');
    if (fields.size() != kFrameWidth + 1) {
      throw ParseError("row has " + std::to_string(fields.size() - 1) + " coordinates, expected " +
                           std::to_string(kFrameWidth),
                       line_no);
    }
    const auto label = detail::trim(fields[0]);
    if (label.empty()) throw ParseError("empty label", line_no);
    for (std::size_t i = 0; i < kFrameWidth; ++i) {
      const auto v = detail::parse_double(fields[i + 1]);
      if (!v) {
        throw ParseError("non-numeric value '" + std::string(fields[i + 1]) + "' in column " +
                             std::to_string(i + 2),
                         line_no);
      }
      if (!std::isfinite(*v)) throw ParseError("non-finite value in column " + std::to_string(i + 2), line_no);
      coords[i] = *v;
    }
    frames.emplace_back(coords);
    labels.emplace_back(label);
  }
  if (frames.empty()) throw DataError("dataset is empty");
  return LabeledDataset(std::move(frames), std::move(labels));
}

LabeledDataset read_jsonl(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  std::vector<LandmarkFrame> frames;
  std::vector<std::string> labels;
  std::array<double, kFrameWidth> coords{};

  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (!obj.is_object()) throw ParseError("expected a JSON object", line_no);
    for (const auto& [key, _] : obj.items()) {
      if (key != "label" && key != "coords") throw ParseError("unknown field '" + key + "'", line_no);
    }
    const auto label_it = obj.find("label");
    if (label_it == obj.end() || !label_it->is_string()) {
      throw ParseError("missing string field 'label'", line_no);
    }
    const auto coords_it = obj.find("coords");
    if (coords_it == obj.end() || !coords_it->is_array()) {
      throw ParseError("missing array field 'coords'", line_no);
    }
    if (coords_it->size() != kFrameWidth) {
      throw ParseError("coords has " + std::to_string(coords_it->size()) + " values, expected " +
                           std::to_string(kFrameWidth),
                       line_no);
    }
    for (std::size_t i = 0; i < kFrameWidth; ++i) {
      const auto& v = (*coords_it)[i];
      if (!v.is_number()) throw ParseError("non-numeric coordinate " + std::to_string(i), line_no);
      coords[i] = v.get<double>();
    }
    auto label = label_it->get<std::string>();
    if (label.empty()) throw ParseError("empty label", line_no);
    frames.emplace_back(coords);
    labels.push_back(std::move(label));
  }
  if (frames.empty()) throw DataError("dataset is empty");
  return LabeledDataset(std::move(frames), std::move(labels));
}

}  // namespace

LabeledDataset read_landmark_dataset(std::istream& in, DatasetFormat format) {
  return format == DatasetFormat::csv ? read_csv(in) : read_jsonl(in);
}

LabeledDataset load_landmark_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  return read_landmark_dataset(in, format);
}

void write_landmark_dataset(std::ostream& out, const LabeledDataset& ds, DatasetFormat format) {
  if (format == DatasetFormat::csv) {
    out << csv_header() << '\n';
    for (std::size_t n = 0; n < ds.size(); ++n) {
      check_label_text(ds.labels()[n]);
      out << ds.labels()[n];
      for (const double v : ds.frames()[n].coords()) out << ',' << detail::format_double(v);
      out << '\n';
    }
  } else {
    for (std::size_t n = 0; n < ds.size(); ++n) {
      const auto c = ds.frames()[n].coords();
      json obj = {{"label", ds.labels()[n]}, {"coords", std::vector<double>(c.begin(), c.end())}};
      out << obj.dump() << '\n';
    }
  }
}

void save_landmark_dataset(const std::filesystem::path& path, const LabeledDataset& ds,
                           DatasetFormat format) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write dataset '" + path.string() + "'");
  write_landmark_dataset(out, ds, format);
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

DatasetSplit split_dataset(const LabeledDataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ConfigError("train fraction must lie strictly between 0 and 1");
  }
  if (ds.empty()) throw DataError("cannot split an empty dataset");

  const auto idx = ds.label_indices();
  std::vector<std::vector<std::size_t>> by_label(ds.label_set().size());
  for (std::size_t n = 0; n < idx.size(); ++n) by_label[idx[n]].push_back(n);

  std::mt19937_64 rng(detail::mix64(seed));
  std::vector<LandmarkFrame> train_frames, test_frames;
  std::vector<std::string> train_labels, test_labels;
  for (std::size_t k = 0; k < by_label.size(); ++k) {
    auto& members = by_label[k];
    if (members.size() < 2) {
      throw DataError("label '" + ds.label_set()[k] + "' has fewer than 2 frames; cannot stratify");
    }
    std::shuffle(members.begin(), members.end(), rng);
    auto n_train = static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(members.size())));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    for (std::size_t j = 0; j < members.size(); ++j) {
      const auto n = members[j];
      auto& frames = j < n_train ? train_frames : test_frames;
      auto& labels = j < n_train ? train_labels : test_labels;
      frames.push_back(ds.frames()[n]);
      labels.push_back(ds.labels()[n]);
    }
  }
  return {LabeledDataset(std::move(train_frames), std::move(train_labels)),
          LabeledDataset(std::move(test_frames), std::move(test_labels))};
}

OneHotMatrix::OneHotMatrix(std::vector<std::size_t> hot_columns, std::vector<std::string> label_set)
    : hot_(std::move(hot_columns)), label_set_(std::move(label_set)) {
  for (const auto c : hot_) {
    if (c >= label_set_.size()) throw DataError("one-hot column out of range");
  }
}

std::vector<std::vector<int>> OneHotMatrix::dense() const {
  std::vector<std::vector<int>> out(rows(), std::vector<int>(cols(), 0));
  for (std::size_t r = 0; r < rows(); ++r) out[r][hot_[r]] = 1;
  return out;
}

std::vector<std::string> OneHotMatrix::decode() const {
  std::vector<std::string> out;
  out.reserve(rows());
  for (const auto c : hot_) out.push_back(label_set_[c]);
  return out;
}

OneHotMatrix one_hot_encode(std::span<const std::string> labels,
                            std::span<const std::string> label_set) {
  std::map<std::string_view, std::size_t> position;
  for (std::size_t k = 0; k < label_set.size(); ++k) {
    if (!position.emplace(label_set[k], k).second) {
      throw DataError("duplicate label '" + label_set[k] + "' in label set");
    }
  }
  std::vector<std::size_t> hot;
  hot.reserve(labels.size());
  for (const auto& l : labels) {
    const auto it = position.find(l);
    if (it == position.end()) throw DataError("unknown label '" + l + "'");
    hot.push_back(it->second);
  }
  return OneHotMatrix(std::move(hot), std::vector<std::string>(label_set.begin(), label_set.end()));
}

namespace {

void validate(const SyntheticSpec& spec) {
  if (spec.label_set.empty()) throw ConfigError("synthetic label set is empty");
  if (spec.frames_per_label < 1) throw ConfigError("frames_per_label must be at least 1");
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    throw ConfigError("noise_sigma must be finite and non-negative");
  }
  std::set<std::string> seen;
  for (const auto& l : spec.label_set) {
    check_label_text(l);
    if (!seen.insert(l).second) throw ConfigError("duplicate label '" + l + "' in synthetic spec");
  }
}

double distance(const std::array<double, kFrameWidth>& a, const std::array<double, kFrameWidth>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < kFrameWidth; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

std::vector<LandmarkFrame> synthetic_prototypes(const SyntheticSpec& spec) {
  validate(spec);
  // x, y roughly inside the image, z a shallow depth offset.
  std::vector<std::array<double, kFrameWidth>> protos;
  for (const auto& label : spec.label_set) {
    std::mt19937_64 rng(detail::derive_seed(spec.seed, detail::fnv1a64(label)));
    std::uniform_real_distribution<double> xy(0.2, 0.8);
    std::uniform_real_distribution<double> z(-0.1, 0.1);
    std::array<double, kFrameWidth> p{};
    for (std::size_t i = 0; i < kFrameWidth; ++i) p[i] = (i % 3 == 2) ? z(rng) : xy(rng);
    protos.push_back(p);
  }

  if (spec.noise_sigma > 0.0 && protos.size() > 1) {
    double min_dist = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < protos.size(); ++a) {
      for (std::size_t b = a + 1; b < protos.size(); ++b) {
        min_dist = std::min(min_dist, distance(protos[a], protos[b]));
      }
    }
    const double required = 10.0 * spec.noise_sigma;
    if (min_dist == 0.0) throw ConfigError("two labels hash to the same prototype");
    if (min_dist < required) {
      std::array<double, kFrameWidth> centroid{};
      for (const auto& p : protos) {
        for (std::size_t i = 0; i < kFrameWidth; ++i) centroid[i] += p[i] / static_cast<double>(protos.size());
      }
      // Slight overshoot so rounding never lands below the bound.
      const double scale = required / min_dist * (1.0 + 1e-9);
      for (auto& p : protos) {
        for (std::size_t i = 0; i < kFrameWidth; ++i) p[i] = centroid[i] + (p[i] - centroid[i]) * scale;
      }
    }
  }

  std::vector<LandmarkFrame> out;
  out.reserve(protos.size());
  for (const auto& p : protos) out.emplace_back(p);
  return out;
}

LabeledDataset generate_synthetic_dataset(const SyntheticSpec& spec) {
  const auto protos = synthetic_prototypes(spec);
  std::vector<LandmarkFrame> frames;
  std::vector<std::string> labels;
  frames.reserve(protos.size() * spec.frames_per_label);
  labels.reserve(protos.size() * spec.frames_per_label);

  for (std::size_t k = 0; k < protos.size(); ++k) {
    const auto& label = spec.label_set[k];
    std::mt19937_64 rng(detail::derive_seed(spec.seed ^ 0x6e6f697365ULL, detail::fnv1a64(label)));
    std::normal_distribution<double> noise(0.0, 1.0);
    const auto base = protos[k].coords();
    std::array<double, kFrameWidth> coords{};
    for (std::size_t n = 0; n < spec.frames_per_label; ++n) {
      for (std::size_t i = 0; i < kFrameWidth; ++i) {
        coords[i] = spec.noise_sigma > 0.0 ? base[i] + spec.noise_sigma * noise(rng) : base[i];
      }
      frames.emplace_back(coords);
      labels.push_back(label);
    }
  }
  return LabeledDataset(std::move(frames), std::move(labels));
}

}  // namespace natcmd
