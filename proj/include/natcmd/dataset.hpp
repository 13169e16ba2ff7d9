#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace natcmd {

inline constexpr std::size_t kLandmarkCount = 21;
inline constexpr std::size_t kFrameWidth = kLandmarkCount * 3;

/// One hand observation: (x, y, z) for landmarks 0..20, always finite.
class LandmarkFrame {
 public:
  LandmarkFrame() { coords_.fill(0.0); }
  /// Throws DataError unless `coords` holds exactly 63 finite values.
  explicit LandmarkFrame(std::span<const double> coords);

  std::span<const double, kFrameWidth> coords() const noexcept { return coords_; }
  double operator[](std::size_t i) const noexcept { return coords_[i]; }

  friend bool operator==(const LandmarkFrame&, const LandmarkFrame&) = default;

 private:
  std::array<double, kFrameWidth> coords_;
};

/// Translates the frame so that landmark 0 (the wrist) sits at the origin.
LandmarkFrame wrist_centered(const LandmarkFrame& frame);

/// Frames with one label each. The label set is derived: unique and sorted.
class LabeledDataset {
 public:
  LabeledDataset() = default;
  LabeledDataset(std::vector<LandmarkFrame> frames, std::vector<std::string> labels);

  const std::vector<LandmarkFrame>& frames() const noexcept { return frames_; }
  const std::vector<std::string>& labels() const noexcept { return labels_; }
  const std::vector<std::string>& label_set() const noexcept { return label_set_; }

  std::size_t size() const noexcept { return frames_.size(); }
  bool empty() const noexcept { return frames_.empty(); }

  /// Position of each frame's label within label_set().
  std::vector<std::size_t> label_indices() const;

  friend bool operator==(const LabeledDataset&, const LabeledDataset&) = default;

 private:
  std::vector<LandmarkFrame> frames_;
  std::vector<std::string> labels_;
  std::vector<std::string> label_set_;
};

/// The 15 gestures used when no explicit label set is configured.
const std::vector<std::string>& default_gesture_labels();

enum class DatasetFormat { csv, jsonl };

/// csv for `.csv`, jsonl for `.jsonl`/`.ndjson`; throws ConfigError otherwise.
DatasetFormat dataset_format_for(const std::filesystem::path& path);

LabeledDataset read_landmark_dataset(std::istream& in, DatasetFormat format);
LabeledDataset load_landmark_dataset(const std::filesystem::path& path, DatasetFormat format);

void write_landmark_dataset(std::ostream& out, const LabeledDataset& ds, DatasetFormat format);
void save_landmark_dataset(const std::filesystem::path& path, const LabeledDataset& ds,
                           DatasetFormat format);

/// The CSV header line (without newline): label,x0,y0,z0,...,x20,y20,z20.
std::string csv_header();

struct DatasetSplit {
  LabeledDataset train;
  LabeledDataset test;
};

/// Stratified per-label split. Each label keeps floor(fraction * n) frames for
/// training (clamped to [1, n-1]) and the rest for testing; the within-label
/// shuffle depends only on `seed`.
DatasetSplit split_dataset(const LabeledDataset& ds, double train_fraction, std::uint64_t seed);

/// N x K binary matrix with exactly one 1 per row.
class OneHotMatrix {
 public:
  OneHotMatrix(std::vector<std::size_t> hot_columns, std::vector<std::string> label_set);

  std::size_t rows() const noexcept { return hot_.size(); }
  std::size_t cols() const noexcept { return label_set_.size(); }
  int at(std::size_t row, std::size_t col) const { return hot_.at(row) == col ? 1 : 0; }
  std::size_t hot_column(std::size_t row) const { return hot_.at(row); }
  const std::vector<std::string>& label_set() const noexcept { return label_set_; }

  std::vector<std::vector<int>> dense() const;
  std::vector<std::string> decode() const;

 private:
  std::vector<std::size_t> hot_;
  std::vector<std::string> label_set_;
};

/// Throws DataError for a label outside `label_set`.
OneHotMatrix one_hot_encode(std::span<const std::string> labels,
                            std::span<const std::string> label_set);

struct SyntheticSpec {
  std::vector<std::string> label_set = default_gesture_labels();
  std::size_t frames_per_label = 1000;
  double noise_sigma = 0.01;
  std::uint64_t seed = 42;
};

/// Per-label class centres, in `spec.label_set` order. Distinct labels are at
/// least 10 * noise_sigma apart.
std::vector<LandmarkFrame> synthetic_prototypes(const SyntheticSpec& spec);

/// Prototype plus i.i.d. Gaussian noise, frames_per_label frames per label,
/// grouped by label in `spec.label_set` order.
LabeledDataset generate_synthetic_dataset(const SyntheticSpec& spec);

}  // namespace natcmd
