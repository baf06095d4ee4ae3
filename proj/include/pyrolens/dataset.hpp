#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pyrolens/boxes.hpp"
#include "pyrolens/evaluation.hpp"
#include "pyrolens/imaging.hpp"

namespace pyrolens {

/// One line of a YOLO label file: category and centre-based normalized box.
struct LabelRecord {
  int category = 0;
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  bool operator==(const LabelRecord&) const = default;
};

class LabelParseError : public std::runtime_error {
 public:
  LabelParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

std::vector<LabelRecord> parse_labels(std::string_view text);
/// "category cx cy w h\n" per record, shortest round-trip decimals.
std::string serialize_labels(const std::vector<LabelRecord>& records);

/// Pixel box rounded and clipped to the image; nothing if it collapses to zero area.
std::optional<GroundTruthBox> denormalize(const LabelRecord& rec, Eigen::Index img_w, Eigen::Index img_h);
LabelRecord normalize(const GroundTruthBox& box, Eigen::Index img_w, Eigen::Index img_h);

struct DatasetEntry {
  std::filesystem::path image;
  std::optional<std::filesystem::path> labels;
};

/// A split laid out as <root>/images and <root>/labels with matching basenames.
struct DatasetIndex {
  std::string split;
  std::filesystem::path root;
  /// Sorted by image path.
  std::vector<DatasetEntry> entries;
  std::size_t images = 0;
  std::size_t boxes = 0;
};

DatasetIndex index_dataset(const std::filesystem::path& root, std::string split = "");

/// Ground truth keyed by image stem. Records that vanish after rounding are
/// skipped and described in `warnings`.
GroundTruth load_ground_truth(const DatasetIndex& index, std::vector<std::string>* warnings = nullptr);

struct ConversionReport {
  std::size_t converted = 0;
  std::size_t labels_copied = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // path, reason

  nlohmann::ordered_json to_json() const;
};

/// Converts every image under `src` (or `src`/images) to grayscale under `dst`,
/// keeping basenames; label files are copied byte for byte.
ConversionReport convert_dataset_gray(const std::filesystem::path& src, const std::filesystem::path& dst);

struct NegativeSampling {
  /// No-fire crops per fire crop; images without labels contribute round(ratio).
  double ratio = 1.0;
  double max_iou = 0.1;
  std::uint64_t seed = 0;
  int max_attempts = 200;
};

struct CropReport {
  std::size_t fire = 0;
  std::size_t no_fire = 0;
  std::size_t skipped_small = 0;
  std::size_t negatives_unplaced = 0;
  std::vector<std::pair<std::string, std::string>> failures;

  nlohmann::ordered_json to_json() const;
};

/// Writes edge-enhanced positive crops to `fire_dir` and sampled background
/// crops to `no_fire_dir`. Negatives keep IoU below max_iou against every
/// ground truth of their image and draw sizes from the positive boxes.
CropReport build_crops(const DatasetIndex& index, const EdgeConfig& edges, const std::filesystem::path& fire_dir,
                       const std::filesystem::path& no_fire_dir, const NegativeSampling& sampling = {});

struct SplitStats {
  std::string split;
  std::size_t images = 0;
  std::size_t boxes = 0;
};

struct CropStats {
  std::string split;
  std::size_t fire = 0;
  std::size_t no_fire = 0;
};

SplitStats dataset_stats(const DatasetIndex& index);
CropStats crop_stats(const std::filesystem::path& root, std::string split);

/// Two-block table: detection splits (Images, Bbox) then classification splits (Fire, No Fire).
std::string format_stats_table(const std::vector<SplitStats>& detect, const std::vector<CropStats>& classify);

}  // namespace pyrolens
