#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pyrolens/backends.hpp"
#include "pyrolens/boxes.hpp"
#include "pyrolens/imaging.hpp"
#include "pyrolens/tiling.hpp"

namespace pyrolens {

struct CascadeConfig {
  /// Stage-one detections scoring strictly above this are accepted directly.
  double tau_detect = 0.6;
  /// Classifier scores strictly below this discard the box.
  double tau_classify = 0.6;
  bool use_patching = false;
  TileParams tiles;
  double nms_iou = kDefaultNmsIou;
  EdgeConfig edges;
  /// Drop cascade detections the classifier relabels as no-fire.
  bool drop_no_fire = true;
  /// Boxes whose clipped crop is narrower or shorter than this are discarded unclassified.
  Eigen::Index min_crop = 2;
  /// Concurrent backend calls within a frame.
  std::size_t jobs = 1;

  void validate() const;
  nlohmann::ordered_json to_json() const;
  static CascadeConfig from_json(const nlohmann::json& j);
};

struct FrameCounters {
  std::size_t direct = 0;
  std::size_t cascade = 0;
  std::size_t discarded = 0;

  bool operator==(const FrameCounters&) const = default;
};

struct FrameResult {
  std::vector<Detection> detections;
  /// Tallied before the final NMS; they sum to the stage-one detection count.
  FrameCounters counters;

  bool operator==(const FrameResult&) const = default;
};

/// Integer pixel region covering the box, clipped to the image (may be empty).
Region crop_region(const Box& box, Eigen::Index width, Eigen::Index height);

FrameResult run_frame(const Image& img, Detector& det, Classifier& cls, const CascadeConfig& cfg);

/// Frames addressed by index; `load` may throw for unreadable frames.
struct FrameSource {
  std::vector<std::string> names;
  std::function<Image(std::size_t)> load;
};

struct FrameError {
  std::size_t index = 0;
  std::string name;
  std::string message;
};

struct FrameOutcome {
  std::size_t index = 0;
  std::string name;
  std::variant<FrameResult, FrameError> result;

  bool ok() const { return std::holds_alternative<FrameResult>(result); }
};

struct SequenceOptions {
  /// Frames processed concurrently; outcomes are still delivered in input order.
  std::size_t frame_jobs = 1;
  bool fail_fast = false;
};

/// Processes every frame and hands outcomes to `sink` in input order. With
/// fail_fast, processing stops after the first failed frame has been delivered.
void run_sequence(const FrameSource& frames, Detector& det, Classifier& cls, const CascadeConfig& cfg,
                  const SequenceOptions& options, const std::function<void(const FrameOutcome&)>& sink);

std::vector<FrameOutcome> run_sequence(const FrameSource& frames, Detector& det, Classifier& cls,
                                       const CascadeConfig& cfg, const SequenceOptions& options = {});

/// One JSON line: {"frame":…,"detections":[…],"counters":{…}} or {"frame":…,"error":…}.
nlohmann::ordered_json to_json(const FrameOutcome& outcome);

}  // namespace pyrolens
