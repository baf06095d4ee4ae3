#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

namespace pyrolens {

/// Half-open pixel region [x, x + w) x [y, y + h).
struct Box {
  double x = 0.0;
  double y = 0.0;
  double w = 0.0;
  double h = 0.0;

  double right() const { return x + w; }
  double bottom() const { return y + h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  bool operator==(const Box&) const = default;
};

enum class Source { Direct, Cascade };

struct Detection {
  Box box;
  int category = 0;
  double score = 0.0;
  Source source = Source::Direct;

  bool operator==(const Detection&) const = default;
};

inline constexpr double kDefaultNmsIou = 0.5;

double iou(const Box& a, const Box& b);

/// Score descending, then category, x, y ascending (w, h last so the order is total).
bool ranks_before(const Detection& a, const Detection& b);

/// Greedy suppression. A detection survives iff its IoU with every kept detection
/// (of its category, when class_aware) stays below iou_threshold.
std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold = kDefaultNmsIou,
                           bool class_aware = true);

Detection translate(Detection det, double dx, double dy);

/// Intersects the box with [0, width) x [0, height); nothing when the result is empty.
std::optional<Detection> clip_to(Detection det, double width, double height);

// {"category": int, "score": float, "bbox": [x, y, w, h]}; "source" is optional.
nlohmann::ordered_json to_json(const Detection& det, bool with_source = false);
Detection detection_from_json(const nlohmann::json& j);
nlohmann::ordered_json to_json(const std::vector<Detection>& dets, bool with_source = false);
std::vector<Detection> detections_from_json(const nlohmann::json& j);

std::string to_string(Source s);

}  // namespace pyrolens
