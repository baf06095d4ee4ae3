#include "pyrolens/boxes.hpp"

#include <algorithm>
#include <stdexcept>
#include <tuple>

namespace pyrolens {

double iou(const Box& a, const Box& b) {
  const double iw = std::min(a.right(), b.right()) - std::max(a.x, b.x);
  const double ih = std::min(a.bottom(), b.bottom()) - std::max(a.y, b.y);
  if (iw <= 0.0 || ih <= 0.0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

bool ranks_before(const Detection& a, const Detection& b) {
  if (a.score != b.score) return a.score > b.score;
  return std::tie(a.category, a.box.x, a.box.y, a.box.w, a.box.h) <
         std::tie(b.category, b.box.x, b.box.y, b.box.w, b.box.h);
}

std::vector<Detection> nms(std::vector<Detection> dets, double iou_threshold, bool class_aware) {
  if (iou_threshold < 0.0 || iou_threshold > 1.0) throw std::invalid_argument("nms: iou threshold outside [0, 1]");
  std::stable_sort(dets.begin(), dets.end(), ranks_before);
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const Detection& d : dets) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
      return (!class_aware || k.category == d.category) && iou(k.box, d.box) >= iou_threshold;
    });
    if (!suppressed) kept.push_back(d);
  }
  return kept;
}

Detection translate(Detection det, double dx, double dy) {
  det.box.x += dx;
  det.box.y += dy;
  return det;
}

std::optional<Detection> clip_to(Detection det, double width, double height) {
  const double x0 = std::max(det.box.x, 0.0);
  const double y0 = std::max(det.box.y, 0.0);
  const double x1 = std::min(det.box.right(), width);
  const double y1 = std::min(det.box.bottom(), height);
  if (x1 <= x0 || y1 <= y0) return std::nullopt;
  det.box = Box{x0, y0, x1 - x0, y1 - y0};
  return det;
}

std::string to_string(Source s) { return s == Source::Direct ? "direct" : "cascade"; }

nlohmann::ordered_json to_json(const Detection& det, bool with_source) {
  nlohmann::ordered_json j;
  j["category"] = det.category;
  j["score"] = det.score;
  j["bbox"] = {det.box.x, det.box.y, det.box.w, det.box.h};
  if (with_source) j["source"] = to_string(det.source);
  return j;
}

Detection detection_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw std::invalid_argument("detection must be a JSON object");
  const auto& cat = j.at("category");
  const auto& score = j.at("score");
  const auto& bbox = j.at("bbox");
  if (!cat.is_number_integer() || cat.get<long long>() < 0) throw std::invalid_argument("detection category must be a non-negative integer");
  if (!score.is_number()) throw std::invalid_argument("detection score must be a number");
  if (!bbox.is_array() || bbox.size() != 4) throw std::invalid_argument("detection bbox must be [x, y, w, h]");
  for (const auto& v : bbox) {
    if (!v.is_number()) throw std::invalid_argument("detection bbox entries must be numbers");
  }
  Detection d;
  d.category = cat.get<int>();
  d.score = score.get<double>();
  if (!(d.score >= 0.0 && d.score <= 1.0)) throw std::invalid_argument("detection score outside [0, 1]");
  d.box = Box{bbox[0].get<double>(), bbox[1].get<double>(), bbox[2].get<double>(), bbox[3].get<double>()};
  if (!d.box.valid()) throw std::invalid_argument("detection bbox must have positive width and height");
  if (const auto it = j.find("source"); it != j.end()) {
    const auto s = it->get<std::string>();
    if (s == "direct") d.source = Source::Direct;
    else if (s == "cascade") d.source = Source::Cascade;
    else throw std::invalid_argument("detection source must be 'direct' or 'cascade'");
  }
  return d;
}

nlohmann::ordered_json to_json(const std::vector<Detection>& dets, bool with_source) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& d : dets) arr.push_back(to_json(d, with_source));
  return arr;
}

std::vector<Detection> detections_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("detections must be a JSON array");
  std::vector<Detection> out;
  out.reserve(j.size());
  for (const auto& e : j) out.push_back(detection_from_json(e));
  return out;
}

}  // namespace pyrolens
