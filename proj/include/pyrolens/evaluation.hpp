#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "pyrolens/boxes.hpp"

namespace pyrolens {

struct GroundTruthBox {
  int category = 0;
  Box box;

  bool operator==(const GroundTruthBox&) const = default;
};

/// Keyed by image identifier.
using GroundTruth = std::map<std::string, std::vector<GroundTruthBox>>;
using Predictions = std::map<std::string, std::vector<Detection>>;

struct MatchResult {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  /// Per detection, in input order: index of the matched ground truth.
  std::vector<std::optional<std::size_t>> matched;
};

/// Greedy matching in score order (ties as in NMS). Each detection takes the
/// unmatched same-category ground truth of highest IoU, provided IoU >= iou_t.
MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts, double iou_t);

// Zero denominators: a ratio with nothing on either side is 1, otherwise 0.
double precision(const MatchResult& m);
double recall(const MatchResult& m);
double precision(std::size_t tp, std::size_t fp, std::size_t fn);
double recall(std::size_t tp, std::size_t fp, std::size_t fn);
double f1(double p, double r);

struct PRPoint {
  double threshold = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  std::size_t tp = 0;
  std::size_t fp = 0;
};

/// One point per distinct confidence, highest first.
struct PRCurve {
  std::vector<PRPoint> points;
  std::size_t ground_truths = 0;
};

enum class ApMethod {
  /// Sum of (r(k) - r(k-1)) * p(k) over the sweep, no interpolation.
  Rectangular,
  /// 101-point interpolated precision envelope, for comparison with COCO tooling.
  Coco101,
};

PRCurve pr_curve(const Predictions& preds, const GroundTruth& gts, int category, double iou_t);

/// Nothing when the category has no ground truth.
std::optional<double> average_precision(const PRCurve& curve, ApMethod method = ApMethod::Rectangular);
std::optional<double> average_precision(const Predictions& preds, const GroundTruth& gts, int category, double iou_t,
                                        ApMethod method = ApMethod::Rectangular);

class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean AP over categories that have ground truth. EvaluationError when there are none.
double map_at(const Predictions& preds, const GroundTruth& gts, double iou_t, ApMethod method = ApMethod::Rectangular);
/// Mean of map_at over IoU 0.50, 0.55, ..., 0.95.
double map_range(const Predictions& preds, const GroundTruth& gts, ApMethod method = ApMethod::Rectangular);

std::vector<double> coco_iou_thresholds();

struct EvalConfig {
  std::vector<double> iou_thresholds = coco_iou_thresholds();
  ApMethod method = ApMethod::Rectangular;
  /// Detections below this score are ignored for the point precision/recall/F1.
  double score_threshold = 0.0;
  std::string label = "pyrolens";
};

struct CategoryMetrics {
  int category = 0;
  double iou = 0.5;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> ap;
  double best_f1 = 0.0;
  double best_f1_threshold = 0.0;
  PRCurve curve;
};

struct EvalReport {
  std::string label;
  std::size_t images = 0;
  std::size_t ground_truths = 0;
  std::size_t detections = 0;
  /// One entry per (category, IoU threshold), category-major.
  std::vector<CategoryMetrics> per_category;
  std::optional<double> map50;
  std::optional<double> map50_95;
  /// Pooled over categories at IoU 0.5.
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double best_f1 = 0.0;
  double best_f1_threshold = 0.0;

  nlohmann::ordered_json to_json() const;
  /// Aligned table: Method, mAP@50, mAP@50:95, F1-score, then per-category rows.
  std::string to_text() const;
  /// threshold,precision,recall rows of one curve.
  static std::string curve_csv(const PRCurve& curve);
};

/// EvaluationError when predictions name images missing from the ground truth.
/// Ground-truth images without predictions count as empty predictions.
EvalReport evaluate(const Predictions& preds, const GroundTruth& gts, const EvalConfig& cfg = {});

}  // namespace pyrolens
