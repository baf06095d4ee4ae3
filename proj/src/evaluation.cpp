#include "pyrolens/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <set>
#include <sstream>

#include "pyrolens/format.hpp"

namespace pyrolens {

MatchResult match_detections(const std::vector<Detection>& dets, const std::vector<GroundTruthBox>& gts, double iou_t) {
  if (!(iou_t > 0.0 && iou_t <= 1.0)) throw std::invalid_argument("match iou threshold must lie in (0, 1]");
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ranks_before(dets[a], dets[b]); });

  MatchResult m;
  m.matched.assign(dets.size(), std::nullopt);
  std::vector<bool> taken(gts.size(), false);
  for (const std::size_t i : order) {
    double best = -1.0;
    std::optional<std::size_t> pick;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      if (taken[g] || gts[g].category != dets[i].category) continue;
      const double v = iou(dets[i].box, gts[g].box);
      if (v >= iou_t && v > best) {
        best = v;
        pick = g;
      }
    }
    if (pick) {
      taken[*pick] = true;
      m.matched[i] = pick;
      ++m.tp;
    } else {
      ++m.fp;
    }
  }
  m.fn = gts.size() - m.tp;
  return m;
}

double precision(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp + fp > 0) return static_cast<double>(tp) / static_cast<double>(tp + fp);
  return fn == 0 ? 1.0 : 0.0;
}

double recall(std::size_t tp, std::size_t fp, std::size_t fn) {
  if (tp + fn > 0) return static_cast<double>(tp) / static_cast<double>(tp + fn);
  return fp == 0 ? 1.0 : 0.0;
}

double precision(const MatchResult& m) { return precision(m.tp, m.fp, m.fn); }
double recall(const MatchResult& m) { return recall(m.tp, m.fp, m.fn); }

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

namespace {

struct Scored {
  Detection det;
  bool tp = false;
};

// Matched detections of one category across the dataset, in sweep order.
std::vector<Scored> scored_detections(const Predictions& preds, const GroundTruth& gts, std::optional<int> category,
                                      double iou_t, std::size_t& n_gt) {
  n_gt = 0;
  std::vector<Scored> out;
  static const std::vector<Detection> kNone;
  for (const auto& [image, truth] : gts) {
    std::vector<GroundTruthBox> g;
    for (const auto& t : truth)
      if (!category || t.category == *category) g.push_back(t);
    n_gt += g.size();
    const auto it = preds.find(image);
    const auto& all = it == preds.end() ? kNone : it->second;
    std::vector<Detection> d;
    for (const auto& det : all)
      if (!category || det.category == *category) d.push_back(det);
    const auto m = match_detections(d, g, iou_t);
    for (std::size_t i = 0; i < d.size(); ++i) out.push_back(Scored{d[i], m.matched[i].has_value()});
  }
  std::stable_sort(out.begin(), out.end(), [](const Scored& a, const Scored& b) { return a.det.score > b.det.score; });
  return out;
}

PRCurve sweep(const std::vector<Scored>& scored, std::size_t n_gt) {
  PRCurve curve;
  curve.ground_truths = n_gt;
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < scored.size(); ++i) {
    (scored[i].tp ? tp : fp) += 1;
    const bool last_of_group = i + 1 == scored.size() || scored[i + 1].det.score != scored[i].det.score;
    if (!last_of_group) continue;
    curve.points.push_back(PRPoint{scored[i].det.score, precision(tp, fp, n_gt - tp), recall(tp, fp, n_gt - tp), tp, fp});
  }
  return curve;
}

}  // namespace

PRCurve pr_curve(const Predictions& preds, const GroundTruth& gts, int category, double iou_t) {
  std::size_t n_gt = 0;
  const auto scored = scored_detections(preds, gts, category, iou_t, n_gt);
  return sweep(scored, n_gt);
}

std::optional<double> average_precision(const PRCurve& curve, ApMethod method) {
  if (curve.ground_truths == 0) return std::nullopt;
  if (method == ApMethod::Rectangular) {
    double ap = 0.0, prev_r = 0.0;
    for (const auto& p : curve.points) {
      ap += (p.recall - prev_r) * p.precision;
      prev_r = p.recall;
    }
    return ap;
  }
  // Envelope: best precision at recall >= r.
  std::vector<double> env(curve.points.size());
  double best = 0.0;
  for (std::size_t i = curve.points.size(); i-- > 0;) {
    best = std::max(best, curve.points[i].precision);
    env[i] = best;
  }
  double sum = 0.0;
  for (int k = 0; k <= 100; ++k) {
    const double r = k / 100.0;
    const auto it = std::find_if(curve.points.begin(), curve.points.end(), [&](const PRPoint& p) { return p.recall >= r; });
    if (it != curve.points.end()) sum += env[static_cast<std::size_t>(it - curve.points.begin())];
  }
  return sum / 101.0;
}

std::optional<double> average_precision(const Predictions& preds, const GroundTruth& gts, int category, double iou_t,
                                        ApMethod method) {
  return average_precision(pr_curve(preds, gts, category, iou_t), method);
}

namespace {

std::set<int> gt_categories(const GroundTruth& gts) {
  std::set<int> cats;
  for (const auto& [_, boxes] : gts)
    for (const auto& b : boxes) cats.insert(b.category);
  return cats;
}

}  // namespace

double map_at(const Predictions& preds, const GroundTruth& gts, double iou_t, ApMethod method) {
  const auto cats = gt_categories(gts);
  if (cats.empty()) throw EvaluationError("mAP undefined: no category has ground truth");
  double sum = 0.0;
  for (const int c : cats) sum += *average_precision(preds, gts, c, iou_t, method);
  return sum / static_cast<double>(cats.size());
}

std::vector<double> coco_iou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back((50 + 5 * i) / 100.0);
  return t;
}

double map_range(const Predictions& preds, const GroundTruth& gts, ApMethod method) {
  const auto ts = coco_iou_thresholds();
  double sum = 0.0;
  for (const double t : ts) sum += map_at(preds, gts, t, method);
  return sum / static_cast<double>(ts.size());
}

namespace {

void best_f1_of(const PRCurve& curve, double& best, double& threshold) {
  best = 0.0;
  threshold = 0.0;
  for (const auto& p : curve.points) {
    const double f = f1(p.precision, p.recall);
    if (f > best) {
      best = f;
      threshold = p.threshold;
    }
  }
}

Predictions above(const Predictions& preds, double score_threshold) {
  Predictions out;
  for (const auto& [image, dets] : preds) {
    auto& v = out[image];
    for (const auto& d : dets)
      if (d.score >= score_threshold) v.push_back(d);
  }
  return out;
}

}  // namespace

EvalReport evaluate(const Predictions& preds, const GroundTruth& gts, const EvalConfig& cfg) {
  std::vector<std::string> unknown;
  for (const auto& [image, _] : preds)
    if (!gts.contains(image)) unknown.push_back(image);
  if (!unknown.empty()) {
    std::string msg = "predictions for images without ground truth:";
    for (const auto& u : unknown) msg += " " + u;
    throw EvaluationError(msg);
  }

  EvalReport rep;
  rep.label = cfg.label;
  rep.images = gts.size();
  for (const auto& [_, b] : gts) rep.ground_truths += b.size();
  for (const auto& [_, d] : preds) rep.detections += d.size();

  std::set<int> cats = gt_categories(gts);
  for (const auto& [_, dets] : preds)
    for (const auto& d : dets) cats.insert(d.category);

  const Predictions gated = above(preds, cfg.score_threshold);
  for (const int c : cats) {
    for (const double t : cfg.iou_thresholds) {
      CategoryMetrics m;
      m.category = c;
      m.iou = t;
      m.curve = pr_curve(preds, gts, c, t);
      m.ap = average_precision(m.curve, cfg.method);
      best_f1_of(m.curve, m.best_f1, m.best_f1_threshold);
      for (const auto& [image, truth] : gts) {
        std::vector<GroundTruthBox> g;
        for (const auto& b : truth)
          if (b.category == c) g.push_back(b);
        std::vector<Detection> d;
        if (const auto it = gated.find(image); it != gated.end())
          for (const auto& det : it->second)
            if (det.category == c) d.push_back(det);
        const auto mr = match_detections(d, g, t);
        m.tp += mr.tp;
        m.fp += mr.fp;
        m.fn += mr.fn;
      }
      m.precision = precision(m.tp, m.fp, m.fn);
      m.recall = recall(m.tp, m.fp, m.fn);
      m.f1 = f1(m.precision, m.recall);
      rep.per_category.push_back(std::move(m));
    }
  }

  const bool has_gt = !gt_categories(gts).empty();
  if (has_gt) {
    rep.map50 = map_at(preds, gts, 0.5, cfg.method);
    const auto ts = coco_iou_thresholds();
    double sum = 0.0;
    for (const double t : ts) sum += map_at(preds, gts, t, cfg.method);
    rep.map50_95 = sum / static_cast<double>(ts.size());
  }

  // Pooled point metrics and best F1 at IoU 0.5.
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const auto& [image, truth] : gts) {
    std::vector<Detection> d;
    if (const auto it = gated.find(image); it != gated.end()) d = it->second;
    const auto mr = match_detections(d, truth, 0.5);
    tp += mr.tp;
    fp += mr.fp;
    fn += mr.fn;
  }
  rep.precision = precision(tp, fp, fn);
  rep.recall = recall(tp, fp, fn);
  rep.f1 = f1(rep.precision, rep.recall);
  std::size_t n_gt = 0;
  const auto scored = scored_detections(preds, gts, std::nullopt, 0.5, n_gt);
  const auto pooled = sweep(scored, n_gt);
  best_f1_of(pooled, rep.best_f1, rep.best_f1_threshold);
  if (pooled.points.empty()) rep.best_f1 = rep.f1;
  return rep;
}

namespace {

nlohmann::ordered_json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

std::string fixed(const std::optional<double>& v, int digits = 3) {
  if (!v) return "-";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << *v;
  return os.str();
}

}  // namespace

nlohmann::ordered_json EvalReport::to_json() const {
  nlohmann::ordered_json j;
  j["label"] = label;
  j["images"] = images;
  j["ground_truths"] = ground_truths;
  j["detections"] = detections;
  j["map50"] = optional_number(map50);
  j["map50_95"] = optional_number(map50_95);
  j["precision"] = precision;
  j["recall"] = recall;
  j["f1"] = f1;
  j["best_f1"] = best_f1;
  j["best_f1_threshold"] = best_f1_threshold;
  auto arr = nlohmann::ordered_json::array();
  for (const auto& m : per_category) {
    nlohmann::ordered_json e;
    e["category"] = m.category;
    e["iou"] = m.iou;
    e["tp"] = m.tp;
    e["fp"] = m.fp;
    e["fn"] = m.fn;
    e["precision"] = m.precision;
    e["recall"] = m.recall;
    e["f1"] = m.f1;
    e["ap"] = optional_number(m.ap);
    e["best_f1"] = m.best_f1;
    e["best_f1_threshold"] = m.best_f1_threshold;
    arr.push_back(e);
  }
  j["per_category"] = arr;
  return j;
}

std::string EvalReport::to_text() const {
  std::ostringstream os;
  const int lw = static_cast<int>(std::max<std::size_t>(label.size(), 8)) + 2;
  os << std::left << std::setw(lw) << "Method" << std::setw(10) << "mAP@50" << std::setw(12) << "mAP@50:95"
     << std::setw(10) << "F1-score" << std::setw(11) << "Precision" << "Recall" << '\n';
  os << std::left << std::setw(lw) << label << std::setw(10) << fixed(map50) << std::setw(12) << fixed(map50_95)
     << std::setw(10) << fixed(best_f1) << std::setw(11) << fixed(precision) << fixed(recall) << '\n';
  if (!per_category.empty()) {
    os << '\n'
       << std::left << std::setw(10) << "Category" << std::setw(7) << "IoU" << std::setw(7) << "TP" << std::setw(7)
       << "FP" << std::setw(7) << "FN" << std::setw(11) << "Precision" << std::setw(8) << "Recall" << std::setw(8)
       << "F1" << "AP" << '\n';
    for (const auto& m : per_category) {
      os << std::left << std::setw(10) << m.category << std::setw(7) << fixed(m.iou, 2) << std::setw(7) << m.tp
         << std::setw(7) << m.fp << std::setw(7) << m.fn << std::setw(11) << fixed(m.precision) << std::setw(8)
         << fixed(m.recall) << std::setw(8) << fixed(m.f1) << fixed(m.ap) << '\n';
    }
  }
  return os.str();
}

std::string EvalReport::curve_csv(const PRCurve& curve) {
  std::string out = "threshold,precision,recall\n";
  for (const auto& p : curve.points)
    out += format_double(p.threshold) + "," + format_double(p.precision) + "," + format_double(p.recall) + "\n";
  return out;
}

}  // namespace pyrolens
