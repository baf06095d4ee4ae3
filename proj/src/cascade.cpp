#include "pyrolens/cascade.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <stdexcept>

#include "pyrolens/parallel.hpp"

namespace pyrolens {

void CascadeConfig::validate() const {
  if (!(tau_detect >= 0.0 && tau_detect <= 1.0)) throw std::invalid_argument("tau_detect must lie in [0, 1]");
  if (!(tau_classify >= 0.0 && tau_classify <= 1.0)) throw std::invalid_argument("tau_classify must lie in [0, 1]");
  if (!(nms_iou >= 0.0 && nms_iou <= 1.0)) throw std::invalid_argument("nms_iou must lie in [0, 1]");
  if (tiles.patch_width < 1 || tiles.patch_height < 1) throw std::invalid_argument("patch size must be positive");
  if (!(tiles.overlap_x >= 0.0 && tiles.overlap_x < 1.0) || !(tiles.overlap_y >= 0.0 && tiles.overlap_y < 1.0))
    throw std::invalid_argument("overlap must lie in [0, 1)");
  if (min_crop < 1) throw std::invalid_argument("min_crop must be positive");
  edges.validate();
}

nlohmann::ordered_json CascadeConfig::to_json() const {
  nlohmann::ordered_json j;
  j["tau_detect"] = tau_detect;
  j["tau_classify"] = tau_classify;
  j["use_patching"] = use_patching;
  j["patch"] = {tiles.patch_width, tiles.patch_height};
  j["overlap"] = {tiles.overlap_x, tiles.overlap_y};
  j["nms_iou"] = nms_iou;
  j["drop_no_fire"] = drop_no_fire;
  j["min_crop"] = min_crop;
  j["jobs"] = jobs;
  auto& e = j["edges"];
  e["sigma"] = edges.sigma;
  e["ksize"] = edges.ksize;
  e["canny_low"] = edges.canny_low;
  e["canny_high"] = edges.canny_high;
  e["weight_laplacian"] = edges.weight_laplacian;
  e["weight_canny"] = edges.weight_canny;
  e["order"] = to_string(edges.order);
  e["operator"] = to_string(edges.edge_operator);
  return j;
}

CascadeConfig CascadeConfig::from_json(const nlohmann::json& j) {
  CascadeConfig c;
  c.tau_detect = j.value("tau_detect", c.tau_detect);
  c.tau_classify = j.value("tau_classify", c.tau_classify);
  c.use_patching = j.value("use_patching", c.use_patching);
  if (j.contains("patch")) {
    c.tiles.patch_width = j["patch"].at(0).get<Eigen::Index>();
    c.tiles.patch_height = j["patch"].at(1).get<Eigen::Index>();
  }
  if (j.contains("overlap")) {
    c.tiles.overlap_x = j["overlap"].at(0).get<double>();
    c.tiles.overlap_y = j["overlap"].at(1).get<double>();
  }
  c.nms_iou = j.value("nms_iou", c.nms_iou);
  c.drop_no_fire = j.value("drop_no_fire", c.drop_no_fire);
  c.min_crop = j.value("min_crop", c.min_crop);
  c.jobs = j.value("jobs", c.jobs);
  if (j.contains("edges")) {
    const auto& e = j["edges"];
    std::string text;
    for (const auto& [k, v] : e.items()) {
      text += k + " = " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
    }
    c.edges = EdgeConfig::from_text(text);
  }
  c.validate();
  return c;
}

Region crop_region(const Box& box, Eigen::Index width, Eigen::Index height) {
  const auto x0 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(box.x)), 0, width);
  const auto y0 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::floor(box.y)), 0, height);
  const auto x1 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(box.right())), 0, width);
  const auto y1 = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::ceil(box.bottom())), 0, height);
  return Region{x0, y0, std::max<Eigen::Index>(x1 - x0, 0), std::max<Eigen::Index>(y1 - y0, 0)};
}

FrameResult run_frame(const Image& img, Detector& det, Classifier& cls, const CascadeConfig& cfg) {
  cfg.validate();
  const Eigen::Index w = width_of(img), h = height_of(img);

  std::vector<Detection> stage_one;
  if (cfg.use_patching) {
    const TilePlan plan = plan_tiles(w, h, cfg.tiles);
    stage_one = patched_detect(img, det, plan, PatchOptions{cfg.nms_iou, true, cfg.jobs});
  } else {
    for (const auto& d : detect(det, img)) {
      if (auto c = clip_to(d, static_cast<double>(w), static_cast<double>(h))) stage_one.push_back(*c);
    }
  }

  const std::uint64_t frame = fingerprint(img);
  std::optional<GrayImage> gray;
  enum class Verdict { Direct, Cascade, Discard };
  std::vector<Verdict> verdicts(stage_one.size(), Verdict::Discard);
  std::vector<Detection> accepted(stage_one.size());

  std::vector<std::size_t> low;
  for (std::size_t i = 0; i < stage_one.size(); ++i) {
    if (stage_one[i].score > cfg.tau_detect) {
      verdicts[i] = Verdict::Direct;
      accepted[i] = stage_one[i];
      accepted[i].source = Source::Direct;
    } else {
      low.push_back(i);
    }
  }
  if (!low.empty()) gray = to_gray(img);

  const auto width = std::min<std::size_t>(cfg.jobs, static_cast<std::size_t>(cls.capabilities().capacity));
  parallel_for(low.size(), width, [&](std::size_t k) {
    const std::size_t i = low[k];
    const Region r = crop_region(stage_one[i].box, w, h);
    if (r.w < cfg.min_crop || r.h < cfg.min_crop) return;
    const GrayImage enhanced = edge_enhance(crop(*gray, r), cfg.edges);
    const Classification c = classify(cls, enhanced, RegionHint{frame, r});
    if (c.score < cfg.tau_classify) return;
    if (cfg.drop_no_fire && c.category == kNoFire) return;
    verdicts[i] = Verdict::Cascade;
    accepted[i] = stage_one[i];
    accepted[i].category = c.category;
    accepted[i].score = c.score;
    accepted[i].source = Source::Cascade;
  });

  FrameResult result;
  std::vector<Detection> keep;
  for (std::size_t i = 0; i < stage_one.size(); ++i) {
    switch (verdicts[i]) {
      case Verdict::Direct: ++result.counters.direct; keep.push_back(accepted[i]); break;
      case Verdict::Cascade: ++result.counters.cascade; keep.push_back(accepted[i]); break;
      case Verdict::Discard: ++result.counters.discarded; break;
    }
  }
  result.detections = nms(std::move(keep), cfg.nms_iou, true);
  return result;
}

void run_sequence(const FrameSource& frames, Detector& det, Classifier& cls, const CascadeConfig& cfg,
                  const SequenceOptions& options, const std::function<void(const FrameOutcome&)>& sink) {
  cfg.validate();
  const std::size_t n = frames.names.size();
  std::mutex mutex;
  std::map<std::size_t, FrameOutcome> ready;
  std::size_t next_emit = 0;
  bool stop = false;

  auto process = [&](std::size_t i) {
    {
      std::lock_guard lock(mutex);
      if (stop) return;
    }
    FrameOutcome out;
    out.index = i;
    out.name = frames.names[i];
    try {
      out.result = run_frame(frames.load(i), det, cls, cfg);
    } catch (const std::exception& e) {
      out.result = FrameError{i, frames.names[i], "frame " + std::to_string(i) + " (" + frames.names[i] + "): " + e.what()};
    }
    std::unique_lock lock(mutex);
    ready.emplace(i, std::move(out));
    // Emission happens on whichever worker completes the next frame in order.
    while (!stop) {
      const auto it = ready.find(next_emit);
      if (it == ready.end()) break;
      const bool failed = !it->second.ok();
      sink(it->second);
      ready.erase(it);
      ++next_emit;
      if (failed && options.fail_fast) stop = true;
    }
  };
  parallel_for(n, options.frame_jobs, process);
}

std::vector<FrameOutcome> run_sequence(const FrameSource& frames, Detector& det, Classifier& cls,
                                       const CascadeConfig& cfg, const SequenceOptions& options) {
  std::vector<FrameOutcome> out;
  run_sequence(frames, det, cls, cfg, options, [&](const FrameOutcome& o) { out.push_back(o); });
  return out;
}

nlohmann::ordered_json to_json(const FrameOutcome& outcome) {
  nlohmann::ordered_json j;
  j["frame"] = outcome.name;
  if (const auto* r = std::get_if<FrameResult>(&outcome.result)) {
    j["detections"] = to_json(r->detections, true);
    j["counters"] = {{"direct", r->counters.direct}, {"cascade", r->counters.cascade},
                     {"discarded", r->counters.discarded}};
  } else {
    j["error"] = std::get<FrameError>(outcome.result).message;
  }
  return j;
}

}  // namespace pyrolens
