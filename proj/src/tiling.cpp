#include "pyrolens/tiling.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pyrolens/parallel.hpp"

namespace pyrolens {

std::vector<Eigen::Index> tile_offsets(Eigen::Index extent, Eigen::Index patch, double overlap) {
  if (extent < 1 || patch < 1) throw std::invalid_argument("tile dimensions must be positive");
  if (!(overlap >= 0.0 && overlap < 1.0)) throw std::invalid_argument("tile overlap must lie in [0, 1)");
  const Eigen::Index p = std::min(patch, extent);
  const auto stride = std::max<Eigen::Index>(1, std::llround(static_cast<double>(p) * (1.0 - overlap)));
  std::vector<Eigen::Index> offsets;
  for (Eigen::Index o = 0; o + p < extent; o += stride) offsets.push_back(o);
  if (offsets.empty() || offsets.back() != extent - p) offsets.push_back(extent - p);
  return offsets;
}

TilePlan plan_tiles(Eigen::Index img_w, Eigen::Index img_h, Eigen::Index patch_w, Eigen::Index patch_h,
                    double overlap_x, double overlap_y) {
  TilePlan plan;
  plan.image_width = img_w;
  plan.image_height = img_h;
  plan.patch_width = patch_w;
  plan.patch_height = patch_h;
  plan.overlap_x = overlap_x;
  plan.overlap_y = overlap_y;
  const auto xs = tile_offsets(img_w, patch_w, overlap_x);
  const auto ys = tile_offsets(img_h, patch_h, overlap_y);
  const Eigen::Index pw = std::min(patch_w, img_w), ph = std::min(patch_h, img_h);
  for (const auto y : ys)
    for (const auto x : xs) plan.tiles.push_back(Tile{x, y, pw, ph});
  return plan;
}

TilePlan plan_tiles(Eigen::Index img_w, Eigen::Index img_h, const TileParams& params) {
  return plan_tiles(img_w, img_h, params.patch_width, params.patch_height, params.overlap_x, params.overlap_y);
}

nlohmann::ordered_json TilePlan::to_json() const {
  nlohmann::ordered_json j;
  j["image"] = {image_width, image_height};
  j["patch"] = {patch_width, patch_height};
  j["overlap"] = {overlap_x, overlap_y};
  auto arr = nlohmann::ordered_json::array();
  for (const auto& t : tiles) arr.push_back({t.x0, t.y0, t.w, t.h});
  j["tiles"] = arr;
  return j;
}

namespace {

void check_inside(const Region& r, Eigen::Index w, Eigen::Index h) {
  if (r.w < 1 || r.h < 1 || r.x0 < 0 || r.y0 < 0 || r.x0 + r.w > w || r.y0 + r.h > h)
    throw std::out_of_range("region (" + std::to_string(r.x0) + "," + std::to_string(r.y0) + "," +
                            std::to_string(r.w) + "," + std::to_string(r.h) + ") outside " + std::to_string(w) +
                            "x" + std::to_string(h) + " image");
}

}  // namespace

GrayImage crop(const GrayImage& img, const Region& r) {
  check_inside(r, img.cols(), img.rows());
  return img.block(r.y0, r.x0, r.h, r.w);
}

RgbImage crop(const RgbImage& img, const Region& r) {
  check_inside(r, img.width(), img.height());
  return RgbImage(img.samples().block(r.y0, 3 * r.x0, r.h, 3 * r.w));
}

Image crop(const Image& img, const Region& r) {
  return std::visit([&](const auto& i) -> Image { return crop(i, r); }, img);
}

void embed(GrayImage& img, const GrayImage& patch, Eigen::Index x0, Eigen::Index y0) {
  check_inside(Region{x0, y0, patch.cols(), patch.rows()}, img.cols(), img.rows());
  img.block(y0, x0, patch.rows(), patch.cols()) = patch;
}

void embed(RgbImage& img, const RgbImage& patch, Eigen::Index x0, Eigen::Index y0) {
  check_inside(Region{x0, y0, patch.width(), patch.height()}, img.width(), img.height());
  img.samples().block(y0, 3 * x0, patch.height(), 3 * patch.width()) = patch.samples();
}

std::vector<Detection> patched_detect(const Image& img, Detector& detector, const TilePlan& plan,
                                      const PatchOptions& options) {
  const Eigen::Index w = width_of(img), h = height_of(img);
  if (plan.image_width != w || plan.image_height != h)
    throw std::invalid_argument("tile plan is for " + std::to_string(plan.image_width) + "x" +
                                std::to_string(plan.image_height) + ", image is " + std::to_string(w) + "x" +
                                std::to_string(h));
  const std::uint64_t frame = fingerprint(img);
  std::vector<std::vector<Detection>> per_tile(plan.tiles.size());
  const auto width = std::min<std::size_t>(options.jobs, static_cast<std::size_t>(detector.capabilities().capacity));

  parallel_for(plan.tiles.size(), width, [&](std::size_t i) {
    const Tile& t = plan.tiles[i];
    std::vector<Detection> local;
    try {
      local = detect(detector, crop(img, t), RegionHint{frame, t});
    } catch (const BackendError& e) {
      throw TileFailure(t, "tile (" + std::to_string(t.x0) + "," + std::to_string(t.y0) + "," + std::to_string(t.w) +
                               "," + std::to_string(t.h) + "): " + e.what(),
                        e.payload());
    }
    for (const auto& d : local) {
      if (auto g = clip_to(translate(d, static_cast<double>(t.x0), static_cast<double>(t.y0)),
                           static_cast<double>(w), static_cast<double>(h))) {
        per_tile[i].push_back(*g);
      }
    }
  });

  std::vector<Detection> merged;
  for (auto& v : per_tile) merged.insert(merged.end(), v.begin(), v.end());
  std::sort(merged.begin(), merged.end(), ranks_before);
  return nms(std::move(merged), options.nms_iou, options.class_aware);
}

}  // namespace pyrolens
