#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "json.hpp"
#include "pyrolens/backends.hpp"
#include "pyrolens/boxes.hpp"
#include "pyrolens/raster.hpp"

namespace pyrolens {

using Tile = Region;

struct TilePlan {
  Eigen::Index image_width = 0;
  Eigen::Index image_height = 0;
  Eigen::Index patch_width = 0;
  Eigen::Index patch_height = 0;
  double overlap_x = 0.0;
  double overlap_y = 0.0;
  /// Row-major by (y0, x0).
  std::vector<Tile> tiles;

  nlohmann::ordered_json to_json() const;
};

struct TileParams {
  Eigen::Index patch_width = 640;
  Eigen::Index patch_height = 640;
  double overlap_x = 0.2;
  double overlap_y = 0.2;
};

/// Per-axis tile offsets: stride round(p * (1 - overlap)), last tile flush with the far edge.
std::vector<Eigen::Index> tile_offsets(Eigen::Index extent, Eigen::Index patch, double overlap);

TilePlan plan_tiles(Eigen::Index img_w, Eigen::Index img_h, Eigen::Index patch_w, Eigen::Index patch_h,
                    double overlap_x, double overlap_y);
TilePlan plan_tiles(Eigen::Index img_w, Eigen::Index img_h, const TileParams& params);

/// Exact copy of the region. Throws std::out_of_range when it leaves the image.
GrayImage crop(const GrayImage& img, const Region& r);
RgbImage crop(const RgbImage& img, const Region& r);
Image crop(const Image& img, const Region& r);

/// Writes `patch` back into `img` at (x0, y0).
void embed(GrayImage& img, const GrayImage& patch, Eigen::Index x0, Eigen::Index y0);
void embed(RgbImage& img, const RgbImage& patch, Eigen::Index x0, Eigen::Index y0);

/// A backend failure on one tile.
class TileFailure : public BackendError {
 public:
  TileFailure(const Tile& tile, const std::string& what, std::string payload)
      : BackendError(what, std::move(payload)), tile_(tile) {}
  const Tile& tile() const { return tile_; }

 private:
  Tile tile_;
};

struct PatchOptions {
  double nms_iou = kDefaultNmsIou;
  bool class_aware = true;
  /// Upper bound on concurrent tiles; further capped by the backend's capacity.
  std::size_t jobs = 1;
};

/// Runs the detector on every tile, maps boxes to image coordinates, clips, merges with NMS.
std::vector<Detection> patched_detect(const Image& img, Detector& detector, const TilePlan& plan,
                                      const PatchOptions& options = {});

}  // namespace pyrolens
