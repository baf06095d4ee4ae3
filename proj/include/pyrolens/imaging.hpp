#pragma once

#include <algorithm>
#include <string>
#include <string_view>
#include <vector>

#include "pyrolens/raster.hpp"

namespace pyrolens {

enum class Axis { X, Y };

// Fixed 3x3 kernels, applied as correlation (no flip).
inline const Eigen::Matrix3i& sobel_kernel(Axis axis) {
  static const Eigen::Matrix3i kx = (Eigen::Matrix3i() << -1, 0, 1, -2, 0, 2, -1, 0, 1).finished();
  static const Eigen::Matrix3i ky = (Eigen::Matrix3i() << -1, -2, -1, 0, 0, 0, 1, 2, 1).finished();
  return axis == Axis::X ? kx : ky;
}

inline const Eigen::Matrix3i& laplacian_kernel() {
  static const Eigen::Matrix3i k = (Eigen::Matrix3i() << 0, 1, 0, 1, -4, 1, 0, 1, 0).finished();
  return k;
}

/// Copies `img` into a plane grown by `radius` on every side, borders replicated.
template <typename Scalar>
Plane<Scalar> pad_replicate(const Plane<Scalar>& img, Eigen::Index radius) {
  const Eigen::Index h = img.rows(), w = img.cols();
  Plane<Scalar> out(h + 2 * radius, w + 2 * radius);
  for (Eigen::Index y = 0; y < out.rows(); ++y) {
    const Eigen::Index sy = std::clamp<Eigen::Index>(y - radius, 0, h - 1);
    for (Eigen::Index x = 0; x < out.cols(); ++x) {
      out(y, x) = img(sy, std::clamp<Eigen::Index>(x - radius, 0, w - 1));
    }
  }
  return out;
}

/// 3x3 correlation with replicated borders, accumulated in 32-bit.
SignedMap correlate3x3(const GrayImage& img, const Eigen::Matrix3i& kernel);

GrayImage rgb_to_gray(const RgbImage& img);
GrayImage to_gray(const Image& img);

SignedMap sobel(const GrayImage& img, Axis axis);
GrayImage sobel_magnitude(const GrayImage& img);
GrayImage sobel_or_combine(const GrayImage& img);
SignedMap laplacian(const GrayImage& img);

/// min(|v|, 255) per sample.
GrayImage abs_to_u8(const SignedMap& m);

/// Normalized 1-D Gaussian taps, centre at index ksize / 2.
std::vector<double> gaussian_kernel(double sigma, int ksize);
GrayImage gaussian_blur(const GrayImage& img, double sigma, int ksize);

/// Binary edge map in {0, 255}. Gradient magnitude is L2 over the Sobel responses;
/// a pixel is strong above `high` and a candidate above `low`.
GrayImage canny(const GrayImage& img, double low, double high);

/// How the Laplacian and Canny branches are wired.
enum class EdgeOrder {
  /// blur, then Laplacian and Canny on the blurred image.
  BlurFirst,
  /// Laplacian on the input, blur that response, Canny on the blurred response.
  EdgesThenBlur,
};

/// Operator feeding the first branch.
enum class EdgeOperator { Laplacian, Sobel };

struct EdgeConfig {
  double sigma = 1.0;
  int ksize = 5;
  double canny_low = 50.0;
  double canny_high = 150.0;
  double weight_laplacian = 1.0;
  double weight_canny = 1.0;
  EdgeOrder order = EdgeOrder::BlurFirst;
  EdgeOperator edge_operator = EdgeOperator::Laplacian;

  /// Throws std::invalid_argument on any out-of-range field.
  void validate() const;

  /// Flat `key = value` lines, one per field.
  std::string to_text() const;
  /// Parses the `to_text` format; unknown keys and malformed values throw.
  static EdgeConfig from_text(std::string_view text);

  bool operator==(const EdgeConfig&) const = default;
};

std::string to_string(EdgeOrder order);
std::string to_string(EdgeOperator op);

GrayImage edge_enhance(const GrayImage& img, const EdgeConfig& cfg = {});

}  // namespace pyrolens
