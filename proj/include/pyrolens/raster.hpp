#pragma once

#include <cstdint>
#include <stdexcept>
#include <compare>
#include <variant>

#include <Eigen/Dense>

namespace pyrolens {

/// Row-major 2-D sample plane. Rows are image rows (y), columns are x.
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// 8-bit luminance raster.
using GrayImage = Plane<std::uint8_t>;

/// Signed convolution output; exact for 3x3 integer kernels on 8-bit input.
using SignedMap = Plane<std::int32_t>;

/// Interleaved 8-bit RGB raster. Stored as a height x (3 * width) plane.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(Eigen::Index width, Eigen::Index height)
      : samples_(Plane<std::uint8_t>::Zero(height, 3 * width)) {}
  explicit RgbImage(Plane<std::uint8_t> interleaved) : samples_(std::move(interleaved)) {
    if (samples_.cols() % 3 != 0) throw std::invalid_argument("RgbImage: column count not a multiple of 3");
  }

  Eigen::Index width() const { return samples_.cols() / 3; }
  Eigen::Index height() const { return samples_.rows(); }

  std::uint8_t& at(Eigen::Index x, Eigen::Index y, int channel) { return samples_(y, 3 * x + channel); }
  std::uint8_t at(Eigen::Index x, Eigen::Index y, int channel) const { return samples_(y, 3 * x + channel); }

  void set(Eigen::Index x, Eigen::Index y, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    at(x, y, 0) = r;
    at(x, y, 1) = g;
    at(x, y, 2) = b;
  }

  const Plane<std::uint8_t>& samples() const { return samples_; }
  Plane<std::uint8_t>& samples() { return samples_; }

  bool operator==(const RgbImage& other) const {
    return samples_.rows() == other.samples_.rows() && samples_.cols() == other.samples_.cols() &&
           (samples_ == other.samples_).all();
  }

 private:
  Plane<std::uint8_t> samples_;
};

/// Integer pixel rectangle [x0, x0 + w) x [y0, y0 + h).
struct Region {
  Eigen::Index x0 = 0;
  Eigen::Index y0 = 0;
  Eigen::Index w = 0;
  Eigen::Index h = 0;

  bool operator==(const Region&) const = default;
  auto operator<=>(const Region&) const = default;
};

/// Either raster kind; what detectors and frame sources traffic in.
using Image = std::variant<GrayImage, RgbImage>;

inline Eigen::Index width_of(const Image& img) {
  return std::visit([](const auto& i) -> Eigen::Index {
    if constexpr (std::is_same_v<std::decay_t<decltype(i)>, GrayImage>) return i.cols();
    else return i.width();
  }, img);
}

inline Eigen::Index height_of(const Image& img) {
  return std::visit([](const auto& i) -> Eigen::Index {
    if constexpr (std::is_same_v<std::decay_t<decltype(i)>, GrayImage>) return i.rows();
    else return i.height();
  }, img);
}

inline int channels_of(const Image& img) { return std::holds_alternative<GrayImage>(img) ? 1 : 3; }

/// Raw row-major samples of either raster kind.
inline const Plane<std::uint8_t>& samples_of(const Image& img) {
  if (const auto* g = std::get_if<GrayImage>(&img)) return *g;
  return std::get<RgbImage>(img).samples();
}

template <typename Derived, typename OtherDerived>
bool same_pixels(const Eigen::ArrayBase<Derived>& a, const Eigen::ArrayBase<OtherDerived>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a == b).all();
}

inline bool same_pixels(const Image& a, const Image& b) {
  return channels_of(a) == channels_of(b) && same_pixels(samples_of(a), samples_of(b));
}

}  // namespace pyrolens
