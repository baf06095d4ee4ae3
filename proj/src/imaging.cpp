#include "pyrolens/imaging.hpp"

#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <stdexcept>

#include "pyrolens/format.hpp"

namespace pyrolens {

namespace {

std::uint8_t saturate_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

}  // namespace

SignedMap correlate3x3(const GrayImage& img, const Eigen::Matrix3i& kernel) {
  const Eigen::Index h = img.rows(), w = img.cols();
  const Plane<std::int32_t> padded = pad_replicate<std::uint8_t>(img, 1).cast<std::int32_t>();
  SignedMap out = SignedMap::Zero(h, w);
  for (int ky = 0; ky < 3; ++ky) {
    for (int kx = 0; kx < 3; ++kx) {
      if (kernel(ky, kx) != 0) out += kernel(ky, kx) * padded.block(ky, kx, h, w);
    }
  }
  return out;
}

GrayImage rgb_to_gray(const RgbImage& img) {
  GrayImage out(img.height(), img.width());
  for (Eigen::Index y = 0; y < img.height(); ++y) {
    for (Eigen::Index x = 0; x < img.width(); ++x) {
      out(y, x) = saturate_u8(0.299 * img.at(x, y, 0) + 0.587 * img.at(x, y, 1) + 0.114 * img.at(x, y, 2));
    }
  }
  return out;
}

GrayImage to_gray(const Image& img) {
  if (const auto* g = std::get_if<GrayImage>(&img)) return *g;
  return rgb_to_gray(std::get<RgbImage>(img));
}

SignedMap sobel(const GrayImage& img, Axis axis) { return correlate3x3(img, sobel_kernel(axis)); }

SignedMap laplacian(const GrayImage& img) { return correlate3x3(img, laplacian_kernel()); }

GrayImage sobel_magnitude(const GrayImage& img) {
  const Plane<double> gx = sobel(img, Axis::X).cast<double>();
  const Plane<double> gy = sobel(img, Axis::Y).cast<double>();
  const Plane<double> mag = (gx.square() + gy.square()).sqrt();
  return mag.unaryExpr([](double v) { return saturate_u8(v); });
}

GrayImage abs_to_u8(const SignedMap& m) {
  return m.abs().min(255).cast<std::uint8_t>();
}

GrayImage sobel_or_combine(const GrayImage& img) {
  const GrayImage ax = abs_to_u8(sobel(img, Axis::X));
  const GrayImage ay = abs_to_u8(sobel(img, Axis::Y));
  return ax.binaryExpr(ay, [](std::uint8_t a, std::uint8_t b) { return static_cast<std::uint8_t>(a | b); });
}

std::vector<double> gaussian_kernel(double sigma, int ksize) {
  if (ksize < 1 || ksize % 2 == 0) throw std::invalid_argument("gaussian kernel size must be odd and positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian sigma must be positive");
  const int r = ksize / 2;
  std::vector<double> taps(static_cast<std::size_t>(ksize));
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) {
    const double v = std::exp(-(i * i) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(i + r)] = v;
    sum += v;
  }
  for (double& t : taps) t /= sum;
  return taps;
}

GrayImage gaussian_blur(const GrayImage& img, double sigma, int ksize) {
  const std::vector<double> taps = gaussian_kernel(sigma, ksize);
  const Eigen::Index r = ksize / 2, h = img.rows(), w = img.cols();
  const Plane<double> padded = pad_replicate<std::uint8_t>(img, r).cast<double>();

  // Horizontal pass keeps the vertical padding for the second pass.
  Plane<double> horiz = Plane<double>::Zero(h + 2 * r, w);
  for (Eigen::Index k = 0; k < ksize; ++k) horiz += taps[static_cast<std::size_t>(k)] * padded.middleCols(k, w);

  Plane<double> out = Plane<double>::Zero(h, w);
  for (Eigen::Index k = 0; k < ksize; ++k) out += taps[static_cast<std::size_t>(k)] * horiz.middleRows(k, h);

  return out.unaryExpr([](double v) { return saturate_u8(v); });
}

GrayImage canny(const GrayImage& img, double low, double high) {
  if (low < 0.0 || low > high) throw std::invalid_argument("canny thresholds must satisfy 0 <= low <= high");
  const Eigen::Index h = img.rows(), w = img.cols();
  const SignedMap gx = sobel(img, Axis::X);
  const SignedMap gy = sobel(img, Axis::Y);
  const Plane<double> mag = (gx.cast<double>().square() + gy.cast<double>().square()).sqrt();

  auto mag_at = [&](Eigen::Index y, Eigen::Index x) {
    return (y < 0 || y >= h || x < 0 || x >= w) ? 0.0 : mag(y, x);
  };

  // 0 = suppressed, 1 = candidate, 2 = strong.
  Plane<std::uint8_t> state = Plane<std::uint8_t>::Zero(h, w);
  const double tan22 = std::tan(M_PI / 8.0);
  const double tan67 = std::tan(3.0 * M_PI / 8.0);
  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack;
  for (Eigen::Index y = 0; y < h; ++y) {
    for (Eigen::Index x = 0; x < w; ++x) {
      const double m = mag(y, x);
      if (m <= low) continue;
      const double ax = std::abs(gx(y, x)), ay = std::abs(gy(y, x));
      Eigen::Index dx = 0, dy = 0;
      if (ay <= ax * tan22) {
        dx = 1;
      } else if (ay > ax * tan67) {
        dy = 1;
      } else {
        dx = 1;
        dy = ((gx(y, x) < 0) == (gy(y, x) < 0)) ? 1 : -1;
      }
      // Ties keep the lower-index pixel.
      if (!(m > mag_at(y - dy, x - dx) && m >= mag_at(y + dy, x + dx))) continue;
      if (m > high) {
        state(y, x) = 2;
        stack.emplace_back(y, x);
      } else {
        state(y, x) = 1;
      }
    }
  }

  GrayImage out = GrayImage::Zero(h, w);
  for (const auto& [y, x] : stack) out(y, x) = 255;
  while (!stack.empty()) {
    const auto [y, x] = stack.back();
    stack.pop_back();
    for (Eigen::Index ny = std::max<Eigen::Index>(y - 1, 0); ny <= std::min(y + 1, h - 1); ++ny) {
      for (Eigen::Index nx = std::max<Eigen::Index>(x - 1, 0); nx <= std::min(x + 1, w - 1); ++nx) {
        if (state(ny, nx) == 1 && out(ny, nx) == 0) {
          out(ny, nx) = 255;
          stack.emplace_back(ny, nx);
        }
      }
    }
  }
  return out;
}

void EdgeConfig::validate() const {
  if (ksize < 1 || ksize % 2 == 0) throw std::invalid_argument("edge config: ksize must be odd and positive");
  if (!(sigma > 0.0)) throw std::invalid_argument("edge config: sigma must be positive");
  if (canny_low < 0.0 || canny_low > canny_high)
    throw std::invalid_argument("edge config: canny thresholds must satisfy 0 <= low <= high");
  if (weight_laplacian < 0.0 || weight_canny < 0.0)
    throw std::invalid_argument("edge config: weights must be non-negative");
}

std::string to_string(EdgeOrder order) {
  return order == EdgeOrder::BlurFirst ? "blur_first" : "edges_then_blur";
}

std::string to_string(EdgeOperator op) { return op == EdgeOperator::Laplacian ? "laplacian" : "sobel"; }

std::string EdgeConfig::to_text() const {
  std::ostringstream os;
  os << "sigma = " << format_double(sigma) << '\n'
     << "ksize = " << ksize << '\n'
     << "canny_low = " << format_double(canny_low) << '\n'
     << "canny_high = " << format_double(canny_high) << '\n'
     << "weight_laplacian = " << format_double(weight_laplacian) << '\n'
     << "weight_canny = " << format_double(weight_canny) << '\n'
     << "order = " << to_string(order) << '\n'
     << "operator = " << to_string(edge_operator) << '\n';
  return os.str();
}

EdgeConfig EdgeConfig::from_text(std::string_view text) {
  EdgeConfig cfg;
  std::istringstream is{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("edge config line " + std::to_string(lineno) + ": missing '='");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    auto number = [&] {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size())
        throw std::invalid_argument("edge config line " + std::to_string(lineno) + ": bad number '" + value + "'");
      return v;
    };
    if (key == "sigma") cfg.sigma = number();
    else if (key == "ksize") {
      const double v = number();
      if (v != std::floor(v)) throw std::invalid_argument("edge config: ksize must be an integer");
      cfg.ksize = static_cast<int>(v);
    }
    else if (key == "canny_low") cfg.canny_low = number();
    else if (key == "canny_high") cfg.canny_high = number();
    else if (key == "weight_laplacian") cfg.weight_laplacian = number();
    else if (key == "weight_canny") cfg.weight_canny = number();
    else if (key == "order") {
      if (value == "blur_first") cfg.order = EdgeOrder::BlurFirst;
      else if (value == "edges_then_blur") cfg.order = EdgeOrder::EdgesThenBlur;
      else throw std::invalid_argument("edge config: unknown order '" + value + "'");
    } else if (key == "operator") {
      if (value == "laplacian") cfg.edge_operator = EdgeOperator::Laplacian;
      else if (value == "sobel") cfg.edge_operator = EdgeOperator::Sobel;
      else throw std::invalid_argument("edge config: unknown operator '" + value + "'");
    } else {
      throw std::invalid_argument("edge config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
  }
  return cfg;
}

GrayImage edge_enhance(const GrayImage& img, const EdgeConfig& cfg) {
  cfg.validate();
  auto edge_response = [&](const GrayImage& src) {
    return cfg.edge_operator == EdgeOperator::Laplacian ? abs_to_u8(laplacian(src)) : sobel_or_combine(src);
  };

  GrayImage first, second;
  if (cfg.order == EdgeOrder::BlurFirst) {
    const GrayImage blurred = gaussian_blur(img, cfg.sigma, cfg.ksize);
    first = edge_response(blurred);
    second = canny(blurred, cfg.canny_low, cfg.canny_high);
  } else {
    first = gaussian_blur(edge_response(img), cfg.sigma, cfg.ksize);
    second = canny(first, cfg.canny_low, cfg.canny_high);
  }

  if (cfg.weight_laplacian == 1.0 && cfg.weight_canny == 1.0) {
    return (first.cast<int>() + second.cast<int>()).min(255).cast<std::uint8_t>();
  }
  const Plane<double> sum = cfg.weight_laplacian * first.cast<double>() + cfg.weight_canny * second.cast<double>();
  return sum.unaryExpr([](double v) { return saturate_u8(v); });
}

}  // namespace pyrolens
