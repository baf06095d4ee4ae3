#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pyrolens/imaging.hpp"
#include "support.hpp"

using namespace pyrolens;
using test::random_gray;

namespace {

bool equal(const SignedMap& a, const SignedMap& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a == b).all();
}
bool equal(const GrayImage& a, const GrayImage& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() && (a == b).all();
}

GrayImage step_edge(Eigen::Index w, Eigen::Index h, Eigen::Index at, std::uint8_t lo, std::uint8_t hi) {
  GrayImage img(h, w);
  for (Eigen::Index x = 0; x < w; ++x) img.col(x).setConstant(x < at ? lo : hi);
  return img;
}

}  // namespace

TEST_SUITE("imaging") {

TEST_CASE("gray conversion uses the 601 luma weights") {
  RgbImage px(1, 1);
  px.set(0, 0, 255, 255, 255);
  CHECK(rgb_to_gray(px)(0, 0) == 255);
  px.set(0, 0, 100, 150, 200);
  CHECK(rgb_to_gray(px)(0, 0) == 141);
  for (int v = 0; v < 256; ++v) {
    px.set(0, 0, v, v, v);
    REQUIRE(rgb_to_gray(px)(0, 0) == v);
  }
}

TEST_CASE("replicated padding") {
  GrayImage img(2, 2);
  img << 1, 2, 3, 4;
  const auto p = pad_replicate<std::uint8_t>(img, 1);
  GrayImage want(4, 4);
  want << 1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4;
  CHECK(equal(p, want));
}

TEST_CASE("sobel and laplacian match the nested-loop oracle") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    std::uniform_int_distribution<int> dim(1, 20);
    const GrayImage img = random_gray(rng, dim(rng), dim(rng));
    REQUIRE(equal(sobel(img, Axis::X), oracle::correlate(img, oracle::kSobelX)));
    REQUIRE(equal(sobel(img, Axis::Y), oracle::correlate(img, oracle::kSobelY)));
    REQUIRE(equal(laplacian(img), oracle::correlate(img, oracle::kLaplacian)));
  }
}

TEST_CASE("constant images have zero response") {
  for (int v : {0, 1, 77, 255}) {
    const GrayImage img = test::constant_gray(9, 7, static_cast<std::uint8_t>(v));
    CHECK((sobel(img, Axis::X) == 0).all());
    CHECK((sobel(img, Axis::Y) == 0).all());
    CHECK((laplacian(img) == 0).all());
    CHECK((sobel_magnitude(img) == 0).all());
    CHECK((sobel_or_combine(img) == 0).all());
  }
}

TEST_CASE("sobel step edge") {
  const GrayImage img = step_edge(5, 5, 2, 0, 200);
  const SignedMap gx = sobel(img, Axis::X);
  for (Eigen::Index y = 0; y < 5; ++y) CHECK(gx(y, 2) == 800);
  CHECK((sobel(img, Axis::Y) == 0).all());
  for (Eigen::Index y = 0; y < 5; ++y) CHECK(sobel_magnitude(img)(y, 2) == 255);
  CHECK(equal(sobel_or_combine(img), abs_to_u8(gx)));
}

TEST_CASE("sobel transpose symmetry") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 50; ++t) {
    const GrayImage img = random_gray(rng, 1 + t % 13, 1 + t % 7);
    const GrayImage tr = img.transpose();
    const SignedMap a = sobel(img, Axis::X).transpose();
    REQUIRE(equal(a, sobel(tr, Axis::Y)));
  }
}

TEST_CASE("sobel linearity") {
  std::mt19937_64 rng(13);
  std::uniform_int_distribution<int> v(0, 25);
  for (int t = 0; t < 50; ++t) {
    GrayImage img(8, 8);
    for (auto& p : img.reshaped()) p = static_cast<std::uint8_t>(v(rng));
    for (int a : {2, 5, 10}) {
      const GrayImage scaled = (img.cast<int>() * a).cast<std::uint8_t>();
      REQUIRE(equal(sobel(scaled, Axis::X), (sobel(img, Axis::X) * a).eval()));
      REQUIRE(equal(laplacian(scaled), (laplacian(img) * a).eval()));
    }
  }
}

TEST_CASE("sobel magnitude") {
  std::mt19937_64 rng(14);
  for (int t = 0; t < 50; ++t) {
    const GrayImage img = random_gray(rng, 10, 10);
    const SignedMap gx = oracle::correlate(img, oracle::kSobelX), gy = oracle::correlate(img, oracle::kSobelY);
    const GrayImage m = sobel_magnitude(img);
    for (Eigen::Index y = 0; y < 10; ++y)
      for (Eigen::Index x = 0; x < 10; ++x) {
        const double want = std::min(255.0, std::round(std::hypot(gx(y, x), gy(y, x))));
        REQUIRE(m(y, x) == want);
      }
  }
  // gx = 6, gy = 8 at the centre.
  GrayImage img = GrayImage::Zero(3, 3);
  img(1, 2) = 3;
  img(2, 1) = 4;
  const SignedMap gx = oracle::correlate(img, oracle::kSobelX), gy = oracle::correlate(img, oracle::kSobelY);
  REQUIRE(gx(1, 1) == 6);
  REQUIRE(gy(1, 1) == 8);
  CHECK(sobel_magnitude(img)(1, 1) == 10);
}

TEST_CASE("or-combine is the bitwise or of the axis magnitudes") {
  std::mt19937_64 rng(15);
  const GrayImage img = random_gray(rng, 12, 9);
  const GrayImage ax = abs_to_u8(oracle::correlate(img, oracle::kSobelX));
  const GrayImage ay = abs_to_u8(oracle::correlate(img, oracle::kSobelY));
  const GrayImage c = sobel_or_combine(img);
  for (Eigen::Index i = 0; i < c.size(); ++i) REQUIRE(c.reshaped()(i) == (ax.reshaped()(i) | ay.reshaped()(i)));
  CHECK((0b10100000 | 0b00000101) == 165);
}

TEST_CASE("laplacian impulse") {
  GrayImage img = GrayImage::Zero(3, 3);
  img(1, 1) = 100;
  const SignedMap l = laplacian(img);
  CHECK(l(1, 1) == -400);
  CHECK(l(1, 0) == 100);
  CHECK(l(0, 1) == 100);
}

TEST_CASE("abs_to_u8 saturates") {
  SignedMap m(1, 4);
  m << -400, 0, -37, 300;
  const GrayImage u = abs_to_u8(m);
  CHECK(u(0, 0) == 255);
  CHECK(u(0, 1) == 0);
  CHECK(u(0, 2) == 37);
  CHECK(u(0, 3) == 255);
}

TEST_CASE("gaussian kernel") {
  for (double sigma : {0.3, 0.5, 1.0, 1.7, 4.0}) {
    for (int k : {1, 3, 5, 7, 11}) {
      const auto taps = gaussian_kernel(sigma, k);
      double sum = 0.0;
      for (double t : taps) sum += t;
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
      const auto want = oracle::gaussian_weights(sigma, k);
      for (int i = 0; i < k; ++i) CHECK(taps[i] == doctest::Approx(want[i]).epsilon(1e-12));
      for (int i = 0; i < k / 2; ++i) CHECK(taps[i] == taps[k - 1 - i]);
    }
  }
  CHECK_THROWS_AS(gaussian_kernel(1.0, 4), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_kernel(1.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(gaussian_kernel(0.0, 5), std::invalid_argument);
}

TEST_CASE("gaussian blur") {
  for (int v : {0, 3, 128, 255}) {
    const GrayImage c = test::constant_gray(11, 6, static_cast<std::uint8_t>(v));
    CHECK(equal(gaussian_blur(c, 1.3, 7), c));
  }
  std::mt19937_64 rng(16);
  const GrayImage img = random_gray(rng, 13, 8);
  CHECK(equal(gaussian_blur(img, 2.0, 1), img));

  GrayImage impulse = GrayImage::Zero(9, 9);
  impulse(4, 4) = 255;
  const GrayImage b = gaussian_blur(impulse, 1.0, 5);
  for (int y = 0; y < 9; ++y)
    for (int x = 0; x < 9; ++x) {
      CHECK(b(y, x) == b(8 - y, x));
      CHECK(b(y, x) == b(y, 8 - x));
      CHECK(b(y, x) == b(x, y));
      CHECK(b(y, x) <= b(4, 4));
    }
  CHECK(b(4, 4) > b(4, 3));

  // Two-dimensional direct sum as reference.
  const auto g = oracle::gaussian_weights(1.4, 5);
  for (int t = 0; t < 20; ++t) {
    const GrayImage r = random_gray(rng, 10, 10);
    const GrayImage out = gaussian_blur(r, 1.4, 5);
    for (int y = 0; y < 10; ++y)
      for (int x = 0; x < 10; ++x) {
        double acc = 0.0;
        for (int j = -2; j <= 2; ++j)
          for (int i = -2; i <= 2; ++i)
            acc += g[j + 2] * g[i + 2] * r(std::clamp(y + j, 0, 9), std::clamp(x + i, 0, 9));
        REQUIRE(std::abs(out(y, x) - std::round(acc)) <= 1.0);
      }
  }
}

TEST_CASE("canny") {
  CHECK((canny(test::constant_gray(16, 16, 90), 50, 150) == 0).all());
  const GrayImage zero = test::constant_gray(8, 8, 0);
  CHECK(equal(canny(canny(zero, 50, 150), 50, 150), zero));
  CHECK_THROWS_AS(canny(zero, 100, 50), std::invalid_argument);

  SUBCASE("vertical step is a single line") {
    const GrayImage img = step_edge(32, 32, 16, 0, 255);
    const GrayImage e = canny(img, 50, 150);
    CHECK(equal(e, oracle::canny(img, 50, 150)));
    for (Eigen::Index x = 0; x < 32; ++x) {
      const bool on = x == 15;
      for (Eigen::Index y = 0; y < 32; ++y) REQUIRE((e(y, x) == 255) == on);
    }
  }

  SUBCASE("matches the naive oracle on random and smoothed images") {
    std::mt19937_64 rng(17);
    for (int t = 0; t < 200; ++t) {
      GrayImage img = random_gray(rng, 16, 16);
      if (t % 2) img = gaussian_blur(img, 1.5, 5);
      const double low = 20.0 + t % 60, high = low + 10.0 * (t % 20);
      const GrayImage e = canny(img, low, high);
      REQUIRE(((e == 0) || (e == 255)).all());
      REQUIRE(equal(e, oracle::canny(img, low, high)));
    }
  }
}

TEST_CASE("edge enhancement") {
  const EdgeConfig def;
  CHECK(def.sigma == 1.0);
  CHECK(def.ksize == 5);
  CHECK(def.canny_low == 50.0);
  CHECK(def.canny_high == 150.0);

  for (auto order : {EdgeOrder::BlurFirst, EdgeOrder::EdgesThenBlur}) {
    for (auto op : {EdgeOperator::Laplacian, EdgeOperator::Sobel}) {
      EdgeConfig cfg;
      cfg.order = order;
      cfg.edge_operator = op;
      CHECK((edge_enhance(test::constant_gray(20, 12, 201), cfg) == 0).all());
    }
  }

  std::mt19937_64 rng(18);
  for (int t = 0; t < 30; ++t) {
    const GrayImage img = random_gray(rng, 24, 18);
    const GrayImage out = edge_enhance(img);
    const GrayImage blurred = gaussian_blur(img, 1.0, 5);
    const GrayImage l = abs_to_u8(oracle::correlate(blurred, oracle::kLaplacian));
    const GrayImage c = oracle::canny(blurred, 50, 150);
    for (Eigen::Index i = 0; i < out.size(); ++i) {
      const int want = std::min(255, l.reshaped()(i) + c.reshaped()(i));
      REQUIRE(out.reshaped()(i) == want);
      REQUIRE(out.reshaped()(i) >= std::max(l.reshaped()(i), c.reshaped()(i)));
    }
    REQUIRE(equal(edge_enhance(img), out));
  }

  SUBCASE("weights") {
    const GrayImage img = random_gray(rng, 16, 16);
    EdgeConfig cfg;
    cfg.weight_canny = 0.0;
    const GrayImage only_l = edge_enhance(img, cfg);
    CHECK(equal(only_l, abs_to_u8(laplacian(gaussian_blur(img, 1.0, 5)))));
  }
}

TEST_CASE("edge config text round trip and validation") {
  EdgeConfig cfg;
  cfg.sigma = 1.25;
  cfg.ksize = 7;
  cfg.canny_low = 30;
  cfg.canny_high = 90.5;
  cfg.weight_laplacian = 0.5;
  cfg.order = EdgeOrder::EdgesThenBlur;
  cfg.edge_operator = EdgeOperator::Sobel;
  CHECK(EdgeConfig::from_text(cfg.to_text()) == cfg);
  CHECK(EdgeConfig::from_text("# comment\n\nsigma = 2\n").sigma == 2.0);
  CHECK_THROWS_AS(EdgeConfig::from_text("colour = red\n"), std::invalid_argument);
  CHECK_THROWS_AS(EdgeConfig::from_text("sigma = abc\n"), std::invalid_argument);
  EdgeConfig bad;
  bad.ksize = 4;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
  bad = EdgeConfig{};
  bad.canny_low = 200;
  CHECK_THROWS_AS(edge_enhance(test::constant_gray(4, 4, 0), bad), std::invalid_argument);
}

TEST_CASE("operators preserve dimensions") {
  std::mt19937_64 rng(19);
  for (auto [w, h] : {std::pair{1, 1}, {1, 9}, {9, 1}, {2, 3}, {17, 5}}) {
    const GrayImage img = random_gray(rng, w, h);
    for (const GrayImage& out : {abs_to_u8(sobel(img, Axis::X)), sobel_magnitude(img), abs_to_u8(laplacian(img)),
                                 gaussian_blur(img, 1.0, 5), canny(img, 50, 150), edge_enhance(img)}) {
      CHECK(out.cols() == w);
      CHECK(out.rows() == h);
    }
  }
}

}
