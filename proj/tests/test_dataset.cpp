#include <cmath>
#include <random>

#include "doctest.h"
#include "pyrolens/dataset.hpp"
#include "pyrolens/image_io.hpp"
#include "pyrolens/tiling.hpp"
#include "support.hpp"

using namespace pyrolens;
namespace fs = std::filesystem;

namespace {

RgbImage random_rgb(std::mt19937_64& rng, Eigen::Index w, Eigen::Index h) {
  std::uniform_int_distribution<int> v(0, 255);
  RgbImage img(w, h);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x)
      img.set(x, y, static_cast<std::uint8_t>(v(rng)), static_cast<std::uint8_t>(v(rng)), static_cast<std::uint8_t>(v(rng)));
  return img;
}

void make_layout(const fs::path& root) {
  fs::create_directories(root / "images");
  fs::create_directories(root / "labels");
}

std::size_t count_files(const fs::path& dir) {
  std::size_t n = 0;
  for (const auto& e : fs::directory_iterator(dir)) n += e.is_regular_file();
  return n;
}

}  // namespace

TEST_SUITE("dataset") {

TEST_CASE("label parsing") {
  const auto recs = parse_labels("0 0.5 0.5 0.25 0.25\n");
  REQUIRE(recs.size() == 1);
  CHECK(recs[0] == LabelRecord{0, 0.5, 0.5, 0.25, 0.25});
  CHECK(parse_labels("").empty());
  CHECK(parse_labels("\n\n  \n").size() == 0);
  CHECK(parse_labels("1 0.1 0.2 0.3 0.4\r\n\n0 1 1 1 1").size() == 2);

  auto line_of = [](const std::string& text) {
    try {
      parse_labels(text);
    } catch (const LabelParseError& e) {
      return e.line();
    }
    return std::size_t{0};
  };
  CHECK(line_of("0 1.5 0.5 0.1 0.1") == 1);
  CHECK(line_of("0 0.5 0.5 0.1 0.1\n0 0.5 0.5 0.1") == 2);
  CHECK(line_of("\n\n-1 0.5 0.5 0.1 0.1") == 3);
  CHECK(line_of("x 0.5 0.5 0.1 0.1") == 1);
  CHECK(line_of("0 0.5 0.5 abc 0.1") == 1);
  CHECK(line_of("0 0.5 0.5 0 0.1") == 1);
  CHECK(line_of("0 0.5 0.5 0.1 0.1 7") == 1);
}

TEST_CASE("label serialization round trip") {
  CHECK(serialize_labels({{0, 0.5, 0.5, 0.25, 0.25}}) == "0 0.5 0.5 0.25 0.25\n");
  std::mt19937_64 rng(61);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    std::vector<LabelRecord> recs(std::uniform_int_distribution<int>(0, 6)(rng));
    for (auto& r : recs) r = LabelRecord{std::uniform_int_distribution<int>(0, 3)(rng), u(rng), u(rng), u(rng) + 1e-9, u(rng) + 1e-9};
    for (auto& r : recs) {
      r.w = std::min(r.w, 1.0);
      r.h = std::min(r.h, 1.0);
    }
    const std::string text = serialize_labels(recs);
    REQUIRE(parse_labels(text) == recs);
    REQUIRE(serialize_labels(parse_labels(text)) == text);
  }
}

TEST_CASE("denormalize") {
  CHECK(denormalize({0, 0.5, 0.5, 0.25, 0.25}, 640, 640)->box == Box{240, 240, 160, 160});
  CHECK(denormalize({0, 0.5, 0.5, 1, 1}, 1280, 720)->box == Box{0, 0, 1280, 720});
  CHECK_FALSE(denormalize({0, 0.5, 0.5, 0.001, 0.5}, 100, 100).has_value());
  CHECK(denormalize({0, 0.0, 0.0, 0.2, 0.2}, 100, 100)->box == Box{0, 0, 10, 10});
  CHECK_THROWS_AS(denormalize({0, 0.5, 0.5, 0.1, 0.1}, 0, 10), std::invalid_argument);

  std::mt19937_64 rng(62);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 2000; ++t) {
    const Eigen::Index W = std::uniform_int_distribution<int>(1, 700)(rng), H = std::uniform_int_distribution<int>(1, 700)(rng);
    const LabelRecord r{0, u(rng), u(rng), std::max(u(rng), 1e-6), std::max(u(rng), 1e-6)};
    const auto b = denormalize(r, W, H);
    if (!b) continue;
    REQUIRE(b->box.x >= 0);
    REQUIRE(b->box.y >= 0);
    REQUIRE(b->box.right() <= W);
    REQUIRE(b->box.bottom() <= H);
    const bool clipped = r.cx * W - r.w * W / 2 < 0.5 || r.cy * H - r.h * H / 2 < 0.5 ||
                         r.cx * W + r.w * W / 2 > W - 0.5 || r.cy * H + r.h * H / 2 > H - 0.5;
    if (clipped) continue;
    // Sizes round once; centres combine two roundings.
    const auto back = normalize(*b, W, H);
    REQUIRE(std::abs(back.w - r.w) * W <= 0.5 + 1e-9);
    REQUIRE(std::abs(back.h - r.h) * H <= 0.5 + 1e-9);
    REQUIRE(std::abs(back.cx - r.cx) * W <= 0.75 + 1e-9);
    REQUIRE(std::abs(back.cy - r.cy) * H <= 0.75 + 1e-9);
  }
}

TEST_CASE("index and ground truth") {
  test::TempDir dir;
  make_layout(dir.path());
  write_pgm(dir / "images/a.pgm", test::constant_gray(100, 50, 0));
  write_pgm(dir / "images/b.pgm", test::constant_gray(100, 50, 0));
  write_pgm(dir / "images/c.pgm", test::constant_gray(100, 50, 0));
  test::write_file(dir / "labels/a.txt", "0 0.5 0.5 0.2 0.2\n0 0.1 0.1 0.1 0.1\n");
  test::write_file(dir / "labels/b.txt", "0 0.5 0.5 0.001 0.2\n0 0.5 0.5 1 1\n1 0.25 0.25 0.5 0.5\n");
  const auto idx = index_dataset(dir.path(), "train");
  CHECK(idx.images == 3);
  CHECK(idx.boxes == 5);
  CHECK(dataset_stats(idx).split == "train");
  CHECK_FALSE(idx.entries[2].labels.has_value());

  std::vector<std::string> warnings;
  const auto gt = load_ground_truth(idx, &warnings);
  CHECK(gt.at("a").size() == 2);
  CHECK(gt.at("a")[0].box == Box{40, 20, 20, 10});
  CHECK(gt.at("b").size() == 2);
  CHECK(gt.at("c").empty());
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("b.txt") != std::string::npos);

  test::TempDir empty;
  const auto none = index_dataset(empty.path());
  CHECK((none.images == 0 && none.boxes == 0));
  CHECK_THROWS(index_dataset(empty / "missing"));
}

TEST_CASE("grayscale conversion") {
  test::TempDir src, dst, empty, out;
  CHECK(convert_dataset_gray(empty.path(), out.path()).converted == 0);

  std::mt19937_64 rng(63);
  const RgbImage colour = random_rgb(rng, 13, 7);
  RgbImage achromatic(9, 4);
  for (Eigen::Index y = 0; y < 4; ++y)
    for (Eigen::Index x = 0; x < 9; ++x) {
      const auto v = static_cast<std::uint8_t>(20 * x + y);
      achromatic.set(x, y, v, v, v);
    }
  make_layout(src.path());
  write_ppm(src / "images/colour.ppm", colour);
  write_png(src / "images/flat.png", achromatic);
  test::write_file(src / "images/broken.png", "not an image");
  test::write_file(src / "labels/colour.txt", "0 0.5 0.5 0.2 0.2\n");

  const auto rep = convert_dataset_gray(src.path(), dst.path());
  CHECK(rep.converted == 2);
  CHECK(rep.labels_copied == 1);
  REQUIRE(rep.failures.size() == 1);
  CHECK(rep.failures[0].first.find("broken.png") != std::string::npos);
  CHECK(rep.to_json()["failures"].size() == 1);

  const GrayImage g = read_pgm(dst / "images/colour.pgm");
  CHECK((g.cols() == 13 && g.rows() == 7));
  CHECK(same_pixels(g, to_gray(Image{colour})));
  const Image flat = read_png(dst / "images/flat.png");
  REQUIRE(channels_of(flat) == 1);
  for (Eigen::Index y = 0; y < 4; ++y)
    for (Eigen::Index x = 0; x < 9; ++x) REQUIRE(std::get<GrayImage>(flat)(y, x) == achromatic.at(x, y, 1));
  CHECK(test::read_file(dst / "labels/colour.txt") == test::read_file(src / "labels/colour.txt"));
}

TEST_CASE("classification crops") {
  test::TempDir data, out;
  make_layout(data.path());
  std::mt19937_64 rng(64);
  std::size_t n_boxes = 0;
  for (int i = 0; i < 6; ++i) {
    const std::string stem = "f" + std::to_string(i);
    write_png(data / ("images/" + stem + ".png"), test::random_gray(rng, 200, 150));
    std::string text;
    if (i == 5) continue;  // unlabeled image: negatives only
    for (int k = 0; k <= i % 3; ++k) {
      text += serialize_labels({{0, 0.2 + 0.3 * k, 0.3, 0.1, 0.12}});
      ++n_boxes;
    }
    test::write_file(data / ("labels/" + stem + ".txt"), text);
  }
  test::write_file(data / "labels/f0.txt", test::read_file(data / "labels/f0.txt") + "0 0.9 0.9 0.001 0.001\n");
  const auto idx = index_dataset(data.path());
  const auto rep = build_crops(idx, EdgeConfig{}, out / "fire", out / "nofire", NegativeSampling{1.0, 0.1, 7, 500});

  CHECK(rep.fire == n_boxes);
  CHECK(count_files(out / "fire") == n_boxes);
  CHECK(rep.no_fire + rep.negatives_unplaced == n_boxes + 1);
  CHECK(count_files(out / "nofire") == rep.no_fire);
  CHECK(rep.failures.empty());
  CHECK(crop_stats(out.path(), "train").fire == n_boxes);

  // Negatives are recovered by matching pixels against the edge-enhanced source.
  const auto gt = load_ground_truth(idx);
  for (const auto& e : fs::directory_iterator(out / "nofire")) {
    const GrayImage crop_img = std::get<GrayImage>(read_png(e.path()));
    const std::string name = e.path().stem().string();
    const std::string stem = name.substr(0, name.find("_neg"));
    const GrayImage src = std::get<GrayImage>(read_image(data / ("images/" + stem + ".png")));
    bool found = false;
    for (Eigen::Index y = 0; y + crop_img.rows() <= src.rows() && !found; ++y)
      for (Eigen::Index x = 0; x + crop_img.cols() <= src.cols() && !found; ++x) {
        const Region r{x, y, crop_img.cols(), crop_img.rows()};
        if (!same_pixels(edge_enhance(crop(src, r), EdgeConfig{}), crop_img)) continue;
        found = true;
        const Box b{static_cast<double>(x), static_cast<double>(y), static_cast<double>(r.w), static_cast<double>(r.h)};
        for (const auto& g : gt.at(stem)) REQUIRE(iou(b, g.box) < 0.1);
      }
    REQUIRE(found);
  }

  test::TempDir again;
  const auto rep2 = build_crops(idx, EdgeConfig{}, again / "fire", again / "nofire", NegativeSampling{1.0, 0.1, 7, 500});
  CHECK(rep2.to_json() == rep.to_json());
  for (const auto& e : fs::directory_iterator(out / "nofire"))
    CHECK(test::read_file(e.path()) == test::read_file(again / "nofire" / e.path().filename()));

  test::TempDir none;
  CHECK(build_crops(idx, EdgeConfig{}, none / "fire", none / "nofire", NegativeSampling{0.0}).no_fire == 0);
}

TEST_CASE("crowded images leave negatives unplaced") {
  test::TempDir data, out;
  make_layout(data.path());
  write_pgm(data / "images/full.pgm", test::constant_gray(40, 40, 9));
  test::write_file(data / "labels/full.txt", "0 0.5 0.5 1 1\n");
  const auto rep = build_crops(index_dataset(data.path()), EdgeConfig{}, out / "fire", out / "nofire",
                               NegativeSampling{2.0, 0.1, 1, 50});
  CHECK(rep.fire == 1);
  CHECK(rep.no_fire == 0);
  CHECK(rep.negatives_unplaced == 2);
}

TEST_CASE("statistics table") {
  const std::string table = format_stats_table({{"train", 26403, 55261}, {"val", 3, 5}}, {{"train", 6067, 970}});
  CHECK(table ==
        "Dataset detect\n"
        "Split   Images    Bbox\n"
        "train   26403     55261\n"
        "val     3         5\n"
        "\n"
        "Dataset classify\n"
        "Split   Fire      No Fire\n"
        "train   6067      970\n");
  CHECK(format_stats_table({{"empty", 0, 0}}, {}) == "Dataset detect\nSplit   Images    Bbox\nempty   0         0\n");
}

}
