#include "pyrolens/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <thread>

#include "pyrolens/backends.hpp"
#include "pyrolens/cascade.hpp"
#include "pyrolens/format.hpp"
#include "pyrolens/image_io.hpp"
#include "pyrolens/parallel.hpp"
#include "pyrolens/tiling.hpp"

namespace pyrolens {

namespace fs = std::filesystem;

std::vector<LabelRecord> parse_labels(std::string_view text) {
  std::vector<LabelRecord> out;
  std::size_t lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
    ++lineno;

    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
      const std::size_t start = i;
      while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
      if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    if (tokens.empty()) continue;
    if (tokens.size() != 5)
      throw LabelParseError(lineno, "expected 5 fields 'category cx cy w h', got " + std::to_string(tokens.size()));

    LabelRecord rec;
    {
      const auto t = tokens[0];
      const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), rec.category);
      if (ec != std::errc() || p != t.data() + t.size() || rec.category < 0)
        throw LabelParseError(lineno, "category must be a non-negative integer, got '" + std::string(t) + "'");
    }
    double* fields[4] = {&rec.cx, &rec.cy, &rec.w, &rec.h};
    for (int k = 0; k < 4; ++k) {
      const auto t = tokens[static_cast<std::size_t>(k + 1)];
      const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), *fields[k]);
      if (ec != std::errc() || p != t.data() + t.size())
        throw LabelParseError(lineno, "malformed number '" + std::string(t) + "'");
      if (!(*fields[k] >= 0.0 && *fields[k] <= 1.0))
        throw LabelParseError(lineno, "coordinate '" + std::string(t) + "' outside [0, 1]");
    }
    if (rec.w <= 0.0 || rec.h <= 0.0) throw LabelParseError(lineno, "box width and height must be positive");
    out.push_back(rec);
  }
  return out;
}

std::string serialize_labels(const std::vector<LabelRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += std::to_string(r.category) + ' ' + format_double(r.cx) + ' ' + format_double(r.cy) + ' ' +
           format_double(r.w) + ' ' + format_double(r.h) + '\n';
  }
  return out;
}

std::optional<GroundTruthBox> denormalize(const LabelRecord& rec, Eigen::Index img_w, Eigen::Index img_h) {
  if (img_w < 1 || img_h < 1) throw std::invalid_argument("denormalize: image dimensions must be positive");
  const double W = static_cast<double>(img_w), H = static_cast<double>(img_h);
  const double x = std::round(rec.cx * W - rec.w * W / 2.0);
  const double y = std::round(rec.cy * H - rec.h * H / 2.0);
  const double w = std::round(rec.w * W);
  const double h = std::round(rec.h * H);
  if (w <= 0.0 || h <= 0.0) return std::nullopt;
  const auto clipped = clip_to(Detection{Box{x, y, w, h}, rec.category, 1.0, Source::Direct}, W, H);
  if (!clipped) return std::nullopt;
  return GroundTruthBox{rec.category, clipped->box};
}

LabelRecord normalize(const GroundTruthBox& box, Eigen::Index img_w, Eigen::Index img_h) {
  const double W = static_cast<double>(img_w), H = static_cast<double>(img_h);
  return LabelRecord{box.category, (box.box.x + box.box.w / 2.0) / W, (box.box.y + box.box.h / 2.0) / H,
                     box.box.w / W, box.box.h / H};
}

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) return out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && is_image_file(e.path())) out.push_back(e.path());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<LabelRecord> labels_of(const DatasetEntry& e) {
  if (!e.labels) return {};
  try {
    return parse_labels(read_text(*e.labels));
  } catch (const LabelParseError& err) {
    throw std::runtime_error(e.labels->string() + ": " + err.what());
  }
}

std::size_t default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

std::uint64_t name_hash(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

DatasetIndex index_dataset(const fs::path& root, std::string split) {
  if (!fs::is_directory(root)) throw std::runtime_error("dataset root " + root.string() + " is not a directory");
  DatasetIndex idx;
  idx.split = std::move(split);
  idx.root = root;
  const fs::path images = fs::is_directory(root / "images") ? root / "images" : root;
  const fs::path labels = fs::is_directory(root / "labels") ? root / "labels" : images;
  for (const auto& img : list_images(images)) {
    DatasetEntry e{img, std::nullopt};
    const fs::path lbl = labels / (img.stem().string() + ".txt");
    if (fs::is_regular_file(lbl)) e.labels = lbl;
    idx.boxes += labels_of(e).size();
    idx.entries.push_back(std::move(e));
  }
  idx.images = idx.entries.size();
  return idx;
}

GroundTruth load_ground_truth(const DatasetIndex& index, std::vector<std::string>* warnings) {
  GroundTruth gt;
  for (const auto& e : index.entries) {
    const Image img = read_image(e.image);
    auto& boxes = gt[e.image.stem().string()];
    std::size_t line = 0;
    for (const auto& rec : labels_of(e)) {
      ++line;
      if (auto b = denormalize(rec, width_of(img), height_of(img))) {
        boxes.push_back(*b);
      } else if (warnings) {
        warnings->push_back(e.labels->string() + ": record " + std::to_string(line) + " is empty after rounding");
      }
    }
  }
  return gt;
}

nlohmann::ordered_json ConversionReport::to_json() const {
  nlohmann::ordered_json j;
  j["converted"] = converted;
  j["labels_copied"] = labels_copied;
  auto f = nlohmann::ordered_json::array();
  for (const auto& [path, reason] : failures) f.push_back({{"path", path}, {"reason", reason}});
  j["failures"] = f;
  return j;
}

ConversionReport convert_dataset_gray(const fs::path& src, const fs::path& dst) {
  if (!fs::is_directory(src)) throw std::runtime_error("source " + src.string() + " is not a directory");
  const bool layout = fs::is_directory(src / "images");
  const fs::path src_images = layout ? src / "images" : src;
  const fs::path src_labels = layout && fs::is_directory(src / "labels") ? src / "labels" : src_images;
  const fs::path dst_images = layout ? dst / "images" : dst;
  const fs::path dst_labels = layout ? dst / "labels" : dst;
  fs::create_directories(dst_images);
  fs::create_directories(dst_labels);

  const auto images = list_images(src_images);
  std::vector<std::optional<std::string>> errors(images.size());
  parallel_for(images.size(), default_jobs(), [&](std::size_t i) {
    try {
      const GrayImage gray = to_gray(read_image(images[i]));
      fs::path out = dst_images / images[i].filename();
      if (out.extension() == ".ppm") out.replace_extension(".pgm");
      write_image(out, gray);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  ConversionReport rep;
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (errors[i]) rep.failures.emplace_back(images[i].string(), *errors[i]);
    else ++rep.converted;
  }
  if (fs::is_directory(src_labels)) {
    std::vector<fs::path> labels;
    for (const auto& e : fs::directory_iterator(src_labels))
      if (e.is_regular_file() && e.path().extension() == ".txt") labels.push_back(e.path());
    std::sort(labels.begin(), labels.end());
    for (const auto& l : labels) {
      fs::copy_file(l, dst_labels / l.filename(), fs::copy_options::overwrite_existing);
      ++rep.labels_copied;
    }
  }
  return rep;
}

nlohmann::ordered_json CropReport::to_json() const {
  nlohmann::ordered_json j;
  j["fire"] = fire;
  j["no_fire"] = no_fire;
  j["skipped_small"] = skipped_small;
  j["negatives_unplaced"] = negatives_unplaced;
  auto f = nlohmann::ordered_json::array();
  for (const auto& [path, reason] : failures) f.push_back({{"path", path}, {"reason", reason}});
  j["failures"] = f;
  return j;
}

CropReport build_crops(const DatasetIndex& index, const EdgeConfig& edges, const fs::path& fire_dir,
                       const fs::path& no_fire_dir, const NegativeSampling& sampling) {
  edges.validate();
  if (sampling.ratio < 0.0) throw std::invalid_argument("negative ratio must be non-negative");
  fs::create_directories(fire_dir);
  fs::create_directories(no_fire_dir);

  // Pass 1: ground truth and the pool of positive sizes.
  const std::size_t n = index.entries.size();
  std::vector<std::vector<GroundTruthBox>> truth(n);
  std::vector<std::optional<std::string>> errors(n);
  std::vector<std::pair<double, double>> sizes;
  for (std::size_t i = 0; i < n; ++i) {
    try {
      const Image img = read_image(index.entries[i].image);
      for (const auto& rec : labels_of(index.entries[i]))
        if (auto b = denormalize(rec, width_of(img), height_of(img))) truth[i].push_back(*b);
      for (const auto& b : truth[i]) sizes.emplace_back(b.box.w, b.box.h);
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  }

  std::vector<CropReport> partial(n);
  parallel_for(n, default_jobs(), [&](std::size_t i) {
    if (errors[i]) return;
    const auto& entry = index.entries[i];
    const std::string stem = entry.image.stem().string();
    CropReport& rep = partial[i];
    try {
      const GrayImage gray = to_gray(read_image(entry.image));
      const Eigen::Index W = gray.cols(), H = gray.rows();
      std::size_t k = 0;
      for (const auto& b : truth[i]) {
        const Region r = crop_region(b.box, W, H);
        if (r.w < 2 || r.h < 2) {
          ++rep.skipped_small;
          continue;
        }
        write_png(fire_dir / (stem + "_" + std::to_string(k++) + ".png"), edge_enhance(crop(gray, r), edges));
        ++rep.fire;
      }

      const double base = truth[i].empty() ? 1.0 : static_cast<double>(truth[i].size());
      const auto wanted = static_cast<std::size_t>(std::llround(sampling.ratio * base));
      std::mt19937_64 rng(sampling.seed ^ name_hash(stem));
      for (std::size_t j = 0; j < wanted; ++j) {
        std::optional<Region> placed;
        if (W < 2 || H < 2) {
          ++rep.negatives_unplaced;
          continue;
        }
        for (int attempt = 0; attempt < sampling.max_attempts && !placed; ++attempt) {
          double sw = 64.0, sh = 64.0;
          if (!sizes.empty()) {
            std::uniform_int_distribution<std::size_t> pick(0, sizes.size() - 1);
            std::tie(sw, sh) = sizes[pick(rng)];
          }
          const Eigen::Index cw = std::clamp<Eigen::Index>(std::llround(sw), 2, W);
          const Eigen::Index ch = std::clamp<Eigen::Index>(std::llround(sh), 2, H);
          std::uniform_int_distribution<Eigen::Index> px(0, W - cw), py(0, H - ch);
          const Region cand{px(rng), py(rng), cw, ch};
          const Box cb{static_cast<double>(cand.x0), static_cast<double>(cand.y0), static_cast<double>(cw),
                       static_cast<double>(ch)};
          const bool clear = std::all_of(truth[i].begin(), truth[i].end(),
                                         [&](const GroundTruthBox& g) { return iou(cb, g.box) < sampling.max_iou; });
          if (clear) placed = cand;
        }
        if (!placed) {
          ++rep.negatives_unplaced;
          continue;
        }
        write_png(no_fire_dir / (stem + "_neg" + std::to_string(j) + ".png"), edge_enhance(crop(gray, *placed), edges));
        ++rep.no_fire;
      }
    } catch (const std::exception& e) {
      errors[i] = e.what();
    }
  });

  CropReport total;
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      total.failures.emplace_back(index.entries[i].image.string(), *errors[i]);
      continue;
    }
    total.fire += partial[i].fire;
    total.no_fire += partial[i].no_fire;
    total.skipped_small += partial[i].skipped_small;
    total.negatives_unplaced += partial[i].negatives_unplaced;
  }
  return total;
}

SplitStats dataset_stats(const DatasetIndex& index) { return SplitStats{index.split, index.images, index.boxes}; }

CropStats crop_stats(const fs::path& root, std::string split) {
  return CropStats{std::move(split), list_images(root / "fire").size(), list_images(root / "nofire").size()};
}

std::string format_stats_table(const std::vector<SplitStats>& detect, const std::vector<CropStats>& classify) {
  std::ostringstream os;
  std::size_t lw = 8;
  for (const auto& s : detect) lw = std::max(lw, s.split.size() + 2);
  for (const auto& s : classify) lw = std::max(lw, s.split.size() + 2);
  const int w = static_cast<int>(lw);
  if (!detect.empty()) {
    os << "Dataset detect\n" << std::left << std::setw(w) << "Split" << std::setw(10) << "Images" << "Bbox\n";
    for (const auto& s : detect) os << std::left << std::setw(w) << s.split << std::setw(10) << s.images << s.boxes << '\n';
  }
  if (!classify.empty()) {
    if (!detect.empty()) os << '\n';
    os << "Dataset classify\n" << std::left << std::setw(w) << "Split" << std::setw(10) << "Fire" << "No Fire\n";
    for (const auto& s : classify)
      os << std::left << std::setw(w) << s.split << std::setw(10) << s.fire << s.no_fire << '\n';
  }
  return os.str();
}

}  // namespace pyrolens
