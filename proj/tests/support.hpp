#pragma once

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "pyrolens/backends.hpp"
#include "pyrolens/boxes.hpp"
#include "pyrolens/raster.hpp"

namespace pyrolens::test {

namespace fs = std::filesystem;

/// Directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = fs::temp_directory_path() /
            ("pyrolens-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& leaf) const { return path_ / leaf; }

 private:
  fs::path path_;
};

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
}

inline GrayImage random_gray(std::mt19937_64& rng, Eigen::Index w, Eigen::Index h) {
  std::uniform_int_distribution<int> v(0, 255);
  GrayImage img(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) img(y, x) = static_cast<std::uint8_t>(v(rng));
  return img;
}

inline GrayImage constant_gray(Eigen::Index w, Eigen::Index h, std::uint8_t v) {
  return GrayImage::Constant(h, w, v);
}

inline Detection det(double x, double y, double w, double h, double score, int category = 0) {
  return Detection{Box{x, y, w, h}, category, score};
}

/// Exit status of a shell command.
inline int run_status(const std::string& cmd) {
  const int rc = std::system(cmd.c_str());
  if (rc == -1) return -1;
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : 128 + WTERMSIG(rc);
}

inline std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') out += "'\\''";
    else out += c;
  }
  return out + "'";
}

/// Detector and classifier backed by plain functions; counts calls.
class FnBackend final : public Detector, public Classifier {
 public:
  using DetectFn = std::function<std::vector<Detection>(const Image&, const RegionHint&)>;
  using ClassifyFn = std::function<Classification(const GrayImage&, const RegionHint&)>;

  FnBackend(DetectFn d, ClassifyFn c = {}, int capacity = 1) : detect_(std::move(d)), classify_(std::move(c)) {
    caps_.name = "fn";
    caps_.capacity = capacity;
  }

  Capabilities capabilities() const override { return caps_; }
  std::vector<Detection> detect(const Image& img, const RegionHint& hint) override {
    {
      std::lock_guard lock(mutex_);
      ++detect_calls;
    }
    return detect_(img, hint);
  }
  Classification classify(const GrayImage& crop, const RegionHint& hint) override {
    {
      std::lock_guard lock(mutex_);
      ++classify_calls;
    }
    return classify_ ? classify_(crop, hint) : Classification{kFire, 1.0};
  }

  std::size_t detect_calls = 0;
  std::size_t classify_calls = 0;

 private:
  DetectFn detect_;
  ClassifyFn classify_;
  Capabilities caps_;
  std::mutex mutex_;
};

}  // namespace pyrolens::test
