#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pyrolens/boxes.hpp"
#include "pyrolens/raster.hpp"

namespace pyrolens {

enum class Channels { Gray, Rgb };

/// What a backend advertises about itself.
struct Capabilities {
  std::string name;
  int capacity = 1;  // max concurrent requests
  Channels channels = Channels::Gray;
  bool can_detect = true;
  bool can_classify = true;
};

/// Fire / no-fire label set used by the classifier stage.
inline constexpr int kFire = 0;
inline constexpr int kNoFire = 1;

struct Classification {
  int category = kFire;
  double score = 0.0;

  bool operator==(const Classification&) const = default;
};

/// Where the pixels handed to a backend came from: the fingerprint of the full
/// frame and the region of that frame they cover.
struct RegionHint {
  std::uint64_t frame = 0;
  Region region;
};

class Detector {
 public:
  virtual ~Detector() = default;
  virtual Capabilities capabilities() const = 0;
  virtual std::vector<Detection> detect(const Image& img, const RegionHint& hint) = 0;
};

class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual Capabilities capabilities() const = 0;
  virtual Classification classify(const GrayImage& crop, const RegionHint& hint) = 0;
};

class BackendError : public std::runtime_error {
 public:
  BackendError(const std::string& what, std::string payload = {})
      : std::runtime_error(what), payload_(std::move(payload)) {}
  /// Raw protocol text that triggered the error, when there was one.
  const std::string& payload() const { return payload_; }

 private:
  std::string payload_;
};

class BackendUnavailable : public BackendError {
 public:
  using BackendError::BackendError;
};

class MalformedResponse : public BackendError {
 public:
  using BackendError::BackendError;
};

class VersionMismatch : public BackendError {
 public:
  using BackendError::BackendError;
};

class Timeout : public BackendError {
 public:
  using BackendError::BackendError;
};

/// The backend answered with an explicit error message.
class RemoteError : public BackendError {
 public:
  using BackendError::BackendError;
};

/// FNV-1a over width, height, channel count and samples.
std::uint64_t fingerprint(const Image& img);
std::string fingerprint_hex(std::uint64_t fp);

/// Converts between gray and RGB so the image matches what the backend expects.
Image adapt_channels(const Image& img, Channels want);

// Boundary calls: adapt channels, call the backend, validate what comes back.
// Out-of-range scores or degenerate boxes raise MalformedResponse.
std::vector<Detection> detect(Detector& backend, const Image& img, const RegionHint& hint);
std::vector<Detection> detect(Detector& backend, const Image& img);
Classification classify(Classifier& backend, const GrayImage& crop, const RegionHint& hint);
Classification classify(Classifier& backend, const GrayImage& crop);

/// Scripted responses for the mock backend.
struct MockScript {
  /// Returned when nothing more specific matches.
  std::vector<Detection> default_detections;
  /// Keyed on the fingerprint of the exact pixels the backend receives.
  std::map<std::uint64_t, std::vector<Detection>> by_fingerprint;
  /// Keyed on the full-frame fingerprint, boxes in frame coordinates. A request
  /// covering a region of that frame gets the boxes lying wholly inside it,
  /// shifted into the region's coordinates.
  std::map<std::uint64_t, std::vector<Detection>> scenes;

  Classification default_classification{kFire, 1.0};
  std::map<std::uint64_t, Classification> classify_by_fingerprint;
  /// Keyed on the hint region, frame coordinates.
  std::map<Region, Classification> classify_by_region;

  std::uint64_t seed = 0;
  /// Uniform score perturbation half-width; 0 disables.
  double jitter = 0.0;
  int capacity = 4;
  Channels channels = Channels::Gray;

  static MockScript from_json(const nlohmann::json& j);
  nlohmann::ordered_json to_json() const;
};

class MockBackend final : public Detector, public Classifier {
 public:
  explicit MockBackend(MockScript script = {}) : script_(std::move(script)) {}

  Capabilities capabilities() const override;
  std::vector<Detection> detect(const Image& img, const RegionHint& hint) override;
  Classification classify(const GrayImage& crop, const RegionHint& hint) override;

  const MockScript& script() const { return script_; }

 private:
  double jittered(double score, std::uint64_t salt) const;

  MockScript script_;
};

}  // namespace pyrolens
