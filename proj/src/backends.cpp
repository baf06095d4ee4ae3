#include "pyrolens/backends.hpp"

#include <cstdio>
#include <random>

#include "pyrolens/imaging.hpp"

namespace pyrolens {

std::uint64_t fingerprint(const Image& img) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint8_t b) {
    h ^= b;
    h *= 0x100000001b3ULL;
  };
  auto mix_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) mix(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  mix_u32(static_cast<std::uint32_t>(width_of(img)));
  mix_u32(static_cast<std::uint32_t>(height_of(img)));
  mix_u32(static_cast<std::uint32_t>(channels_of(img)));
  const auto& s = samples_of(img);
  for (Eigen::Index i = 0; i < s.size(); ++i) mix(s.data()[i]);
  return h;
}

std::string fingerprint_hex(std::uint64_t fp) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fp));
  return buf;
}

Image adapt_channels(const Image& img, Channels want) {
  if (want == Channels::Gray) return to_gray(img);
  if (const auto* rgb = std::get_if<RgbImage>(&img)) return *rgb;
  const auto& g = std::get<GrayImage>(img);
  RgbImage out(g.cols(), g.rows());
  for (Eigen::Index y = 0; y < g.rows(); ++y)
    for (Eigen::Index x = 0; x < g.cols(); ++x) out.set(x, y, g(y, x), g(y, x), g(y, x));
  return out;
}

namespace {

void validate(const Detection& d, const std::string& backend) {
  if (!(d.score >= 0.0 && d.score <= 1.0))
    throw MalformedResponse(backend + ": detection score " + std::to_string(d.score) + " outside [0, 1]");
  if (!d.box.valid()) throw MalformedResponse(backend + ": detection box has non-positive size");
  if (d.category < 0) throw MalformedResponse(backend + ": negative category");
}

RegionHint whole(const Image& img) {
  return RegionHint{fingerprint(img), Region{0, 0, width_of(img), height_of(img)}};
}

}  // namespace

std::vector<Detection> detect(Detector& backend, const Image& img, const RegionHint& hint) {
  const auto caps = backend.capabilities();
  const bool matches = (caps.channels == Channels::Gray) == (channels_of(img) == 1);
  auto dets = matches ? backend.detect(img, hint) : backend.detect(adapt_channels(img, caps.channels), hint);
  for (const auto& d : dets) validate(d, caps.name);
  return dets;
}

std::vector<Detection> detect(Detector& backend, const Image& img) { return detect(backend, img, whole(img)); }

Classification classify(Classifier& backend, const GrayImage& crop, const RegionHint& hint) {
  if (crop.size() == 0) throw std::invalid_argument("classify: empty crop");
  const auto caps = backend.capabilities();
  const Classification c = backend.classify(crop, hint);
  if (!(c.score >= 0.0 && c.score <= 1.0))
    throw MalformedResponse(caps.name + ": classification score " + std::to_string(c.score) + " outside [0, 1]");
  if (c.category < 0) throw MalformedResponse(caps.name + ": negative category");
  return c;
}

Classification classify(Classifier& backend, const GrayImage& crop) {
  return classify(backend, crop, whole(Image{crop}));
}

// ---------------------------------------------------------------------------

namespace {

std::uint64_t parse_key(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used, 16);
  if (used != s.size()) throw std::invalid_argument("mock script: bad fingerprint '" + s + "'");
  return v;
}

Classification classification_from_json(const nlohmann::json& j) {
  return Classification{j.at("category").get<int>(), j.at("score").get<double>()};
}

nlohmann::ordered_json classification_to_json(const Classification& c) {
  nlohmann::ordered_json j;
  j["category"] = c.category;
  j["score"] = c.score;
  return j;
}

}  // namespace

MockScript MockScript::from_json(const nlohmann::json& j) {
  MockScript s;
  if (const auto it = j.find("detect"); it != j.end()) {
    const auto& d = *it;
    if (d.contains("default")) s.default_detections = detections_from_json(d["default"]);
    if (d.contains("by_fingerprint"))
      for (const auto& [k, v] : d["by_fingerprint"].items()) s.by_fingerprint[parse_key(k)] = detections_from_json(v);
    if (d.contains("scenes"))
      for (const auto& [k, v] : d["scenes"].items()) s.scenes[parse_key(k)] = detections_from_json(v);
  }
  if (const auto it = j.find("classify"); it != j.end()) {
    const auto& c = *it;
    if (c.contains("default")) s.default_classification = classification_from_json(c["default"]);
    if (c.contains("by_fingerprint"))
      for (const auto& [k, v] : c["by_fingerprint"].items())
        s.classify_by_fingerprint[parse_key(k)] = classification_from_json(v);
    if (c.contains("by_region"))
      for (const auto& e : c["by_region"]) {
        const auto& r = e.at("region");
        s.classify_by_region[Region{r.at(0).get<Eigen::Index>(), r.at(1).get<Eigen::Index>(),
                                    r.at(2).get<Eigen::Index>(), r.at(3).get<Eigen::Index>()}] =
            classification_from_json(e);
      }
  }
  s.seed = j.value("seed", std::uint64_t{0});
  s.jitter = j.value("jitter", 0.0);
  s.capacity = j.value("capacity", 4);
  const std::string ch = j.value("channels", std::string("gray"));
  if (ch != "gray" && ch != "rgb") throw std::invalid_argument("mock script: channels must be 'gray' or 'rgb'");
  s.channels = ch == "rgb" ? Channels::Rgb : Channels::Gray;
  if (s.capacity < 1) throw std::invalid_argument("mock script: capacity must be >= 1");
  if (s.jitter < 0.0) throw std::invalid_argument("mock script: jitter must be >= 0");
  return s;
}

nlohmann::ordered_json MockScript::to_json() const {
  nlohmann::ordered_json j;
  j["seed"] = seed;
  j["jitter"] = jitter;
  j["capacity"] = capacity;
  j["channels"] = channels == Channels::Rgb ? "rgb" : "gray";
  auto& d = j["detect"];
  d["default"] = pyrolens::to_json(default_detections);
  d["by_fingerprint"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : by_fingerprint) d["by_fingerprint"][fingerprint_hex(k)] = pyrolens::to_json(v);
  d["scenes"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : scenes) d["scenes"][fingerprint_hex(k)] = pyrolens::to_json(v);
  auto& c = j["classify"];
  c["default"] = classification_to_json(default_classification);
  c["by_fingerprint"] = nlohmann::ordered_json::object();
  for (const auto& [k, v] : classify_by_fingerprint) c["by_fingerprint"][fingerprint_hex(k)] = classification_to_json(v);
  c["by_region"] = nlohmann::ordered_json::array();
  for (const auto& [r, v] : classify_by_region) {
    auto e = classification_to_json(v);
    e["region"] = {r.x0, r.y0, r.w, r.h};
    c["by_region"].push_back(e);
  }
  return j;
}

Capabilities MockBackend::capabilities() const {
  return Capabilities{"mock", script_.capacity, script_.channels, true, true};
}

double MockBackend::jittered(double score, std::uint64_t salt) const {
  if (script_.jitter <= 0.0) return score;
  std::mt19937_64 rng(script_.seed ^ salt);
  std::uniform_real_distribution<double> noise(-script_.jitter, script_.jitter);
  return std::clamp(score + noise(rng), 0.0, 1.0);
}

std::vector<Detection> MockBackend::detect(const Image& img, const RegionHint& hint) {
  const std::uint64_t fp = fingerprint(img);
  std::vector<Detection> out;
  if (const auto it = script_.by_fingerprint.find(fp); it != script_.by_fingerprint.end()) {
    out = it->second;
  } else if (const auto sc = script_.scenes.find(hint.frame); sc != script_.scenes.end()) {
    const Region& r = hint.region;
    for (const auto& d : sc->second) {
      const Box& b = d.box;
      if (b.x >= r.x0 && b.y >= r.y0 && b.right() <= r.x0 + r.w && b.bottom() <= r.y0 + r.h)
        out.push_back(translate(d, -static_cast<double>(r.x0), -static_cast<double>(r.y0)));
    }
  } else {
    out = script_.default_detections;
  }
  for (std::size_t i = 0; i < out.size(); ++i) out[i].score = jittered(out[i].score, fp + i);
  return out;
}

Classification MockBackend::classify(const GrayImage& crop, const RegionHint& hint) {
  const std::uint64_t fp = fingerprint(Image{crop});
  Classification c = script_.default_classification;
  if (const auto it = script_.classify_by_fingerprint.find(fp); it != script_.classify_by_fingerprint.end()) {
    c = it->second;
  } else if (const auto r = script_.classify_by_region.find(hint.region); r != script_.classify_by_region.end()) {
    c = r->second;
  }
  c.score = jittered(c.score, fp);
  return c;
}

}  // namespace pyrolens
