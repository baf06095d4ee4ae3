#include "pyrolens/wire.hpp"

#include <array>
#include <stdexcept>

namespace pyrolens::wire {

namespace {

constexpr std::string_view kAlphabet = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

nlohmann::ordered_json envelope(std::uint64_t id) {
  nlohmann::ordered_json j;
  j["v"] = kProtocolVersion;
  j["id"] = id;
  return j;
}

nlohmann::ordered_json image_json(const Plane<std::uint8_t>& samples, Eigen::Index w, Eigen::Index h, int c) {
  nlohmann::ordered_json j;
  j["w"] = w;
  j["h"] = h;
  j["c"] = c;
  j["data"] = base64_encode(std::span<const std::uint8_t>(samples.data(), static_cast<std::size_t>(samples.size())));
  return j;
}

[[noreturn]] void malformed(const std::string& what, const std::string& raw) {
  throw MalformedResponse("malformed response: " + what, raw);
}

void check_error(const Response& r) {
  if (const auto it = r.body.find("error"); it != r.body.end()) {
    throw RemoteError("backend error: " + (it->is_string() ? it->get<std::string>() : it->dump()), r.raw);
  }
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  if (const std::size_t rest = bytes.size() - i; rest > 0) {
    std::uint32_t v = bytes[i] << 16;
    if (rest == 2) v |= bytes[i + 1] << 8;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += rest == 2 ? kAlphabet[(v >> 6) & 63] : '=';
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) throw std::invalid_argument("base64: length not a multiple of 4");
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::array<int, 4> q{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) throw std::invalid_argument("base64: misplaced padding");
        q[k] = 0;
        ++pad;
      } else {
        if (pad > 0) throw std::invalid_argument("base64: data after padding");
        q[k] = decode_char(c);
        if (q[k] < 0) throw std::invalid_argument("base64: invalid character");
      }
    }
    const std::uint32_t v = (q[0] << 18) | (q[1] << 12) | (q[2] << 6) | q[3];
    out.push_back(static_cast<std::uint8_t>(v >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(v >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(v));
  }
  return out;
}

std::string encode_hello() {
  auto j = envelope(0);
  j["op"] = "hello";
  return j.dump();
}

std::string encode_detect(std::uint64_t id, const Image& img) {
  auto j = envelope(id);
  j["op"] = "detect";
  j["image"] = image_json(samples_of(img), width_of(img), height_of(img), channels_of(img));
  return j.dump();
}

std::string encode_classify(std::uint64_t id, const GrayImage& img) {
  auto j = envelope(id);
  j["op"] = "classify";
  j["image"] = image_json(img, img.cols(), img.rows(), 1);
  return j.dump();
}

Image decode_image(const nlohmann::json& j) {
  const auto w = j.at("w").get<Eigen::Index>();
  const auto h = j.at("h").get<Eigen::Index>();
  const int c = j.at("c").get<int>();
  if (w < 1 || h < 1) throw std::invalid_argument("image dimensions must be positive");
  if (c != 1 && c != 3) throw std::invalid_argument("image channel count must be 1 or 3");
  const auto bytes = base64_decode(j.at("data").get<std::string>());
  if (bytes.size() != static_cast<std::size_t>(w * h * c)) throw std::invalid_argument("image payload size mismatch");
  Plane<std::uint8_t> samples(h, w * c);
  std::copy(bytes.begin(), bytes.end(), samples.data());
  if (c == 3) return RgbImage(std::move(samples));
  return GrayImage(std::move(samples));
}

Response parse_response(const std::string& line) {
  Response r;
  r.raw = line;
  try {
    r.body = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    malformed(std::string("invalid JSON (") + e.what() + ")", line);
  }
  if (!r.body.is_object()) malformed("not a JSON object", line);
  const auto v = r.body.find("v");
  if (v == r.body.end() || !v->is_number_integer()) malformed("missing protocol version", line);
  if (v->get<long long>() != kProtocolVersion)
    throw VersionMismatch("protocol version " + v->dump() + " not supported (expected " +
                              std::to_string(kProtocolVersion) + ")",
                          line);
  const auto id = r.body.find("id");
  if (id == r.body.end() || !id->is_number_unsigned()) malformed("missing or invalid id", line);
  r.id = id->get<std::uint64_t>();
  return r;
}

Capabilities decode_hello(const Response& r) {
  check_error(r);
  Capabilities caps;
  try {
    caps.name = r.body.value("name", std::string("backend"));
    caps.capacity = r.body.value("capacity", 1);
    const std::string ch = r.body.value("channels", std::string("gray"));
    if (ch != "gray" && ch != "rgb") malformed("channels must be 'gray' or 'rgb'", r.raw);
    caps.channels = ch == "rgb" ? Channels::Rgb : Channels::Gray;
    if (const auto ops = r.body.find("ops"); ops != r.body.end()) {
      caps.can_detect = caps.can_classify = false;
      for (const auto& op : *ops) {
        const auto name = op.get<std::string>();
        caps.can_detect |= name == "detect";
        caps.can_classify |= name == "classify";
      }
    }
  } catch (const nlohmann::json::exception& e) {
    malformed(e.what(), r.raw);
  }
  if (caps.capacity < 1) malformed("capacity must be >= 1", r.raw);
  return caps;
}

std::vector<Detection> decode_detections(const Response& r) {
  check_error(r);
  const auto it = r.body.find("detections");
  if (it == r.body.end()) malformed("missing detections", r.raw);
  try {
    return detections_from_json(*it);
  } catch (const std::exception& e) {
    malformed(e.what(), r.raw);
  }
}

Classification decode_classification(const Response& r) {
  check_error(r);
  const auto cat = r.body.find("category");
  const auto score = r.body.find("score");
  if (cat == r.body.end() || !cat->is_number_integer() || cat->get<long long>() < 0)
    malformed("missing or invalid category", r.raw);
  if (score == r.body.end() || !score->is_number()) malformed("missing or invalid score", r.raw);
  const Classification c{cat->get<int>(), score->get<double>()};
  if (!(c.score >= 0.0 && c.score <= 1.0)) malformed("score outside [0, 1]", r.raw);
  return c;
}

std::string encode_hello_reply(const Capabilities& caps, int version) {
  nlohmann::ordered_json j;
  j["v"] = version;
  j["id"] = 0;
  j["name"] = caps.name;
  j["capacity"] = caps.capacity;
  j["channels"] = caps.channels == Channels::Rgb ? "rgb" : "gray";
  auto ops = nlohmann::ordered_json::array();
  if (caps.can_detect) ops.push_back("detect");
  if (caps.can_classify) ops.push_back("classify");
  j["ops"] = ops;
  return j.dump();
}

std::string encode_detect_reply(std::uint64_t id, const std::vector<Detection>& dets) {
  auto j = envelope(id);
  j["detections"] = to_json(dets);
  return j.dump();
}

std::string encode_classify_reply(std::uint64_t id, const Classification& c) {
  auto j = envelope(id);
  j["category"] = c.category;
  j["score"] = c.score;
  return j.dump();
}

std::string encode_error_reply(std::uint64_t id, const std::string& message) {
  auto j = envelope(id);
  j["error"] = message;
  return j.dump();
}

}  // namespace pyrolens::wire
