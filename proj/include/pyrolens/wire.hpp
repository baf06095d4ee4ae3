#pragma once

// Line-delimited JSON protocol spoken with external model processes.
//
//   hello     {"v":1,"id":0,"op":"hello"}
//             {"v":1,"id":0,"name":str,"capacity":int,"channels":"gray"|"rgb","ops":[...]}
//   detect    {"v":1,"id":N,"op":"detect","image":{"w":W,"h":H,"c":1|3,"data":base64}}
//             {"v":1,"id":N,"detections":[{"category":int,"score":float,"bbox":[x,y,w,h]}]}
//   classify  {"v":1,"id":N,"op":"classify","image":{...}}
//             {"v":1,"id":N,"category":int,"score":float}
//   failure   {"v":1,"id":N,"error":str}

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "pyrolens/backends.hpp"

namespace pyrolens::wire {

inline constexpr int kProtocolVersion = 1;

std::string base64_encode(std::span<const std::uint8_t> bytes);
/// Throws std::invalid_argument on malformed input.
std::vector<std::uint8_t> base64_decode(std::string_view text);

std::string encode_hello();
std::string encode_detect(std::uint64_t id, const Image& img);
std::string encode_classify(std::uint64_t id, const GrayImage& img);

Image decode_image(const nlohmann::json& j);

/// Parsed envelope of any response line.
struct Response {
  std::uint64_t id = 0;
  nlohmann::json body;
  std::string raw;
};

/// Checks JSON shape, version and id. VersionMismatch or MalformedResponse.
Response parse_response(const std::string& line);

/// RemoteError for error responses, MalformedResponse on shape violations.
Capabilities decode_hello(const Response& r);
std::vector<Detection> decode_detections(const Response& r);
Classification decode_classification(const Response& r);

// Server side, used by the stub backend.
std::string encode_hello_reply(const Capabilities& caps, int version = kProtocolVersion);
std::string encode_detect_reply(std::uint64_t id, const std::vector<Detection>& dets);
std::string encode_classify_reply(std::uint64_t id, const Classification& c);
std::string encode_error_reply(std::uint64_t id, const std::string& message);

}  // namespace pyrolens::wire
