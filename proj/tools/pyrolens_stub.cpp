// Scripted backend speaking the line protocol on stdin/stdout. Used as the
// conformance fixture for the subprocess client.

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pyrolens/backends.hpp"
#include "pyrolens/wire.hpp"

using namespace pyrolens;

int main(int argc, char** argv) {
  CLI::App app{"pyrolens-stub: scripted model backend"};
  std::string name = "stub";
  int capacity = 1;
  std::string channels = "gray";
  int version = wire::kProtocolVersion;
  bool silent = false;
  std::size_t reorder = 1;
  std::string detections_json = R"([{"category":0,"score":0.75,"bbox":[1,2,3,4]}])";
  std::string classify_json = R"({"category":0,"score":0.9})";
  std::string script_path;
  std::string log_path;
  std::optional<double> force_score;
  std::string fail_op;
  long exit_after = -1;

  app.add_option("--name", name);
  app.add_option("--capacity", capacity)->check(CLI::PositiveNumber);
  app.add_option("--channels", channels)->check(CLI::IsMember({"gray", "rgb"}));
  app.add_option("--version", version, "Protocol version to advertise in every message");
  app.add_flag("--silent", silent, "Read requests but never answer");
  app.add_option("--reorder", reorder, "Collect this many requests, then answer them last-first")->check(CLI::PositiveNumber);
  app.add_option("--detections", detections_json, "JSON array returned for every detect request");
  app.add_option("--classify", classify_json, "JSON object returned for every classify request");
  app.add_option("--script", script_path, "Mock script JSON; overrides --detections/--classify");
  app.add_option("--log", log_path, "Append every received line to this file");
  app.add_option("--force-score", force_score, "Overwrite every returned score (may be out of range)");
  app.add_option("--fail", fail_op, "Answer this op with an error")->check(CLI::IsMember({"detect", "classify"}));
  app.add_option("--exit-after", exit_after, "Die without answering once this many detect/classify requests were served");
  CLI11_PARSE(app, argc, argv);

  std::optional<MockBackend> mock;
  std::vector<Detection> fixed_dets;
  Classification fixed_cls;
  try {
    if (!script_path.empty()) {
      std::ifstream in(script_path);
      mock.emplace(MockScript::from_json(nlohmann::json::parse(in)));
    } else {
      fixed_dets = detections_from_json(nlohmann::json::parse(detections_json));
      const auto c = nlohmann::json::parse(classify_json);
      fixed_cls = Classification{c.at("category").get<int>(), c.at("score").get<double>()};
    }
  } catch (const std::exception& e) {
    std::cerr << "pyrolens-stub: " << e.what() << '\n';
    return 2;
  }

  std::ofstream log;
  if (!log_path.empty()) log.open(log_path, std::ios::app);

  auto with_version = [&](std::string line) {
    if (version == wire::kProtocolVersion) return line;
    auto j = nlohmann::ordered_json::parse(line);
    j["v"] = version;
    return j.dump();
  };

  std::vector<std::string> queue;
  auto flush = [&] {
    for (auto it = queue.rbegin(); it != queue.rend(); ++it) std::cout << *it << '\n';
    std::cout.flush();
    queue.clear();
  };

  long served = 0;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (log.is_open()) log << line << '\n' << std::flush;
    if (silent) continue;
    std::uint64_t id = 0;
    std::string reply;
    try {
      const auto req = nlohmann::json::parse(line);
      id = req.at("id").get<std::uint64_t>();
      const auto op = req.at("op").get<std::string>();
      if (op == "hello") {
        Capabilities caps{name, capacity, channels == "rgb" ? Channels::Rgb : Channels::Gray, true, true};
        std::cout << wire::encode_hello_reply(caps, version) << '\n' << std::flush;
        continue;
      }
      if (exit_after >= 0 && ++served > exit_after) return 3;
      if (op == fail_op) {
        reply = wire::encode_error_reply(id, "scripted failure");
      } else if (op == "detect") {
        const Image img = wire::decode_image(req.at("image"));
        auto dets = mock ? mock->detect(img, RegionHint{fingerprint(img), Region{0, 0, width_of(img), height_of(img)}})
                         : fixed_dets;
        if (force_score) {
          // Bypass validation so out-of-range scores reach the client.
          nlohmann::ordered_json j;
          j["v"] = wire::kProtocolVersion;
          j["id"] = id;
          auto arr = to_json(dets);
          for (auto& d : arr) d["score"] = *force_score;
          j["detections"] = arr;
          reply = j.dump();
        } else {
          reply = wire::encode_detect_reply(id, dets);
        }
      } else if (op == "classify") {
        const Image img = wire::decode_image(req.at("image"));
        Classification c = fixed_cls;
        if (mock) {
          const auto& g = std::get<GrayImage>(img);
          c = mock->classify(g, RegionHint{fingerprint(img), Region{0, 0, g.cols(), g.rows()}});
        }
        if (force_score) c.score = *force_score;
        reply = wire::encode_classify_reply(id, c);
      } else {
        reply = wire::encode_error_reply(id, "unknown op '" + op + "'");
      }
    } catch (const std::exception& e) {
      reply = wire::encode_error_reply(id, e.what());
    }
    queue.push_back(with_version(reply));
    if (queue.size() >= reorder) flush();
  }
  flush();
  return 0;
}
