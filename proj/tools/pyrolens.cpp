// pyrolens command-line front end.
//
// Exit codes: 0 success, 1 processing failure, 2 usage or input error.

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "pyrolens/backends.hpp"
#include "pyrolens/cascade.hpp"
#include "pyrolens/dataset.hpp"
#include "pyrolens/evaluation.hpp"
#include "pyrolens/format.hpp"
#include "pyrolens/image_io.hpp"
#include "pyrolens/imaging.hpp"
#include "pyrolens/subprocess.hpp"
#include "pyrolens/tiling.hpp"

namespace fs = std::filesystem;
using namespace pyrolens;

namespace {

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

/// Input problems that map to exit code 2.
struct InputError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Clock = std::chrono::steady_clock;

class Manifest {
 public:
  Manifest(std::string command, std::vector<std::string> argv) : command_(std::move(command)), argv_(std::move(argv)) {}

  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  nlohmann::ordered_json outputs = nlohmann::ordered_json::object();

  void time(const std::string& stage, Clock::time_point start) {
    timing_[stage] = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
  }

  void write(const fs::path& path) const {
    nlohmann::ordered_json j;
    j["tool"] = "pyrolens";
    j["version"] = PYROLENS_VERSION;
    j["command"] = command_;
    j["argv"] = argv_;
    j["cwd"] = fs::current_path().string();
    j["config"] = config;
    j["inputs"] = inputs;
    j["outputs"] = outputs;
    j["timing_ms"] = timing_;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    out << j.dump(2) << '\n';
  }

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::ordered_json timing_ = nlohmann::ordered_json::object();
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << text;
}

nlohmann::ordered_json edge_json(const EdgeConfig& e) {
  nlohmann::ordered_json j;
  j["sigma"] = e.sigma;
  j["ksize"] = e.ksize;
  j["canny_low"] = e.canny_low;
  j["canny_high"] = e.canny_high;
  j["weight_laplacian"] = e.weight_laplacian;
  j["weight_canny"] = e.weight_canny;
  j["order"] = to_string(e.order);
  j["operator"] = to_string(e.edge_operator);
  return j;
}

struct EdgeFlags {
  std::string config_file;
  std::optional<double> sigma, canny_low, canny_high, weight_laplacian, weight_canny;
  std::optional<int> ksize;
  std::string order, op;

  void add(CLI::App* app) {
    app->add_option("--edge-config", config_file, "Edge settings as key = value lines")->check(CLI::ExistingFile);
    app->add_option("--sigma", sigma, "Gaussian sigma (default 1.0)");
    app->add_option("--ksize", ksize, "Gaussian kernel size, odd (default 5)");
    app->add_option("--canny-low", canny_low, "Canny low threshold (default 50)");
    app->add_option("--canny-high", canny_high, "Canny high threshold (default 150)");
    app->add_option("--weight-laplacian", weight_laplacian, "Weight of the edge-operator term (default 1)");
    app->add_option("--weight-canny", weight_canny, "Weight of the Canny term (default 1)");
    app->add_option("--order", order, "blur_first | edges_then_blur")->check(CLI::IsMember({"blur_first", "edges_then_blur"}));
    app->add_option("--operator", op, "laplacian | sobel")->check(CLI::IsMember({"laplacian", "sobel"}));
  }

  EdgeConfig resolve() const {
    EdgeConfig e;
    if (!config_file.empty()) {
      try {
        e = EdgeConfig::from_text(slurp(config_file));
      } catch (const std::invalid_argument& err) {
        throw InputError(err.what());
      }
    }
    if (sigma) e.sigma = *sigma;
    if (ksize) e.ksize = *ksize;
    if (canny_low) e.canny_low = *canny_low;
    if (canny_high) e.canny_high = *canny_high;
    if (weight_laplacian) e.weight_laplacian = *weight_laplacian;
    if (weight_canny) e.weight_canny = *weight_canny;
    if (!order.empty()) e.order = order == "blur_first" ? EdgeOrder::BlurFirst : EdgeOrder::EdgesThenBlur;
    if (!op.empty()) e.edge_operator = op == "laplacian" ? EdgeOperator::Laplacian : EdgeOperator::Sobel;
    try {
      e.validate();
    } catch (const std::invalid_argument& err) {
      throw InputError(err.what());
    }
    return e;
  }
};

std::pair<Eigen::Index, Eigen::Index> parse_patch(const std::string& s) {
  const auto x = s.find_first_of("xX");
  try {
    std::size_t used = 0;
    if (x == std::string::npos) {
      const long v = std::stol(s, &used);
      if (used != s.size() || v < 1) throw std::invalid_argument(s);
      return {v, v};
    }
    const long w = std::stol(s.substr(0, x), &used);
    if (used != x) throw std::invalid_argument(s);
    const long h = std::stol(s.substr(x + 1), &used);
    if (used != s.size() - x - 1 || w < 1 || h < 1) throw std::invalid_argument(s);
    return {w, h};
  } catch (const std::exception&) {
    throw InputError("--patch expects W or WxH with positive integers, got '" + s + "'");
  }
}

std::pair<double, double> parse_overlap(const std::string& s) {
  const auto comma = s.find(',');
  try {
    std::size_t used = 0;
    const double ox = std::stod(s.substr(0, comma), &used);
    double oy = ox;
    if (comma != std::string::npos) oy = std::stod(s.substr(comma + 1), &used);
    if (!(ox >= 0.0 && ox < 1.0 && oy >= 0.0 && oy < 1.0)) throw std::invalid_argument(s);
    return {ox, oy};
  } catch (const std::exception&) {
    throw InputError("--overlap expects X or X,Y in [0, 1), got '" + s + "'");
  }
}

FrameSource frame_source(const fs::path& src) {
  std::vector<fs::path> paths;
  if (fs::is_directory(src)) {
    for (const auto& e : fs::directory_iterator(src))
      if (e.is_regular_file() && is_image_file(e.path())) paths.push_back(e.path());
    std::sort(paths.begin(), paths.end());
  } else if (fs::is_regular_file(src)) {
    std::istringstream lines(slurp(src));
    std::string line;
    while (std::getline(lines, line)) {
      const std::string p = trim(line);
      if (p.empty() || p[0] == '#') continue;
      fs::path fp = p;
      if (fp.is_relative()) fp = src.parent_path() / fp;
      paths.push_back(fp);
    }
  } else {
    throw InputError("frame source " + src.string() + " does not exist");
  }
  FrameSource fsrc;
  for (const auto& p : paths) fsrc.names.push_back(p.filename().string());
  fsrc.load = [paths](std::size_t i) { return read_image(paths[i]); };
  return fsrc;
}

void draw_rect(RgbImage& img, const Box& b, std::uint8_t r, std::uint8_t g, std::uint8_t bl) {
  const Region reg = crop_region(b, img.width(), img.height());
  if (reg.w < 1 || reg.h < 1) return;
  for (int t = 0; t < 2; ++t) {
    const Eigen::Index x0 = reg.x0 + t, y0 = reg.y0 + t, x1 = reg.x0 + reg.w - 1 - t, y1 = reg.y0 + reg.h - 1 - t;
    if (x1 < x0 || y1 < y0) break;
    for (Eigen::Index x = x0; x <= x1; ++x) {
      img.set(x, y0, r, g, bl);
      img.set(x, y1, r, g, bl);
    }
    for (Eigen::Index y = y0; y <= y1; ++y) {
      img.set(x0, y, r, g, bl);
      img.set(x1, y, r, g, bl);
    }
  }
}

// ---------------------------------------------------------------------------

struct EdgesArgs {
  std::string input, output, manifest;
  EdgeFlags edges;
};

int cmd_edges(const EdgesArgs& a, const std::vector<std::string>& argv) {
  Manifest m("edges", argv);
  const EdgeConfig cfg = a.edges.resolve();
  m.config["edges"] = edge_json(cfg);
  m.inputs["image"] = a.input;
  m.outputs["image"] = a.output;
  Image img;
  try {
    img = read_image(a.input);
  } catch (const ImageIoError& e) {
    throw InputError(e.what());
  }
  const auto t0 = Clock::now();
  const GrayImage out = edge_enhance(to_gray(img), cfg);
  m.time("edge_enhance", t0);
  const auto t1 = Clock::now();
  fs::path out_path = a.output;
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  write_image(out_path, out);
  m.time("write", t1);
  if (!a.manifest.empty()) m.write(a.manifest);
  return kOk;
}

struct DetectArgs {
  std::string source, out, annotate;
  std::string patch = "640x640", overlap = "0.2";
  double nms_iou = kDefaultNmsIou, tau_detect = 0.6, tau_classify = 0.6;
  bool patched = false, keep_no_fire = false, fail_fast = false, mock = false;
  std::string backend_cmd, classifier_cmd, mock_script;
  std::optional<std::uint64_t> seed;
  std::size_t jobs = 1;
  int handshake_timeout_ms = 10'000;
  EdgeFlags edges;
};

int cmd_detect(const DetectArgs& a, const std::vector<std::string>& argv) {
  Manifest m("detect", argv);
  CascadeConfig cfg;
  cfg.tau_detect = a.tau_detect;
  cfg.tau_classify = a.tau_classify;
  cfg.use_patching = a.patched;
  std::tie(cfg.tiles.patch_width, cfg.tiles.patch_height) = parse_patch(a.patch);
  std::tie(cfg.tiles.overlap_x, cfg.tiles.overlap_y) = parse_overlap(a.overlap);
  cfg.nms_iou = a.nms_iou;
  cfg.edges = a.edges.resolve();
  cfg.drop_no_fire = !a.keep_no_fire;
  cfg.jobs = std::max<std::size_t>(a.jobs, 1);
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    throw InputError(e.what());
  }

  const FrameSource frames = frame_source(a.source);

  // Backend resolution: mock script, explicit command, then environment.
  std::unique_ptr<MockBackend> mock;
  std::unique_ptr<SubprocessBackend> det_proc, cls_proc;
  Detector* det = nullptr;
  Classifier* cls = nullptr;
  nlohmann::ordered_json backend_json;
  const auto t_hs = Clock::now();
  if (a.mock || !a.mock_script.empty()) {
    MockScript script;
    if (!a.mock_script.empty()) {
      try {
        script = MockScript::from_json(nlohmann::json::parse(slurp(a.mock_script)));
      } catch (const nlohmann::json::exception& e) {
        throw InputError(a.mock_script + ": " + e.what());
      } catch (const std::invalid_argument& e) {
        throw InputError(a.mock_script + ": " + e.what());
      }
    }
    if (a.seed) script.seed = *a.seed;
    mock = std::make_unique<MockBackend>(script);
    det = mock.get();
    cls = mock.get();
    backend_json["kind"] = "mock";
    backend_json["script"] = a.mock_script;
    backend_json["seed"] = script.seed;
  } else {
    std::string cmd = a.backend_cmd;
    if (cmd.empty()) {
      if (const char* env = std::getenv("PYROLENS_BACKEND_CMD")) cmd = env;
    }
    if (cmd.empty()) throw InputError("no backend: pass --backend-cmd, --mock-script or --mock, or set PYROLENS_BACKEND_CMD");
    ProcessOptions opts;
    opts.handshake_timeout = std::chrono::milliseconds(a.handshake_timeout_ms);
    try {
      det_proc = SubprocessBackend::launch(cmd, opts);
      if (!a.classifier_cmd.empty()) cls_proc = SubprocessBackend::launch(a.classifier_cmd, opts);
    } catch (const BackendError& e) {
      std::cerr << "pyrolens detect: backend handshake failed: " << e.what() << '\n';
      return kFailure;
    }
    det = det_proc.get();
    cls = cls_proc ? cls_proc.get() : det_proc.get();
    backend_json["kind"] = "process";
    backend_json["backend_cmd"] = cmd;
    backend_json["classifier_cmd"] = a.classifier_cmd;
  }
  m.time("handshake", t_hs);

  m.config["cascade"] = cfg.to_json();
  m.config["backend"] = backend_json;
  m.config["fail_fast"] = a.fail_fast;
  m.inputs["source"] = a.source;
  m.inputs["frames"] = frames.names;
  const fs::path out_dir = a.out;
  fs::create_directories(out_dir);
  const fs::path results_path = out_dir / "results.jsonl";
  m.outputs["results"] = results_path.string();
  if (!a.annotate.empty()) {
    fs::create_directories(a.annotate);
    m.outputs["annotate"] = a.annotate;
  }

  std::ofstream results(results_path, std::ios::binary);
  if (!results) throw std::runtime_error("cannot write " + results_path.string());
  std::size_t failed = 0;
  const auto t_run = Clock::now();
  SequenceOptions seq;
  seq.fail_fast = a.fail_fast;
  run_sequence(frames, *det, *cls, cfg, seq, [&](const FrameOutcome& o) {
    results << to_json(o).dump() << '\n';
    if (!o.ok()) {
      ++failed;
      std::cerr << "pyrolens detect: " << std::get<FrameError>(o.result).message << '\n';
      return;
    }
    if (!a.annotate.empty()) {
      RgbImage canvas = std::get<RgbImage>(adapt_channels(frames.load(o.index), Channels::Rgb));
      for (const auto& d : std::get<FrameResult>(o.result).detections) {
        if (d.source == Source::Direct) draw_rect(canvas, d.box, 255, 0, 0);
        else draw_rect(canvas, d.box, 255, 200, 0);
      }
      write_png(fs::path(a.annotate) / (fs::path(o.name).stem().string() + ".png"), canvas);
    }
  });
  results.close();
  m.time("frames", t_run);
  m.outputs["failed_frames"] = failed;
  m.write(out_dir / "manifest.json");
  return failed == 0 ? kOk : kFailure;
}

struct EvaluateArgs {
  std::string predictions, ground_truth, out, label = "pyrolens";
  bool pr_csv = false, coco = false;
  double score_threshold = 0.0;
};

Predictions load_predictions(const fs::path& p) {
  Predictions preds;
  auto parse = [&](const std::string& text, const std::string& where) {
    try {
      return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw InputError(where + ": " + e.what());
    }
  };
  auto dets_of = [&](const nlohmann::json& j, const std::string& where) {
    try {
      return detections_from_json(j);
    } catch (const std::exception& e) {
      throw InputError(where + ": " + e.what());
    }
  };
  if (fs::is_directory(p)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) preds[f.stem().string()] = dets_of(parse(slurp(f), f.string()), f.string());
  } else if (fs::is_regular_file(p)) {
    // JSON lines as written by `detect`.
    std::istringstream lines(slurp(p));
    std::string line;
    std::size_t n = 0;
    while (std::getline(lines, line)) {
      ++n;
      if (trim(line).empty()) continue;
      const std::string where = p.string() + ":" + std::to_string(n);
      const auto j = parse(line, where);
      if (j.contains("error")) throw InputError(where + ": frame recorded an error");
      preds[fs::path(j.at("frame").get<std::string>()).stem().string()] = dets_of(j.at("detections"), where);
    }
  } else {
    throw InputError("predictions " + p.string() + " do not exist");
  }
  return preds;
}

int cmd_evaluate(const EvaluateArgs& a, const std::vector<std::string>& argv) {
  Manifest m("evaluate", argv);
  const auto t0 = Clock::now();
  const Predictions preds = load_predictions(a.predictions);
  std::vector<std::string> warnings;
  GroundTruth gts;
  try {
    gts = load_ground_truth(index_dataset(a.ground_truth), &warnings);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  for (const auto& w : warnings) std::cerr << "pyrolens evaluate: warning: " << w << '\n';
  m.time("load", t0);

  EvalConfig cfg;
  cfg.method = a.coco ? ApMethod::Coco101 : ApMethod::Rectangular;
  cfg.score_threshold = a.score_threshold;
  cfg.label = a.label;
  m.config["ap_method"] = a.coco ? "coco101" : "rectangular";
  m.config["score_threshold"] = a.score_threshold;
  m.config["iou_thresholds"] = cfg.iou_thresholds;
  m.inputs["predictions"] = a.predictions;
  m.inputs["ground_truth"] = a.ground_truth;

  EvalReport rep;
  const auto t1 = Clock::now();
  try {
    rep = evaluate(preds, gts, cfg);
  } catch (const EvaluationError& e) {
    std::cerr << "pyrolens evaluate: " << e.what() << '\n';
    return kUsage;
  }
  m.time("evaluate", t1);

  const fs::path out = a.out;
  fs::create_directories(out);
  write_text(out / "report.json", rep.to_json().dump(2) + "\n");
  write_text(out / "report.txt", rep.to_text());
  m.outputs["report_json"] = (out / "report.json").string();
  m.outputs["report_text"] = (out / "report.txt").string();
  if (a.pr_csv) {
    for (const auto& c : rep.per_category) {
      char name[64];
      std::snprintf(name, sizeof name, "pr_c%d_iou%02d.csv", c.category, static_cast<int>(std::lround(c.iou * 100)));
      write_text(out / name, EvalReport::curve_csv(c.curve));
    }
  }
  std::cout << rep.to_text();
  m.write(out / "manifest.json");
  return kOk;
}

struct ConvertArgs {
  std::string src, dst;
};

int cmd_convert_gray(const ConvertArgs& a, const std::vector<std::string>& argv) {
  Manifest m("convert-gray", argv);
  if (!fs::is_directory(a.src)) throw InputError("source " + a.src + " is not a directory");
  m.inputs["source"] = a.src;
  m.outputs["destination"] = a.dst;
  const auto t0 = Clock::now();
  const auto rep = convert_dataset_gray(a.src, a.dst);
  m.time("convert", t0);
  write_text(fs::path(a.dst) / "conversion_report.json", rep.to_json().dump(2) + "\n");
  m.outputs["report"] = (fs::path(a.dst) / "conversion_report.json").string();
  m.write(fs::path(a.dst) / "manifest.json");
  std::cout << "converted " << rep.converted << " images, copied " << rep.labels_copied << " label files, "
            << rep.failures.size() << " failures\n";
  for (const auto& [p, why] : rep.failures) std::cerr << "pyrolens convert-gray: " << p << ": " << why << '\n';
  return rep.failures.empty() ? kOk : kFailure;
}

struct CropsArgs {
  std::string dataset, out;
  double ratio = 1.0, max_iou = 0.1;
  std::uint64_t seed = 0;
  EdgeFlags edges;
};

int cmd_build_crops(const CropsArgs& a, const std::vector<std::string>& argv) {
  Manifest m("build-crops", argv);
  const EdgeConfig edges = a.edges.resolve();
  NegativeSampling ns;
  ns.ratio = a.ratio;
  ns.max_iou = a.max_iou;
  ns.seed = a.seed;
  DatasetIndex idx;
  try {
    idx = index_dataset(a.dataset);
  } catch (const std::exception& e) {
    throw InputError(e.what());
  }
  m.config["edges"] = edge_json(edges);
  m.config["negative_ratio"] = ns.ratio;
  m.config["negative_max_iou"] = ns.max_iou;
  m.config["seed"] = ns.seed;
  m.inputs["dataset"] = a.dataset;
  const fs::path out = a.out;
  const auto t0 = Clock::now();
  const auto rep = build_crops(idx, edges, out / "fire", out / "nofire", ns);
  m.time("build", t0);
  write_text(out / "crops_report.json", rep.to_json().dump(2) + "\n");
  m.outputs["fire"] = (out / "fire").string();
  m.outputs["nofire"] = (out / "nofire").string();
  m.write(out / "manifest.json");
  std::cout << format_stats_table({}, {CropStats{"crops", rep.fire, rep.no_fire}});
  for (const auto& [p, why] : rep.failures) std::cerr << "pyrolens build-crops: " << p << ": " << why << '\n';
  return rep.failures.empty() ? kOk : kFailure;
}

struct TilesArgs {
  long width = 0, height = 0;
  std::string patch = "640x640", overlap = "0.2";
};

int cmd_tiles(const TilesArgs& a) {
  if (a.width < 1 || a.height < 1) throw InputError("image dimensions must be positive");
  const auto [pw, ph] = parse_patch(a.patch);
  const auto [ox, oy] = parse_overlap(a.overlap);
  std::cout << plan_tiles(a.width, a.height, pw, ph, ox, oy).to_json().dump() << '\n';
  return kOk;
}

struct StatsArgs {
  std::vector<std::string> splits, crops;
  std::string manifest;
};

std::pair<std::string, fs::path> split_arg(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw InputError("expected NAME=DIR, got '" + s + "'");
  return {s.substr(0, eq), s.substr(eq + 1)};
}

int cmd_stats(const StatsArgs& a, const std::vector<std::string>& argv) {
  Manifest m("stats", argv);
  std::vector<SplitStats> det;
  std::vector<CropStats> cls;
  for (const auto& s : a.splits) {
    const auto [name, dir] = split_arg(s);
    try {
      det.push_back(dataset_stats(index_dataset(dir, name)));
    } catch (const std::exception& e) {
      throw InputError(e.what());
    }
    m.inputs["detect_" + name] = dir.string();
  }
  for (const auto& s : a.crops) {
    const auto [name, dir] = split_arg(s);
    if (!fs::is_directory(dir)) throw InputError(dir.string() + " is not a directory");
    cls.push_back(crop_stats(dir, name));
    m.inputs["classify_" + name] = dir.string();
  }
  if (det.empty() && cls.empty()) throw InputError("stats needs at least one --split or --crops");
  std::cout << format_stats_table(det, cls);
  if (!a.manifest.empty()) m.write(a.manifest);
  return kOk;
}

int run(const std::vector<std::string>& args);

int cmd_replay(const std::string& manifest_path, const std::string& out_override) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(slurp(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw InputError(manifest_path + ": " + e.what());
  }
  auto argv = j.at("argv").get<std::vector<std::string>>();
  if (!out_override.empty()) {
    bool replaced = false;
    for (std::size_t i = 0; i + 1 < argv.size(); ++i) {
      if (argv[i] == "--out") {
        argv[i + 1] = fs::absolute(out_override).string();
        replaced = true;
      }
    }
    if (!replaced) throw InputError("manifest command has no --out to override");
  }
  const auto backend = j.value("/config/backend"_json_pointer, nlohmann::json::object());
  if (backend.value("kind", "") == "process" &&
      std::find(argv.begin(), argv.end(), "--backend-cmd") == argv.end()) {
    argv.push_back("--backend-cmd");
    argv.push_back(backend.at("backend_cmd").get<std::string>());
  }
  if (j.contains("cwd")) fs::current_path(j.at("cwd").get<std::string>());
  return run(argv);
}

int run(const std::vector<std::string>& args) {
  CLI::App app{"pyrolens: nighttime fire detection pipeline toolkit"};
  app.set_version_flag("--version", PYROLENS_VERSION);
  app.require_subcommand(1);

  EdgesArgs edges;
  auto* c_edges = app.add_subcommand("edges", "Edge-enhance one image (blur, Laplacian + Canny)");
  c_edges->add_option("input", edges.input)->required();
  c_edges->add_option("output", edges.output, "Output path (.png or .pgm)")->required();
  c_edges->add_option("--manifest", edges.manifest, "Write a run manifest here");
  edges.edges.add(c_edges);

  DetectArgs det;
  auto* c_det = app.add_subcommand("detect", "Run the two-stage cascade over a frame source");
  c_det->add_option("source", det.source, "Directory of frames or a list file")->required();
  c_det->add_option("--out", det.out, "Output directory")->required();
  c_det->add_flag("--patched", det.patched, "Stage one runs on overlapping patches");
  c_det->add_option("--patch", det.patch, "Patch size W or WxH")->capture_default_str();
  c_det->add_option("--overlap", det.overlap, "Patch overlap X or X,Y")->capture_default_str();
  c_det->add_option("--nms-iou", det.nms_iou)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_det->add_option("--tau-detect", det.tau_detect)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_det->add_option("--tau-classify", det.tau_classify)->check(CLI::Range(0.0, 1.0))->capture_default_str();
  c_det->add_option("--backend-cmd", det.backend_cmd, "Detector process (env PYROLENS_BACKEND_CMD)");
  c_det->add_option("--classifier-cmd", det.classifier_cmd, "Classifier process (default: the detector process)");
  c_det->add_option("--mock-script", det.mock_script, "Use the mock backend with this script")->check(CLI::ExistingFile);
  c_det->add_flag("--mock", det.mock, "Use the mock backend with an empty script");
  c_det->add_option("--seed", det.seed, "Mock backend seed");
  c_det->add_option("--jobs", det.jobs, "Concurrent backend calls per frame")->check(CLI::PositiveNumber);
  c_det->add_option("--annotate", det.annotate, "Write frames with boxes drawn into this directory");
  c_det->add_option("--handshake-timeout-ms", det.handshake_timeout_ms)->capture_default_str();
  c_det->add_flag("--keep-no-fire", det.keep_no_fire, "Keep cascade boxes relabelled as no-fire");
  c_det->add_flag("--fail-fast", det.fail_fast, "Stop at the first failed frame");
  det.edges.add(c_det);

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Score predictions against YOLO-format ground truth");
  c_ev->add_option("predictions", ev.predictions, "Directory of <image>.json files or a detect results.jsonl")->required();
  c_ev->add_option("ground_truth", ev.ground_truth, "Dataset root with images/ and labels/")->required();
  c_ev->add_option("--out", ev.out, "Report directory")->required();
  c_ev->add_flag("--pr-csv", ev.pr_csv, "Dump PR curves as CSV");
  c_ev->add_flag("--coco", ev.coco, "101-point interpolated AP instead of the rectangular sum");
  c_ev->add_option("--score-threshold", ev.score_threshold, "Score gate for precision/recall/F1")->check(CLI::Range(0.0, 1.0));
  c_ev->add_option("--label", ev.label, "Method name in the table");

  ConvertArgs conv;
  auto* c_conv = app.add_subcommand("convert-gray", "Convert a dataset to grayscale");
  c_conv->add_option("src", conv.src)->required();
  c_conv->add_option("dst", conv.dst)->required();

  CropsArgs crops;
  auto* c_crops = app.add_subcommand("build-crops", "Build the fire / no-fire classification crops");
  c_crops->add_option("dataset", crops.dataset, "Dataset root with images/ and labels/")->required();
  c_crops->add_option("out", crops.out, "Output root; fire/ and nofire/ are created inside")->required();
  c_crops->add_option("--ratio", crops.ratio, "No-fire crops per fire crop")->check(CLI::NonNegativeNumber)->capture_default_str();
  c_crops->add_option("--max-iou", crops.max_iou, "Negative crops stay below this IoU with any box")->capture_default_str();
  c_crops->add_option("--seed", crops.seed)->capture_default_str();
  crops.edges.add(c_crops);

  TilesArgs tiles;
  auto* c_tiles = app.add_subcommand("tiles", "Print the tile plan for an image size as JSON");
  c_tiles->add_option("width", tiles.width)->required();
  c_tiles->add_option("height", tiles.height)->required();
  c_tiles->add_option("--patch", tiles.patch)->capture_default_str();
  c_tiles->add_option("--overlap", tiles.overlap)->capture_default_str();

  StatsArgs stats;
  auto* c_stats = app.add_subcommand("stats", "Image and box counts per split");
  c_stats->add_option("--split", stats.splits, "NAME=DIR of a detection split");
  c_stats->add_option("--crops", stats.crops, "NAME=DIR of a crop dataset (fire/, nofire/)");
  c_stats->add_option("--manifest", stats.manifest, "Write a run manifest here");

  std::string replay_manifest, replay_out;
  auto* c_replay = app.add_subcommand("replay", "Re-run the command recorded in a manifest");
  c_replay->add_option("manifest", replay_manifest)->required()->check(CLI::ExistingFile);
  c_replay->add_option("--out", replay_out, "Override the recorded --out directory");

  std::string fp_image;
  auto* c_fp = app.add_subcommand("fingerprint", "Print the image fingerprint used by mock scripts");
  c_fp->add_option("image", fp_image)->required();

  std::vector<std::string> rev(args.rbegin(), args.rend() - 1);
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_edges) return cmd_edges(edges, args);
    if (*c_det) return cmd_detect(det, args);
    if (*c_ev) return cmd_evaluate(ev, args);
    if (*c_conv) return cmd_convert_gray(conv, args);
    if (*c_crops) return cmd_build_crops(crops, args);
    if (*c_tiles) return cmd_tiles(tiles);
    if (*c_stats) return cmd_stats(stats, args);
    if (*c_replay) return cmd_replay(replay_manifest, replay_out);
    if (*c_fp) {
      try {
        std::cout << fingerprint_hex(fingerprint(read_image(fp_image))) << '\n';
      } catch (const ImageIoError& e) {
        throw InputError(e.what());
      }
      return kOk;
    }
  } catch (const InputError& e) {
    std::cerr << "pyrolens: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "pyrolens: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args);
}
