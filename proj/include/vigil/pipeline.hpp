#pragma once

#include <algorithm>
#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "vigil/color.hpp"
#include "vigil/config.hpp"
#include "vigil/detect.hpp"
#include "vigil/error.hpp"
#include "vigil/imaging.hpp"
#include "vigil/plate.hpp"
#include "vigil/registry.hpp"
#include "vigil/vmmr.hpp"

namespace vigil {

// ---- timings ----------------------------------------------------------------------

enum class Stage { Detection, Plate, Vmmr, Color };

inline constexpr std::array<Stage, 4> kStageOrder{Stage::Detection, Stage::Plate, Stage::Vmmr, Stage::Color};

inline std::string_view to_string(Stage s) {
  switch (s) {
    case Stage::Detection: return "detection";
    case Stage::Plate: return "plate";
    case Stage::Vmmr: return "vmmr";
    case Stage::Color: return "color";
  }
  return "?";
}

inline std::string_view table_label(Stage s) {
  switch (s) {
    case Stage::Detection: return "Vehicle Detection";
    case Stage::Plate: return "License Plate Recognition";
    case Stage::Vmmr: return "Make and Model Recognition";
    case Stage::Color: return "Colour Classification";
  }
  return "?";
}

struct StageTiming {
  std::string stage;
  long long samples = 0;
  double total_s = 0;
  double mean_s = 0;
};

inline Json to_json(const StageTiming& t) {
  return {{"stage", t.stage}, {"samples", t.samples}, {"total_s", t.total_s}, {"mean_s", t.mean_s}};
}

class LatencyAccumulator {
 public:
  void add(Stage s, double seconds) {
    std::lock_guard lock(mu_);
    auto& slot = slots_[static_cast<std::size_t>(s)];
    ++slot.samples;
    slot.total += seconds;
  }

  void frame_done() {
    std::lock_guard lock(mu_);
    ++frames_;
  }

  long long frames() const {
    std::lock_guard lock(mu_);
    return frames_;
  }

  /// Rows for the stages that ran, in detection, plate, vmmr, colour order.
  std::vector<StageTiming> rows() const {
    std::lock_guard lock(mu_);
    if (frames_ == 0) throw Error(Errc::NoSamples, "no frame has been processed");
    std::vector<StageTiming> out;
    for (auto s : kStageOrder) {
      const auto& slot = slots_[static_cast<std::size_t>(s)];
      if (slot.samples == 0) continue;
      out.push_back({std::string(to_string(s)), slot.samples, slot.total, slot.total / static_cast<double>(slot.samples)});
    }
    return out;
  }

 private:
  struct Slot {
    long long samples = 0;
    double total = 0;
  };
  mutable std::mutex mu_;
  std::array<Slot, 4> slots_{};
  long long frames_ = 0;
};

inline double pipeline_latency(const std::vector<StageTiming>& rows) {
  double sum = 0;
  for (const auto& r : rows) sum += r.mean_s;
  return sum;
}

/// Stage rows plus the summed pipeline latency, in the module table layout.
inline std::string render_latency_table(const std::vector<StageTiming>& rows) {
  std::ostringstream os;
  os << std::left << std::setw(30) << "Stage" << std::right << std::setw(10) << "Samples" << std::setw(14) << "Total (s)"
     << std::setw(14) << "Avg Time (s)" << "\n";
  for (const auto& r : rows) {
    std::string label = r.stage;
    for (auto s : kStageOrder)
      if (to_string(s) == r.stage) label = std::string(table_label(s));
    os << std::left << std::setw(30) << label << std::right << std::setw(10) << r.samples << std::setw(14) << std::fixed
       << std::setprecision(4) << r.total_s << std::setw(14) << std::setprecision(4) << r.mean_s << "\n";
  }
  os << std::left << std::setw(30) << "Pipeline" << std::right << std::setw(10) << "" << std::setw(14) << "" << std::setw(14)
     << std::fixed << std::setprecision(4) << pipeline_latency(rows) << "\n";
  return os.str();
}

// ---- queue ------------------------------------------------------------------------

enum class DropPolicy { DropOldest, Block };

template <typename T>
class BoundedQueue {
 public:
  BoundedQueue(std::size_t capacity, DropPolicy policy) : capacity_(capacity), policy_(policy) {
    if (capacity < 1) throw Error(Errc::ConfigError, "queue capacity must be at least 1");
  }

  /// Returns how many queued items were discarded to make room (0 or 1).
  /// A closed queue refuses the item and counts it as dropped.
  std::size_t push(T item) {
    std::unique_lock lock(mu_);
    if (policy_ == DropPolicy::Block) not_full_.wait(lock, [&] { return closed_ || items_.size() < capacity_; });
    if (closed_) {
      ++dropped_;
      return 1;
    }
    std::size_t dropped_now = 0;
    if (items_.size() >= capacity_) {
      items_.pop_front();
      ++dropped_;
      dropped_now = 1;
    }
    items_.push_back(std::move(item));
    not_empty_.notify_one();
    return dropped_now;
  }

  /// Blocks until an item arrives; nullopt once closed and drained.
  std::optional<T> pop() {
    std::unique_lock lock(mu_);
    not_empty_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    not_full_.notify_one();
    return v;
  }

  void close() {
    std::lock_guard lock(mu_);
    closed_ = true;
    not_empty_.notify_all();
    not_full_.notify_all();
  }

  std::size_t size() const {
    std::lock_guard lock(mu_);
    return items_.size();
  }

  std::size_t dropped() const {
    std::lock_guard lock(mu_);
    return dropped_;
  }

 private:
  std::size_t capacity_;
  DropPolicy policy_;
  mutable std::mutex mu_;
  std::condition_variable not_empty_;
  std::condition_variable not_full_;
  std::deque<T> items_;
  std::size_t dropped_ = 0;
  bool closed_ = false;
};

// ---- configuration ------------------------------------------------------------------

struct StageToggles {
  bool plate = true;
  bool vmmr = true;
  bool color = true;
};

// Forces an extractor to fail, for testing that the others are unaffected.
struct FaultInjection {
  bool plate = false;
  bool vmmr = false;
  bool color = false;
};

struct PipelineConfig {
  std::string source;  // directory, glob ("dir/scene_*.ppm"), single file, or "listen"
  std::string camera_id = "cam-1";
  std::string detector = "motion";
  std::string ocr = "template";
  std::size_t queue_capacity = 8;
  DropPolicy drop_policy = DropPolicy::DropOldest;
  StageToggles stages;
  FaultInjection faults;
  std::optional<std::filesystem::path> background;
  std::optional<std::filesystem::path> vmmr_weights;
  std::optional<std::filesystem::path> vmmr_labels;
  std::optional<std::filesystem::path> cameras;
  std::filesystem::path data_dir = "vigil-data";
  double source_fps = 0;        // 0: push frames as fast as they load
  int stage_delay_ms = 0;       // debug: extra work after detection
  bool single_threaded = false;
  std::int64_t start_ts_ms = 0;      // 0: stamp frames with the wall clock
  std::int64_t frame_interval_ms = 40;
  MotionConfig motion;
  ColorOptions color;
  plate::PlateConfig plate;
};

inline DropPolicy parse_drop_policy(const std::string& s) {
  const auto f = fold_case(s);
  if (f == "drop-oldest" || f == "drop_oldest") return DropPolicy::DropOldest;
  if (f == "block") return DropPolicy::Block;
  throw Error(Errc::ConfigError, "drop_policy must be drop-oldest or block, got '" + s + "'");
}

/// Reads the flat key=value config. Relative paths resolve against `base`.
/// The store directory comes from data_dir, else VIGIL_DATA_DIR, else ./vigil-data.
inline PipelineConfig parse_pipeline_config(const KeyValueFile& kv, const std::filesystem::path& base = {}) {
  PipelineConfig c;
  auto path_of = [&](const std::string& v) {
    std::filesystem::path p(v);
    return p.is_absolute() || base.empty() ? p : base / p;
  };
  auto opt_path = [&](const char* key) -> std::optional<std::filesystem::path> {
    if (auto v = kv.get(key); v && !v->empty()) return path_of(*v);
    return std::nullopt;
  };
  if (auto v = kv.get("source")) c.source = (*v == "listen") ? *v : path_of(*v).string();
  c.camera_id = kv.get_or("camera_id", c.camera_id);
  c.detector = kv.get_or("detector", c.detector);
  c.ocr = kv.get_or("ocr", c.ocr);
  const auto cap = kv.number_or<long long>("queue_capacity", static_cast<long long>(c.queue_capacity));
  if (cap < 1) throw Error(Errc::ConfigError, "queue_capacity must be at least 1");
  c.queue_capacity = static_cast<std::size_t>(cap);
  if (auto v = kv.get("drop_policy")) c.drop_policy = parse_drop_policy(*v);
  c.stages.plate = kv.flag_or("stage.plate", true);
  c.stages.vmmr = kv.flag_or("stage.vmmr", true);
  c.stages.color = kv.flag_or("stage.color", true);
  c.faults.plate = kv.flag_or("fault.plate", false);
  c.faults.vmmr = kv.flag_or("fault.vmmr", false);
  c.faults.color = kv.flag_or("fault.color", false);
  c.background = opt_path("background");
  c.vmmr_weights = opt_path("vmmr.weights");
  c.vmmr_labels = opt_path("vmmr.labels");
  c.cameras = opt_path("cameras");
  if (auto v = kv.get("data_dir")) {
    c.data_dir = path_of(*v);
  } else if (const char* env = std::getenv("VIGIL_DATA_DIR"); env && *env) {
    c.data_dir = env;
  }
  c.source_fps = kv.number_or<double>("source_fps", 0.0);
  c.stage_delay_ms = kv.number_or<int>("debug.stage_delay_ms", 0);
  c.single_threaded = kv.flag_or("single_threaded", false);
  c.start_ts_ms = kv.number_or<std::int64_t>("start_ts_ms", 0);
  c.frame_interval_ms = kv.number_or<std::int64_t>("frame_interval_ms", 40);
  c.motion.alpha = kv.number_or<double>("motion.alpha", c.motion.alpha);
  c.motion.diff_threshold = kv.number_or<double>("motion.diff_threshold", c.motion.diff_threshold);
  c.motion.proposal.min_area = kv.number_or<long long>("motion.min_area", c.motion.proposal.min_area);
  c.color.k = static_cast<std::size_t>(kv.number_or<long long>("color.k", static_cast<long long>(c.color.k)));
  c.color.seed = kv.number_or<std::uint64_t>("color.seed", c.color.seed);
  if (c.source_fps < 0) throw Error(Errc::ConfigError, "source_fps must be >= 0");
  return c;
}

// ---- context --------------------------------------------------------------------------

struct VehicleModel {
  vmmr::ArchitectureSpec spec;
  vmmr::WeightBundle weights;
  std::vector<std::string> labels;
};

/// One label per line; a missing file yields "class-N" names.
inline std::vector<std::string> load_labels(const std::filesystem::path& path, int classes) {
  std::vector<std::string> out;
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::ConfigError, "cannot read labels " + path.string());
    std::string line;
    while (std::getline(in, line)) {
      auto t = trim(line);
      if (!t.empty()) out.push_back(t);
    }
  }
  while (static_cast<int>(out.size()) < classes) out.push_back("class-" + std::to_string(out.size()));
  return out;
}

/// "Make Model words" -> make = first word, model = the rest (if any).
inline std::pair<std::string, std::optional<std::string>> split_label(const std::string& label) {
  const auto sp = label.find(' ');
  if (sp == std::string::npos) return {label, std::nullopt};
  return {label.substr(0, sp), trim(std::string_view(label).substr(sp + 1))};
}

struct FrameEnvelope {
  Frame frame;
  std::int64_t capture_ts = 0;
  std::uint64_t sequence = 0;
  std::string camera_id;
};

using MatchSink = std::function<void(const Sighting&, const MatchScore&, const WatchlistEntry&)>;

struct PipelineContext {
  std::unique_ptr<Detector> detector;
  std::unique_ptr<plate::OcrEngine> ocr;
  std::optional<VehicleModel> vehicle_model;
  Registry* registry = nullptr;
  CameraRegistry cameras;
  LatencyAccumulator timings;
  StageToggles stages;
  FaultInjection faults;
  ColorOptions color;
  plate::PlateConfig plate;
  int stage_delay_ms = 0;
  MatchSink on_match;
};

namespace detail {
template <typename Fn>
auto timed(LatencyAccumulator& acc, Stage s, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  struct Guard {
    LatencyAccumulator& acc;
    Stage s;
    std::chrono::steady_clock::time_point t0;
    ~Guard() { acc.add(s, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()); }
  } g{acc, s, t0};
  return fn();
}

inline void inject(bool on, const char* stage) {
  if (on) throw Error(Errc::SourceError, std::string("injected fault in ") + stage);
}
}  // namespace detail

/// Detects regions, runs each extractor independently per region and records
/// one sighting per region that yielded any attribute. An extractor failure
/// only leaves its own attributes absent.
inline std::vector<Sighting> process_frame(const FrameEnvelope& env, PipelineContext& ctx) {
  if (env.camera_id.empty()) throw Error(Errc::SourceError, "frame without camera id");
  if (!ctx.detector) throw Error(Errc::ConfigError, "pipeline context has no detector");
  const auto regions = detail::timed(ctx.timings, Stage::Detection, [&] { return ctx.detector->detect(env.frame); });
  if (ctx.stage_delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ctx.stage_delay_ms));

  std::vector<Sighting> out;
  for (std::size_t i = 0; i < regions.size(); ++i) {
    const Frame vehicle = crop(env.frame, regions[i].bbox);
    Sighting s;
    s.camera_id = env.camera_id;
    s.timestamp_ms = env.capture_ts;
    s.location = ctx.cameras.locate(env.camera_id);
    s.frame_sequence = env.sequence;
    s.id = env.camera_id + "-" + std::to_string(env.capture_ts) + "-" + std::to_string(env.sequence) + "-" + std::to_string(i);

    if (ctx.stages.plate) {
      detail::timed(ctx.timings, Stage::Plate, [&] {
        try {
          detail::inject(ctx.faults.plate, "plate");
          const auto r = plate::read_plate(vehicle, ctx.plate, ctx.ocr.get());
          s.attrs.plate_text = r.text;
          if (r.plate_type != PlateType::Unknown) s.attrs.plate_type = r.plate_type;
          s.confidences["plate"] = r.confidence;
        } catch (const Error&) {
        }
        return 0;
      });
    }
    if (ctx.stages.vmmr && ctx.vehicle_model) {
      detail::timed(ctx.timings, Stage::Vmmr, [&] {
        try {
          detail::inject(ctx.faults.vmmr, "vmmr");
          const auto& m = *ctx.vehicle_model;
          const auto pred = vmmr::classify(m.spec, m.weights, vehicle);
          const auto [make, model] = split_label(m.labels.at(static_cast<std::size_t>(pred.class_ranks.front())));
          s.attrs.make = make;
          s.attrs.model = model;
          s.confidences["vmmr"] = pred.probabilities.front();
        } catch (const Error&) {
        }
        return 0;
      });
    }
    if (ctx.stages.color) {
      detail::timed(ctx.timings, Stage::Color, [&] {
        try {
          detail::inject(ctx.faults.color, "color");
          const auto v = classify_vehicle_color(vehicle, ctx.color);
          s.attrs.color = v.name;
          s.confidences["color"] = v.fraction;
        } catch (const Error&) {
        }
        return 0;
      });
    }
    if (s.attrs.empty()) continue;

    // Write first, then notify: an alert always refers to a durable sighting.
    if (ctx.registry) {
      ctx.registry->record_sighting(s);
      if (ctx.on_match) {
        for (const auto& e : ctx.registry->entries(true)) {
          const auto m = score_match(s, e, ctx.registry->options().policy);
          if (m.matched) ctx.on_match(s, m, e);
        }
      }
    }
    out.push_back(std::move(s));
  }
  ctx.timings.frame_done();
  return out;
}

// ---- pipeline -------------------------------------------------------------------------

struct RunReport {
  std::vector<StageTiming> stages;
  double pipeline_latency_s = 0;
  std::uint64_t frames_in = 0;
  std::uint64_t frames_processed = 0;
  std::uint64_t frames_dropped = 0;
  std::uint64_t sightings = 0;
  std::vector<std::uint64_t> emitted_sequences;  // frame sequence of every emitted sighting, in order

  std::string render() const {
    std::ostringstream os;
    os << render_latency_table(stages);
    os << "frames in " << frames_in << ", processed " << frames_processed << ", dropped " << frames_dropped << ", sightings "
       << sightings << "\n";
    return os.str();
  }

  Json to_json() const {
    Json rows = Json::array();
    for (const auto& s : stages) rows.push_back(vigil::to_json(s));
    return {{"stages", rows},
            {"pipeline_latency_s", pipeline_latency_s},
            {"frames_in", frames_in},
            {"frames_processed", frames_processed},
            {"frames_dropped", frames_dropped},
            {"sightings", sightings}};
  }
};

inline void init_context(PipelineContext& ctx, const PipelineConfig& cfg, Registry* registry,
                         const DetectorRegistry& detectors = {}, const plate::OcrRegistry& ocrs = {}) {
  ctx.detector = detectors.make(cfg.detector, cfg.motion);
  if (cfg.background) {
    if (auto* md = dynamic_cast<MotionDetector*>(ctx.detector.get())) md->prime(to_grayscale(load_frame(*cfg.background)));
  }
  ctx.ocr = ocrs.make(cfg.ocr);
  if (cfg.vmmr_weights) {
    auto loaded = vmmr::load_weights(*cfg.vmmr_weights);
    VehicleModel vm{loaded.spec, std::move(loaded.weights), {}};
    vm.labels = load_labels(cfg.vmmr_labels.value_or(std::filesystem::path{}), vm.spec.num_classes);
    ctx.vehicle_model = std::move(vm);
  }
  if (cfg.cameras) ctx.cameras = CameraRegistry::load(*cfg.cameras);
  ctx.registry = registry;
  ctx.stages = cfg.stages;
  ctx.faults = cfg.faults;
  ctx.color = cfg.color;
  ctx.plate = cfg.plate;
  ctx.stage_delay_ms = cfg.stage_delay_ms;
}

/// Frames in, sightings out. Threaded mode: submit() feeds a bounded queue
/// drained by one worker; single-threaded mode processes inside submit().
class Pipeline {
 public:
  Pipeline(const PipelineConfig& cfg, Registry* registry, const DetectorRegistry& detectors = {},
           const plate::OcrRegistry& ocrs = {})
      : cfg_(cfg), queue_(cfg.queue_capacity, cfg.drop_policy) {
    init_context(ctx_, cfg, registry, detectors, ocrs);
    if (!cfg_.single_threaded) worker_ = std::thread([this] { work(); });
  }

  Pipeline(const Pipeline&) = delete;
  Pipeline& operator=(const Pipeline&) = delete;

  ~Pipeline() { stop(); }

  void set_match_sink(MatchSink sink) {
    std::lock_guard lock(sink_mu_);
    ctx_.on_match = [this, sink = std::move(sink)](const Sighting& s, const MatchScore& m, const WatchlistEntry& e) {
      if (sink) sink(s, m, e);
    };
  }

  /// Stamps and enqueues a frame; returns its sequence number.
  std::uint64_t submit(Frame frame, const std::string& camera_id = {}, std::optional<std::int64_t> ts = std::nullopt) {
    FrameEnvelope env;
    env.frame = std::move(frame);
    env.camera_id = camera_id.empty() ? cfg_.camera_id : camera_id;
    {
      std::lock_guard lock(seq_mu_);
      env.sequence = ++sequence_;
    }
    env.capture_ts = ts ? *ts : (cfg_.start_ts_ms > 0 ? cfg_.start_ts_ms + static_cast<std::int64_t>(env.sequence - 1) * cfg_.frame_interval_ms : now_ms());
    const auto seq = env.sequence;
    ++frames_in_;
    if (cfg_.single_threaded) {
      handle(env);
      return seq;
    }
    queue_.push(std::move(env));
    return seq;
  }

  /// Drains the queue and joins the worker.
  void stop() {
    queue_.close();
    if (worker_.joinable()) worker_.join();
  }

  std::vector<StageTiming> latency_report() const { return ctx_.timings.rows(); }

  RunReport report() const {
    RunReport r;
    r.frames_in = frames_in_;
    r.frames_processed = frames_processed_;
    r.frames_dropped = queue_.dropped();
    {
      std::lock_guard lock(out_mu_);
      r.sightings = emitted_.size();
      r.emitted_sequences = emitted_;
    }
    if (frames_processed_ > 0) {
      r.stages = latency_report();
      r.pipeline_latency_s = pipeline_latency(r.stages);
    }
    return r;
  }

  std::uint64_t frames_in() const { return frames_in_; }
  std::uint64_t frames_processed() const { return frames_processed_; }
  std::uint64_t frames_dropped() const { return queue_.dropped(); }
  std::size_t queue_depth() const { return queue_.size(); }
  const PipelineConfig& config() const { return cfg_; }

 private:
  void work() {
    while (auto env = queue_.pop()) handle(*env);
  }

  void handle(const FrameEnvelope& env) {
    std::vector<Sighting> sightings;
    {
      std::lock_guard lock(sink_mu_);
      sightings = process_frame(env, ctx_);
    }
    {
      std::lock_guard lock(out_mu_);
      for (const auto& s : sightings) emitted_.push_back(*s.frame_sequence);
    }
    ++frames_processed_;
  }

  PipelineConfig cfg_;
  PipelineContext ctx_;
  BoundedQueue<FrameEnvelope> queue_;
  std::thread worker_;
  std::mutex seq_mu_;
  std::uint64_t sequence_ = 0;
  std::atomic<std::uint64_t> frames_in_{0};
  std::atomic<std::uint64_t> frames_processed_{0};
  mutable std::mutex out_mu_;
  std::vector<std::uint64_t> emitted_;
  std::mutex sink_mu_;
};

// ---- sources --------------------------------------------------------------------------

inline bool glob_match(std::string_view pattern, std::string_view name) {
  std::size_t p = 0, n = 0, star = std::string_view::npos, mark = 0;
  while (n < name.size()) {
    if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == name[n])) {
      ++p;
      ++n;
    } else if (p < pattern.size() && pattern[p] == '*') {
      star = p++;
      mark = n;
    } else if (star != std::string_view::npos) {
      p = star + 1;
      n = ++mark;
    } else {
      return false;
    }
  }
  while (p < pattern.size() && pattern[p] == '*') ++p;
  return p == pattern.size();
}

/// Frame files named by a source spec, sorted by path. A directory yields its
/// .ppm and .pgm files; a pattern matches file names in its directory.
inline std::vector<std::filesystem::path> list_source(const std::string& spec) {
  namespace fs = std::filesystem;
  if (spec.empty()) throw Error(Errc::SourceError, "no source configured");
  const fs::path p(spec);
  std::vector<fs::path> out;
  const auto name = p.filename().string();
  if (name.find_first_of("*?") != std::string::npos) {
    const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
    if (!fs::is_directory(dir)) throw Error(Errc::SourceError, "source directory missing: " + dir.string());
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && glob_match(name, e.path().filename().string())) out.push_back(e.path());
  } else if (fs::is_directory(p)) {
    for (const auto& e : fs::directory_iterator(p)) {
      const auto ext = fold_case(e.path().extension().string());
      if (e.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) out.push_back(e.path());
    }
  } else if (fs::is_regular_file(p)) {
    out.push_back(p);
  } else {
    throw Error(Errc::SourceError, "source not found: " + spec);
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) throw Error(Errc::SourceError, "source matched no frames: " + spec);
  return out;
}

/// Streams every source frame through the pipeline and reports.
inline RunReport run(const PipelineConfig& cfg, const MatchSink& on_match = {}) {
  if (cfg.source == "listen") throw Error(Errc::ConfigError, "source 'listen' needs the HTTP service (vigil serve)");
  const auto files = list_source(cfg.source);
  Registry registry(cfg.data_dir);
  Pipeline pipeline(cfg, &registry);
  if (on_match) pipeline.set_match_sink(on_match);
  const auto t0 = std::chrono::steady_clock::now();
  for (std::size_t i = 0; i < files.size(); ++i) {
    Frame f;
    try {
      f = load_frame(files[i]);
    } catch (const Error& e) {
      throw Error(Errc::SourceError, files[i].string() + ": " + e.what());
    }
    if (cfg.source_fps > 0) {
      const auto due = t0 + std::chrono::duration<double>(static_cast<double>(i) / cfg.source_fps);
      std::this_thread::sleep_until(due);
    }
    pipeline.submit(std::move(f));
  }
  pipeline.stop();
  registry.flush();
  return pipeline.report();
}

}  // namespace vigil
