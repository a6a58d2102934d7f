#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vigil/color.hpp"
#include "vigil/config.hpp"
#include "vigil/detect.hpp"
#include "vigil/error.hpp"
#include "vigil/imaging.hpp"
#include "vigil/plate.hpp"

namespace vigil {

struct ConfusionCounts {
  long long tp = 0;
  long long fp = 0;
  long long fn = 0;
  long long tn = 0;

  long long total() const { return tp + fp + fn + tn; }

  ConfusionCounts& operator+=(const ConfusionCounts& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  friend ConfusionCounts operator+(ConfusionCounts a, const ConfusionCounts& b) { return a += b; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// A metric is nullopt when its denominator is zero.
using Metric = std::optional<double>;

struct ModuleReport {
  std::string name;
  Metric accuracy;
  Metric precision;
  Metric recall;
  Metric f1;
  Metric specificity;
  double avg_time_s = 0;
};

struct OverallReport {
  std::vector<ModuleReport> rows;
  ModuleReport overall;
};

namespace detail {
inline Metric ratio(long long num, long long den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}
}  // namespace detail

inline ModuleReport metrics_from_counts(const ConfusionCounts& c, std::string name = {}, double avg_time_s = 0) {
  if (c.tp < 0 || c.fp < 0 || c.fn < 0 || c.tn < 0) throw Error(Errc::EmptyCounts, "negative confusion count");
  if (c.total() == 0) throw Error(Errc::EmptyCounts, "confusion counts are all zero");
  ModuleReport r;
  r.name = std::move(name);
  r.avg_time_s = avg_time_s;
  r.accuracy = detail::ratio(c.tp + c.tn, c.total());
  r.precision = detail::ratio(c.tp, c.tp + c.fp);
  r.recall = detail::ratio(c.tp, c.tp + c.fn);
  r.specificity = detail::ratio(c.tn, c.tn + c.fp);
  if (r.precision && r.recall && (*r.precision + *r.recall) > 0) {
    r.f1 = 2 * *r.precision * *r.recall / (*r.precision + *r.recall);
  } else if (r.precision && r.recall) {
    r.f1 = 0.0;
  }
  return r;
}

/// Macro average over one-vs-rest counts: each metric is the mean of the
/// defined per-class values.
inline ModuleReport macro_average(const std::vector<ConfusionCounts>& per_class, std::string name = {}, double avg_time_s = 0) {
  std::vector<ModuleReport> rows;
  for (const auto& c : per_class)
    if (c.total() > 0) rows.push_back(metrics_from_counts(c));
  if (rows.empty()) throw Error(Errc::EmptyCounts, "no class has any observation");
  auto mean_of = [&](Metric ModuleReport::*field) -> Metric {
    double sum = 0;
    int n = 0;
    for (const auto& r : rows)
      if (r.*field) {
        sum += *(r.*field);
        ++n;
      }
    if (n == 0) return std::nullopt;
    return sum / n;
  };
  ModuleReport out;
  out.name = std::move(name);
  out.avg_time_s = avg_time_s;
  out.accuracy = mean_of(&ModuleReport::accuracy);
  out.precision = mean_of(&ModuleReport::precision);
  out.recall = mean_of(&ModuleReport::recall);
  out.f1 = mean_of(&ModuleReport::f1);
  out.specificity = mean_of(&ModuleReport::specificity);
  return out;
}

/// Overall row: unweighted column means over the defined values; the time
/// column is the sum, since the stages run one after another.
inline OverallReport aggregate_overall(std::vector<ModuleReport> rows) {
  if (rows.empty()) throw Error(Errc::EmptyRows, "no module rows to aggregate");
  OverallReport out;
  out.overall.name = "Overall";
  auto mean_of = [&](Metric ModuleReport::*field) -> Metric {
    double sum = 0;
    int n = 0;
    for (const auto& r : rows)
      if (r.*field) {
        sum += *(r.*field);
        ++n;
      }
    if (n == 0) return std::nullopt;
    return sum / n;
  };
  out.overall.accuracy = mean_of(&ModuleReport::accuracy);
  out.overall.precision = mean_of(&ModuleReport::precision);
  out.overall.recall = mean_of(&ModuleReport::recall);
  out.overall.f1 = mean_of(&ModuleReport::f1);
  out.overall.specificity = mean_of(&ModuleReport::specificity);
  for (const auto& r : rows) out.overall.avg_time_s += r.avg_time_s;
  out.rows = std::move(rows);
  return out;
}

inline std::string format_metric(const Metric& m, int precision = 6) {
  if (!m) return "n/a";
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << *m;
  return os.str();
}

/// Aligned text table: one row per module plus Overall.
inline std::string render_table(const OverallReport& report) {
  std::vector<const ModuleReport*> all;
  for (const auto& r : report.rows) all.push_back(&r);
  all.push_back(&report.overall);
  std::size_t name_w = 6;
  for (const auto* r : all) name_w = std::max(name_w, r->name.size());
  const int nw = static_cast<int>(name_w) + 2;
  const int cw = 13;
  std::ostringstream os;
  os << std::left << std::setw(nw) << "Module" << std::right << std::setw(cw) << "Accuracy" << std::setw(cw) << "Precision"
     << std::setw(cw) << "Recall" << std::setw(cw) << "F1-score" << std::setw(cw) << "Specificity" << std::setw(cw)
     << "Avg Time (s)" << "\n";
  for (const auto* r : all) {
    std::ostringstream t;
    t << std::fixed << std::setprecision(3) << r->avg_time_s;
    os << std::left << std::setw(nw) << r->name << std::right << std::setw(cw) << format_metric(r->accuracy) << std::setw(cw)
       << format_metric(r->precision) << std::setw(cw) << format_metric(r->recall) << std::setw(cw) << format_metric(r->f1)
       << std::setw(cw) << format_metric(r->specificity) << std::setw(cw) << t.str() << "\n";
  }
  return os.str();
}

inline nlohmann::json to_json(const ModuleReport& r) {
  auto m = [](const Metric& v) -> nlohmann::json { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  return {{"name", r.name},   {"accuracy", m(r.accuracy)},       {"precision", m(r.precision)}, {"recall", m(r.recall)},
          {"f1", m(r.f1)},    {"specificity", m(r.specificity)}, {"avg_time_s", r.avg_time_s}};
}

inline nlohmann::json to_json(const OverallReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) rows.push_back(to_json(row));
  return {{"rows", rows}, {"overall", to_json(r.overall)}};
}

// ---- manifest -------------------------------------------------------------------
//
// One record per line, tab separated:
//   image  boxes  plate_text  color  plate_type  plate_corners  tag
// boxes "x,y,w,h;..." and corners "x,y;x,y;x,y;x,y" (TL, TR, BR, BL); "-" marks
// an absent field. '#' lines are comments; "@background <path>" names the
// empty-road reference frame.

struct ManifestRecord {
  std::string image;
  std::vector<Rect> boxes;
  std::optional<std::string> plate_text;
  std::optional<ColorName> color;
  std::optional<plate::PlateType> plate_type;
  std::optional<std::array<plate::Point2, 4>> corners;
  std::string tag;
};

struct Manifest {
  std::filesystem::path base_dir;
  std::optional<std::string> background;
  std::vector<ManifestRecord> records;

  std::filesystem::path resolve(const std::string& rel) const {
    const std::filesystem::path p(rel);
    return p.is_absolute() ? p : base_dir / p;
  }
};

namespace detail {

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(Errc::ManifestMissing, "bad number in " + what + ": '" + s + "'");
  }
}

inline std::string fmt_num(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace detail

inline ManifestRecord parse_manifest_line(const std::string& line) {
  const auto f = detail::split(line, '\t');
  if (f.size() < 6) throw Error(Errc::ManifestMissing, "manifest record needs at least 6 tab-separated fields");
  ManifestRecord r;
  r.image = f[0];
  if (f[1] != "-") {
    for (const auto& b : detail::split(f[1], ';')) {
      const auto v = detail::split(b, ',');
      if (v.size() != 4) throw Error(Errc::ManifestMissing, "box must be x,y,w,h");
      r.boxes.push_back({static_cast<int>(detail::parse_double(v[0], "box")), static_cast<int>(detail::parse_double(v[1], "box")),
                         static_cast<int>(detail::parse_double(v[2], "box")), static_cast<int>(detail::parse_double(v[3], "box"))});
    }
  }
  if (f[2] != "-") r.plate_text = f[2];
  if (f[3] != "-") {
    r.color = parse_color_name(f[3]);
    if (!r.color) throw Error(Errc::ManifestMissing, "unknown colour '" + f[3] + "'");
  }
  if (f[4] != "-") {
    r.plate_type = plate::parse_plate_type(f[4]);
    if (!r.plate_type) throw Error(Errc::ManifestMissing, "unknown plate type '" + f[4] + "'");
  }
  if (f[5] != "-") {
    const auto pts = detail::split(f[5], ';');
    if (pts.size() != 4) throw Error(Errc::ManifestMissing, "corners need four points");
    std::array<plate::Point2, 4> c;
    for (int i = 0; i < 4; ++i) {
      const auto v = detail::split(pts[i], ',');
      if (v.size() != 2) throw Error(Errc::ManifestMissing, "corner must be x,y");
      c[i] = {detail::parse_double(v[0], "corner"), detail::parse_double(v[1], "corner")};
    }
    r.corners = c;
  }
  if (f.size() > 6 && f[6] != "-") r.tag = f[6];
  return r;
}

inline std::string format_manifest_line(const ManifestRecord& r) {
  std::ostringstream os;
  os << r.image << '\t';
  if (r.boxes.empty()) os << '-';
  for (std::size_t i = 0; i < r.boxes.size(); ++i) {
    const auto& b = r.boxes[i];
    os << (i ? ";" : "") << b.x << ',' << b.y << ',' << b.w << ',' << b.h;
  }
  os << '\t' << r.plate_text.value_or("-") << '\t' << (r.color ? std::string(to_string(*r.color)) : "-") << '\t'
     << (r.plate_type ? std::string(plate::to_string(*r.plate_type)) : "-") << '\t';
  if (r.corners) {
    for (int i = 0; i < 4; ++i)
      os << (i ? ";" : "") << detail::fmt_num((*r.corners)[i].x) << ',' << detail::fmt_num((*r.corners)[i].y);
  } else {
    os << '-';
  }
  os << '\t' << (r.tag.empty() ? "-" : r.tag);
  return os.str();
}

inline Manifest parse_manifest(const std::string& text, std::filesystem::path base_dir = {}) {
  Manifest m;
  m.base_dir = std::move(base_dir);
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line.front() == '#') continue;
    if (line.rfind("@background", 0) == 0) {
      m.background = trim(std::string_view(line).substr(11));
      continue;
    }
    m.records.push_back(parse_manifest_line(line));
  }
  return m;
}

inline Manifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::ManifestMissing, "cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str(), path.parent_path());
}

inline void save_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path);
  if (!out) throw Error(Errc::IoError, "cannot write manifest " + path.string());
  out << "# image\tboxes\tplate\tcolor\tplate_type\tcorners\ttag\n";
  if (m.background) out << "@background " << *m.background << "\n";
  for (const auto& r : m.records) out << format_manifest_line(r) << "\n";
}

// ---- benchmark ------------------------------------------------------------------

struct BenchmarkOptions {
  MotionConfig motion;
  plate::PlateConfig plate;
  ColorOptions color;
  const plate::OcrEngine* ocr = nullptr;
  double iou_hit = 0.5;
  double corner_tolerance_px = 2.0;
};

// What happened to one manifest record, kept so a caller can recount.
struct ItemOutcome {
  std::string image;
  std::string tag;
  // detection
  std::vector<Rect> proposals;
  int det_tp = 0;
  int det_fp = 0;
  int det_fn = 0;
  // plate localisation on the first ground-truth box
  bool plate_expected = false;
  bool plate_located = false;
  bool plate_hit = false;
  std::optional<plate::Quad> quad;  // frame coordinates
  // reading
  std::optional<std::string> read_text;
  int chars_total = 0;
  int chars_correct = 0;
  // colour
  std::optional<ColorName> color_pred;
};

struct BenchmarkResult {
  OverallReport report;
  std::vector<ItemOutcome> items;
  ConfusionCounts detection;
  ConfusionCounts plate_detection;
  std::vector<ConfusionCounts> ocr_per_char;    // indexed by position in kCharset
  std::vector<ConfusionCounts> color_per_class;  // indexed by ColorName
  long long plates_expected = 0;
  long long plates_hit = 0;
  long long exact_reads = 0;
  long long chars_total = 0;
  long long chars_correct = 0;
  long long clean_plates = 0;
  long long clean_exact = 0;

  double localization_rate() const { return plates_expected ? static_cast<double>(plates_hit) / plates_expected : 0.0; }
  double exact_rate() const { return plates_expected ? static_cast<double>(exact_reads) / plates_expected : 0.0; }
  double clean_exact_rate() const { return clean_plates ? static_cast<double>(clean_exact) / clean_plates : 0.0; }
  double char_accuracy() const { return chars_total ? static_cast<double>(chars_correct) / chars_total : 0.0; }
};

inline constexpr std::string_view kCharset = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ";

inline bool corners_within(const plate::Quad& q, const std::array<plate::Point2, 4>& truth, double tol) {
  for (int i = 0; i < 4; ++i)
    if (std::abs(q.corners[i].x - truth[i].x) > tol || std::abs(q.corners[i].y - truth[i].y) > tol) return false;
  return true;
}

/// Greedy one-to-one matching of proposals to truth boxes, best IoU first.
inline ConfusionCounts match_detections(const std::vector<Rect>& proposals, const std::vector<Rect>& truth, double iou_hit) {
  struct Pair {
    double iou;
    std::size_t p, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < proposals.size(); ++p)
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double v = iou(proposals[p], truth[t]);
      if (v >= iou_hit) pairs.push_back({v, p, t});
    }
  std::stable_sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) { return a.iou > b.iou; });
  std::vector<bool> used_p(proposals.size()), used_t(truth.size());
  ConfusionCounts c;
  for (const auto& pr : pairs) {
    if (used_p[pr.p] || used_t[pr.t]) continue;
    used_p[pr.p] = used_t[pr.t] = true;
    ++c.tp;
  }
  c.fp = static_cast<long long>(proposals.size()) - c.tp;
  c.fn = static_cast<long long>(truth.size()) - c.tp;
  if (proposals.empty() && truth.empty()) c.tn = 1;
  return c;
}

/// Per-position character comparison feeding one-vs-rest counts. Strings of
/// different length charge every truth char as a miss and every read char as
/// a false alarm.
inline void count_characters(const std::string& truth, const std::string& read, std::vector<ConfusionCounts>& per_char,
                             long long& observations) {
  auto idx = [](char c) -> std::optional<std::size_t> {
    const auto p = kCharset.find(c);
    if (p == std::string_view::npos) return std::nullopt;
    return p;
  };
  if (truth.size() == read.size()) {
    for (std::size_t i = 0; i < truth.size(); ++i) {
      ++observations;
      const auto g = idx(truth[i]);
      const auto p = idx(read[i]);
      if (g && p && *g == *p) {
        ++per_char[*g].tp;
      } else {
        if (g) ++per_char[*g].fn;
        if (p) ++per_char[*p].fp;
      }
    }
    return;
  }
  for (char c : truth) {
    ++observations;
    if (auto g = idx(c)) ++per_char[*g].fn;
  }
  for (char c : read) {
    ++observations;
    if (auto p = idx(c)) ++per_char[*p].fp;
  }
}

namespace detail {
inline void fill_true_negatives(std::vector<ConfusionCounts>& per_class, long long observations) {
  for (auto& c : per_class) c.tn = observations - c.tp - c.fp - c.fn;
}

class StageClock {
 public:
  template <typename Fn>
  auto time(Fn&& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    struct Guard {
      StageClock* self;
      std::chrono::steady_clock::time_point t0;
      ~Guard() {
        self->total_ += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        ++self->samples_;
      }
    } g{this, t0};
    return fn();
  }
  double mean() const { return samples_ ? total_ / samples_ : 0.0; }

 private:
  double total_ = 0;
  long long samples_ = 0;
};
}  // namespace detail

/// Runs every stage against the manifest's ground truth. Per-vehicle stages
/// (plate, OCR, colour) are fed the first ground-truth box of each record so
/// their scores do not inherit detection errors.
inline BenchmarkResult run_benchmark(const Manifest& manifest, const BenchmarkOptions& opt = {}) {
  if (manifest.records.empty()) throw Error(Errc::CorpusEmpty, "manifest has no records");
  static const plate::TemplateOcr builtin;
  const plate::OcrEngine& ocr = opt.ocr ? *opt.ocr : builtin;

  std::optional<GrayFrame> background;
  if (manifest.background) background = to_grayscale(load_frame(manifest.resolve(*manifest.background)));

  BenchmarkResult res;
  res.ocr_per_char.assign(kCharset.size(), {});
  res.color_per_class.assign(kPalette.size(), {});
  long long char_obs = 0;
  long long color_obs = 0;
  detail::StageClock det_clock, plate_clock, ocr_clock, color_clock;

  for (const auto& rec : manifest.records) {
    const auto path = manifest.resolve(rec.image);
    if (!std::filesystem::exists(path)) throw Error(Errc::ManifestMissing, "missing image " + path.string());
    const Frame frame = load_frame(path);
    ItemOutcome item;
    item.image = rec.image;
    item.tag = rec.tag;

    // Detection: a fresh detector per record, primed with the empty road when known.
    MotionDetector det(opt.motion);
    if (background) det.prime(*background);
    const auto regions = det_clock.time([&] { return det.detect(frame); });
    for (const auto& r : regions) item.proposals.push_back(r.bbox);
    const auto dc = match_detections(item.proposals, rec.boxes, opt.iou_hit);
    item.det_tp = static_cast<int>(dc.tp);
    item.det_fp = static_cast<int>(dc.fp);
    item.det_fn = static_cast<int>(dc.fn);
    res.detection += dc;

    if (!rec.boxes.empty()) {
      const Rect box = rec.boxes.front();
      const Frame vehicle = crop(frame, box);

      // Plate localisation.
      item.plate_expected = rec.corners.has_value();
      std::optional<plate::Quad> quad;
      plate_clock.time([&] {
        try {
          quad = plate::locate_plate(to_grayscale(vehicle), opt.plate.locate);
        } catch (const Error& e) {
          if (e.code() != Errc::NoPlateFound) throw;
        }
        return 0;
      });
      if (quad) {
        for (auto& c : quad->corners) {
          c.x += box.x;
          c.y += box.y;
        }
        item.quad = quad;
        item.plate_located = true;
        item.plate_hit = rec.corners && corners_within(*quad, *rec.corners, opt.corner_tolerance_px);
      }
      if (item.plate_expected) {
        ++res.plates_expected;
        if (item.plate_hit) {
          ++res.plate_detection.tp;
          ++res.plates_hit;
        } else {
          ++res.plate_detection.fn;
          if (item.plate_located) ++res.plate_detection.fp;
        }
      } else if (item.plate_located) {
        ++res.plate_detection.fp;
      } else {
        ++res.plate_detection.tn;
      }

      // Reading, only where a plate is expected.
      if (rec.plate_text) {
        ocr_clock.time([&] {
          try {
            item.read_text = plate::read_plate(vehicle, opt.plate, &ocr).text;
          } catch (const Error& e) {
            if (e.code() != Errc::NoPlateFound && e.code() != Errc::NoGlyphs && e.code() != Errc::DegenerateQuad) throw;
          }
          return 0;
        });
        const std::string& truth = *rec.plate_text;
        const std::string read = item.read_text.value_or("");
        count_characters(truth, read, res.ocr_per_char, char_obs);
        item.chars_total = static_cast<int>(truth.size());
        if (truth.size() == read.size())
          for (std::size_t i = 0; i < truth.size(); ++i) item.chars_correct += truth[i] == read[i];
        res.chars_total += item.chars_total;
        res.chars_correct += item.chars_correct;
        const bool exact = item.read_text && *item.read_text == truth;
        res.exact_reads += exact;
        if (rec.tag == "clean") {
          ++res.clean_plates;
          res.clean_exact += exact;
        }
      }

      if (rec.color) {
        const auto verdict = color_clock.time([&] { return classify_vehicle_color(vehicle, opt.color); });
        item.color_pred = verdict.name;
        ++color_obs;
        const auto g = static_cast<std::size_t>(*rec.color);
        const auto p = static_cast<std::size_t>(verdict.name);
        if (g == p) {
          ++res.color_per_class[g].tp;
        } else {
          ++res.color_per_class[g].fn;
          ++res.color_per_class[p].fp;
        }
      }
    }
    res.items.push_back(std::move(item));
  }
  detail::fill_true_negatives(res.ocr_per_char, char_obs);
  detail::fill_true_negatives(res.color_per_class, color_obs);

  std::vector<ModuleReport> rows;
  rows.push_back(metrics_from_counts(res.detection, "Vehicle Detection", det_clock.mean()));
  if (res.plate_detection.total() > 0)
    rows.push_back(metrics_from_counts(res.plate_detection, "License Plate Detection", plate_clock.mean()));
  if (char_obs > 0) rows.push_back(macro_average(res.ocr_per_char, "Optical Character Recognition", ocr_clock.mean()));
  if (color_obs > 0) rows.push_back(macro_average(res.color_per_class, "Colour Classification", color_clock.mean()));
  res.report = aggregate_overall(std::move(rows));
  return res;
}

}  // namespace vigil
