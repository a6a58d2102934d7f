#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vigil/error.hpp"
#include "vigil/imaging.hpp"

namespace vigil {

// Per-pixel running-average luma. One stream owns one model.
struct BackgroundModel {
  int width = 0;
  int height = 0;
  std::vector<double> mean;
  double alpha = 0.05;

  static BackgroundModel from_frame(const GrayFrame& frame, double alpha) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw Error(Errc::ConfigError, "background alpha must be in (0,1]");
    BackgroundModel m;
    m.width = frame.width();
    m.height = frame.height();
    m.alpha = alpha;
    m.mean.assign(frame.pixels().begin(), frame.pixels().end());
    return m;
  }
};

namespace detail {
inline void require_same_geometry(const BackgroundModel& m, const GrayFrame& f) {
  if (m.width != f.width() || m.height != f.height()) {
    throw Error(Errc::GeometryMismatch, "frame geometry differs from background model");
  }
}
}  // namespace detail

/// mean' = (1 - alpha) * mean + alpha * pixel for every pixel.
inline BackgroundModel update_background(BackgroundModel model, const GrayFrame& frame) {
  detail::require_same_geometry(model, frame);
  const auto px = frame.pixels();
  for (std::size_t i = 0; i < px.size(); ++i) {
    model.mean[i] = (1.0 - model.alpha) * model.mean[i] + model.alpha * px[i];
  }
  return model;
}

inline BitMask motion_mask(const BackgroundModel& model, const GrayFrame& frame, double diff_threshold) {
  detail::require_same_geometry(model, frame);
  BitMask mask(frame.width(), frame.height());
  for (int y = 0; y < frame.height(); ++y) {
    for (int x = 0; x < frame.width(); ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * frame.width() + x;
      mask.set(x, y, std::abs(frame.at(x, y) - model.mean[i]) >= diff_threshold);
    }
  }
  return mask;
}

enum class RegionKind { VehicleCandidate };

struct Region {
  Rect bbox;
  long long area = 0;  // foreground pixel count
  RegionKind kind = RegionKind::VehicleCandidate;

  friend bool operator==(const Region&, const Region&) = default;
};

// Label image plus the per-component summary. labels[i] is the index of the
// pixel's component in `regions`, or -1 for background.
struct ComponentLabels {
  int width = 0;
  int height = 0;
  std::vector<int> labels;
  std::vector<Region> regions;
};

namespace detail {

class DisjointSet {
 public:
  int make() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return parent_.back();
  }
  int find(int v) {
    while (parent_[v] != v) {
      parent_[v] = parent_[parent_[v]];
      v = parent_[v];
    }
    return v;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<int> parent_;
};

inline bool region_order(const Region& a, const Region& b) {
  if (a.area != b.area) return a.area > b.area;
  if (a.bbox.y != b.bbox.y) return a.bbox.y < b.bbox.y;
  return a.bbox.x < b.bbox.x;
}

}  // namespace detail

/// Two-pass 8-connected labeling. Components ordered by descending area,
/// ties by the (y, x) of their bounding box.
inline ComponentLabels label_components(const BitMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  ComponentLabels out;
  out.width = w;
  out.height = h;
  std::vector<int> provisional(static_cast<std::size_t>(w) * h, -1);
  detail::DisjointSet sets;

  auto idx = [w](int x, int y) { return static_cast<std::size_t>(y) * w + x; };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (!mask.test(x, y)) continue;
      int label = -1;
      // Already-visited neighbours: W, NW, N, NE.
      const int nx[4] = {x - 1, x - 1, x, x + 1};
      const int ny[4] = {y, y - 1, y - 1, y - 1};
      for (int k = 0; k < 4; ++k) {
        if (nx[k] < 0 || nx[k] >= w || ny[k] < 0) continue;
        const int n = provisional[idx(nx[k], ny[k])];
        if (n < 0) continue;
        if (label < 0) {
          label = n;
        } else {
          sets.unite(label, n);
        }
      }
      if (label < 0) label = sets.make();
      provisional[idx(x, y)] = label;
    }
  }

  struct Acc {
    int min_x, min_y, max_x, max_y;
    long long area = 0;
  };
  std::map<int, Acc> acc;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      int& l = provisional[idx(x, y)];
      if (l < 0) continue;
      l = sets.find(l);
      auto [it, fresh] = acc.try_emplace(l, Acc{x, y, x, y, 0});
      auto& a = it->second;
      a.min_x = std::min(a.min_x, x);
      a.min_y = std::min(a.min_y, y);
      a.max_x = std::max(a.max_x, x);
      a.max_y = std::max(a.max_y, y);
      ++a.area;
    }
  }

  std::vector<std::pair<Region, int>> ranked;
  ranked.reserve(acc.size());
  for (const auto& [root, a] : acc) {
    ranked.push_back({Region{{a.min_x, a.min_y, a.max_x - a.min_x + 1, a.max_y - a.min_y + 1}, a.area}, root});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return detail::region_order(a.first, b.first); });

  std::map<int, int> final_index;
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    final_index[ranked[i].second] = static_cast<int>(i);
    out.regions.push_back(ranked[i].first);
  }
  out.labels.assign(provisional.size(), -1);
  for (std::size_t i = 0; i < provisional.size(); ++i) {
    if (provisional[i] >= 0) out.labels[i] = final_index[provisional[i]];
  }
  return out;
}

inline std::vector<Region> connected_components(const BitMask& mask) { return label_components(mask).regions; }

struct ProposalConfig {
  long long min_area = 400;
  double aspect_lo = 0.5;
  double aspect_hi = 4.0;
  int margin = 4;
};

/// Filters components by area and bbox aspect (w/h), then dilates each bbox by
/// the margin, clamped to the mask bounds.
inline std::vector<Region> propose_vehicles(const BitMask& mask, const ProposalConfig& cfg) {
  if (!(cfg.aspect_lo < cfg.aspect_hi)) throw Error(Errc::ConfigError, "aspect range must satisfy lo < hi");
  std::vector<Region> out;
  for (const auto& r : connected_components(mask)) {
    if (r.area < cfg.min_area) continue;
    const double aspect = static_cast<double>(r.bbox.w) / r.bbox.h;
    if (aspect < cfg.aspect_lo || aspect > cfg.aspect_hi) continue;
    const int x0 = std::max(0, r.bbox.x - cfg.margin);
    const int y0 = std::max(0, r.bbox.y - cfg.margin);
    const int x1 = std::min(mask.width(), r.bbox.right() + cfg.margin);
    const int y1 = std::min(mask.height(), r.bbox.bottom() + cfg.margin);
    out.push_back(Region{{x0, y0, x1 - x0, y1 - y0}, r.area, r.kind});
  }
  return out;
}

/// Sets every clear pixel that cannot reach the mask border through clear
/// pixels (4-connected), so enclosed holes join their surrounding blob.
inline BitMask fill_holes(const BitMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  std::vector<std::uint8_t> outside(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::pair<int, int>> stack;
  auto seed = [&](int x, int y) {
    const auto i = static_cast<std::size_t>(y) * w + x;
    if (!mask.test(x, y) && !outside[i]) {
      outside[i] = 1;
      stack.emplace_back(x, y);
    }
  };
  for (int x = 0; x < w; ++x) {
    seed(x, 0);
    seed(x, h - 1);
  }
  for (int y = 0; y < h; ++y) {
    seed(0, y);
    seed(w - 1, y);
  }
  while (!stack.empty()) {
    const auto [x, y] = stack.back();
    stack.pop_back();
    if (x > 0) seed(x - 1, y);
    if (x + 1 < w) seed(x + 1, y);
    if (y > 0) seed(x, y - 1);
    if (y + 1 < h) seed(x, y + 1);
  }
  BitMask out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.set(x, y, !outside[static_cast<std::size_t>(y) * w + x]);
  return out;
}

inline double iou(const Rect& a, const Rect& b) {
  const int x0 = std::max(a.x, b.x);
  const int y0 = std::max(a.y, b.y);
  const int x1 = std::min(a.right(), b.right());
  const int y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return 0.0;
  const double inter = static_cast<double>(x1 - x0) * (y1 - y0);
  return inter / (static_cast<double>(a.area()) + static_cast<double>(b.area()) - inter);
}

// Plug boundary for region proposers. The built-in one is MotionDetector; an
// external neural detector registers a factory under "external:<id>".
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string id() const = 0;
  virtual std::vector<Region> detect(const Frame& frame) = 0;
};

struct MotionConfig {
  double alpha = 0.05;
  double diff_threshold = 25.0;
  ProposalConfig proposal;
  // Freeze the background under detected foreground so parked or slow
  // vehicles do not bleed into the mean.
  bool selective_update = true;
  // Close enclosed holes before labelling: a vehicle whose body matches the
  // road stays one blob as long as its outline differs.
  bool fill_holes = true;
};

class MotionDetector final : public Detector {
 public:
  explicit MotionDetector(MotionConfig cfg = {}) : cfg_(cfg) {}

  std::string id() const override { return "motion"; }

  void prime(const GrayFrame& background) { model_ = BackgroundModel::from_frame(background, cfg_.alpha); }

  bool primed() const { return model_.has_value(); }
  const std::optional<BackgroundModel>& model() const { return model_; }
  const MotionConfig& config() const { return cfg_; }

  std::vector<Region> detect(const Frame& frame) override {
    const GrayFrame gray = to_grayscale(frame);
    if (!model_) {
      prime(gray);
      return {};
    }
    const BitMask mask = motion_mask(*model_, gray, cfg_.diff_threshold);
    auto regions = propose_vehicles(cfg_.fill_holes ? fill_holes(mask) : mask, cfg_.proposal);
    if (cfg_.selective_update) {
      BackgroundModel next = update_background(*model_, gray);
      for (std::size_t i = 0; i < next.mean.size(); ++i) {
        if (mask.bits()[i]) next.mean[i] = model_->mean[i];
      }
      model_ = std::move(next);
    } else {
      model_ = update_background(std::move(*model_), gray);
    }
    return regions;
  }

 private:
  MotionConfig cfg_;
  std::optional<BackgroundModel> model_;
};

using DetectorFactory = std::function<std::unique_ptr<Detector>()>;

class DetectorRegistry {
 public:
  void register_external(const std::string& id, DetectorFactory factory) { external_[id] = std::move(factory); }

  // choice is "motion" or "external:<id>".
  std::unique_ptr<Detector> make(const std::string& choice, const MotionConfig& motion = {}) const {
    if (choice == "motion") return std::make_unique<MotionDetector>(motion);
    constexpr std::string_view prefix = "external:";
    if (choice.rfind(prefix, 0) == 0) {
      const auto id = choice.substr(prefix.size());
      auto it = external_.find(id);
      if (it == external_.end()) throw Error(Errc::ConfigError, "no external detector registered as '" + id + "'");
      return it->second();
    }
    throw Error(Errc::ConfigError, "unknown detector choice '" + choice + "'");
  }

 private:
  std::map<std::string, DetectorFactory> external_;
};

}  // namespace vigil
