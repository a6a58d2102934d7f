#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vigil/error.hpp"
#include "vigil/imaging.hpp"

namespace vigil {

// A pixel as a point in RGB space.
struct PixelPoint {
  double r = 0;
  double g = 0;
  double b = 0;

  friend bool operator==(const PixelPoint&, const PixelPoint&) = default;
};

inline double squared_distance(const PixelPoint& a, const PixelPoint& b) {
  const double dr = a.r - b.r;
  const double dg = a.g - b.g;
  const double db = a.b - b.b;
  return dr * dr + dg * dg + db * db;
}

inline double point_luma(const PixelPoint& p) { return 0.299 * p.r + 0.587 * p.g + 0.114 * p.b; }

struct ClusterModel {
  std::vector<PixelPoint> centroids;
  std::vector<std::size_t> populations;
  std::size_t k = 0;
  double objective = 0;  // sum of squared distances to the assigned centroid
  int iterations = 0;
  // Objective after every assignment step, in order. Non-increasing.
  std::vector<double> objective_trace;
};

struct KMeansOptions {
  std::size_t k = 4;
  std::uint64_t seed = 0;
  int max_iter = 50;
  double tol = 0.5;
};

/// Index of the nearest centroid; ties go to the lowest index.
inline std::size_t nearest_centroid(const PixelPoint& p, std::span<const PixelPoint> centroids) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < centroids.size(); ++j) {
    const double d = squared_distance(p, centroids[j]);
    if (d < best_d) {
      best_d = d;
      best = j;
    }
  }
  return best;
}

inline std::vector<std::size_t> assign_points(std::span<const PixelPoint> points, std::span<const PixelPoint> centroids) {
  std::vector<std::size_t> out(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = nearest_centroid(points[i], centroids);
  return out;
}

/// J(V) with every point charged to its nearest centroid of `model`.
inline double kmeans_objective(std::span<const PixelPoint> points, const ClusterModel& model) {
  double j = 0;
  for (const auto& p : points) j += squared_distance(p, model.centroids[nearest_centroid(p, model.centroids)]);
  return j;
}

namespace detail {

// Greedy farthest-point seeding: a random first centroid, then repeatedly the
// point farthest from every chosen centroid (ties to the lowest index).
inline std::vector<PixelPoint> seed_centroids(std::span<const PixelPoint> points, std::size_t k, std::uint64_t seed) {
  SplitMix64 rng(seed);
  std::vector<PixelPoint> centroids;
  centroids.reserve(k);
  centroids.push_back(points[rng.uniform(points.size() - 1)]);
  std::vector<double> dist(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) dist[i] = squared_distance(points[i], centroids[0]);
  while (centroids.size() < k) {
    const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
    centroids.push_back(points[far]);
    for (std::size_t i = 0; i < points.size(); ++i) dist[i] = std::min(dist[i], squared_distance(points[i], centroids.back()));
  }
  return centroids;
}

}  // namespace detail

/// Lloyd's algorithm minimising J(V). Stops when no centroid moves by tol or
/// more, or after max_iter update steps. An emptied cluster is re-seeded at
/// the point farthest from its assigned centroid.
inline ClusterModel kmeans(std::span<const PixelPoint> points, const KMeansOptions& opt) {
  if (points.empty()) throw Error(Errc::EmptyInput, "kmeans needs at least one point");
  if (opt.k < 1 || opt.k > points.size()) throw Error(Errc::KTooLarge, "k must be in [1, number of points]");

  ClusterModel model;
  model.k = opt.k;
  model.centroids = detail::seed_centroids(points, opt.k, opt.seed);
  std::vector<std::size_t> assignment;

  auto objective_of = [&](const std::vector<std::size_t>& a) {
    double j = 0;
    for (std::size_t i = 0; i < points.size(); ++i) j += squared_distance(points[i], model.centroids[a[i]]);
    return j;
  };

  for (int iter = 0; iter < opt.max_iter; ++iter) {
    assignment = assign_points(points, model.centroids);

    std::vector<PixelPoint> sums(opt.k);
    std::vector<std::size_t> counts(opt.k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      auto& s = sums[assignment[i]];
      s.r += points[i].r;
      s.g += points[i].g;
      s.b += points[i].b;
      ++counts[assignment[i]];
    }
    for (std::size_t j = 0; j < opt.k; ++j) {
      if (counts[j] != 0) continue;
      std::size_t far = 0;
      double far_d = -1;
      for (std::size_t i = 0; i < points.size(); ++i) {
        const double d = squared_distance(points[i], model.centroids[assignment[i]]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far_d <= 0) continue;  // every point sits on a centroid already
      // Move the farthest point into the empty cluster.
      auto& donor = sums[assignment[far]];
      donor.r -= points[far].r;
      donor.g -= points[far].g;
      donor.b -= points[far].b;
      --counts[assignment[far]];
      assignment[far] = j;
      model.centroids[j] = points[far];
      sums[j] = points[far];
      counts[j] = 1;
    }
    model.objective_trace.push_back(objective_of(assignment));

    double max_shift = 0;
    for (std::size_t j = 0; j < opt.k; ++j) {
      if (counts[j] == 0) continue;
      const double n = static_cast<double>(counts[j]);
      const PixelPoint next{sums[j].r / n, sums[j].g / n, sums[j].b / n};
      max_shift = std::max(max_shift, std::sqrt(squared_distance(next, model.centroids[j])));
      model.centroids[j] = next;
    }
    model.iterations = iter + 1;
    if (max_shift < opt.tol) break;
  }

  assignment = assign_points(points, model.centroids);
  model.populations.assign(opt.k, 0);
  for (auto a : assignment) ++model.populations[a];
  model.objective = objective_of(assignment);
  model.objective_trace.push_back(model.objective);
  return model;
}

/// Clusters reordered by descending population; ties by centroid luma, brighter first.
inline ClusterModel sort_by_dominance(const ClusterModel& model) {
  std::vector<std::size_t> order(model.centroids.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (model.populations[a] != model.populations[b]) return model.populations[a] > model.populations[b];
    return point_luma(model.centroids[a]) > point_luma(model.centroids[b]);
  });
  ClusterModel out = model;
  for (std::size_t i = 0; i < order.size(); ++i) {
    out.centroids[i] = model.centroids[order[i]];
    out.populations[i] = model.populations[order[i]];
  }
  return out;
}

enum class ColorName { Black, White, Gray, Silver, Red, Green, Blue, Yellow, Orange, Brown, Maroon, Cyan };

struct PaletteEntry {
  ColorName name;
  std::string_view label;
  Rgb anchor;
};

// Fixed anchors; nearest neighbour in plain RGB.
inline constexpr std::array<PaletteEntry, 12> kPalette{{
    {ColorName::Black, "black", {0, 0, 0}},
    {ColorName::White, "white", {255, 255, 255}},
    {ColorName::Gray, "gray", {128, 128, 128}},
    {ColorName::Silver, "silver", {192, 192, 192}},
    {ColorName::Red, "red", {220, 20, 20}},
    {ColorName::Green, "green", {0, 160, 0}},
    {ColorName::Blue, "blue", {20, 40, 200}},
    {ColorName::Yellow, "yellow", {255, 215, 0}},
    {ColorName::Orange, "orange", {255, 140, 0}},
    {ColorName::Brown, "brown", {140, 80, 30}},
    {ColorName::Maroon, "maroon", {128, 0, 0}},
    {ColorName::Cyan, "cyan", {0, 200, 200}},
}};

inline std::string_view to_string(ColorName c) { return kPalette[static_cast<std::size_t>(c)].label; }

inline std::optional<ColorName> parse_color_name(std::string_view s) {
  for (const auto& e : kPalette) {
    if (e.label.size() != s.size()) continue;
    bool same = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (std::tolower(static_cast<unsigned char>(s[i])) != e.label[i]) {
        same = false;
        break;
      }
    }
    if (same) return e.name;
  }
  return std::nullopt;
}

inline Rgb anchor_of(ColorName c) { return kPalette[static_cast<std::size_t>(c)].anchor; }

inline PixelPoint to_point(const Rgb& p) { return {static_cast<double>(p.r), static_cast<double>(p.g), static_cast<double>(p.b)}; }

inline ColorName name_color(const PixelPoint& p) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < kPalette.size(); ++i) {
    const double d = squared_distance(p, to_point(kPalette[i].anchor));
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return kPalette[best].name;
}

struct ColorVerdict {
  ColorName name = ColorName::Black;
  double fraction = 0;
  ClusterModel clusters;  // dominance-sorted
};

struct ColorOptions {
  std::size_t k = 4;
  std::uint64_t seed = 0;
  int max_iter = 50;
  double tol = 0.5;
  double window = 0.6;  // central fraction sampled in each axis
};

/// Pixels from the central window of the crop (at least one pixel in each axis).
inline std::vector<PixelPoint> sample_center(const Frame& crop, double window) {
  const int w = std::max(1, static_cast<int>(std::lround(crop.width() * window)));
  const int h = std::max(1, static_cast<int>(std::lround(crop.height() * window)));
  const int x0 = (crop.width() - w) / 2;
  const int y0 = (crop.height() - h) / 2;
  std::vector<PixelPoint> pts;
  pts.reserve(static_cast<std::size_t>(w) * h);
  for (int y = y0; y < y0 + h; ++y)
    for (int x = x0; x < x0 + w; ++x) pts.push_back(to_point(crop.at(x, y)));
  return pts;
}

/// Dominant body colour of a vehicle crop: k-means on the central window,
/// dominance sort, then the palette name of the top centroid.
inline ColorVerdict classify_vehicle_color(const Frame& crop, const ColorOptions& opt = {}) {
  if (crop.empty()) throw Error(Errc::EmptyCrop, "colour crop is empty");
  const auto pts = sample_center(crop, opt.window);
  const std::size_t k = std::min(opt.k, pts.size());
  ColorVerdict v;
  v.clusters = sort_by_dominance(kmeans(pts, {k, opt.seed, opt.max_iter, opt.tol}));
  v.name = name_color(v.clusters.centroids.front());
  v.fraction = static_cast<double>(v.clusters.populations.front()) / static_cast<double>(pts.size());
  return v;
}

}  // namespace vigil
