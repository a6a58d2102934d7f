#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vigil/color.hpp"
#include "vigil/detect.hpp"
#include "vigil/error.hpp"
#include "vigil/font.hpp"
#include "vigil/imaging.hpp"

namespace vigil::plate {

struct PixelPos {
  int x = 0;
  int y = 0;
  friend bool operator==(const PixelPos&, const PixelPos&) = default;
};

struct Point2 {
  double x = 0;
  double y = 0;
};

struct Contour {
  std::vector<PixelPos> points;  // closed outer boundary, clockwise
  long long area = 0;            // pixels in the traced component
};

// ---- contours ------------------------------------------------------------------

namespace detail {

// Clockwise on screen (y grows downwards), starting west.
inline constexpr std::array<int, 8> kDx{-1, -1, 0, 1, 1, 1, 0, -1};
inline constexpr std::array<int, 8> kDy{0, -1, -1, -1, 0, 1, 1, 1};

inline int direction_of(int dx, int dy) {
  for (int d = 0; d < 8; ++d)
    if (kDx[d] == dx && kDy[d] == dy) return d;
  return 0;
}

}  // namespace detail

/// Outer boundary of every 8-connected foreground component by Moore-neighbour
/// tracing. Components are discovered in raster order of their top-left pixel.
inline std::vector<Contour> find_contours(const BitMask& mask) {
  const int w = mask.width();
  const int h = mask.height();
  auto fg = [&](int x, int y) { return x >= 0 && y >= 0 && x < w && y < h && mask.test(x, y); };
  std::vector<std::uint8_t> seen(static_cast<std::size_t>(w) * h, 0);
  std::vector<Contour> out;
  std::vector<PixelPos> stack;

  for (int sy = 0; sy < h; ++sy) {
    for (int sx = 0; sx < w; ++sx) {
      if (!fg(sx, sy) || seen[static_cast<std::size_t>(sy) * w + sx]) continue;
      Contour c;
      c.points.push_back({sx, sy});

      // The raster-first pixel always has background to its west.
      PixelPos cur{sx, sy};
      int back = 0;
      std::optional<PixelPos> first_step;
      const std::size_t guard = 4 * static_cast<std::size_t>(w) * h + 8;
      for (std::size_t step = 0; step < guard; ++step) {
        std::optional<PixelPos> next;
        int next_back = 0;
        for (int k = 1; k <= 8; ++k) {
          const int d = (back + k) % 8;
          const PixelPos cand{cur.x + detail::kDx[d], cur.y + detail::kDy[d]};
          if (!fg(cand.x, cand.y)) continue;
          const int pd = (d + 7) % 8;
          const PixelPos prev{cur.x + detail::kDx[pd], cur.y + detail::kDy[pd]};
          next = cand;
          next_back = detail::direction_of(prev.x - cand.x, prev.y - cand.y);
          break;
        }
        if (!next) break;  // isolated pixel
        if (!first_step) {
          first_step = next;
        } else if (cur == PixelPos{sx, sy} && *next == *first_step) {
          break;
        }
        cur = *next;
        back = next_back;
        if (!(cur == PixelPos{sx, sy})) c.points.push_back(cur);
      }

      // Mark and count the whole component.
      stack.assign(1, {sx, sy});
      seen[static_cast<std::size_t>(sy) * w + sx] = 1;
      while (!stack.empty()) {
        const auto p = stack.back();
        stack.pop_back();
        ++c.area;
        for (int d = 0; d < 8; ++d) {
          const int nx = p.x + detail::kDx[d];
          const int ny = p.y + detail::kDy[d];
          if (!fg(nx, ny)) continue;
          auto& s = seen[static_cast<std::size_t>(ny) * w + nx];
          if (s) continue;
          s = 1;
          stack.push_back({nx, ny});
        }
      }
      out.push_back(std::move(c));
    }
  }
  return out;
}

inline double contour_perimeter(const std::vector<PixelPos>& pts) {
  if (pts.size() < 2) return 0.0;
  double total = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& a = pts[i];
    const auto& b = pts[(i + 1) % pts.size()];
    total += std::hypot(a.x - b.x, a.y - b.y);
  }
  return total;
}

/// Distance from p to the segment ab.
inline double segment_distance(const PixelPos& p, const PixelPos& a, const PixelPos& b) {
  const double vx = b.x - a.x;
  const double vy = b.y - a.y;
  const double len2 = vx * vx + vy * vy;
  double t = 0;
  if (len2 > 0) t = std::clamp(((p.x - a.x) * vx + (p.y - a.y) * vy) / len2, 0.0, 1.0);
  return std::hypot(p.x - (a.x + t * vx), p.y - (a.y + t * vy));
}

/// Ramer-Douglas-Peucker on a closed boundary. The curve is split at two
/// mutually far points, each arc simplified independently; the result is the
/// kept points in their original order.
inline std::vector<PixelPos> approx_polygon(const std::vector<PixelPos>& pts, double epsilon) {
  if (!(epsilon > 0)) throw Error(Errc::ConfigError, "epsilon must be positive");
  const std::size_t n = pts.size();
  if (n <= 2) return pts;

  auto farthest_from = [&](std::size_t from) {
    std::size_t best = from;
    double best_d = -1;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::hypot(pts[i].x - pts[from].x, pts[i].y - pts[from].y);
      if (d > best_d) {
        best_d = d;
        best = i;
      }
    }
    return best;
  };
  const std::size_t a = farthest_from(0);
  const std::size_t b = farthest_from(a);
  if (a == b) return {pts[a]};

  std::vector<std::uint8_t> keep(n, 0);
  keep[a] = keep[b] = 1;
  // Arc as (start, length) walking forward with wrap-around.
  std::vector<std::pair<std::size_t, std::size_t>> work;
  const std::size_t lo = std::min(a, b);
  const std::size_t hi = std::max(a, b);
  work.push_back({lo, hi - lo});
  work.push_back({hi, n - hi + lo});
  while (!work.empty()) {
    const auto [start, len] = work.back();
    work.pop_back();
    if (len < 2) continue;
    const auto& pa = pts[start];
    const auto& pb = pts[(start + len) % n];
    double best_d = -1;
    std::size_t best_off = 0;
    for (std::size_t off = 1; off < len; ++off) {
      const double d = segment_distance(pts[(start + off) % n], pa, pb);
      if (d > best_d) {
        best_d = d;
        best_off = off;
      }
    }
    if (best_d > epsilon) {
      keep[(start + best_off) % n] = 1;
      work.push_back({start, best_off});
      work.push_back({(start + best_off) % n, len - best_off});
    }
  }
  std::vector<PixelPos> out;
  for (std::size_t i = 0; i < n; ++i)
    if (keep[i]) out.push_back(pts[i]);
  return out;
}

// ---- quads ---------------------------------------------------------------------

// Corners clockwise from top-left: TL, TR, BR, BL.
struct Quad {
  std::array<Point2, 4> corners;
};

inline double cross(const Point2& o, const Point2& a, const Point2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

/// Orders four points clockwise on screen starting at the one nearest the top-left.
inline Quad order_quad(std::array<Point2, 4> p) {
  const double cx = (p[0].x + p[1].x + p[2].x + p[3].x) / 4;
  const double cy = (p[0].y + p[1].y + p[2].y + p[3].y) / 4;
  std::sort(p.begin(), p.end(), [&](const Point2& a, const Point2& b) {
    return std::atan2(a.y - cy, a.x - cx) < std::atan2(b.y - cy, b.x - cx);
  });
  std::size_t tl = 0;
  for (std::size_t i = 1; i < 4; ++i)
    if (p[i].x + p[i].y < p[tl].x + p[tl].y) tl = i;
  std::rotate(p.begin(), p.begin() + static_cast<std::ptrdiff_t>(tl), p.end());
  return {p};
}

inline bool is_convex(const Quad& q) {
  int sign = 0;
  for (int i = 0; i < 4; ++i) {
    const double c = cross(q.corners[i], q.corners[(i + 1) % 4], q.corners[(i + 2) % 4]);
    if (std::abs(c) < 1e-9) return false;
    const int s = c > 0 ? 1 : -1;
    if (sign == 0) sign = s;
    if (s != sign) return false;
  }
  return true;
}

inline double dist(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Mean horizontal edge length over mean vertical edge length.
inline double quad_aspect(const Quad& q) {
  const auto& c = q.corners;
  const double wdt = (dist(c[0], c[1]) + dist(c[3], c[2])) / 2;
  const double hgt = (dist(c[0], c[3]) + dist(c[1], c[2])) / 2;
  return hgt > 0 ? wdt / hgt : 0.0;
}

namespace detail {

struct Line {
  Point2 p;  // a point on the line
  Point2 d;  // unit direction
};

// Total least squares through the points.
inline std::optional<Line> fit_line(const std::vector<PixelPos>& pts) {
  if (pts.size() < 3) return std::nullopt;
  double mx = 0, my = 0;
  for (const auto& q : pts) {
    mx += q.x;
    my += q.y;
  }
  mx /= static_cast<double>(pts.size());
  my /= static_cast<double>(pts.size());
  double sxx = 0, sxy = 0, syy = 0;
  for (const auto& q : pts) {
    sxx += (q.x - mx) * (q.x - mx);
    sxy += (q.x - mx) * (q.y - my);
    syy += (q.y - my) * (q.y - my);
  }
  const double theta = 0.5 * std::atan2(2 * sxy, sxx - syy);
  return Line{{mx, my}, {std::cos(theta), std::sin(theta)}};
}

inline std::optional<Point2> intersect(const Line& a, const Line& b) {
  const double den = a.d.x * b.d.y - a.d.y * b.d.x;
  if (std::abs(den) < 1e-6) return std::nullopt;
  const double t = ((b.p.x - a.p.x) * b.d.y - (b.p.y - a.p.y) * b.d.x) / den;
  return Point2{a.p.x + t * a.d.x, a.p.y + t * a.d.y};
}

}  // namespace detail

/// Sub-pixel corners for a four-vertex approximation of `contour`: a line is
/// fitted to the middle of each side's boundary run and neighbouring lines are
/// intersected. Returns nullopt when a side is too short to fit.
inline std::optional<Quad> refine_quad(const std::vector<PixelPos>& contour, const std::vector<PixelPos>& poly,
                                       double trim = 0.15) {
  if (poly.size() != 4 || contour.size() < 8) return std::nullopt;
  std::array<std::size_t, 4> idx{};
  std::size_t from = 0;
  for (int k = 0; k < 4; ++k) {
    std::size_t i = from;
    while (i < contour.size() && !(contour[i] == poly[k])) ++i;
    if (i == contour.size()) return std::nullopt;
    idx[k] = i;
    from = i + 1;
  }
  const std::size_t n = contour.size();
  std::array<detail::Line, 4> lines;
  for (int k = 0; k < 4; ++k) {
    const std::size_t a = idx[k];
    const std::size_t b = idx[(k + 1) % 4];
    const std::size_t len = (b + n - a) % n;
    const auto skip = static_cast<std::size_t>(std::ceil(trim * static_cast<double>(len)));
    std::vector<PixelPos> side;
    for (std::size_t off = skip; off + skip <= len; ++off) side.push_back(contour[(a + off) % n]);
    const auto line = detail::fit_line(side);
    if (!line) return std::nullopt;
    lines[k] = *line;
  }
  std::array<Point2, 4> corners;
  for (int k = 0; k < 4; ++k) {
    const auto c = detail::intersect(lines[(k + 3) % 4], lines[k]);
    if (!c) return std::nullopt;
    corners[k] = *c;
  }
  return order_quad(corners);
}

// ---- localisation --------------------------------------------------------------

struct LocateConfig {
  AdaptiveThreshold binarize{15, 8};
  std::size_t max_candidates = 10;  // only the largest contours are considered
  double epsilon_fraction = 0.02;   // of the contour perimeter
  double aspect_lo = 2.0;
  double aspect_hi = 6.0;
  long long min_area = 300;
  bool reject_border = true;  // a component touching the image edge is not a plate
  bool refine_corners = true;  // fit lines to the sides instead of using raw vertices
};

struct LocateStats {
  std::size_t contours_found = 0;
  std::size_t contours_inspected = 0;
  BitMask mask;
};

/// Binarise, trace contours, sort by area, and return the first of the ten
/// largest whose polygon approximation is a convex four-sided figure of plate
/// aspect.
inline Quad locate_plate(const GrayFrame& gray, const LocateConfig& cfg = {}, LocateStats* stats = nullptr) {
  BitMask mask = threshold(gray, cfg.binarize);
  auto contours = find_contours(mask);
  std::stable_sort(contours.begin(), contours.end(), [](const Contour& a, const Contour& b) { return a.area > b.area; });
  if (stats) {
    stats->contours_found = contours.size();
    stats->contours_inspected = 0;
  }
  const std::size_t limit = std::min(cfg.max_candidates, contours.size());
  std::optional<Quad> found;
  for (std::size_t i = 0; i < limit && !found; ++i) {
    const auto& c = contours[i];
    if (stats) ++stats->contours_inspected;
    if (c.area < cfg.min_area) continue;
    if (cfg.reject_border) {
      const bool touches = std::any_of(c.points.begin(), c.points.end(), [&](const PixelPos& p) {
        return p.x == 0 || p.y == 0 || p.x == gray.width() - 1 || p.y == gray.height() - 1;
      });
      if (touches) continue;
    }
    const auto poly = approx_polygon(c.points, std::max(1.0, cfg.epsilon_fraction * contour_perimeter(c.points)));
    if (poly.size() != 4) continue;
    std::array<Point2, 4> pts;
    for (int k = 0; k < 4; ++k) pts[k] = {static_cast<double>(poly[k].x), static_cast<double>(poly[k].y)};
    Quad q = order_quad(pts);
    if (!is_convex(q)) continue;
    if (cfg.refine_corners) {
      const auto refined = refine_quad(c.points, poly);
      if (refined && is_convex(*refined)) q = *refined;
    }
    const double aspect = quad_aspect(q);
    if (aspect < cfg.aspect_lo || aspect > cfg.aspect_hi) continue;
    found = q;
  }
  if (stats) stats->mask = std::move(mask);
  if (!found) throw Error(Errc::NoPlateFound, "no plate-shaped contour among the largest candidates");
  return *found;
}

// ---- rectification -------------------------------------------------------------

// Projective map from output pixel (u, v) to source (x, y).
struct Homography {
  std::array<double, 9> h{};

  Point2 apply(double u, double v) const {
    const double den = h[6] * u + h[7] * v + h[8];
    return {(h[0] * u + h[1] * v + h[2]) / den, (h[3] * u + h[4] * v + h[5]) / den};
  }
};

/// Solves the 8-unknown system sending `from` corners onto `to` corners.
inline Homography solve_homography(const std::array<Point2, 4>& from, const std::array<Point2, 4>& to) {
  double a[8][9] = {};
  for (int i = 0; i < 4; ++i) {
    const double u = from[i].x, v = from[i].y, x = to[i].x, y = to[i].y;
    double* r0 = a[2 * i];
    double* r1 = a[2 * i + 1];
    r0[0] = u, r0[1] = v, r0[2] = 1, r0[6] = -u * x, r0[7] = -v * x, r0[8] = x;
    r1[3] = u, r1[4] = v, r1[5] = 1, r1[6] = -u * y, r1[7] = -v * y, r1[8] = y;
  }
  for (int col = 0; col < 8; ++col) {
    int piv = col;
    for (int r = col + 1; r < 8; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    if (std::abs(a[piv][col]) < 1e-10) throw Error(Errc::DegenerateQuad, "corners do not span a quadrilateral");
    if (piv != col)
      for (int k = 0; k < 9; ++k) std::swap(a[piv][k], a[col][k]);
    for (int r = 0; r < 8; ++r) {
      if (r == col) continue;
      const double f = a[r][col] / a[col][col];
      if (f == 0) continue;
      for (int k = col; k < 9; ++k) a[r][k] -= f * a[col][k];
    }
  }
  Homography hm;
  for (int i = 0; i < 8; ++i) hm.h[i] = a[i][8] / a[i][i];
  hm.h[8] = 1;
  return hm;
}

inline void require_non_degenerate(const Quad& q) {
  const auto& c = q.corners;
  for (int i = 0; i < 4; ++i) {
    const double twice_area = std::abs(cross(c[i], c[(i + 1) % 4], c[(i + 2) % 4]));
    if (twice_area < 2.0) throw Error(Errc::DegenerateQuad, "three corners are (nearly) collinear");
  }
}

inline constexpr int kPlateWidth = 240;
inline constexpr int kPlateHeight = 60;

/// Perspective-normalises the quad into an out_w x out_h canvas. Corners map
/// to the centres of the canvas corner pixels; sampling is bilinear.
template <typename Pixel>
Image<Pixel> rectify(const Image<Pixel>& img, const Quad& quad, int out_w = kPlateWidth, int out_h = kPlateHeight) {
  require_non_degenerate(quad);
  const std::array<Point2, 4> canvas{{{0, 0}, {out_w - 1.0, 0}, {out_w - 1.0, out_h - 1.0}, {0, out_h - 1.0}}};
  const Homography hm = solve_homography(canvas, quad.corners);
  Image<Pixel> out(out_w, out_h);
  for (int v = 0; v < out_h; ++v) {
    for (int u = 0; u < out_w; ++u) {
      const Point2 s = hm.apply(u, v);
      out.at(u, v) = sample_bilinear(img, s.x, s.y);
    }
  }
  return out;
}

// ---- segmentation --------------------------------------------------------------

enum class Ink { Dark, Light };

struct Binarized {
  BitMask ink;
  Ink polarity = Ink::Dark;
};

/// Otsu split of the plate; the minority class is the ink.
inline Binarized binarize_plate(const GrayFrame& plate) {
  const int t = otsu_threshold(plate);
  std::size_t bright = 0;
  for (auto p : plate.pixels()) bright += p >= t;
  Binarized b;
  b.polarity = 2 * bright < plate.size() ? Ink::Light : Ink::Dark;
  b.ink = BitMask(plate.width(), plate.height());
  for (int y = 0; y < plate.height(); ++y)
    for (int x = 0; x < plate.width(); ++x) {
      const bool is_bright = plate.at(x, y) >= t;
      b.ink.set(x, y, b.polarity == Ink::Light ? is_bright : !is_bright);
    }
  return b;
}

struct SegmentConfig {
  double min_height = 0.40;
  double max_height = 0.90;
  double min_width = 0.02;
  double max_width = 0.25;
};

/// Glyph boxes left to right.
inline std::vector<Rect> segment_chars(const GrayFrame& plate, const SegmentConfig& cfg = {}) {
  const auto bin = binarize_plate(plate);
  std::vector<Rect> boxes;
  for (const auto& r : connected_components(bin.ink)) {
    const double h = static_cast<double>(r.bbox.h) / plate.height();
    const double w = static_cast<double>(r.bbox.w) / plate.width();
    if (h < cfg.min_height || h > cfg.max_height || w < cfg.min_width || w > cfg.max_width) continue;
    boxes.push_back(r.bbox);
  }
  if (boxes.empty()) throw Error(Errc::NoGlyphs, "no character-sized components on the plate");
  std::sort(boxes.begin(), boxes.end(), [](const Rect& a, const Rect& b) { return a.x < b.x; });
  return boxes;
}

// ---- recognition ---------------------------------------------------------------

inline constexpr int kGlyphW = 16;
inline constexpr int kGlyphH = 24;

struct GlyphTemplate {
  char ch = '?';
  std::array<std::uint8_t, kGlyphW * kGlyphH> bits{};  // 1 = ink
};

/// Each font glyph's ink bounding box stretched to 16x24 by nearest neighbour,
/// matching how segmented boxes are normalised before matching.
inline std::vector<GlyphTemplate> make_templates() {
  std::vector<GlyphTemplate> out;
  std::vector<char> chars;
  for (const auto& g : kPlateFont) chars.push_back(g.ch);
  std::sort(chars.begin(), chars.end());
  for (char ch : chars) {
    const auto& g = *find_glyph(ch);
    int c0 = kFontCols, c1 = -1, r0 = kFontRows, r1 = -1;
    for (int r = 0; r < kFontRows; ++r)
      for (int c = 0; c < kFontCols; ++c)
        if (glyph_on(g, c, r)) {
          c0 = std::min(c0, c), c1 = std::max(c1, c), r0 = std::min(r0, r), r1 = std::max(r1, r);
        }
    GlyphTemplate t;
    t.ch = ch;
    const int bw = c1 - c0 + 1;
    const int bh = r1 - r0 + 1;
    for (int y = 0; y < kGlyphH; ++y)
      for (int x = 0; x < kGlyphW; ++x) {
        const int c = c0 + (2 * x + 1) * bw / (2 * kGlyphW);
        const int r = r0 + (2 * y + 1) * bh / (2 * kGlyphH);
        t.bits[static_cast<std::size_t>(y) * kGlyphW + x] = glyph_on(g, c, r) ? 1 : 0;
      }
    out.push_back(t);
  }
  return out;
}

inline const std::vector<GlyphTemplate>& builtin_templates() {
  static const std::vector<GlyphTemplate> templates = make_templates();
  return templates;
}

/// Dark ink (0) on white paper (255).
inline GrayFrame template_image(const GlyphTemplate& t) {
  GrayFrame g(kGlyphW, kGlyphH, 255);
  for (int y = 0; y < kGlyphH; ++y)
    for (int x = 0; x < kGlyphW; ++x)
      if (t.bits[static_cast<std::size_t>(y) * kGlyphW + x]) g.at(x, y) = 0;
  return g;
}

inline GrayFrame invert(const GrayFrame& g) {
  GrayFrame out = g;
  for (auto& p : out.pixels()) p = static_cast<std::uint8_t>(255 - p);
  return out;
}

/// Glyph normalised to 16x24 and binarised (Otsu; darker class is ink).
inline std::array<std::uint8_t, kGlyphW * kGlyphH> glyph_bits(const GrayFrame& glyph) {
  const GrayFrame norm = resize_bilinear(glyph, kGlyphW, kGlyphH);
  const int t = otsu_threshold(norm);
  std::array<std::uint8_t, kGlyphW * kGlyphH> bits{};
  for (int y = 0; y < kGlyphH; ++y)
    for (int x = 0; x < kGlyphW; ++x) bits[static_cast<std::size_t>(y) * kGlyphW + x] = norm.at(x, y) < t ? 1 : 0;
  return bits;
}

inline double match_score(const std::array<std::uint8_t, kGlyphW * kGlyphH>& bits, const GlyphTemplate& t) {
  std::size_t diff = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) diff += bits[i] != t.bits[i];
  return 1.0 - static_cast<double>(diff) / static_cast<double>(bits.size());
}

struct GlyphRead {
  char ch = '?';
  double score = 0;
};

/// Best template by 1 - Hamming/total; ties to the smaller character.
inline GlyphRead ocr_glyph(const GrayFrame& glyph, const std::vector<GlyphTemplate>& templates = builtin_templates()) {
  const auto bits = glyph_bits(glyph);
  GlyphRead best{'?', -1.0};
  for (const auto& t : templates) {
    const double s = match_score(bits, t);
    if (s > best.score || (s == best.score && t.ch < best.ch)) best = {t.ch, s};
  }
  return best;
}

// Plug boundary for character recognisers; the built-in one is template matching.
class OcrEngine {
 public:
  virtual ~OcrEngine() = default;
  virtual std::string id() const = 0;
  virtual GlyphRead read(const GrayFrame& glyph) const = 0;
};

class TemplateOcr final : public OcrEngine {
 public:
  std::string id() const override { return "template"; }
  GlyphRead read(const GrayFrame& glyph) const override { return ocr_glyph(glyph); }
};

using OcrFactory = std::function<std::unique_ptr<OcrEngine>()>;

class OcrRegistry {
 public:
  void register_external(const std::string& id, OcrFactory f) { external_[id] = std::move(f); }

  // choice is "template" or "external:<id>".
  std::unique_ptr<OcrEngine> make(const std::string& choice) const {
    if (choice == "template") return std::make_unique<TemplateOcr>();
    constexpr std::string_view prefix = "external:";
    if (choice.rfind(prefix, 0) == 0) {
      auto it = external_.find(choice.substr(prefix.size()));
      if (it != external_.end()) return it->second();
      throw Error(Errc::ConfigError, "no external OCR engine registered as '" + choice.substr(prefix.size()) + "'");
    }
    throw Error(Errc::ConfigError, "unknown OCR choice '" + choice + "'");
  }

 private:
  std::map<std::string, OcrFactory> external_;
};

// ---- end to end ----------------------------------------------------------------

enum class PlateType { Private, Commercial, Electric, Unknown };

inline std::string_view to_string(PlateType t) {
  switch (t) {
    case PlateType::Private: return "private";
    case PlateType::Commercial: return "commercial";
    case PlateType::Electric: return "electric";
    case PlateType::Unknown: return "unknown";
  }
  return "unknown";
}

inline std::optional<PlateType> parse_plate_type(std::string_view s) {
  for (auto t : {PlateType::Private, PlateType::Commercial, PlateType::Electric, PlateType::Unknown})
    if (to_string(t) == s) return t;
  return std::nullopt;
}

/// Background colour convention: white private, yellow commercial, green electric.
inline PlateType plate_type_for(ColorName background) {
  switch (background) {
    case ColorName::White: return PlateType::Private;
    case ColorName::Yellow: return PlateType::Commercial;
    case ColorName::Green: return PlateType::Electric;
    default: return PlateType::Unknown;
  }
}

struct PlateReadout {
  Quad quad;
  std::string text;
  std::vector<double> per_char_scores;
  PlateType plate_type = PlateType::Unknown;
  double confidence = 0;  // min of per_char_scores
};

struct PlateConfig {
  LocateConfig locate;
  SegmentConfig segment;
};

// Intermediate products, filled when a caller wants to dump them.
struct PlateDebug {
  BitMask locate_mask;
  std::optional<Quad> quad;
  std::optional<GrayFrame> rectified;
  std::optional<BitMask> ink;
  std::vector<Rect> boxes;
};

inline PlateReadout read_plate(const Frame& frame, const PlateConfig& cfg = {}, const OcrEngine* engine = nullptr,
                               PlateDebug* debug = nullptr) {
  static const TemplateOcr builtin;
  const OcrEngine& ocr = engine ? *engine : builtin;
  const GrayFrame gray = to_grayscale(frame);

  LocateStats stats;
  PlateReadout out;
  try {
    out.quad = locate_plate(gray, cfg.locate, &stats);
  } catch (...) {
    if (debug) debug->locate_mask = std::move(stats.mask);
    throw;
  }
  if (debug) {
    debug->locate_mask = std::move(stats.mask);
    debug->quad = out.quad;
  }

  GrayFrame plate = rectify(gray, out.quad);
  const Frame plate_rgb = rectify(frame, out.quad);
  const auto bin = binarize_plate(plate);
  if (debug) {
    debug->rectified = plate;
    debug->ink = bin.ink;
  }
  if (bin.polarity == Ink::Light) plate = invert(plate);
  const auto boxes = segment_chars(plate, cfg.segment);
  if (debug) debug->boxes = boxes;

  for (const auto& box : boxes) {
    const auto read = ocr.read(crop(plate, box));
    out.text.push_back(read.ch);
    out.per_char_scores.push_back(read.score);
  }
  out.confidence = *std::min_element(out.per_char_scores.begin(), out.per_char_scores.end());

  ColorOptions copt;
  copt.k = 2;
  copt.window = 0.9;
  out.plate_type = plate_type_for(classify_vehicle_color(plate_rgb, copt).name);
  return out;
}

}  // namespace vigil::plate
