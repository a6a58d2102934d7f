#pragma once

// Synthetic scenes with exact ground truth: a fixed road background, one
// rear-view vehicle per scene with a rendered plate, and a manifest.

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "vigil/color.hpp"
#include "vigil/eval.hpp"
#include "vigil/font.hpp"
#include "vigil/imaging.hpp"
#include "vigil/plate.hpp"
#include "vigil/vmmr.hpp"

namespace vigil::corpus {

using plate::PlateType;
using plate::Point2;

enum class SceneKind { Clean, Noisy, Occluded, Empty };

inline std::string_view to_string(SceneKind k) {
  switch (k) {
    case SceneKind::Clean: return "clean";
    case SceneKind::Noisy: return "noisy";
    case SceneKind::Occluded: return "occluded";
    case SceneKind::Empty: return "empty";
  }
  return "?";
}

struct Scene {
  Frame image;
  SceneKind kind = SceneKind::Empty;
  std::optional<Rect> vehicle_box;
  std::optional<std::string> plate_text;
  std::optional<ColorName> color;
  std::optional<PlateType> plate_type;
  std::optional<std::array<Point2, 4>> corners;  // TL, TR, BR, BL of the plate face
};

inline constexpr Rgb kInk{20, 20, 20};
inline constexpr Rgb kOutline{10, 10, 10};

inline Rgb plate_background(PlateType t) {
  switch (t) {
    case PlateType::Commercial: return {250, 210, 0};
    case PlateType::Electric: return {30, 165, 40};
    default: return {245, 245, 245};
  }
}

// ---- drawing --------------------------------------------------------------------

class Canvas {
 public:
  explicit Canvas(Frame& f) : f_(f) {}

  void put(int x, int y, Rgb c) {
    if (x < 0 || y < 0 || x >= f_.width() || y >= f_.height()) return;
    f_.at(x, y) = c;
    if (tracking_) {
      x0_ = std::min(x0_, x);
      y0_ = std::min(y0_, y);
      x1_ = std::max(x1_, x);
      y1_ = std::max(y1_, y);
    }
  }

  void rect(double x0, double y0, double x1, double y1, Rgb c) {
    for (int y = static_cast<int>(std::ceil(y0 - 0.5)); y < static_cast<int>(std::ceil(y1 - 0.5)); ++y)
      for (int x = static_cast<int>(std::ceil(x0 - 0.5)); x < static_cast<int>(std::ceil(x1 - 0.5)); ++x) put(x, y, c);
  }

  // Even-odd fill over pixel centres.
  void polygon(const std::vector<Point2>& pts, Rgb c) {
    double minx = pts[0].x, maxx = pts[0].x, miny = pts[0].y, maxy = pts[0].y;
    for (const auto& p : pts) {
      minx = std::min(minx, p.x);
      maxx = std::max(maxx, p.x);
      miny = std::min(miny, p.y);
      maxy = std::max(maxy, p.y);
    }
    for (int y = static_cast<int>(std::floor(miny)); y <= static_cast<int>(std::ceil(maxy)); ++y) {
      for (int x = static_cast<int>(std::floor(minx)); x <= static_cast<int>(std::ceil(maxx)); ++x) {
        bool inside = false;
        for (std::size_t i = 0, j = pts.size() - 1; i < pts.size(); j = i++) {
          const auto& a = pts[i];
          const auto& b = pts[j];
          if ((a.y > y) != (b.y > y) && x < (b.x - a.x) * (y - a.y) / (b.y - a.y) + a.x) inside = !inside;
        }
        if (inside) put(x, y, c);
      }
    }
  }

  void ellipse(double cx, double cy, double rx, double ry, Rgb c) {
    for (int y = static_cast<int>(std::floor(cy - ry)); y <= static_cast<int>(std::ceil(cy + ry)); ++y)
      for (int x = static_cast<int>(std::floor(cx - rx)); x <= static_cast<int>(std::ceil(cx + rx)); ++x) {
        const double u = (x - cx) / rx;
        const double v = (y - cy) / ry;
        if (u * u + v * v <= 1.0) put(x, y, c);
      }
  }

  void begin_tracking() {
    tracking_ = true;
    x0_ = y0_ = 1 << 30;
    x1_ = y1_ = -1;
  }

  Rect tracked() const { return {x0_, y0_, x1_ - x0_ + 1, y1_ - y0_ + 1}; }

 private:
  Frame& f_;
  bool tracking_ = false;
  int x0_ = 0, y0_ = 0, x1_ = 0, y1_ = 0;
};

inline std::uint8_t clamp_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

inline void add_noise(Frame& f, double sigma, SplitMix64& rng) {
  if (sigma <= 0) return;
  for (auto& p : f.pixels()) {
    p.r = clamp_byte(p.r + rng.normal(0, sigma));
    p.g = clamp_byte(p.g + rng.normal(0, sigma));
    p.b = clamp_byte(p.b + rng.normal(0, sigma));
  }
}

// ---- plate ----------------------------------------------------------------------

inline constexpr int kCellW = 3;  // canvas pixels per font cell
inline constexpr int kCellH = 5;
inline constexpr int kPitch = 22;       // glyph advance on the canvas
inline constexpr int kLeftMargin = 13;
inline constexpr int kTopMargin = 12;
// Dark plate holder around the face, in scene pixels; at least the adaptive
// threshold radius so the face never sees the body colour.
inline constexpr double kPlateFrame = 8.0;

/// Plate face on the normalised plate canvas: paper colour with dark glyphs.
inline Frame render_plate_canvas(const std::string& text, PlateType type) {
  Frame c(plate::kPlateWidth, plate::kPlateHeight, plate_background(type));
  Canvas cv(c);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto* g = find_glyph(text[i]);
    if (!g) throw Error(Errc::ConfigError, std::string("no glyph for '") + text[i] + "'");
    const int gx = kLeftMargin + static_cast<int>(i) * kPitch;
    for (int row = 0; row < kFontRows; ++row)
      for (int col = 0; col < kFontCols; ++col)
        if (glyph_on(*g, col, row))
          cv.rect(gx + col * kCellW, kTopMargin + row * kCellH, gx + (col + 1) * kCellW, kTopMargin + (row + 1) * kCellH, kInk);
  }
  return c;
}

/// Warps the plate face so that the centres of its corner pixels land on
/// `corners`, with a dark frame `border` scene pixels wide around it.
inline void draw_plate(Frame& scene, const Frame& face, const std::array<Point2, 4>& corners, double border) {
  const double fw = face.width() - 1.0;
  const double fh = face.height() - 1.0;
  const std::array<Point2, 4> canvas{{{0, 0}, {fw, 0}, {fw, fh}, {0, fh}}};
  const auto to_face = plate::solve_homography(corners, canvas);
  const double scale = plate::dist(corners[0], corners[1]) / fw;
  const double b = border / scale;  // border width in face pixels
  double minx = 1e9, maxx = -1e9, miny = 1e9, maxy = -1e9;
  for (const auto& p : corners) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  const int pad = static_cast<int>(std::ceil(border)) + 3;
  Canvas cv(scene);
  for (int y = static_cast<int>(miny) - pad; y <= static_cast<int>(maxy) + pad; ++y) {
    for (int x = static_cast<int>(minx) - pad; x <= static_cast<int>(maxx) + pad; ++x) {
      const Point2 uv = to_face.apply(x, y);
      if (uv.x >= -0.5 && uv.x <= fw + 0.5 && uv.y >= -0.5 && uv.y <= fh + 0.5) {
        cv.put(x, y, sample_bilinear(face, uv.x, uv.y));
      } else if (uv.x >= -0.5 - b && uv.x <= fw + 0.5 + b && uv.y >= -0.5 - b && uv.y <= fh + 0.5 + b) {
        cv.put(x, y, kInk);
      }
    }
  }
}

/// Ten characters: two letters, two digits, two letters, four digits.
inline std::string random_plate_text(SplitMix64& rng) {
  static constexpr std::string_view kLetters = "ABCDEFGHIJKLMNOPQRSTUVWXYZ";
  static constexpr std::string_view kDigits = "0123456789";
  std::string s;
  for (char slot : std::string_view("LLDDLLDDDD"))
    s.push_back(slot == 'L' ? kLetters[rng.uniform(kLetters.size() - 1)] : kDigits[rng.uniform(kDigits.size() - 1)]);
  return s;
}

// ---- road and vehicle -----------------------------------------------------------

/// Static road: asphalt grey with fixed texture and dashed lane lines.
inline Frame render_background(int width = 640, int height = 480, std::uint64_t seed = 7) {
  Frame f(width, height, Rgb{108, 108, 110});
  SplitMix64 rng(seed);
  for (auto& p : f.pixels()) {
    const int d = rng.uniform_int(-5, 5);
    p = {clamp_byte(108 + d), clamp_byte(108 + d), clamp_byte(110 + d)};
  }
  Canvas cv(f);
  for (double lane : {width * 0.16, width * 0.84})
    for (int y = 0; y < height; y += 60) cv.rect(lane - 3, y, lane + 3, y + 30, {215, 215, 210});
  return f;
}

struct VehicleLayout {
  double x = 0, y = 0;  // top-left of the silhouette
  double w = 400;
  double h = 248;
};

inline Rgb jitter(Rgb c, SplitMix64& rng, int amount) {
  return {clamp_byte(c.r + rng.uniform_int(-amount, amount)), clamp_byte(c.g + rng.uniform_int(-amount, amount)),
          clamp_byte(c.b + rng.uniform_int(-amount, amount))};
}

/// Draws the rear view; returns the bounding box of every drawn pixel.
inline Rect draw_vehicle(Frame& scene, const VehicleLayout& v, Rgb body) {
  Canvas cv(scene);
  cv.begin_tracking();
  const double X = v.x, Y = v.y, W = v.w, H = v.h;
  const double o = 3;  // outline width
  auto wheels = [&](double grow, Rgb c) {
    cv.rect(X + 0.07 * W - grow, Y + 0.72 * H, X + 0.18 * W + grow, Y + H + grow, c);
    cv.rect(X + 0.82 * W - grow, Y + 0.72 * H, X + 0.93 * W + grow, Y + H + grow, c);
  };
  auto cabin = [&](double grow) {
    return std::vector<Point2>{{X + 0.20 * W - grow, Y - grow},
                               {X + 0.80 * W + grow, Y - grow},
                               {X + 0.92 * W + grow, Y + 0.36 * H},
                               {X + 0.08 * W - grow, Y + 0.36 * H}};
  };
  // Outline first, then the shapes themselves on top.
  wheels(o, kOutline);
  cv.rect(X - o, Y + 0.34 * H - o, X + W + o, Y + 0.86 * H + o, kOutline);
  cv.polygon(cabin(o), kOutline);
  wheels(0, {18, 18, 18});
  cv.rect(X, Y + 0.34 * H, X + W, Y + 0.86 * H, body);
  cv.polygon(cabin(0), body);

  // Rear glass with chamfered corners.
  const double gx0 = X + 0.26 * W, gx1 = X + 0.74 * W, gy0 = Y + 0.06 * H, gy1 = Y + 0.31 * H, ch = 0.05 * W;
  cv.polygon({{gx0 + ch, gy0}, {gx1 - ch, gy0}, {gx1, gy0 + ch}, {gx1, gy1 - ch}, {gx1 - ch, gy1}, {gx0 + ch, gy1}, {gx0, gy1 - ch}, {gx0, gy0 + ch}},
             {55, 65, 80});
  // Tail lights.
  const Rgb lamp{190, 25, 25};
  cv.rect(X + 0.03 * W, Y + 0.42 * H, X + 0.15 * W, Y + 0.56 * H, lamp);
  cv.rect(X + 0.85 * W, Y + 0.42 * H, X + 0.97 * W, Y + 0.56 * H, lamp);
  return cv.tracked();
}

struct SceneOptions {
  double clean_sigma = 1.0;
  double noisy_sigma_lo = 3.0;
  double noisy_sigma_hi = 6.0;
  double skew_px = 4.0;  // max corner displacement on noisy scenes
};

/// One scene over `background`. Everything random comes from `seed`.
inline Scene render_scene(const Frame& background, SceneKind kind, std::uint64_t seed, const SceneOptions& opt = {}) {
  SplitMix64 rng(seed);
  Scene s;
  s.kind = kind;
  s.image = background;
  if (kind != SceneKind::Empty) {
    VehicleLayout v;
    v.w = std::round(rng.uniform_real(380, 440));
    v.h = std::round(v.w * 0.62);
    v.x = std::round(rng.uniform_real(10, background.width() - v.w - 10));
    v.y = std::round(rng.uniform_real(10, background.height() - v.h - 10));
    const auto color = kPalette[rng.uniform(kPalette.size() - 1)].name;
    const Rgb body = jitter(anchor_of(color), rng, 10);
    s.color = color;
    s.vehicle_box = draw_vehicle(s.image, v, body);

    const auto type = static_cast<PlateType>(rng.uniform(2));
    const std::string text = random_plate_text(rng);
    const double pw = std::round(rng.uniform_real(0.44, 0.50) * v.w);
    const double ph = std::round(pw / 4);
    const double px = std::round(v.x + (v.w - pw) / 2);
    const double py = std::round(v.y + 0.60 * v.h);
    std::array<Point2, 4> corners{{{px, py}, {px + pw - 1, py}, {px + pw - 1, py + ph - 1}, {px, py + ph - 1}}};
    if (kind == SceneKind::Noisy) {
      for (auto& c : corners) {
        c.x += rng.uniform_real(-opt.skew_px, opt.skew_px);
        c.y += rng.uniform_real(-opt.skew_px * 0.75, opt.skew_px * 0.75);
      }
    }
    draw_plate(s.image, render_plate_canvas(text, type), corners, kPlateFrame);
    if (kind == SceneKind::Occluded) {
      // Mud-coloured body paint over the plate: no plate-shaped contour remains.
      Canvas(s.image).ellipse(px + pw / 2, py + ph / 2, pw / 2 + 16, ph / 2 + 12, body);
    } else {
      s.plate_text = text;
      s.plate_type = type;
      s.corners = corners;
    }
  }
  const double sigma = kind == SceneKind::Noisy ? rng.uniform_real(opt.noisy_sigma_lo, opt.noisy_sigma_hi) : opt.clean_sigma;
  add_noise(s.image, sigma, rng);
  return s;
}

/// Scene kind for the i-th corpus scene: per block of twenty, one empty road,
/// one occluded plate, nine clean and nine noisy scenes.
inline SceneKind kind_for_index(int i) {
  const int m = i % 20;
  if (m == 0) return SceneKind::Empty;
  if (m == 1) return SceneKind::Occluded;
  return m < 11 ? SceneKind::Clean : SceneKind::Noisy;
}

inline std::uint64_t scene_seed(std::uint64_t corpus_seed, int index) {
  SplitMix64 mix(corpus_seed ^ (0x5851F42D4C957F2Dull * static_cast<std::uint64_t>(index + 1)));
  return mix.next();
}

/// A plate among nine larger light squares: with the road itself, ten
/// components outrank the plate face, which comes eleventh by area.
struct AdversarialScene {
  Frame image;
  std::array<Point2, 4> corners;
  std::string plate_text;
  int larger_components = 0;  // squares plus the road
};

inline AdversarialScene render_adversarial_scene(std::uint64_t seed = 11) {
  SplitMix64 rng(seed);
  AdversarialScene a;
  a.image = Frame(640, 480, Rgb{110, 110, 110});
  Canvas cv(a.image);
  int squares = 0;
  for (int row = 0; row < 2; ++row) {
    for (int col = 0; col < (row == 0 ? 5 : 4); ++col) {
      const double x = 18 + col * 122;
      const double y = 20 + row * 130;
      cv.rect(x - 3, y - 3, x + 103, y + 103, kInk);
      cv.rect(x, y, x + 100, y + 100, {235, 235, 235});
      ++squares;
    }
  }
  a.plate_text = random_plate_text(rng);
  const double pw = 160, ph = 40, px = 240, py = 360;
  a.corners = {{{px, py}, {px + pw - 1, py}, {px + pw - 1, py + ph - 1}, {px, py + ph - 1}}};
  draw_plate(a.image, render_plate_canvas(a.plate_text, PlateType::Private), a.corners, kPlateFrame);
  a.larger_components = squares + 1;
  return a;
}

// ---- corpus on disk -------------------------------------------------------------

struct CorpusOptions {
  int scenes = 200;
  std::uint64_t seed = 1;
  int width = 640;
  int height = 480;
  SceneOptions scene;
};

/// Writes background.ppm, scene_NNNN.ppm, adversarial.ppm and manifest.tsv;
/// returns the manifest.
inline Manifest generate_corpus(const std::filesystem::path& out, const CorpusOptions& opt = {}) {
  if (opt.scenes < 1) throw Error(Errc::ConfigError, "scene count must be at least 1");
  std::filesystem::create_directories(out);
  const Frame background = render_background(opt.width, opt.height, opt.seed);
  save_frame(out / "background.ppm", background);

  Manifest m;
  m.base_dir = out;
  m.background = "background.ppm";
  for (int i = 0; i < opt.scenes; ++i) {
    const auto scene = render_scene(background, kind_for_index(i), scene_seed(opt.seed, i), opt.scene);
    char name[32];
    std::snprintf(name, sizeof name, "scene_%04d.ppm", i);
    save_frame(out / name, scene.image);
    ManifestRecord r;
    r.image = name;
    if (scene.vehicle_box) r.boxes.push_back(*scene.vehicle_box);
    r.plate_text = scene.plate_text;
    r.color = scene.color;
    r.plate_type = scene.plate_type;
    r.corners = scene.corners;
    r.tag = std::string(to_string(scene.kind));
    m.records.push_back(std::move(r));
  }
  save_manifest(out / "manifest.tsv", m);
  save_frame(out / "adversarial.ppm", render_adversarial_scene(opt.seed).image);
  return m;
}

// ---- texture sanity model for the VMMR stage --------------------------------------
//
// Four classes: vertical stripes, horizontal stripes, checkerboard, flat. A
// 3x3 stride-2 gradient stem with hand-set weights, average pooling, and a
// nearest-class-mean head fitted in closed form.

inline constexpr int kTextureSize = 32;

inline std::vector<std::string> sanity_labels() {
  return {"Texture Vertical", "Texture Horizontal", "Texture Checker", "Texture Flat"};
}

inline Frame texture_sample(int cls, std::uint64_t seed, int size = kTextureSize) {
  SplitMix64 rng(seed);
  const Rgb a = jitter({200, 200, 200}, rng, 40);
  const Rgb b = jitter({50, 50, 50}, rng, 40);
  const int period = rng.uniform_int(4, 10);
  const int phase = rng.uniform_int(0, period - 1);
  Frame f(size, size, a);
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const bool vx = ((x + phase) % period) < period / 2;
      const bool hy = ((y + phase) % period) < period / 2;
      bool on = false;
      switch (cls) {
        case 0: on = vx; break;
        case 1: on = hy; break;
        case 2: on = vx != hy; break;
        default: on = false; break;
      }
      f.at(x, y) = on ? b : a;
    }
  }
  add_noise(f, 4.0, rng);
  return f;
}

inline vmmr::ArchitectureSpec sanity_architecture() {
  using vmmr::LayerKind;
  vmmr::ArchitectureSpec spec;
  spec.width_multiplier = 1.0;
  spec.input_resolution = kTextureSize;
  spec.num_classes = 4;
  spec.layers = {{LayerKind::StandardConv, 2, 3, 3, 3, 4},
                 {LayerKind::GlobalAvgPool, 1, 1, 1, 4, 4},
                 {LayerKind::FullyConnected, 1, 1, 1, 4, 4},
                 {LayerKind::Softmax, 1, 1, 1, 4, 4}};
  return spec;
}

/// Stem filters: +d/dx, -d/dx, +d/dy, -d/dy of the channel mean (Sobel).
inline std::vector<float> sanity_stem() {
  const int sobel_x[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
  std::vector<float> w(3 * 3 * 3 * 4 + 4, 0.0f);
  for (int ky = 0; ky < 3; ++ky)
    for (int kx = 0; kx < 3; ++kx)
      for (int ci = 0; ci < 3; ++ci) {
        const float gx = static_cast<float>(sobel_x[ky][kx]) / 12.0f;
        const float gy = static_cast<float>(sobel_x[kx][ky]) / 12.0f;
        const std::size_t base = ((static_cast<std::size_t>(ky) * 3 + kx) * 3 + ci) * 4;
        w[base + 0] = gx;
        w[base + 1] = -gx;
        w[base + 2] = gy;
        w[base + 3] = -gy;
      }
  return w;
}

inline vmmr::LoadedModel sanity_model(std::uint64_t seed = 3, int per_class = 24, double sharpness = 40.0) {
  auto spec = sanity_architecture();
  vmmr::WeightBundle w = vmmr::zero_weights(spec);
  w.layers[0] = sanity_stem();
  // Identity head first, so the logits are the pooled features.
  for (int i = 0; i < 4; ++i) w.layers[2][static_cast<std::size_t>(i) * 4 + i] = 1.0f;
  std::array<std::array<double, 4>, 4> mean{};
  SplitMix64 rng(seed);
  for (int cls = 0; cls < 4; ++cls) {
    for (int n = 0; n < per_class; ++n) {
      const auto f = vmmr::forward_logits(spec, w, texture_sample(cls, rng.next()));
      for (int i = 0; i < 4; ++i) mean[cls][i] += f[i] / per_class;
    }
  }
  // logit_c = s * (mu_c . f - |mu_c|^2 / 2)
  std::vector<float> head(4 * 4 + 4, 0.0f);
  for (int c = 0; c < 4; ++c) {
    double sq = 0;
    for (int i = 0; i < 4; ++i) {
      head[static_cast<std::size_t>(i) * 4 + c] = static_cast<float>(sharpness * mean[c][i]);
      sq += mean[c][i] * mean[c][i];
    }
    head[16 + c] = static_cast<float>(-sharpness * sq / 2);
  }
  w.layers[2] = head;
  return {spec, w};
}

inline std::vector<vmmr::LabeledImage> texture_set(int per_class, std::uint64_t seed) {
  std::vector<vmmr::LabeledImage> out;
  SplitMix64 rng(seed);
  for (int n = 0; n < per_class; ++n)
    for (int cls = 0; cls < 4; ++cls) out.push_back({texture_sample(cls, rng.next()), cls});
  return out;
}

/// Writes the sanity weights and their labels file.
inline void write_sanity_model(const std::filesystem::path& weights, const std::filesystem::path& labels) {
  const auto m = sanity_model();
  vmmr::save_weights(weights, m.spec, m.weights);
  std::ofstream out(labels);
  if (!out) throw Error(Errc::IoError, "cannot write " + labels.string());
  for (const auto& l : sanity_labels()) out << l << "\n";
}

}  // namespace vigil::corpus
