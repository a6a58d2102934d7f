#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "vigil/error.hpp"

namespace vigil {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int right() const { return x + w; }
  int bottom() const { return y + h; }
  long long area() const { return static_cast<long long>(w) * h; }

  friend bool operator==(const Rect&, const Rect&) = default;
};

// Row-major raster with explicit geometry. Frame and GrayFrame are the two
// instantiations every stage passes around.
template <typename Pixel>
class Image {
 public:
  using pixel_type = Pixel;

  Image() = default;

  Image(int width, int height, Pixel fill = Pixel{}) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(Errc::ZeroDimension, "image dimensions must be >= 1");
    }
    pixels_.assign(static_cast<std::size_t>(width) * height, fill);
  }

  Image(int width, int height, std::vector<Pixel> pixels)
      : width_(width), height_(height), pixels_(std::move(pixels)) {
    if (width < 1 || height < 1) {
      throw Error(Errc::ZeroDimension, "image dimensions must be >= 1");
    }
    if (pixels_.size() != static_cast<std::size_t>(width) * height) {
      throw Error(Errc::GeometryMismatch, "pixel count does not match width*height");
    }
  }

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::size_t size() const { return pixels_.size(); }

  Pixel& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  const Pixel& at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  std::span<Pixel> pixels() { return pixels_; }
  std::span<const Pixel> pixels() const { return pixels_; }

  bool contains(const Rect& r) const {
    return r.w > 0 && r.h > 0 && r.x >= 0 && r.y >= 0 && r.right() <= width_ && r.bottom() <= height_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<Pixel> pixels_;
};

using Frame = Image<Rgb>;
using GrayFrame = Image<std::uint8_t>;

class BitMask {
 public:
  BitMask() = default;
  BitMask(int width, int height) : width_(width), height_(height) {
    if (width < 1 || height < 1) {
      throw Error(Errc::ZeroDimension, "mask dimensions must be >= 1");
    }
    bits_.assign(static_cast<std::size_t>(width) * height, 0);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return bits_.size(); }

  bool test(int x, int y) const { return bits_[static_cast<std::size_t>(y) * width_ + x] != 0; }
  void set(int x, int y, bool on = true) { bits_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }

  std::span<const std::uint8_t> bits() const { return bits_; }

  friend bool operator==(const BitMask&, const BitMask&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

// SplitMix64 (Steele, Lea, Flood 2014): state += 0x9E3779B97F4A7C15, then the
// 30/27/31 xor-shift-multiply finalizer. Used for every seeded choice in the
// library so runs are reproducible across platforms.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform integer in [0, bound] (inclusive), multiply-high reduction.
  std::uint64_t uniform(std::uint64_t bound) {
    const unsigned __int128 wide = static_cast<unsigned __int128>(next()) * (static_cast<unsigned __int128>(bound) + 1);
    return static_cast<std::uint64_t>(wide >> 64);
  }

  int uniform_int(int lo, int hi) { return lo + static_cast<int>(uniform(static_cast<std::uint64_t>(hi - lo))); }

  // Uniform real in [0, 1) from the top 53 bits.
  double uniform_real() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform_real(double lo, double hi) { return lo + (hi - lo) * uniform_real(); }

  // Box-Muller; one draw per call keeps the sequence simple to reproduce.
  double normal(double mean = 0.0, double stddev = 1.0) {
    double u1 = uniform_real();
    while (u1 <= 0.0) u1 = uniform_real();
    const double u2 = uniform_real();
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

 private:
  std::uint64_t state_;
};

namespace detail {

inline std::uint8_t clamp_round(double v) {
  const double r = std::floor(v + 0.5);
  return static_cast<std::uint8_t>(std::clamp(r, 0.0, 255.0));
}

inline std::uint8_t blend(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d, double fx, double fy) {
  const double top = a + (b - a) * fx;
  const double bottom = c + (d - c) * fx;
  return clamp_round(top + (bottom - top) * fy);
}

inline std::uint8_t blend_px(std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d, double fx, double fy) {
  return blend(a, b, c, d, fx, fy);
}

inline Rgb blend_px(const Rgb& a, const Rgb& b, const Rgb& c, const Rgb& d, double fx, double fy) {
  return {blend(a.r, b.r, c.r, d.r, fx, fy), blend(a.g, b.g, c.g, d.g, fx, fy), blend(a.b, b.b, c.b, d.b, fx, fy)};
}

class Cursor {
 public:
  explicit Cursor(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (is_space(c)) {
        ++pos_;
      } else {
        return;
      }
    }
  }

  long read_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size()) throw Error(Errc::TruncatedPayload, "header ends early");
    if (bytes_[pos_] < '0' || bytes_[pos_] > '9') throw Error(Errc::BadMagic, "malformed header token");
    long value = 0;
    while (pos_ < bytes_.size() && bytes_[pos_] >= '0' && bytes_[pos_] <= '9') {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000'000L) throw Error(Errc::BadMagic, "header value out of range");
      ++pos_;
    }
    return value;
  }

  std::size_t pos() const { return pos_; }
  void advance(std::size_t n) { pos_ += n; }
  std::size_t remaining() const { return bytes_.size() - pos_; }
  std::uint8_t peek() const { return bytes_[pos_]; }

  static bool is_space(std::uint8_t c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f'; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

struct NetpbmHeader {
  bool color = true;
  int width = 0;
  int height = 0;
  std::size_t payload_offset = 0;
};

inline NetpbmHeader parse_netpbm_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '6' && bytes[1] != '5')) {
    throw Error(Errc::BadMagic, "expected P6 or P5");
  }
  Cursor cur(bytes);
  cur.advance(2);
  if (cur.remaining() > 0 && !Cursor::is_space(cur.peek()) && cur.peek() != '#') {
    throw Error(Errc::BadMagic, "magic must be followed by whitespace");
  }
  NetpbmHeader h;
  h.color = bytes[1] == '6';
  const long w = cur.read_uint();
  const long ht = cur.read_uint();
  const long maxval = cur.read_uint();
  if (w < 1 || ht < 1) throw Error(Errc::ZeroDimension, "zero image dimension");
  if (maxval != 255) throw Error(Errc::MaxvalNot255, "maxval " + std::to_string(maxval));
  if (cur.remaining() == 0 || !Cursor::is_space(cur.peek())) {
    throw Error(Errc::TruncatedPayload, "missing separator after maxval");
  }
  cur.advance(1);
  h.width = static_cast<int>(w);
  h.height = static_cast<int>(ht);
  h.payload_offset = cur.pos();
  const std::size_t need = static_cast<std::size_t>(w) * ht * (h.color ? 3 : 1);
  if (bytes.size() - h.payload_offset < need) {
    throw Error(Errc::TruncatedPayload, "payload shorter than width*height");
  }
  return h;
}

}  // namespace detail

/// Decodes binary PPM (P6) or PGM (P5). Gray input is promoted to r = g = b.
inline Frame decode_ppm(std::span<const std::uint8_t> bytes) {
  const auto h = detail::parse_netpbm_header(bytes);
  std::vector<Rgb> px(static_cast<std::size_t>(h.width) * h.height);
  const std::uint8_t* src = bytes.data() + h.payload_offset;
  if (h.color) {
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = {src[3 * i], src[3 * i + 1], src[3 * i + 2]};
  } else {
    for (std::size_t i = 0; i < px.size(); ++i) px[i] = {src[i], src[i], src[i]};
  }
  return Frame(h.width, h.height, std::move(px));
}

/// Decodes P5 directly into luma; P6 input is converted with to_grayscale.
inline GrayFrame to_grayscale(const Frame& frame);

inline GrayFrame decode_pgm(std::span<const std::uint8_t> bytes) {
  const auto h = detail::parse_netpbm_header(bytes);
  if (h.color) return to_grayscale(decode_ppm(bytes));
  const std::uint8_t* src = bytes.data() + h.payload_offset;
  std::vector<std::uint8_t> px(src, src + static_cast<std::size_t>(h.width) * h.height);
  return GrayFrame(h.width, h.height, std::move(px));
}

inline std::vector<std::uint8_t> encode_ppm(const Frame& frame) {
  const std::string header = "P6\n" + std::to_string(frame.width()) + " " + std::to_string(frame.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + frame.size() * 3);
  for (const auto& p : frame.pixels()) {
    out.push_back(p.r);
    out.push_back(p.g);
    out.push_back(p.b);
  }
  return out;
}

inline std::vector<std::uint8_t> encode_pgm(const GrayFrame& gray) {
  const std::string header = "P5\n" + std::to_string(gray.width()) + " " + std::to_string(gray.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), gray.pixels().begin(), gray.pixels().end());
  return out;
}

inline std::vector<std::uint8_t> encode_pgm(const BitMask& mask) {
  GrayFrame g(mask.width(), mask.height());
  for (int y = 0; y < mask.height(); ++y)
    for (int x = 0; x < mask.width(); ++x) g.at(x, y) = mask.test(x, y) ? 255 : 0;
  return encode_pgm(g);
}

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::IoError, "short write to " + path.string());
}

inline Frame load_frame(const std::filesystem::path& path) { return decode_ppm(read_file(path)); }
inline void save_frame(const std::filesystem::path& path, const Frame& f) { write_file(path, encode_ppm(f)); }
inline void save_gray(const std::filesystem::path& path, const GrayFrame& g) { write_file(path, encode_pgm(g)); }

inline std::uint8_t luma(const Rgb& p) {
  // BT.601 weights in thousandths; +500 rounds half up.
  return static_cast<std::uint8_t>((299 * p.r + 587 * p.g + 114 * p.b + 500) / 1000);
}

inline GrayFrame to_grayscale(const Frame& frame) {
  GrayFrame out(frame.width(), frame.height());
  auto dst = out.pixels();
  auto src = frame.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = luma(src[i]);
  return out;
}

inline Frame to_frame(const GrayFrame& gray) {
  Frame out(gray.width(), gray.height());
  auto dst = out.pixels();
  auto src = gray.pixels();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = {src[i], src[i], src[i]};
  return out;
}

/// Bilinear sample at continuous pixel-center coordinates, clamped to the edge.
template <typename Pixel>
Pixel sample_bilinear(const Image<Pixel>& img, double x, double y) {
  x = std::clamp(x, 0.0, static_cast<double>(img.width() - 1));
  y = std::clamp(y, 0.0, static_cast<double>(img.height() - 1));
  const int x0 = static_cast<int>(std::floor(x));
  const int y0 = static_cast<int>(std::floor(y));
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  return detail::blend_px(img.at(x0, y0), img.at(x1, y0), img.at(x0, y1), img.at(x1, y1), x - x0, y - y0);
}

/// Half-pixel-center bilinear resize: src = (dst + 0.5) * in / out - 0.5.
template <typename Pixel>
Image<Pixel> resize_bilinear(const Image<Pixel>& img, int out_w, int out_h) {
  if (out_w < 1 || out_h < 1) throw Error(Errc::ZeroDimension, "resize target must be >= 1x1");
  Image<Pixel> out(out_w, out_h);
  const double sx = static_cast<double>(img.width()) / out_w;
  const double sy = static_cast<double>(img.height()) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double fy = (y + 0.5) * sy - 0.5;
    for (int x = 0; x < out_w; ++x) {
      out.at(x, y) = sample_bilinear(img, (x + 0.5) * sx - 0.5, fy);
    }
  }
  return out;
}

template <typename Pixel>
Image<Pixel> crop(const Image<Pixel>& img, const Rect& rect) {
  if (!img.contains(rect)) throw Error(Errc::RectOutOfBounds, "crop rectangle leaves the image");
  Image<Pixel> out(rect.w, rect.h);
  for (int y = 0; y < rect.h; ++y)
    for (int x = 0; x < rect.w; ++x) out.at(x, y) = img.at(rect.x + x, rect.y + y);
  return out;
}

/// Offsets for a random crop, drawn x first then y from a SplitMix64 seeded with `seed`.
inline Rect random_crop_rect(int width, int height, int out_w, int out_h, std::uint64_t seed) {
  if (out_w < 1 || out_h < 1) throw Error(Errc::ZeroDimension, "crop size must be >= 1x1");
  if (out_w > width || out_h > height) throw Error(Errc::RectOutOfBounds, "crop larger than image");
  SplitMix64 rng(seed);
  const int x = rng.uniform_int(0, width - out_w);
  const int y = rng.uniform_int(0, height - out_h);
  return {x, y, out_w, out_h};
}

template <typename Pixel>
Image<Pixel> random_crop(const Image<Pixel>& img, int out_w, int out_h, std::uint64_t seed) {
  return crop(img, random_crop_rect(img.width(), img.height(), out_w, out_h, seed));
}

template <typename Pixel>
Image<Pixel> hflip(const Image<Pixel>& img) {
  Image<Pixel> out(img.width(), img.height());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x) out.at(img.width() - 1 - x, y) = img.at(x, y);
  return out;
}

struct GlobalThreshold {
  int t = 128;
};

// pixel >= mean(window) - offset. The window is clipped at the borders and the
// mean taken over the in-bounds pixels only.
struct AdaptiveThreshold {
  int window = 15;
  int offset = 10;
};

using ThresholdMode = std::variant<GlobalThreshold, AdaptiveThreshold>;

inline BitMask threshold(const GrayFrame& gray, const ThresholdMode& mode) {
  BitMask mask(gray.width(), gray.height());
  if (const auto* g = std::get_if<GlobalThreshold>(&mode)) {
    for (int y = 0; y < gray.height(); ++y)
      for (int x = 0; x < gray.width(); ++x) mask.set(x, y, gray.at(x, y) >= g->t);
    return mask;
  }
  const auto& a = std::get<AdaptiveThreshold>(mode);
  if (a.window < 3 || a.window % 2 == 0) throw Error(Errc::BadWindow, "adaptive window must be odd and >= 3");

  const int w = gray.width();
  const int h = gray.height();
  // Summed-area table with a zero row/column in front.
  std::vector<long long> sat(static_cast<std::size_t>(w + 1) * (h + 1), 0);
  auto S = [&](int x, int y) -> long long& { return sat[static_cast<std::size_t>(y) * (w + 1) + x]; };
  for (int y = 0; y < h; ++y) {
    long long row = 0;
    for (int x = 0; x < w; ++x) {
      row += gray.at(x, y);
      S(x + 1, y + 1) = S(x + 1, y) + row;
    }
  }
  const int r = a.window / 2;
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - r);
    const int y1 = std::min(h, y + r + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - r);
      const int x1 = std::min(w, x + r + 1);
      const long long count = static_cast<long long>(x1 - x0) * (y1 - y0);
      const long long sum = S(x1, y1) - S(x0, y1) - S(x1, y0) + S(x0, y0);
      mask.set(x, y, static_cast<long long>(gray.at(x, y)) * count >= sum - static_cast<long long>(a.offset) * count);
    }
  }
  return mask;
}

/// Otsu's between-class-variance threshold; returns t such that pixel >= t is the bright class.
inline int otsu_threshold(const GrayFrame& gray) {
  std::array<long long, 256> hist{};
  for (auto p : gray.pixels()) ++hist[p];
  const double total = static_cast<double>(gray.size());
  double sum_all = 0;
  for (int i = 0; i < 256; ++i) sum_all += static_cast<double>(i) * hist[i];
  double w_b = 0;
  double sum_b = 0;
  double best = -1;
  int best_t = 128;
  for (int t = 0; t < 256; ++t) {
    w_b += hist[t];
    if (w_b == 0) continue;
    const double w_f = total - w_b;
    if (w_f == 0) break;
    sum_b += static_cast<double>(t) * hist[t];
    const double m_b = sum_b / w_b;
    const double m_f = (sum_all - sum_b) / w_f;
    const double between = w_b * w_f * (m_b - m_f) * (m_b - m_f);
    if (between > best) {
      best = between;
      best_t = t + 1;
    }
  }
  return best_t;
}

}  // namespace vigil
