#include <gtest/gtest.h>

#include <string>

#include "support.hpp"
#include "vigil/imaging.hpp"

using namespace vigil;
using vigil::testing::random_frame;
using vigil::testing::random_gray;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

Errc code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected an Error";
  return Errc::Corrupt;
}

}  // namespace

TEST(Ppm, DecodesMinimalBlackPixel) {
  auto b = bytes_of("P6 1 1 255\n");
  b.insert(b.end(), {0, 0, 0});
  const Frame f = decode_ppm(b);
  EXPECT_EQ(f.width(), 1);
  EXPECT_EQ(f.height(), 1);
  EXPECT_EQ(f.at(0, 0), (Rgb{0, 0, 0}));
}

TEST(Ppm, RejectsUnknownMagic) {
  EXPECT_EQ(code_of([] { decode_ppm(bytes_of("P7 1 1 255\n\0\0\0")); }), Errc::BadMagic);
}

TEST(Ppm, RejectsTruncatedPayloadAndOtherMaxval) {
  EXPECT_EQ(code_of([] { decode_ppm(bytes_of("P6 2 2 255\nabc")); }), Errc::TruncatedPayload);
  EXPECT_EQ(code_of([] { decode_ppm(bytes_of("P6 1 1 65535\nabcdef")); }), Errc::MaxvalNot255);
  EXPECT_EQ(code_of([] { decode_ppm(bytes_of("P6 0 1 255\n")); }), Errc::ZeroDimension);
}

TEST(Ppm, SkipsHeaderComments) {
  auto b = bytes_of("P6\n# made by hand\n1 1\n255\n");
  b.insert(b.end(), {1, 2, 3});
  EXPECT_EQ(decode_ppm(b).at(0, 0), (Rgb{1, 2, 3}));
}

TEST(Ppm, EncodesWhitePixelAsCanonicalHeaderPlusThreeBytes) {
  const auto b = encode_ppm(Frame(1, 1, Rgb{255, 255, 255}));
  ASSERT_EQ(b.size(), 14u);
  EXPECT_EQ(std::string(b.begin(), b.begin() + 11), "P6\n1 1\n255\n");
  EXPECT_EQ(b[11], 255);
  EXPECT_EQ(b[12], 255);
  EXPECT_EQ(b[13], 255);
}

TEST(Ppm, TwoPixelPayloadIsSixBytes) {
  const auto b = encode_ppm(Frame(2, 1, Rgb{9, 9, 9}));
  const auto header = std::string("P6\n2 1\n255\n").size();
  EXPECT_EQ(b.size() - header, 6u);
}

TEST(Ppm, RoundTripsRandomFrames) {
  SplitMix64 rng(42);
  for (int i = 0; i < 50; ++i) {
    const Frame f = random_frame(1 + rng.uniform_int(0, 40), 1 + rng.uniform_int(0, 40), rng);
    EXPECT_EQ(decode_ppm(encode_ppm(f)), f);
  }
}

TEST(Pgm, RoundTripsGrayAndExpandsColour) {
  SplitMix64 rng(5);
  const GrayFrame g = random_gray(13, 7, rng);
  EXPECT_EQ(decode_pgm(encode_pgm(g)), g);
  const Frame f = random_frame(4, 4, rng);
  EXPECT_EQ(decode_pgm(encode_ppm(f)), to_grayscale(f));
}

TEST(Image, PixelCountMatchesGeometry) {
  Frame f(7, 3);
  EXPECT_EQ(f.size(), 21u);
  EXPECT_THROW(Frame(0, 3), Error);
  EXPECT_EQ(code_of([] { Frame(2, 2, std::vector<Rgb>(3)); }), Errc::GeometryMismatch);
}

TEST(Grayscale, UsesRoundedLumaWeights) {
  EXPECT_EQ(to_grayscale(Frame(1, 1, Rgb{255, 255, 255})).at(0, 0), 255);
  EXPECT_EQ(to_grayscale(Frame(1, 1, Rgb{255, 0, 0})).at(0, 0), 76);
  EXPECT_EQ(to_grayscale(Frame(1, 1, Rgb{0, 0, 0})).at(0, 0), 0);
}

TEST(Grayscale, MatchesFormulaOracle) {
  SplitMix64 rng(8);
  const Frame f = random_frame(16, 16, rng);
  const GrayFrame g = to_grayscale(f);
  for (int y = 0; y < 16; ++y)
    for (int x = 0; x < 16; ++x) {
      const auto& p = f.at(x, y);
      const double l = 0.299 * p.r + 0.587 * p.g + 0.114 * p.b;
      EXPECT_EQ(g.at(x, y), static_cast<int>(std::lround(l)));
    }
}

TEST(Resize, SameSizeIsIdentity) {
  SplitMix64 rng(3);
  const Frame f = random_frame(9, 5, rng);
  EXPECT_EQ(resize_bilinear(f, 9, 5), f);
}

TEST(Resize, TwoByTwoAveragesToOnePixel) {
  Frame f(2, 2);
  f.at(0, 0) = {0, 0, 0};
  f.at(1, 0) = {0, 0, 0};
  f.at(0, 1) = {255, 255, 255};
  f.at(1, 1) = {255, 255, 255};
  EXPECT_EQ(resize_bilinear(f, 1, 1).at(0, 0), (Rgb{128, 128, 128}));
}

TEST(Resize, ConstantStaysConstant) {
  const Frame f(6, 4, Rgb{12, 200, 77});
  for (auto [w, h] : {std::pair{1, 1}, {3, 9}, {17, 11}}) {
    const Frame r = resize_bilinear(f, w, h);
    for (const auto& p : r.pixels()) EXPECT_EQ(p, (Rgb{12, 200, 77}));
  }
}

TEST(Crop, FullFrameIsIdentityAndOutOfBoundsFails) {
  SplitMix64 rng(4);
  const Frame f = random_frame(8, 6, rng);
  EXPECT_EQ(crop(f, Rect{0, 0, 8, 6}), f);
  EXPECT_EQ(code_of([&] { crop(f, Rect{4, 0, 5, 6}); }), Errc::RectOutOfBounds);
  const Frame c = crop(f, Rect{2, 1, 3, 2});
  EXPECT_EQ(c.at(0, 0), f.at(2, 1));
  EXPECT_EQ(c.at(2, 1), f.at(4, 2));
}

TEST(RandomCrop, OffsetsStayInRangeAndRepeat) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const Rect r = random_crop_rect(256, 256, 224, 224, seed);
    EXPECT_GE(r.x, 0);
    EXPECT_LE(r.x, 32);
    EXPECT_GE(r.y, 0);
    EXPECT_LE(r.y, 32);
    EXPECT_EQ(r, random_crop_rect(256, 256, 224, 224, seed));
  }
  SplitMix64 rng(1);
  const Frame f = random_frame(256, 256, rng);
  EXPECT_EQ(random_crop(f, 224, 224, 77), random_crop(f, 224, 224, 77));
}

TEST(Hflip, IsAnInvolutionAndSwapsPixels) {
  SplitMix64 rng(6);
  const Frame f = random_frame(7, 4, rng);
  EXPECT_EQ(hflip(hflip(f)), f);
  Frame ab(2, 1);
  ab.at(0, 0) = {1, 1, 1};
  ab.at(1, 0) = {2, 2, 2};
  const Frame ba = hflip(ab);
  EXPECT_EQ(ba.at(0, 0), (Rgb{2, 2, 2}));
  EXPECT_EQ(ba.at(1, 0), (Rgb{1, 1, 1}));
  const Frame column = random_frame(1, 5, rng);
  EXPECT_EQ(hflip(column), column);
}

TEST(Threshold, GlobalCases) {
  const GrayFrame flat(5, 5, 128);
  EXPECT_EQ(threshold(flat, GlobalThreshold{100}).count(), 25u);
  EXPECT_EQ(threshold(flat, GlobalThreshold{200}).count(), 0u);
  GrayFrame step(6, 2, 0);
  for (int y = 0; y < 2; ++y)
    for (int x = 3; x < 6; ++x) step.at(x, y) = 255;
  const BitMask m = threshold(step, GlobalThreshold{128});
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 6; ++x) EXPECT_EQ(m.test(x, y), x >= 3);
}

TEST(Threshold, AdaptiveMatchesWindowMeanOracle) {
  SplitMix64 rng(10);
  const GrayFrame g = random_gray(23, 17, rng);
  const AdaptiveThreshold mode{7, 5};
  const BitMask m = threshold(g, mode);
  const int r = mode.window / 2;
  for (int y = 0; y < g.height(); ++y)
    for (int x = 0; x < g.width(); ++x) {
      long long sum = 0;
      long long n = 0;
      for (int yy = std::max(0, y - r); yy <= std::min(g.height() - 1, y + r); ++yy)
        for (int xx = std::max(0, x - r); xx <= std::min(g.width() - 1, x + r); ++xx) {
          sum += g.at(xx, yy);
          ++n;
        }
      const bool want = static_cast<double>(g.at(x, y)) * n >= static_cast<double>(sum) - static_cast<double>(mode.offset) * n;
      EXPECT_EQ(m.test(x, y), want) << x << "," << y;
    }
}

TEST(Threshold, AdaptiveRejectsEvenWindow) {
  EXPECT_EQ(code_of([] { threshold(GrayFrame(4, 4), AdaptiveThreshold{4, 0}); }), Errc::BadWindow);
}
