#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>

#include "support.hpp"
#include "vigil/corpus.hpp"
#include "vigil/vmmr.hpp"

using namespace vigil;
using namespace vigil::vmmr;

namespace {

Tensor random_tensor(int h, int w, int c, SplitMix64& rng) {
  Tensor t(h, w, c);
  for (auto& v : t.data) v = rng.uniform_real(-1, 1);
  return t;
}

std::vector<double> random_vec(std::size_t n, SplitMix64& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform_real(-1, 1);
  return v;
}

int pad_before(int in, int k, int stride) {
  const int out = (in + stride - 1) / stride;
  return std::max((out - 1) * stride + k - in, 0) / 2;
}

// Direct nested-loop convolution; groups = cin gives depthwise.
Tensor naive_conv(const Tensor& in, const std::vector<double>& w, const std::vector<double>& bias, int kh, int kw, int cout,
                  int stride, bool depthwise) {
  const int oh = (in.height + stride - 1) / stride;
  const int ow = (in.width + stride - 1) / stride;
  const int pt = pad_before(in.height, kh, stride);
  const int pl = pad_before(in.width, kw, stride);
  Tensor out(oh, ow, cout);
  for (int oy = 0; oy < oh; ++oy)
    for (int ox = 0; ox < ow; ++ox)
      for (int co = 0; co < cout; ++co) {
        double sum = bias.empty() ? 0.0 : bias[co];
        for (int ky = 0; ky < kh; ++ky)
          for (int kx = 0; kx < kw; ++kx) {
            const int iy = oy * stride + ky - pt;
            const int ix = ox * stride + kx - pl;
            if (iy < 0 || ix < 0 || iy >= in.height || ix >= in.width) continue;
            if (depthwise) {
              sum += in.at(iy, ix, co) * w[(ky * kw + kx) * in.channels + co];
            } else {
              for (int ci = 0; ci < in.channels; ++ci)
                sum += in.at(iy, ix, ci) * w[((ky * kw + kx) * in.channels + ci) * cout + co];
            }
          }
        out.at(oy, ox, co) = sum;
      }
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  EXPECT_EQ(a.shape(), b.shape());
  double d = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) d = std::max(d, std::abs(a.data[i] - b.data[i]));
  return d;
}

// Hand-tallied mult-adds and params of the 224 network, row by row.
struct Tally {
  long long macs = 0;
  long long params = 0;
};

Tally tally_reference(int classes) {
  Tally t;
  int res = 112;
  t.macs += 112LL * 112 * 3 * 3 * 3 * 32;
  t.params += 3 * 3 * 3 * 32 + 32;
  const int rows[13][3] = {{32, 64, 1},   {64, 128, 2},  {128, 128, 1}, {128, 256, 2}, {256, 256, 1},
                           {256, 512, 2}, {512, 512, 1}, {512, 512, 1}, {512, 512, 1}, {512, 512, 1},
                           {512, 512, 1}, {512, 1024, 2}, {1024, 1024, 1}};
  for (const auto& r : rows) {
    if (r[2] == 2) res /= 2;
    t.macs += 1LL * res * res * 9 * r[0];
    t.params += 9LL * r[0];
    t.macs += 1LL * res * res * r[0] * r[1];
    t.params += 1LL * r[0] * r[1];
  }
  t.macs += 1024LL * classes;
  t.params += 1024LL * classes + classes;
  return t;
}

ArchitectureSpec tiny_spec() {
  ArchitectureSpec s;
  s.input_resolution = 5;
  s.num_classes = 3;
  s.layers = {{LayerKind::StandardConv, 1, 3, 3, 3, 2},
              {LayerKind::DepthwiseConv, 2, 3, 3, 2, 2},
              {LayerKind::PointwiseConv, 1, 1, 1, 2, 4},
              {LayerKind::GlobalAvgPool, 1, 1, 1, 4, 4},
              {LayerKind::FullyConnected, 1, 1, 1, 4, 3},
              {LayerKind::Softmax, 1, 1, 1, 3, 3}};
  return s;
}

}  // namespace

TEST(Architecture, StemAndHeadShapes) {
  const auto spec = build_architecture(1.0, 224, 431);
  const auto& stem = spec.layers.front();
  EXPECT_EQ(stem.kind, LayerKind::StandardConv);
  EXPECT_EQ(stem.stride, 2);
  EXPECT_EQ(stem.kh * stem.kw * stem.in_channels * stem.out_channels, 3 * 3 * 3 * 32);
  EXPECT_EQ(spec.input_shape(), (TensorShape{224, 224, 3}));
  const auto& fc = spec.layers[spec.layers.size() - 2];
  EXPECT_EQ(fc.kind, LayerKind::FullyConnected);
  EXPECT_EQ(fc.in_channels, 1024);
  EXPECT_EQ(fc.out_channels, 431);
  EXPECT_EQ(spec.layers.back().kind, LayerKind::Softmax);
}

TEST(Architecture, HalfWidthHalvesChannelPlan) {
  const auto full = build_architecture(1.0, 224, 10);
  const auto half = build_architecture(0.5, 224, 10);
  ASSERT_EQ(full.layers.size(), half.layers.size());
  for (std::size_t i = 0; i + 2 < full.layers.size(); ++i) {
    EXPECT_EQ(half.layers[i].out_channels * 2, full.layers[i].out_channels) << i;
  }
  EXPECT_EQ(half.layers[0].out_channels, 16);
  EXPECT_EQ(half.layers[2].out_channels, 32);
  EXPECT_EQ(half.layers[4].out_channels, 64);
}

TEST(Architecture, RejectsBadParameters) {
  auto code = [](auto fn) {
    try {
      fn();
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Corrupt;
  };
  EXPECT_EQ(code([] { build_architecture(0.0, 224, 10); }), Errc::BadAlpha);
  EXPECT_EQ(code([] { build_architecture(1.5, 224, 10); }), Errc::BadAlpha);
  EXPECT_EQ(code([] { build_architecture(1.0, 200, 10); }), Errc::BadResolution);
  EXPECT_EQ(code([] { build_architecture(1.0, 224, 1); }), Errc::ConfigError);
}

TEST(Shapes, MatchReferenceTable) {
  const auto spec = build_architecture(1.0, 224, 431);
  const auto shapes = propagate_shapes(spec);
  ASSERT_EQ(shapes.size(), spec.layers.size() + 1);
  EXPECT_EQ(shapes[1], (TensorShape{112, 112, 32}));
  const std::size_t pool = spec.layers.size() - 3;
  EXPECT_EQ(spec.layers[pool].kind, LayerKind::GlobalAvgPool);
  EXPECT_EQ(shapes[pool], (TensorShape{7, 7, 1024}));
  EXPECT_EQ(shapes.back(), (TensorShape{1, 1, 431}));

  const auto s160 = build_architecture(1.0, 160, 10);
  EXPECT_EQ(propagate_shapes(s160)[s160.layers.size() - 3], (TensorShape{5, 5, 1024}));
}

TEST(Shapes, DetectIncompatibleLayers) {
  auto spec = tiny_spec();
  spec.layers[2].in_channels = 3;
  EXPECT_THROW(propagate_shapes(spec), Error);
  spec = tiny_spec();
  spec.layers.pop_back();
  EXPECT_THROW(propagate_shapes(spec), Error);
}

TEST(Counts, MultAddsNearPublishedFigure) {
  const double macs = static_cast<double>(count_mult_adds(build_architecture(1.0, 224, 1000)));
  EXPECT_NEAR(macs / 569e6, 1.0, 0.02);
}

TEST(Counts, EqualHandTally) {
  for (int classes : {431, 1000}) {
    const auto spec = build_architecture(1.0, 224, classes);
    const auto t = tally_reference(classes);
    EXPECT_EQ(count_mult_adds(spec), t.macs) << classes;
    EXPECT_EQ(count_params(spec), t.params) << classes;
  }
}

TEST(Counts, HalvingResolutionQuartersConvWork) {
  auto big = build_architecture(1.0, 224, 10);
  big.input_resolution = 448;  // outside the supported set, fine for counting
  const auto small = build_architecture(1.0, 224, 10);
  const auto a = layer_mult_adds(big);
  const auto b = layer_mult_adds(small);
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto kind = small.layers[i].kind;
    if (kind == LayerKind::StandardConv || kind == LayerKind::DepthwiseConv || kind == LayerKind::PointwiseConv) {
      EXPECT_EQ(a[i], 4 * b[i]) << i;
    }
  }
  EXPECT_EQ(count_params(big), count_params(small));
}

TEST(Forward, DeltaDepthwiseAndIdentityPointwise) {
  SplitMix64 rng(1);
  const auto t = random_tensor(6, 5, 3, rng);
  std::vector<double> delta(9 * 3, 0.0);
  for (int c = 0; c < 3; ++c) delta[(1 * 3 + 1) * 3 + c] = 1.0;
  EXPECT_EQ(max_abs_diff(depthwise_forward(t, delta, 3, 3, 1), t), 0.0);
  std::vector<double> eye(9, 0.0);
  for (int c = 0; c < 3; ++c) eye[c * 3 + c] = 1.0;
  EXPECT_EQ(max_abs_diff(pointwise_forward(t, eye, 3), t), 0.0);
}

TEST(Forward, ConvolutionsMatchNaiveOracle) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 120; ++trial) {
    const int h = 1 + rng.uniform_int(0, 15);
    const int w = 1 + rng.uniform_int(0, 15);
    const int c = 1 + rng.uniform_int(0, 7);
    const int cout = 1 + rng.uniform_int(0, 7);
    const int stride = 1 + rng.uniform_int(0, 1);
    const int k = rng.uniform_int(0, 1) ? 3 : 1;
    const auto t = random_tensor(h, w, c, rng);

    const auto wd = random_vec(static_cast<std::size_t>(k * k * c), rng);
    EXPECT_LE(max_abs_diff(depthwise_forward(t, wd, k, k, stride), naive_conv(t, wd, {}, k, k, c, stride, true)), 1e-6);

    const auto wp = random_vec(static_cast<std::size_t>(c * cout), rng);
    EXPECT_LE(max_abs_diff(pointwise_forward(t, wp, cout), naive_conv(t, wp, {}, 1, 1, cout, 1, false)), 1e-6);

    const auto ws = random_vec(static_cast<std::size_t>(k * k * c * cout), rng);
    const auto bs = random_vec(static_cast<std::size_t>(cout), rng);
    EXPECT_LE(max_abs_diff(standard_conv_forward(t, ws, bs, k, k, cout, stride), naive_conv(t, ws, bs, k, k, cout, stride, false)),
              1e-6);
  }
}

TEST(Forward, ZeroWeightsGiveUniformProbabilities) {
  const auto spec = tiny_spec();
  SplitMix64 rng(3);
  const auto pred = forward(spec, zero_weights(spec), vigil::testing::random_frame(5, 5, rng));
  for (double p : pred.probabilities) EXPECT_NEAR(p, 1.0 / 3.0, 1e-12);
}

TEST(Forward, SoftmaxSumsToOneAndIsShiftInvariant) {
  SplitMix64 rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    auto z = random_vec(2 + rng.uniform(20), rng);
    for (auto& v : z) v *= 30;
    const auto p = softmax(z);
    EXPECT_NEAR(std::accumulate(p.begin(), p.end(), 0.0), 1.0, 1e-9);
    const double c = rng.uniform_real(-500, 500);
    auto shifted = z;
    for (auto& v : shifted) v += c;
    const auto q = softmax(shifted);
    for (std::size_t i = 0; i < p.size(); ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

TEST(Forward, TinyNetworkMatchesOracle) {
  const auto spec = tiny_spec();
  const auto weights = random_weights(spec, 5, 0.5);
  SplitMix64 rng(6);
  const Frame img = vigil::testing::random_frame(5, 5, rng);

  auto as_double = [](const std::vector<float>& v) { return std::vector<double>(v.begin(), v.end()); };
  auto relu = [](Tensor t) {
    for (auto& v : t.data) v = std::max(0.0, v);
    return t;
  };
  Tensor t(5, 5, 3);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x) {
      t.at(y, x, 0) = img.at(x, y).r / 255.0;
      t.at(y, x, 1) = img.at(x, y).g / 255.0;
      t.at(y, x, 2) = img.at(x, y).b / 255.0;
    }
  auto w0 = as_double(weights.layers[0]);
  t = relu(naive_conv(t, {w0.begin(), w0.begin() + 54}, {w0.begin() + 54, w0.end()}, 3, 3, 2, 1, false));
  t = relu(naive_conv(t, as_double(weights.layers[1]), {}, 3, 3, 2, 2, true));
  t = relu(naive_conv(t, as_double(weights.layers[2]), {}, 1, 1, 4, 1, false));
  std::vector<double> pooled(4, 0.0);
  for (int y = 0; y < t.height; ++y)
    for (int x = 0; x < t.width; ++x)
      for (int c = 0; c < 4; ++c) pooled[c] += t.at(y, x, c) / (t.height * t.width);
  const auto fc = as_double(weights.layers[4]);
  std::vector<double> logits(fc.begin() + 12, fc.end());
  for (int ci = 0; ci < 4; ++ci)
    for (int co = 0; co < 3; ++co) logits[co] += pooled[ci] * fc[ci * 3 + co];

  const auto got = forward_logits(spec, weights, img);
  ASSERT_EQ(got.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(got[i], logits[i], 1e-6);
  const auto p = forward(spec, weights, img);
  const auto want = softmax(logits);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.probability_of(i), want[i], 1e-9);
}

TEST(Forward, RejectsWrongInputSize) {
  const auto spec = tiny_spec();
  try {
    forward(spec, zero_weights(spec), Frame(6, 5));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::BadInputSize);
  }
  EXPECT_NO_THROW(classify(spec, zero_weights(spec), Frame(17, 9)));
}

TEST(TopK, BasicCases) {
  const std::vector<double> p{0.1, 0.7, 0.2};
  const auto pred = make_prediction(p);
  EXPECT_EQ(top_k(pred, 1), (std::vector<int>{1}));
  auto all = top_k(pred, 3);
  std::sort(all.begin(), all.end());
  EXPECT_EQ(all, (std::vector<int>{0, 1, 2}));
  EXPECT_THROW(top_k(pred, 0), Error);
  EXPECT_THROW(top_k(pred, 4), Error);
}

TEST(TopK, TopOneIsPrefixOfTopFive) {
  SplitMix64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pred = make_prediction(softmax(random_vec(5 + rng.uniform(20), rng)));
    const auto t1 = top_k(pred, 1);
    const auto t5 = top_k(pred, 5);
    EXPECT_EQ(t1[0], t5[0]);
    EXPECT_TRUE(std::is_sorted(pred.probabilities.rbegin(), pred.probabilities.rend()));
  }
}

TEST(TopK, TiesGoToLowerIndex) {
  const auto pred = make_prediction(std::vector<double>{0.25, 0.25, 0.25, 0.25});
  EXPECT_EQ(pred.class_ranks, (std::vector<int>{0, 1, 2, 3}));
}

TEST(Evaluate, AlwaysRightClassifierScoresOne) {
  auto spec = tiny_spec();
  auto w = zero_weights(spec);
  w.layers[4][12] = 5.0f;  // class 0 bias
  std::vector<LabeledImage> set;
  SplitMix64 rng(8);
  for (int i = 0; i < 10; ++i) set.push_back({vigil::testing::random_frame(5, 5, rng), 0});
  const auto r = evaluate_topk(spec, w, set);
  EXPECT_DOUBLE_EQ(r.top1, 1.0);
  EXPECT_DOUBLE_EQ(r.top5, 1.0);
  EXPECT_EQ(r.samples, 10u);
  EXPECT_THROW(evaluate_topk(spec, w, std::vector<LabeledImage>{}), Error);
}

TEST(Evaluate, TopFiveNeverBelowTopOne) {
  auto spec = tiny_spec();
  spec.num_classes = 8;
  spec.layers[4].out_channels = 8;
  spec.layers[5].in_channels = spec.layers[5].out_channels = 8;
  SplitMix64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto w = random_weights(spec, rng.next(), 1.0);
    std::vector<LabeledImage> set;
    for (int i = 0; i < 20; ++i) set.push_back({vigil::testing::random_frame(5, 5, rng), rng.uniform_int(0, 7)});
    const auto r = evaluate_topk(spec, w, set);
    EXPECT_GE(r.top5, r.top1);
  }
}

TEST(Evaluate, SanityModelBeatsChance) {
  const auto m = corpus::sanity_model();
  const auto r = evaluate_topk(m.spec, m.weights, corpus::texture_set(25, 1234));
  EXPECT_GT(r.top1, 0.25);
}

TEST(Weights, SaveLoadRoundTrip) {
  vigil::testing::TempDir dir;
  const auto spec = build_architecture(0.25, 128, 12);
  const auto w = random_weights(spec, 11);
  save_weights(dir / "m.vmmr", spec, w);
  const auto loaded = load_weights(dir / "m.vmmr");
  EXPECT_EQ(loaded.spec, spec);
  EXPECT_EQ(loaded.weights, w);
  EXPECT_EQ(load_weights(dir / "m.vmmr", spec), w);
}

TEST(Weights, DifferentWidthIsFingerprintMismatch) {
  vigil::testing::TempDir dir;
  const auto spec = build_architecture(0.25, 128, 12);
  save_weights(dir / "m.vmmr", spec, zero_weights(spec));
  try {
    load_weights(dir / "m.vmmr", build_architecture(0.5, 128, 12));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::FingerprintMismatch);
  }
}

TEST(Weights, TruncatedFileIsCorrupt) {
  vigil::testing::TempDir dir;
  const auto spec = tiny_spec();
  save_weights(dir / "m.vmmr", spec, random_weights(spec, 1));
  auto bytes = read_file(dir / "m.vmmr");
  bytes.resize(bytes.size() - 7);
  write_file(dir / "t.vmmr", bytes);
  try {
    load_weights(dir / "t.vmmr");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Corrupt);
  }
}
