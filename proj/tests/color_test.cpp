#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "support.hpp"
#include "vigil/color.hpp"

using namespace vigil;

namespace {

std::vector<PixelPoint> random_points(std::size_t n, SplitMix64& rng) {
  std::vector<PixelPoint> pts(n);
  for (auto& p : pts) p = {rng.uniform_real(0, 255), rng.uniform_real(0, 255), rng.uniform_real(0, 255)};
  return pts;
}

double brute_objective(const std::vector<PixelPoint>& pts, const std::vector<PixelPoint>& centroids) {
  double j = 0;
  for (const auto& p : pts) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& c : centroids) best = std::min(best, squared_distance(p, c));
    j += best;
  }
  return j;
}

}  // namespace

TEST(KMeans, SingleClusterIsTheMean) {
  SplitMix64 rng(1);
  const auto pts = random_points(37, rng);
  const auto m = kmeans(pts, {1, 3, 50, 0.0});
  ASSERT_EQ(m.centroids.size(), 1u);
  PixelPoint mean;
  for (const auto& p : pts) {
    mean.r += p.r;
    mean.g += p.g;
    mean.b += p.b;
  }
  mean.r /= pts.size();
  mean.g /= pts.size();
  mean.b /= pts.size();
  EXPECT_NEAR(m.centroids[0].r, mean.r, 1e-9);
  EXPECT_NEAR(m.centroids[0].g, mean.g, 1e-9);
  EXPECT_NEAR(m.centroids[0].b, mean.b, 1e-9);
  double j = 0;
  for (const auto& p : pts) j += squared_distance(p, mean);
  EXPECT_NEAR(m.objective, j, 1e-6);
  EXPECT_EQ(m.populations[0], pts.size());
}

TEST(KMeans, TwoBlobsAreRecoveredExactly) {
  std::vector<PixelPoint> pts(10, PixelPoint{0, 0, 0});
  pts.insert(pts.end(), 10, PixelPoint{255, 255, 255});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = sort_by_dominance(kmeans(pts, {2, seed, 50, 0.0}));
    EXPECT_EQ(m.populations, (std::vector<std::size_t>{10, 10}));
    EXPECT_DOUBLE_EQ(m.objective, 0.0);
    std::vector<PixelPoint> c = m.centroids;
    std::sort(c.begin(), c.end(), [](auto& a, auto& b) { return a.r < b.r; });
    EXPECT_EQ(c[0], (PixelPoint{0, 0, 0}));
    EXPECT_EQ(c[1], (PixelPoint{255, 255, 255}));
  }
}

TEST(KMeans, ErrorsOnEmptyInputAndTooLargeK) {
  try {
    kmeans({}, {1, 0, 10, 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
  std::vector<PixelPoint> pts(3);
  try {
    kmeans(pts, {4, 0, 10, 0.5});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::KTooLarge);
  }
}

TEST(KMeans, InvariantsOnRandomInstances) {
  SplitMix64 rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const auto pts = random_points(20 + rng.uniform(80), rng);
    const std::size_t k = 1 + rng.uniform(5);
    const auto m = kmeans(pts, {k, rng.next(), 50, 0.0});
    EXPECT_EQ(m.centroids.size(), k);
    EXPECT_EQ(std::accumulate(m.populations.begin(), m.populations.end(), std::size_t{0}), pts.size());
    EXPECT_GE(m.objective, 0.0);
    for (std::size_t i = 1; i < m.objective_trace.size(); ++i)
      EXPECT_LE(m.objective_trace[i], m.objective_trace[i - 1] + 1e-9) << "trial " << trial << " step " << i;
    EXPECT_NEAR(m.objective, kmeans_objective(pts, m), 1e-6);
  }
}

TEST(KMeans, AssignmentMatchesExhaustiveScan) {
  SplitMix64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const auto pts = random_points(50, rng);
    const auto cents = random_points(1 + rng.uniform(6), rng);
    const auto a = assign_points(pts, cents);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      std::size_t best = 0;
      for (std::size_t c = 1; c < cents.size(); ++c)
        if (squared_distance(pts[i], cents[c]) < squared_distance(pts[i], cents[best])) best = c;
      EXPECT_EQ(a[i], best);
    }
  }
}

TEST(Objective, HandArithmeticAndOracle) {
  const std::vector<PixelPoint> pts{{0, 0, 0}, {2, 2, 2}};
  ClusterModel m;
  m.k = 1;
  m.centroids = {{1, 1, 1}};
  m.populations = {2};
  EXPECT_DOUBLE_EQ(kmeans_objective(pts, m), 6.0);
  m.centroids = {{0, 0, 0}, {2, 2, 2}};
  m.populations = {1, 1};
  m.k = 2;
  EXPECT_DOUBLE_EQ(kmeans_objective(pts, m), 0.0);

  SplitMix64 rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = random_points(40, rng);
    ClusterModel r;
    r.centroids = random_points(3, rng);
    r.k = 3;
    r.populations.assign(3, 0);
    EXPECT_NEAR(kmeans_objective(p, r), brute_objective(p, r.centroids), 1e-6);
  }
}

TEST(Dominance, SortsByPopulationAndPreservesPairs) {
  ClusterModel m;
  m.k = 3;
  m.centroids = {{1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
  m.populations = {5, 10, 3};
  const auto s = sort_by_dominance(m);
  EXPECT_EQ(s.populations, (std::vector<std::size_t>{10, 5, 3}));
  EXPECT_EQ(s.centroids, (std::vector<PixelPoint>{{2, 2, 2}, {1, 1, 1}, {3, 3, 3}}));
  const auto again = sort_by_dominance(s);
  EXPECT_EQ(again.populations, s.populations);
  EXPECT_EQ(again.centroids, s.centroids);
}

TEST(NameColor, AnchorsNearestAndTies) {
  EXPECT_EQ(name_color({255, 255, 255}), ColorName::White);
  EXPECT_EQ(name_color({180, 20, 20}), ColorName::Red);
  // (64,0,0) is equidistant from black and maroon; the lower index wins.
  EXPECT_EQ(name_color({64, 0, 0}), ColorName::Black);
  for (const auto& e : kPalette) EXPECT_EQ(name_color(to_point(e.anchor)), e.name);
}

TEST(NameColor, ParsesLabelsCaseInsensitively) {
  EXPECT_EQ(parse_color_name("Silver"), ColorName::Silver);
  EXPECT_EQ(parse_color_name("CYAN"), ColorName::Cyan);
  EXPECT_FALSE(parse_color_name("teal"));
}

TEST(VehicleColor, UniformCrop) {
  const auto v = classify_vehicle_color(Frame(40, 30, Rgb{220, 20, 20}));
  EXPECT_EQ(v.name, ColorName::Red);
  EXPECT_DOUBLE_EQ(v.fraction, 1.0);
}

TEST(VehicleColor, SingleClusterWinsWithSeventyPercent) {
  // Central 60x60 window: 18 black columns (30%), 42 blue columns (70%).
  Frame crop(100, 100, Rgb{20, 40, 200});
  for (int y = 0; y < 100; ++y)
    for (int x = 0; x < 38; ++x) crop.at(x, y) = {0, 0, 0};
  const auto v = classify_vehicle_color(crop);
  EXPECT_EQ(v.name, ColorName::Blue);
  EXPECT_NEAR(v.fraction, 0.7, 0.05);
}

TEST(VehicleColor, OnePixelCrop) {
  const auto v = classify_vehicle_color(Frame(1, 1, Rgb{0, 160, 0}));
  EXPECT_EQ(v.name, ColorName::Green);
  EXPECT_DOUBLE_EQ(v.fraction, 1.0);
}

TEST(VehicleColor, CorpusScenesMatchGroundTruth) {
  const auto& m = vigil::testing::shared_corpus();
  int checked = 0;
  for (const auto& r : m.records) {
    if (!r.color || r.boxes.empty()) continue;
    const Frame img = load_frame(m.resolve(r.image));
    EXPECT_EQ(classify_vehicle_color(crop(img, r.boxes[0])).name, *r.color) << r.image;
    ++checked;
  }
  EXPECT_GT(checked, 20);
}
