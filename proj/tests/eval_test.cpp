#include <gtest/gtest.h>

#include <numeric>

#include "support.hpp"
#include "vigil/corpus.hpp"
#include "vigil/eval.hpp"

using namespace vigil;

namespace {

ModuleReport row(std::string name, double a, double p, double r, double f, double s, double t) {
  ModuleReport m;
  m.name = std::move(name);
  m.accuracy = a;
  m.precision = p;
  m.recall = r;
  m.f1 = f;
  m.specificity = s;
  m.avg_time_s = t;
  return m;
}

std::vector<ModuleReport> published_rows() {
  return {row("Vehicle Detection", 0.95225, 0.962187, 0.9415, 0.951731, 0.963, 0.062),
          row("License Plate Detection", 0.843, 0.866453, 0.811, 0.83781, 0.875, 0.048),
          row("Optical Character Recognition", 0.958654, 0.951923, 0.964912, 0.958374, 0.952562, 0.034),
          row("Colour Classification", 0.866, 0.932, 0.823322, 0.874296, 0.921659, 0.023)};
}

}  // namespace

TEST(Metrics, PerfectClassifier) {
  const auto r = metrics_from_counts({10, 0, 0, 10});
  for (auto m : {r.accuracy, r.precision, r.recall, r.f1, r.specificity}) EXPECT_DOUBLE_EQ(*m, 1.0);
}

TEST(Metrics, DirectArithmetic) {
  const auto r = metrics_from_counts({50, 10, 10, 30});
  EXPECT_DOUBLE_EQ(*r.accuracy, 0.8);
  EXPECT_NEAR(*r.precision, 50.0 / 60, 1e-12);
  EXPECT_NEAR(*r.recall, 50.0 / 60, 1e-12);
  EXPECT_NEAR(*r.f1, 50.0 / 60, 1e-12);
  EXPECT_DOUBLE_EQ(*r.specificity, 0.75);
}

TEST(Metrics, ZeroDenominatorIsUndefined) {
  const auto r = metrics_from_counts({0, 0, 5, 5});
  EXPECT_FALSE(r.precision);
  EXPECT_FALSE(r.f1);
  EXPECT_DOUBLE_EQ(*r.recall, 0.0);
  EXPECT_DOUBLE_EQ(*r.accuracy, 0.5);
  EXPECT_THROW(metrics_from_counts({}), Error);
}

TEST(Metrics, F1LiesBetweenPrecisionAndRecall) {
  SplitMix64 rng(31);
  for (int i = 0; i < 200; ++i) {
    const ConfusionCounts c{rng.uniform_int(1, 50), rng.uniform_int(0, 50), rng.uniform_int(0, 50), rng.uniform_int(0, 50)};
    const auto r = metrics_from_counts(c);
    EXPECT_LE(*r.f1, std::max(*r.precision, *r.recall) + 1e-12);
    EXPECT_GE(*r.f1, std::min(*r.precision, *r.recall) - 1e-12);
    EXPECT_NEAR(*r.f1, 2 * *r.precision * *r.recall / (*r.precision + *r.recall), 1e-9);
    EXPECT_GE(*r.accuracy, 0.0);
    EXPECT_LE(*r.accuracy, 1.0);
  }
}

TEST(Aggregate, ReproducesPublishedOverallRow) {
  const auto o = aggregate_overall(published_rows()).overall;
  EXPECT_NEAR(*o.accuracy, 0.904976, 1e-6);
  EXPECT_NEAR(*o.precision, 0.928141, 1e-6);
  EXPECT_NEAR(*o.recall, 0.885183, 1e-6);
  EXPECT_NEAR(*o.f1, 0.905553, 1e-6);
  EXPECT_NEAR(*o.specificity, 0.928055, 1e-6);
  EXPECT_NEAR(o.avg_time_s, 0.167, 1e-12);
}

TEST(Aggregate, SingleRowIsItsOwnOverall) {
  const auto r = published_rows()[1];
  const auto o = aggregate_overall({r}).overall;
  EXPECT_DOUBLE_EQ(*o.accuracy, *r.accuracy);
  EXPECT_DOUBLE_EQ(*o.specificity, *r.specificity);
  EXPECT_DOUBLE_EQ(o.avg_time_s, r.avg_time_s);
}

TEST(Aggregate, UndefinedValuesAreExcludedAndEmptyFails) {
  auto rows = published_rows();
  rows[0].precision.reset();
  const auto o = aggregate_overall(rows).overall;
  EXPECT_NEAR(*o.precision, (0.866453 + 0.951923 + 0.932) / 3, 1e-12);
  try {
    aggregate_overall({});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyRows);
  }
}

TEST(Aggregate, TableAndJsonCarryEveryRow) {
  const auto rep = aggregate_overall(published_rows());
  const auto text = render_table(rep);
  for (const auto& r : rep.rows) EXPECT_NE(text.find(r.name), std::string::npos);
  EXPECT_NE(text.find("Overall"), std::string::npos);
  const auto j = to_json(rep);
  EXPECT_EQ(j["rows"].size(), 4u);
}

TEST(MacroAverage, MeansDefinedPerClassValues) {
  const std::vector<ConfusionCounts> per{{5, 0, 0, 5}, {0, 0, 0, 0}, {1, 1, 1, 7}};
  const auto m = macro_average(per);
  EXPECT_DOUBLE_EQ(*m.accuracy, (1.0 + 0.8) / 2);
  EXPECT_DOUBLE_EQ(*m.precision, (1.0 + 0.5) / 2);
}

TEST(Detections, GreedyOneToOneMatching) {
  const std::vector<Rect> truth{{0, 0, 10, 10}, {50, 50, 10, 10}};
  const auto c = match_detections({{0, 0, 10, 10}, {1, 0, 10, 10}, {200, 200, 5, 5}}, truth, 0.5);
  EXPECT_EQ(c, (ConfusionCounts{1, 2, 1, 0}));
  EXPECT_EQ(match_detections({}, {}, 0.5), (ConfusionCounts{0, 0, 0, 1}));
}

TEST(Characters, PositionalCounts) {
  std::vector<ConfusionCounts> per(kCharset.size());
  long long obs = 0;
  count_characters("AB1", "AB7", per, obs);
  EXPECT_EQ(obs, 3);
  EXPECT_EQ(per[kCharset.find('A')].tp, 1);
  EXPECT_EQ(per[kCharset.find('1')].fn, 1);
  EXPECT_EQ(per[kCharset.find('7')].fp, 1);
  count_characters("AB", "", per, obs);
  EXPECT_EQ(obs, 5);
  EXPECT_EQ(per[kCharset.find('A')].fn, 1);
}

TEST(Manifest, RoundTripsThroughText) {
  vigil::testing::TempDir dir("vigil-manifest");
  Manifest m;
  m.background = "bg.ppm";
  ManifestRecord a;
  a.image = "a.ppm";
  a.boxes = {{1, 2, 3, 4}, {5, 6, 7, 8}};
  a.plate_text = "KA01MH9999";
  a.color = ColorName::Maroon;
  a.plate_type = plate::PlateType::Commercial;
  a.corners = std::array<plate::Point2, 4>{{{1.5, 2}, {10, 2}, {10, 5.25}, {1.5, 5.25}}};
  a.tag = "clean";
  ManifestRecord b;
  b.image = "b.ppm";
  m.records = {a, b};
  save_manifest(dir / "m.tsv", m);
  const auto back = load_manifest(dir / "m.tsv");
  EXPECT_EQ(back.base_dir, dir.path());
  EXPECT_EQ(back.background, m.background);
  ASSERT_EQ(back.records.size(), 2u);
  EXPECT_EQ(format_manifest_line(back.records[0]), format_manifest_line(a));
  EXPECT_EQ(format_manifest_line(back.records[1]), format_manifest_line(b));
  EXPECT_EQ(back.records[1].tag, "");
  EXPECT_DOUBLE_EQ((*back.records[0].corners)[2].y, 5.25);
}

TEST(Manifest, MissingFileAndBadLines) {
  EXPECT_THROW(load_manifest("/nonexistent/manifest.tsv"), Error);
  EXPECT_THROW(parse_manifest_line("a.ppm\t-\t-"), Error);
  EXPECT_THROW(parse_manifest_line("a.ppm\t-\t-\tteal\t-\t-"), Error);
}

TEST(Benchmark, EmptyManifestFails) {
  try {
    run_benchmark(Manifest{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::CorpusEmpty);
  }
}

TEST(Benchmark, MissingImageFails) {
  Manifest m;
  ManifestRecord r;
  r.image = "/nonexistent.ppm";
  m.records.push_back(r);
  try {
    run_benchmark(m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::ManifestMissing);
  }
}

TEST(Benchmark, NoiseFreeScenesScorePerfectly) {
  vigil::testing::TempDir dir("vigil-closed");
  const Frame bg = corpus::render_background();
  save_frame(dir / "bg.ppm", bg);
  corpus::SceneOptions opt;
  opt.clean_sigma = 0;
  Manifest m;
  m.base_dir = dir.path();
  m.background = "bg.ppm";
  for (int i = 0; i < 6; ++i) {
    const auto s = corpus::render_scene(bg, corpus::SceneKind::Clean, 100 + i, opt);
    const std::string name = "s" + std::to_string(i) + ".ppm";
    save_frame(dir / name, s.image);
    m.records.push_back({name, {*s.vehicle_box}, s.plate_text, s.color, s.plate_type, s.corners, "clean"});
  }
  const auto res = run_benchmark(m);
  for (const auto& r : res.report.rows) EXPECT_DOUBLE_EQ(*r.accuracy, 1.0) << r.name;
  EXPECT_EQ(res.exact_reads, 6);
  EXPECT_DOUBLE_EQ(res.localization_rate(), 1.0);
}

TEST(Benchmark, TotalsMatchRecountOfItems) {
  const auto& m = vigil::testing::shared_corpus();
  const auto res = run_benchmark(m);
  ASSERT_EQ(res.items.size(), m.records.size());
  ConfusionCounts det;
  long long expected = 0, hits = 0, exact = 0, chars = 0, correct = 0, color_hits = 0, color_total = 0;
  for (std::size_t i = 0; i < m.records.size(); ++i) {
    const auto& rec = m.records[i];
    const auto& it = res.items[i];
    det.tp += it.det_tp;
    det.fp += it.det_fp;
    det.fn += it.det_fn;
    if (rec.boxes.empty() && it.proposals.empty()) ++det.tn;
    if (rec.corners) {
      ++expected;
      hits += it.quad && corners_within(*it.quad, *rec.corners, 2.0);
    }
    if (rec.plate_text) {
      exact += it.read_text == rec.plate_text;
      chars += static_cast<long long>(rec.plate_text->size());
      if (it.read_text && it.read_text->size() == rec.plate_text->size())
        for (std::size_t k = 0; k < rec.plate_text->size(); ++k) correct += (*it.read_text)[k] == (*rec.plate_text)[k];
    }
    if (rec.color && !rec.boxes.empty()) {
      ++color_total;
      color_hits += it.color_pred == rec.color;
    }
  }
  EXPECT_EQ(res.detection, det);
  EXPECT_EQ(res.plates_expected, expected);
  EXPECT_EQ(res.plates_hit, hits);
  EXPECT_EQ(res.exact_reads, exact);
  EXPECT_EQ(res.chars_total, chars);
  EXPECT_EQ(res.chars_correct, correct);
  long long tp = 0;
  for (const auto& c : res.color_per_class) tp += c.tp;
  EXPECT_EQ(tp, color_hits);
  EXPECT_EQ(res.report.rows.size(), 4u);
  EXPECT_GE(res.localization_rate(), 0.95);
}
