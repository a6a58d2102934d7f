#include <gtest/gtest.h>

#include <fstream>

#include "support.hpp"
#include "vigil/registry.hpp"

using namespace vigil;
using vigil::testing::TempDir;

namespace {

Sighting sighting(std::string id, std::string cam, std::int64_t ts, Attributes a) {
  Sighting s;
  s.id = std::move(id);
  s.camera_id = std::move(cam);
  s.timestamp_ms = ts;
  s.location = {s.camera_id, std::nullopt, std::nullopt};
  s.attrs = std::move(a);
  return s;
}

WatchlistEntry entry(Attributes target, std::string id = {}) {
  WatchlistEntry e;
  e.id = std::move(id);
  e.description = "test";
  e.target = std::move(target);
  return e;
}

Attributes full_attrs() { return {"Maruti", "Swift", ColorName::Red, "KA01MH9999", PlateType::Private}; }

const std::vector<std::string> kMakes{"Maruti", "Honda", "Tata"};
const std::vector<std::string> kModels{"Swift", "City", "Nexon", "Alto"};
const std::vector<std::string> kCams{"cam-1", "cam-2", "cam-3", "cam-4"};

Sighting random_sighting(SplitMix64& rng, std::int64_t ts) {
  Attributes a;
  if (rng.uniform(1)) a.make = kMakes[rng.uniform(2)];
  if (rng.uniform(1)) a.model = kModels[rng.uniform(3)];
  if (rng.uniform(1)) a.color = kPalette[rng.uniform(3)].name;
  if (rng.uniform(1)) a.plate_type = static_cast<PlateType>(rng.uniform(2));
  if (rng.uniform(1) || a.empty()) {
    std::string p = "KA0";
    p += static_cast<char>('0' + rng.uniform(9));
    p += "MH";
    for (int i = 0; i < 4; ++i) p += static_cast<char>('0' + rng.uniform(9));
    a.plate_text = p;
  }
  Sighting s = sighting({}, kCams[rng.uniform(3)], ts, a);
  s.confidences["color"] = rng.uniform_real();
  return s;
}

SightingFilter random_filter(SplitMix64& rng, std::int64_t t0, std::int64_t t1) {
  SightingFilter f;
  if (rng.uniform(2) == 0) f.from_ms = rng.uniform_int(t0, t1);
  if (rng.uniform(2) == 0) f.to_ms = rng.uniform_int(t0, t1);
  if (rng.uniform(2) == 0) f.cameras = {kCams[rng.uniform(3)], kCams[rng.uniform(3)]};
  if (rng.uniform(3) == 0) f.make = kMakes[rng.uniform(2)];
  if (rng.uniform(3) == 0) f.model = kModels[rng.uniform(3)];
  if (rng.uniform(3) == 0) f.color = kPalette[rng.uniform(3)].name;
  if (rng.uniform(3) == 0) f.plate_type = static_cast<PlateType>(rng.uniform(2));
  if (rng.uniform(3) == 0) f.plate_like = "mh" + std::to_string(rng.uniform(9));
  return f;
}

// Written independently of filter_accepts: field-by-field, no helpers.
bool oracle_accepts(const SightingFilter& f, const Sighting& s) {
  if (f.from_ms && s.timestamp_ms < *f.from_ms) return false;
  if (f.to_ms && s.timestamp_ms > *f.to_ms) return false;
  if (!f.cameras.empty()) {
    bool any = false;
    for (const auto& c : f.cameras) any = any || c == s.camera_id;
    if (!any) return false;
  }
  if (f.make && (!s.attrs.make || fold_case(*s.attrs.make) != fold_case(*f.make))) return false;
  if (f.model && (!s.attrs.model || fold_case(*s.attrs.model) != fold_case(*f.model))) return false;
  if (f.color && (!s.attrs.color || *s.attrs.color != *f.color)) return false;
  if (f.plate_type && (!s.attrs.plate_type || *s.attrs.plate_type != *f.plate_type)) return false;
  if (f.plate_like) {
    if (!s.attrs.plate_text) return false;
    if (fold_case(*s.attrs.plate_text).find(fold_case(*f.plate_like)) == std::string::npos) return false;
  }
  return true;
}

std::vector<std::string> ids(const std::vector<Sighting>& v) {
  std::vector<std::string> out;
  for (const auto& s : v) out.push_back(s.id);
  return out;
}

}  // namespace

TEST(Record, SingleAttributeIsAccepted) {
  TempDir dir("vigil-reg");
  Registry reg(dir.path());
  Attributes a;
  a.color = ColorName::Blue;
  const auto id = reg.record_sighting(sighting({}, "cam-1", 1000, a));
  EXPECT_EQ(reg.get_sighting(id)->attrs.color, ColorName::Blue);
}

TEST(Record, RejectsEmptyDuplicateAndBadTimestamp) {
  TempDir dir("vigil-reg");
  Registry reg(dir.path());
  EXPECT_THROW(reg.record_sighting(sighting({}, "cam-1", 1000, {})), Error);
  reg.record_sighting(sighting("x", "cam-1", 1000, full_attrs()));
  try {
    reg.record_sighting(sighting("x", "cam-1", 2000, full_attrs()));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::DuplicateId);
  }
  EXPECT_THROW(reg.record_sighting(sighting({}, "cam-1", 0, full_attrs())), Error);
}

TEST(Record, ReopenReturnsIdenticalRecords) {
  TempDir dir("vigil-reg");
  SplitMix64 rng(41);
  std::vector<Sighting> written;
  {
    Registry reg(dir.path());
    for (int i = 0; i < 100; ++i) {
      auto s = random_sighting(rng, 1'000'000 + i * 500);
      s.id = reg.record_sighting(s);
      written.push_back(s);
    }
    reg.add_entry(entry(full_attrs(), "wl-a"));
    reg.flush();
  }
  Registry again(dir.path());
  EXPECT_EQ(again.recovery().sightings_loaded, 100u);
  EXPECT_EQ(again.recovery().torn_records_dropped, 0u);
  EXPECT_EQ(again.query(), written);
  EXPECT_EQ(again.get_entry("wl-a")->target, full_attrs());
  // Fresh ids continue past the reloaded ones.
  const auto next = again.record_sighting(random_sighting(rng, 5));
  const auto old = ids(written);
  EXPECT_EQ(std::count(old.begin(), old.end(), next), 0);
}

TEST(Record, TornFinalRecordIsDropped) {
  TempDir dir("vigil-reg");
  {
    Registry reg(dir.path());
    reg.record_sighting(sighting("a", "cam-1", 10, full_attrs()));
    reg.record_sighting(sighting("b", "cam-1", 20, full_attrs()));
  }
  {
    std::ofstream out(dir / "sightings.jsonl", std::ios::app | std::ios::binary);
    out << R"({"v":1,"id":"c","camera_id":"cam)";
  }
  Registry reg(dir.path());
  EXPECT_EQ(reg.recovery().torn_records_dropped, 1u);
  EXPECT_EQ(ids(reg.query()), (std::vector<std::string>{"a", "b"}));
  reg.record_sighting(sighting("c", "cam-1", 30, full_attrs()));
  Registry reopened(dir.path());
  EXPECT_EQ(reopened.sighting_count(), 3u);
  EXPECT_EQ(reopened.recovery().torn_records_dropped, 0u);
}

TEST(Record, CorruptMiddleRecordFailsLoudly) {
  TempDir dir("vigil-reg");
  {
    std::ofstream out(dir / "sightings.jsonl");
    out << "not json\n";
  }
  try {
    Registry reg(dir.path());
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Corrupt);
  }
}

TEST(Query, EmptyFilterAndExcludingRange) {
  TempDir dir("vigil-reg");
  Registry reg(dir.path());
  for (int i = 0; i < 5; ++i) reg.record_sighting(sighting({}, "cam-1", 100 + i, full_attrs()));
  EXPECT_EQ(reg.query().size(), 5u);
  SightingFilter f;
  f.from_ms = 1000;
  EXPECT_TRUE(reg.query(f).empty());
  f = {};
  f.from_ms = 101;
  f.to_ms = 103;
  EXPECT_EQ(reg.query(f).size(), 3u);
}

TEST(Query, ResultsAreTimeOrdered) {
  TempDir dir("vigil-reg");
  Registry reg(dir.path());
  reg.record_sighting(sighting("late", "cam-1", 300, full_attrs()));
  reg.record_sighting(sighting("early", "cam-1", 100, full_attrs()));
  reg.record_sighting(sighting("mid", "cam-1", 200, full_attrs()));
  EXPECT_EQ(ids(reg.query()), (std::vector<std::string>{"early", "mid", "late"}));
}

TEST(Query, MatchesFullScanOracleAfterReopen) {
  TempDir dir("vigil-reg");
  SplitMix64 rng(42);
  std::vector<Sighting> all;
  {
    Registry reg(dir.path());
    for (int i = 0; i < 300; ++i) {
      auto s = random_sighting(rng, 1'000 + static_cast<std::int64_t>(rng.uniform(100'000)));
      s.id = reg.record_sighting(s);
      all.push_back(s);
    }
  }
  std::stable_sort(all.begin(), all.end(), [](auto& a, auto& b) { return a.timestamp_ms < b.timestamp_ms; });
  Registry reg(dir.path());
  for (int q = 0; q < 50; ++q) {
    const auto f = random_filter(rng, 1'000, 101'000);
    std::vector<Sighting> want;
    for (const auto& s : all)
      if (oracle_accepts(f, s)) want.push_back(s);
    EXPECT_EQ(reg.query(f), want) << "query " << q;
  }
}

TEST(Match, AllAttributesEqual) {
  const auto m = score_match(sighting("s", "c", 1, full_attrs()), entry(full_attrs(), "e"));
  EXPECT_DOUBLE_EQ(m.score, 1.0);
  EXPECT_EQ(m.attributes_compared, 5);
  EXPECT_TRUE(m.matched);
}

TEST(Match, PartialAttributesWithoutPlate) {
  Attributes seen{"Maruti", "Swift", ColorName::Red, std::nullopt, std::nullopt};
  const auto m = score_match(sighting("s", "c", 1, seen), entry(full_attrs()));
  EXPECT_DOUBLE_EQ(m.score, 1.0);
  EXPECT_EQ(m.attributes_compared, 3);
  EXPECT_TRUE(m.matched);
}

TEST(Match, DifferentColourStillMatches) {
  Attributes seen = full_attrs();
  seen.color = ColorName::Blue;
  seen.plate_type.reset();
  const auto m = score_match(sighting("s", "c", 1, seen), entry(full_attrs()));
  EXPECT_NEAR(m.score, (0.45 + 0.15 + 0.20) / 0.92, 1e-12);
  EXPECT_NEAR(m.score, 0.8696, 1e-4);
  EXPECT_EQ(m.attributes_compared, 4);
  EXPECT_TRUE(m.matched);
}

TEST(Match, SingleComparedAttributeNeverMatches) {
  Attributes plate_only;
  plate_only.plate_text = "KA01MH9999";
  const auto m = score_match(sighting("s", "c", 1, full_attrs()), entry(plate_only));
  EXPECT_DOUBLE_EQ(m.score, 1.0);
  EXPECT_EQ(m.attributes_compared, 1);
  EXPECT_FALSE(m.matched);
}

TEST(Match, NearPlateEarnsPartialCredit) {
  Attributes seen = full_attrs();
  seen.plate_text = "KA01-MH 9998";
  const auto m = score_match(sighting("s", "c", 1, seen), entry(full_attrs()));
  EXPECT_NEAR(m.score, (0.45 * 0.8 + 0.55) / 1.0, 1e-12);
  seen.plate_text = "ka01mh9999";
  EXPECT_DOUBLE_EQ(score_match(sighting("s", "c", 1, seen), entry(full_attrs())).score, 1.0);
  EXPECT_EQ(edit_distance("kitten", "sitting"), 3);
}

TEST(Match, ScoreStaysInUnitInterval) {
  SplitMix64 rng(43);
  for (int i = 0; i < 300; ++i) {
    const auto s = random_sighting(rng, 1);
    const auto e = entry(random_sighting(rng, 1).attrs);
    const auto m = score_match(s, e);
    EXPECT_GE(m.score, 0.0);
    EXPECT_LE(m.score, 1.0);
    EXPECT_EQ(m.matched, m.score >= 0.75 && m.attributes_compared >= 2);
  }
}

TEST(Route, OrdersByTimeAcrossCameras) {
  const auto r = build_route({sighting("3", "C", 3000, full_attrs()), sighting("1", "A", 1000, full_attrs()),
                              sighting("2", "B", 2000, full_attrs())});
  ASSERT_EQ(r.size(), 3u);
  EXPECT_EQ(r[0].camera_id, "A");
  EXPECT_EQ(r[1].camera_id, "B");
  EXPECT_EQ(r[2].camera_id, "C");
}

TEST(Route, DwellOnOneCameraCollapses) {
  const auto r = build_route({sighting("1", "A", 1000, full_attrs()), sighting("2", "A", 30'000, full_attrs())});
  ASSERT_EQ(r.size(), 1u);
  EXPECT_EQ(r[0].sighting_id, "1");
  EXPECT_EQ(build_route({sighting("1", "A", 1000, full_attrs()), sighting("2", "A", 90'000, full_attrs())}).size(), 2u);
}

TEST(Route, IsATimeOrderedSubsequence) {
  SplitMix64 rng(44);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Sighting> v;
    for (int i = 0; i < 30; ++i) {
      auto s = random_sighting(rng, static_cast<std::int64_t>(rng.uniform(600'000)));
      s.id = "s" + std::to_string(i);
      v.push_back(s);
    }
    const auto r = build_route(v);
    auto sorted = v;
    std::sort(sorted.begin(), sorted.end(), [](auto& a, auto& b) {
      return a.timestamp_ms != b.timestamp_ms ? a.timestamp_ms < b.timestamp_ms : a.id < b.id;
    });
    std::size_t k = 0;
    for (const auto& s : sorted)
      if (k < r.size() && r[k].sighting_id == s.id) ++k;
    EXPECT_EQ(k, r.size());
    for (std::size_t i = 1; i < r.size(); ++i) EXPECT_LE(r[i - 1].timestamp_ms, r[i].timestamp_ms);
  }
}

TEST(Route, RegistryRouteUsesMatchedSightings) {
  TempDir dir("vigil-reg");
  Registry reg(dir.path());
  const auto e = reg.add_entry(entry({std::nullopt, std::nullopt, ColorName::Red, "KA01MH9999", std::nullopt}));
  Attributes other = full_attrs();
  other.plate_text = "TN07AB1234";
  other.color = ColorName::Blue;
  reg.record_sighting(sighting("a", "A", 1000, full_attrs()));
  reg.record_sighting(sighting("x", "B", 1500, other));
  reg.record_sighting(sighting("b", "B", 200'000, full_attrs()));
  const auto r = reg.route(e.id);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0].sighting_id, "a");
  EXPECT_EQ(r[1].sighting_id, "b");
  EXPECT_THROW(reg.route("nope"), Error);
}

TEST(Watchlist, AddGetUpdateDeactivate) {
  TempDir dir("vigil-reg");
  Registry reg(dir.path());
  const auto added = reg.add_entry(entry(full_attrs()));
  EXPECT_FALSE(added.id.empty());
  EXPECT_GT(added.created_at, 0);
  EXPECT_EQ(*reg.get_entry(added.id), added);

  auto changed = added;
  changed.description = "updated";
  changed.created_at = 5;
  const auto updated = reg.update_entry(changed);
  EXPECT_EQ(updated.created_at, added.created_at);
  EXPECT_EQ(reg.get_entry(added.id)->description, "updated");

  const auto s = sighting("s", "c", 1, full_attrs());
  EXPECT_EQ(reg.match(s).size(), 1u);
  reg.deactivate_entry(added.id);
  EXPECT_TRUE(reg.match(s).empty());
  EXPECT_EQ(reg.entries(true).size(), 0u);
  EXPECT_EQ(reg.entries().size(), 1u);

  try {
    reg.add_entry(entry({}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::NoAttributes);
  }
  try {
    reg.update_entry(entry(full_attrs(), "missing"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UnknownEntry);
  }
  EXPECT_THROW(reg.add_entry(entry(full_attrs(), added.id)), Error);

  Registry reopened(dir.path());
  EXPECT_FALSE(reopened.get_entry(added.id)->active);
  EXPECT_EQ(reopened.get_entry(added.id)->description, "updated");
}

TEST(Json, AttributesAreFlatAndValidated) {
  const auto j = to_json(entry(full_attrs(), "e1"));
  EXPECT_EQ(j["plate_text"], "KA01MH9999");
  EXPECT_EQ(j["color"], "red");
  EXPECT_EQ(entry_from_json(j), entry(full_attrs(), "e1"));
  Json bad = j;
  bad["color"] = "teal";
  EXPECT_THROW(entry_from_json(bad), Error);
  bad = j;
  bad["plate_type"] = 3;
  EXPECT_THROW(entry_from_json(bad), Error);
}

TEST(Cameras, SitesFromConfig) {
  const auto kv = KeyValueFile::parse("gate.site = North Gate\ngate.lat = 12.5\ngate.lon = 77.25\ndock.lat = 1\n");
  const auto cams = CameraRegistry::from_config(kv);
  EXPECT_EQ(cams.size(), 2u);
  const auto g = cams.locate("gate");
  EXPECT_EQ(g.site, "North Gate");
  EXPECT_DOUBLE_EQ(*g.lat, 12.5);
  EXPECT_DOUBLE_EQ(*g.lon, 77.25);
  EXPECT_EQ(cams.locate("dock").site, "dock");
  EXPECT_EQ(cams.locate("unknown").site, "unknown");
  EXPECT_FALSE(cams.locate("unknown").lat);
}
