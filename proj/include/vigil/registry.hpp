#pragma once

// Sighting store and watchlist: append-only JSON-lines logs replayed into
// memory on open.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "vigil/color.hpp"
#include "vigil/config.hpp"
#include "vigil/error.hpp"
#include "vigil/plate.hpp"

namespace vigil {

using plate::PlateType;
using Json = nlohmann::json;

inline constexpr int kLogVersion = 1;

inline std::int64_t now_ms() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count();
}

struct Location {
  std::string site;
  std::optional<double> lat;
  std::optional<double> lon;

  friend bool operator==(const Location&, const Location&) = default;
};

// The attribute set shared by sightings and watchlist targets.
struct Attributes {
  std::optional<std::string> make;
  std::optional<std::string> model;
  std::optional<ColorName> color;
  std::optional<std::string> plate_text;
  std::optional<PlateType> plate_type;

  bool empty() const { return !make && !model && !color && !plate_text && !plate_type; }
  friend bool operator==(const Attributes&, const Attributes&) = default;
};

struct Sighting {
  std::string id;
  std::string camera_id;
  std::int64_t timestamp_ms = 0;
  Location location;
  Attributes attrs;
  std::map<std::string, double> confidences;
  std::optional<std::string> crop_ref;
  std::optional<std::uint64_t> frame_sequence;

  friend bool operator==(const Sighting&, const Sighting&) = default;
};

struct WatchlistEntry {
  std::string id;
  std::int64_t created_at = 0;
  std::string description;
  Attributes target;
  bool active = true;

  friend bool operator==(const WatchlistEntry&, const WatchlistEntry&) = default;
};

struct MatchScore {
  std::string sighting_id;
  std::string entry_id;
  double score = 0;
  int attributes_compared = 0;
  bool matched = false;
};

struct MatchPolicy {
  double w_plate = 0.45;
  double w_model = 0.20;
  double w_make = 0.15;
  double w_color = 0.12;
  double w_plate_type = 0.08;
  double threshold = 0.75;
  int min_compared = 2;
  int plate_tolerance = 1;     // edit distance still earning partial credit
  double partial_credit = 0.8;  // fraction of the plate weight for a near plate
};

// ---- JSON ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void put_opt(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

inline std::optional<std::string> get_str(const Json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw Error(Errc::InvalidRecord, std::string("field '") + key + "' must be a string");
  return it->get<std::string>();
}

}  // namespace detail

inline Json to_json(const Location& l) {
  Json j{{"site", l.site}};
  detail::put_opt(j, "lat", l.lat);
  detail::put_opt(j, "lon", l.lon);
  return j;
}

inline void write_attributes(Json& j, const Attributes& a) {
  detail::put_opt(j, "make", a.make);
  detail::put_opt(j, "model", a.model);
  if (a.color) j["color"] = std::string(to_string(*a.color));
  detail::put_opt(j, "plate_text", a.plate_text);
  if (a.plate_type) j["plate_type"] = std::string(plate::to_string(*a.plate_type));
}

inline Attributes read_attributes(const Json& j) {
  Attributes a;
  a.make = detail::get_str(j, "make");
  a.model = detail::get_str(j, "model");
  a.plate_text = detail::get_str(j, "plate_text");
  if (auto c = detail::get_str(j, "color")) {
    a.color = parse_color_name(*c);
    if (!a.color) throw Error(Errc::InvalidRecord, "unknown colour '" + *c + "'");
  }
  if (auto t = detail::get_str(j, "plate_type")) {
    a.plate_type = plate::parse_plate_type(*t);
    if (!a.plate_type) throw Error(Errc::InvalidRecord, "unknown plate type '" + *t + "'");
  }
  return a;
}

inline Json to_json(const Sighting& s) {
  Json j{{"id", s.id}, {"camera_id", s.camera_id}, {"timestamp", s.timestamp_ms}, {"location", to_json(s.location)}};
  write_attributes(j, s.attrs);
  j["confidences"] = s.confidences;
  detail::put_opt(j, "crop_ref", s.crop_ref);
  detail::put_opt(j, "frame_sequence", s.frame_sequence);
  return j;
}

inline Sighting sighting_from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidRecord, "sighting must be an object");
  Sighting s;
  s.id = detail::get_str(j, "id").value_or("");
  s.camera_id = detail::get_str(j, "camera_id").value_or("");
  if (auto it = j.find("timestamp"); it != j.end() && it->is_number_integer()) s.timestamp_ms = it->get<std::int64_t>();
  if (auto it = j.find("location"); it != j.end() && it->is_object()) {
    s.location.site = detail::get_str(*it, "site").value_or("");
    if (auto la = it->find("lat"); la != it->end() && la->is_number()) s.location.lat = la->get<double>();
    if (auto lo = it->find("lon"); lo != it->end() && lo->is_number()) s.location.lon = lo->get<double>();
  }
  s.attrs = read_attributes(j);
  if (auto it = j.find("confidences"); it != j.end() && it->is_object())
    for (const auto& [k, v] : it->items()) s.confidences[k] = v.get<double>();
  s.crop_ref = detail::get_str(j, "crop_ref");
  if (auto it = j.find("frame_sequence"); it != j.end() && it->is_number_unsigned()) s.frame_sequence = it->get<std::uint64_t>();
  return s;
}

inline Json to_json(const WatchlistEntry& e) {
  Json j{{"id", e.id}, {"created_at", e.created_at}, {"description", e.description}, {"active", e.active}};
  write_attributes(j, e.target);
  return j;
}

inline WatchlistEntry entry_from_json(const Json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidRecord, "watchlist entry must be an object");
  WatchlistEntry e;
  e.id = detail::get_str(j, "id").value_or("");
  if (auto it = j.find("created_at"); it != j.end() && it->is_number_integer()) e.created_at = it->get<std::int64_t>();
  e.description = detail::get_str(j, "description").value_or("");
  if (auto it = j.find("active"); it != j.end() && it->is_boolean()) e.active = it->get<bool>();
  e.target = read_attributes(j);
  return e;
}

inline Json to_json(const MatchScore& m) {
  return {{"sighting_id", m.sighting_id},
          {"entry_id", m.entry_id},
          {"score", m.score},
          {"attributes_compared", m.attributes_compared},
          {"matched", m.matched}};
}

// ---- matching -----------------------------------------------------------------------

inline int edit_distance(std::string_view a, std::string_view b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

/// Plate text without spaces or dashes, upper case.
inline std::string normalize_plate(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == ' ' || c == '-') continue;
    out.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
  }
  return out;
}

/// Weighted agreement over the attributes present in both records.
inline MatchScore score_match(const Sighting& s, const WatchlistEntry& e, const MatchPolicy& p = {}) {
  MatchScore m;
  m.sighting_id = s.id;
  m.entry_id = e.id;
  double compared = 0;
  double earned = 0;
  auto compare = [&](bool both, double weight, double credit) {
    if (!both) return;
    ++m.attributes_compared;
    compared += weight;
    earned += credit * weight;
  };
  const auto& a = s.attrs;
  const auto& t = e.target;
  if (a.plate_text && t.plate_text) {
    const int d = edit_distance(normalize_plate(*a.plate_text), normalize_plate(*t.plate_text));
    compare(true, p.w_plate, d == 0 ? 1.0 : (d <= p.plate_tolerance ? p.partial_credit : 0.0));
  }
  if (a.model && t.model) compare(true, p.w_model, fold_case(trim(*a.model)) == fold_case(trim(*t.model)) ? 1.0 : 0.0);
  if (a.make && t.make) compare(true, p.w_make, fold_case(trim(*a.make)) == fold_case(trim(*t.make)) ? 1.0 : 0.0);
  compare(a.color && t.color, p.w_color, a.color == t.color ? 1.0 : 0.0);
  compare(a.plate_type && t.plate_type, p.w_plate_type, a.plate_type == t.plate_type ? 1.0 : 0.0);
  m.score = compared > 0 ? earned / compared : 0.0;
  m.matched = m.score >= p.threshold && m.attributes_compared >= p.min_compared;
  return m;
}

/// One score per active entry, in the order given.
inline std::vector<MatchScore> match_watchlist(const Sighting& s, std::span<const WatchlistEntry> entries,
                                               const MatchPolicy& p = {}) {
  std::vector<MatchScore> out;
  for (const auto& e : entries)
    if (e.active) out.push_back(score_match(s, e, p));
  return out;
}

// ---- query ----------------------------------------------------------------------------

struct SightingFilter {
  std::optional<std::int64_t> from_ms;  // inclusive
  std::optional<std::int64_t> to_ms;    // inclusive
  std::vector<std::string> cameras;     // any of; empty means all
  std::optional<std::string> make;
  std::optional<std::string> model;
  std::optional<ColorName> color;
  std::optional<PlateType> plate_type;
  std::optional<std::string> plate_like;  // case-insensitive substring
};

inline bool filter_accepts(const SightingFilter& f, const Sighting& s) {
  if (f.from_ms && s.timestamp_ms < *f.from_ms) return false;
  if (f.to_ms && s.timestamp_ms > *f.to_ms) return false;
  if (!f.cameras.empty() && std::find(f.cameras.begin(), f.cameras.end(), s.camera_id) == f.cameras.end()) return false;
  auto same = [](const std::optional<std::string>& want, const std::optional<std::string>& have) {
    return !want || (have && fold_case(trim(*want)) == fold_case(trim(*have)));
  };
  if (!same(f.make, s.attrs.make) || !same(f.model, s.attrs.model)) return false;
  if (f.color && s.attrs.color != f.color) return false;
  if (f.plate_type && s.attrs.plate_type != f.plate_type) return false;
  if (f.plate_like) {
    if (!s.attrs.plate_text) return false;
    if (fold_case(*s.attrs.plate_text).find(fold_case(*f.plate_like)) == std::string::npos) return false;
  }
  return true;
}

// ---- route ----------------------------------------------------------------------------

struct Waypoint {
  std::int64_t timestamp_ms = 0;
  Location location;
  std::string sighting_id;
  std::string camera_id;
};

inline Json to_json(const Waypoint& w) {
  return {{"timestamp", w.timestamp_ms}, {"location", to_json(w.location)}, {"sighting_id", w.sighting_id}, {"camera_id", w.camera_id}};
}

/// Orders sightings by (timestamp, id) and collapses a sighting on the same
/// camera as the previous one, no more than `dwell_ms` after it, into the
/// earlier waypoint.
inline std::vector<Waypoint> build_route(std::vector<Sighting> matched, std::int64_t dwell_ms = 60'000) {
  std::sort(matched.begin(), matched.end(), [](const Sighting& a, const Sighting& b) {
    return a.timestamp_ms != b.timestamp_ms ? a.timestamp_ms < b.timestamp_ms : a.id < b.id;
  });
  std::vector<Waypoint> out;
  const Sighting* prev = nullptr;
  for (const auto& s : matched) {
    const bool collapse = prev && prev->camera_id == s.camera_id && s.timestamp_ms - prev->timestamp_ms <= dwell_ms;
    if (!collapse) out.push_back({s.timestamp_ms, s.location, s.id, s.camera_id});
    prev = &s;
  }
  return out;
}

// ---- camera sites ---------------------------------------------------------------------

/// camera_id -> site from "<camera>.site", "<camera>.lat", "<camera>.lon" keys.
class CameraRegistry {
 public:
  CameraRegistry() = default;

  static CameraRegistry from_config(const KeyValueFile& kv) {
    CameraRegistry r;
    for (const auto& [key, value] : kv.values()) {
      const auto dot = key.rfind('.');
      if (dot == std::string::npos) continue;
      const auto cam = key.substr(0, dot);
      const auto field = key.substr(dot + 1);
      auto& loc = r.sites_[cam];
      if (field == "site") {
        loc.site = value;
      } else if (field == "lat") {
        loc.lat = kv.number_or<double>(key, 0.0);
      } else if (field == "lon") {
        loc.lon = kv.number_or<double>(key, 0.0);
      }
    }
    for (auto& [cam, loc] : r.sites_)
      if (loc.site.empty()) loc.site = cam;
    return r;
  }

  static CameraRegistry load(const std::filesystem::path& path) { return from_config(KeyValueFile::load(path)); }

  void set(const std::string& camera_id, Location loc) { sites_[camera_id] = std::move(loc); }

  /// Known site, or the camera id itself as a named site.
  Location locate(const std::string& camera_id) const {
    auto it = sites_.find(camera_id);
    if (it != sites_.end()) return it->second;
    return {camera_id, std::nullopt, std::nullopt};
  }

  std::size_t size() const { return sites_.size(); }

 private:
  std::map<std::string, Location> sites_;
};

// ---- store ----------------------------------------------------------------------------

struct RegistryOptions {
  bool fsync = false;  // fsync after every append, not just flush to the OS
  MatchPolicy policy;
  std::int64_t dwell_ms = 60'000;
};

struct RecoveryReport {
  std::size_t sightings_loaded = 0;
  std::size_t entries_loaded = 0;
  std::size_t torn_records_dropped = 0;
};

struct RegistryCounters {
  std::size_t sightings = 0;
  std::size_t entries = 0;
  std::size_t active_entries = 0;
  std::size_t appends = 0;
};

namespace detail {

// Appends whole lines to a file descriptor opened O_APPEND.
class AppendLog {
 public:
  AppendLog() = default;
  explicit AppendLog(const std::filesystem::path& path, bool sync) : sync_(sync) {
    fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error(Errc::IoError, "cannot open " + path.string());
  }
  AppendLog(const AppendLog&) = delete;
  AppendLog& operator=(const AppendLog&) = delete;
  AppendLog(AppendLog&& o) noexcept : fd_(std::exchange(o.fd_, -1)), sync_(o.sync_) {}
  AppendLog& operator=(AppendLog&& o) noexcept {
    if (this != &o) {
      close();
      fd_ = std::exchange(o.fd_, -1);
      sync_ = o.sync_;
    }
    return *this;
  }
  ~AppendLog() { close(); }

  void append(const std::string& line) {
    std::string buf = line;
    buf.push_back('\n');
    const char* p = buf.data();
    std::size_t left = buf.size();
    while (left > 0) {
      const auto n = ::write(fd_, p, left);
      if (n < 0) throw Error(Errc::IoError, "append failed");
      p += n;
      left -= static_cast<std::size_t>(n);
    }
    if (sync_) ::fsync(fd_);
  }

  void sync() {
    if (fd_ >= 0) ::fsync(fd_);
  }

 private:
  void close() {
    if (fd_ >= 0) ::close(fd_);
    fd_ = -1;
  }
  int fd_ = -1;
  bool sync_ = false;
};

// Complete lines of a log. A final line without its newline is a torn write:
// it is cut from the file and counted.
inline std::vector<std::string> read_log(const std::filesystem::path& path, std::size_t& torn) {
  std::vector<std::string> lines;
  if (!std::filesystem::exists(path)) return lines;
  std::ifstream in(path, std::ios::binary);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t start = 0;
  while (start < data.size()) {
    const auto nl = data.find('\n', start);
    if (nl == std::string::npos) {
      ++torn;
      in.close();
      std::filesystem::resize_file(path, start);
      break;
    }
    lines.push_back(data.substr(start, nl - start));
    start = nl + 1;
  }
  return lines;
}

inline Json parse_record(const std::string& line, const std::filesystem::path& path, std::size_t lineno) {
  Json j = Json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    throw Error(Errc::Corrupt, path.filename().string() + " line " + std::to_string(lineno) + " is not a JSON object");
  }
  if (j.value("v", 0) != kLogVersion) {
    throw Error(Errc::Corrupt, path.filename().string() + " line " + std::to_string(lineno) + " has unsupported version");
  }
  return j;
}

}  // namespace detail

class Registry {
 public:
  explicit Registry(std::filesystem::path dir, RegistryOptions opt = {}) : dir_(std::move(dir)), opt_(opt) {
    std::filesystem::create_directories(dir_);
    load();
    sightings_log_ = detail::AppendLog(dir_ / "sightings.jsonl", opt_.fsync);
    watchlist_log_ = detail::AppendLog(dir_ / "watchlist.jsonl", opt_.fsync);
  }

  const std::filesystem::path& directory() const { return dir_; }
  const RegistryOptions& options() const { return opt_; }
  const RecoveryReport& recovery() const { return recovery_; }

  /// Validates, appends to the log, then publishes. An empty id is assigned.
  std::string record_sighting(Sighting s) {
    if (s.attrs.empty()) throw Error(Errc::NoAttributes, "a sighting needs at least one attribute");
    if (s.timestamp_ms <= 0) throw Error(Errc::InvalidRecord, "sighting timestamp must be positive");
    if (s.camera_id.empty()) throw Error(Errc::InvalidRecord, "sighting needs a camera id");
    std::unique_lock lock(mu_);
    if (s.id.empty()) {
      do {
        s.id = "s-" + std::to_string(++next_sighting_);
      } while (sighting_index_.count(s.id));
    }
    if (sighting_index_.count(s.id)) throw Error(Errc::DuplicateId, "sighting id '" + s.id + "' already stored");
    Json rec = to_json(s);
    rec["v"] = kLogVersion;
    sightings_log_.append(rec.dump());
    ++appends_;
    sighting_index_[s.id] = sightings_.size();
    sightings_.push_back(std::move(s));
    return sightings_.back().id;
  }

  std::optional<Sighting> get_sighting(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = sighting_index_.find(id);
    if (it == sighting_index_.end()) return std::nullopt;
    return sightings_[it->second];
  }

  /// Conjunctive filter; timestamp ascending, log order among equal times.
  std::vector<Sighting> query(const SightingFilter& f = {}) const {
    std::shared_lock lock(mu_);
    std::vector<Sighting> out;
    for (const auto& s : sightings_)
      if (filter_accepts(f, s)) out.push_back(s);
    std::stable_sort(out.begin(), out.end(), [](const Sighting& a, const Sighting& b) { return a.timestamp_ms < b.timestamp_ms; });
    return out;
  }

  std::size_t sighting_count() const {
    std::shared_lock lock(mu_);
    return sightings_.size();
  }

  WatchlistEntry add_entry(WatchlistEntry e) {
    if (e.target.empty()) throw Error(Errc::NoAttributes, "a watchlist entry needs at least one target attribute");
    std::unique_lock lock(mu_);
    if (e.id.empty()) {
      do {
        e.id = "wl-" + std::to_string(++next_entry_);
      } while (entry_index_.count(e.id));
    } else if (entry_index_.count(e.id)) {
      throw Error(Errc::DuplicateId, "watchlist id '" + e.id + "' already exists");
    }
    if (e.created_at <= 0) e.created_at = now_ms();
    put_entry(e);
    return e;
  }

  /// Replaces description, target and active flag; id and created_at are kept.
  WatchlistEntry update_entry(const WatchlistEntry& e) {
    if (e.target.empty()) throw Error(Errc::NoAttributes, "a watchlist entry needs at least one target attribute");
    std::unique_lock lock(mu_);
    auto it = entry_index_.find(e.id);
    if (it == entry_index_.end()) throw Error(Errc::UnknownEntry, "no watchlist entry '" + e.id + "'");
    WatchlistEntry next = e;
    next.created_at = entries_[it->second].created_at;
    put_entry(next);
    return next;
  }

  WatchlistEntry deactivate_entry(const std::string& id) {
    std::unique_lock lock(mu_);
    auto it = entry_index_.find(id);
    if (it == entry_index_.end()) throw Error(Errc::UnknownEntry, "no watchlist entry '" + id + "'");
    WatchlistEntry next = entries_[it->second];
    next.active = false;
    put_entry(next);
    return next;
  }

  std::optional<WatchlistEntry> get_entry(const std::string& id) const {
    std::shared_lock lock(mu_);
    auto it = entry_index_.find(id);
    if (it == entry_index_.end()) return std::nullopt;
    return entries_[it->second];
  }

  std::vector<WatchlistEntry> entries(bool active_only = false) const {
    std::shared_lock lock(mu_);
    std::vector<WatchlistEntry> out;
    for (const auto& e : entries_)
      if (!active_only || e.active) out.push_back(e);
    return out;
  }

  /// Scores against every active entry.
  std::vector<MatchScore> match(const Sighting& s) const {
    const auto active = entries(true);
    return match_watchlist(s, active, opt_.policy);
  }

  /// Matched sightings of one entry as a time-ordered route.
  std::vector<Waypoint> route(const std::string& entry_id) const {
    const auto e = get_entry(entry_id);
    if (!e) throw Error(Errc::UnknownEntry, "no watchlist entry '" + entry_id + "'");
    std::vector<Sighting> matched;
    {
      std::shared_lock lock(mu_);
      for (const auto& s : sightings_)
        if (score_match(s, *e, opt_.policy).matched) matched.push_back(s);
    }
    return build_route(std::move(matched), opt_.dwell_ms);
  }

  RegistryCounters counters() const {
    std::shared_lock lock(mu_);
    RegistryCounters c;
    c.sightings = sightings_.size();
    c.entries = entries_.size();
    c.active_entries = static_cast<std::size_t>(std::count_if(entries_.begin(), entries_.end(), [](const auto& e) { return e.active; }));
    c.appends = appends_;
    return c;
  }

  void flush() {
    std::unique_lock lock(mu_);
    sightings_log_.sync();
    watchlist_log_.sync();
  }

 private:
  void put_entry(const WatchlistEntry& e) {
    Json rec{{"v", kLogVersion}, {"op", "put"}, {"entry", to_json(e)}};
    watchlist_log_.append(rec.dump());
    ++appends_;
    auto it = entry_index_.find(e.id);
    if (it == entry_index_.end()) {
      entry_index_[e.id] = entries_.size();
      entries_.push_back(e);
    } else {
      entries_[it->second] = e;
    }
  }

  static std::uint64_t numeric_suffix(const std::string& id, std::string_view prefix) {
    if (id.rfind(prefix, 0) != 0) return 0;
    try {
      return std::stoull(id.substr(prefix.size()));
    } catch (const std::exception&) {
      return 0;
    }
  }

  void load() {
    const auto spath = dir_ / "sightings.jsonl";
    const auto wpath = dir_ / "watchlist.jsonl";
    const auto slines = detail::read_log(spath, recovery_.torn_records_dropped);
    for (std::size_t i = 0; i < slines.size(); ++i) {
      if (slines[i].empty()) continue;
      auto s = sighting_from_json(detail::parse_record(slines[i], spath, i + 1));
      if (sighting_index_.count(s.id)) throw Error(Errc::Corrupt, "duplicate sighting id '" + s.id + "' in log");
      next_sighting_ = std::max(next_sighting_, numeric_suffix(s.id, "s-"));
      sighting_index_[s.id] = sightings_.size();
      sightings_.push_back(std::move(s));
    }
    const auto wlines = detail::read_log(wpath, recovery_.torn_records_dropped);
    for (std::size_t i = 0; i < wlines.size(); ++i) {
      if (wlines[i].empty()) continue;
      const Json rec = detail::parse_record(wlines[i], wpath, i + 1);
      if (rec.value("op", "") != "put" || !rec.contains("entry")) throw Error(Errc::Corrupt, "unknown watchlist record");
      auto e = entry_from_json(rec["entry"]);
      next_entry_ = std::max(next_entry_, numeric_suffix(e.id, "wl-"));
      auto it = entry_index_.find(e.id);
      if (it == entry_index_.end()) {
        entry_index_[e.id] = entries_.size();
        entries_.push_back(std::move(e));
      } else {
        entries_[it->second] = std::move(e);
      }
    }
    recovery_.sightings_loaded = sightings_.size();
    recovery_.entries_loaded = entries_.size();
  }

  std::filesystem::path dir_;
  RegistryOptions opt_;
  RecoveryReport recovery_;
  mutable std::shared_mutex mu_;
  std::vector<Sighting> sightings_;
  std::unordered_map<std::string, std::size_t> sighting_index_;
  std::vector<WatchlistEntry> entries_;
  std::unordered_map<std::string, std::size_t> entry_index_;
  std::uint64_t next_sighting_ = 0;
  std::uint64_t next_entry_ = 0;
  std::size_t appends_ = 0;
  detail::AppendLog sightings_log_;
  detail::AppendLog watchlist_log_;
};

}  // namespace vigil
