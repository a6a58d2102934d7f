#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <list>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "vigil/config.hpp"
#include "vigil/error.hpp"
#include "vigil/imaging.hpp"
#include "vigil/pipeline.hpp"
#include "vigil/registry.hpp"

namespace vigil::api {

inline constexpr std::string_view kVersion = "0.1.0";

// ---- errors -----------------------------------------------------------------------

struct ApiError {
  int status = 500;
  std::string code;
  std::string message;

  Json to_json() const { return {{"error", {{"status", status}, {"code", code}, {"message", message}}}}; }
};

inline int status_for(Errc c) {
  switch (c) {
    case Errc::NoAttributes:
    case Errc::InvalidRecord: return 422;
    case Errc::UnknownEntry: return 404;
    case Errc::DuplicateId: return 409;
    case Errc::BadMagic:
    case Errc::TruncatedPayload:
    case Errc::MaxvalNot255:
    case Errc::ZeroDimension:
    case Errc::ConfigError:
    case Errc::SourceError: return 400;
    default: return 500;
  }
}

inline ApiError api_error(const Error& e) {
  const std::string code(to_string(e.code()));
  std::string msg = e.what();
  if (msg.rfind(code + ": ", 0) == 0) msg.erase(0, code.size() + 2);
  return {status_for(e.code()), code, msg};
}

// ---- alerts -----------------------------------------------------------------------

struct AlertEvent {
  MatchScore match;
  Sighting sighting;
  WatchlistEntry entry;
  std::int64_t emitted_at = 0;

  Json to_json() const {
    return {{"match", vigil::to_json(match)},
            {"sighting", vigil::to_json(sighting)},
            {"entry", {{"id", entry.id}, {"description", entry.description}, {"active", entry.active}}},
            {"emitted_at", emitted_at}};
  }
};

inline std::string sse_frame(std::string_view event, const std::string& data) {
  return "event: " + std::string(event) + "\ndata: " + data + "\n\n";
}

/// Fan-out to live subscribers. Each subscriber owns a bounded buffer; one that
/// falls behind is closed and dropped instead of blocking the publisher.
class AlertHub {
 public:
  struct Subscriber {
    std::mutex mu;
    std::condition_variable cv;
    std::deque<std::string> pending;
    bool closed = false;

    /// Waits up to `timeout` for queued payloads. Empty when none arrived.
    std::vector<std::string> take(std::chrono::milliseconds timeout) {
      std::unique_lock lock(mu);
      cv.wait_for(lock, timeout, [&] { return closed || !pending.empty(); });
      std::vector<std::string> out(std::make_move_iterator(pending.begin()), std::make_move_iterator(pending.end()));
      pending.clear();
      return out;
    }

    bool is_closed() {
      std::lock_guard lock(mu);
      return closed;
    }
  };
  using Handle = std::shared_ptr<Subscriber>;

  explicit AlertHub(std::size_t buffer = 64) : buffer_(buffer < 1 ? 1 : buffer) {}

  Handle subscribe() {
    auto h = std::make_shared<Subscriber>();
    std::lock_guard lock(mu_);
    subs_.push_back(h);
    return h;
  }

  void unsubscribe(const Handle& h) {
    close(h);
    std::lock_guard lock(mu_);
    subs_.remove(h);
  }

  /// Returns the number of subscribers the payload was queued for.
  std::size_t broadcast(const AlertEvent& ev) { return publish(sse_frame("match", ev.to_json().dump())); }

  std::size_t publish(const std::string& payload) {
    std::lock_guard lock(mu_);
    std::size_t delivered = 0;
    for (auto it = subs_.begin(); it != subs_.end();) {
      auto& s = **it;
      std::unique_lock sl(s.mu);
      if (s.closed || s.pending.size() >= buffer_) {
        s.closed = true;
        s.cv.notify_all();
        sl.unlock();
        ++disconnected_;
        it = subs_.erase(it);
        continue;
      }
      s.pending.push_back(payload);
      s.cv.notify_all();
      ++delivered;
      ++it;
    }
    return delivered;
  }

  void close_all() {
    std::lock_guard lock(mu_);
    for (auto& h : subs_) close(h);
    subs_.clear();
  }

  std::size_t subscribers() const {
    std::lock_guard lock(mu_);
    return subs_.size();
  }

  std::size_t disconnected() const {
    std::lock_guard lock(mu_);
    return disconnected_;
  }

 private:
  static void close(const Handle& h) {
    std::lock_guard sl(h->mu);
    h->closed = true;
    h->cv.notify_all();
  }

  std::size_t buffer_;
  mutable std::mutex mu_;
  std::list<Handle> subs_;
  std::size_t disconnected_ = 0;
};

// ---- idempotency ----------------------------------------------------------------------

/// Remembers responses of mutating requests by client request id. A retry with
/// the same id and body replays the stored response; a different body is a conflict.
class IdempotencyCache {
 public:
  struct Stored {
    std::string fingerprint;
    int status = 0;
    std::string body;
  };

  explicit IdempotencyCache(std::size_t capacity = 1024) : capacity_(capacity) {}

  std::optional<Stored> find(const std::string& key) const {
    std::lock_guard lock(mu_);
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  void store(const std::string& key, Stored s) {
    std::lock_guard lock(mu_);
    if (entries_.emplace(key, std::move(s)).second) order_.push_back(key);
    while (order_.size() > capacity_) {
      entries_.erase(order_.front());
      order_.pop_front();
    }
  }

 private:
  std::size_t capacity_;
  mutable std::mutex mu_;
  std::map<std::string, Stored> entries_;
  std::deque<std::string> order_;
};

// ---- request parsing ----------------------------------------------------------------

inline std::int64_t parse_ms(const std::string& name, const std::string& v) {
  std::int64_t out = 0;
  const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) throw Error(Errc::ConfigError, "query '" + name + "' must be epoch milliseconds");
  return out;
}

inline SightingFilter filter_from_query(const httplib::Request& req) {
  SightingFilter f;
  if (req.has_param("from")) f.from_ms = parse_ms("from", req.get_param_value("from"));
  if (req.has_param("to")) f.to_ms = parse_ms("to", req.get_param_value("to"));
  for (std::size_t i = 0; i < req.get_param_value_count("camera"); ++i) {
    const auto v = req.get_param_value("camera", i);
    std::size_t start = 0;
    while (start <= v.size()) {
      const auto comma = v.find(',', start);
      auto part = trim(std::string_view(v).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (!part.empty()) f.cameras.push_back(part);
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
  }
  if (req.has_param("make")) f.make = req.get_param_value("make");
  if (req.has_param("model")) f.model = req.get_param_value("model");
  if (req.has_param("color")) {
    const auto c = req.get_param_value("color");
    f.color = parse_color_name(c);
    if (!f.color) throw Error(Errc::InvalidRecord, "unknown colour '" + c + "'");
  }
  if (req.has_param("plate_type")) {
    const auto t = req.get_param_value("plate_type");
    f.plate_type = plate::parse_plate_type(t);
    if (!f.plate_type) throw Error(Errc::InvalidRecord, "unknown plate type '" + t + "'");
  }
  if (req.has_param("plate_like")) f.plate_like = req.get_param_value("plate_like");
  return f;
}

inline Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    auto j = Json::parse(req.body);
    if (!j.is_object()) throw Error(Errc::InvalidRecord, "request body must be a JSON object");
    return j;
  } catch (const Json::parse_error& e) {
    throw Error(Errc::ConfigError, std::string("malformed JSON: ") + e.what());
  }
}

// Blank form fields count as absent attributes.
inline Json drop_blank(Json j) {
  for (auto it = j.begin(); it != j.end();) {
    if (it->is_null() || (it->is_string() && trim(it->get<std::string>()).empty()))
      it = j.erase(it);
    else
      ++it;
  }
  return j;
}

// ---- service --------------------------------------------------------------------------

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::optional<std::string> bearer_token;
  std::size_t alert_buffer = 64;
  std::size_t idempotency_capacity = 1024;
  std::size_t threads = 32;
  std::chrono::milliseconds keepalive{2000};
};

inline ServerOptions server_options_from(const KeyValueFile& kv) {
  ServerOptions o;
  o.host = kv.get_or("api.host", o.host);
  o.port = kv.number_or<int>("api.port", o.port);
  if (auto t = kv.get("api.token"); t && !t->empty()) o.bearer_token = *t;
  o.alert_buffer = static_cast<std::size_t>(kv.number_or<long long>("api.alert_buffer", static_cast<long long>(o.alert_buffer)));
  o.threads = static_cast<std::size_t>(kv.number_or<long long>("api.threads", static_cast<long long>(o.threads)));
  return o;
}

/// HTTP front of a registry and, optionally, a pipeline. Without a pipeline the
/// service is query-only and frame ingestion answers 422.
class Service {
 public:
  Service(Registry& registry, Pipeline* pipeline, ServerOptions opt = {})
      : registry_(registry), pipeline_(pipeline), opt_(std::move(opt)), hub_(opt_.alert_buffer), idem_(opt_.idempotency_capacity) {
    if (pipeline_) {
      pipeline_->set_match_sink([this](const Sighting& s, const MatchScore& m, const WatchlistEntry& e) {
        hub_.broadcast(AlertEvent{m, s, e, now_ms()});
      });
    }
    const auto threads = opt_.threads;
    svr_.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
    // SO_REUSEADDR only: the library default adds SO_REUSEPORT, which lets a
    // second server share the port instead of failing to bind.
    svr_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });
    routes();
  }

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  ~Service() { stop(); }

  /// Binds the listening socket and returns the bound port.
  int bind() {
    if (opt_.port == 0) {
      port_ = svr_.bind_to_any_port(opt_.host);
      if (port_ < 0) throw Error(Errc::BindError, "cannot bind " + opt_.host);
    } else {
      if (!svr_.bind_to_port(opt_.host, opt_.port)) throw Error(Errc::BindError, "cannot bind " + opt_.host + ":" + std::to_string(opt_.port));
      port_ = opt_.port;
    }
    return port_;
  }

  /// Binds and serves on a background thread.
  int start() {
    const int p = bind();
    thread_ = std::thread([this] { svr_.listen_after_bind(); });
    svr_.wait_until_ready();
    return p;
  }

  /// Blocks serving until stop() is called from elsewhere.
  void serve_forever() {
    if (port_ < 0) bind();
    svr_.listen_after_bind();
  }

  /// Ends alert streams, stops the listener and flushes the store.
  void stop() {
    if (stopped_.exchange(true)) return;
    if (pipeline_) pipeline_->set_match_sink({});
    hub_.close_all();
    svr_.stop();
    if (thread_.joinable()) thread_.join();
    registry_.flush();
  }

  int port() const { return port_; }
  AlertHub& alerts() { return hub_; }
  httplib::Server& http() { return svr_; }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void send_json(Res& res, int status, const Json& j) {
    res.status = status;
    res.set_content(j.dump(), "application/json");
  }

  static void send_error(Res& res, const ApiError& e) { send_json(res, e.status, e.to_json()); }

  // Replays or records mutating responses keyed by the client request id.
  void idempotent(const Req& req, Res& res, const std::function<void()>& handler) {
    std::string id = req.get_header_value("Idempotency-Key");
    if (id.empty()) id = req.get_header_value("X-Request-Id");
    if (id.empty()) {
      handler();
      return;
    }
    const std::string fingerprint = req.method + " " + req.path + "?" + query_string(req) + "\n" + req.body;
    const std::string key = req.method + " " + req.path + " " + id;
    std::lock_guard lock(idem_mu_);
    if (auto prior = idem_.find(key)) {
      if (prior->fingerprint != fingerprint) {
        send_error(res, {409, "RequestIdReused", "request id '" + id + "' was already used for a different request"});
        return;
      }
      res.status = prior->status;
      res.set_content(prior->body, "application/json");
      res.set_header("Idempotent-Replay", "true");
      return;
    }
    try {
      handler();
    } catch (const Error& e) {
      send_error(res, api_error(e));
    }
    idem_.store(key, {fingerprint, res.status, res.body});
  }

  static std::string query_string(const Req& req) {
    std::string out;
    for (const auto& [k, v] : req.params) out += k + "=" + v + "&";
    return out;
  }

  void routes() {
    svr_.set_exception_handler([](const Req&, Res& res, std::exception_ptr ep) {
      try {
        std::rethrow_exception(ep);
      } catch (const Error& e) {
        send_error(res, api_error(e));
      } catch (const std::exception& e) {
        send_error(res, {500, "Internal", e.what()});
      } catch (...) {
        send_error(res, {500, "Internal", "unknown failure"});
      }
    });
    svr_.set_error_handler([](const Req& req, Res& res) {
      if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
      if (res.status == 404) {
        send_error(res, {404, "NotFound", "no route for " + req.method + " " + req.path});
      } else {
        const int status = res.status >= 500 ? 500 : 400;
        send_error(res, {status, "BadRequest", "request rejected with HTTP " + std::to_string(res.status)});
      }
      return httplib::Server::HandlerResponse::Handled;
    });
    svr_.set_pre_routing_handler([this](const Req& req, Res& res) {
      if (!opt_.bearer_token || req.path == "/healthz") return httplib::Server::HandlerResponse::Unhandled;
      if (req.get_header_value("Authorization") == "Bearer " + *opt_.bearer_token) return httplib::Server::HandlerResponse::Unhandled;
      send_error(res, {400, "Unauthorized", "missing or wrong bearer token"});
      return httplib::Server::HandlerResponse::Handled;
    });

    svr_.Get("/healthz", [](const Req&, Res& res) { send_json(res, 200, {{"version", kVersion}}); });

    svr_.Post("/frames", [this](const Req& req, Res& res) {
      idempotent(req, res, [&] {
        if (!pipeline_) throw Error(Errc::InvalidRecord, "service runs without a pipeline; frame ingestion is off");
        const auto* data = reinterpret_cast<const std::uint8_t*>(req.body.data());
        Frame f = decode_ppm(std::span<const std::uint8_t>(data, req.body.size()));
        const auto seq = pipeline_->submit(std::move(f), req.get_param_value("camera"));
        send_json(res, 202, {{"sequence", seq}});
      });
    });

    svr_.Get("/sightings", [this](const Req& req, Res& res) {
      Json out = Json::array();
      for (const auto& s : registry_.query(filter_from_query(req))) out.push_back(to_json(s));
      send_json(res, 200, out);
    });
    svr_.Get(R"(/sightings/([^/]+))", [this](const Req& req, Res& res) {
      const auto id = req.matches[1].str();
      auto s = registry_.get_sighting(id);
      if (!s) return send_error(res, {404, "UnknownSighting", "no sighting '" + id + "'"});
      send_json(res, 200, to_json(*s));
    });

    svr_.Get("/watchlist", [this](const Req& req, Res& res) {
      const bool active_only = req.has_param("active") && fold_case(req.get_param_value("active")) == "true";
      Json out = Json::array();
      for (const auto& e : registry_.entries(active_only)) out.push_back(to_json(e));
      send_json(res, 200, out);
    });
    svr_.Post("/watchlist", [this](const Req& req, Res& res) {
      idempotent(req, res, [&] {
        auto e = entry_from_json(drop_blank(parse_body(req)));
        e.created_at = 0;
        send_json(res, 201, to_json(registry_.add_entry(std::move(e))));
      });
    });
    svr_.Get(R"(/watchlist/([^/]+))", [this](const Req& req, Res& res) {
      const auto id = req.matches[1].str();
      auto e = registry_.get_entry(id);
      if (!e) throw Error(Errc::UnknownEntry, "no watchlist entry '" + id + "'");
      send_json(res, 200, to_json(*e));
    });
    svr_.Patch(R"(/watchlist/([^/]+))", [this](const Req& req, Res& res) {
      idempotent(req, res, [&] {
        const auto id = req.matches[1].str();
        auto current = registry_.get_entry(id);
        if (!current) throw Error(Errc::UnknownEntry, "no watchlist entry '" + id + "'");
        // Merge: present keys replace, null or blank clears an attribute.
        Json merged = to_json(*current);
        const Json patch = parse_body(req);
        for (const auto& [k, v] : patch.items()) {
          if (k == "id" || k == "created_at") continue;
          merged[k] = v;
        }
        auto next = entry_from_json(drop_blank(merged));
        next.id = id;
        send_json(res, 200, to_json(registry_.update_entry(next)));
      });
    });
    svr_.Delete(R"(/watchlist/([^/]+))", [this](const Req& req, Res& res) {
      idempotent(req, res, [&] { send_json(res, 200, to_json(registry_.deactivate_entry(req.matches[1].str()))); });
    });
    svr_.Get(R"(/watchlist/([^/]+)/route)", [this](const Req& req, Res& res) {
      Json out = Json::array();
      for (const auto& w : registry_.route(req.matches[1].str())) out.push_back(to_json(w));
      send_json(res, 200, out);
    });

    svr_.Get("/alerts", [this](const Req&, Res& res) {
      auto sub = hub_.subscribe();
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
          "text/event-stream",
          [this, sub](std::size_t, httplib::DataSink& sink) {
            if (sub->is_closed()) return false;
            auto batch = sub->take(opt_.keepalive);
            if (batch.empty()) {
              if (sub->is_closed()) return false;
              const std::string ping = ": keepalive\n\n";
              return sink.write(ping.data(), ping.size());
            }
            for (const auto& msg : batch)
              if (!sink.write(msg.data(), msg.size())) return false;
            return true;
          },
          [this, sub](bool) { hub_.unsubscribe(sub); });
    });

    svr_.Get("/metrics", [this](const Req&, Res& res) {
      Json stages = Json::array();
      Json j;
      if (pipeline_) {
        const auto rep = pipeline_->report();
        for (const auto& s : rep.stages) stages.push_back(to_json(s));
        j["pipeline_latency_s"] = rep.pipeline_latency_s;
        j["frames_in"] = rep.frames_in;
        j["frames_processed"] = rep.frames_processed;
        j["frames_dropped"] = rep.frames_dropped;
        j["queue_depth"] = pipeline_->queue_depth();
      }
      j["stages"] = stages;
      const auto c = registry_.counters();
      j["store"] = {{"sightings", c.sightings}, {"entries", c.entries}, {"active_entries", c.active_entries}, {"appends", c.appends}};
      j["alerts"] = {{"subscribers", hub_.subscribers()}, {"disconnected", hub_.disconnected()}};
      send_json(res, 200, j);
    });
  }

  Registry& registry_;
  Pipeline* pipeline_;
  ServerOptions opt_;
  AlertHub hub_;
  IdempotencyCache idem_;
  std::mutex idem_mu_;
  httplib::Server svr_;
  std::thread thread_;
  int port_ = -1;
  std::atomic<bool> stopped_{false};
};

}  // namespace vigil::api
