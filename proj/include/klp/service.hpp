#pragma once

#include "klp/core.hpp"
#include "klp/image_io.hpp"
#include "klp/segmentation.hpp"

#include <httplib.h>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>

namespace klp {

/// Sessions keyed by id. Work on one session (scribbles, segment) is
/// serialized by that session's mutex; the published mask and metadata sit
/// behind a second lock so reads never wait for a running fit.
class SessionStore {
 public:
  struct Published {
    std::uint64_t version = 0;
    std::size_t strokes = 0;
    std::optional<std::uint64_t> mask_version;
    std::shared_ptr<const std::string> mask_png;
    std::optional<SegmentStats> stats;
  };

  struct Entry {
    explicit Entry(SegmentationSession s) : session(std::move(s)) {}
    std::mutex work;
    SegmentationSession session;
    mutable std::mutex pub_mutex;
    Published pub;

    Published snapshot() const {
      std::lock_guard lock(pub_mutex);
      return pub;
    }
  };

  std::shared_ptr<Entry> create(RgbImage image) {
    std::lock_guard lock(mutex_);
    std::string id;
    do {
      char buf[17];
      std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng_()));
      id = buf;
    } while (entries_.count(id));
    auto e = std::make_shared<Entry>(SegmentationSession(id, std::move(image)));
    entries_.emplace(id, e);
    return e;
  }

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::lock_guard lock(mutex_);
    const auto it = entries_.find(id);
    return it == entries_.end() ? nullptr : it->second;
  }

  std::size_t size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
  }

 private:
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> entries_;
  std::mt19937_64 rng_{std::random_device{}()};
};

namespace detail {

inline void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& what) {
  send_json(res, status, {{"error", what}});
}

inline std::vector<Stroke> parse_strokes(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("strokes") || !body.at("strokes").is_array())
    throw InputError("expected {\"strokes\": [...]}");
  std::vector<Stroke> out;
  for (const auto& js : body.at("strokes")) {
    Stroke s;
    s.label = class_from_label_name(js.at("label").get<std::string>());
    s.radius = js.value("radius", s.radius);
    for (const auto& p : js.at("points")) {
      if (!p.is_array() || p.size() != 2) throw InputError("stroke points must be [x, y] pairs");
      s.points.emplace_back(p[0].get<int>(), p[1].get<int>());
    }
    if (s.points.empty()) throw InputError("stroke has no points");
    out.push_back(std::move(s));
  }
  return out;
}

inline SegmentParams parse_params(const nlohmann::json& j, SegmentParams p) {
  if (!j.is_object()) throw InputError("params must be an object");
  if (j.contains("width")) p.kernel.width = j.at("width").get<double>();
  if (j.contains("budget")) p.budget = j.at("budget").get<Index>();
  if (j.contains("seed")) p.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("alpha")) p.solver.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) p.solver.beta = j.at("beta").get<double>();
  if (j.contains("max_iter")) p.solver.max_iter = j.at("max_iter").get<int>();
  p.validate();
  return p;
}

inline nlohmann::json stats_json(const SegmentStats& s) {
  return {{"n_train", s.n_train}, {"iterations", s.iterations}, {"converged", s.converged}, {"fit_ms", s.fit_ms}};
}

// Runs a handler and maps library exceptions onto status codes.
template <class F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const nlohmann::json::exception& e) {
    send_error(res, 400, std::string("malformed request: ") + e.what());
  } catch (const PreconditionError& e) {
    send_error(res, 409, e.what());
  } catch (const SolverError& e) {
    send_error(res, 500, e.what());
  } catch (const InputError& e) {
    send_error(res, 400, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

}  // namespace detail

/// Registers the segmentation API on `server`.
inline void register_routes(httplib::Server& server, SessionStore& store) {
  using httplib::Request;
  using httplib::Response;
  server.set_payload_max_length(64u << 20);

  server.Post("/sessions", [&store](const Request& req, Response& res) {
    detail::guarded(res, [&] {
      std::string bytes;
      if (req.is_multipart_form_data()) {
        if (req.has_file("image")) {
          bytes = req.get_file_value("image").content;
        } else if (!req.files.empty()) {
          bytes = req.files.begin()->second.content;
        } else {
          throw InputError("multipart upload has no file part");
        }
      } else {
        bytes = req.body;
      }
      auto e = store.create(decode_image(bytes));
      const auto& img = e->session.image();
      detail::send_json(res, 201, {{"session_id", e->session.id()}, {"width", img.width}, {"height", img.height}});
    });
  });

  auto lookup = [&store](const Request& req, Response& res) -> std::shared_ptr<SessionStore::Entry> {
    auto e = store.find(req.matches[1]);
    if (!e) detail::send_error(res, 404, "unknown session '" + std::string(req.matches[1]) + "'");
    return e;
  };

  server.Post(R"(/sessions/([^/]+)/scribbles)", [lookup](const Request& req, Response& res) {
    auto e = lookup(req, res);
    if (!e) return;
    detail::guarded(res, [&] {
      const auto strokes = detail::parse_strokes(nlohmann::json::parse(req.body));
      std::lock_guard work(e->work);
      e->session.add_strokes(strokes);
      {
        std::lock_guard pub(e->pub_mutex);
        e->pub.version = e->session.scribbles().version;
        e->pub.strokes = e->session.scribbles().strokes.size();
      }
      detail::send_json(res, 200, {{"version", e->session.scribbles().version},
                                   {"strokes", e->session.scribbles().strokes.size()}});
    });
  });

  server.Delete(R"(/sessions/([^/]+)/scribbles)", [lookup](const Request& req, Response& res) {
    auto e = lookup(req, res);
    if (!e) return;
    detail::guarded(res, [&] {
      std::lock_guard work(e->work);
      e->session.clear();
      {
        std::lock_guard pub(e->pub_mutex);
        e->pub = SessionStore::Published{};
        e->pub.version = e->session.scribbles().version;
      }
      detail::send_json(res, 200, {{"version", e->session.scribbles().version}, {"strokes", 0}});
    });
  });

  server.Post(R"(/sessions/([^/]+)/segment)", [lookup](const Request& req, Response& res) {
    auto e = lookup(req, res);
    if (!e) return;
    detail::guarded(res, [&] {
      std::lock_guard work(e->work);
      std::optional<SegmentParams> params;
      if (!req.body.empty()) {
        const auto body = nlohmann::json::parse(req.body);
        if (body.contains("params") && !body.at("params").is_null())
          params = detail::parse_params(body.at("params"), e->session.params());
      }
      const auto& result = e->session.segment(params);
      const auto& img = e->session.image();
      auto png = std::make_shared<const std::string>(encode_mask_png(result.mask, img.width, img.height));
      const auto version = e->session.result_version();
      {
        std::lock_guard pub(e->pub_mutex);
        e->pub.mask_png = std::move(png);
        e->pub.mask_version = version;
        e->pub.stats = result.stats;
      }
      detail::send_json(res, 200, {{"version", version}, {"stats", detail::stats_json(result.stats)}});
    });
  });

  server.Get(R"(/sessions/([^/]+)/mask)", [lookup](const Request& req, Response& res) {
    auto e = lookup(req, res);
    if (!e) return;
    const auto snap = e->snapshot();
    if (!snap.mask_png) {
      detail::send_error(res, 409, "no mask yet; POST /sessions/{id}/segment first");
      return;
    }
    res.status = 200;
    res.set_content(*snap.mask_png, "image/png");
    res.set_header("X-Mask-Version", std::to_string(*snap.mask_version));
  });

  server.Get(R"(/sessions/([^/]+))", [lookup](const Request& req, Response& res) {
    auto e = lookup(req, res);
    if (!e) return;
    const auto snap = e->snapshot();
    const auto& img = e->session.image();
    nlohmann::json j{{"session_id", e->session.id()}, {"width", img.width},  {"height", img.height},
                     {"version", snap.version},       {"strokes", snap.strokes}, {"has_mask", snap.mask_png != nullptr}};
    j["mask_version"] = snap.mask_version ? nlohmann::json(*snap.mask_version) : nlohmann::json();
    j["stats"] = snap.stats ? detail::stats_json(*snap.stats) : nlohmann::json();
    detail::send_json(res, 200, j);
  });
}

}  // namespace klp
