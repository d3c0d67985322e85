#include "calfmon/service/server.hpp"

#include <algorithm>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "calfmon/cwa.hpp"
#include "calfmon/error.hpp"
#include "calfmon/protocol.hpp"
#include "calfmon/service/jobs.hpp"
#include "calfmon/service/store.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a `_res` macro.
#include <httplib.h>

namespace calfmon::service {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

int status_for(Errc code) {
  switch (code) {
    case Errc::validation_failed:
    case Errc::bad_range:
    case Errc::bad_config:
    case Errc::parse_failed:
    case Errc::bad_row:
    case Errc::bad_header:
      return 400;
    case Errc::unknown_calf:
    case Errc::recording_missing:
    case Errc::model_missing:
    case Errc::no_data:
      return 404;
    default:
      return 500;
  }
}

std::string message_of(const Error& e) {
  const std::string what = e.what();
  const auto colon = what.find(": ");
  return colon == std::string::npos ? what : what.substr(colon + 2);
}

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, const std::string& message) {
  send_json(res, status, json{{"code", code}, {"message", message}});
}

json calf_json(const CalfMeta& c) {
  return json{{"calf_id", c.calf_id}, {"breed", c.breed}, {"birth_date", c.birth_date},
              {"coat_colour", c.coat_colour}, {"pen", c.pen}};
}

json recording_json(const RecordingInfo& r) {
  return json{{"recording_id", r.recording_id}, {"calf_id", r.calf_id},   {"filename", r.filename},
              {"samples", r.samples},           {"segments", r.segments}, {"rejected_blocks", r.rejected_blocks},
              {"first_t", r.first_t},           {"last_t", r.last_t},     {"converted", r.converted},
              {"has_timeline", r.has_timeline}};
}

json job_json(const JobInfo& j) {
  json out{{"job_id", j.job_id},   {"kind", to_string(j.kind)}, {"state", to_string(j.state)},
           {"calf_id", j.calf_id}, {"recording_id", j.recording_id}};
  out["error"] = j.error.empty() ? json(nullptr) : json(j.error);
  out["created"] = j.created;
  out["finished"] = j.finished.empty() ? json(nullptr) : json(j.finished);
  return out;
}

bool looks_like_csv(const std::string& filename, const std::string& content) {
  if (filename.size() >= 4 && filename.substr(filename.size() - 4) == ".csv") return true;
  return content.rfind("timestamp,", 0) == 0;
}

// Model file names are plain names inside the models directory.
bool safe_name(const std::string& name) {
  return !name.empty() && name.find('/') == std::string::npos && name.find('\\') == std::string::npos &&
         name != "." && name != "..";
}

}  // namespace

struct Server::Impl {
  explicit Impl(ServerConfig c)
      : cfg(std::move(c)),
        store(cfg.data_dir),
        pool(cfg.workers ? cfg.workers : std::max(1u, std::thread::hardware_concurrency())) {
    routes();
  }

  ServerConfig cfg;
  Store store;
  WorkerPool pool;
  httplib::Server http;

  // Wraps a handler so library errors become JSON {code, message}.
  template <class F>
  httplib::Server::Handler guarded(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, status_for(e.code()), to_string(e.code()), message_of(e));
      } catch (const json::exception& e) {
        send_error(res, 400, "ValidationFailed", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "Internal", e.what());
      }
    };
  }

  std::pair<Timestamp, Timestamp> range(const httplib::Request& req, const metrics::PredictionTimeline& tl) {
    std::optional<Timestamp> from;
    std::optional<Timestamp> to;
    if (req.has_param("from")) from = parse_iso8601(req.get_param_value("from"));
    if (req.has_param("to")) to = parse_iso8601(req.get_param_value("to"));
    if ((!from || !to) && tl.entries.empty()) throw Error(Errc::no_data, "no predictions for calf '" + tl.calf_id + "'");
    if (!from) from = floor_hour(tl.entries.front().start);
    if (!to) to = ceil_hour(tl.entries.back().end);
    if (!(*from < *to)) throw Error(Errc::bad_range, "'from' must precede 'to'");
    return {*from, *to};
  }

  void require_calf(const std::string& id) {
    if (!store.calf(id)) throw Error(Errc::unknown_calf, "calf '" + id + "' is not registered");
  }

  void run_convert(const std::string& job_id, const std::string& recording_id, const std::string& filename,
                   const std::string& content) {
    store.transition(job_id, JobState::running);
    try {
      Recording rec;
      try {
        if (looks_like_csv(filename, content)) {
          rec = csv::parse_csv(std::string_view(content));
        } else {
          rec = cwa::parse_cwa(std::span(reinterpret_cast<const std::uint8_t*>(content.data()), content.size()));
        }
        rec = regularize(rec);
      } catch (const Error& e) {
        throw Error(Errc::parse_failed, e.what());
      }
      store.save_recording(recording_id, rec);
      store.transition(job_id, JobState::done);
    } catch (const std::exception& e) {
      store.transition(job_id, JobState::failed, e.what());
    }
  }

  void run_predict(const std::string& job_id, const std::string& recording_id, const fs::path& m1,
                   const fs::path& m2) {
    store.transition(job_id, JobState::running);
    try {
      const auto info = store.recording(recording_id);
      const auto rec = store.load_recording(recording_id);
      const auto model1 = learn::load_model_file(m1.string());
      const auto model2 = learn::load_model_file(m2.string());
      const auto tl = protocol::predict(rec, model1, model2, info->calf_id);
      store.save_timeline(recording_id, tl);
      store.transition(job_id, JobState::done);
    } catch (const std::exception& e) {
      store.transition(job_id, JobState::failed, e.what());
    }
  }

  void routes() {
    http.set_payload_max_length(cfg.max_upload_bytes);

    http.Post("/api/v1/calves", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const json body = json::parse(req.body, nullptr, false);
      if (!body.is_object()) throw Error(Errc::validation_failed, "body must be a JSON object");
      auto text = [&](const char* key) {
        if (!body.contains(key) || body[key].is_null()) return std::string();
        if (body[key].is_string()) return body[key].get<std::string>();
        if (body[key].is_number()) return body[key].dump();
        throw Error(Errc::validation_failed, std::string(key) + " must be a string");
      };
      const CalfMeta meta{text("calf_id"), text("breed"), text("birth_date"), text("coat_colour"), text("pen")};
      const bool existed = store.calf(meta.calf_id).has_value();
      store.upsert_calf(meta);
      send_json(res, existed ? 200 : 201, calf_json(meta));
    }));

    http.Get("/api/v1/calves", guarded([this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      for (const auto& c : store.calves()) list.push_back(calf_json(c));
      send_json(res, 200, json{{"calves", list}});
    }));

    http.Get(R"(/api/v1/calves/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      const auto calf = store.calf(id);
      if (!calf) throw Error(Errc::unknown_calf, "calf '" + id + "' is not registered");
      json recs = json::array();
      for (const auto& r : store.recordings_of(id)) recs.push_back(recording_json(r));
      json out = calf_json(*calf);
      out["recordings"] = recs;
      send_json(res, 200, out);
    }));

    http.Post(R"(/api/v1/calves/([^/]+)/recordings)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                const std::string id = req.matches[1];
                require_calf(id);
                std::string filename;
                std::string content;
                if (req.is_multipart_form_data()) {
                  if (!req.has_file("file")) throw Error(Errc::validation_failed, "multipart field 'file' missing");
                  const auto f = req.get_file_value("file");
                  filename = f.filename;
                  content = f.content;
                } else {
                  content = req.body;
                  filename = req.get_param_value("filename");
                }
                if (content.empty()) throw Error(Errc::validation_failed, "empty upload");
                const auto rec_id = store.new_recording(id, filename);
                const auto job_id = store.create_job(JobKind::convert, id, rec_id);
                pool.submit([this, job_id, rec_id, filename, data = std::move(content)] {
                  run_convert(job_id, rec_id, filename, data);
                });
                send_json(res, 202, json{{"job_id", job_id}, {"recording_id", rec_id}});
              }));

    http.Get(R"(/api/v1/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const auto job = store.job(req.matches[1]);
      if (!job) {
        send_error(res, 404, "UnknownJob", "job '" + std::string(req.matches[1]) + "' does not exist");
        return;
      }
      send_json(res, 200, job_json(*job));
    }));

    http.Post(R"(/api/v1/recordings/([^/]+)/predict)",
              guarded([this](const httplib::Request& req, httplib::Response& res) {
                const std::string rec_id = req.matches[1];
                const auto info = store.recording(rec_id);
                if (!info || !info->converted) {
                  throw Error(Errc::recording_missing, "recording '" + rec_id + "' is not available");
                }
                std::string m1 = "model1.cwml";
                std::string m2 = "model2.cwml";
                if (!req.body.empty()) {
                  const json body = json::parse(req.body, nullptr, false);
                  if (!body.is_object()) throw Error(Errc::validation_failed, "body must be a JSON object");
                  m1 = body.value("model1", m1);
                  m2 = body.value("model2", m2);
                }
                for (const auto& name : {m1, m2}) {
                  if (!safe_name(name) || !fs::is_regular_file(cfg.models_dir / name)) {
                    throw Error(Errc::model_missing, "model '" + name + "' not found");
                  }
                }
                const auto job_id = store.create_job(JobKind::predict, info->calf_id, rec_id);
                pool.submit([this, job_id, rec_id, p1 = cfg.models_dir / m1, p2 = cfg.models_dir / m2] {
                  run_predict(job_id, rec_id, p1, p2);
                });
                send_json(res, 202, json{{"job_id", job_id}, {"recording_id", rec_id}});
              }));

    http.Get(R"(/api/v1/calves/([^/]+)/metrics)", guarded([this](const httplib::Request& req, httplib::Response& res) {
      const std::string id = req.matches[1];
      require_calf(id);
      const std::string granularity =
          req.has_param("granularity") ? req.get_param_value("granularity") : std::string("hour");
      if (granularity != "hour" && granularity != "summary" && granularity != "day_night") {
        throw Error(Errc::bad_config, "granularity must be hour, summary or day_night");
      }
      const auto tl = store.timeline(id);
      if (tl.entries.empty() && !(req.has_param("from") && req.has_param("to"))) {
        // No data is an answer, not a failure.
        send_json(res, 200,
                  json{{"calf_id", id}, {"granularity", granularity}, {"from", nullptr}, {"to", nullptr},
                       {"utc_offset", format_utc_offset(cfg.utc_offset_min)}, {"coverage_s", 0}});
        return;
      }
      const auto [from, to] = range(req, tl);
      res.status = 200;
      res.set_content(metrics::metrics_json(tl, from, to, granularity, cfg.utc_offset_min), "application/json");
    }));

    http.Get(R"(/api/v1/calves/([^/]+)/predictions\.csv)",
             guarded([this](const httplib::Request& req, httplib::Response& res) {
               const std::string id = req.matches[1];
               require_calf(id);
               const auto tl = store.timeline(id);
               const auto [from, to] = range(req, tl);
               const bool any = std::any_of(tl.entries.begin(), tl.entries.end(),
                                            [&](const auto& e) { return e.start >= from && e.start < to; });
               if (!any) throw Error(Errc::no_data, "no predictions in the requested range");
               std::ostringstream out;
               metrics::export_predictions_csv(tl, from, to, out);
               res.status = 200;
               res.set_content(out.str(), "text/csv");
             }));

    http.Get("/api/v1/models", guarded([this](const httplib::Request&, httplib::Response& res) {
      std::vector<fs::path> files;
      if (fs::is_directory(cfg.models_dir)) {
        for (const auto& e : fs::directory_iterator(cfg.models_dir)) {
          if (e.is_regular_file() && e.path().extension() == ".cwml") files.push_back(e.path());
        }
      }
      std::sort(files.begin(), files.end());
      json list = json::array();
      for (const auto& f : files) {
        json entry{{"name", f.filename().string()}};
        try {
          const auto m = learn::load_model_file(f.string());
          entry["kind"] = learn::kind_of(m) == learn::ModelKind::ridge ? "ridge" : "forest";
          entry["version"] = protocol::model_version(m);
          const json meta = json::parse(learn::metadata_of(m), nullptr, false);
          entry["metadata"] = meta.is_discarded() ? json(nullptr) : meta;
        } catch (const Error& e) {
          entry["error"] = e.what();
        }
        list.push_back(entry);
      }
      send_json(res, 200, json{{"models", list}});
    }));

    if (!cfg.static_dir.empty() && fs::is_directory(cfg.static_dir)) {
      http.set_mount_point("/", cfg.static_dir.string());
    }
  }
};

Server::Server(ServerConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {}

Server::~Server() {
  stop();
  impl_->pool.wait_idle();
}

int Server::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->http.bind_to_any_port(host);
    if (bound < 0) throw Error(Errc::io_error, "cannot bind " + host);
    return bound;
  }
  if (!impl_->http.bind_to_port(host, port)) {
    throw Error(Errc::io_error, "cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void Server::listen() { impl_->http.listen_after_bind(); }

void Server::stop() {
  if (impl_->http.is_running()) impl_->http.stop();
}

void Server::wait_for_jobs() { impl_->pool.wait_idle(); }

}  // namespace calfmon::service
