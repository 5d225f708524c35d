#include "bioinvert/server.hpp"

#include <httplib.h>

#include <regex>

#include "bioinvert/schema.hpp"

namespace fs = std::filesystem;

namespace bioinvert {

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::SchemaError:
      return 400;
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::Conflict:
    case ErrorCode::StageOrderViolation:
    case ErrorCode::VersionMismatch:
    case ErrorCode::Cancelled:
      return 409;
    case ErrorCode::AuthError:
    case ErrorCode::RateLimited:
    case ErrorCode::SchemaRejected:
    case ErrorCode::TransportError:
    case ErrorCode::ClassifierUnavailable:
      return 502;
    case ErrorCode::IoError:
    case ErrorCode::BindError:
      return 500;
    default:
      return 422;
  }
}

namespace {

const std::regex kProjectId("^[A-Za-z0-9][A-Za-z0-9_.-]{0,63}$");

void send_json(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, const Error& e) { send_json(res, http_status(e.code()), error_envelope(e)); }

Json body_json(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  return schema::parse(req.body, "/body");
}

std::optional<std::uint64_t> if_match(const httplib::Request& req) {
  if (!req.has_header("If-Match")) return std::nullopt;
  auto v = req.get_header_value("If-Match");
  v.erase(std::remove(v.begin(), v.end(), '"'), v.end());
  try {
    std::size_t used = 0;
    const auto n = std::stoull(v, &used);
    if (used == v.size()) return n;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::InvalidArgument, "If-Match must be an event-log head number", "/headers/If-Match");
}

void set_etag(httplib::Response& res, const Project& p) {
  res.set_header("ETag", "\"" + std::to_string(p.state().head) + "\"");
}

Json project_summary(const ProjectState& s) {
  Json stages = Json::object();
  for (std::size_t i = 0; i < kStageCount; ++i)
    stages[std::string(to_string(static_cast<Stage>(i)))] = {{"complete", s.stages[i].complete}, {"stale", s.stages[i].stale}};
  const auto cur = s.current_stage();
  return Json{{"id", s.id},
              {"name", s.name},
              {"head", s.head},
              {"stage", cur ? Json(std::string(to_string(*cur))) : Json(nullptr)},
              {"stages", stages},
              {"counts",
               {{"documents", s.documents.size()},
                {"labeled", s.labeled.size()},
                {"batches", s.batches.size()},
                {"frames", s.frames.size()},
                {"inversions", s.inversions.size()},
                {"kept", s.kept.size()}}}};
}

// Wraps a handler: JSON errors become the standard envelope.
template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e);
    } catch (const Json::exception& e) {
      send_error(res, Error(ErrorCode::SchemaError, e.what(), "/body"));
    } catch (const std::exception& e) {
      send_json(res, 500, Json{{"code", "INTERNAL"}, {"message", e.what()}, {"path", req.path}});
    }
  };
}

}  // namespace

WorkbenchServer::WorkbenchServer(ServerConfig config, ServicesFactory services)
    : config_(std::move(config)), services_(std::move(services)), http_(std::make_unique<httplib::Server>()) {
  const int threads = config_.threads;
  http_->new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<size_t>(threads)); };
  http_->set_post_routing_handler([](const httplib::Request&, httplib::Response& res) {
    res.set_header(kVersionHeader, kApiVersion);
  });
  routes();
  if (config_.static_dir && !http_->set_mount_point("/", config_.static_dir->string()))
    throw Error(ErrorCode::IoError, "static directory not found: " + config_.static_dir->string(), config_.static_dir->string());
}

WorkbenchServer::~WorkbenchServer() { stop(); }

int WorkbenchServer::bind() {
  int port = config_.port;
  if (port == 0) port = http_->bind_to_any_port(config_.host);
  else if (!http_->bind_to_port(config_.host, port)) port = -1;
  if (port < 0) throw Error(ErrorCode::BindError, "cannot bind " + config_.host + ":" + std::to_string(config_.port));
  config_.port = port;
  return port;
}

void WorkbenchServer::serve() { http_->listen_after_bind(); }

void WorkbenchServer::stop() {
  if (http_) http_->stop();
}

bool WorkbenchServer::running() const { return http_->is_running(); }

fs::path WorkbenchServer::project_dir(const std::string& id) const {
  if (!std::regex_match(id, kProjectId)) throw Error(ErrorCode::InvalidArgument, "invalid project id '" + id + "'", "/id");
  return config_.root / id;
}

std::mutex& WorkbenchServer::project_mutex(const std::string& id) {
  std::lock_guard lock(mutexes_guard_);
  auto& m = project_mutexes_[id];
  if (!m) m = std::make_unique<std::mutex>();
  return *m;
}

void WorkbenchServer::routes() {
  auto& s = *http_;

  // Opens the project named by the first path capture.
  const auto open = [this](const httplib::Request& req) {
    const auto dir = project_dir(req.matches[1]);
    if (!Project::exists(dir)) throw Error(ErrorCode::NotFound, "no project '" + std::string(req.matches[1]) + "'", "/id");
    return Project::open(dir);
  };

  // Submits one event under the per-project writer mutex and replies with
  // its report.
  const auto mutate = [this, open](const httplib::Request& req, httplib::Response& res, const std::string& type, Json params,
                                   int status = 200) {
    const std::string id = req.matches[1];
    std::lock_guard lock(project_mutex(id));
    auto project = open(req);
    const auto out = project.submit(type, std::move(params), services_(project.config()), if_match(req));
    set_etag(res, project);
    send_json(res, status, out["report"]);
  };

  s.Get("/api/health", guarded([](const httplib::Request&, httplib::Response& res) {
          send_json(res, 200, Json{{"status", "ok"}, {"api_version", kApiVersion}});
        }));

  s.Post("/api/g1/weights", guarded([](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           CriteriaSet criteria = default_criteria();
           if (body.contains("criteria")) {
             criteria = criteria_from_json(body["criteria"], "/criteria");
             body.erase("criteria");
           }
           const auto j = judgment_from_json(body, "");
           send_json(res, 200, Json{{"weights", g1_weights(j, criteria)}});
         }));

  s.Get("/api/projects", guarded([this](const httplib::Request&, httplib::Response& res) {
          Json out = Json::array();
          std::vector<fs::path> dirs;
          if (fs::is_directory(config_.root))
            for (const auto& e : fs::directory_iterator(config_.root))
              if (e.is_directory() && Project::exists(e.path())) dirs.push_back(e.path());
          std::sort(dirs.begin(), dirs.end());
          for (const auto& d : dirs) {
            try {
              out.push_back(project_summary(Project::open(d).state()));
            } catch (const Error& e) {
              out.push_back(Json{{"id", d.filename().string()}, {"error", error_envelope(e)}});
            }
          }
          send_json(res, 200, out);
        }));

  s.Post("/api/projects", guarded([this](const httplib::Request& req, httplib::Response& res) {
           const auto body = body_json(req);
           schema::allow_keys(body, "", {"id", "name", "kb", "config"});
           const auto id = schema::get_string(body, "id", "");
           const auto dir = project_dir(id);
           std::lock_guard lock(project_mutex(id));
           std::optional<EngineeringKB> kb;
           if (body.contains("kb")) kb = kb_from_json(body["kb"], "/kb");
           ProjectConfig cfg;
           if (body.contains("config")) cfg = config_from_json(body["config"], "/config");
           auto p = Project::create(dir, body.contains("name") ? schema::get_string(body, "name", "") : id, kb, cfg);
           set_etag(res, p);
           send_json(res, 201, project_summary(p.state()));
         }));

  s.Get(R"(/api/projects/([^/]+))", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          set_etag(res, p);
          send_json(res, 200, project_summary(p.state()));
        }));

  s.Patch(R"(/api/projects/([^/]+))", guarded([mutate](const httplib::Request& req, httplib::Response& res) {
            const auto body = body_json(req);
            schema::allow_keys(body, "", {"name"});
            mutate(req, res, "project.rename", body);
          }));

  s.Delete(R"(/api/projects/([^/]+))", guarded([this, open](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             std::lock_guard lock(project_mutex(id));
             auto p = open(req);
             if (const auto expected = if_match(req); expected && *expected != p.state().head)
               throw Error(ErrorCode::Conflict, "project head changed", "/head");
             fs::remove_all(p.dir());
             res.status = 204;
           }));

  s.Get(R"(/api/projects/([^/]+)/state)", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          set_etag(res, p);
          send_json(res, 200, to_json(p.state()));
        }));

  s.Get(R"(/api/projects/([^/]+)/events)", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          Json out = Json::array();
          for (const auto& e : p.events()) out.push_back(to_json(e));
          set_etag(res, p);
          send_json(res, 200, out);
        }));

  s.Get(R"(/api/projects/([^/]+)/export)", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          set_etag(res, p);
          send_json(res, 200, p.export_bundle());
        }));

  s.Put(R"(/api/projects/([^/]+)/kb)", guarded([mutate](const httplib::Request& req, httplib::Response& res) {
          mutate(req, res, "kb.set", Json{{"kb", body_json(req)}});
        }));

  s.Post(R"(/api/projects/([^/]+)/documents)", guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           body["stage"] = "Ingested";
           mutate(req, res, "stage.run", body);
         }));

  s.Post(R"(/api/projects/([^/]+)/stages/([^/]+)/run)",
         guarded([this, mutate, open](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           body["stage"] = std::string(to_string(stage_from_string(req.matches[2].str())));
           const bool async = req.has_param("async") && req.get_param_value("async") != "0" &&
                              req.get_param_value("async") != "false";
           if (!async) return mutate(req, res, "stage.run", body);

           const std::string id = req.matches[1];
           open(req);  // 404 before queueing
           const auto expected = if_match(req);
           const auto desc = "stage " + body["stage"].get<std::string>();
           const auto job = jobs_.start(id, desc, [this, id, body, expected](const CancelFlag& cancel) {
             std::lock_guard lock(project_mutex(id));
             auto project = Project::open(project_dir(id));
             return project.submit("stage.run", body, services_(project.config()), expected, &cancel)["report"];
           });
           send_json(res, 202, to_json(*jobs_.get(job)));
         }));

  s.Get(R"(/api/projects/([^/]+)/review/batches)", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          Json out = Json::array();
          for (const auto& b : p.state().batches) out.push_back(to_json(b));
          set_etag(res, p);
          send_json(res, 200, out);
        }));

  s.Get(R"(/api/projects/([^/]+)/review/batches/(\d+))", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          const auto n = std::stoull(req.matches[2]);
          for (const auto& b : p.state().batches)
            if (b.batch_no == n) {
              set_etag(res, p);
              return send_json(res, 200, to_json(b));
            }
          throw Error(ErrorCode::NotFound, "no review batch " + std::to_string(n), "/batch_no");
        }));

  s.Post(R"(/api/projects/([^/]+)/review/batches/(\d+)/verdicts)",
         guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           schema::allow_keys(body, "", {"verdicts"});
           body["batch_no"] = std::stoull(req.matches[2]);
           mutate(req, res, "review.verdicts", body);
         }));

  s.Post(R"(/api/projects/([^/]+)/review/relabel)", guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           mutate(req, res, "review.relabel", Json::object());
         }));

  s.Post(R"(/api/projects/([^/]+)/samples)", guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           mutate(req, res, "samples.generate", body_json(req));
         }));

  s.Get(R"(/api/projects/([^/]+)/frames)", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          Json out = Json::array();
          for (const auto& f : p.state().frames) out.push_back(to_json(f));
          set_etag(res, p);
          send_json(res, 200, out);
        }));

  s.Post(R"(/api/projects/([^/]+)/frames/validate)", guarded([](const httplib::Request& req, httplib::Response& res) {
           const auto frame = frame_from_json(body_json(req), "");
           Json out = Json::array();
           for (const auto& v : validate_frame(frame)) out.push_back(to_json(v));
           send_json(res, 200, Json{{"valid", out.empty()}, {"violations", out}});
         }));

  s.Get(R"(/api/projects/([^/]+)/frames/([^/]+))", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          for (const auto& f : p.state().frames)
            if (f.id == req.matches[2]) {
              set_etag(res, p);
              return send_json(res, 200, to_json(f));
            }
          throw Error(ErrorCode::NotFound, "no frame '" + req.matches[2].str() + "'", "/frames");
        }));

  s.Put(R"(/api/projects/([^/]+)/frames/([^/]+))", guarded([mutate](const httplib::Request& req, httplib::Response& res) {
          const auto body = body_json(req);
          if (!body.contains("id") || body["id"] != req.matches[2].str())
            throw Error(ErrorCode::InvalidArgument, "frame id must match the URL", "/id");
          mutate(req, res, "frame.put", Json{{"frame", body}});
        }));

  s.Post(R"(/api/projects/([^/]+)/inversion)", guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           body["stage"] = "Inverted";
           mutate(req, res, "stage.run", body);
         }));

  s.Get(R"(/api/projects/([^/]+)/inversions)", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          Json out = Json::array();
          for (const auto& r : p.state().inversions) out.push_back(to_json(r));
          set_etag(res, p);
          send_json(res, 200, out);
        }));

  s.Post(R"(/api/projects/([^/]+)/inversions/([^/]+)/waive)",
         guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           schema::allow_keys(body, "", {"terms"});
           body["id"] = req.matches[2].str();
           mutate(req, res, "inversion.waive", body);
         }));

  s.Post(R"(/api/projects/([^/]+)/screening/verdicts)",
         guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           schema::allow_keys(body, "", {"verdicts"});
           mutate(req, res, "screen.verdicts", body);
         }));

  s.Post(R"(/api/projects/([^/]+)/decision/g1-judgment)",
         guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           mutate(req, res, "decision.judgment", body_json(req));
         }));

  s.Post(R"(/api/projects/([^/]+)/decision/manual-scores)",
         guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           schema::allow_keys(body, "", {"scores"});
           mutate(req, res, "decision.manual_scores", body);
         }));

  s.Post(R"(/api/projects/([^/]+)/decision/problem)",
         guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           schema::allow_keys(body, "", {"problem", "target_environment"});
           mutate(req, res, "decision.problem", body);
         }));

  s.Post(R"(/api/projects/([^/]+)/decision/run)", guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           body["stage"] = "Ranked";
           mutate(req, res, "stage.run", body);
         }));

  s.Get(R"(/api/projects/([^/]+)/decision/result)", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          if (!p.state().decision) throw Error(ErrorCode::NotFound, "no decision run yet", "/decision");
          set_etag(res, p);
          send_json(res, 200, to_json(*p.state().decision));
        }));

  s.Get(R"(/api/projects/([^/]+)/decision/matrix\.csv)", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          if (!p.state().decision) throw Error(ErrorCode::NotFound, "no decision run yet", "/decision");
          set_etag(res, p);
          res.set_content(matrix_to_csv(p.state().decision->matrix), "text/csv");
        }));

  s.Post(R"(/api/projects/([^/]+)/clusters/run)", guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           body["stage"] = "Clustered";
           mutate(req, res, "stage.run", body);
         }));

  s.Get(R"(/api/projects/([^/]+)/clusters)", guarded([open](const httplib::Request& req, httplib::Response& res) {
          auto p = open(req);
          if (!p.state().clusters) throw Error(ErrorCode::NotFound, "no clusters yet", "/clusters");
          auto out = to_json(*p.state().clusters);
          out["assessments"] = p.state().cluster_assessments;
          set_etag(res, p);
          send_json(res, 200, out);
        }));

  s.Post(R"(/api/projects/([^/]+)/clusters/(\d+)/assessment)",
         guarded([mutate](const httplib::Request& req, httplib::Response& res) {
           auto body = body_json(req);
           schema::allow_keys(body, "", {"text"});
           body["cluster"] = std::stoull(req.matches[2]);
           mutate(req, res, "cluster.assessment", body);
         }));

  s.Get("/api/jobs", guarded([this](const httplib::Request&, httplib::Response& res) {
          Json out = Json::array();
          for (const auto& j : jobs_.list()) out.push_back(to_json(j));
          send_json(res, 200, out);
        }));

  s.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
          const auto info = jobs_.get(req.matches[1]);
          if (!info) throw Error(ErrorCode::NotFound, "no job '" + req.matches[1].str() + "'", "/jobs");
          send_json(res, 200, to_json(*info));
        }));

  s.Delete(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
             const std::string id = req.matches[1];
             if (!jobs_.get(id)) throw Error(ErrorCode::NotFound, "no job '" + id + "'", "/jobs");
             if (!jobs_.cancel(id)) throw Error(ErrorCode::Conflict, "job '" + id + "' already finished", "/jobs");
             send_json(res, 202, to_json(*jobs_.get(id)));
           }));

  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404)
      send_json(res, 404, Json{{"code", "NOT_FOUND"}, {"message", "no route for " + req.method + " " + req.path}, {"path", req.path}});
  });
}

}  // namespace bioinvert
