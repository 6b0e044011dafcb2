#pragma once

// JSON-over-HTTP front end for SessionService, plus a chunked NDJSON stream
// of quality delta batches.
//
//   GET  /scenes                        scene list
//   GET  /scenes/{name}/mesh            vertices, triangles, normals
//   POST /sessions                      {scene, mode?, joints?} -> {id}
//   GET  /sessions/{id}                 state and full accumulation vector
//   POST /sessions/{id}/pose            {pose | joint_delta | extra_axis, t?} -> delta
//   POST /sessions/{id}/recording       {action: start|stop|scrub, fraction?}
//   POST /sessions/{id}/paths           {poses: [...]} -> {index}
//   GET  /sessions/{id}/paths/{k}       stored path
//   POST /sessions/{id}/evaluate        {path, async?} -> 202 {job} | 200 report
//   GET  /jobs/{job}                    {state, report?, error?}
//   GET  /sessions/{id}/deltas?since=n  {seq, batches}
//   GET  /sessions/{id}/stream?since=n  NDJSON batches; follow=0 ends after backlog
//   POST /plan                          {scene, budget?} -> solution
//
// Errors: 404 unknown ids, 400 malformed input, 409 state conflicts,
// 422 infeasible path or undefined metric.

#include <chrono>
#include <functional>
#include <string>

// Must precede httplib.h (its <resolv.h> defines `_res`).
#include "inspect/json_io.hpp"
#include "inspect/session.hpp"

#include "httplib.h"

namespace inspect {

inline Json changes_to_json(const std::vector<QualityChange>& changes) {
  Json out = Json::array();
  for (const auto& c : changes) out.push_back(Json::array({c.point, c.quality}));
  return out;
}

inline Json batch_to_json(const DeltaBatch& b) { return {{"seq", b.seq}, {"changes", changes_to_json(b.changes)}}; }

inline Json pose_update_to_json(const PoseUpdate& u) {
  return {{"seq", u.seq},          {"delta", changes_to_json(u.delta)}, {"visible", u.visible},
          {"ik_ok", u.ik_ok},      {"pose", pose_to_json(u.pose)},      {"joints", u.joints}};
}

inline PoseCommand pose_command_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("pose update body must be an object");
  PoseCommand c;
  if (j.contains("pose")) c.pose = pose_from_json(j.at("pose"));
  if (j.contains("joint_delta")) c.joint_delta = j.at("joint_delta").get<JointState>();
  if (j.contains("extra_axis")) c.extra_axis = j.at("extra_axis").get<double>();
  if (j.contains("t")) c.time = j.at("t").get<double>();
  return c;
}

inline Json recording_status_to_json(const RecordingStatus& s) {
  return {{"recording", s.recording},   {"samples", s.samples}, {"stored_paths", s.stored_paths},
          {"path", s.path ? Json(*s.path) : Json(nullptr)}, {"pose", pose_to_json(s.pose)},
          {"joints", s.joints},         {"warnings", s.warnings}};
}

inline Json session_info_to_json(const SessionInfo& i) {
  return {{"id", i.id},
          {"scene", i.scene},
          {"mode", to_string(i.mode)},
          {"pose", pose_to_json(i.pose)},
          {"joints", i.joints},
          {"recording", i.recording},
          {"samples", i.samples},
          {"stored_paths", i.stored_paths},
          {"seq", i.seq},
          {"total_quality", i.total_quality},
          {"quality", i.quality}};
}

inline Json job_to_json(const EvaluationJob& j) {
  Json out{{"job", j.id}, {"session", j.session}, {"state", to_string(j.state)}};
  if (j.report) out["report"] = report_to_json(*j.report);
  if (!j.error.empty()) out["error"] = j.error;
  return out;
}

inline Json mesh_to_json(const TriangleMesh& mesh) {
  Json v = Json::array(), n = Json::array(), t = Json::array();
  for (const auto& p : mesh.vertices()) v.push_back(detail::vec3_to(p));
  for (const auto& p : mesh.normals()) n.push_back(detail::vec3_to(p));
  for (const auto& f : mesh.triangles()) t.push_back(Json::array({f[0], f[1], f[2]}));
  return {{"schema", kSchemaVersion}, {"vertices", v}, {"normals", n}, {"triangles", t}};
}

namespace detail {

inline int status_for(const std::exception_ptr& e, std::string& message) {
  try {
    std::rethrow_exception(e);
  } catch (const NotFoundError& x) {
    message = x.what();
    return 404;
  } catch (const ConflictError& x) {
    message = x.what();
    return 409;
  } catch (const InfeasiblePathError& x) {
    message = x.what();
    return 422;
  } catch (const UndefinedMetricError& x) {
    message = x.what();
    return 422;
  } catch (const ValidationError& x) {
    message = x.what();
    return 400;
  } catch (const ArgumentError& x) {
    message = x.what();
    return 400;
  } catch (const Json::exception& x) {
    message = std::string("malformed JSON: ") + x.what();
    return 400;
  } catch (const std::exception& x) {
    message = x.what();
    return 500;
  }
}

inline Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  try {
    return Json::parse(req.body);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("request body is not JSON: ") + e.what());
  }
}

inline void send(httplib::Response& res, const Json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline std::uint64_t query_u64(const httplib::Request& req, const char* key, std::uint64_t fallback) {
  if (!req.has_param(key)) return fallback;
  try {
    return std::stoull(req.get_param_value(key));
  } catch (const std::exception&) {
    throw ValidationError(std::string("query parameter '") + key + "' must be a non-negative integer");
  }
}

}  // namespace detail

// Installs every route on `server`. The service must outlive the server.
inline void register_routes(httplib::Server& server, SessionService& svc) {
  using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
  auto guarded = [](Handler h) {
    return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
      try {
        h(req, res);
      } catch (...) {
        std::string message;
        const int status = detail::status_for(std::current_exception(), message);
        detail::send(res, {{"error", message}, {"status", status}}, status);
      }
    };
  };

  server.Get("/scenes", guarded([&svc](const httplib::Request&, httplib::Response& res) {
    Json out = Json::array();
    for (const auto& name : svc.scene_names()) {
      const auto sc = svc.scene(name);
      out.push_back({{"name", name},
                     {"points", sc->points.size()},
                     {"poses", sc->graph.size()},
                     {"default_budget", sc->config.default_budget},
                     {"chain", sc->config.chain ? Json(sc->config.chain->name) : Json(nullptr)},
                     {"extra_axis", sc->config.chain && sc->config.chain->extra_axis}});
    }
    detail::send(res, out);
  }));

  server.Get(R"(/scenes/([^/]+)/mesh)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    detail::send(res, mesh_to_json(svc.scene(req.matches[1])->mesh));
  }));

  server.Post("/sessions", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const Json body = detail::parse_body(req);
    const auto scene = body.at("scene").get<std::string>();
    const auto mode = control_mode_from_string(body.value("mode", std::string("free-camera")));
    std::optional<JointState> joints;
    if (body.contains("joints")) joints = body.at("joints").get<JointState>();
    const auto id = svc.create_session(scene, mode, joints);
    detail::send(res, {{"id", id}, {"session", session_info_to_json(svc.info(id))}}, 201);
  }));

  server.Get(R"(/sessions/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    detail::send(res, session_info_to_json(svc.info(req.matches[1])));
  }));

  server.Post(R"(/sessions/([^/]+)/pose)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    detail::send(res, pose_update_to_json(svc.update_pose(req.matches[1], pose_command_from_json(detail::parse_body(req)))));
  }));

  server.Post(R"(/sessions/([^/]+)/recording)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const Json body = detail::parse_body(req);
    const auto action = recording_action_from_string(body.at("action").get<std::string>());
    std::optional<double> fraction;
    if (body.contains("fraction")) fraction = body.at("fraction").get<double>();
    detail::send(res, recording_status_to_json(svc.recording(req.matches[1], action, fraction)));
  }));

  server.Post(R"(/sessions/([^/]+)/paths)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const auto index = svc.add_path(req.matches[1], path_from_json(detail::parse_body(req)));
    detail::send(res, {{"index", index}}, 201);
  }));

  server.Get(R"(/sessions/([^/]+)/paths/(\d+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    detail::send(res, path_to_json(svc.path(req.matches[1], std::stoull(req.matches[2]))));
  }));

  server.Post(R"(/sessions/([^/]+)/evaluate)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const Json body = detail::parse_body(req);
    const auto index = body.value("path", std::size_t{0});
    if (body.value("async", true)) {
      const auto job = svc.submit_evaluation(req.matches[1], index);
      detail::send(res, {{"job", job}, {"status", "/jobs/" + job}}, 202);
    } else {
      detail::send(res, report_to_json(svc.evaluate(req.matches[1], index)));
    }
  }));

  server.Get(R"(/jobs/([^/]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    detail::send(res, job_to_json(svc.job(req.matches[1])));
  }));

  server.Get(R"(/sessions/([^/]+)/deltas)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const auto batches = svc.deltas_since(req.matches[1], detail::query_u64(req, "since", 0));
    Json out = Json::array();
    for (const auto& b : batches) out.push_back(batch_to_json(b));
    detail::send(res, {{"seq", svc.info(req.matches[1]).seq}, {"batches", out}});
  }));

  server.Get(R"(/sessions/([^/]+)/stream)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    svc.info(id);  // 404 before the stream starts
    const bool follow = detail::query_u64(req, "follow", 1) != 0;
    auto since = std::make_shared<std::uint64_t>(detail::query_u64(req, "since", 0));
    res.set_chunked_content_provider(
        "application/x-ndjson", [&svc, id, follow, since](std::size_t, httplib::DataSink& sink) {
          const auto batches = follow ? svc.wait_deltas(id, *since, std::chrono::milliseconds(500))
                                      : svc.deltas_since(id, *since);
          for (const auto& b : batches) {
            const auto line = batch_to_json(b).dump() + "\n";
            if (!sink.write(line.data(), line.size())) return false;
            *since = b.seq;
          }
          if (!follow || svc.stopping()) sink.done();
          return true;
        });
  }));

  server.Post("/plan", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
    const Json body = detail::parse_body(req);
    const auto name = body.at("scene").get<std::string>();
    const auto sc = svc.scene(name);
    const double budget = body.value("budget", sc->config.default_budget);
    const auto sol = svc.plan(name, budget);
    Json out = solution_to_json(sol);
    Json poses = Json::array();
    for (auto i : sol.order) poses.push_back(pose_to_json(sc->graph.poses()[i]));
    out["poses"] = poses;
    detail::send(res, out);
  }));
}

}  // namespace inspect
