#pragma once

// JSON encodings for poses, graphs, quality matrices, plans, reports,
// recorded paths and kinematic chains. Top-level documents carry "schema": 1.

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "inspect/evaluator.hpp"
#include "inspect/kinematics.hpp"
#include "inspect/planner.hpp"
#include "inspect/quality.hpp"
#include "inspect/viewgraph.hpp"
#include "inspect/visibility.hpp"

namespace inspect {

using Json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

namespace detail {

inline Vec3 vec3_from(const Json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected a 3-element array");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline Json vec3_to(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }

}  // namespace detail

inline Json pose_to_json(const ViewPose& p) {
  const auto& q = p.orientation;
  return {{"p", detail::vec3_to(p.position)}, {"q", Json::array({q.w(), q.x(), q.y(), q.z()})}};
}

// Quaternions are normalised on read; anything further than 1e-6 from unit
// length is rejected.
inline ViewPose pose_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("p") || !j.contains("q")) throw ValidationError("pose needs 'p' and 'q'");
  const auto& q = j.at("q");
  if (!q.is_array() || q.size() != 4) throw ValidationError("pose 'q' must be [w, x, y, z]");
  ViewPose p{detail::vec3_from(j.at("p")), Quat(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(), q[3].get<double>())};
  const double n = p.orientation.norm();
  if (!std::isfinite(n) || std::abs(n - 1.0) > 1e-6) throw ValidationError("pose quaternion is not unit length");
  p.orientation.normalize();
  require_valid(p);
  return p;
}

inline Json camera_to_json(const CameraIntrinsics& c) {
  return {{"fov_x", c.fov_x}, {"fov_y", c.fov_y}, {"width", c.width}, {"height", c.height},
          {"near", c.near_clip}, {"far", c.far_clip}};
}

inline CameraIntrinsics camera_from_json(const Json& j) {
  CameraIntrinsics c;
  c.fov_x = j.value("fov_x", c.fov_x);
  c.fov_y = j.value("fov_y", c.fov_y);
  c.width = j.value("width", c.width);
  c.height = j.value("height", c.height);
  c.near_clip = j.value("near", c.near_clip);
  c.far_clip = j.value("far", c.far_clip);
  c.validate();
  return c;
}

inline Json model_to_json(const QualityModel& m) {
  Json j{{"kind", to_string(m.kind)}, {"d_opt", m.d_opt}, {"sigma", m.sigma}};
  if (m.d_ref) j["d_ref"] = *m.d_ref;
  return j;
}

inline QualityModel model_from_json(const Json& j) {
  QualityModel m;
  m.kind = quality_kind_from_string(j.value("kind", std::string("angle-distance")));
  m.d_opt = j.value("d_opt", m.d_opt);
  m.sigma = j.value("sigma", m.sigma);
  if (j.contains("d_ref")) m.d_ref = j.at("d_ref").get<double>();
  m.validate();
  return m;
}

inline Json cost_to_json(const CostModel& c) { return {{"alpha", c.alpha}, {"beta", c.beta}}; }

inline CostModel cost_from_json(const Json& j) {
  CostModel c;
  c.alpha = j.value("alpha", c.alpha);
  c.beta = j.value("beta", c.beta);
  c.validate();
  return c;
}

// {poses: [{p, q}], edges: [[i, j, cost]], beta}
inline Json graph_to_json(const ViewGraph& g) {
  Json poses = Json::array();
  for (const auto& p : g.poses()) poses.push_back(pose_to_json(p));
  Json edges = Json::array();
  for (const auto& e : g.edges()) edges.push_back(Json::array({e.from, e.to, e.cost}));
  return {{"schema", kSchemaVersion}, {"poses", poses}, {"edges", edges}, {"beta", g.beta()}};
}

inline ViewGraph graph_from_json(const Json& j) {
  std::vector<ViewPose> poses;
  for (const auto& p : j.at("poses")) poses.push_back(pose_from_json(p));
  std::vector<Edge> edges;
  for (const auto& e : j.at("edges")) {
    if (!e.is_array() || e.size() != 3) throw ValidationError("graph edge must be [i, j, cost]");
    edges.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>(), e[2].get<double>()});
  }
  return ViewGraph(std::move(poses), std::move(edges), j.value("beta", 0.01));
}

// {n, k, entries: [[i, j, q]]}, entries ordered by pose then point.
inline Json quality_matrix_to_json(const QualityMatrix& qm) {
  Json entries = Json::array();
  for (std::size_t j = 0; j < qm.poses(); ++j) {
    for (const auto& e : qm.column(j)) entries.push_back(Json::array({e.point, j, e.q}));
  }
  return {{"schema", kSchemaVersion}, {"n", qm.points()}, {"k", qm.poses()}, {"entries", entries}};
}

inline QualityMatrix quality_matrix_from_json(const Json& j) {
  QualityMatrix qm(j.at("n").get<std::size_t>(), j.at("k").get<std::size_t>());
  for (const auto& e : j.at("entries")) {
    const double q = e.at(2).get<double>();
    if (!(q > 0.0 && q <= 1.0)) throw ValidationError("quality entries must lie in (0, 1]");
    qm.set(e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>(), q);
  }
  return qm;
}

inline Json solution_to_json(const PlanSolution& s) {
  Json log = Json::array();
  for (const auto& st : s.log) {
    log.push_back({{"pose", st.pose}, {"gain", st.gain}, {"cost_step", st.cost_step}, {"f", st.f_after},
                   {"cost", st.cost_after}});
  }
  return {{"schema", kSchemaVersion}, {"indices", s.indices()}, {"order", s.order}, {"f", s.f},
          {"cost", s.cost}, {"budget", s.budget}, {"log", log}};
}

inline PlanSolution solution_from_json(const Json& j) {
  PlanSolution s;
  s.order = j.at("order").get<std::vector<std::size_t>>();
  s.f = j.at("f").get<double>();
  s.cost = j.at("cost").get<double>();
  s.budget = j.at("budget").get<double>();
  for (const auto& st : j.value("log", Json::array())) {
    s.log.push_back({st.at("pose").get<std::size_t>(), st.at("gain").get<double>(), st.at("cost_step").get<double>(),
                     st.at("f").get<double>(), st.at("cost").get<double>()});
  }
  return s;
}

inline Json path_to_json(const RecordedPath& path) {
  Json samples = Json::array();
  for (const auto& s : path.samples) {
    Json js = pose_to_json(s.pose);
    js["t"] = s.time;
    if (!s.joints.empty()) js["joints"] = s.joints;
    samples.push_back(js);
  }
  return {{"schema", kSchemaVersion}, {"poses", samples}};
}

inline RecordedPath path_from_json(const Json& j) {
  RecordedPath path;
  for (const auto& js : j.at("poses")) {
    PathSample s;
    s.pose = pose_from_json(js);
    s.time = js.value("t", path.samples.empty() ? 0.0 : path.samples.back().time);
    if (js.contains("joints")) s.joints = js.at("joints").get<std::vector<double>>();
    path.samples.push_back(std::move(s));
  }
  return path;
}

inline Json report_to_json(const EvaluationReport& r) {
  Json user = Json::array(), automated = Json::array();
  for (const auto& p : r.user_path) user.push_back(pose_to_json(p));
  for (const auto& p : r.auto_path) automated.push_back(pose_to_json(p));
  return {{"schema", kSchemaVersion},
          {"user_f", r.user_f},
          {"user_cost", r.user_cost},
          {"user_poses", r.user_poses},
          {"gcb_f", r.gcb_f},
          {"gcb_plus_f", r.gcb_plus_f},
          {"gcb_plus_cost", r.gcb_plus_cost},
          {"quality_ratio", r.quality_ratio},
          {"opt_metric_user", r.opt_metric_user ? Json(*r.opt_metric_user) : Json(nullptr)},
          {"opt_metric_auto", r.opt_metric_auto ? Json(*r.opt_metric_auto) : Json(nullptr)},
          {"user_exceeds_auto", r.user_exceeds_auto},
          {"point_quality", r.point_quality},
          {"user_path", user},
          {"auto_path", automated},
          {"warnings", r.warnings}};
}

namespace detail {

inline Json isometry_to_json(const Eigen::Isometry3d& t) {
  Quat q(t.rotation());
  return pose_to_json(ViewPose{t.translation(), q.normalized()});
}

inline Eigen::Isometry3d isometry_from_json(const Json& j) {
  const auto p = pose_from_json(j);
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = p.orientation.toRotationMatrix();
  t.translation() = p.position;
  return t;
}

}  // namespace detail

// {joints: [{type, axis, origin, limits}], tcp}
inline Json chain_to_json(const KinematicChain& c) {
  Json joints = Json::array();
  for (const auto& jt : c.joints) {
    joints.push_back({{"type", jt.type == JointType::Revolute ? "revolute" : "prismatic"},
                      {"axis", detail::vec3_to(jt.axis)},
                      {"origin", detail::isometry_to_json(jt.origin)},
                      {"limits", Json::array({jt.lower, jt.upper})}});
  }
  return {{"name", c.name}, {"extra_axis", c.extra_axis}, {"base", detail::isometry_to_json(c.base)},
          {"joints", joints}, {"tcp", detail::isometry_to_json(c.tcp)}};
}

inline KinematicChain chain_from_json(const Json& j) {
  if (j.is_string()) {
    auto preset = presets::by_name(j.get<std::string>());
    if (!preset) throw ValidationError("unknown kinematic preset '" + j.get<std::string>() + "'");
    return *preset;
  }
  KinematicChain c;
  c.name = j.value("name", std::string());
  c.extra_axis = j.value("extra_axis", false);
  for (const auto& jj : j.at("joints")) {
    Joint jt;
    const auto type = jj.at("type").get<std::string>();
    if (type != "revolute" && type != "prismatic") throw ValidationError("unknown joint type '" + type + "'");
    jt.type = type == "revolute" ? JointType::Revolute : JointType::Prismatic;
    jt.axis = detail::vec3_from(jj.at("axis"));
    jt.origin = detail::isometry_from_json(jj.at("origin"));
    jt.lower = jj.at("limits").at(0).get<double>();
    jt.upper = jj.at("limits").at(1).get<double>();
    c.joints.push_back(jt);
  }
  if (j.contains("base")) c.base = detail::isometry_from_json(j.at("base"));
  if (j.contains("tcp")) c.tcp = detail::isometry_from_json(j.at("tcp"));
  c.validate();
  return c;
}

inline Json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open " + file.string());
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw ValidationError("invalid JSON in " + file.string() + ": " + e.what());
  }
}

inline void write_json_file(const std::filesystem::path& file, const Json& j) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

}  // namespace inspect
