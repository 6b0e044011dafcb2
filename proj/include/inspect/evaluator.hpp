#pragma once

// Scoring of a human-recorded inspection path: its quality and travel budget
// are computed, the path is merged into the view graph, and the automated
// planner is run with the same budget for comparison.

#include <cmath>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "inspect/errors.hpp"
#include "inspect/geometry.hpp"
#include "inspect/planner.hpp"
#include "inspect/pose.hpp"
#include "inspect/quality.hpp"
#include "inspect/viewgraph.hpp"

namespace inspect {

struct PathSample {
  ViewPose pose;
  double time = 0.0;  // seconds
  std::vector<double> joints;  // optional joint snapshot; empty if none
};

struct RecordedPath {
  std::vector<PathSample> samples;

  bool empty() const noexcept { return samples.empty(); }
  std::size_t size() const noexcept { return samples.size(); }

  void validate() const {
    if (samples.empty()) throw ValidationError("recorded path has no poses");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      require_valid(samples[i].pose);
      if (i > 0 && samples[i].time < samples[i - 1].time) throw ValidationError("path timestamps must not decrease");
    }
  }

  std::vector<ViewPose> poses() const {
    std::vector<ViewPose> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.pose);
    return out;
  }
};

// Keeps the first sample, then every sample whose travel since the last kept
// one reaches `spacing`, and always the last sample. Travel is positional arc
// length plus `lever` times the rotation angle, i.e. how far the viewed spot
// at distance `lever` moves; lever = 0 gives pure positional spacing.
inline RecordedPath resample_path(const RecordedPath& path, double spacing, double lever = 0.0) {
  if (!(spacing > 0.0)) throw ArgumentError("resample spacing must be positive");
  if (!(lever >= 0.0)) throw ArgumentError("resample lever must be non-negative");
  RecordedPath out;
  if (path.empty()) return out;
  out.samples.push_back(path.samples.front());
  double travelled = 0.0;
  for (std::size_t i = 1; i < path.samples.size(); ++i) {
    const auto& a = path.samples[i - 1].pose;
    const auto& b = path.samples[i].pose;
    travelled += (b.position - a.position).norm() + lever * rotation_angle(a.orientation, b.orientation);
    const bool last = i + 1 == path.samples.size();
    if (travelled >= spacing || last) {
      out.samples.push_back(path.samples[i]);
      travelled = 0.0;
    }
  }
  return out;
}

// Budget of the path as executed: consecutive edge costs plus alpha per pose.
inline double recorded_path_cost(const RecordedPath& path, const CostModel& cost) {
  double total = 0.0;
  for (std::size_t i = 1; i < path.samples.size(); ++i) {
    total += edge_cost(path.samples[i - 1].pose, path.samples[i].pose, cost.beta);
  }
  return total + cost.alpha * static_cast<double>(path.samples.size());
}

// V+ = V u X_u. User poses are appended after the original ones; every
// (original, user) pair closer than d_link gets an edge, and consecutive user
// poses are always linked.
inline ViewGraph augment_graph(const ViewGraph& graph, const RecordedPath& path, double d_link) {
  if (path.empty()) return graph;
  const std::size_t k = graph.size();
  std::vector<ViewPose> poses = graph.poses();
  std::vector<Edge> edges = graph.edges();
  for (const auto& s : path.samples) poses.push_back(s.pose);
  for (std::size_t u = 0; u < path.size(); ++u) {
    const auto& up = path.samples[u].pose;
    for (std::size_t j = 0; j < k; ++j) {
      if ((poses[j].position - up.position).norm() < d_link) {
        edges.push_back({j, k + u, edge_cost(poses[j], up, graph.beta())});
      }
    }
    if (u > 0) edges.push_back({k + u - 1, k + u, edge_cost(path.samples[u - 1].pose, up, graph.beta())});
  }
  ViewGraph out(std::move(poses), std::move(edges), graph.beta());
  out.warnings = graph.warnings;
  return out;
}

struct EvaluationParams {
  double spacing = 50.0;   // d_opt / 4
  double d_link = 300.0;   // 1.5 * d_opt
  double lever = 200.0;    // d_opt
  double kappa = kGreedyApproximation;
};

struct EvaluationReport {
  double user_f = 0.0;
  double user_cost = 0.0;
  std::size_t user_poses = 0;  // after resampling
  double gcb_f = 0.0;
  double gcb_plus_f = 0.0;
  double gcb_plus_cost = 0.0;
  double quality_ratio = 0.0;
  std::optional<double> opt_metric_user;
  std::optional<double> opt_metric_auto;
  bool user_exceeds_auto = false;
  std::vector<double> point_quality;  // accumulated over the user's poses
  std::vector<ViewPose> user_path;
  std::vector<ViewPose> auto_path;  // GCB+ visiting order
  std::vector<std::string> warnings;
};

// The scene the comparison runs in. `quality` holds the columns of `graph`'s
// poses; columns for the user's poses are computed here.
struct EvaluationScene {
  const TriangleMesh& mesh;
  const SurfacePointSet& points;
  const Sensor& sensor;
  const ViewGraph& graph;
  const QualityMatrix& quality;
  CostModel cost;
};

inline EvaluationReport evaluate(const RecordedPath& path, const EvaluationScene& scene,
                                 const EvaluationParams& params = {}) {
  path.validate();
  if (scene.quality.poses() != scene.graph.size()) throw ValidationError("quality matrix does not match graph");
  EvaluationReport report;

  const RecordedPath user = resample_path(path, params.spacing, params.lever);
  report.user_poses = user.size();
  report.user_path = user.poses();

  QualityMatrix user_columns(scene.points.size(), user.size());
  AccumulatedQuality acc(scene.points.size());
  {
    std::vector<std::vector<double>> cols(user.size());
    parallel_for(user.size(), [&](std::size_t u) {
      cols[u] = point_qualities(scene.mesh, scene.points, user.samples[u].pose, scene.sensor);
    });
    for (std::size_t u = 0; u < user.size(); ++u) {
      user_columns.set_column(u, cols[u]);
      accumulate_in_place(acc, user.samples[u].pose, cols[u]);
    }
  }
  report.user_f = acc.total();
  report.point_quality = std::move(acc.values);
  report.user_cost = recorded_path_cost(user, scene.cost);

  const ViewGraph augmented = augment_graph(scene.graph, user, params.d_link);
  QualityMatrix qm = scene.quality;
  qm.append_columns(user_columns);
  const PlanningProblem problem{augmented, qm, scene.cost, report.user_cost};
  const PlanSolution base = gcb(problem);
  const PlanSolution plus = gcb_plus(problem, base);
  report.gcb_f = base.f;
  report.gcb_plus_f = plus.f;
  report.gcb_plus_cost = plus.cost;
  for (auto i : plus.order) report.auto_path.push_back(augmented.poses()[i]);

  report.quality_ratio = plus.f > 0.0 ? report.user_f / plus.f : 0.0;
  report.user_exceeds_auto = report.quality_ratio > 1.0;
  if (base.f > 0.0) {
    report.opt_metric_user = opt_metric(report.user_f, base.f, params.kappa);
    report.opt_metric_auto = opt_metric(plus.f, base.f, params.kappa);
  } else {
    report.warnings.push_back("OPT metric undefined: automated solution has zero quality");
  }
  if (report.user_exceeds_auto) report.warnings.push_back("user path scores above the automated solution");
  report.warnings.insert(report.warnings.end(), scene.graph.warnings.begin(), scene.graph.warnings.end());
  return report;
}

// Pose sequences as OBJ polylines with per-vertex colour; the user path is
// red and the automated path blue.
inline void write_paths_obj(std::ostream& out, std::span<const ViewPose> user, std::span<const ViewPose> automated) {
  std::size_t base = 1;
  auto emit = [&](const char* name, std::span<const ViewPose> poses, const char* rgb) {
    if (poses.empty()) return;
    out << "o " << name << '\n';
    for (const auto& p : poses) {
      out << "v " << p.position.x() << ' ' << p.position.y() << ' ' << p.position.z() << ' ' << rgb << '\n';
    }
    if (poses.size() >= 2) {
      out << 'l';
      for (std::size_t i = 0; i < poses.size(); ++i) out << ' ' << base + i;
      out << '\n';
    }
    base += poses.size();
  };
  emit("user_path", user, "1 0 0");
  emit("auto_path", automated, "0 0 1");
}

}  // namespace inspect
