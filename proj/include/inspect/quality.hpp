#pragma once

// Measurement quality Q, the sparse quality matrix q_ij, the set objective
// f(X) = sum_m max_{x in X} q_mx and the running max-accumulation used by the
// interactive view.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "inspect/errors.hpp"
#include "inspect/geometry.hpp"
#include "inspect/parallel.hpp"
#include "inspect/pose.hpp"
#include "inspect/visibility.hpp"

namespace inspect {

enum class QualityKind { AngleDistance, PerceivedArea, Intensity };

inline const char* to_string(QualityKind k) {
  switch (k) {
    case QualityKind::AngleDistance: return "angle-distance";
    case QualityKind::PerceivedArea: return "perceived-area";
    case QualityKind::Intensity: return "intensity";
  }
  return "?";
}

inline QualityKind quality_kind_from_string(const std::string& s) {
  if (s == "angle-distance") return QualityKind::AngleDistance;
  if (s == "perceived-area") return QualityKind::PerceivedArea;
  if (s == "intensity") return QualityKind::Intensity;
  throw ValidationError("unknown quality model '" + s + "'");
}

struct QualityModel {
  QualityKind kind = QualityKind::AngleDistance;
  double d_opt = 200.0;  // ideal measurement distance, mm
  double sigma = 100.0;  // distance tolerance, mm
  std::optional<double> d_ref;  // perceived-area reference distance; defaults to d_opt

  void validate() const {
    if (!(d_opt > 0.0) || !(sigma > 0.0)) throw ValidationError("quality model needs d_opt > 0 and sigma > 0");
    if (d_ref && !(*d_ref > 0.0)) throw ValidationError("quality model needs d_ref > 0");
  }

  double reference_distance() const { return d_ref.value_or(d_opt); }
};

// Q(d, theta) for distance d (mm) and incidence angle theta (rad, 0 = camera
// on the surface normal). Zero for theta >= pi/2.
inline double eval_q(const QualityModel& model, double d, double theta) {
  if (!std::isfinite(d) || !std::isfinite(theta)) throw ArgumentError("eval_q: non-finite input");
  if (!(d > 0.0)) throw ArgumentError("eval_q: distance must be positive");
  if (theta < 0.0 || theta > std::numbers::pi) throw ArgumentError("eval_q: angle outside [0, pi]");
  if (theta >= std::numbers::pi / 2.0) return 0.0;
  const double c = std::cos(theta);
  switch (model.kind) {
    case QualityKind::AngleDistance: {
      const double e = (d - model.d_opt) / model.sigma;
      return c * std::exp(-e * e);
    }
    case QualityKind::PerceivedArea: {
      const double r = model.reference_distance() / d;
      return std::clamp(c * r * r, 0.0, 1.0);
    }
    case QualityKind::Intensity:
      return std::clamp(c, 0.0, 1.0);
  }
  return 0.0;
}

// Everything needed to turn a pose into per-point qualities.
struct Sensor {
  CameraIntrinsics camera;
  QualityModel model;
  double depth_bias = kDefaultDepthBias;
};

// Q of one point seen from `eye`, ignoring occlusion.
inline double point_quality(const QualityModel& model, const Vec3& point, const Vec3& normal, const Vec3& eye) {
  const Vec3 to_eye = eye - point;
  const double d = to_eye.norm();
  if (!(d > 0.0)) return 0.0;
  const double cos_theta = std::clamp(normal.dot(to_eye) / d, -1.0, 1.0);
  return eval_q(model, d, std::acos(cos_theta));
}

// Per-point quality at one pose given a visibility mask; zero where masked out.
inline std::vector<double> qualities_from_mask(const SurfacePointSet& points, const ViewPose& pose,
                                               const QualityModel& model, const std::vector<bool>& visible) {
  std::vector<double> q(points.size(), 0.0);
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (visible[i]) q[i] = point_quality(model, points.positions[i], points.normals[i], pose.position);
  }
  return q;
}

// Depth-buffer visibility followed by Q for every point.
inline std::vector<double> point_qualities(const TriangleMesh& mesh, const SurfacePointSet& points,
                                           const ViewPose& pose, const Sensor& sensor) {
  const auto depth = render_depth(mesh, pose, sensor.camera);
  const auto visible = visible_points(points, pose, sensor.camera, depth, sensor.depth_bias);
  return qualities_from_mask(points, pose, sensor.model, visible);
}

// Sparse n x k matrix, stored column-wise (one column per pose) with only
// nonzero entries, sorted by point index.
class QualityMatrix {
 public:
  struct Entry {
    std::uint32_t point;
    double q;
  };

  QualityMatrix() = default;
  QualityMatrix(std::size_t points, std::size_t poses) : n_(points), columns_(poses) {}

  std::size_t points() const noexcept { return n_; }
  std::size_t poses() const noexcept { return columns_.size(); }

  std::span<const Entry> column(std::size_t j) const { return columns_.at(j); }

  // Replaces column j from a dense vector; zeros are dropped.
  void set_column(std::size_t j, std::span<const double> dense) {
    if (dense.size() != n_) throw ArgumentError("column length does not match point count");
    auto& col = columns_.at(j);
    col.clear();
    for (std::size_t i = 0; i < dense.size(); ++i) {
      if (dense[i] > 0.0) col.push_back({static_cast<std::uint32_t>(i), std::min(dense[i], 1.0)});
    }
  }

  void set(std::size_t i, std::size_t j, double q) {
    if (i >= n_) throw ArgumentError("point index out of range");
    auto& col = columns_.at(j);
    auto it = std::lower_bound(col.begin(), col.end(), i, [](const Entry& e, std::size_t p) { return e.point < p; });
    if (it != col.end() && it->point == i) {
      if (q > 0.0) it->q = q; else col.erase(it);
    } else if (q > 0.0) {
      col.insert(it, {static_cast<std::uint32_t>(i), q});
    }
  }

  double at(std::size_t i, std::size_t j) const {
    const auto& col = columns_.at(j);
    auto it = std::lower_bound(col.begin(), col.end(), i, [](const Entry& e, std::size_t p) { return e.point < p; });
    return (it != col.end() && it->point == i) ? it->q : 0.0;
  }

  double column_sum(std::size_t j) const {
    double s = 0.0;
    for (const auto& e : columns_.at(j)) s += e.q;
    return s;
  }

  std::size_t nonzeros() const {
    std::size_t s = 0;
    for (const auto& c : columns_) s += c.size();
    return s;
  }

  // Appends the columns of `other` (same point count) after the existing ones.
  void append_columns(const QualityMatrix& other) {
    if (other.n_ != n_) throw ArgumentError("point count mismatch");
    columns_.insert(columns_.end(), other.columns_.begin(), other.columns_.end());
  }

  static QualityMatrix from_dense(const std::vector<std::vector<double>>& rows) {
    const std::size_t n = rows.size();
    const std::size_t k = n ? rows[0].size() : 0;
    QualityMatrix m(n, k);
    std::vector<double> col(n);
    for (std::size_t j = 0; j < k; ++j) {
      for (std::size_t i = 0; i < n; ++i) col[i] = rows[i].at(j);
      m.set_column(j, col);
    }
    return m;
  }

 private:
  std::size_t n_ = 0;
  std::vector<std::vector<Entry>> columns_;
};

// q_ij for every point and pose. Columns are computed in parallel.
inline QualityMatrix quality_matrix(const SurfacePointSet& points, std::span<const ViewPose> poses,
                                    const TriangleMesh& mesh, const Sensor& sensor) {
  QualityMatrix qm(points.size(), poses.size());
  std::vector<std::vector<double>> cols(poses.size());
  parallel_for(poses.size(), [&](std::size_t j) { cols[j] = point_qualities(mesh, points, poses[j], sensor); });
  for (std::size_t j = 0; j < poses.size(); ++j) qm.set_column(j, cols[j]);
  return qm;
}

// Per-point best quality over the poses in `selection`.
inline std::vector<double> best_per_point(const QualityMatrix& qm, std::span<const std::size_t> selection) {
  std::vector<double> best(qm.points(), 0.0);
  for (auto j : selection) {
    if (j >= qm.poses()) throw ArgumentError("pose index " + std::to_string(j) + " out of range");
    for (const auto& e : qm.column(j)) best[e.point] = std::max(best[e.point], e.q);
  }
  return best;
}

// f(X) = sum over points of the best quality any selected pose achieves.
inline double objective_f(const QualityMatrix& qm, std::span<const std::size_t> selection) {
  const auto best = best_per_point(qm, selection);
  double total = 0.0;
  for (double b : best) total += b;
  return total;
}

// Increase of f when pose j joins a selection whose per-point best is `best`.
inline double marginal_gain(const QualityMatrix& qm, std::span<const double> best, std::size_t j) {
  double gain = 0.0;
  for (const auto& e : qm.column(j)) {
    if (e.q > best[e.point]) gain += e.q - best[e.point];
  }
  return gain;
}

// Running per-point quality q_{m,t} = max(q_{m,t-1}, Q(m, x_t)).
struct AccumulatedQuality {
  std::vector<double> values;
  std::optional<ViewPose> last_pose;

  explicit AccumulatedQuality(std::size_t points = 0) : values(points, 0.0) {}

  double total() const {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
};

struct QualityChange {
  std::uint32_t point;
  double quality;

  bool operator==(const QualityChange&) const = default;
};

// Folds fresh per-point qualities into `acc` and returns the points whose value rose.
inline std::vector<QualityChange> accumulate_in_place(AccumulatedQuality& acc, const ViewPose& pose,
                                                      std::span<const double> fresh) {
  if (fresh.size() != acc.values.size()) throw ArgumentError("quality vector length mismatch");
  std::vector<QualityChange> delta;
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    if (fresh[i] > acc.values[i]) {
      acc.values[i] = fresh[i];
      delta.push_back({static_cast<std::uint32_t>(i), fresh[i]});
    }
  }
  acc.last_pose = pose;
  return delta;
}

inline AccumulatedQuality accumulate(AccumulatedQuality acc, const ViewPose& pose, std::span<const double> fresh) {
  accumulate_in_place(acc, pose, fresh);
  return acc;
}

inline AccumulatedQuality accumulate(AccumulatedQuality acc, const ViewPose& pose, const TriangleMesh& mesh,
                                     const SurfacePointSet& points, const Sensor& sensor) {
  const auto fresh = point_qualities(mesh, points, pose, sensor);
  accumulate_in_place(acc, pose, fresh);
  return acc;
}

}  // namespace inspect
