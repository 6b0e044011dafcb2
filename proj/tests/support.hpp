#pragma once

// Random instance generators and independent oracles shared by the unit tests
// and the acceptance binary. Oracles deliberately avoid the library code paths
// they check.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "inspect/geometry.hpp"
#include "inspect/kinematics.hpp"
#include "inspect/planner.hpp"
#include "inspect/pose.hpp"
#include "inspect/quality.hpp"
#include "inspect/scene.hpp"
#include "inspect/viewgraph.hpp"

namespace inspect::testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

inline int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

inline Vec3 random_unit(Rng& rng) {
  std::normal_distribution<double> n;
  Vec3 v;
  do {
    v = Vec3(n(rng), n(rng), n(rng));
  } while (v.norm() < 1e-9);
  return v.normalized();
}

inline Quat random_quat(Rng& rng) {
  std::normal_distribution<double> n;
  Quat q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  return q;
}

inline ViewPose random_pose(Rng& rng, double extent) {
  return {Vec3(uniform(rng, -extent, extent), uniform(rng, -extent, extent), uniform(rng, -extent, extent)),
          random_quat(rng)};
}

// n x k matrix with roughly `density` nonzeros, values in (0, 1].
inline std::vector<std::vector<double>> random_dense_quality(Rng& rng, std::size_t n, std::size_t k, double density) {
  std::vector<std::vector<double>> rows(n, std::vector<double>(k, 0.0));
  for (auto& row : rows) {
    for (auto& v : row) {
      if (uniform(rng, 0.0, 1.0) < density) v = std::max(1e-6, uniform(rng, 0.0, 1.0));
    }
  }
  return rows;
}

// Fully connected pose cloud: every pair within reach gets an edge.
inline ViewGraph random_graph(Rng& rng, std::size_t k, double extent, double beta = 0.01) {
  std::vector<ViewPose> poses;
  for (std::size_t i = 0; i < k; ++i) poses.push_back(random_pose(rng, extent));
  return build_graph(poses, GraphParams{beta, std::max<std::size_t>(1, k - 1), 1e9});
}

struct RandomInstance {
  ViewGraph graph;
  QualityMatrix quality;
  std::vector<std::vector<double>> dense;
  CostModel cost;
  double budget = 0.0;

  PlanningProblem problem() const { return PlanningProblem{graph, quality, cost, budget}; }
};

// Random planning instance; the budget lands between zero and the length of a
// walk through every pose so that it binds.
inline RandomInstance random_instance(Rng& rng, std::size_t k, std::size_t n, double alpha = 0.0) {
  RandomInstance inst;
  inst.graph = random_graph(rng, k, 300.0);
  inst.dense = random_dense_quality(rng, n, k, uniform(rng, 0.15, 0.6));
  inst.quality = QualityMatrix::from_dense(inst.dense);
  inst.cost = CostModel{alpha, 0.01};
  double span = 0.0;
  for (std::size_t i = 1; i < k; ++i) span += inst.graph.distance(i - 1, i);
  inst.budget = uniform(rng, 0.05, 0.7) * span + alpha * uniform(rng, 1.0, static_cast<double>(k));
  return inst;
}

// f(X) straight from the definition over a dense matrix.
inline double oracle_f(const std::vector<std::vector<double>>& dense, const std::vector<std::size_t>& subset) {
  double total = 0.0;
  for (const auto& row : dense) {
    double best = 0.0;
    for (auto j : subset) best = std::max(best, row[j]);
    total += best;
  }
  return total;
}

// All-pairs shortest paths by Floyd-Warshall on the raw edge list.
inline std::vector<std::vector<double>> floyd_warshall(std::size_t k, const std::vector<Edge>& edges) {
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> d(k, std::vector<double>(k, inf));
  for (std::size_t i = 0; i < k; ++i) d[i][i] = 0.0;
  for (const auto& e : edges) {
    d[e.from][e.to] = std::min(d[e.from][e.to], e.cost);
    d[e.to][e.from] = std::min(d[e.to][e.from], e.cost);
  }
  for (std::size_t m = 0; m < k; ++m)
    for (std::size_t i = 0; i < k; ++i)
      for (std::size_t j = 0; j < k; ++j) d[i][j] = std::min(d[i][j], d[i][m] + d[m][j]);
  return d;
}

// Shortest open walk through `subset` by trying every permutation.
inline double oracle_walk(const ViewGraph& g, std::vector<std::size_t> subset) {
  if (subset.size() <= 1) return 0.0;
  std::sort(subset.begin(), subset.end());
  double best = std::numeric_limits<double>::infinity();
  do {
    double len = 0.0;
    for (std::size_t i = 1; i < subset.size(); ++i) len += g.distance(subset[i - 1], subset[i]);
    best = std::min(best, len);
  } while (std::next_permutation(subset.begin(), subset.end()));
  return best;
}

// Exhaustive optimum over every subset with permutation-optimal walks. Only
// for k <= 8.
inline double oracle_optimum(const RandomInstance& inst) {
  const std::size_t k = inst.graph.size();
  double best = 0.0;
  for (std::size_t mask = 1; mask < (std::size_t{1} << k); ++mask) {
    std::vector<std::size_t> subset;
    for (std::size_t i = 0; i < k; ++i)
      if (mask >> i & 1) subset.push_back(i);
    const double cost = oracle_walk(inst.graph, subset) + inst.cost.alpha * static_cast<double>(subset.size());
    if (cost <= inst.budget) best = std::max(best, oracle_f(inst.dense, subset));
  }
  return best;
}

// Rotation about a unit axis from Rodrigues' formula, written out by hand.
inline Eigen::Matrix4d rodrigues(const Vec3& axis, double angle) {
  const Vec3 a = axis.normalized();
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m(0, 0) = t * a.x() * a.x() + c;
  m(0, 1) = t * a.x() * a.y() - s * a.z();
  m(0, 2) = t * a.x() * a.z() + s * a.y();
  m(1, 0) = t * a.x() * a.y() + s * a.z();
  m(1, 1) = t * a.y() * a.y() + c;
  m(1, 2) = t * a.y() * a.z() - s * a.x();
  m(2, 0) = t * a.x() * a.z() - s * a.y();
  m(2, 1) = t * a.y() * a.z() + s * a.x();
  m(2, 2) = t * a.z() * a.z() + c;
  return m;
}

inline Eigen::Matrix4d homogeneous(const Eigen::Isometry3d& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m(r, c) = t.linear()(r, c);
    m(r, 3) = t.translation()(r);
  }
  return m;
}

// Forward kinematics as a plain product of 4x4 matrices.
inline Eigen::Matrix4d oracle_fk(const KinematicChain& chain, const std::vector<double>& q) {
  Eigen::Matrix4d m = homogeneous(chain.base);
  for (std::size_t i = 0; i < chain.joints.size(); ++i) {
    const auto& j = chain.joints[i];
    m = m * homogeneous(j.origin);
    if (j.type == JointType::Revolute) {
      m = m * rodrigues(j.axis, q[i]);
    } else {
      Eigen::Matrix4d tr = Eigen::Matrix4d::Identity();
      tr.block<3, 1>(0, 3) = j.axis.normalized() * q[i];
      m = m * tr;
    }
  }
  return m * homogeneous(chain.tcp);
}

inline Eigen::Isometry3d random_isometry(Rng& rng, double extent) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.linear() = random_quat(rng).toRotationMatrix();
  t.translation() = Vec3(uniform(rng, -extent, extent), uniform(rng, -extent, extent), uniform(rng, -extent, extent));
  return t;
}

inline KinematicChain random_chain(Rng& rng, std::size_t dof) {
  KinematicChain c;
  c.name = "random";
  c.base = random_isometry(rng, 200.0);
  for (std::size_t i = 0; i < dof; ++i) {
    Joint j;
    j.type = uniform(rng, 0.0, 1.0) < 0.8 ? JointType::Revolute : JointType::Prismatic;
    j.axis = random_unit(rng);
    j.origin = random_isometry(rng, 300.0);
    if (j.type == JointType::Prismatic) {
      j.lower = -200.0;
      j.upper = 200.0;
    }
    c.joints.push_back(j);
  }
  c.tcp = random_isometry(rng, 100.0);
  return c;
}

inline std::vector<double> random_joints(Rng& rng, const KinematicChain& chain) {
  std::vector<double> q(chain.dof());
  for (std::size_t i = 0; i < q.size(); ++i) q[i] = uniform(rng, chain.joints[i].lower, chain.joints[i].upper);
  return q;
}

// Closed axis-aligned box, outward-wound.
inline TriangleMesh box_mesh(const Vec3& lo, const Vec3& hi) {
  std::vector<Vec3> v;
  for (int i = 0; i < 8; ++i) v.emplace_back(i & 1 ? hi.x() : lo.x(), i & 2 ? hi.y() : lo.y(), i & 4 ? hi.z() : lo.z());
  const std::vector<Triangle> t = {{0, 2, 1}, {1, 2, 3}, {4, 5, 6}, {5, 7, 6}, {0, 1, 4}, {1, 5, 4},
                                   {2, 6, 3}, {3, 6, 7}, {0, 4, 2}, {2, 4, 6}, {1, 3, 5}, {3, 7, 5}};
  return TriangleMesh(std::move(v), t);
}

inline TriangleMesh merge(const std::vector<TriangleMesh>& parts) {
  std::vector<Vec3> v;
  std::vector<Triangle> t;
  for (const auto& p : parts) {
    const auto base = static_cast<std::uint32_t>(v.size());
    v.insert(v.end(), p.vertices().begin(), p.vertices().end());
    for (const auto& f : p.triangles()) t.push_back({f[0] + base, f[1] + base, f[2] + base});
  }
  return TriangleMesh(std::move(v), std::move(t));
}

// Icosphere centred at the origin: 12 vertices, then 42, 162, ...
inline TriangleMesh icosphere(double radius, int subdivisions) {
  const double p = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, p, 0}, {1, p, 0}, {-1, -p, 0}, {1, -p, 0}, {0, -1, p}, {0, 1, p},
                         {0, -1, -p}, {0, 1, -p}, {p, 0, -1}, {p, 0, 1}, {-p, 0, -1}, {-p, 0, 1}};
  std::vector<Triangle> t = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                             {11, 10, 2}, {10, 7, 6}, {7, 1, 8},  {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                             {3, 8, 9},  {4, 9, 5},  {2, 4, 11}, {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (auto& x : v) x.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> mid;
    auto midpoint = [&](std::uint32_t a, std::uint32_t b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const auto idx = static_cast<std::uint32_t>(v.size() - 1);
      mid[key] = idx;
      return idx;
    };
    std::vector<Triangle> next;
    for (const auto& f : t) {
      const auto a = midpoint(f[0], f[1]), b = midpoint(f[1], f[2]), c = midpoint(f[2], f[0]);
      next.push_back({f[0], a, c});
      next.push_back({f[1], b, a});
      next.push_back({f[2], c, b});
      next.push_back({a, b, c});
    }
    t = std::move(next);
  }
  for (auto& x : v) x *= radius;
  return TriangleMesh(std::move(v), std::move(t));
}

// A few randomly placed and rotated boxes plus a sphere, all closed.
inline TriangleMesh random_closed_scene(Rng& rng) {
  std::vector<TriangleMesh> parts;
  const int boxes = uniform_int(rng, 2, 5);
  for (int b = 0; b < boxes; ++b) {
    const Vec3 half(uniform(rng, 20, 120), uniform(rng, 20, 120), uniform(rng, 20, 120));
    Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
    t.linear() = random_quat(rng).toRotationMatrix();
    t.translation() = Vec3(uniform(rng, -200, 200), uniform(rng, -200, 200), uniform(rng, -200, 200));
    parts.push_back(transformed(box_mesh(-half, half), t));
  }
  Eigen::Isometry3d s = Eigen::Isometry3d::Identity();
  s.translation() = Vec3(uniform(rng, -150, 150), uniform(rng, -150, 150), uniform(rng, -150, 150));
  parts.push_back(transformed(icosphere(uniform(rng, 40, 100), 2), s));
  return merge(parts);
}

// Uniform samples on the surface (area weighted) carrying face normals.
inline SurfacePointSet sample_surface(const TriangleMesh& mesh, std::size_t count, Rng& rng) {
  std::vector<double> area;
  for (const auto& f : mesh.triangles()) {
    const auto& a = mesh.vertices()[f[0]];
    area.push_back(0.5 * (mesh.vertices()[f[1]] - a).cross(mesh.vertices()[f[2]] - a).norm());
  }
  std::discrete_distribution<std::size_t> pick(area.begin(), area.end());
  SurfacePointSet pts;
  for (std::size_t i = 0; i < count; ++i) {
    const auto& f = mesh.triangles()[pick(rng)];
    double u = uniform(rng, 0, 1), w = uniform(rng, 0, 1);
    if (u + w > 1.0) {
      u = 1.0 - u;
      w = 1.0 - w;
    }
    const auto& a = mesh.vertices()[f[0]];
    const auto& b = mesh.vertices()[f[1]];
    const auto& c = mesh.vertices()[f[2]];
    pts.positions.push_back(a + u * (b - a) + w * (c - a));
    pts.normals.push_back((b - a).cross(c - a).normalized());
    pts.source.push_back(static_cast<std::uint32_t>(i));
  }
  return pts;
}

// A camera somewhere outside the scene looking at a random spot inside it.
inline ViewPose random_viewpoint(Rng& rng) {
  const Vec3 eye = random_unit(rng) * uniform(rng, 450.0, 900.0);
  const Vec3 target(uniform(rng, -100, 100), uniform(rng, -100, 100), uniform(rng, -100, 100));
  return look_at(eye, target);
}

}  // namespace inspect::testing
