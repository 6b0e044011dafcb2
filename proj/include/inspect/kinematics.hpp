#pragma once

// Serial-chain forward kinematics and damped-least-squares inverse kinematics
// for driving a robot tool centre point (TCP) that carries the camera.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include "inspect/errors.hpp"
#include "inspect/geometry.hpp"
#include "inspect/pose.hpp"

namespace inspect {

enum class JointType { Revolute, Prismatic };

struct Joint {
  JointType type = JointType::Revolute;
  Vec3 axis = Vec3::UnitZ();
  Eigen::Isometry3d origin = Eigen::Isometry3d::Identity();  // relative to the previous joint frame
  double lower = -std::numbers::pi;  // rad or mm
  double upper = std::numbers::pi;
};

struct KinematicChain {
  std::string name;
  Eigen::Isometry3d base = Eigen::Isometry3d::Identity();  // chain root in world
  std::vector<Joint> joints;
  Eigen::Isometry3d tcp = Eigen::Isometry3d::Identity();
  // The first joint is an external axis (rotary table or rail) with its own input channel.
  bool extra_axis = false;

  std::size_t dof() const noexcept { return joints.size(); }

  void validate() const {
    if (joints.empty()) throw ValidationError("kinematic chain has no joints");
    for (const auto& j : joints) {
      if (!(j.lower < j.upper)) throw ValidationError("joint limits need lower < upper");
      if (std::abs(j.axis.norm() - 1.0) > 1e-9) throw ValidationError("joint axes must be unit length");
    }
  }

  bool within_limits(std::span<const double> q) const {
    if (q.size() != joints.size()) return false;
    for (std::size_t i = 0; i < q.size(); ++i) {
      if (!(q[i] >= joints[i].lower && q[i] <= joints[i].upper)) return false;
    }
    return true;
  }

  void clamp(std::span<double> q) const {
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = std::clamp(q[i], joints[i].lower, joints[i].upper);
  }
};

using JointState = std::vector<double>;

inline Eigen::Isometry3d joint_motion(const Joint& j, double value) {
  Eigen::Isometry3d m = Eigen::Isometry3d::Identity();
  if (j.type == JointType::Revolute) {
    m.linear() = Eigen::AngleAxisd(value, j.axis).toRotationMatrix();
  } else {
    m.translation() = value * j.axis;
  }
  return m;
}

inline Eigen::Isometry3d forward_transform(const KinematicChain& chain, std::span<const double> q) {
  if (q.size() != chain.dof()) {
    throw ArgumentError("joint state has " + std::to_string(q.size()) + " values, chain has " +
                        std::to_string(chain.dof()) + " joints");
  }
  Eigen::Isometry3d t = chain.base;
  for (std::size_t i = 0; i < q.size(); ++i) t = t * chain.joints[i].origin * joint_motion(chain.joints[i], q[i]);
  return t * chain.tcp;
}

inline ViewPose forward(const KinematicChain& chain, std::span<const double> q) {
  const auto t = forward_transform(chain, q);
  Quat rot(t.rotation());
  rot.normalize();
  return ViewPose{t.translation(), rot};
}

struct IkOptions {
  double damping = 0.1;             // lambda
  int max_iterations = 200;
  double tol_position = 1.0;        // mm
  double tol_orientation = 0.01;    // rad
  double orientation_weight = 100.0;  // mm per rad
  double jacobian_step = 1e-5;
  double max_position_step = 100.0;    // error clamp per iteration, mm
  double max_orientation_step = 0.5;   // error clamp per iteration, rad
  int restarts = 8;  // extra descents from pseudo-random states after a failure; 0 keeps motion continuous
};

struct IkResult {
  bool success = false;
  JointState state;  // best state found; callers keep their seed on failure
  int iterations = 0;
  double position_error = 0.0;
  double orientation_error = 0.0;
};

// Rotation vector taking `from` to `to` in world frame.
inline Vec3 rotation_error(const Eigen::Matrix3d& to, const Eigen::Matrix3d& from) {
  const Eigen::AngleAxisd aa(to * from.transpose());
  return aa.angle() * aa.axis();
}

using Matrix6X = Eigen::Matrix<double, 6, Eigen::Dynamic>;
using Vector6 = Eigen::Matrix<double, 6, 1>;

// Central-difference Jacobian of [position; w_o * rotation] with respect to q.
inline Matrix6X numerical_jacobian(const KinematicChain& chain, std::span<const double> q, double h, double w_o) {
  Matrix6X jac(6, static_cast<Eigen::Index>(q.size()));
  JointState plus(q.begin(), q.end()), minus(q.begin(), q.end());
  for (std::size_t i = 0; i < q.size(); ++i) {
    plus[i] = q[i] + h;
    minus[i] = q[i] - h;
    const auto tp = forward_transform(chain, plus);
    const auto tm = forward_transform(chain, minus);
    jac.block<3, 1>(0, static_cast<Eigen::Index>(i)) = (tp.translation() - tm.translation()) / (2.0 * h);
    jac.block<3, 1>(3, static_cast<Eigen::Index>(i)) = w_o * rotation_error(tp.rotation(), tm.rotation()) / (2.0 * h);
    plus[i] = minus[i] = q[i];
  }
  return jac;
}

// dq = J^T (J J^T + lambda^2 I)^-1 e. The 6x6 system is positive definite for lambda > 0.
inline Eigen::VectorXd dls_step(const Matrix6X& jac, const Vector6& error, double damping) {
  const Eigen::Matrix<double, 6, 6> a = jac * jac.transpose() + damping * damping * Eigen::Matrix<double, 6, 6>::Identity();
  return jac.transpose() * a.ldlt().solve(error);
}

namespace detail {

// Brings revolute joints whose range spans a full turn back inside their
// limits by whole turns, then clamps.
inline void wrap_and_clamp(const KinematicChain& chain, JointState& q) {
  constexpr double kTurn = 2.0 * std::numbers::pi;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const auto& j = chain.joints[i];
    if (j.type == JointType::Revolute && j.upper - j.lower >= kTurn) {
      while (q[i] > j.upper) q[i] -= kTurn;
      while (q[i] < j.lower) q[i] += kTurn;
    }
    q[i] = std::clamp(q[i], j.lower, j.upper);
  }
}

// Local damped-least-squares descent from `start`. Joints pinned at a limit
// with the step pushing outward are dropped from the Jacobian and the step is
// recomputed.
inline IkResult dls_descent(const KinematicChain& chain, const ViewPose& target, JointState start, const IkOptions& opt) {
  const Eigen::Matrix3d target_rot = target.orientation.toRotationMatrix();
  IkResult res;
  res.state = std::move(start);
  wrap_and_clamp(chain, res.state);

  auto measure = [&](const JointState& q, Vec3& dp, Vec3& dr) {
    const auto t = forward_transform(chain, q);
    dp = target.position - t.translation();
    dr = rotation_error(target_rot, t.rotation());
  };

  Vec3 dp, dr;
  measure(res.state, dp, dr);
  for (res.iterations = 0;; ++res.iterations) {
    res.position_error = dp.norm();
    res.orientation_error = dr.norm();
    if (res.position_error <= opt.tol_position && res.orientation_error <= opt.tol_orientation) {
      res.success = chain.within_limits(res.state);
      return res;
    }
    if (res.iterations >= opt.max_iterations) break;

    Vec3 p = dp, r = dr;
    if (p.norm() > opt.max_position_step) p *= opt.max_position_step / p.norm();
    if (r.norm() > opt.max_orientation_step) r *= opt.max_orientation_step / r.norm();
    Vector6 e;
    e << p, opt.orientation_weight * r;
    Matrix6X jac = numerical_jacobian(chain, res.state, opt.jacobian_step, opt.orientation_weight);
    Eigen::VectorXd dq = dls_step(jac, e, opt.damping);
    for (std::size_t pass = 0; pass < res.state.size(); ++pass) {
      bool pinned = false;
      for (std::size_t i = 0; i < res.state.size(); ++i) {
        const auto c = static_cast<Eigen::Index>(i);
        const auto& jt = chain.joints[i];
        const bool at_low = res.state[i] <= jt.lower && dq[c] < 0.0;
        const bool at_high = res.state[i] >= jt.upper && dq[c] > 0.0;
        if ((at_low || at_high) && jac.col(c).squaredNorm() > 0.0) {
          jac.col(c).setZero();
          pinned = true;
        }
      }
      if (!pinned) break;
      dq = dls_step(jac, e, opt.damping);
    }
    if (!dq.allFinite()) break;
    for (std::size_t i = 0; i < res.state.size(); ++i) res.state[i] += dq[static_cast<Eigen::Index>(i)];
    wrap_and_clamp(chain, res.state);
    measure(res.state, dp, dr);
  }
  res.success = false;
  return res;
}

}  // namespace detail

// Damped least squares from `seed`. If the descent stalls (typically against
// a joint limit) and opt.restarts > 0, it is retried from deterministic
// pseudo-random states; the best attempt is returned either way.
inline IkResult solve_ik(const KinematicChain& chain, const ViewPose& target, std::span<const double> seed,
                         const IkOptions& opt = {}) {
  if (!(opt.damping > 0.0)) throw ArgumentError("IK damping must be positive");
  if (seed.size() != chain.dof()) throw ArgumentError("IK seed length does not match chain");
  require_valid(target);
  IkResult best = detail::dls_descent(chain, target, JointState(seed.begin(), seed.end()), opt);
  std::mt19937_64 rng(0x5eedULL);
  int total_iterations = best.iterations;
  for (int attempt = 0; attempt < opt.restarts && !best.success; ++attempt) {
    JointState start(chain.dof());
    for (std::size_t i = 0; i < start.size(); ++i) {
      std::uniform_real_distribution<double> u(chain.joints[i].lower, chain.joints[i].upper);
      start[i] = u(rng);
    }
    auto r = detail::dls_descent(chain, target, std::move(start), opt);
    total_iterations += r.iterations;
    const auto score = [&](const IkResult& x) { return x.position_error + opt.orientation_weight * x.orientation_error; };
    if (r.success || score(r) < score(best)) best = std::move(r);
  }
  best.iterations = total_iterations;
  return best;
}

// Stored state nearest to the normalised position `fraction` along the trajectory.
inline const JointState& scrub(std::span<const JointState> trajectory, double fraction) {
  if (trajectory.empty()) throw ValidationError("cannot scrub an empty trajectory");
  if (!(fraction >= 0.0 && fraction <= 1.0)) throw ArgumentError("scrub fraction must lie in [0, 1]");
  const auto idx = static_cast<std::size_t>(std::lround(fraction * static_cast<double>(trajectory.size() - 1)));
  return trajectory[idx];
}

namespace presets {

inline double deg(double d) { return d * std::numbers::pi / 180.0; }

inline Joint revolute(const Vec3& offset, const Vec3& axis, double lo_deg, double hi_deg) {
  Joint j;
  j.type = JointType::Revolute;
  j.axis = axis;
  j.origin = Eigen::Isometry3d(Eigen::Translation3d(offset));
  j.lower = deg(lo_deg);
  j.upper = deg(hi_deg);
  return j;
}

// Six-axis industrial arm of roughly 1.6 m reach. Dimensions are illustrative.
inline KinematicChain kr16_like() {
  KinematicChain c;
  c.name = "kr16-like";
  c.joints = {
      revolute({0, 0, 0}, Vec3::UnitZ(), -185, 185),
      revolute({260, 0, 675}, Vec3::UnitY(), -155, 35),
      revolute({0, 0, 680}, Vec3::UnitY(), -130, 154),
      revolute({0, 0, 35}, Vec3::UnitX(), -350, 350),
      revolute({670, 0, 0}, Vec3::UnitY(), -130, 130),
      revolute({158, 0, 0}, Vec3::UnitX(), -350, 350),
  };
  // Camera looks along the flange x axis, 100 mm out.
  c.tcp = Eigen::Translation3d(100, 0, 0) * Eigen::AngleAxisd(-std::numbers::pi / 2, Vec3::UnitY());
  return c;
}

// Six-axis collaborative arm mounted 900 mm from the centre of a rotary
// table; the table is the extra axis.
inline KinematicChain ur10_table_like() {
  KinematicChain c;
  c.name = "ur10-table-like";
  c.extra_axis = true;
  c.joints = {
      revolute({0, 0, 0}, Vec3::UnitZ(), -360, 360),
      revolute({-900, 0, 127.3}, Vec3::UnitZ(), -350, 350),
      revolute({0, 0, 0}, Vec3::UnitY(), -350, 350),
      revolute({612, 0, 0}, Vec3::UnitY(), -350, 350),
      revolute({572.3, 0, 0}, Vec3::UnitY(), -350, 350),
      revolute({0, 163.9, 0}, Vec3::UnitZ(), -350, 350),
      revolute({0, 0, -115.7}, Vec3::UnitY(), -350, 350),
  };
  c.tcp = Eigen::Translation3d(0, 192.2, 0) * Eigen::AngleAxisd(std::numbers::pi / 2, Vec3::UnitX());
  return c;
}

inline std::optional<KinematicChain> by_name(const std::string& name) {
  if (name == "kr16-like") return kr16_like();
  if (name == "ur10-table-like") return ur10_table_like();
  return std::nullopt;
}

}  // namespace presets

}  // namespace inspect
