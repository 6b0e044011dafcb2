#pragma once

#include <algorithm>
#include <cmath>

#include <Eigen/Geometry>

#include "inspect/errors.hpp"
#include "inspect/geometry.hpp"

namespace inspect {

using Quat = Eigen::Quaterniond;

// Pose of the measurement device. The camera looks along its local -Z axis
// with +Y up.
struct ViewPose {
  Vec3 position = Vec3::Zero();
  Quat orientation = Quat::Identity();

  Vec3 view_axis() const { return orientation * Vec3(0.0, 0.0, -1.0); }
  Vec3 up_axis() const { return orientation * Vec3::UnitY(); }

  bool valid() const {
    return position.allFinite() && orientation.coeffs().allFinite() &&
           std::abs(orientation.norm() - 1.0) <= 1e-9;
  }
};

inline void require_valid(const ViewPose& pose) {
  if (!pose.valid()) throw ValidationError("view pose must have finite position and a unit quaternion");
}

// Rotation angle in [0, pi] between two orientations; q and -q compare equal.
inline double rotation_angle(const Quat& a, const Quat& b) {
  const Quat rel = a.conjugate() * b;
  return 2.0 * std::atan2(rel.vec().norm(), std::abs(rel.w()));
}

// Orientation whose -Z axis is `direction`. Up is global +Z with the view
// component removed, or +X when the view is (anti)parallel to Z.
inline Quat look_along(const Vec3& direction) {
  const Vec3 d = direction.normalized();
  Vec3 up = Vec3::UnitZ() - d.z() * d;
  if (up.norm() < 1e-9) up = Vec3::UnitX() - d.x() * d;
  up.normalize();
  Eigen::Matrix3d r;
  r.col(2) = -d;
  r.col(1) = up;
  r.col(0) = up.cross(-d);
  Quat q(r);
  q.normalize();
  return q;
}

inline ViewPose look_at(const Vec3& eye, const Vec3& target) {
  return ViewPose{eye, look_along(target - eye)};
}

}  // namespace inspect
