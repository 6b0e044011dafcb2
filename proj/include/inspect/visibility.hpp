#pragma once

// Point visibility from a view pose. The production path rasterizes the mesh
// into a depth map and compares point depths against it; raycast_visible is
// an exact segment-intersection reference used for verification.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <vector>

#include "inspect/geometry.hpp"
#include "inspect/pose.hpp"

namespace inspect {

struct CameraIntrinsics {
  double fov_x = std::numbers::pi / 3.0;
  double fov_y = std::numbers::pi / 3.0;
  int width = 256;
  int height = 256;
  double near_clip = 10.0;
  double far_clip = 5000.0;

  void validate() const {
    if (!(near_clip > 0.0 && near_clip < far_clip)) throw ValidationError("camera needs 0 < near < far");
    if (!(fov_x > 0.0 && fov_x < std::numbers::pi && fov_y > 0.0 && fov_y < std::numbers::pi)) {
      throw ValidationError("camera field of view must lie in (0, pi)");
    }
    if (width < 16 || height < 16) throw ValidationError("camera raster must be at least 16x16");
  }
};

// Depth in mm along the view axis; pixels without geometry hold far_clip.
// Row 0 is the top of the image.
struct DepthMap {
  int width = 0;
  int height = 0;
  double near_clip = 0.0;
  double far_clip = 0.0;
  std::vector<float> depth;

  float at(int x, int y) const { return depth[static_cast<std::size_t>(y) * width + x]; }
};

// World-to-camera transform for one pose plus the projection constants.
class CameraFrame {
 public:
  CameraFrame(const ViewPose& pose, const CameraIntrinsics& cam)
      : rot_t_(pose.orientation.toRotationMatrix().transpose()),
        origin_(pose.position),
        tan_x_(std::tan(cam.fov_x / 2.0)),
        tan_y_(std::tan(cam.fov_y / 2.0)),
        cam_(cam) {}

  Vec3 to_camera(const Vec3& world) const { return rot_t_ * (world - origin_); }
  Vec3 direction_to_camera(const Vec3& world_dir) const { return rot_t_ * world_dir; }

  struct Projection {
    double ndc_x;
    double ndc_y;
    double depth;  // along the view axis
    bool inside;   // strictly inside the frustum
  };

  Projection project(const Vec3& world) const {
    const Vec3 c = to_camera(world);
    const double z = -c.z();
    Projection p{0.0, 0.0, z, false};
    if (!(z > cam_.near_clip && z < cam_.far_clip)) return p;
    p.ndc_x = c.x() / (z * tan_x_);
    p.ndc_y = c.y() / (z * tan_y_);
    p.inside = std::abs(p.ndc_x) < 1.0 && std::abs(p.ndc_y) < 1.0;
    return p;
  }

  // Continuous raster coordinates for a camera-space point with positive depth.
  double raster_x(const Vec3& c) const { return (c.x() / (-c.z() * tan_x_) + 1.0) * 0.5 * cam_.width; }
  double raster_y(const Vec3& c) const { return (1.0 - c.y() / (-c.z() * tan_y_)) * 0.5 * cam_.height; }

  const CameraIntrinsics& intrinsics() const noexcept { return cam_; }

 private:
  Eigen::Matrix3d rot_t_;
  Vec3 origin_;
  double tan_x_;
  double tan_y_;
  CameraIntrinsics cam_;
};

namespace detail {

// Sutherland-Hodgman against the plane depth = near. Input and output are camera-space.
inline int clip_near(const std::array<Vec3, 3>& in, double near_clip, std::array<Vec3, 4>& out) {
  int n = 0;
  for (int i = 0; i < 3; ++i) {
    const Vec3& a = in[i];
    const Vec3& b = in[(i + 1) % 3];
    const double da = -a.z() - near_clip;
    const double db = -b.z() - near_clip;
    if (da >= 0.0) out[n++] = a;
    if ((da >= 0.0) != (db >= 0.0)) {
      const double t = da / (da - db);
      out[n++] = a + t * (b - a);
    }
  }
  return n;
}

}  // namespace detail

// Perspective rasterization of every triangle with a nearest-depth test.
// Back faces are rasterized as well.
inline DepthMap render_depth(const TriangleMesh& mesh, const ViewPose& pose, const CameraIntrinsics& cam) {
  const CameraFrame frame(pose, cam);
  DepthMap map{cam.width, cam.height, cam.near_clip, cam.far_clip,
               std::vector<float>(static_cast<std::size_t>(cam.width) * cam.height, static_cast<float>(cam.far_clip))};

  std::vector<Vec3> cam_verts(mesh.vertex_count());
  for (std::size_t i = 0; i < cam_verts.size(); ++i) cam_verts[i] = frame.to_camera(mesh.vertices()[i]);

  const double tan_x = std::tan(cam.fov_x / 2.0);
  const double tan_y = std::tan(cam.fov_y / 2.0);

  std::array<Vec3, 4> clipped;
  for (const auto& tri : mesh.triangles()) {
    const std::array<Vec3, 3> c{cam_verts[tri[0]], cam_verts[tri[1]], cam_verts[tri[2]]};
    // Trivial rejects against near/far and the four side planes.
    if (-c[0].z() < cam.near_clip && -c[1].z() < cam.near_clip && -c[2].z() < cam.near_clip) continue;
    if (-c[0].z() > cam.far_clip && -c[1].z() > cam.far_clip && -c[2].z() > cam.far_clip) continue;
    bool outside = false;
    for (int axis = 0; axis < 2 && !outside; ++axis) {
      const double t = axis == 0 ? tan_x : tan_y;
      bool all_pos = true, all_neg = true;
      for (const auto& v : c) {
        const double s = v[axis] - t * -v.z();
        const double s2 = -v[axis] - t * -v.z();
        all_pos = all_pos && s > 0.0;
        all_neg = all_neg && s2 > 0.0;
      }
      outside = all_pos || all_neg;
    }
    if (outside) continue;

    const int n = detail::clip_near(c, cam.near_clip, clipped);
    if (n < 3) continue;

    std::array<double, 4> sx{}, sy{}, inv_z{};
    for (int i = 0; i < n; ++i) {
      sx[i] = frame.raster_x(clipped[i]);
      sy[i] = frame.raster_y(clipped[i]);
      inv_z[i] = 1.0 / -clipped[i].z();
    }
    for (int k = 1; k + 1 < n; ++k) {
      const int i0 = 0, i1 = k, i2 = k + 1;
      const double area = (sx[i1] - sx[i0]) * (sy[i2] - sy[i0]) - (sy[i1] - sy[i0]) * (sx[i2] - sx[i0]);
      if (area == 0.0 || !std::isfinite(area)) continue;
      const double min_x = std::min({sx[i0], sx[i1], sx[i2]});
      const double max_x = std::max({sx[i0], sx[i1], sx[i2]});
      const double min_y = std::min({sy[i0], sy[i1], sy[i2]});
      const double max_y = std::max({sy[i0], sy[i1], sy[i2]});
      const int x0 = std::max(0, static_cast<int>(std::floor(min_x - 0.5)));
      const int x1 = std::min(cam.width - 1, static_cast<int>(std::ceil(max_x - 0.5)));
      const int y0 = std::max(0, static_cast<int>(std::floor(min_y - 0.5)));
      const int y1 = std::min(cam.height - 1, static_cast<int>(std::ceil(max_y - 0.5)));
      const double inv_area = 1.0 / area;
      for (int py = y0; py <= y1; ++py) {
        const double cy = py + 0.5;
        for (int px = x0; px <= x1; ++px) {
          const double cx = px + 0.5;
          const double w0 = ((sx[i1] - cx) * (sy[i2] - cy) - (sy[i1] - cy) * (sx[i2] - cx)) * inv_area;
          const double w1 = ((sx[i2] - cx) * (sy[i0] - cy) - (sy[i2] - cy) * (sx[i0] - cx)) * inv_area;
          const double w2 = 1.0 - w0 - w1;
          if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
          const double z = 1.0 / (w0 * inv_z[i0] + w1 * inv_z[i1] + w2 * inv_z[i2]);
          if (z > cam.far_clip) continue;
          float& slot = map.depth[static_cast<std::size_t>(py) * cam.width + px];
          const float zf = static_cast<float>(std::max(z, cam.near_clip));
          if (zf < slot) slot = zf;
        }
      }
    }
  }
  return map;
}

// Depth bias that absorbs z-fighting for points lying on rendered surfaces.
inline constexpr double kDefaultDepthBias = 1.0;

// Signed margin (sampled depth + bias - reference depth) for points inside
// the frustum, NaN otherwise. Visible iff margin >= 0. The depth map is
// sampled at the nearest pixel centre; the reference depth is where the
// point's tangent plane crosses that pixel centre's ray, so a visible point on
// a steep surface is compared with its own surface rather than with the
// surface half a pixel away. Near-grazing planes fall back to the point depth.
// Points whose normal faces away from the camera lie behind their own closed
// surface and get margin -inf.
inline std::vector<double> depth_margins(const SurfacePointSet& points, const ViewPose& pose,
                                         const CameraIntrinsics& cam, const DepthMap& depth,
                                         double bias = kDefaultDepthBias) {
  const CameraFrame frame(pose, cam);
  const double tan_x = std::tan(cam.fov_x / 2.0);
  const double tan_y = std::tan(cam.fov_y / 2.0);
  const bool has_normals = points.normals.size() == points.size();
  std::vector<double> margin(points.size(), std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto pr = frame.project(points.positions[i]);
    if (!pr.inside) continue;
    const int px = std::clamp(static_cast<int>((pr.ndc_x + 1.0) * 0.5 * cam.width), 0, cam.width - 1);
    const int py = std::clamp(static_cast<int>((1.0 - pr.ndc_y) * 0.5 * cam.height), 0, cam.height - 1);
    double reference = pr.depth;
    if (has_normals) {
      if (points.normals[i].dot(pose.position - points.positions[i]) < 0.0) {
        margin[i] = -std::numeric_limits<double>::infinity();
        continue;
      }
      const Vec3 n = frame.direction_to_camera(points.normals[i]);
      // Ray through the pixel centre, parametrised by depth.
      const Vec3 ray(((px + 0.5) / cam.width * 2.0 - 1.0) * tan_x, (1.0 - (py + 0.5) / cam.height * 2.0) * tan_y, -1.0);
      const double denom = n.dot(ray);
      if (std::abs(denom) > 0.01 * ray.norm()) {
        const double t = n.dot(frame.to_camera(points.positions[i])) / denom;
        if (t > 0.0) reference = t;
      }
    }
    margin[i] = depth.at(px, py) + bias - reference;
  }
  return margin;
}

inline std::vector<bool> visible_points(const SurfacePointSet& points, const ViewPose& pose,
                                        const CameraIntrinsics& cam, const DepthMap& depth,
                                        double bias = kDefaultDepthBias) {
  const auto margin = depth_margins(points, pose, cam, depth, bias);
  std::vector<bool> mask(points.size());
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = margin[i] >= 0.0;  // NaN compares false
  return mask;
}

// Moller-Trumbore; returns the ray parameter of the hit or a negative value.
inline double intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b, const Vec3& c) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-14) return -1.0;
  const double inv = 1.0 / det;
  const Vec3 t = origin - a;
  const double u = t.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return -1.0;
  const Vec3 q = t.cross(e1);
  const double v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return -1.0;
  return e2.dot(q) * inv;
}

// A point is visible iff it is strictly inside the frustum and the segment
// from the camera centre to it, shortened by `epsilon` mm at both ends, hits
// no triangle.
inline std::vector<bool> raycast_visible(const SurfacePointSet& points, const ViewPose& pose,
                                         const TriangleMesh& mesh, const CameraIntrinsics& cam,
                                         double epsilon = 1e-3) {
  const CameraFrame frame(pose, cam);
  const auto& verts = mesh.vertices();
  std::vector<bool> mask(points.size(), false);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!frame.project(points.positions[i]).inside) continue;
    const Vec3 dir = points.positions[i] - pose.position;
    const double len = dir.norm();
    if (len <= 2.0 * epsilon) continue;
    const double t_lo = epsilon / len;
    const double t_hi = 1.0 - epsilon / len;
    bool blocked = false;
    for (const auto& tri : mesh.triangles()) {
      const double t = intersect_triangle(pose.position, dir, verts[tri[0]], verts[tri[1]], verts[tri[2]]);
      if (t > t_lo && t < t_hi) {
        blocked = true;
        break;
      }
    }
    mask[i] = !blocked;
  }
  return mask;
}

// 16-bit binary PGM, [near, far] mapped linearly onto [0, 65535].
inline void write_depth_pgm(const std::filesystem::path& file, const DepthMap& map) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + file.string());
  out << "P5\n" << map.width << ' ' << map.height << "\n65535\n";
  const double span = map.far_clip - map.near_clip;
  for (float d : map.depth) {
    const double u = std::clamp((d - map.near_clip) / span, 0.0, 1.0);
    const auto v = static_cast<std::uint16_t>(std::lround(u * 65535.0));
    out.put(static_cast<char>(v >> 8));
    out.put(static_cast<char>(v & 0xff));
  }
}

}  // namespace inspect
