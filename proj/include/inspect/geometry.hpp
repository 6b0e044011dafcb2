#pragma once

// Triangle meshes, ASCII OBJ/PLY ingestion and surface-point extraction.
// All lengths are millimetres.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "inspect/errors.hpp"

namespace inspect {

using Vec3 = Eigen::Vector3d;
using Triangle = std::array<std::uint32_t, 3>;

class TriangleMesh {
 public:
  TriangleMesh() = default;

  // Validates indices and computes area-weighted vertex normals.
  TriangleMesh(std::vector<Vec3> vertices, std::vector<Triangle> triangles)
      : vertices_(std::move(vertices)), triangles_(std::move(triangles)) {
    if (triangles_.empty()) throw ValidationError("mesh has no triangles");
    for (std::size_t t = 0; t < triangles_.size(); ++t) {
      for (auto idx : triangles_[t]) {
        if (idx >= vertices_.size()) {
          throw ValidationError("triangle " + std::to_string(t) + " references vertex " +
                                std::to_string(idx) + " but mesh has " +
                                std::to_string(vertices_.size()) + " vertices");
        }
      }
    }
    for (const auto& v : vertices_) {
      if (!v.allFinite()) throw ValidationError("non-finite vertex coordinate");
    }
    normals_ = compute_vertex_normals(vertices_, triangles_);
  }

  const std::vector<Vec3>& vertices() const noexcept { return vertices_; }
  const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
  const std::vector<Vec3>& normals() const noexcept { return normals_; }

  std::size_t vertex_count() const noexcept { return vertices_.size(); }
  std::size_t triangle_count() const noexcept { return triangles_.size(); }

  // Sum of incident face normals weighted by face area. Zero-area faces add
  // nothing; a vertex without any non-degenerate face falls back to +Z.
  static std::vector<Vec3> compute_vertex_normals(std::span<const Vec3> vertices,
                                                  std::span<const Triangle> triangles) {
    std::vector<Vec3> acc(vertices.size(), Vec3::Zero());
    for (const auto& t : triangles) {
      // |cross| is twice the face area, so the raw cross product is already area-weighted.
      const Vec3 n = (vertices[t[1]] - vertices[t[0]]).cross(vertices[t[2]] - vertices[t[0]]);
      for (auto idx : t) acc[idx] += n;
    }
    for (auto& n : acc) {
      const double len = n.norm();
      n = len > 0.0 ? Vec3(n / len) : Vec3::UnitZ();
    }
    return acc;
  }

  Eigen::AlignedBox3d bounds() const {
    Eigen::AlignedBox3d box;
    for (const auto& v : vertices_) box.extend(v);
    return box;
  }

 private:
  std::vector<Vec3> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<Vec3> normals_;
};

// The set M of inspected surface points.
struct SurfacePointSet {
  std::vector<Vec3> positions;
  std::vector<Vec3> normals;
  // Index of the mesh vertex each point was taken from; empty for ad-hoc point sets.
  std::vector<std::uint32_t> source;

  std::size_t size() const noexcept { return positions.size(); }
};

inline SurfacePointSet surface_points(const TriangleMesh& mesh) {
  SurfacePointSet pts;
  pts.positions = mesh.vertices();
  pts.normals = mesh.normals();
  pts.source.resize(mesh.vertex_count());
  for (std::uint32_t i = 0; i < pts.source.size(); ++i) pts.source[i] = i;
  return pts;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError("expected a number, got '" + tok + "'", line);
  }
}

inline long long parse_int(const std::string& tok, std::size_t line) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw FormatError("expected an integer, got '" + tok + "'", line);
  }
}

inline std::vector<std::string> split_ws(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string tok; in >> tok;) out.push_back(tok);
  return out;
}

}  // namespace detail

// ASCII Wavefront OBJ: only v and f records are read. Polygons are fan-triangulated;
// negative (relative) indices are accepted.
inline TriangleMesh parse_obj(std::istream& in) {
  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  std::string raw;
  std::size_t line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto tokens = detail::split_ws(raw);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    if (tokens[0] == "v") {
      if (tokens.size() < 4) throw FormatError("vertex record needs 3 coordinates", line);
      vertices.emplace_back(detail::parse_double(tokens[1], line), detail::parse_double(tokens[2], line),
                            detail::parse_double(tokens[3], line));
    } else if (tokens[0] == "f") {
      if (tokens.size() < 4) throw FormatError("face record needs at least 3 vertices", line);
      std::vector<std::int64_t> idx;
      for (std::size_t k = 1; k < tokens.size(); ++k) {
        const auto slash = tokens[k].find('/');
        long long v = detail::parse_int(tokens[k].substr(0, slash), line);
        if (v == 0) throw FormatError("OBJ indices are 1-based", line);
        v = v > 0 ? v - 1 : static_cast<long long>(vertices.size()) + v;
        if (v < 0) throw ValidationError("relative face index before first vertex (line " + std::to_string(line) + ")");
        idx.push_back(v);
      }
      for (std::size_t k = 1; k + 1 < idx.size(); ++k) {
        triangles.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[k]),
                             static_cast<std::uint32_t>(idx[k + 1])});
      }
    }
  }
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

// ASCII PLY with a vertex element (x, y, z plus any other scalar properties)
// and a face element holding a vertex index list.
inline TriangleMesh parse_ply(std::istream& in) {
  struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<std::string> props;
    bool has_list = false;
  };
  std::vector<Element> elements;
  std::string raw;
  std::size_t line = 0;

  if (!std::getline(in, raw) || detail::trim(raw) != "ply") throw FormatError("missing 'ply' magic", 1);
  line = 1;
  bool header_done = false;
  while (std::getline(in, raw)) {
    ++line;
    const auto tokens = detail::split_ws(raw);
    if (tokens.empty()) continue;
    if (tokens[0] == "format") {
      if (tokens.size() < 2 || tokens[1] != "ascii") throw FormatError("only ASCII PLY is supported", line);
    } else if (tokens[0] == "element") {
      if (tokens.size() < 3) throw FormatError("malformed element line", line);
      const auto count = detail::parse_int(tokens[2], line);
      if (count < 0) throw FormatError("negative element count", line);
      elements.push_back({tokens[1], static_cast<std::size_t>(count), {}, false});
    } else if (tokens[0] == "property") {
      if (elements.empty()) throw FormatError("property before element", line);
      if (tokens.size() >= 5 && tokens[1] == "list") {
        elements.back().has_list = true;
        elements.back().props.push_back(tokens[4]);
      } else if (tokens.size() >= 3) {
        elements.back().props.push_back(tokens[2]);
      } else {
        throw FormatError("malformed property line", line);
      }
    } else if (tokens[0] == "end_header") {
      header_done = true;
      break;
    }
  }
  if (!header_done) throw FormatError("missing end_header", line);

  std::vector<Vec3> vertices;
  std::vector<Triangle> triangles;
  for (const auto& el : elements) {
    int xi = -1, yi = -1, zi = -1;
    for (int p = 0; p < static_cast<int>(el.props.size()); ++p) {
      if (el.props[p] == "x") xi = p;
      if (el.props[p] == "y") yi = p;
      if (el.props[p] == "z") zi = p;
    }
    for (std::size_t r = 0; r < el.count; ++r) {
      if (!std::getline(in, raw)) throw FormatError("unexpected end of file in element '" + el.name + "'", line + 1);
      ++line;
      const auto tokens = detail::split_ws(raw);
      if (el.name == "vertex") {
        if (xi < 0 || yi < 0 || zi < 0) throw FormatError("vertex element lacks x/y/z", line);
        if (tokens.size() < el.props.size()) throw FormatError("too few vertex properties", line);
        vertices.emplace_back(detail::parse_double(tokens[xi], line), detail::parse_double(tokens[yi], line),
                              detail::parse_double(tokens[zi], line));
      } else if (el.name == "face") {
        if (tokens.empty()) throw FormatError("empty face record", line);
        const auto n = detail::parse_int(tokens[0], line);
        if (n < 3 || tokens.size() < static_cast<std::size_t>(n) + 1) throw FormatError("malformed face list", line);
        std::vector<long long> idx;
        for (long long k = 0; k < n; ++k) {
          const auto v = detail::parse_int(tokens[k + 1], line);
          if (v < 0) throw ValidationError("negative face index (line " + std::to_string(line) + ")");
          idx.push_back(v);
        }
        for (long long k = 1; k + 1 < n; ++k) {
          triangles.push_back({static_cast<std::uint32_t>(idx[0]), static_cast<std::uint32_t>(idx[k]),
                               static_cast<std::uint32_t>(idx[k + 1])});
        }
      }
    }
  }
  return TriangleMesh(std::move(vertices), std::move(triangles));
}

inline TriangleMesh load_mesh(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open mesh file " + file.string());
  auto ext = file.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".obj") return parse_obj(in);
  if (ext == ".ply") return parse_ply(in);
  throw ValidationError("unsupported mesh extension '" + ext + "'");
}

// ASCII PLY with round-trip exact doubles; when `quality` is given it is
// written as an extra vertex property.
inline void write_ply(std::ostream& out, const TriangleMesh& mesh,
                      std::optional<std::span<const double>> quality = std::nullopt) {
  if (quality && quality->size() != mesh.vertex_count()) {
    throw ArgumentError("quality vector length does not match vertex count");
  }
  out << "ply\nformat ascii 1.0\n";
  out << "element vertex " << mesh.vertex_count() << "\n";
  out << "property double x\nproperty double y\nproperty double z\n";
  out << "property double nx\nproperty double ny\nproperty double nz\n";
  if (quality) out << "property double quality\n";
  out << "element face " << mesh.triangle_count() << "\n";
  out << "property list uchar int vertex_indices\nend_header\n";
  out << std::setprecision(17);
  for (std::size_t i = 0; i < mesh.vertex_count(); ++i) {
    const auto& v = mesh.vertices()[i];
    const auto& n = mesh.normals()[i];
    out << v.x() << ' ' << v.y() << ' ' << v.z() << ' ' << n.x() << ' ' << n.y() << ' ' << n.z();
    if (quality) out << ' ' << (*quality)[i];
    out << '\n';
  }
  for (const auto& t : mesh.triangles()) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline void write_ply(const std::filesystem::path& file, const TriangleMesh& mesh,
                      std::optional<std::span<const double>> quality = std::nullopt) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  write_ply(out, mesh, quality);
}

inline void write_obj(std::ostream& out, const TriangleMesh& mesh) {
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices()) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles()) out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

}  // namespace inspect
