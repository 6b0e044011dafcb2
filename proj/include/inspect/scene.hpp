#pragma once

// Scene bundles (mesh, sensor, cost model, view graph, optional robot) and
// procedural stand-in objects built from voxels.
//
// Bundle layout on disk:
//   mesh.ply    object geometry
//   scene.json  sensor, quality model, cost model, graph/evaluation parameters, chain
//   graph.json  view graph

#include <array>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "inspect/evaluator.hpp"
#include "inspect/geometry.hpp"
#include "inspect/json_io.hpp"
#include "inspect/kinematics.hpp"
#include "inspect/quality.hpp"
#include "inspect/viewgraph.hpp"

namespace inspect {

struct SceneConfig {
  std::string name;
  Sensor sensor;
  CostModel cost;
  GraphParams graph;
  std::size_t stride = 1;
  EvaluationParams evaluation;
  double default_budget = 1000.0;
  std::optional<KinematicChain> chain;
};

struct Scene {
  SceneConfig config;
  TriangleMesh mesh;
  SurfacePointSet points;
  ViewGraph graph;
  QualityMatrix quality;

  const std::string& name() const noexcept { return config.name; }

  EvaluationScene evaluation_scene() const {
    return EvaluationScene{mesh, points, config.sensor, graph, quality, config.cost};
  }
};

// Candidates, graph and quality matrix derived from the mesh and config.
inline Scene make_scene(SceneConfig config, TriangleMesh mesh, std::optional<ViewGraph> graph = std::nullopt) {
  config.sensor.camera.validate();
  config.sensor.model.validate();
  config.cost.validate();
  Scene s{std::move(config), std::move(mesh), {}, {}, {}};
  s.points = surface_points(s.mesh);
  if (graph) {
    s.graph = std::move(*graph);
  } else {
    GraphParams gp = s.config.graph;
    gp.beta = s.config.cost.beta;
    s.graph = build_graph(generate_candidates(s.points, s.config.sensor.model, s.config.stride), gp);
  }
  s.quality = quality_matrix(s.points, s.graph.poses(), s.mesh, s.config.sensor);
  return s;
}

inline Json scene_config_to_json(const SceneConfig& c) {
  Json j{{"schema", kSchemaVersion},
         {"name", c.name},
         {"camera", camera_to_json(c.sensor.camera)},
         {"depth_bias", c.sensor.depth_bias},
         {"quality_model", model_to_json(c.sensor.model)},
         {"cost_model", cost_to_json(c.cost)},
         {"graph", {{"k_nn", c.graph.k_nn}, {"d_max", c.graph.d_max}, {"stride", c.stride}}},
         {"evaluation", {{"spacing", c.evaluation.spacing}, {"d_link", c.evaluation.d_link}, {"lever", c.evaluation.lever}, {"kappa", c.evaluation.kappa}}},
         {"default_budget", c.default_budget}};
  if (c.chain) j["chain"] = chain_to_json(*c.chain);
  return j;
}

inline SceneConfig scene_config_from_json(const Json& j) {
  SceneConfig c;
  c.name = j.value("name", std::string("scene"));
  if (j.contains("camera")) c.sensor.camera = camera_from_json(j.at("camera"));
  c.sensor.depth_bias = j.value("depth_bias", c.sensor.depth_bias);
  if (j.contains("quality_model")) c.sensor.model = model_from_json(j.at("quality_model"));
  if (j.contains("cost_model")) c.cost = cost_from_json(j.at("cost_model"));
  c.graph.d_max = 3.0 * c.sensor.model.d_opt;
  c.evaluation.spacing = c.sensor.model.d_opt / 4.0;
  c.evaluation.d_link = 1.5 * c.sensor.model.d_opt;
  c.evaluation.lever = c.sensor.model.d_opt;
  if (j.contains("graph")) {
    const auto& g = j.at("graph");
    c.graph.k_nn = g.value("k_nn", c.graph.k_nn);
    c.graph.d_max = g.value("d_max", c.graph.d_max);
    c.stride = g.value("stride", c.stride);
  }
  c.graph.beta = c.cost.beta;
  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    c.evaluation.spacing = e.value("spacing", c.evaluation.spacing);
    c.evaluation.d_link = e.value("d_link", c.evaluation.d_link);
    c.evaluation.lever = e.value("lever", c.evaluation.lever);
    c.evaluation.kappa = e.value("kappa", c.evaluation.kappa);
  }
  c.default_budget = j.value("default_budget", c.default_budget);
  if (j.contains("chain") && !j.at("chain").is_null()) c.chain = chain_from_json(j.at("chain"));
  return c;
}

inline void save_scene(const Scene& s, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_ply(dir / "mesh.ply", s.mesh);
  write_json_file(dir / "scene.json", scene_config_to_json(s.config));
  write_json_file(dir / "graph.json", graph_to_json(s.graph));
}

inline Scene load_scene(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw NotFoundError("scene bundle " + dir.string() + " not found");
  auto config = scene_config_from_json(read_json_file(dir / "scene.json"));
  auto mesh = load_mesh(dir / "mesh.ply");
  std::optional<ViewGraph> graph;
  if (std::filesystem::exists(dir / "graph.json")) graph = graph_from_json(read_json_file(dir / "graph.json"));
  return make_scene(std::move(config), std::move(mesh), std::move(graph));
}

// Occupancy grid whose boundary faces become a closed triangle mesh.
class VoxelGrid {
 public:
  VoxelGrid(int nx, int ny, int nz, double size) : nx_(nx), ny_(ny), nz_(nz), size_(size), cells_(static_cast<std::size_t>(nx) * ny * nz, 0) {}

  bool filled(int x, int y, int z) const {
    if (x < 0 || y < 0 || z < 0 || x >= nx_ || y >= ny_ || z >= nz_) return false;
    return cells_[index(x, y, z)] != 0;
  }

  // Fills (value = true) or carves the half-open cell box [lo, hi).
  void box(std::array<int, 3> lo, std::array<int, 3> hi, bool value = true) {
    for (int z = std::max(0, lo[2]); z < std::min(nz_, hi[2]); ++z)
      for (int y = std::max(0, lo[1]); y < std::min(ny_, hi[1]); ++y)
        for (int x = std::max(0, lo[0]); x < std::min(nx_, hi[0]); ++x) cells_[index(x, y, z)] = value ? 1 : 0;
  }

  // Outward-facing quads (two triangles each) on every filled/empty interface.
  // Vertices are shared, so the mesh is closed; centred on the grid centre.
  TriangleMesh surface() const {
    std::unordered_map<long long, std::uint32_t> ids;
    std::vector<Vec3> verts;
    std::vector<Triangle> tris;
    const Vec3 centre(nx_ * size_ / 2.0, ny_ * size_ / 2.0, nz_ * size_ / 2.0);
    auto vid = [&](int x, int y, int z) {
      const long long key = (static_cast<long long>(z) * (ny_ + 1) + y) * (nx_ + 1) + x;
      auto [it, inserted] = ids.emplace(key, static_cast<std::uint32_t>(verts.size()));
      if (inserted) verts.push_back(Vec3(x * size_, y * size_, z * size_) - centre);
      return it->second;
    };
    auto quad = [&](std::array<std::array<int, 3>, 4> c) {
      const auto a = vid(c[0][0], c[0][1], c[0][2]);
      const auto b = vid(c[1][0], c[1][1], c[1][2]);
      const auto d = vid(c[2][0], c[2][1], c[2][2]);
      const auto e = vid(c[3][0], c[3][1], c[3][2]);
      tris.push_back({a, b, d});
      tris.push_back({a, d, e});
    };
    for (int z = 0; z < nz_; ++z)
      for (int y = 0; y < ny_; ++y)
        for (int x = 0; x < nx_; ++x) {
          if (!filled(x, y, z)) continue;
          if (!filled(x + 1, y, z)) quad({{{x + 1, y, z}, {x + 1, y + 1, z}, {x + 1, y + 1, z + 1}, {x + 1, y, z + 1}}});
          if (!filled(x - 1, y, z)) quad({{{x, y, z}, {x, y, z + 1}, {x, y + 1, z + 1}, {x, y + 1, z}}});
          if (!filled(x, y + 1, z)) quad({{{x, y + 1, z}, {x, y + 1, z + 1}, {x + 1, y + 1, z + 1}, {x + 1, y + 1, z}}});
          if (!filled(x, y - 1, z)) quad({{{x, y, z}, {x + 1, y, z}, {x + 1, y, z + 1}, {x, y, z + 1}}});
          if (!filled(x, y, z + 1)) quad({{{x, y, z + 1}, {x + 1, y, z + 1}, {x + 1, y + 1, z + 1}, {x, y + 1, z + 1}}});
          if (!filled(x, y, z - 1)) quad({{{x, y, z}, {x, y + 1, z}, {x + 1, y + 1, z}, {x + 1, y, z}}});
        }
    return TriangleMesh(std::move(verts), std::move(tris));
  }

 private:
  std::size_t index(int x, int y, int z) const {
    return (static_cast<std::size_t>(z) * ny_ + y) * nx_ + x;
  }

  int nx_, ny_, nz_;
  double size_;
  std::vector<char> cells_;
};

inline TriangleMesh transformed(const TriangleMesh& mesh, const Eigen::Isometry3d& t) {
  std::vector<Vec3> v;
  v.reserve(mesh.vertex_count());
  for (const auto& p : mesh.vertices()) v.push_back(t * p);
  return TriangleMesh(std::move(v), mesh.triangles());
}

// Edges shared by exactly two triangles everywhere.
inline bool is_watertight(const TriangleMesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> uses;
  for (const auto& t : mesh.triangles()) {
    for (int e = 0; e < 3; ++e) ++uses[std::minmax(t[e], t[(e + 1) % 3])];
  }
  for (const auto& [edge, n] : uses) {
    if (n != 2) return false;
  }
  return true;
}

// V - E + F
inline long long euler_characteristic(const TriangleMesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> edges;
  for (const auto& t : mesh.triangles()) {
    for (int e = 0; e < 3; ++e) edges[std::minmax(t[e], t[(e + 1) % 3])] = 1;
  }
  return static_cast<long long>(mesh.vertex_count()) - static_cast<long long>(edges.size()) +
         static_cast<long long>(mesh.triangle_count());
}

namespace objects {

inline constexpr double kVoxel = 20.0;

// 400 x 300 x 20 mm plate tilted 30 degrees about x.
inline TriangleMesh panel() {
  VoxelGrid g(20, 15, 1, kVoxel);
  g.box({0, 0, 0}, {20, 15, 1});
  const Eigen::Isometry3d tilt(Eigen::AngleAxisd(std::numbers::pi / 6.0, Vec3::UnitX()));
  return transformed(g.surface(), tilt);
}

// 300 x 200 x 160 mm block with two grooves across the top, a stepped corner
// notch and a boss on one side.
inline TriangleMesh housing() {
  VoxelGrid g(17, 10, 8, kVoxel);
  g.box({1, 0, 0}, {16, 10, 8});
  g.box({4, 0, 6}, {5, 10, 8}, false);
  g.box({11, 0, 5}, {13, 10, 8}, false);
  g.box({13, 7, 4}, {16, 10, 8}, false);
  g.box({0, 3, 2}, {1, 7, 5});
  g.box({16, 2, 1}, {17, 5, 3});
  return g.surface();
}

// Upright 520 x 360 mm rectangular frame of 40 mm square tubes with a centre
// strut, giving a genus-2 surface.
inline TriangleMesh frame_like() {
  VoxelGrid g(26, 2, 18, kVoxel);
  g.box({0, 0, 0}, {26, 2, 2});
  g.box({0, 0, 16}, {26, 2, 18});
  g.box({0, 0, 0}, {2, 2, 18});
  g.box({24, 0, 0}, {26, 2, 18});
  g.box({12, 0, 0}, {14, 2, 18});
  return g.surface();
}

inline std::optional<TriangleMesh> by_name(const std::string& name) {
  if (name == "panel") return panel();
  if (name == "housing") return housing();
  if (name == "frame-like") return frame_like();
  return std::nullopt;
}

}  // namespace objects

// Scene defaults used by gen-scene for each object.
inline SceneConfig default_scene_config(const std::string& object) {
  SceneConfig c;
  c.name = object;
  c.sensor.model = QualityModel{QualityKind::AngleDistance, 200.0, 100.0, std::nullopt};
  c.cost = CostModel{0.0, 0.01};
  c.graph = GraphParams{c.cost.beta, 8, 3.0 * c.sensor.model.d_opt};
  c.evaluation = EvaluationParams{.spacing = c.sensor.model.d_opt / 4.0, .d_link = 1.5 * c.sensor.model.d_opt,
                                  .lever = c.sensor.model.d_opt, .kappa = kGreedyApproximation};
  c.stride = 4;
  c.default_budget = 1500.0;
  if (object == "housing") {
    c.chain = presets::ur10_table_like();
    c.chain->base = Eigen::Translation3d(0, 0, -300);
  } else {
    c.chain = presets::kr16_like();
    c.chain->base = Eigen::Translation3d(-1100, 0, -600);
  }
  return c;
}

inline Scene generate_scene(const std::string& object) {
  auto mesh = objects::by_name(object);
  if (!mesh) throw ValidationError("unknown object '" + object + "' (expected panel, housing or frame-like)");
  return make_scene(default_scene_config(object), std::move(*mesh));
}

}  // namespace inspect
