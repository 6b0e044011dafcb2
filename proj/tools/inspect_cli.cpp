// Batch front end: plan, evaluate and gen-scene.
//
// Exit codes: 0 success, 2 invalid input, 3 infeasible path or undefined metric.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "inspect/evaluator.hpp"
#include "inspect/json_io.hpp"
#include "inspect/planner.hpp"
#include "inspect/scene.hpp"

namespace fs = std::filesystem;
using namespace inspect;

namespace {

constexpr int kExitInvalid = 2;
constexpr int kExitInfeasible = 3;

struct GraphOverrides {
  std::optional<std::size_t> stride;
  std::optional<std::size_t> k_nn;
  std::optional<double> d_max;
};

// A bundle directory, or the name of a procedural object.
Scene open_scene(const std::string& where, const GraphOverrides& g) {
  SceneConfig config;
  std::optional<TriangleMesh> mesh;
  std::optional<ViewGraph> graph;
  if (fs::is_directory(where)) {
    config = scene_config_from_json(read_json_file(fs::path(where) / "scene.json"));
    mesh = load_mesh(fs::path(where) / "mesh.ply");
    if (fs::exists(fs::path(where) / "graph.json")) graph = graph_from_json(read_json_file(fs::path(where) / "graph.json"));
  } else if (auto m = objects::by_name(where)) {
    config = default_scene_config(where);
    mesh = std::move(*m);
  } else {
    throw NotFoundError("scene '" + where + "' is neither a bundle directory nor a procedural object");
  }
  if (g.stride || g.k_nn || g.d_max) {
    if (g.stride) config.stride = *g.stride;
    if (g.k_nn) config.graph.k_nn = *g.k_nn;
    if (g.d_max) config.graph.d_max = *g.d_max;
    graph.reset();
  }
  if (config.stride < 1) throw ValidationError("stride must be at least 1");
  return make_scene(std::move(config), std::move(*mesh), std::move(graph));
}

fs::path sibling(const fs::path& out, const std::string& ext) {
  fs::path p = out;
  p.replace_extension(ext);
  return p;
}

void write_text(const fs::path& file, const std::function<void(std::ostream&)>& body) {
  std::ofstream out(file);
  if (!out) throw ValidationError("cannot write " + file.string());
  body(out);
}

void positive(double v, const char* name) {
  if (!(v > 0.0)) throw ValidationError(std::string(name) + " must be positive");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inspection path planning and evaluation"};
  app.require_subcommand(1);
  std::uint64_t seed = 0;
  app.add_option("--seed", seed, "Seed for any randomized step (all commands are deterministic)");

  std::string scene_arg;
  GraphOverrides overrides;
  auto add_graph_flags = [&](CLI::App* cmd) {
    cmd->add_option("scene", scene_arg, "Scene bundle directory or procedural object name")->required();
    cmd->add_option("--stride", overrides.stride, "Candidate stride (rebuilds the graph)");
    cmd->add_option("--k-nn", overrides.k_nn, "Nearest neighbours per pose (rebuilds the graph)");
    cmd->add_option("--d-max", overrides.d_max, "Maximum edge length in mm (rebuilds the graph)");
  };

  auto* plan_cmd = app.add_subcommand("plan", "Run GCB and GCB+ on a scene");
  add_graph_flags(plan_cmd);
  std::optional<double> budget;
  fs::path plan_out;
  fs::path traversal_out;
  plan_cmd->add_option("--budget", budget, "Travel budget (defaults to the scene's)");
  plan_cmd->add_option("--out", plan_out, "Solution JSON; the path OBJ is written next to it")->required();
  plan_cmd->add_option("--traversal", traversal_out, "Also write the GCB+ visiting order as a path JSON");

  auto* eval_cmd = app.add_subcommand("evaluate", "Score a recorded path against the automated planner");
  add_graph_flags(eval_cmd);
  fs::path path_file, report_out;
  std::optional<double> spacing, d_link, kappa;
  eval_cmd->add_option("--path", path_file, "Recorded path JSON")->required();
  eval_cmd->add_option("--out", report_out, "Report JSON; the quality PLY is written next to it")->required();
  eval_cmd->add_option("--spacing", spacing, "Resampling spacing in mm");
  eval_cmd->add_option("--d-link", d_link, "Augmentation link distance in mm");
  eval_cmd->add_option("--kappa", kappa, "Approximation factor for the OPT metric");

  auto* gen_cmd = app.add_subcommand("gen-scene", "Write a procedural scene bundle");
  std::string object;
  fs::path gen_out;
  gen_cmd->add_option("--object", object, "panel, housing or frame-like")
      ->required()
      ->check(CLI::IsMember({"panel", "housing", "frame-like"}));
  gen_cmd->add_option("--out", gen_out, "Bundle directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*plan_cmd) {
      const Scene scene = open_scene(scene_arg, overrides);
      const double b = budget ? *budget : scene.config.default_budget;
      const PlanningProblem problem{scene.graph, scene.quality, scene.config.cost, b};
      const PlanSolution base = gcb(problem);
      const PlanSolution plus = gcb_plus(problem, base);
      Json out = solution_to_json(plus);
      out["gcb"] = solution_to_json(base);
      out["seed"] = seed;
      write_json_file(plan_out, out);
      std::vector<ViewPose> poses;
      for (auto i : plus.order) poses.push_back(scene.graph.poses()[i]);
      write_text(sibling(plan_out, ".obj"), [&](std::ostream& os) { write_paths_obj(os, {}, poses); });
      if (!traversal_out.empty()) {
        RecordedPath path;
        for (std::size_t i = 0; i < poses.size(); ++i) path.samples.push_back({poses[i], static_cast<double>(i), {}});
        write_json_file(traversal_out, path_to_json(path));
      }
      std::cout << "gcb f=" << base.f << " cost=" << base.cost << " | gcb+ f=" << plus.f << " cost=" << plus.cost
                << " poses=" << plus.order.size() << " budget=" << b << '\n';
    } else if (*eval_cmd) {
      const Scene scene = open_scene(scene_arg, overrides);
      EvaluationParams params = scene.config.evaluation;
      if (spacing) positive(params.spacing = *spacing, "spacing");
      if (d_link) positive(params.d_link = *d_link, "d-link");
      if (kappa) positive(params.kappa = *kappa, "kappa");
      const RecordedPath path = path_from_json(read_json_file(path_file));
      const EvaluationReport report = evaluate(path, scene.evaluation_scene(), params);
      Json out = report_to_json(report);
      out["seed"] = seed;
      write_json_file(report_out, out);
      write_text(sibling(report_out, ".ply"), [&](std::ostream& os) { write_ply(os, scene.mesh, report.point_quality); });
      write_text(sibling(report_out, ".obj"),
                 [&](std::ostream& os) { write_paths_obj(os, report.user_path, report.auto_path); });
      std::cout << "user f=" << report.user_f << " cost=" << report.user_cost << " | gcb+ f=" << report.gcb_plus_f
                << " | qr=" << report.quality_ratio << '\n';
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      if (!report.opt_metric_user) throw UndefinedMetricError("OPT metric undefined: automated solution has zero quality");
    } else if (*gen_cmd) {
      const Scene scene = generate_scene(object);
      save_scene(scene, gen_out);
      std::cout << object << ": " << scene.mesh.vertex_count() << " vertices, " << scene.graph.size()
                << " candidate poses -> " << gen_out.string() << '\n';
    }
  } catch (const InfeasiblePathError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInfeasible;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const ArgumentError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const NotFoundError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const Json::exception& e) {
    std::cerr << "error: malformed JSON: " << e.what() << '\n';
    return kExitInvalid;
  }
  return 0;
}
