// HTTP session service. Serves scene bundles found under --scenes and, with
// --procedural, the three built-in objects.

#include <csignal>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "inspect/http_service.hpp"

namespace fs = std::filesystem;
using namespace inspect;

namespace {

httplib::Server* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inspection session service"};
  std::string host = "127.0.0.1";
  int port = 8080;
  fs::path scenes_dir;
  fs::path snapshots;
  bool procedural = false;
  std::size_t workers = 1;
  app.add_option("--host", host, "Listen address");
  app.add_option("--port", port, "Listen port (0 picks a free one)");
  app.add_option("--scenes", scenes_dir, "Directory whose subdirectories are scene bundles");
  app.add_flag("--procedural", procedural, "Also serve panel, housing and frame-like");
  app.add_option("--snapshots", snapshots, "Directory for session snapshots written on recording stop");
  app.add_option("--workers", workers, "Evaluation worker threads");
  CLI11_PARSE(app, argc, argv);

  SessionService svc(snapshots, workers);
  try {
    if (!scenes_dir.empty()) {
      if (!fs::is_directory(scenes_dir)) throw NotFoundError(scenes_dir.string() + " is not a directory");
      for (const auto& entry : fs::directory_iterator(scenes_dir)) {
        if (!entry.is_directory() || !fs::exists(entry.path() / "scene.json")) continue;
        svc.add_scene(entry.path().filename().string(), load_scene(entry.path()));
        std::cerr << "loaded " << entry.path().filename().string() << '\n';
      }
    }
    if (procedural) {
      for (const char* name : {"panel", "housing", "frame-like"}) svc.add_scene(name, generate_scene(name));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  if (svc.scene_names().empty()) {
    std::cerr << "error: no scenes; pass --scenes or --procedural\n";
    return 2;
  }

  httplib::Server server;
  register_routes(server, svc);
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  if (port == 0) port = server.bind_to_any_port(host);
  else if (!server.bind_to_port(host, port)) {
    std::cerr << "error: cannot bind " << host << ':' << port << '\n';
    return 1;
  }
  std::cout << "listening on http://" << host << ':' << port << std::endl;
  server.listen_after_bind();
  return 0;
}
