#pragma once

// HTTP adapter over the workbench. Projects live in subdirectories of a root
// directory; every mutating route goes through Project::submit so it lands
// in the event log. Responses carry X-FBCE-Version and, for project routes,
// an ETag with the event-log head; a mismatching If-Match yields 409.

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "bioinvert/workbench.hpp"

namespace httplib {
class Server;
}

namespace bioinvert {

inline constexpr const char* kVersionHeader = "X-FBCE-Version";
inline constexpr const char* kApiVersion = "1";

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path root = ".";
  std::optional<std::filesystem::path> static_dir;
  int threads = 8;
};

// HTTP status for an error code.
int http_status(ErrorCode code);

class WorkbenchServer {
 public:
  using ServicesFactory = std::function<Services(const ProjectConfig&)>;

  explicit WorkbenchServer(ServerConfig config, ServicesFactory services = default_services);
  ~WorkbenchServer();
  WorkbenchServer(const WorkbenchServer&) = delete;
  WorkbenchServer& operator=(const WorkbenchServer&) = delete;

  // Binds the listening socket; throws BindError. Returns the bound port.
  int bind();
  // Blocks serving requests until stop().
  void serve();
  void stop();
  bool running() const;

  JobManager& jobs() { return jobs_; }

 private:
  void routes();
  std::filesystem::path project_dir(const std::string& id) const;
  std::mutex& project_mutex(const std::string& id);

  ServerConfig config_;
  ServicesFactory services_;
  std::unique_ptr<httplib::Server> http_;
  std::mutex mutexes_guard_;
  std::map<std::string, std::unique_ptr<std::mutex>> project_mutexes_;
  JobManager jobs_;
};

}  // namespace bioinvert
