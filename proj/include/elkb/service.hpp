#pragma once

#include <condition_variable>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "elkb/pipeline.hpp"

namespace elkb {

struct ServiceConfig {
  LinkerConfig defaults;
  int max_inflight = 64;       // concurrent /link requests; extras queue
  size_t latency_window = 512; // rolling sample for /stats percentiles
  std::string index_version;   // reported by /health
};

// HTTP front end over the linker. Shared state is read-only after
// set_dependencies(); requests are handled independently. /health answers 503
// until dependencies are installed.
class Service {
 public:
  explicit Service(ServiceConfig config);
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  // Installs the loaded dependencies and marks the service ready.
  void set_dependencies(std::shared_ptr<Linker> linker);

  // Binds to host:port (port 0 picks an ephemeral port) and serves on a
  // background thread. Returns the bound port.
  int start(const std::string& host, int port);
  // Blocking variant for the CLI path.
  bool listen(const std::string& host, int port);
  void stop();
  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace elkb
