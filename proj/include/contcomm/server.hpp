#pragma once

#include <atomic>
#include <memory>
#include <string>
#include <thread>

#include "contcomm/liveness.hpp"
#include "contcomm/pipeline.hpp"

namespace httplib {
class Server;
}

namespace contcomm::gateway {

/// HTTP JSON API plus the server-sent event stream over a running pipeline.
///
///   POST   /subscriptions              {user_id, topics[], bbox?}
///   DELETE /subscriptions/{user}/{topic}
///   GET    /topics
///   GET    /communities?topic=&bbox=south,west,north,east
///   GET    /health
///   GET    /events?user_id=            text/event-stream, pin_upsert / pin_removed
class GatewayServer {
 public:
  explicit GatewayServer(Pipeline& pipeline, const LivenessMonitor* liveness = nullptr);
  ~GatewayServer();
  GatewayServer(const GatewayServer&) = delete;
  GatewayServer& operator=(const GatewayServer&) = delete;

  /// Port 0 picks a free one. Returns the bound port; throws Io.
  int bind(const std::string& host, int port);
  /// Serves on a background thread (after bind).
  void start();
  /// Serves on the calling thread until stop() (after bind).
  void run();
  /// Ends event streams and stops listening.
  void stop();
  int port() const { return port_; }

 private:
  void routes();

  Pipeline& pipeline_;
  const LivenessMonitor* liveness_;
  std::unique_ptr<httplib::Server> http_;
  std::atomic<bool> stopping_{false};
  int port_ = -1;
  std::thread thread_;
};

}  // namespace contcomm::gateway
