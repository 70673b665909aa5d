#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "ttm/hub.hpp"

namespace ttm::service {

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8080;  // 0 picks a free port
  HubConfig hub;
};

/// WebSocket front end for a ChatHub. One JSON envelope per text frame. All
/// hub calls run on a single io_context thread.
class Server {
 public:
  explicit Server(ServerOptions options);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and listens; returns the bound port. Throws Io.
  std::uint16_t bind();
  /// Serves until stop() is called or SIGINT/SIGTERM arrives (when
  /// handle_signals is set).
  void run(bool handle_signals = false);
  /// Safe to call from any thread.
  void stop();

  struct Impl;

 private:
  std::unique_ptr<Impl> impl_;
};

}  // namespace ttm::service
