#pragma once

// WebSocket transport for sessions. Path "/observe" is a read-only telemetry
// feed; any other path opens a fresh session for that connection.

#include <cstdint>
#include <memory>
#include <string>

#include "h2r/session.hpp"

namespace h2r {

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 8765;  // 0 picks a free port
  SessionOptions session;
};

class WsServer {
 public:
  // Binds immediately; throws IoFailure if the address is unavailable.
  explicit WsServer(ServerOptions options);
  ~WsServer();
  WsServer(const WsServer&) = delete;
  WsServer& operator=(const WsServer&) = delete;

  std::uint16_t port() const;
  // Serves until stop() is called from another thread.
  void run();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace h2r
