#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <unordered_map>

#include <json.hpp>

#include "bellsim/apparatus_sim.hpp"
#include "bellsim/rng.hpp"
#include "bellsim/session_io.hpp"

namespace httplib {
class Server;
}

/// Live benches behind a small JSON-over-HTTP API (routes under /v1, see
/// docs/api.md).
namespace bellsim::service {

struct SessionEntry {
  io::SessionConfig config;
  std::shared_ptr<sim::LiveSession> session;
};

/// All server state. Ids are opaque random tokens.
class SessionRegistry {
 public:
  SessionRegistry();

  std::string create(const io::SessionConfig& config);
  /// nullptr when the id is unknown.
  std::shared_ptr<const SessionEntry> find(const std::string& id) const;
  bool erase(const std::string& id);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::unordered_map<std::string, std::shared_ptr<const SessionEntry>> sessions_;
  Engine id_engine_;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Routes one request. Transport-independent so it can be tested without
/// sockets; HttpServer forwards to it.
class Api {
 public:
  explicit Api(SessionRegistry& registry) : registry_(registry) {}

  ApiResponse handle(std::string_view method, std::string_view path, std::string_view body);

 private:
  ApiResponse create_session(std::string_view body);
  ApiResponse session_route(std::string_view method, const std::string& id,
                            std::string_view action, std::string_view body);

  SessionRegistry& registry_;
};

/// cpp-httplib front end for Api.
class HttpServer {
 public:
  explicit HttpServer(SessionRegistry& registry);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  /// Binds to `port` (0 picks a free one) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks serving until stop().
  bool serve();
  void stop();

 private:
  Api api_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace bellsim::service
