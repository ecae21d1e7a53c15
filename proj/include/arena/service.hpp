#pragma once

#include <memory>
#include <string>
#include <thread>
#include <vector>

#include "arena/orchestrator.hpp"

namespace httplib {
class Server;
}

namespace arena {

struct ApiError {
  int http_status = 500;
  std::string code;
  std::string message;
};

/// Maps any exception onto the documented error vocabulary. Malformed JSON
/// and type mismatches in request bodies are VALIDATION_FAILED.
ApiError to_api_error(const std::exception& e);
Json to_json(const ApiError& error);

/// Every code an ApiError may carry.
const std::vector<std::string>& api_error_codes();

/// JSON views shared by the HTTP handlers and the CLI.
Json fund_summary(const Arena& arena, const std::string& fund_id);
Json fund_detail(const Arena& arena, const std::string& fund_id);
Json leaderboard_json(const Arena& arena, const std::string& rank_key);
EventFilter event_filter_from_query(const std::map<std::string, std::string>& query);

/// HTTP front end over one Arena. Handlers hold no state of their own.
class ArenaService {
 public:
  explicit ArenaService(Arena& arena);
  ~ArenaService();

  /// Binds to host:port (port 0 picks a free one). PortInUse on failure.
  int bind(const std::string& host, int port);
  /// Serves until stop(); blocks.
  void listen();
  /// bind + listen on a background thread.
  int start(const std::string& host, int port);
  void stop();

 private:
  void install_routes();

  Arena& arena_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
};

}  // namespace arena
