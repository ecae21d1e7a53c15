#include "arena/service.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <sstream>

#include "arena/error.hpp"

namespace arena {
namespace {

constexpr const char* kVersion = "0.1.0";

Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) fail(ErrorCode::ValidationFailed, "request body is required");
  Json body = Json::parse(req.body);  // parse_error maps to VALIDATION_FAILED
  if (!body.is_object()) fail(ErrorCode::ValidationFailed, "request body must be a JSON object");
  return body;
}

void send(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(canonical(body), "application/json");
}

void send_error(httplib::Response& res, const ApiError& e) { send(res, e.http_status, to_json(e)); }

std::size_t parse_count(const std::string& text, const char* name) {
  if (text.empty() || text.size() > 9 || text.find_first_not_of("0123456789") != std::string::npos) {
    fail(ErrorCode::ValidationFailed, std::string(name) + " must be a non-negative integer");
  }
  return std::stoul(text);
}

std::map<std::string, std::string> query_of(const httplib::Request& req) {
  std::map<std::string, std::string> q;
  for (const auto& [k, v] : req.params) q[k] = v;
  return q;
}

}  // namespace

ApiError to_api_error(const std::exception& e) {
  if (const auto* err = dynamic_cast<const Error*>(&e)) {
    return {http_status(err->code()), std::string(to_string(err->code())), err->what()};
  }
  if (dynamic_cast<const Json::exception*>(&e) != nullptr) {
    return {400, "VALIDATION_FAILED", std::string("malformed JSON: ") + e.what()};
  }
  return {500, "INTERNAL", e.what()};
}

Json to_json(const ApiError& error) { return Json{{"code", error.code}, {"message", error.message}}; }

const std::vector<std::string>& api_error_codes() {
  static const std::vector<std::string> codes = [] {
    std::vector<std::string> out;
    for (int c = 0; c <= static_cast<int>(ErrorCode::Internal); ++c) {
      out.emplace_back(to_string(static_cast<ErrorCode>(c)));
    }
    return out;
  }();
  return codes;
}

Json fund_summary(const Arena& arena, const std::string& fund_id) {
  const FundState s = arena.fund_state(fund_id);
  const MetricsReport m = compute_metrics(s.nav_series, s.fills);
  const Decimal nav = s.nav_series.points.empty() ? s.fund.cash : s.nav_series.points.back().nav;
  std::optional<std::string> status;
  for (const auto& r : arena.runs()) {
    if (r.fund_id == fund_id) status = std::string(to_string(r.status));
  }
  return Json{{"fund_id", fund_id},
              {"name", s.fund.name},
              {"model_spec", s.fund.model_spec_id},
              {"nav", to_json(nav)},
              {"cumulative_return", optional_json(m.cumulative_return)},
              {"last_cycle_date", s.last_cycle_date ? Json(format_date(*s.last_cycle_date)) : Json(nullptr)},
              {"status", status ? Json(*status) : Json("IDLE")},
              {"contaminated", s.contaminated}};
}

Json fund_detail(const Arena& arena, const std::string& fund_id) {
  const FundState s = arena.fund_state(fund_id);
  Json out = fund_summary(arena, fund_id);
  out["fund"] = to_json(s.fund);
  out["model"] = to_json(s.model);
  Json runs = Json::array();
  for (const auto& r : arena.runs()) {
    if (r.fund_id == fund_id) runs.push_back(to_json(r));
  }
  out["runs"] = runs;
  return out;
}

Json leaderboard_json(const Arena& arena, const std::string& rank_key) {
  Json rows = Json::array();
  for (const auto& row : arena.leaderboard(rank_key)) {
    const FundState s = arena.fund_state(row.fund_id);
    rows.push_back(Json{{"rank", row.rank},
                        {"fund_id", row.fund_id},
                        {"name", s.fund.name},
                        {"model_spec", s.fund.model_spec_id},
                        {"value", optional_json(row.value)},
                        {"metrics", to_json(row.report)}});
  }
  return Json{{"rank_key", rank_key}, {"rows", rows}};
}

EventFilter event_filter_from_query(const std::map<std::string, std::string>& query) {
  EventFilter f;
  auto get = [&](const char* key) -> std::optional<std::string> {
    auto it = query.find(key);
    if (it == query.end() || it->second.empty()) return std::nullopt;
    return it->second;
  };
  if (auto types = get("types")) {
    std::stringstream ss(*types);
    std::string name;
    while (std::getline(ss, name, ',')) {
      auto t = event_type_from(name);
      if (!t) fail(ErrorCode::ValidationFailed, "unknown event type " + name);
      f.types.insert(*t);
    }
  }
  if (auto from = get("from")) f.from = parse_date(*from);
  if (auto to = get("to")) f.to = parse_date(*to);
  if (auto ticker = get("ticker")) f.ticker = Ticker(*ticker);
  if (auto limit = get("limit")) {
    f.limit = parse_count(*limit, "limit");
    if (f.limit == 0 || f.limit > 1000) fail(ErrorCode::ValidationFailed, "limit must be in [1, 1000]");
  }
  if (auto offset = get("offset")) f.offset = parse_count(*offset, "offset");
  return f;
}

ArenaService::ArenaService(Arena& arena) : arena_(arena), server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

ArenaService::~ArenaService() { stop(); }

void ArenaService::install_routes() {
  httplib::Server& s = *server_;
  Arena& arena = arena_;

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, to_api_error(e));
    } catch (...) {
      send_error(res, {500, "INTERNAL", "unknown error"});
    }
  });
  s.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return;
    if (res.status == 404 || res.status == 405) {
      send_error(res, {404, "NOT_FOUND", "no route for " + req.method + " " + req.path});
    } else {
      send_error(res, {res.status, "VALIDATION_FAILED", "bad request"});
    }
  });
  s.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
  });

  s.Get("/health", [](const httplib::Request&, httplib::Response& res) {
    send(res, 200, Json{{"status", "ok"}, {"version", kVersion}, {"build", __DATE__ " " __TIME__}});
  });

  s.Post("/funds", [&arena](const httplib::Request& req, httplib::Response& res) {
    const std::string id = arena.create_fund(fund_spec_from_json(parse_body(req)));
    send(res, 201, fund_detail(arena, id));
  });
  s.Get("/funds", [&arena](const httplib::Request&, httplib::Response& res) {
    Json out = Json::array();
    for (const auto& id : arena.fund_ids()) out.push_back(fund_summary(arena, id));
    send(res, 200, Json{{"funds", out}});
  });
  s.Get(R"(/funds/([^/]+))", [&arena](const httplib::Request& req, httplib::Response& res) {
    send(res, 200, fund_detail(arena, req.matches[1]));
  });
  s.Post(R"(/funds/([^/]+)/replay)", [&arena](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    ReplayOptions opts;
    opts.allow_contaminated = body.value("allow_contaminated", false);
    const ArenaRun run = arena.start_replay(req.matches[1], require_date(body, "from"), require_date(body, "to"), opts);
    send(res, 202, to_json(run));
  });
  s.Post(R"(/funds/([^/]+)/cycles)", [&arena](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    ReplayOptions opts;
    opts.single_cycle = true;
    opts.allow_contaminated = body.value("allow_contaminated", false);
    const Date date = require_date(body, "date");
    send(res, 202, to_json(arena.start_replay(req.matches[1], date, date, opts)));
  });
  s.Get(R"(/funds/([^/]+)/nav)", [&arena](const httplib::Request& req, httplib::Response& res) {
    const FundState st = arena.fund_state(req.matches[1]);
    send(res, 200, Json{{"fund_id", st.fund.fund_id}, {"points", to_json(st.nav_series)}});
  });
  s.Get(R"(/funds/([^/]+)/metrics)", [&arena](const httplib::Request& req, httplib::Response& res) {
    Json out = to_json(arena.metrics(req.matches[1]));
    out["fund_id"] = std::string(req.matches[1]);
    send(res, 200, out);
  });
  s.Get(R"(/funds/([^/]+)/events)", [&arena](const httplib::Request& req, httplib::Response& res) {
    const EventPage page = arena.events().query(req.matches[1], event_filter_from_query(query_of(req)));
    Json events = Json::array();
    for (const auto& e : page.events) events.push_back(to_json(e));
    send(res, 200, Json{{"events", events}, {"total", page.total}, {"limit", page.limit}, {"offset", page.offset}});
  });
  s.Get("/runs", [&arena](const httplib::Request&, httplib::Response& res) {
    Json out = Json::array();
    for (const auto& r : arena.runs()) out.push_back(to_json(r));
    send(res, 200, Json{{"runs", out}});
  });
  s.Get(R"(/runs/([^/]+))", [&arena](const httplib::Request& req, httplib::Response& res) {
    send(res, 200, to_json(arena.run(req.matches[1])));
  });
  s.Post(R"(/runs/([^/]+)/control)", [&arena](const httplib::Request& req, httplib::Response& res) {
    const Json body = parse_body(req);
    send(res, 200, to_json(arena.control(req.matches[1], run_command_from(require_string(body, "command")))));
  });
  s.Get("/leaderboard", [&arena](const httplib::Request& req, httplib::Response& res) {
    const std::string key = req.has_param("rank_key") ? req.get_param_value("rank_key") : "sharpe";
    send(res, 200, leaderboard_json(arena, key));
  });
}

int ArenaService::bind(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) fail(ErrorCode::PortInUse, "cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void ArenaService::listen() { server_->listen_after_bind(); }

int ArenaService::start(const std::string& host, int port) {
  const int bound = bind(host, port);
  thread_ = std::thread([this] { listen(); });
  server_->wait_until_ready();
  return bound;
}

void ArenaService::stop() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace arena
