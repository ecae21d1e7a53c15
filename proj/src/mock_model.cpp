#include "arena/mock_model.hpp"

#include <fstream>
#include <sstream>

#include "arena/error.hpp"

namespace arena {
namespace {

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::size_t count(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos; pos = hay.find(needle, pos + needle.size())) ++n;
  return n;
}

std::optional<std::string> opt_string(const Json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  return it->get<std::string>();
}

std::string heuristic(const ChatRequest& request) {
  const std::string role = prompt_header(request.user, "ROLE").value_or("");
  if (role == "planner") {
    Json assignments = Json::object();
    std::istringstream pool(prompt_header(request.user, "STOCK_POOL").value_or(""));
    std::string ticker;
    while (std::getline(pool, ticker, ',')) {
      const auto b = ticker.find_first_not_of(' ');
      if (b == std::string::npos) continue;
      assignments[ticker.substr(b)] = Json::array({"TECHNICAL", "FUNDAMENTAL", "INSIDER", "MEDIA"});
    }
    return Json{{"assignments", assignments}, {"rationale", "cover every ticker with every analyst"}}.dump();
  }
  if (role == "analyst") {
    const std::uint64_t h = fnv1a(request.user);
    static const char* stances[] = {"BULLISH", "BEARISH", "NEUTRAL"};
    const double confidence = static_cast<double>(50 + (h >> 8) % 50) / 100.0;
    return Json{{"stance", stances[h % 3]},
                {"confidence", confidence},
                {"rationale", "mock reading of the provided context"},
                {"key_evidence", Json::array({"context digest " + std::to_string(h % 100000)})}}
        .dump();
  }
  if (role == "manager") {
    // Only the signals section counts, so instructions in the template
    // mentioning the vocabulary do not bias the vote.
    std::string_view prompt = request.user;
    const auto start = prompt.find("SIGNALS:");
    const auto section = start == std::string_view::npos ? std::string_view{} : prompt.substr(start);
    const auto bull = static_cast<double>(count(section, "\"BULLISH\""));
    const auto bear = static_cast<double>(count(section, "\"BEARISH\""));
    const double total = bull + bear + static_cast<double>(count(section, "\"NEUTRAL\""));
    std::string action = "HOLD";
    double confidence = 0.0;
    if (total > 0 && bull != bear) {
      action = bull > bear ? "BUY" : "SELL";
      confidence = (bull > bear ? bull - bear : bear - bull) / total;
    }
    return Json{{"action", action},
                {"quantity", nullptr},
                {"confidence", confidence},
                {"rationale", "majority of analyst stances"}}
        .dump();
  }
  return "I cannot decide.";
}

}  // namespace

std::optional<std::string> prompt_header(std::string_view prompt, std::string_view key) {
  std::size_t pos = 0;
  while (pos <= prompt.size()) {
    auto end = prompt.find('\n', pos);
    if (end == std::string_view::npos) end = prompt.size();
    std::string_view line = prompt.substr(pos, end - pos);
    if (line.size() > key.size() && line.substr(0, key.size()) == key && line[key.size()] == ':') {
      auto value = line.substr(key.size() + 1);
      while (!value.empty() && value.front() == ' ') value.remove_prefix(1);
      while (!value.empty() && (value.back() == ' ' || value.back() == '\r')) value.remove_suffix(1);
      return std::string(value);
    }
    pos = end + 1;
  }
  return std::nullopt;
}

MockModel MockModel::from_json(const Json& script) {
  const Json& rules = script.is_array() ? script : script.value("rules", Json::array());
  std::vector<MockRule> out;
  for (const auto& r : rules) {
    MockRule rule;
    rule.role = opt_string(r, "role");
    rule.kind = opt_string(r, "kind");
    rule.ticker = opt_string(r, "ticker");
    rule.date = opt_string(r, "date");
    rule.contains = opt_string(r, "contains");
    const Json& resp = require(r, "response");
    rule.response = resp.is_string() ? resp.get<std::string>() : resp.dump();
    out.push_back(std::move(rule));
  }
  return MockModel(std::move(out));
}

MockModel MockModel::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::BadConfig, "mock script not found: " + path.string());
  try {
    return from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    fail(ErrorCode::BadConfig, "mock script " + path.string() + ": " + e.what());
  }
}

std::string MockModel::respond(const ChatRequest& request) const {
  auto matches = [&](const std::optional<std::string>& want, std::string_view key) {
    return !want || prompt_header(request.user, key) == *want;
  };
  for (const auto& rule : rules_) {
    if (matches(rule.role, "ROLE") && matches(rule.kind, "ANALYST") && matches(rule.ticker, "TICKER") &&
        matches(rule.date, "DATE") && (!rule.contains || request.user.find(*rule.contains) != std::string::npos)) {
      return rule.response;
    }
  }
  return heuristic(request);
}

}  // namespace arena
