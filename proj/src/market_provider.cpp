#include "arena/market_provider.hpp"

#include <httplib.h>

#include <cstdlib>
#include <sstream>

#include "arena/error.hpp"
#include "arena/fixture.hpp"

namespace arena {

UrlParts split_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) fail(ErrorCode::BadConfig, "url needs a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

HttpMarketProvider::HttpMarketProvider(LiveFeedConfig config, MarketClock clock)
    : config_(std::move(config)), clock_(clock) {}

std::vector<Fact> HttpMarketProvider::fetch(std::span<const Ticker> tickers, Date from, Date to) {
  std::vector<Fact> out;
  const std::pair<const FeedEndpoint*, std::string_view> feeds[] = {
      {&config_.bars, "bars"}, {&config_.news, "news"}, {&config_.fundamentals, "fundamentals"},
      {&config_.insiders, "insiders"}};
  for (const auto& ticker : tickers) {
    for (const auto& [feed, kind] : feeds) {
      if (feed->base_url.empty()) continue;
      auto facts = fetch_feed(*feed, kind, ticker, from, to);
      out.insert(out.end(), std::make_move_iterator(facts.begin()), std::make_move_iterator(facts.end()));
    }
  }
  return out;
}

std::vector<Fact> HttpMarketProvider::fetch_feed(const FeedEndpoint& feed, std::string_view kind,
                                                 const Ticker& ticker, Date from, Date to) {
  const UrlParts url = split_url(feed.base_url);
  httplib::Client client(url.origin);
  client.set_connection_timeout(config_.timeout_s, 0);
  client.set_read_timeout(config_.timeout_s, 0);
  httplib::Headers headers;
  if (!feed.auth_env_var.empty()) {
    const char* token = std::getenv(feed.auth_env_var.c_str());
    if (token == nullptr) fail(ErrorCode::ProviderUnavailable, "credentials: " + feed.auth_env_var + " is not set");
    headers.emplace("Authorization", std::string("Bearer ") + token);
  }
  const httplib::Params params{{"ticker", ticker.str()}, {"from", format_date(from)}, {"to", format_date(to)}};
  auto res = client.Get(url.path, params, headers);
  if (!res) {
    fail(ErrorCode::ProviderUnavailable, std::string(kind) + " feed unreachable: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    fail(ErrorCode::ProviderUnavailable, std::string(kind) + " feed returned HTTP " + std::to_string(res->status));
  }

  std::vector<Fact> out;
  try {
    const auto first = res->body.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && res->body[first] == '[') {
      for (const auto& obj : Json::parse(res->body)) out.push_back(fact_from_json(obj, kind, clock_));
    } else {
      std::istringstream lines(res->body);
      std::string line;
      while (std::getline(lines, line)) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(fact_from_json(Json::parse(line), kind, clock_));
      }
    }
  } catch (const Json::exception& e) {
    fail(ErrorCode::ProviderUnavailable, std::string(kind) + " feed sent malformed JSON: " + e.what());
  }
  return out;
}

std::size_t refresh_from_provider(MarketDataStore& store, MarketProvider& provider, std::span<const Ticker> tickers,
                                  Date from, Date to, const std::optional<std::filesystem::path>& snapshot_dir) {
  auto facts = provider.fetch(tickers, from, to);
  const auto n = store.ingest_records("live", facts);
  if (snapshot_dir) append_to_dataset(*snapshot_dir, facts);
  return n;
}

}  // namespace arena
