#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arena/market_data.hpp"

namespace arena {

/// Source of upstream facts for a date range. Implementations throw
/// ProviderUnavailable on transient upstream failure.
class MarketProvider {
 public:
  virtual ~MarketProvider() = default;
  virtual std::vector<Fact> fetch(std::span<const Ticker> tickers, Date from, Date to) = 0;
};

struct FeedEndpoint {
  std::string base_url;      // e.g. http://127.0.0.1:8081/bars
  std::string auth_env_var;  // bearer token source; empty for none
};

struct LiveFeedConfig {
  FeedEndpoint bars, news, fundamentals, insiders;
  int timeout_s = 30;
};

/// Pulls the four feeds over HTTP. Each feed answers
/// `GET <base_url>?ticker=T&from=YYYY-MM-DD&to=YYYY-MM-DD` with JSONL (or a
/// JSON array) of records in the fixture schema.
class HttpMarketProvider : public MarketProvider {
 public:
  HttpMarketProvider(LiveFeedConfig config, MarketClock clock);
  std::vector<Fact> fetch(std::span<const Ticker> tickers, Date from, Date to) override;

 private:
  std::vector<Fact> fetch_feed(const FeedEndpoint& feed, std::string_view kind, const Ticker& ticker, Date from,
                               Date to);

  LiveFeedConfig config_;
  MarketClock clock_;
};

/// Fetches through `provider`, ingests into `store`, and snapshots the raw
/// facts into `snapshot_dir` so the day can be replayed offline later.
std::size_t refresh_from_provider(MarketDataStore& store, MarketProvider& provider, std::span<const Ticker> tickers,
                                  Date from, Date to, const std::optional<std::filesystem::path>& snapshot_dir);

struct UrlParts {
  std::string origin;  // scheme://host[:port]
  std::string path;    // always starts with '/'
};
UrlParts split_url(const std::string& url);

}  // namespace arena
