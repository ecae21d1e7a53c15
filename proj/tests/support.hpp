#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "arena/config.hpp"
#include "arena/error.hpp"
#include "arena/event_store.hpp"
#include "arena/llm_gateway.hpp"
#include "arena/market_data.hpp"
#include "arena/metrics.hpp"
#include "arena/orchestrator.hpp"
#include "arena/portfolio.hpp"

namespace arena::testing {

namespace fs = std::filesystem;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

inline const MarketClock kClock{};

inline Date D(const char* text) { return parse_date(text); }
inline Instant T(const char* text) { return parse_instant(text); }
inline Decimal M(const char* text) { return Decimal::parse(text); }
inline AsOf as_of(const char* date) { return kClock.as_of(parse_date(date)); }

PriceBar bar(const std::string& ticker, Date date, Decimal close, std::optional<Decimal> open = std::nullopt);
NewsItem news(const std::string& id, std::vector<std::string> tickers, Instant published, std::string headline = "h");
FundamentalSnapshot fundamentals(const std::string& ticker, Date period, Instant filed, const char* revenue = "100");
InsiderTransaction insider(const std::string& ticker, Instant filed, TradeDirection dir, std::int64_t shares,
                           Decimal price = Decimal::from_int(10));

/// `n` consecutive weekdays starting at (or after) `from`.
std::vector<Date> weekdays(Date from, int n);

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, const std::string& content);
std::vector<std::string> read_lines(const fs::path& path);

/// Mock rule object for the scripted provider.
Json rule(const std::string& role, const std::string& ticker, const std::string& response);
Json decision_text(const std::string& action, std::optional<std::int64_t> quantity, double confidence = 0.8);

/// init_data_dir with the given rules written as the mock script.
ArenaConfig make_data_dir(const fs::path& dir, const SampleSpec& spec, const Json& rules = Json::array());
/// Fund spec over `pool` with inception at the dataset start.
FundSpec fund_spec(std::vector<std::string> pool, const std::string& model = "mock-v1",
                   const char* cash = "100000", std::optional<Date> inception = std::nullopt);

/// ChatClient answering through a callback and remembering every request.
class ScriptedClient : public ChatClient {
 public:
  explicit ScriptedClient(std::function<std::string(const ChatRequest&)> reply) : reply_(std::move(reply)) {}
  ChatExchange complete(const ChatRequest& request) override;
  std::vector<ChatRequest> requests() const;

 private:
  std::function<std::string(const ChatRequest&)> reply_;
  mutable std::mutex mu_;
  std::vector<ChatRequest> requests_;
};

/// Transport answering through a callback; counts attempts.
class FakeTransport : public Transport {
 public:
  explicit FakeTransport(std::function<TransportResult(const ChatRequest&, int attempt)> reply)
      : reply_(std::move(reply)) {}
  TransportResult send(const ProviderProfile&, const ModelSpec&, const ChatRequest& request,
                       const std::string&) override;
  int calls() const;

 private:
  std::function<TransportResult(const ChatRequest&, int)> reply_;
  mutable std::mutex mu_;
  std::map<std::string, int> attempts_;
  int calls_ = 0;
};

TransportResult ok_text(const std::string& text);

// Independent reference implementations. They share nothing with the
// production code beyond the record types.
namespace oracle {

std::vector<PriceBar> price_bars(const std::vector<Fact>& facts, const Ticker& ticker, int lookback,
                                 const AsOf& as_of);
std::vector<NewsItem> news(const std::vector<Fact>& facts, const Ticker& ticker, int window_days, const AsOf& as_of);
std::optional<FundamentalSnapshot> fundamentals(const std::vector<Fact>& facts, const Ticker& ticker,
                                                const AsOf& as_of);
std::vector<InsiderTransaction> insiders(const std::vector<Fact>& facts, const Ticker& ticker, int window_days,
                                         const AsOf& as_of);

/// Max over all pairs i < j of (nav_i - nav_j) / nav_i, by exact integer
/// comparison, then one division.
double max_drawdown(const std::vector<std::int64_t>& nav_micros);

struct Stats {
  std::optional<double> cumulative, annualized, volatility, sharpe, sortino, win_rate;
};
Stats stats(const std::vector<std::int64_t>& nav_micros);

/// Largest q in [0, requested] passing both the cash and the weight test,
/// by linear search with 128-bit arithmetic.
std::int64_t buy_quantity(std::int64_t cash, std::int64_t price, std::int64_t held, std::int64_t others_value,
                          std::int64_t weight, std::int64_t fee_bps, std::int64_t requested);

/// Fee in micro-units, half-even, by explicit remainder inspection.
std::int64_t fee(std::int64_t price, std::int64_t quantity, std::int64_t fee_bps);

/// Double-entry bookkeeping: cash plus a lot list per ticker.
struct Ledger {
  std::int64_t cash = 0;
  std::int64_t fees = 0;
  std::map<std::string, std::int64_t> shares;
  std::map<std::string, __int128> cost_basis;  // quantity * price, micros
  __int128 bought = 0;
  __int128 sold = 0;
  void buy(const std::string& t, std::int64_t q, std::int64_t price, std::int64_t fee);
  void sell(const std::string& t, std::int64_t q, std::int64_t price, std::int64_t fee);
  std::int64_t nav(const std::map<std::string, std::int64_t>& closes) const;
};

}  // namespace oracle

}  // namespace arena::testing
