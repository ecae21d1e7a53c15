#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "arena/chrono.hpp"
#include "arena/decimal.hpp"

namespace arena {

/// Upper-case equity symbol, ^[A-Z][A-Z.]{0,9}$.
class Ticker {
 public:
  Ticker() = default;
  explicit Ticker(std::string symbol);

  static bool is_valid(std::string_view symbol);

  const std::string& str() const { return symbol_; }
  friend auto operator<=>(const Ticker&, const Ticker&) = default;

 private:
  std::string symbol_;
};

/// The point in time a query is evaluated at. `trading_date` is the latest
/// trading day whose close is at or before `instant`.
struct AsOf {
  Instant instant;
  Date trading_date;

  friend bool operator==(const AsOf&, const AsOf&) = default;
};

/// Exchange timing conventions for a dataset, all in UTC.
struct MarketClock {
  std::chrono::seconds close_time{std::chrono::hours{20}};
  std::chrono::seconds sample_time{std::chrono::hours{21}};

  /// The as-of point a cycle for `trading_date` runs at.
  AsOf as_of(Date trading_date) const { return {at_time(trading_date, sample_time), trading_date}; }
  Instant close_of(Date date) const { return at_time(date, close_time); }
};

struct PriceBar {
  Ticker ticker;
  Date date;
  Decimal open, high, low, close;
  std::int64_t volume = 0;
  Instant available_at;
};

struct NewsItem {
  std::string id;
  std::vector<Ticker> tickers;
  Instant published_at;
  std::string headline;
  std::string body;
  std::string source;
};

struct FundamentalSnapshot {
  Ticker ticker;
  Date report_period;
  Instant filed_at;
  std::map<std::string, Decimal> figures;
};

enum class TradeDirection { Buy, Sell };

struct InsiderTransaction {
  Ticker ticker;
  Instant filed_at;
  std::string insider_role;
  TradeDirection direction = TradeDirection::Buy;
  std::int64_t shares = 0;
  Decimal price;
};

using Fact = std::variant<PriceBar, NewsItem, FundamentalSnapshot, InsiderTransaction>;

/// Closed vocabulary of fundamental figure names.
const std::set<std::string>& fundamental_figure_names();

/// The instant from which a fact may be observed.
Instant availability(const Fact& fact);
/// Short human-readable identity, e.g. "bar AAPL 2025-03-03".
std::string describe(const Fact& fact);
/// Throws ValidationFailed naming the broken invariant.
void validate(const Fact& fact, const MarketClock& clock);

struct LeakageViolation {
  std::string fact;
  Instant available_at;
};

/// Every fact whose availability lies after `as_of.instant`.
std::vector<LeakageViolation> audit_leakage(const AsOf& as_of, std::span<const Fact> facts);

/// Thread-safe, point-in-time store of market facts. Reads may run
/// concurrently; ingestion takes an exclusive lock.
class MarketDataStore {
 public:
  explicit MarketDataStore(MarketClock clock = {}) : clock_(clock) {}

  const MarketClock& clock() const { return clock_; }

  /// Validates the whole batch first, then inserts all of it. Records with an
  /// existing natural key replace the stored copy. Returns the batch size.
  std::size_t ingest_records(std::string_view source_name, std::span<const Fact> records);

  std::vector<PriceBar> get_price_bars(const Ticker& ticker, int lookback_days, const AsOf& as_of) const;
  std::vector<NewsItem> get_news(const Ticker& ticker, int window_days, const AsOf& as_of) const;
  std::optional<FundamentalSnapshot> get_fundamentals(const Ticker& ticker, const AsOf& as_of) const;
  std::vector<InsiderTransaction> get_insider_transactions(const Ticker& ticker, int window_days,
                                                           const AsOf& as_of) const;

  /// The bar dated exactly `date`, if it is visible at `as_of`.
  std::optional<PriceBar> bar_on(const Ticker& ticker, Date date, const AsOf& as_of) const;

  bool knows(const Ticker& ticker) const;
  bool is_trading_day(Date date) const;
  /// Trading days in [from, to], ascending. The calendar is the set of dates
  /// that carry at least one bar.
  std::vector<Date> trading_days(Date from, Date to) const;
  bool has_bar(const Ticker& ticker, Date date) const;
  std::optional<Date> first_bar_date() const;

  std::size_t size() const;
  std::vector<Fact> all_facts() const;
  std::map<std::string, std::size_t> ingested_by_source() const;

 private:
  using InsiderKey = std::tuple<Instant, std::string, int, std::int64_t, std::int64_t>;

  void check_known(const Ticker& ticker) const;

  MarketClock clock_;
  mutable std::shared_mutex mu_;
  std::set<Ticker> tickers_;
  std::map<Ticker, std::map<Date, PriceBar>> bars_;
  std::map<Date, std::size_t> calendar_;
  std::map<std::string, NewsItem> news_;
  std::map<Ticker, std::set<std::string>> news_index_;
  std::map<Ticker, std::map<std::pair<Date, Instant>, FundamentalSnapshot>> fundamentals_;
  std::map<Ticker, std::map<InsiderKey, InsiderTransaction>> insiders_;
  std::map<std::string, std::size_t> sources_;
};

}  // namespace arena
