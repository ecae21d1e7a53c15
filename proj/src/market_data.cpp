#include "arena/market_data.hpp"

#include <algorithm>
#include <mutex>

#include "arena/error.hpp"

namespace arena {
namespace {

constexpr auto kDay = std::chrono::hours{24};

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

}  // namespace

Ticker::Ticker(std::string symbol) : symbol_(std::move(symbol)) {
  if (!is_valid(symbol_)) fail(ErrorCode::ValidationFailed, "invalid ticker '" + symbol_ + "'");
}

bool Ticker::is_valid(std::string_view symbol) {
  if (symbol.empty() || symbol.size() > 10) return false;
  if (symbol[0] < 'A' || symbol[0] > 'Z') return false;
  return std::all_of(symbol.begin() + 1, symbol.end(), [](char c) { return (c >= 'A' && c <= 'Z') || c == '.'; });
}

const std::set<std::string>& fundamental_figure_names() {
  static const std::set<std::string> names{"revenue", "net_income", "total_assets", "total_liabilities",
                                           "eps", "shares_outstanding"};
  return names;
}

Instant availability(const Fact& fact) {
  return std::visit(overloaded{[](const PriceBar& b) { return b.available_at; },
                               [](const NewsItem& n) { return n.published_at; },
                               [](const FundamentalSnapshot& f) { return f.filed_at; },
                               [](const InsiderTransaction& t) { return t.filed_at; }},
                    fact);
}

std::string describe(const Fact& fact) {
  return std::visit(
      overloaded{[](const PriceBar& b) { return "bar " + b.ticker.str() + " " + format_date(b.date); },
                 [](const NewsItem& n) { return "news " + n.id; },
                 [](const FundamentalSnapshot& f) {
                   return "fundamentals " + f.ticker.str() + " " + format_date(f.report_period) + " filed " +
                          format_instant(f.filed_at);
                 },
                 [](const InsiderTransaction& t) {
                   return "insider " + t.ticker.str() + " " + format_instant(t.filed_at) + " " + t.insider_role;
                 }},
      fact);
}

void validate(const Fact& fact, const MarketClock& clock) {
  std::visit(overloaded{
                 [&](const PriceBar& b) {
                   if (!b.low.is_positive()) fail(ErrorCode::ValidationFailed, "bar low must be positive");
                   if (b.low > b.high) fail(ErrorCode::ValidationFailed, "bar low > high");
                   if (b.open < b.low || b.open > b.high) fail(ErrorCode::ValidationFailed, "bar open outside [low, high]");
                   if (b.close < b.low || b.close > b.high) {
                     fail(ErrorCode::ValidationFailed, "bar close outside [low, high]");
                   }
                   if (b.volume < 0) fail(ErrorCode::ValidationFailed, "bar volume negative");
                   if (b.available_at < clock.close_of(b.date)) {
                     fail(ErrorCode::ValidationFailed, "bar available before the close of its date");
                   }
                 },
                 [](const NewsItem& n) {
                   if (n.id.empty()) fail(ErrorCode::ValidationFailed, "news id empty");
                   if (n.tickers.empty()) fail(ErrorCode::ValidationFailed, "news item without tickers");
                 },
                 [](const FundamentalSnapshot& f) {
                   if (f.filed_at < Instant{f.report_period}) {
                     fail(ErrorCode::ValidationFailed, "fundamentals filed before report period");
                   }
                   for (const auto& [name, value] : f.figures) {
                     if (!fundamental_figure_names().contains(name)) {
                       fail(ErrorCode::ValidationFailed, "unknown fundamental figure '" + name + "'");
                     }
                   }
                 },
                 [](const InsiderTransaction& t) {
                   if (t.shares <= 0) fail(ErrorCode::ValidationFailed, "insider shares must be positive");
                   if (t.price.is_negative()) fail(ErrorCode::ValidationFailed, "insider price negative");
                 },
             },
             fact);
}

std::vector<LeakageViolation> audit_leakage(const AsOf& as_of, std::span<const Fact> facts) {
  std::vector<LeakageViolation> out;
  for (const auto& fact : facts) {
    const Instant at = availability(fact);
    if (at > as_of.instant) out.push_back({describe(fact), at});
  }
  return out;
}

std::size_t MarketDataStore::ingest_records(std::string_view source_name, std::span<const Fact> records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      validate(records[i], clock_);
    } catch (const Error& e) {
      fail(ErrorCode::ValidationFailed, "record " + std::to_string(i) + ": " + e.what());
    }
  }

  std::unique_lock lock(mu_);
  for (const auto& record : records) {
    std::visit(overloaded{
                   [&](const PriceBar& b) {
                     tickers_.insert(b.ticker);
                     auto [it, inserted] = bars_[b.ticker].insert_or_assign(b.date, b);
                     if (inserted) ++calendar_[b.date];
                   },
                   [&](const NewsItem& n) {
                     if (auto old = news_.find(n.id); old != news_.end()) {
                       for (const auto& t : old->second.tickers) news_index_[t].erase(n.id);
                     }
                     news_.insert_or_assign(n.id, n);
                     for (const auto& t : n.tickers) {
                       tickers_.insert(t);
                       news_index_[t].insert(n.id);
                     }
                   },
                   [&](const FundamentalSnapshot& f) {
                     tickers_.insert(f.ticker);
                     fundamentals_[f.ticker].insert_or_assign(std::pair{f.report_period, f.filed_at}, f);
                   },
                   [&](const InsiderTransaction& t) {
                     tickers_.insert(t.ticker);
                     InsiderKey key{t.filed_at, t.insider_role, static_cast<int>(t.direction), t.shares,
                                    t.price.micros()};
                     insiders_[t.ticker].insert_or_assign(key, t);
                   },
               },
               record);
  }
  sources_[std::string(source_name)] += records.size();
  return records.size();
}

void MarketDataStore::check_known(const Ticker& ticker) const {
  if (!tickers_.contains(ticker)) fail(ErrorCode::UnknownTicker, "unknown ticker " + ticker.str());
}

std::vector<PriceBar> MarketDataStore::get_price_bars(const Ticker& ticker, int lookback_days,
                                                      const AsOf& as_of) const {
  if (lookback_days <= 0) fail(ErrorCode::ValidationFailed, "lookback_days must be positive");
  std::shared_lock lock(mu_);
  check_known(ticker);
  std::vector<PriceBar> out;
  auto it = bars_.find(ticker);
  if (it == bars_.end()) return out;
  const auto& series = it->second;
  for (auto bar = series.upper_bound(as_of.trading_date); bar != series.begin();) {
    --bar;
    if (bar->second.available_at > as_of.instant) continue;
    out.push_back(bar->second);
    if (static_cast<int>(out.size()) == lookback_days) break;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::vector<NewsItem> MarketDataStore::get_news(const Ticker& ticker, int window_days, const AsOf& as_of) const {
  if (window_days <= 0) fail(ErrorCode::ValidationFailed, "window_days must be positive");
  std::shared_lock lock(mu_);
  check_known(ticker);
  std::vector<NewsItem> out;
  const Instant earliest = as_of.instant - window_days * kDay;
  if (auto idx = news_index_.find(ticker); idx != news_index_.end()) {
    for (const auto& id : idx->second) {
      const NewsItem& item = news_.at(id);
      if (item.published_at <= as_of.instant && item.published_at >= earliest) out.push_back(item);
    }
  }
  std::sort(out.begin(), out.end(), [](const NewsItem& a, const NewsItem& b) {
    if (a.published_at != b.published_at) return a.published_at > b.published_at;
    return a.id < b.id;
  });
  return out;
}

std::optional<FundamentalSnapshot> MarketDataStore::get_fundamentals(const Ticker& ticker, const AsOf& as_of) const {
  std::shared_lock lock(mu_);
  check_known(ticker);
  std::optional<FundamentalSnapshot> best;
  if (auto it = fundamentals_.find(ticker); it != fundamentals_.end()) {
    for (const auto& [key, snap] : it->second) {
      if (snap.filed_at > as_of.instant) continue;
      // Latest filing wins; a later report period breaks a filing-time tie.
      if (!best || snap.filed_at > best->filed_at ||
          (snap.filed_at == best->filed_at && snap.report_period > best->report_period)) {
        best = snap;
      }
    }
  }
  return best;
}

std::vector<InsiderTransaction> MarketDataStore::get_insider_transactions(const Ticker& ticker, int window_days,
                                                                          const AsOf& as_of) const {
  if (window_days <= 0) fail(ErrorCode::ValidationFailed, "window_days must be positive");
  std::shared_lock lock(mu_);
  check_known(ticker);
  std::vector<InsiderTransaction> out;
  const Instant earliest = as_of.instant - window_days * kDay;
  if (auto it = insiders_.find(ticker); it != insiders_.end()) {
    // Keys ascend by filed_at, so walking backwards yields newest first.
    for (auto rit = it->second.rbegin(); rit != it->second.rend(); ++rit) {
      const auto& tx = rit->second;
      if (tx.filed_at > as_of.instant) continue;
      if (tx.filed_at < earliest) break;
      out.push_back(tx);
    }
  }
  return out;
}

std::optional<PriceBar> MarketDataStore::bar_on(const Ticker& ticker, Date date, const AsOf& as_of) const {
  std::shared_lock lock(mu_);
  auto it = bars_.find(ticker);
  if (it == bars_.end()) return std::nullopt;
  auto bar = it->second.find(date);
  if (bar == it->second.end() || bar->second.available_at > as_of.instant) return std::nullopt;
  return bar->second;
}

bool MarketDataStore::knows(const Ticker& ticker) const {
  std::shared_lock lock(mu_);
  return tickers_.contains(ticker);
}

bool MarketDataStore::is_trading_day(Date date) const {
  std::shared_lock lock(mu_);
  return calendar_.contains(date);
}

std::vector<Date> MarketDataStore::trading_days(Date from, Date to) const {
  std::shared_lock lock(mu_);
  std::vector<Date> out;
  for (auto it = calendar_.lower_bound(from); it != calendar_.end() && it->first <= to; ++it) out.push_back(it->first);
  return out;
}

bool MarketDataStore::has_bar(const Ticker& ticker, Date date) const {
  std::shared_lock lock(mu_);
  auto it = bars_.find(ticker);
  return it != bars_.end() && it->second.contains(date);
}

std::optional<Date> MarketDataStore::first_bar_date() const {
  std::shared_lock lock(mu_);
  if (calendar_.empty()) return std::nullopt;
  return calendar_.begin()->first;
}

std::size_t MarketDataStore::size() const {
  std::shared_lock lock(mu_);
  std::size_t n = news_.size();
  for (const auto& [t, s] : bars_) n += s.size();
  for (const auto& [t, s] : fundamentals_) n += s.size();
  for (const auto& [t, s] : insiders_) n += s.size();
  return n;
}

std::vector<Fact> MarketDataStore::all_facts() const {
  std::shared_lock lock(mu_);
  std::vector<Fact> out;
  for (const auto& [t, s] : bars_)
    for (const auto& [d, b] : s) out.emplace_back(b);
  for (const auto& [id, n] : news_) out.emplace_back(n);
  for (const auto& [t, s] : fundamentals_)
    for (const auto& [k, f] : s) out.emplace_back(f);
  for (const auto& [t, s] : insiders_)
    for (const auto& [k, x] : s) out.emplace_back(x);
  return out;
}

std::map<std::string, std::size_t> MarketDataStore::ingested_by_source() const {
  std::shared_lock lock(mu_);
  return sources_;
}

}  // namespace arena
