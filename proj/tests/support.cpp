#include "support.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace arena::testing {

TempDir::TempDir() {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("arena-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

PriceBar bar(const std::string& ticker, Date date, Decimal close, std::optional<Decimal> open) {
  PriceBar b;
  b.ticker = Ticker(ticker);
  b.date = date;
  b.open = open.value_or(close);
  b.close = close;
  b.high = std::max(b.open, b.close) + M("1");
  b.low = std::min(b.open, b.close) - M("1");
  if (!b.low.is_positive()) b.low = M("0.01");
  b.volume = 1000;
  b.available_at = kClock.close_of(date);
  return b;
}

NewsItem news(const std::string& id, std::vector<std::string> tickers, Instant published, std::string headline) {
  NewsItem n;
  n.id = id;
  for (auto& t : tickers) n.tickers.emplace_back(t);
  n.published_at = published;
  n.headline = std::move(headline);
  n.source = "wire";
  return n;
}

FundamentalSnapshot fundamentals(const std::string& ticker, Date period, Instant filed, const char* revenue) {
  FundamentalSnapshot f;
  f.ticker = Ticker(ticker);
  f.report_period = period;
  f.filed_at = filed;
  f.figures["revenue"] = M(revenue);
  return f;
}

InsiderTransaction insider(const std::string& ticker, Instant filed, TradeDirection dir, std::int64_t shares,
                           Decimal price) {
  InsiderTransaction t;
  t.ticker = Ticker(ticker);
  t.filed_at = filed;
  t.insider_role = "CFO";
  t.direction = dir;
  t.shares = shares;
  t.price = price;
  return t;
}

std::vector<Date> weekdays(Date from, int n) {
  std::vector<Date> out;
  for (Date d = from; static_cast<int>(out.size()) < n; d += std::chrono::days{1}) {
    if (!is_weekend(d)) out.push_back(d);
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> out;
  std::ifstream in(path);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

Json rule(const std::string& role, const std::string& ticker, const std::string& response) {
  Json r{{"role", role}, {"response", response}};
  if (!ticker.empty()) r["ticker"] = ticker;
  return r;
}

Json decision_text(const std::string& action, std::optional<std::int64_t> quantity, double confidence) {
  return Json{{"action", action},
              {"quantity", quantity ? Json(*quantity) : Json(nullptr)},
              {"confidence", confidence},
              {"rationale", "scripted"}};
}

ArenaConfig make_data_dir(const fs::path& dir, const SampleSpec& spec, const Json& rules) {
  ArenaConfig config = init_data_dir(dir, spec);
  write_file(dir / "mock" / "script.json", rules.dump(2));
  return config;
}

FundSpec fund_spec(std::vector<std::string> pool, const std::string& model, const char* cash,
                   std::optional<Date> inception) {
  FundSpec s;
  s.name = "test fund";
  s.model_spec_id = model;
  for (auto& t : pool) s.stock_pool.insert(Ticker(t));
  s.initial_cash = M(cash);
  s.inception = inception;
  return s;
}

ChatExchange ScriptedClient::complete(const ChatRequest& request) {
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request);
  }
  ChatExchange ex;
  ex.request = request;
  ex.response.text = reply_(request);
  ex.response.finish_reason = "stop";
  ex.request_hash = request_hash(request);
  return ex;
}

std::vector<ChatRequest> ScriptedClient::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

TransportResult FakeTransport::send(const ProviderProfile&, const ModelSpec&, const ChatRequest& request,
                                    const std::string&) {
  int attempt = 0;
  {
    std::lock_guard lock(mu_);
    attempt = ++attempts_[request.user];
    ++calls_;
  }
  return reply_(request, attempt);
}

int FakeTransport::calls() const {
  std::lock_guard lock(mu_);
  return calls_;
}

TransportResult ok_text(const std::string& text) {
  TransportResult r;
  r.status = 200;
  r.response.text = text;
  r.response.finish_reason = "stop";
  return r;
}

namespace oracle {

namespace {

template <typename T>
std::vector<T> of_type(const std::vector<Fact>& facts) {
  std::vector<T> out;
  for (const auto& f : facts) {
    if (const auto* x = std::get_if<T>(&f)) out.push_back(*x);
  }
  return out;
}

}  // namespace

std::vector<PriceBar> price_bars(const std::vector<Fact>& facts, const Ticker& ticker, int lookback,
                                 const AsOf& as_of) {
  // Last write per date wins, as the store replaces by natural key.
  std::map<Date, PriceBar> latest;
  for (const auto& b : of_type<PriceBar>(facts)) {
    if (b.ticker == ticker) latest[b.date] = b;
  }
  std::vector<PriceBar> visible;
  for (const auto& [d, b] : latest) {
    if (d <= as_of.trading_date && b.available_at <= as_of.instant) visible.push_back(b);
  }
  if (static_cast<int>(visible.size()) > lookback) visible.erase(visible.begin(), visible.end() - lookback);
  return visible;
}

std::vector<NewsItem> news(const std::vector<Fact>& facts, const Ticker& ticker, int window_days,
                           const AsOf& as_of) {
  std::map<std::string, NewsItem> latest;
  for (const auto& n : of_type<NewsItem>(facts)) latest[n.id] = n;
  std::vector<NewsItem> out;
  const Instant earliest = as_of.instant - std::chrono::hours{24} * window_days;
  for (const auto& [id, n] : latest) {
    const bool mentions = std::find(n.tickers.begin(), n.tickers.end(), ticker) != n.tickers.end();
    if (mentions && n.published_at <= as_of.instant && n.published_at >= earliest) out.push_back(n);
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const NewsItem& a, const NewsItem& b) { return a.published_at > b.published_at; });
  return out;
}

std::optional<FundamentalSnapshot> fundamentals(const std::vector<Fact>& facts, const Ticker& ticker,
                                                const AsOf& as_of) {
  std::optional<FundamentalSnapshot> best;
  for (const auto& f : of_type<FundamentalSnapshot>(facts)) {
    if (f.ticker != ticker || f.filed_at > as_of.instant) continue;
    if (!best || std::pair(f.filed_at, f.report_period) >= std::pair(best->filed_at, best->report_period)) best = f;
  }
  return best;
}

std::vector<InsiderTransaction> insiders(const std::vector<Fact>& facts, const Ticker& ticker, int window_days,
                                         const AsOf& as_of) {
  std::vector<InsiderTransaction> out;
  const Instant earliest = as_of.instant - std::chrono::hours{24} * window_days;
  for (const auto& t : of_type<InsiderTransaction>(facts)) {
    if (t.ticker == ticker && t.filed_at <= as_of.instant && t.filed_at >= earliest) out.push_back(t);
  }
  return out;
}

double max_drawdown(const std::vector<std::int64_t>& nav) {
  std::int64_t best_num = 0;
  std::int64_t best_den = 1;
  for (std::size_t i = 0; i < nav.size(); ++i) {
    for (std::size_t j = i + 1; j < nav.size(); ++j) {
      const std::int64_t num = nav[i] - nav[j];
      if (num <= 0) continue;
      // num / nav[i] > best_num / best_den
      if (static_cast<__int128>(num) * best_den > static_cast<__int128>(best_num) * nav[i]) {
        best_num = num;
        best_den = nav[i];
      }
    }
  }
  return static_cast<double>(best_num) / static_cast<double>(best_den);
}

Stats stats(const std::vector<std::int64_t>& nav) {
  Stats s;
  if (nav.empty()) return s;
  s.cumulative = static_cast<double>(static_cast<long double>(nav.back()) / nav.front() - 1.0L);
  if (nav.size() < 2) return s;
  std::vector<long double> r;
  for (std::size_t i = 1; i < nav.size(); ++i) r.push_back(static_cast<long double>(nav[i]) / nav[i - 1] - 1.0L);
  const long double n = static_cast<long double>(r.size());
  long double sum = 0;
  long double wins = 0;
  for (auto x : r) {
    sum += x;
    if (x > 0) wins += 1;
  }
  const long double mean = sum / n;
  s.annualized = static_cast<double>(std::pow(1.0L + static_cast<long double>(*s.cumulative), 252.0L / n) - 1.0L);
  s.win_rate = static_cast<double>(wins / n);
  if (r.size() >= 2) {
    long double ss = 0;
    for (auto x : r) ss += (x - mean) * (x - mean);
    const long double sd = std::sqrt(ss / (n - 1));
    s.volatility = static_cast<double>(sd * std::sqrt(252.0L));
    if (sd > 0) s.sharpe = static_cast<double>(mean / sd * std::sqrt(252.0L));
  }
  long double down = 0;
  for (auto x : r) {
    if (x < 0) down += x * x;
  }
  if (down > 0) s.sortino = static_cast<double>(mean / std::sqrt(down / n) * std::sqrt(252.0L));
  return s;
}

std::int64_t fee(std::int64_t price, std::int64_t quantity, std::int64_t fee_bps) {
  const __int128 num = static_cast<__int128>(price) * quantity * fee_bps;
  __int128 q = num / 10000;
  const __int128 rem = num % 10000;
  if (rem > 5000 || (rem == 5000 && q % 2 != 0)) ++q;
  return static_cast<std::int64_t>(q);
}

std::int64_t buy_quantity(std::int64_t cash, std::int64_t price, std::int64_t held, std::int64_t others_value,
                          std::int64_t weight, std::int64_t fee_bps, std::int64_t requested) {
  const __int128 nav = static_cast<__int128>(cash) + others_value + static_cast<__int128>(held) * price;
  std::int64_t best = 0;
  for (std::int64_t q = 1; q <= requested; ++q) {
    const std::int64_t f = fee(price, q, fee_bps);
    const __int128 cost = static_cast<__int128>(q) * price + f;
    if (cost > cash) break;
    const __int128 lhs = (static_cast<__int128>(held) + q) * price * 1'000'000;
    const __int128 rhs = static_cast<__int128>(weight) * (nav - f);
    if (lhs > rhs) break;
    best = q;
  }
  return best;
}

void Ledger::buy(const std::string& t, std::int64_t q, std::int64_t price, std::int64_t f) {
  cash -= q * price + f;
  fees += f;
  shares[t] += q;
  cost_basis[t] += static_cast<__int128>(q) * price;
  bought += static_cast<__int128>(q) * price;
}

void Ledger::sell(const std::string& t, std::int64_t q, std::int64_t price, std::int64_t f) {
  cash += q * price - f;
  fees += f;
  shares[t] -= q;
  sold += static_cast<__int128>(q) * price;
}

std::int64_t Ledger::nav(const std::map<std::string, std::int64_t>& closes) const {
  __int128 total = cash;
  for (const auto& [t, q] : shares) total += static_cast<__int128>(q) * closes.at(t);
  return static_cast<std::int64_t>(total);
}

}  // namespace oracle

}  // namespace arena::testing
