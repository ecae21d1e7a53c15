#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "arena/error.hpp"
#include "arena/fixture.hpp"
#include "arena/market_data.hpp"
#include "support.hpp"

using namespace arena;
using namespace arena::testing;
using namespace std::chrono_literals;

namespace {

template <typename T>
std::vector<std::string> dump(const std::vector<T>& xs) {
  std::vector<std::string> out;
  for (const auto& x : xs) out.push_back(canonical(fact_to_json(Fact{x})));
  return out;
}

template <typename T>
std::vector<std::string> dump_sorted(const std::vector<T>& xs) {
  auto out = dump(xs);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<Fact> random_facts(std::mt19937_64& rng, std::size_t target) {
  const std::vector<std::string> tickers{"AAPL", "MSFT", "NVDA", "BRK.B"};
  const auto days = weekdays(D("2025-01-06"), 80);
  std::vector<Fact> facts;
  auto pick_day = [&] { return days[rng() % days.size()]; };
  auto price = [&] { return Decimal::from_micros(5'000'000 + static_cast<std::int64_t>(rng() % 300'000'000)); };
  while (facts.size() < target) {
    const std::string t = tickers[rng() % tickers.size()];
    switch (rng() % 4) {
      case 0: {
        PriceBar b = bar(t, pick_day(), price());
        // Some vendors publish late.
        if (rng() % 5 == 0) b.available_at += std::chrono::hours{static_cast<int>(rng() % 72)};
        facts.push_back(b);
        break;
      }
      case 1: {
        const Instant at = Instant{pick_day()} + std::chrono::minutes{static_cast<int>(rng() % 1440)};
        std::vector<std::string> mentioned{t};
        if (rng() % 3 == 0) mentioned.push_back(tickers[rng() % tickers.size()]);
        facts.push_back(news("n" + std::to_string(rng() % (target + 1)), mentioned, at));
        break;
      }
      case 2: {
        const Date period = pick_day();
        facts.push_back(fundamentals(t, period, Instant{period} + std::chrono::hours{static_cast<int>(rng() % 2000)}));
        break;
      }
      default: {
        const Instant at = Instant{pick_day()} + std::chrono::minutes{static_cast<int>(rng() % 1440)};
        facts.push_back(insider(t, at, rng() % 2 ? TradeDirection::Buy : TradeDirection::Sell,
                                1 + static_cast<std::int64_t>(rng() % 5000), price()));
      }
    }
  }
  return facts;
}

class FixtureStore : public ::testing::Test {
 protected:
  void SetUp() override {
    for (Date d : weekdays(D("2025-03-03"), 10)) {
      facts_.push_back(bar("AAPL", d, Decimal::from_int(100 + static_cast<int>(facts_.size()))));
    }
    store_.ingest_records("fixture", facts_);
  }
  std::vector<Fact> facts_;
  MarketDataStore store_;
};

}  // namespace

TEST_F(FixtureStore, FiveBarsEndingOnTheAsOfDay) {
  const AsOf at = as_of("2025-03-10");
  const auto bars = store_.get_price_bars(Ticker("AAPL"), 5, at);
  ASSERT_EQ(bars.size(), 5u);
  EXPECT_EQ(bars.back().date, D("2025-03-10"));
  EXPECT_EQ(dump(bars), dump(oracle::price_bars(facts_, Ticker("AAPL"), 5, at)));
}

TEST_F(FixtureStore, NothingBeforeTheFirstBar) {
  EXPECT_TRUE(store_.get_price_bars(Ticker("AAPL"), 5, as_of("2025-02-28")).empty());
  // Same day before the close: the day's bar is not out yet.
  const AsOf morning{T("2025-03-03T15:00:00Z"), D("2025-03-03")};
  EXPECT_TRUE(store_.get_price_bars(Ticker("AAPL"), 5, morning).empty());
}

TEST_F(FixtureStore, UnknownTicker) {
  try {
    store_.get_price_bars(Ticker("ZZZZ"), 5, as_of("2025-03-10"));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownTicker);
  }
  EXPECT_THROW(store_.get_news(Ticker("ZZZZ"), 5, as_of("2025-03-10")), Error);
  EXPECT_THROW(store_.get_fundamentals(Ticker("ZZZZ"), as_of("2025-03-10")), Error);
  EXPECT_THROW(store_.get_insider_transactions(Ticker("ZZZZ"), 5, as_of("2025-03-10")), Error);
}

TEST(MarketNews, FutureItemHiddenAndNewestFirst) {
  MarketDataStore store;
  const AsOf at = as_of("2025-03-05");
  std::vector<Fact> facts{news("early", {"AAPL"}, at.instant - 5h), news("late", {"AAPL"}, at.instant - 1h),
                          news("future", {"AAPL"}, at.instant + 1h)};
  store.ingest_records("wire", facts);
  const auto got = store.get_news(Ticker("AAPL"), 7, at);
  ASSERT_EQ(got.size(), 2u);
  EXPECT_EQ(got[0].id, "late");
  EXPECT_EQ(got[1].id, "early");
  EXPECT_EQ(dump(got), dump(oracle::news(facts, Ticker("AAPL"), 7, at)));
}

TEST(MarketNews, EmptyWindow) {
  MarketDataStore store;
  const AsOf at = as_of("2025-03-05");
  std::vector<Fact> facts{news("old", {"AAPL"}, at.instant - 72h)};
  store.ingest_records("wire", facts);
  EXPECT_TRUE(store.get_news(Ticker("AAPL"), 1, at).empty());
  EXPECT_THROW(store.get_news(Ticker("AAPL"), 0, at), Error);
}

TEST(MarketFundamentals, LatestFilingWins) {
  MarketDataStore store;
  const AsOf at = as_of("2025-03-05");
  std::vector<Fact> facts{fundamentals("AAPL", D("2024-09-30"), T("2024-11-01T12:00:00Z"), "1"),
                          fundamentals("AAPL", D("2024-12-31"), T("2025-02-01T12:00:00Z"), "2"),
                          fundamentals("AAPL", D("2025-03-01"), at.instant + 1s, "3")};
  store.ingest_records("filings", facts);
  const auto got = store.get_fundamentals(Ticker("AAPL"), at);
  ASSERT_TRUE(got);
  EXPECT_EQ(got->figures.at("revenue"), M("2"));
  EXPECT_EQ(canonical(fact_to_json(*got)), canonical(fact_to_json(*oracle::fundamentals(facts, Ticker("AAPL"), at))));
  EXPECT_FALSE(store.get_fundamentals(Ticker("AAPL"), as_of("2024-10-01")));
}

TEST(MarketFundamentals, FilingAtAsOfIsVisible) {
  MarketDataStore store;
  const AsOf at = as_of("2025-03-05");
  std::vector<Fact> facts{fundamentals("AAPL", D("2025-03-01"), at.instant)};
  store.ingest_records("filings", facts);
  EXPECT_TRUE(store.get_fundamentals(Ticker("AAPL"), at));
}

TEST(MarketInsiders, WindowAndOrdering) {
  MarketDataStore store;
  const AsOf at = as_of("2025-03-05");
  std::vector<Fact> facts{insider("AAPL", at.instant - 24h * 3, TradeDirection::Buy, 100),
                          insider("AAPL", at.instant - 24h * 2, TradeDirection::Sell, 200),
                          insider("AAPL", at.instant - 24h, TradeDirection::Buy, 300),
                          insider("AAPL", at.instant - 24h * 40, TradeDirection::Buy, 400),
                          insider("AAPL", at.instant + 1h, TradeDirection::Buy, 500)};
  store.ingest_records("filings", facts);
  const auto got = store.get_insider_transactions(Ticker("AAPL"), 30, at);
  ASSERT_EQ(got.size(), 3u);
  EXPECT_EQ(got[0].shares, 300);
  EXPECT_EQ(got[1].shares, 200);
  EXPECT_EQ(got[2].shares, 100);
  EXPECT_EQ(dump_sorted(got), dump_sorted(oracle::insiders(facts, Ticker("AAPL"), 30, at)));
}

TEST(MarketIngest, IdempotentAndValidated) {
  MarketDataStore store;
  const AsOf at = as_of("2025-03-05");
  std::vector<Fact> batch{bar("AAPL", D("2025-03-03"), M("100")), news("n1", {"AAPL"}, at.instant - 1h),
                          fundamentals("AAPL", D("2024-12-31"), T("2025-02-01T00:00:00Z")),
                          insider("AAPL", at.instant - 2h, TradeDirection::Buy, 10)};
  EXPECT_EQ(store.ingest_records("mixed", batch), 4u);
  const auto size = store.size();
  EXPECT_EQ(store.ingest_records("mixed", batch), 4u);
  EXPECT_EQ(store.size(), size);

  PriceBar broken = bar("AAPL", D("2025-03-04"), M("100"));
  broken.low = broken.high + M("1");
  std::vector<Fact> bad{bar("AAPL", D("2025-03-05"), M("100")), broken};
  try {
    store.ingest_records("bad", bad);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::ValidationFailed);
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos);
  }
  // Nothing of a rejected batch lands.
  EXPECT_EQ(store.size(), size);
  EXPECT_FALSE(store.has_bar(Ticker("AAPL"), D("2025-03-05")));
}

TEST(MarketIngest, RejectsEarlyBarsAndUnknownFigures) {
  MarketDataStore store;
  PriceBar early = bar("AAPL", D("2025-03-04"), M("100"));
  early.available_at = T("2025-03-04T15:00:00Z");
  EXPECT_THROW(store.ingest_records("x", std::vector<Fact>{early}), Error);
  FundamentalSnapshot f = fundamentals("AAPL", D("2024-12-31"), T("2025-02-01T00:00:00Z"));
  f.figures["ebitda_magic"] = M("1");
  EXPECT_THROW(store.ingest_records("x", std::vector<Fact>{f}), Error);
  EXPECT_THROW(Ticker("aapl"), Error);
}

TEST(MarketAudit, Examples) {
  const AsOf at = as_of("2025-03-05");
  std::vector<Fact> ok{bar("AAPL", D("2025-03-05"), M("100")), news("n", {"AAPL"}, at.instant)};
  EXPECT_TRUE(audit_leakage(at, ok).empty());
  ok.push_back(bar("AAPL", D("2025-03-06"), M("100")));
  const auto v = audit_leakage(at, ok);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_NE(v[0].fact.find("2025-03-06"), std::string::npos);
  EXPECT_TRUE(audit_leakage(at, std::vector<Fact>{}).empty());
}

TEST(MarketFixture, RoundTripsThroughFiles) {
  TempDir dir;
  std::mt19937_64 rng(3);
  Dataset ds;
  ds.meta.name = "rt";
  ds.facts = random_facts(rng, 400);
  write_dataset(dir.path(), ds);
  const Dataset back = load_dataset(dir.path());
  MarketDataStore a, b;
  a.ingest_records("a", ds.facts);
  b.ingest_records("b", back.facts);
  ASSERT_EQ(a.size(), b.size());
  std::vector<std::string> left, right;
  for (const auto& f : a.all_facts()) left.push_back(canonical(fact_to_json(f)));
  for (const auto& f : b.all_facts()) right.push_back(canonical(fact_to_json(f)));
  std::sort(left.begin(), left.end());
  std::sort(right.begin(), right.end());
  const auto [l, r] = std::mismatch(left.begin(), left.end(), right.begin());
  if (l != left.end()) ADD_FAILURE() << *l << "\n vs\n" << *r;
}

// Random datasets against the linear-scan oracle, with a leakage audit of
// every result and the subset relation between an earlier and a later as-of.
TEST(MarketProperty, OracleEquivalenceGatingAndMonotoneGrowth) {
  std::mt19937_64 rng(2025);
  const auto days = weekdays(D("2025-01-01"), 90);
  for (std::size_t size : {50u, 500u, 2000u, 10000u}) {
    const auto facts = random_facts(rng, size);
    MarketDataStore store;
    store.ingest_records("random", facts);
    const int probes = size >= 10000 ? 40 : 100;
    for (int i = 0; i < probes; ++i) {
      const Date day = days[rng() % days.size()];
      const AsOf at{Instant{day} + std::chrono::minutes{static_cast<int>(rng() % 1440)}, day};
      const AsOf later{at.instant + std::chrono::hours{static_cast<int>(1 + rng() % 200)}, day};
      for (const char* sym : {"AAPL", "MSFT", "NVDA", "BRK.B"}) {
        const Ticker t(sym);
        if (!store.knows(t)) continue;
        const int lookback = 1 + static_cast<int>(rng() % 30);
        const int window = 1 + static_cast<int>(rng() % 30);
        const auto bars = store.get_price_bars(t, lookback, at);
        const auto items = store.get_news(t, window, at);
        const auto f = store.get_fundamentals(t, at);
        const auto ins = store.get_insider_transactions(t, window, at);
        ASSERT_EQ(dump(bars), dump(oracle::price_bars(facts, t, lookback, at)));
        ASSERT_EQ(dump_sorted(items), dump_sorted(oracle::news(facts, t, window, at)));
        for (std::size_t k = 1; k < items.size(); ++k) ASSERT_GE(items[k - 1].published_at, items[k].published_at);
        const auto of = oracle::fundamentals(facts, t, at);
        ASSERT_EQ(f.has_value(), of.has_value());
        if (f) ASSERT_EQ(canonical(fact_to_json(*f)), canonical(fact_to_json(*of)));
        ASSERT_EQ(dump_sorted(ins), dump_sorted(oracle::insiders(facts, t, window, at)));
        for (std::size_t k = 1; k < ins.size(); ++k) ASSERT_GE(ins[k - 1].filed_at, ins[k].filed_at);

        std::vector<Fact> returned(bars.begin(), bars.end());
        returned.insert(returned.end(), items.begin(), items.end());
        returned.insert(returned.end(), ins.begin(), ins.end());
        if (f) returned.push_back(*f);
        ASSERT_TRUE(audit_leakage(at, returned).empty());

        // Unbounded windows: everything seen earlier is still seen later.
        const int wide = 100000;
        auto subset = [](std::vector<std::string> small, std::vector<std::string> big) {
          std::sort(small.begin(), small.end());
          std::sort(big.begin(), big.end());
          return std::includes(big.begin(), big.end(), small.begin(), small.end());
        };
        ASSERT_TRUE(subset(dump(store.get_price_bars(t, wide, at)), dump(store.get_price_bars(t, wide, later))));
        ASSERT_TRUE(subset(dump(store.get_news(t, wide, at)), dump(store.get_news(t, wide, later))));
        ASSERT_TRUE(subset(dump(store.get_insider_transactions(t, wide, at)),
                           dump(store.get_insider_transactions(t, wide, later))));
      }
    }
  }
}
