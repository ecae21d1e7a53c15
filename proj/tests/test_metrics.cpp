#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "arena/error.hpp"
#include "arena/metrics.hpp"
#include "support.hpp"

using namespace arena;
using namespace arena::testing;

namespace {

NavSeries series_of(const std::vector<std::int64_t>& micros) {
  NavSeries s;
  const auto days = weekdays(D("2025-01-06"), static_cast<int>(micros.size()));
  for (std::size_t i = 0; i < micros.size(); ++i) s.points.push_back({days[i], Decimal::from_micros(micros[i])});
  return s;
}

NavSeries series_of_units(const std::vector<int>& navs) {
  std::vector<std::int64_t> m;
  for (int v : navs) m.push_back(static_cast<std::int64_t>(v) * 1'000'000);
  return series_of(m);
}

void expect_close(const std::optional<double>& got, const std::optional<double>& want, const char* what) {
  ASSERT_EQ(got.has_value(), want.has_value()) << what;
  if (!got) return;
  EXPECT_NEAR(*got, *want, 1e-9 * std::max(1.0, std::fabs(*want))) << what;
}

MetricsReport with(std::optional<double> sharpe, double cumulative) {
  MetricsReport r;
  r.sharpe = sharpe;
  r.cumulative_return = cumulative;
  return r;
}

}  // namespace

TEST(Metrics, ConstantNav) {
  const auto m = compute_metrics(series_of_units({100, 100, 100, 100}), {});
  EXPECT_EQ(*m.cumulative_return, 0.0);
  EXPECT_EQ(*m.max_drawdown, 0.0);
  EXPECT_FALSE(m.sharpe);
  EXPECT_FALSE(m.sortino);
  EXPECT_EQ(*m.volatility, 0.0);
  EXPECT_EQ(m.n_days, 3);
}

TEST(Metrics, TwoStepDrawdown) {
  const auto m = compute_metrics(series_of_units({100, 110, 99}), {});
  EXPECT_NEAR(*m.max_drawdown, 0.1, 1e-9);
  EXPECT_NEAR(*m.cumulative_return, -0.01, 1e-12);
  EXPECT_NEAR(*m.win_rate, 0.5, 1e-12);
}

TEST(Metrics, SinglePointHasNoRatios) {
  const auto m = compute_metrics(series_of_units({100}), {});
  EXPECT_EQ(m.n_days, 0);
  EXPECT_FALSE(m.sharpe);
  EXPECT_FALSE(m.volatility);
  EXPECT_FALSE(m.annualized_return);
  EXPECT_FALSE(m.win_rate);
  EXPECT_FALSE(m.turnover);
}

TEST(Metrics, RejectsInvalidSeries) {
  EXPECT_THROW(compute_metrics(series_of_units({100, 0}), {}), Error);
  NavSeries s = series_of_units({100, 101});
  s.points[1].date = s.points[0].date;
  EXPECT_THROW(compute_metrics(s, {}), Error);
}

TEST(Metrics, TurnoverUsesMeanNav) {
  TradeFill buy{Ticker("AAPL"), TradeAction::Buy, 10, M("50"), M("0"), as_of("2025-01-06")};
  TradeFill sell{Ticker("AAPL"), TradeAction::Sell, 4, M("60"), M("0"), as_of("2025-01-07")};
  const std::vector<TradeFill> fills{buy, sell};
  const auto m = compute_metrics(series_of_units({1000, 1100, 1200}), fills);
  EXPECT_NEAR(*m.turnover, (500.0 + 240.0) / 1100.0, 1e-12);
}

TEST(Metrics, RiskFreeRateShiftsSharpe) {
  const auto s = series_of_units({100, 101, 100, 103});
  const auto a = compute_metrics(s, {}, 0.0);
  const auto b = compute_metrics(s, {}, 0.0252);
  const double sd = *a.volatility / std::sqrt(252.0);
  EXPECT_NEAR(*a.sharpe - *b.sharpe, 0.0001 / sd * std::sqrt(252.0), 1e-9);
}

// Random series up to 50 points: drawdown by brute force over all pairs, and
// the return statistics recomputed directly in extended precision.
TEST(MetricsProperty, OracleEquivalence) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 50);
    std::vector<std::int64_t> nav{1'000'000'000 + static_cast<std::int64_t>(rng() % 1'000'000'000)};
    for (int i = 1; i < n; ++i) {
      const std::int64_t step = static_cast<std::int64_t>(rng() % 200'000'001) - 100'000'000;
      nav.push_back(std::max<std::int64_t>(1'000'000, nav.back() + step));
    }
    const auto m = compute_metrics(series_of(nav), {});
    const auto o = oracle::stats(nav);
    ASSERT_EQ(*m.max_drawdown, oracle::max_drawdown(nav)) << "trial " << trial;
    EXPECT_GE(*m.max_drawdown, 0.0);
    EXPECT_LT(*m.max_drawdown, 1.0);
    expect_close(m.cumulative_return, o.cumulative, "cumulative");
    expect_close(m.annualized_return, o.annualized, "annualized");
    expect_close(m.volatility, o.volatility, "volatility");
    expect_close(m.sharpe, o.sharpe, "sharpe");
    expect_close(m.sortino, o.sortino, "sortino");
    expect_close(m.win_rate, o.win_rate, "win_rate");
  }
}

TEST(MetricsProperty, MonotoneSeriesHasNoDrawdown) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int64_t> nav{1'000'000};
    for (int i = 0; i < 30; ++i) nav.push_back(nav.back() + static_cast<std::int64_t>(rng() % 1000));
    EXPECT_EQ(max_drawdown(series_of(nav)), 0.0);
  }
}

TEST(MetricsProperty, ScaleInvariance) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<std::int64_t> nav{100'000'000};
    for (int i = 0; i < 20; ++i) {
      nav.push_back(std::max<std::int64_t>(1'000'000, nav.back() + static_cast<std::int64_t>(rng() % 20'000'001) - 10'000'000));
    }
    const std::int64_t k = 2 + static_cast<std::int64_t>(rng() % 50);
    std::vector<std::int64_t> scaled;
    for (auto v : nav) scaled.push_back(v * k);
    TradeFill f{Ticker("AAPL"), TradeAction::Buy, 3, M("17.5"), M("0"), as_of("2025-01-06")};
    TradeFill fk = f;
    fk.quantity *= k;
    const std::vector<TradeFill> fills{f}, fills_k{fk};
    const auto a = compute_metrics(series_of(nav), fills);
    const auto b = compute_metrics(series_of(scaled), fills_k);
    for (const auto& name : metric_names()) expect_close(metric_value(b, name), metric_value(a, name), name.c_str());
  }
}

TEST(Leaderboard, OrdersDescending) {
  const auto rows = leaderboard({{"fund-b", with(0.5, 0.1)}, {"fund-a", with(1.0, 0.0)}});
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].fund_id, "fund-a");
  EXPECT_EQ(rows[0].rank, 1);
  EXPECT_EQ(rows[1].fund_id, "fund-b");
}

TEST(Leaderboard, AbsentRanksLast) {
  const auto rows = leaderboard({{"fund-a", with(std::nullopt, 0.9)}, {"fund-b", with(-3.0, -0.5)}});
  EXPECT_EQ(rows[0].fund_id, "fund-b");
  EXPECT_EQ(rows[1].fund_id, "fund-a");
  EXPECT_FALSE(rows[1].value);
}

TEST(Leaderboard, TiesBrokenByCumulativeThenId) {
  const auto rows = leaderboard(
      {{"fund-c", with(1.0, 0.1)}, {"fund-a", with(1.0, 0.1)}, {"fund-b", with(1.0, 0.2)}, {"fund-d", with(2.0, 0.0)}});
  std::vector<std::string> ids;
  for (const auto& r : rows) ids.push_back(r.fund_id);
  EXPECT_EQ(ids, (std::vector<std::string>{"fund-d", "fund-b", "fund-a", "fund-c"}));
}

TEST(Leaderboard, OtherKeysAndUnknownMetric) {
  MetricsReport a = with(1.0, 0.1), b = with(1.0, 0.2);
  a.max_drawdown = 0.3;
  b.max_drawdown = 0.1;
  const auto rows = leaderboard({{"fund-a", a}, {"fund-b", b}}, "max_drawdown");
  EXPECT_EQ(rows[0].fund_id, "fund-a");
  try {
    leaderboard({{"fund-a", a}}, "alpha");
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::UnknownMetric);
  }
}

TEST(LeaderboardProperty, TotalAndDeterministic) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    std::map<std::string, MetricsReport> reports;
    const int n = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) {
      const auto sharpe = rng() % 4 == 0 ? std::nullopt : std::optional<double>(static_cast<double>(rng() % 3));
      reports["fund-" + std::to_string(rng() % 100)] = with(sharpe, static_cast<double>(rng() % 2));
    }
    const auto rows = leaderboard(reports);
    ASSERT_EQ(rows.size(), reports.size());
    for (std::size_t i = 1; i < rows.size(); ++i) {
      const auto& p = rows[i - 1];
      const auto& q = rows[i];
      if (p.value && q.value) {
        ASSERT_GE(*p.value, *q.value);
        if (*p.value == *q.value) {
          ASSERT_GE(*p.report.cumulative_return, *q.report.cumulative_return);
          if (*p.report.cumulative_return == *q.report.cumulative_return) ASSERT_LT(p.fund_id, q.fund_id);
        }
      } else {
        ASSERT_FALSE(q.value) << "absent ranked above present";
      }
    }
    const auto again = leaderboard(reports);
    for (std::size_t i = 0; i < rows.size(); ++i) ASSERT_EQ(rows[i].fund_id, again[i].fund_id);
  }
}
