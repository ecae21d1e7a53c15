#include "arena/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "arena/error.hpp"

namespace arena {

void NavSeries::validate() const {
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!points[i].nav.is_positive()) fail(ErrorCode::ValidationFailed, "nav must be positive");
    if (i > 0 && points[i].date <= points[i - 1].date) {
      fail(ErrorCode::ValidationFailed, "nav dates must strictly increase");
    }
  }
}

std::vector<double> NavSeries::returns() const {
  std::vector<double> out;
  for (std::size_t i = 1; i < points.size(); ++i) {
    out.push_back(static_cast<double>(points[i].nav.micros()) / static_cast<double>(points[i - 1].nav.micros()) - 1.0);
  }
  return out;
}

double max_drawdown(const NavSeries& series) {
  // Micro-unit integers below 2^53 convert to double exactly, so each ratio
  // is a single correctly rounded division.
  double worst = 0.0;
  std::int64_t peak = 0;
  for (const auto& p : series.points) {
    peak = std::max(peak, p.nav.micros());
    const double dd = static_cast<double>(peak - p.nav.micros()) / static_cast<double>(peak);
    worst = std::max(worst, dd);
  }
  return worst;
}

MetricsReport compute_metrics(const NavSeries& series, std::span<const TradeFill> fills, double rf_annual) {
  series.validate();
  MetricsReport m;
  const auto& pts = series.points;
  if (pts.empty()) return m;

  m.n_days = static_cast<int>(pts.size()) - 1;
  m.cumulative_return =
      static_cast<double>(pts.back().nav.micros()) / static_cast<double>(pts.front().nav.micros()) - 1.0;
  m.max_drawdown = max_drawdown(series);
  if (pts.size() < 2) return m;

  const auto r = series.returns();
  const double n = static_cast<double>(r.size());
  m.annualized_return = std::pow(1.0 + *m.cumulative_return, kTradingDaysPerYear / n) - 1.0;
  m.win_rate = static_cast<double>(std::count_if(r.begin(), r.end(), [](double x) { return x > 0.0; })) / n;

  double mean_nav = 0.0;
  for (const auto& p : pts) mean_nav += p.nav.to_double();
  mean_nav /= static_cast<double>(pts.size());
  double traded = 0.0;
  for (const auto& f : fills) traded += std::fabs(f.price.times(f.quantity).to_double());
  m.turnover = traded / mean_nav;

  const double mean = std::accumulate(r.begin(), r.end(), 0.0) / n;
  const double rf_daily = rf_annual / kTradingDaysPerYear;
  if (r.size() >= 2) {
    double ss = 0.0;
    for (double x : r) ss += (x - mean) * (x - mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    m.volatility = sd * std::sqrt(kTradingDaysPerYear);
    if (sd > 0.0) m.sharpe = (mean - rf_daily) / sd * std::sqrt(kTradingDaysPerYear);
  }
  double downside = 0.0;
  for (double x : r) downside += x < 0.0 ? x * x : 0.0;
  const double dd = std::sqrt(downside / n);
  if (dd > 0.0) m.sortino = (mean - rf_daily) / dd * std::sqrt(kTradingDaysPerYear);
  return m;
}

const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names{"cumulative_return", "annualized_return", "volatility", "sharpe",
                                              "sortino",           "max_drawdown",      "win_rate",   "turnover"};
  return names;
}

std::optional<double> metric_value(const MetricsReport& m, std::string_view name) {
  if (name == "cumulative_return") return m.cumulative_return;
  if (name == "annualized_return") return m.annualized_return;
  if (name == "volatility") return m.volatility;
  if (name == "sharpe") return m.sharpe;
  if (name == "sortino") return m.sortino;
  if (name == "max_drawdown") return m.max_drawdown;
  if (name == "win_rate") return m.win_rate;
  if (name == "turnover") return m.turnover;
  fail(ErrorCode::UnknownMetric, "unknown metric " + std::string(name));
}

std::vector<LeaderboardRow> leaderboard(const std::map<std::string, MetricsReport>& reports,
                                        std::string_view rank_key) {
  (void)metric_value(MetricsReport{}, rank_key);  // validates the key
  std::vector<LeaderboardRow> rows;
  for (const auto& [id, report] : reports) rows.push_back({0, id, metric_value(report, rank_key), report});

  // Present beats absent; larger beats smaller.
  auto cmp_opt = [](const std::optional<double>& a, const std::optional<double>& b) -> int {
    if (a.has_value() != b.has_value()) return a ? -1 : 1;
    if (!a) return 0;
    if (*a > *b) return -1;
    if (*a < *b) return 1;
    return 0;
  };
  std::sort(rows.begin(), rows.end(), [&](const LeaderboardRow& a, const LeaderboardRow& b) {
    if (int c = cmp_opt(a.value, b.value); c != 0) return c < 0;
    if (int c = cmp_opt(a.report.cumulative_return, b.report.cumulative_return); c != 0) return c < 0;
    return a.fund_id < b.fund_id;
  });
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i].rank = static_cast<int>(i) + 1;
  return rows;
}

Json to_json(const MetricsReport& m) {
  return Json{{"cumulative_return", optional_json(m.cumulative_return)},
              {"annualized_return", optional_json(m.annualized_return)},
              {"volatility", optional_json(m.volatility)},
              {"sharpe", optional_json(m.sharpe)},
              {"sortino", optional_json(m.sortino)},
              {"max_drawdown", optional_json(m.max_drawdown)},
              {"win_rate", optional_json(m.win_rate)},
              {"turnover", optional_json(m.turnover)},
              {"n_days", m.n_days}};
}

Json to_json(const NavSeries& series) {
  Json out = Json::array();
  for (const auto& p : series.points) out.push_back(Json{{"date", format_date(p.date)}, {"nav", to_json(p.nav)}});
  return out;
}

}  // namespace arena
