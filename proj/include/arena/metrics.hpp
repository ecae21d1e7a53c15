#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "arena/canonical_json.hpp"
#include "arena/portfolio.hpp"

namespace arena {

inline constexpr double kTradingDaysPerYear = 252.0;

struct NavPoint {
  Date date;
  Decimal nav;
};

struct NavSeries {
  std::vector<NavPoint> points;

  /// Dates strictly increasing, every nav positive.
  void validate() const;
  /// r_t = nav_t / nav_{t-1} - 1.
  std::vector<double> returns() const;
};

/// Ratio fields are absent (not zero) when undefined: fewer than two NAV
/// points, or zero dispersion for sharpe/sortino.
struct MetricsReport {
  std::optional<double> cumulative_return;
  std::optional<double> annualized_return;
  std::optional<double> volatility;
  std::optional<double> sharpe;
  std::optional<double> sortino;
  std::optional<double> max_drawdown;
  std::optional<double> win_rate;
  std::optional<double> turnover;
  /// Number of daily return periods (points - 1).
  int n_days = 0;
};

double max_drawdown(const NavSeries& series);

MetricsReport compute_metrics(const NavSeries& series, std::span<const TradeFill> fills, double rf_annual = 0.0);

const std::vector<std::string>& metric_names();
/// Throws UnknownMetric for names outside metric_names().
std::optional<double> metric_value(const MetricsReport& report, std::string_view name);

struct LeaderboardRow {
  int rank = 0;
  std::string fund_id;
  std::optional<double> value;
  MetricsReport report;
};

/// Descending by `rank_key`; absent values last; ties broken by
/// cumulative_return (descending) then fund_id.
std::vector<LeaderboardRow> leaderboard(const std::map<std::string, MetricsReport>& reports,
                                        std::string_view rank_key = "sharpe");

Json to_json(const MetricsReport& report);
Json to_json(const NavSeries& series);

}  // namespace arena
