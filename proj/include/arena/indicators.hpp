#pragma once

#include <optional>
#include <span>
#include <vector>

#include "arena/canonical_json.hpp"
#include "arena/market_data.hpp"

namespace arena {

/// Technical indicators at the last bar. A field is absent when the series
/// is too short for its window.
struct IndicatorSet {
  std::optional<double> sma_20;
  std::optional<double> ema_12;
  std::optional<double> ema_26;
  std::optional<double> macd;
  std::optional<double> macd_signal;
  std::optional<double> rsi_14;
  std::optional<double> return_5d;
  std::optional<double> return_20d;
  std::optional<double> volatility_20d;
};

// Building blocks, exposed for reuse and testing.
std::optional<double> simple_moving_average(std::span<const double> closes, std::size_t n);
/// alpha = 2/(n+1), seeded with the first value; absent below n points.
std::optional<double> exponential_moving_average(std::span<const double> values, std::size_t n);
/// Wilder smoothing over n periods. No movement at all reports 50.
std::optional<double> wilder_rsi(std::span<const double> closes, std::size_t n);

IndicatorSet compute_indicators(std::span<const PriceBar> bars);

Json to_json(const IndicatorSet& set);

}  // namespace arena
