#include "arena/indicators.hpp"

#include <cmath>
#include <numeric>

namespace arena {
namespace {

// Full EMA path (one value per input), seeded with the first value.
std::vector<double> ema_path(std::span<const double> values, std::size_t n) {
  std::vector<double> out;
  out.reserve(values.size());
  const double alpha = 2.0 / (static_cast<double>(n) + 1.0);
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.push_back(i == 0 ? values[0] : alpha * values[i] + (1.0 - alpha) * out.back());
  }
  return out;
}

std::optional<double> trailing_return(std::span<const double> closes, std::size_t n) {
  if (closes.size() < n + 1) return std::nullopt;
  return closes.back() / closes[closes.size() - 1 - n] - 1.0;
}

}  // namespace

std::optional<double> simple_moving_average(std::span<const double> closes, std::size_t n) {
  if (n == 0 || closes.size() < n) return std::nullopt;
  const auto tail = closes.last(n);
  return std::accumulate(tail.begin(), tail.end(), 0.0) / static_cast<double>(n);
}

std::optional<double> exponential_moving_average(std::span<const double> values, std::size_t n) {
  if (n == 0 || values.size() < n) return std::nullopt;
  return ema_path(values, n).back();
}

std::optional<double> wilder_rsi(std::span<const double> closes, std::size_t n) {
  if (n == 0 || closes.size() < n + 1) return std::nullopt;
  double avg_gain = 0.0;
  double avg_loss = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    const double d = closes[i] - closes[i - 1];
    (d > 0 ? avg_gain : avg_loss) += std::fabs(d);
  }
  avg_gain /= static_cast<double>(n);
  avg_loss /= static_cast<double>(n);
  for (std::size_t i = n + 1; i < closes.size(); ++i) {
    const double d = closes[i] - closes[i - 1];
    avg_gain = (avg_gain * static_cast<double>(n - 1) + (d > 0 ? d : 0.0)) / static_cast<double>(n);
    avg_loss = (avg_loss * static_cast<double>(n - 1) + (d < 0 ? -d : 0.0)) / static_cast<double>(n);
  }
  if (avg_gain == 0.0 && avg_loss == 0.0) return 50.0;
  if (avg_loss == 0.0) return 100.0;
  return 100.0 - 100.0 / (1.0 + avg_gain / avg_loss);
}

IndicatorSet compute_indicators(std::span<const PriceBar> bars) {
  std::vector<double> closes;
  closes.reserve(bars.size());
  for (const auto& b : bars) closes.push_back(b.close.to_double());

  IndicatorSet s;
  s.sma_20 = simple_moving_average(closes, 20);
  s.ema_12 = exponential_moving_average(closes, 12);
  s.ema_26 = exponential_moving_average(closes, 26);
  if (s.ema_12 && s.ema_26) {
    s.macd = *s.ema_12 - *s.ema_26;
    // The MACD line exists from the 26th bar on; its 9-period EMA is the signal.
    const auto fast = ema_path(closes, 12);
    const auto slow = ema_path(closes, 26);
    std::vector<double> line;
    for (std::size_t i = 25; i < closes.size(); ++i) line.push_back(fast[i] - slow[i]);
    s.macd_signal = exponential_moving_average(line, 9);
  }
  s.rsi_14 = wilder_rsi(closes, 14);
  s.return_5d = trailing_return(closes, 5);
  s.return_20d = trailing_return(closes, 20);
  if (closes.size() >= 21) {
    std::vector<double> rets;
    for (std::size_t i = closes.size() - 20; i < closes.size(); ++i) rets.push_back(closes[i] / closes[i - 1] - 1.0);
    const double mean = std::accumulate(rets.begin(), rets.end(), 0.0) / 20.0;
    double ss = 0.0;
    for (double r : rets) ss += (r - mean) * (r - mean);
    s.volatility_20d = std::sqrt(ss / 19.0);
  }
  return s;
}

Json to_json(const IndicatorSet& s) {
  return Json{{"sma_20", optional_json(s.sma_20)},         {"ema_12", optional_json(s.ema_12)},
              {"ema_26", optional_json(s.ema_26)},         {"macd", optional_json(s.macd)},
              {"macd_signal", optional_json(s.macd_signal)}, {"rsi_14", optional_json(s.rsi_14)},
              {"return_5d", optional_json(s.return_5d)},   {"return_20d", optional_json(s.return_20d)},
              {"volatility_20d", optional_json(s.volatility_20d)}};
}

}  // namespace arena
