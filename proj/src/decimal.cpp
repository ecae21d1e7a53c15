#include "arena/decimal.hpp"

#include <cmath>
#include <limits>

#include "arena/error.hpp"

namespace arena {
namespace {

std::int64_t checked(__int128 value, const char* what) {
  if (value > std::numeric_limits<std::int64_t>::max() ||
      value < std::numeric_limits<std::int64_t>::min()) {
    fail(ErrorCode::ValidationFailed, std::string("decimal overflow in ") + what);
  }
  return static_cast<std::int64_t>(value);
}

}  // namespace

__int128 div_round_half_even(__int128 num, __int128 den) {
  if (den == 0) fail(ErrorCode::ValidationFailed, "decimal division by zero");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  __int128 q = num / den;
  __int128 r = num % den;
  // C++ truncates toward zero; normalise to floor so the remainder is >= 0.
  if (r < 0) {
    q -= 1;
    r += den;
  }
  const __int128 twice = 2 * r;
  if (twice > den || (twice == den && (q % 2 != 0))) q += 1;
  return q;
}

Decimal Decimal::from_int(std::int64_t units) {
  return from_micros(checked(static_cast<__int128>(units) * kScale, "from_int"));
}

Decimal Decimal::parse(std::string_view text) {
  if (text.empty()) fail(ErrorCode::ValidationFailed, "empty decimal");
  bool negative = false;
  std::size_t i = 0;
  if (text[0] == '-' || text[0] == '+') {
    negative = text[0] == '-';
    i = 1;
  }
  __int128 whole = 0;
  __int128 frac = 0;
  __int128 frac_scale = 1;
  bool any_digit = false;
  bool seen_point = false;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '.') {
      if (seen_point) fail(ErrorCode::ValidationFailed, "bad decimal: " + std::string(text));
      seen_point = true;
      continue;
    }
    if (c < '0' || c > '9') fail(ErrorCode::ValidationFailed, "bad decimal: " + std::string(text));
    any_digit = true;
    if (!seen_point) {
      whole = whole * 10 + (c - '0');
      if (whole > std::numeric_limits<std::int64_t>::max()) {
        fail(ErrorCode::ValidationFailed, "decimal overflow: " + std::string(text));
      }
    } else if (frac_scale < static_cast<__int128>(1) << 100) {
      frac = frac * 10 + (c - '0');
      frac_scale *= 10;
    }
  }
  if (!any_digit) fail(ErrorCode::ValidationFailed, "bad decimal: " + std::string(text));
  __int128 micros = whole * kScale + div_round_half_even(frac * kScale, frac_scale);
  if (negative) micros = -micros;
  return from_micros(checked(micros, "parse"));
}

Decimal Decimal::from_double(double value) {
  if (!std::isfinite(value)) fail(ErrorCode::ValidationFailed, "non-finite decimal");
  const double scaled = std::nearbyint(value * static_cast<double>(kScale));
  if (std::fabs(scaled) > 9.0e18) fail(ErrorCode::ValidationFailed, "decimal overflow");
  return from_micros(static_cast<std::int64_t>(scaled));
}

std::string Decimal::to_string() const {
  const bool negative = micros_ < 0;
  // Work in unsigned to survive INT64_MIN.
  const unsigned long long mag =
      negative ? 0ULL - static_cast<unsigned long long>(micros_) : static_cast<unsigned long long>(micros_);
  std::string frac = std::to_string(mag % kScale);
  frac.insert(0, kDigits - frac.size(), '0');
  return (negative ? "-" : "") + std::to_string(mag / kScale) + "." + frac;
}

Decimal Decimal::operator-() const { return from_micros(checked(-static_cast<__int128>(micros_), "negate")); }

Decimal& Decimal::operator+=(Decimal other) {
  micros_ = checked(static_cast<__int128>(micros_) + other.micros_, "add");
  return *this;
}

Decimal& Decimal::operator-=(Decimal other) {
  micros_ = checked(static_cast<__int128>(micros_) - other.micros_, "subtract");
  return *this;
}

Decimal Decimal::times(std::int64_t count) const {
  return from_micros(checked(static_cast<__int128>(micros_) * count, "times"));
}

Decimal Decimal::times(Decimal other) const {
  return from_micros(
      checked(div_round_half_even(static_cast<__int128>(micros_) * other.micros_, kScale), "times"));
}

Decimal Decimal::divided_by(Decimal divisor) const {
  return from_micros(checked(
      div_round_half_even(static_cast<__int128>(micros_) * kScale, divisor.micros_), "divide"));
}

std::int64_t Decimal::floor_units(Decimal divisor) const {
  if (divisor.micros_ <= 0) fail(ErrorCode::ValidationFailed, "floor_units needs a positive divisor");
  if (micros_ <= 0) return 0;
  return micros_ / divisor.micros_;
}

}  // namespace arena
