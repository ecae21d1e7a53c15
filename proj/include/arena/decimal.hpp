#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace arena {

/// Fixed-point decimal with exactly six fractional digits, stored as a signed
/// count of micro-units. Every rounding step is round-half-even.
class Decimal {
 public:
  static constexpr std::int64_t kScale = 1'000'000;
  static constexpr int kDigits = 6;

  constexpr Decimal() = default;

  static constexpr Decimal from_micros(std::int64_t micros) {
    Decimal d;
    d.micros_ = micros;
    return d;
  }
  static Decimal from_int(std::int64_t units);
  /// Accepts "-12", "12.5", "0.0000005" (extra digits are rounded).
  static Decimal parse(std::string_view text);
  static Decimal from_double(double value);

  constexpr std::int64_t micros() const { return micros_; }
  double to_double() const { return static_cast<double>(micros_) / kScale; }
  /// Always renders six fractional digits, e.g. "9000.000000".
  std::string to_string() const;

  constexpr bool is_zero() const { return micros_ == 0; }
  constexpr bool is_positive() const { return micros_ > 0; }
  constexpr bool is_negative() const { return micros_ < 0; }

  friend constexpr auto operator<=>(Decimal, Decimal) = default;

  Decimal operator-() const;
  Decimal& operator+=(Decimal other);
  Decimal& operator-=(Decimal other);
  friend Decimal operator+(Decimal a, Decimal b) { return a += b; }
  friend Decimal operator-(Decimal a, Decimal b) { return a -= b; }

  /// Exact scaling by an integer count (shares).
  Decimal times(std::int64_t count) const;
  /// Product of two decimals, rounded half-even to six digits.
  Decimal times(Decimal other) const;
  /// Quotient rounded half-even to six digits.
  Decimal divided_by(Decimal divisor) const;
  /// Largest integer n with n * divisor <= *this (divisor > 0, *this >= 0).
  std::int64_t floor_units(Decimal divisor) const;

 private:
  std::int64_t micros_ = 0;
};

/// Integer division of 128-bit values with round-half-even.
__int128 div_round_half_even(__int128 num, __int128 den);

}  // namespace arena
