#pragma once

#include <compare>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>

namespace railtrace {

/// Exact nonnegative rational number, always stored normalized.
///
/// Used for the symbolic simulation clock. Arithmetic goes through 128-bit
/// intermediates and throws std::overflow_error when a result does not fit
/// back into 64 bits.
class Rational {
 public:
  constexpr Rational() = default;
  constexpr Rational(std::int64_t integer) : num_(integer), den_(1) {  // NOLINT(implicit)
    if (integer < 0) throw std::domain_error("negative rational");
  }
  Rational(std::int64_t num, std::int64_t den) { assign(num, den); }

  std::int64_t numerator() const { return num_; }
  std::int64_t denominator() const { return den_; }

  double to_double() const { return static_cast<double>(num_) / static_cast<double>(den_); }

  /// Smallest multiple of 1/grid that is >= seconds (with a tolerance of 1e-9 s).
  static Rational ceil_to_grid(double seconds, std::int64_t grid = 8);

  /// Parses `NUM/DEN`. Strict: decimal digits only, no leading zeros,
  /// denominator nonzero, already normalized.
  static Rational parse(std::string_view text);

  /// `NUM/DEN`, the denominator is printed even when it is 1.
  std::string to_string() const { return std::to_string(num_) + "/" + std::to_string(den_); }

  friend Rational operator+(const Rational& a, const Rational& b) {
    __int128 n = static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_;
    __int128 d = static_cast<__int128>(a.den_) * b.den_;
    return from_wide(n, d);
  }

  /// Throws std::domain_error when b > a (time is nonnegative).
  friend Rational operator-(const Rational& a, const Rational& b) {
    __int128 n = static_cast<__int128>(a.num_) * b.den_ - static_cast<__int128>(b.num_) * a.den_;
    if (n < 0) throw std::domain_error("rational subtraction below zero");
    __int128 d = static_cast<__int128>(a.den_) * b.den_;
    return from_wide(n, d);
  }

  Rational& operator+=(const Rational& o) { return *this = *this + o; }
  Rational& operator-=(const Rational& o) { return *this = *this - o; }

  friend bool operator==(const Rational& a, const Rational& b) {
    return a.num_ == b.num_ && a.den_ == b.den_;
  }
  friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) {
    __int128 l = static_cast<__int128>(a.num_) * b.den_;
    __int128 r = static_cast<__int128>(b.num_) * a.den_;
    if (l < r) return std::strong_ordering::less;
    if (l > r) return std::strong_ordering::greater;
    return std::strong_ordering::equal;
  }

 private:
  void assign(std::int64_t num, std::int64_t den) {
    if (den <= 0) throw std::domain_error("rational denominator must be positive");
    if (num < 0) throw std::domain_error("negative rational");
    std::int64_t g = std::gcd(num, den);
    if (g == 0) g = 1;
    num_ = num / g;
    den_ = den / g;
  }

  static Rational from_wide(__int128 n, __int128 d) {
    __int128 a = n, b = d;
    while (b != 0) {
      __int128 t = a % b;
      a = b;
      b = t;
    }
    if (a == 0) a = 1;
    n /= a;
    d /= a;
    constexpr __int128 max = INT64_MAX;
    if (n > max || d > max) throw std::overflow_error("rational overflow");
    Rational r;
    r.num_ = static_cast<std::int64_t>(n);
    r.den_ = static_cast<std::int64_t>(d);
    return r;
  }

  std::int64_t num_ = 0;
  std::int64_t den_ = 1;
};

inline Rational min(const Rational& a, const Rational& b) { return b < a ? b : a; }
inline Rational max(const Rational& a, const Rational& b) { return a < b ? b : a; }

}  // namespace railtrace
