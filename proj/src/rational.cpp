#include "railtrace/rational.hpp"

#include <charconv>
#include <cmath>

namespace railtrace {

namespace {

std::int64_t parse_digits(std::string_view digits, const char* what) {
  if (digits.empty()) throw std::invalid_argument(std::string("missing ") + what);
  if (digits.size() > 1 && digits.front() == '0')
    throw std::invalid_argument(std::string("leading zero in ") + what);
  std::int64_t value = 0;
  auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec == std::errc::result_out_of_range) throw std::invalid_argument(std::string(what) + " out of range");
  if (ec != std::errc() || ptr != digits.data() + digits.size())
    throw std::invalid_argument(std::string("non-digit in ") + what);
  return value;
}

}  // namespace

Rational Rational::ceil_to_grid(double seconds, std::int64_t grid) {
  if (!(seconds >= 0.0)) seconds = 0.0;
  double steps = std::ceil(seconds * static_cast<double>(grid) - 1e-9);
  if (steps < 0.0) steps = 0.0;
  return Rational(static_cast<std::int64_t>(steps), grid);
}

Rational Rational::parse(std::string_view text) {
  auto slash = text.find('/');
  if (slash == std::string_view::npos) throw std::invalid_argument("expected NUM/DEN");
  std::int64_t num = parse_digits(text.substr(0, slash), "numerator");
  std::int64_t den = parse_digits(text.substr(slash + 1), "denominator");
  if (den == 0) throw std::invalid_argument("zero denominator");
  if (std::gcd(num, den) != 1 && !(num == 0 && den == 1))
    throw std::invalid_argument("time not normalized");
  return Rational(num, den);
}

}  // namespace railtrace
