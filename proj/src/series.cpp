#include "wassrates/series.hpp"

#include <cmath>
#include <stdexcept>

namespace wassrates {

namespace {
const double kEE = std::exp(std::exp(1.0));
}

double log2_fn(double x) {
  if (!(x > 0.0)) throw std::invalid_argument("log2_fn: x must be positive");
  return x < kEE ? 1.0 : std::log(std::log(x));
}

namespace {

double poly_loglog_term(double x, double a, double b) {
  return std::pow(x, -a) * std::pow(log2_fn(x), -b);
}

// Certified bracket of the improper integral of x^{-a} Log2(x)^{-b} over
// [x0, +inf), a > 1, with x0 past e^e. Substituting x = e^w and
// v = (a-1)(w - w0) gives scale * int_0^inf phi(v) dv with
// phi(v) = e^{-v} (log w)^{-b}, a product of positive, decreasing, convex
// factors, hence convex: the trapezoid sum bounds above, the midpoint sum
// below, and their gap certifies the quadrature excess.
struct IntegralBracket {
  double upper = 0.0;
  double gap = 0.0;
};

IntegralBracket poly_loglog_integral(double x0, double a, double b, double gap_target) {
  const double w0 = std::log(x0);
  const double rate = a - 1.0;
  auto g = [&](double w) { return std::pow(std::log(w), -b); };
  auto phi = [&](double v) { return std::exp(-v) * g(w0 + v / rate); };
  const double scale = std::exp(-rate * w0) / rate;
  const double v_end = 45.0;
  const double exp_tail = g(w0 + v_end / rate) * std::exp(-v_end);

  IntegralBracket out;
  for (std::size_t cells = 1 << 14; cells <= (1 << 23); cells *= 2) {
    const double h = v_end / static_cast<double>(cells);
    double trap = 0.5 * (phi(0.0) + phi(v_end));
    double mid = 0.0;
    for (std::size_t i = 1; i < cells; ++i) trap += phi(i * h);
    for (std::size_t i = 0; i < cells; ++i) mid += phi((i + 0.5) * h);
    const double upper = scale * (trap * h + exp_tail);
    const double lower = scale * mid * h;
    out.upper = upper;
    out.gap = std::max(0.0, upper - lower) + scale * exp_tail;
    if (out.gap < gap_target) break;
  }
  return out;
}

}  // namespace

SeriesBound sum_poly_loglog_series(double a, double b, std::size_t head) {
  if (!(a > 1.0) || b < 0.0) throw std::invalid_argument("sum_poly_loglog_series: need a > 1, b >= 0");
  SeriesBound out;
  for (std::size_t n = 1; n <= head; ++n)
    out.value += poly_loglog_term(static_cast<double>(n), a, b);
  // The summand is convex and decreasing past e^e, so the midpoint integral
  // from head + 1/2 dominates the tail term-by-term; the per-term excess of
  // that step integrates to |f'(head)|/24.
  const double x0 = static_cast<double>(head) + 0.5;
  const double euler_excess = (a + b) * std::pow(static_cast<double>(head), -a - 1.0) / 24.0;
  const IntegralBracket tail = poly_loglog_integral(x0, a, b, std::max(2e-11, 2.5e-10 * out.value));
  out.value += tail.upper;
  out.excess_bound = euler_excess + tail.gap;
  return out;
}

double geometric_poly_tail(double x, std::size_t N) {
  if (!(x > 0.0 && x < 1.0)) return 0.0;
  const double xn1 = std::pow(x, static_cast<double>(N + 1));
  const double om = 1.0 - x;
  return xn1 * ((N + 1) - static_cast<double>(N) * x) / (om * om);
}

SeriesBound sum_bn2_exp_series(double z, std::size_t n0) {
  if (!(z > 0.0)) throw std::invalid_argument("sum_bn2_exp_series: need z > 0");
  SeriesBound out;
  const double x = std::exp(-z);
  const std::size_t head = std::min<std::size_t>(2000000, static_cast<std::size_t>(45.0 / z) + n0 + 8);
  for (std::size_t n = n0; n <= head; ++n)
    out.value += static_cast<double>(n) / log2_fn(static_cast<double>(n)) * std::pow(x, static_cast<double>(n));
  out.value += geometric_poly_tail(x, head);  // b_n^2 <= n
  out.excess_bound = geometric_poly_tail(x, head);
  return out;
}

double inverse_square_tail(std::size_t J) {
  const double j = static_cast<double>(J);
  return 1.0 / j + 1.0 / (2.0 * j * j) + 1.0 / (6.0 * j * j * j);
}

}  // namespace wassrates
