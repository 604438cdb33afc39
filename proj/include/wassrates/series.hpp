#pragma once

#include <cstdint>
#include <functional>

namespace wassrates {

// Truncated iterated logarithm: 1 below e^e, log log x above.
double log2_fn(double x);

// Result of summing a nonnegative series as a certified upper bound: `value`
// >= true sum, and value - true sum <= `excess_bound`.
struct SeriesBound {
  double value = 0.0;
  double excess_bound = 0.0;
};

// Sum of f(n) over n >= 1 for f(x) = x^{-a} * Log2(x)^{-b}, a > 1, b >= 0.
// Head summed exactly, tail bounded by the midpoint integral (f is convex and
// decreasing on the tail range).
SeriesBound sum_poly_loglog_series(double a, double b, std::size_t head = 1 << 17);

// Upper bound of sum_{n > N} n * x^n for x in (0,1): closed geometric form.
double geometric_poly_tail(double x, std::size_t N);

// Certified upper bound of sum_{n>=n0} b_n^2 e^{-n z} with b_n^2 = n/Log2(n).
SeriesBound sum_bn2_exp_series(double z, std::size_t n0 = 1);

// Upper bound of sum_{j>=J} j^{-2} (trigamma tail, three-term envelope).
double inverse_square_tail(std::size_t J);

}  // namespace wassrates
