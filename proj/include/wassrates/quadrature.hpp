#pragma once

#include <functional>
#include <vector>

namespace wassrates {

struct QuadNodes {
  std::vector<double> x;  // nodes on [-1, 1]
  std::vector<double> w;
};

// Gauss-Legendre nodes/weights on [-1,1], computed once per order.
const QuadNodes& gauss_legendre(int order);

// Integral of f over [a,b] with an n-point Gauss-Legendre rule.
double gauss_legendre_integrate(const std::function<double(double)>& f, double a, double b, int order = 32);

// Adaptive Simpson with absolute tolerance.
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int max_depth = 48);

}  // namespace wassrates
