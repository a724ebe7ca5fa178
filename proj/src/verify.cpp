#include "ulu/verify.hpp"

#include <cmath>
#include <stdexcept>

namespace ulu {

double fd_derivative(const std::function<double(double)>& f, double x, FdConfig cfg) {
  if (!(cfg.step > 0.0) || !(cfg.step < 1e-2)) {
    throw std::invalid_argument("fd step must lie in (0, 1e-2)");
  }
  return (f(x + cfg.step) - f(x - cfg.step)) / (2.0 * cfg.step);
}

namespace {

// One-sided derivative of 0.5*x*(tanh(c*x)+1) at x = a.
double branch_dx(double a, double c) {
  double ca = c * a;
  double ch = std::cosh(ca);
  return 0.5 * (std::tanh(ca) + ca / (ch * ch) + 1.0);
}

}  // namespace

GapReport derivative_gap(double a, double alpha1, double alpha2) {
  if (!(alpha1 > 0.0) || !(alpha2 > 0.0)) {
    throw std::invalid_argument("derivative_gap requires positive alphas");
  }
  GapReport r;
  r.a = a;
  r.alpha1 = alpha1;
  r.alpha2 = alpha2;
  r.left_limit = branch_dx(a, alpha1);
  r.right_limit = branch_dx(a, alpha2);
  r.gap = r.right_limit - r.left_limit;
  return r;
}

double sup_norm_distance(const std::function<double(double)>& f,
                         const std::function<double(double)>& g, double lo, double hi, int n) {
  if (!(lo < hi)) throw std::invalid_argument("sup_norm_distance requires lo < hi");
  if (n < 2) throw std::invalid_argument("sup_norm_distance requires n >= 2");
  double best = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
    double d = std::fabs(f(x) - g(x));
    if (d > best) best = d;
  }
  return best;
}

}  // namespace ulu
