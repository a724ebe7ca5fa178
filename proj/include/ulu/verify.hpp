#pragma once

#include <functional>

namespace ulu {

// Central finite differences only; step chosen for O(1)-smooth doubles.
struct FdConfig {
  double step = 1e-5;
};

// (f(x+h) - f(x-h)) / (2h). The independent oracle run against every
// analytic derivative in the library. Rejects steps outside (0, 1e-2).
double fd_derivative(const std::function<double(double)>& f, double x, FdConfig cfg = {});

// One-sided analytic derivatives of the piecewise ULU construction at a
// split point a: left branch uses alpha1, right branch alpha2.
struct GapReport {
  double a = 0.0;
  double alpha1 = 0.0;
  double alpha2 = 0.0;
  double left_limit = 0.0;
  double right_limit = 0.0;
  double gap = 0.0;  // right_limit - left_limit, exactly as computed
};

// Evaluates the closed-form one-sided derivative limits at the split. The
// gap vanishes identically at a = 0 (and trivially when the branches
// coincide); computed analytically, so the a = 0 case is exact, not
// tolerance-based.
GapReport derivative_gap(double a, double alpha1, double alpha2);

// Max over n equispaced points of |f - g| on [lo, hi].
double sup_norm_distance(const std::function<double(double)>& f,
                         const std::function<double(double)>& g, double lo, double hi, int n);

}  // namespace ulu
