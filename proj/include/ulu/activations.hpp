#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "ulu/tensor.hpp"

namespace ulu {

enum class ActivationKind {
  ULU,
  AULU,
  ReLU,
  LeakyReLU,
  SiLU,
  Swish,
  GELU,
  Mish,
  ELU,
  SELU,
  Tanh,
  Sigmoid,
};

// Fixed description of an activation: kind plus its parameters.
// Construct through make() or parse(); both reject bad arity and
// non-positive ULU alphas, so downstream evaluation never re-checks.
class ActivationSpec {
 public:
  static ActivationSpec make(ActivationKind kind, std::vector<double> params = {});

  // Canonical text form, e.g. "ulu(0.3,0.8)", "relu", "swish(1.0)".
  // Case-insensitive; whitespace around commas ignored. Omitted parameter
  // lists fall back to defaults: ulu -> (0.3,0.8), swish -> 1.0,
  // leaky_relu -> 0.01.
  static ActivationSpec parse(std::string_view text);

  ActivationKind kind() const { return kind_; }
  const std::vector<double>& params() const { return params_; }
  bool adaptive() const { return kind_ == ActivationKind::AULU; }

  std::string to_string() const;
  static int arity(ActivationKind kind);
  static std::string kind_name(ActivationKind kind);

  bool operator==(const ActivationSpec&) const = default;

 private:
  ActivationSpec(ActivationKind kind, std::vector<double> params)
      : kind_(kind), params_(std::move(params)) {}

  ActivationKind kind_;
  std::vector<double> params_;
};

// Learnable (beta1, beta2) pair with gradient slots. The effective branch
// coefficients are the squares, so any real beta is valid; beta = 0
// degenerates that branch to 0.5*x and is accepted.
struct AdaptiveParams {
  // sqrt(0.5): the default start makes AULU coincide with SiLU.
  static constexpr double kDefaultBeta = 0.7071067811865476;

  double beta1 = kDefaultBeta;
  double beta2 = kDefaultBeta;
  double grad_beta1 = 0.0;
  double grad_beta2 = 0.0;

  double coeff1() const { return beta1 * beta1; }
  double coeff2() const { return beta2 * beta2; }
  void zero_grad() { grad_beta1 = grad_beta2 = 0.0; }
};

// The two equivalent write-ups of the ULU family: 0.5*x*(tanh(a*x)+1)
// versus x*sigmoid(a*x). A tanh-form coefficient a corresponds to the
// sigmoid-form coefficient 2a.
enum class Parameterization { TanhForm, SigmoidForm };

// Exact factor-2 conversion between the two parameterizations.
// Rejects non-positive alpha.
double convert_parameterization(double alpha, Parameterization from, Parameterization to);

// ULU core, tanh form: 0.5*x*(tanh(a1*x)+1) for x<0, a2 branch for x>=0.
// Preconditions (validated at spec construction, never per call):
// alpha1, alpha2 > 0. NaN propagates.
double ulu_eval(double x, double alpha1, double alpha2);

// Analytic d/dx of ulu_eval: 0.5*(tanh(a*x) + a*x*sech^2(a*x) + 1) on the
// branch matching x's sign; both branches give exactly 0.5 at x = 0.
double ulu_dx(double x, double alpha1, double alpha2);

// AULU: ULU with branch coefficients beta1^2, beta2^2.
double aulu_eval(double x, const AdaptiveParams& p);
double aulu_dx(double x, const AdaptiveParams& p);

struct BetaGrad {
  double d_beta1 = 0.0;
  double d_beta2 = 0.0;
};

// (d/d_beta1, d/d_beta2) of aulu_eval at x. The branch not taken has zero
// sensitivity; both components are 0 at x = 0.
BetaGrad aulu_grad_beta(double x, const AdaptiveParams& p);

// Value/derivative of any spec'd activation at x. AULU specs evaluate at
// the default beta (SiLU start). Kink convention for the piecewise kinds
// (ReLU, LeakyReLU, ELU, SELU) at x = 0: right-hand derivative.
double reference_eval(const ActivationSpec& spec, double x);
double reference_dx(const ActivationSpec& spec, double x);

// Elementwise application, shape preserved; bit-identical to calling the
// scalar functions in a loop.
Tensor batch_eval(const ActivationSpec& spec, const Tensor& xs);
Tensor batch_eval(const AdaptiveParams& p, const Tensor& xs);

// Numerically stable 1/(1+exp(-x)).
double sigmoid(double x);

}  // namespace ulu
