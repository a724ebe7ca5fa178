#include "ulu/activations.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ulu {

namespace {

// SELU's standard self-normalizing constants (Klambauer et al. values).
constexpr double kSeluLambda = 1.0507009873554804934193349852946;
constexpr double kSeluAlpha = 1.6732632423543772848170429916717;

constexpr double kInvSqrt2 = 0.7071067811865475244008443621048;
constexpr double kInvSqrt2Pi = 0.3989422804014326779399460599344;

double softplus(double x) {
  // log(1+e^x) without overflow on either side.
  if (x > 30.0) return x + std::log1p(std::exp(-x));
  return std::log1p(std::exp(x));
}

double sech2(double x) {
  double c = std::cosh(x);
  return 1.0 / (c * c);
}

double branch_coeff(double x, double a1, double a2) { return x < 0.0 ? a1 : a2; }

}  // namespace

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

double convert_parameterization(double alpha, Parameterization from, Parameterization to) {
  if (!(alpha > 0.0)) {
    throw std::invalid_argument("parameterization conversion requires alpha > 0");
  }
  if (from == to) return alpha;
  return from == Parameterization::TanhForm ? alpha * 2.0 : alpha * 0.5;
}

double ulu_eval(double x, double alpha1, double alpha2) {
  double a = branch_coeff(x, alpha1, alpha2);
  return 0.5 * x * (std::tanh(a * x) + 1.0);
}

double ulu_dx(double x, double alpha1, double alpha2) {
  double a = branch_coeff(x, alpha1, alpha2);
  double ax = a * x;
  return 0.5 * (std::tanh(ax) + ax * sech2(ax) + 1.0);
}

double aulu_eval(double x, const AdaptiveParams& p) {
  return ulu_eval(x, p.coeff1(), p.coeff2());
}

double aulu_dx(double x, const AdaptiveParams& p) {
  return ulu_dx(x, p.coeff1(), p.coeff2());
}

BetaGrad aulu_grad_beta(double x, const AdaptiveParams& p) {
  // d/d_beta of 0.5*x*(tanh(beta^2*x)+1) = beta * x^2 * sech^2(beta^2*x)
  // on the active branch only.
  BetaGrad g;
  if (x == 0.0) return g;
  if (x < 0.0) {
    g.d_beta1 = p.beta1 * x * x * sech2(p.coeff1() * x);
  } else {
    g.d_beta2 = p.beta2 * x * x * sech2(p.coeff2() * x);
  }
  return g;
}

int ActivationSpec::arity(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::ULU: return 2;
    case ActivationKind::LeakyReLU:
    case ActivationKind::Swish: return 1;
    default: return 0;
  }
}

std::string ActivationSpec::kind_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::ULU: return "ulu";
    case ActivationKind::AULU: return "aulu";
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::LeakyReLU: return "leaky_relu";
    case ActivationKind::SiLU: return "silu";
    case ActivationKind::Swish: return "swish";
    case ActivationKind::GELU: return "gelu";
    case ActivationKind::Mish: return "mish";
    case ActivationKind::ELU: return "elu";
    case ActivationKind::SELU: return "selu";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Sigmoid: return "sigmoid";
  }
  throw std::invalid_argument("unknown activation kind");
}

ActivationSpec ActivationSpec::make(ActivationKind kind, std::vector<double> params) {
  int want = arity(kind);
  if (static_cast<int>(params.size()) != want) {
    throw std::invalid_argument(kind_name(kind) + " takes " + std::to_string(want) +
                                " parameter(s), got " + std::to_string(params.size()));
  }
  for (double p : params) {
    if (!std::isfinite(p)) throw std::invalid_argument(kind_name(kind) + " parameter must be finite");
  }
  if (kind == ActivationKind::ULU) {
    if (!(params[0] > 0.0) || !(params[1] > 0.0)) {
      throw std::invalid_argument("ulu requires alpha1 > 0 and alpha2 > 0");
    }
  }
  return ActivationSpec(kind, std::move(params));
}

namespace {

std::string lower_strip(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    if (!std::isspace(static_cast<unsigned char>(c))) {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  return out;
}

std::vector<double> parse_param_list(const std::string& body, const std::string& where) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos <= body.size()) {
    size_t comma = body.find(',', pos);
    std::string tok = body.substr(pos, comma == std::string::npos ? std::string::npos : comma - pos);
    if (tok.empty()) throw std::invalid_argument("empty parameter in activation '" + where + "'");
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad number '" + tok + "' in activation '" + where + "'");
    }
    if (used != tok.size()) {
      throw std::invalid_argument("bad number '" + tok + "' in activation '" + where + "'");
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

}  // namespace

ActivationSpec ActivationSpec::parse(std::string_view text) {
  std::string s = lower_strip(text);
  std::string name = s;
  std::vector<double> params;
  bool has_params = false;
  size_t open = s.find('(');
  if (open != std::string::npos) {
    if (s.back() != ')') throw std::invalid_argument("unbalanced parentheses in activation '" + s + "'");
    name = s.substr(0, open);
    std::string body = s.substr(open + 1, s.size() - open - 2);
    params = parse_param_list(body, s);
    has_params = true;
  }

  static const std::vector<std::pair<std::string, ActivationKind>> kNames = {
      {"ulu", ActivationKind::ULU},         {"aulu", ActivationKind::AULU},
      {"relu", ActivationKind::ReLU},       {"leaky_relu", ActivationKind::LeakyReLU},
      {"silu", ActivationKind::SiLU},       {"swish", ActivationKind::Swish},
      {"gelu", ActivationKind::GELU},       {"mish", ActivationKind::Mish},
      {"elu", ActivationKind::ELU},         {"selu", ActivationKind::SELU},
      {"tanh", ActivationKind::Tanh},       {"sigmoid", ActivationKind::Sigmoid},
  };
  for (const auto& [n, kind] : kNames) {
    if (name != n) continue;
    if (!has_params) {
      switch (kind) {
        case ActivationKind::ULU: params = {0.3, 0.8}; break;
        case ActivationKind::Swish: params = {1.0}; break;
        case ActivationKind::LeakyReLU: params = {0.01}; break;
        default: break;
      }
    }
    return make(kind, std::move(params));
  }
  throw std::invalid_argument("unknown activation '" + std::string(text) + "'");
}

std::string ActivationSpec::to_string() const {
  std::string s = kind_name(kind_);
  if (params_.empty()) return s;
  s += "(";
  char buf[32];
  for (size_t i = 0; i < params_.size(); ++i) {
    if (i) s += ",";
    std::snprintf(buf, sizeof(buf), "%.9g", params_[i]);
    s += buf;
  }
  return s + ")";
}

double reference_eval(const ActivationSpec& spec, double x) {
  const auto& p = spec.params();
  switch (spec.kind()) {
    case ActivationKind::ULU: return ulu_eval(x, p[0], p[1]);
    case ActivationKind::AULU: return aulu_eval(x, AdaptiveParams{});
    case ActivationKind::ReLU: return x > 0.0 ? x : 0.0;
    case ActivationKind::LeakyReLU: return x >= 0.0 ? x : p[0] * x;
    case ActivationKind::SiLU: return x * sigmoid(x);
    case ActivationKind::Swish: return x * sigmoid(p[0] * x);
    case ActivationKind::GELU:
      // Exact erf form, not the tanh approximation.
      return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    case ActivationKind::Mish: return x * std::tanh(softplus(x));
    case ActivationKind::ELU: return x >= 0.0 ? x : std::expm1(x);
    case ActivationKind::SELU:
      return x >= 0.0 ? kSeluLambda * x : kSeluLambda * kSeluAlpha * std::expm1(x);
    case ActivationKind::Tanh: return std::tanh(x);
    case ActivationKind::Sigmoid: return sigmoid(x);
  }
  throw std::invalid_argument("unknown activation kind");
}

double reference_dx(const ActivationSpec& spec, double x) {
  const auto& p = spec.params();
  switch (spec.kind()) {
    case ActivationKind::ULU: return ulu_dx(x, p[0], p[1]);
    case ActivationKind::AULU: return aulu_dx(x, AdaptiveParams{});
    case ActivationKind::ReLU: return x >= 0.0 ? 1.0 : 0.0;
    case ActivationKind::LeakyReLU: return x >= 0.0 ? 1.0 : p[0];
    case ActivationKind::SiLU: {
      double s = sigmoid(x);
      return s + x * s * (1.0 - s);
    }
    case ActivationKind::Swish: {
      double s = sigmoid(p[0] * x);
      return s + p[0] * x * s * (1.0 - s);
    }
    case ActivationKind::GELU: {
      double phi = kInvSqrt2Pi * std::exp(-0.5 * x * x);
      return 0.5 * (1.0 + std::erf(x * kInvSqrt2)) + x * phi;
    }
    case ActivationKind::Mish: {
      double sp = softplus(x);
      double t = std::tanh(sp);
      return t + x * (1.0 - t * t) * sigmoid(x);
    }
    case ActivationKind::ELU: return x >= 0.0 ? 1.0 : std::exp(x);
    case ActivationKind::SELU:
      return x >= 0.0 ? kSeluLambda : kSeluLambda * kSeluAlpha * std::exp(x);
    case ActivationKind::Tanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case ActivationKind::Sigmoid: {
      double s = sigmoid(x);
      return s * (1.0 - s);
    }
  }
  throw std::invalid_argument("unknown activation kind");
}

Tensor batch_eval(const ActivationSpec& spec, const Tensor& xs) {
  Tensor out(xs.shape());
  for (int64_t i = 0; i < xs.numel(); ++i) out[i] = reference_eval(spec, xs[i]);
  return out;
}

Tensor batch_eval(const AdaptiveParams& p, const Tensor& xs) {
  Tensor out(xs.shape());
  for (int64_t i = 0; i < xs.numel(); ++i) out[i] = aulu_eval(xs[i], p);
  return out;
}

}  // namespace ulu
