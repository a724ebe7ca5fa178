#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "ulu/activations.hpp"
#include "ulu/rng.hpp"
#include "ulu/verify.hpp"

using namespace ulu;

namespace {

double silu_oracle(double x) { return x * sigmoid(x); }

// Frozen closeness bounds on [-5,5]: measured sup distances (10001-point
// grid plus local refinement, high-precision arithmetic) with 10% headroom.
constexpr double kBoundUluRelu = 0.015315549851859059;   // ULU(10,10) vs ReLU
constexpr double kBoundUluGelu = 0.036288255141120178;   // ULU(0.8,0.8) vs GELU
constexpr double kBoundUluMish = 0.062188436959471537;   // ULU(0.55,0.8) vs Mish

}  // namespace

TEST_CASE("ulu_eval: pinned values") {
  CHECK(ulu_eval(0.0, 0.3, 0.8) == 0.0);
  // ULU(0.5,0.5) is SiLU; value from a high-precision sigmoid oracle.
  CHECK(ulu_eval(1.0, 0.5, 0.5) == doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(ulu_eval(-2.0, 0.3, 0.8) == doctest::Approx(-0.4629504330019647).epsilon(1e-14));
  CHECK(std::isnan(ulu_eval(std::nan(""), 0.3, 0.8)));
}

TEST_CASE("ulu_dx: pinned values and limits") {
  CHECK(ulu_dx(0.0, 0.3, 0.8) == 0.5);
  CHECK(std::fabs(ulu_dx(50.0, 0.3, 0.8) - 1.0) < 1e-8);
  double fd = fd_derivative([](double x) { return ulu_eval(x, 0.7, 0.7); }, -1.5);
  CHECK(ulu_dx(-1.5, 0.7, 0.7) == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("aulu: pinned values") {
  AdaptiveParams p{1.0, 1.0};
  CHECK(aulu_eval(0.0, p) == 0.0);
  CHECK(aulu_eval(-1.0, p) == doctest::Approx(-0.11920292202211756).epsilon(1e-14));

  AdaptiveParams silu_start;  // default sqrt(0.5)
  for (double x : {-3.0, -0.5, 0.0, 0.7, 4.2}) {
    CHECK(aulu_eval(x, silu_start) == doctest::Approx(silu_oracle(x)).epsilon(1e-12));
  }

  AdaptiveParams zero{0.0, 0.0};
  CHECK(aulu_eval(3.0, zero) == doctest::Approx(1.5));  // degenerates to 0.5x
  CHECK(aulu_eval(-3.0, zero) == doctest::Approx(-1.5));
}

TEST_CASE("aulu_grad_beta: pinned values and fd oracle") {
  AdaptiveParams p{1.0, 1.0};
  BetaGrad g0 = aulu_grad_beta(0.0, p);
  CHECK(g0.d_beta1 == 0.0);
  CHECK(g0.d_beta2 == 0.0);

  BetaGrad gm = aulu_grad_beta(-1.0, p);
  CHECK(gm.d_beta1 == doctest::Approx(0.4199743416140261).epsilon(1e-13));
  CHECK(gm.d_beta2 == 0.0);

  BetaGrad gp = aulu_grad_beta(2.0, p);
  CHECK(gp.d_beta1 == 0.0);
  double fd = fd_derivative(
      [](double b) {
        AdaptiveParams q{1.0, b};
        return aulu_eval(2.0, q);
      },
      1.0);
  CHECK(gp.d_beta2 == doctest::Approx(fd).epsilon(1e-7));
}

TEST_CASE("reference activations: pinned values") {
  CHECK(reference_eval(ActivationSpec::parse("mish"), 0.0) == 0.0);
  CHECK(reference_eval(ActivationSpec::parse("silu"), 1.0) ==
        doctest::Approx(0.7310585786300049).epsilon(1e-14));
  CHECK(reference_eval(ActivationSpec::parse("relu"), -3.0) == 0.0);
  CHECK(reference_eval(ActivationSpec::parse("gelu"), 1.0) ==
        doctest::Approx(0.8413447460685429).epsilon(1e-14));
  // Right-hand derivative at the ReLU-family kink.
  CHECK(reference_dx(ActivationSpec::parse("relu"), 0.0) == 1.0);
  CHECK(reference_dx(ActivationSpec::parse("leaky_relu(0.01)"), 0.0) == 1.0);
}

TEST_CASE("spec construction and parsing") {
  CHECK_THROWS_AS(ActivationSpec::make(ActivationKind::ULU, {-0.1, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(ActivationSpec::make(ActivationKind::ULU, {0.0, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(ActivationSpec::make(ActivationKind::ULU, {0.5}), std::invalid_argument);
  CHECK_THROWS_AS(ActivationSpec::make(ActivationKind::ReLU, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(ActivationSpec::parse("frobnicate"), std::invalid_argument);
  CHECK_THROWS_AS(ActivationSpec::parse("ulu(0.3)"), std::invalid_argument);

  ActivationSpec s = ActivationSpec::parse(" ULU( 0.3 , 0.8 ) ");
  CHECK(s.kind() == ActivationKind::ULU);
  CHECK(s.params() == std::vector<double>{0.3, 0.8});
  CHECK(s.to_string() == "ulu(0.3,0.8)");
  CHECK(ActivationSpec::parse("Swish(1.0)").to_string() == "swish(1)");
  CHECK(ActivationSpec::parse("aulu").adaptive());
  CHECK(ActivationSpec::parse("relu").to_string() == "relu");
}

TEST_CASE("parameterization conversion") {
  CHECK(convert_parameterization(0.5, Parameterization::TanhForm, Parameterization::SigmoidForm) ==
        1.0);
  CHECK(convert_parameterization(1.0, Parameterization::SigmoidForm, Parameterization::TanhForm) ==
        0.5);
  double rt = convert_parameterization(
      convert_parameterization(0.3, Parameterization::TanhForm, Parameterization::SigmoidForm),
      Parameterization::SigmoidForm, Parameterization::TanhForm);
  CHECK(rt == 0.3);
  CHECK_THROWS_AS(convert_parameterization(0.0, Parameterization::TanhForm,
                                           Parameterization::SigmoidForm),
                  std::invalid_argument);
}

TEST_CASE("batch_eval matches the scalar loop bit for bit") {
  Tensor empty({0});
  CHECK(batch_eval(ActivationSpec::parse("ulu(0.3,0.8)"), empty).numel() == 0);

  Tensor xs({3}, {0.0, 1.0, -2.0});
  ActivationSpec spec = ActivationSpec::parse("ulu(0.3,0.8)");
  Tensor out = batch_eval(spec, xs);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == ulu_eval(1.0, 0.3, 0.8));
  CHECK(out[2] == ulu_eval(-2.0, 0.3, 0.8));

  Tensor grid({2, 3}, {-1.0, -0.5, 0.0, 0.5, 1.0, 2.0});
  Tensor out2 = batch_eval(spec, grid);
  CHECK(out2.shape() == std::vector<int64_t>{2, 3});
  for (int64_t i = 0; i < grid.numel(); ++i) {
    CHECK(out2[i] == reference_eval(spec, grid[i]));
  }
}

TEST_CASE("identity: ULU(0.5,0.5) == SiLU on [-20,20]") {
  double sup = sup_norm_distance([](double x) { return ulu_eval(x, 0.5, 0.5); }, silu_oracle,
                                 -20.0, 20.0, 40001);
  CHECK(sup <= 1e-12);
}

TEST_CASE("tanh form vs sigmoid form, factor-2 coefficient") {
  for (double a : {0.3, 0.5, 0.8, 1.0, 2.0}) {
    double sup = sup_norm_distance(
        [a](double x) { return 0.5 * x * (std::tanh(a * x) + 1.0); },
        [a](double x) { return x * sigmoid(2.0 * a * x); }, -20.0, 20.0, 40001);
    CHECK(sup <= 1e-12);
  }
}

TEST_CASE("C0 and C1 at the split for any alpha pair") {
  for (auto [a1, a2] : {std::pair{0.3, 0.8}, std::pair{0.1, 2.0}, std::pair{1.7, 0.2}}) {
    // Evaluate both branch formulas at exactly 0.
    CHECK(0.5 * 0.0 * (std::tanh(a1 * 0.0) + 1.0) == 0.0);
    CHECK(0.5 * 0.0 * (std::tanh(a2 * 0.0) + 1.0) == 0.0);
    double left = 0.5 * (std::tanh(a1 * 0.0) + a1 * 0.0 + 1.0);
    double right = 0.5 * (std::tanh(a2 * 0.0) + a2 * 0.0 + 1.0);
    CHECK(left == 0.5);
    CHECK(right == 0.5);
    CHECK(ulu_eval(0.0, a1, a2) == 0.0);
    CHECK(ulu_dx(0.0, a1, a2) == 0.5);
  }
}

TEST_CASE("limits and derivative span at |x| = 50") {
  for (double a : {0.3, 0.55, 0.8, 1.5, 2.0}) {
    CHECK(std::fabs(ulu_dx(50.0, a, a) - 1.0) < 1e-8);
    CHECK(std::fabs(ulu_dx(-50.0, a, a)) < 1e-8);
    CHECK(std::fabs(ulu_eval(-50.0, a, a)) < 1e-8);
    // The normalization statement: total derivative span equals 1.
    CHECK(std::fabs((ulu_dx(50.0, a, a) - ulu_dx(-50.0, a, a)) - 1.0) < 1e-8);
  }
}

TEST_CASE("sign structure: ulu is x times a (0,1) gate") {
  Rng rng(11);
  for (int i = 0; i < 2000; ++i) {
    double a1 = rng.uniform(0.05, 3.0), a2 = rng.uniform(0.05, 3.0);
    double x = rng.uniform(-40.0, 40.0);
    double y = ulu_eval(x, a1, a2);
    if (x == 0.0) {
      CHECK(y == 0.0);
    } else {
      double gate = y / x;
      CHECK(gate >= 0.0);
      CHECK(gate <= 1.0);
      CHECK((y == 0.0 || std::signbit(y) == std::signbit(x)));
    }
  }
}

TEST_CASE("bounded below: grid minimum with local refinement") {
  const double a1 = 0.3, a2 = 0.8;
  auto f = [&](double x) { return ulu_eval(x, a1, a2); };

  double grid_min = 0.0, argmin = 0.0;
  const int n = 200001;
  for (int i = 0; i < n; ++i) {
    double x = -100.0 + 200.0 * i / static_cast<double>(n - 1);
    double v = f(x);
    if (v < grid_min) {
      grid_min = v;
      argmin = x;
    }
  }
  CHECK(std::isfinite(grid_min));
  CHECK(argmin < 0.0);  // the dip sits on the negative side

  // Ternary-search refinement around the grid argmin makes the frozen
  // minimum a true lower bound up to ~1e-14.
  double lo = argmin - 2e-3, hi = argmin + 2e-3;
  for (int it = 0; it < 200; ++it) {
    double m1 = lo + (hi - lo) / 3.0, m2 = hi - (hi - lo) / 3.0;
    if (f(m1) < f(m2)) hi = m2; else lo = m1;
  }
  double refined_min = std::min(grid_min, f(0.5 * (lo + hi)));

  Rng rng(12);
  for (int i = 0; i < 1000000; ++i) {
    double x = rng.uniform(-100.0, 100.0);
    CHECK(f(x) >= refined_min - 1e-9);
  }
}

TEST_CASE("closeness bounds to the classic activations hold") {
  auto ulu_f = [](double a1, double a2) {
    return [a1, a2](double x) { return ulu_eval(x, a1, a2); };
  };
  double d_relu = sup_norm_distance(
      ulu_f(10, 10), [](double x) { return reference_eval(ActivationSpec::parse("relu"), x); },
      -5.0, 5.0, 10001);
  double d_gelu = sup_norm_distance(
      ulu_f(0.8, 0.8), [](double x) { return reference_eval(ActivationSpec::parse("gelu"), x); },
      -5.0, 5.0, 10001);
  double d_mish = sup_norm_distance(
      ulu_f(0.55, 0.8), [](double x) { return reference_eval(ActivationSpec::parse("mish"), x); },
      -5.0, 5.0, 10001);
  CHECK(d_relu <= kBoundUluRelu);
  CHECK(d_gelu <= kBoundUluGelu);
  CHECK(d_mish <= kBoundUluMish);
  // The bounds are honest: the measured distances fill most of them.
  CHECK(d_relu >= kBoundUluRelu / 1.2);
  CHECK(d_gelu >= kBoundUluGelu / 1.2);
  CHECK(d_mish >= kBoundUluMish / 1.2);
}

TEST_CASE("every analytic derivative matches central differences on the grid") {
  std::vector<ActivationSpec> specs = {
      ActivationSpec::parse("ulu(0.3,0.8)"), ActivationSpec::parse("ulu(0.5,0.5)"),
      ActivationSpec::parse("ulu(1.5,2.0)"), ActivationSpec::parse("aulu"),
      ActivationSpec::parse("relu"),         ActivationSpec::parse("leaky_relu(0.01)"),
      ActivationSpec::parse("silu"),         ActivationSpec::parse("swish(1.0)"),
      ActivationSpec::parse("gelu"),         ActivationSpec::parse("mish"),
      ActivationSpec::parse("elu"),          ActivationSpec::parse("selu"),
      ActivationSpec::parse("tanh"),         ActivationSpec::parse("sigmoid"),
  };
  for (const auto& spec : specs) {
    CAPTURE(spec.to_string());
    bool piecewise = spec.kind() == ActivationKind::ULU || spec.kind() == ActivationKind::AULU ||
                     spec.kind() == ActivationKind::ReLU ||
                     spec.kind() == ActivationKind::LeakyReLU ||
                     spec.kind() == ActivationKind::ELU || spec.kind() == ActivationKind::SELU;
    double worst = 0.0;
    for (int i = 0; i < 2001; ++i) {
      double x = -10.0 + 20.0 * i / 2000.0;
      if (piecewise && std::fabs(x) < 1e-4) continue;  // fd cannot straddle the split
      double analytic = reference_dx(spec, x);
      double fd = fd_derivative([&](double t) { return reference_eval(spec, t); }, x);
      double err = std::fabs(fd - analytic);
      double allow = std::max(1e-6 * std::fabs(analytic), 1e-9);
      worst = std::max(worst, err / allow);
    }
    CHECK(worst <= 1.0);
  }
}

TEST_CASE("beta gradients match central differences on the grid") {
  for (double beta : {0.3, AdaptiveParams::kDefaultBeta, 1.4}) {
    AdaptiveParams base{beta, beta};
    for (int i = 0; i < 2001; ++i) {
      double x = -10.0 + 20.0 * i / 2000.0;
      BetaGrad g = aulu_grad_beta(x, base);
      double fd1 = fd_derivative(
          [&](double b) {
            AdaptiveParams p = base;
            p.beta1 = b;
            return aulu_eval(x, p);
          },
          base.beta1);
      double fd2 = fd_derivative(
          [&](double b) {
            AdaptiveParams p = base;
            p.beta2 = b;
            return aulu_eval(x, p);
          },
          base.beta2);
      CHECK(std::fabs(fd1 - g.d_beta1) <= std::max(1e-6 * std::fabs(g.d_beta1), 1e-8));
      CHECK(std::fabs(fd2 - g.d_beta2) <= std::max(1e-6 * std::fabs(g.d_beta2), 1e-8));
    }
  }
}
