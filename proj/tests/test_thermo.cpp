#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "cns/errors.hpp"
#include "cns/mesh.hpp"
#include "cns/spaces.hpp"
#include "cns/thermo.hpp"

using namespace cns;

namespace {

// Composite Simpson on [a, b] with n (even) panels.
double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

// H(rho) = rho int_1^rho p(z)/z^2 dz and H'(rho) = int_1^rho p/z^2 + p(rho)/rho, by quadrature.
struct QuadratureH {
  std::function<double(double)> p;
  double H(double rho) const { return rho * simpson([&](double z) { return p(z) / (z * z); }, 1.0, rho); }
  double dH(double rho) const { return simpson([&](double z) { return p(z) / (z * z); }, 1.0, rho) + p(rho) / rho; }
};

PressureLaw sum_law(std::vector<std::pair<double, double>> terms, PressureLaw::Asymptotics asym) {
  auto p = [terms](double rho) {
    double s = 0.0;
    for (auto [a, g] : terms) s += a * std::pow(rho, g);
    return s;
  };
  auto dp = [terms](double rho) {
    double s = 0.0;
    for (auto [a, g] : terms) s += a * g * std::pow(rho, g - 1.0);
    return s;
  };
  return PressureLaw::custom(p, dp, asym);
}

}  // namespace

TEST(Helmholtz, NormalizationAndClosedForm) {
  const PressureLaw law = PressureLaw::isentropic(1.0, 2.0);
  EXPECT_EQ(law.H(1.0), 0.0);
  EXPECT_NEAR(law.H(2.0), 2.0, 1e-14);
  const QuadratureH q{[](double z) { return z * z; }};
  EXPECT_NEAR(law.H(2.0), q.H(2.0), 1e-12);
  for (double g : {1.0, 1.4, 3.0}) EXPECT_EQ(PressureLaw::isentropic(2.0, g).H(1.0), 0.0);
}

TEST(Helmholtz, OdeRelation) {
  std::vector<PressureLaw> laws{PressureLaw::isentropic(1.0, 1.0), PressureLaw::isentropic(1.0, 1.4),
                                PressureLaw::isentropic(0.7, 2.0), PressureLaw::isentropic(1.0, 3.0),
                                sum_law({{1.0, 1.5}, {0.5, 3.0}}, {3.0, 1.5, 1.5, -0.5})};
  for (const PressureLaw& law : laws) {
    for (double rho = 0.05; rho < 20.0; rho *= 1.7) {
      const double p = law.pressure(rho);
      EXPECT_NEAR((rho * law.dH(rho) - law.H(rho)) / p, 1.0, 1e-10) << "gamma=" << law.gamma() << " rho=" << rho;
      EXPECT_NEAR(law.d2H(rho), law.dpressure(rho) / rho, 1e-12 * law.d2H(rho));
    }
  }
}

TEST(Helmholtz, ConvexOnLogGrid) {
  for (double g : {1.0, 1.4, 2.0, 3.0}) {
    const PressureLaw law = PressureLaw::isentropic(1.0, g);
    for (double a = 1e-3; a < 1e3; a *= 1.9) {
      for (double b = a * 1.3; b < 1e3; b *= 2.3) {
        EXPECT_LT(law.H(0.5 * (a + b)), 0.5 * (law.H(a) + law.H(b))) << "gamma=" << g;
      }
    }
  }
}

TEST(Bregman, QuadraticLawIsSquaredDistance) {
  const PressureLaw law = PressureLaw::isentropic(1.0, 2.0);
  std::mt19937 rng(1);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  for (int i = 0; i < 10000; ++i) {
    const double rho = u(rng), r = u(rng) + 1e-3;
    EXPECT_NEAR(law.bregman(rho, r), (rho - r) * (rho - r), 1e-13 * (1.0 + (rho - r) * (rho - r)));
  }
}

TEST(Bregman, NonnegativeZeroOnlyOnDiagonal) {
  std::mt19937 rng(2);
  std::uniform_real_distribution<double> logu(-4.0, 4.0);
  for (double g : {1.0, 1.4, 2.0, 3.0}) {
    const PressureLaw law = PressureLaw::isentropic(1.0, g);
    for (int i = 0; i < 10000; ++i) {
      const double rho = std::exp(logu(rng)), r = std::exp(logu(rng));
      const double e = law.bregman(rho, r);
      EXPECT_GE(e, 0.0);
      if (std::abs(rho / r - 1.0) > 1e-6) {
        EXPECT_GT(e, 0.0) << "gamma=" << g << " rho=" << rho << " r=" << r;
      }
    }
    EXPECT_EQ(law.bregman(1.7, 1.7), 0.0);
  }
}

TEST(Bregman, IsentropicAgainstQuadratureOracle) {
  const double g = 1.4;
  const PressureLaw law = PressureLaw::isentropic(1.0, g);
  const QuadratureH q{[g](double z) { return std::pow(z, g); }};
  const double oracle = q.H(2.0) - q.dH(1.0) * (2.0 - 1.0) - q.H(1.0);
  EXPECT_NEAR(law.bregman(2.0, 1.0), oracle, 1e-12);
}

TEST(Bregman, CustomLawMatchesIsentropic) {
  const PressureLaw iso = PressureLaw::isentropic(1.0, 1.4);
  const PressureLaw custom = sum_law({{1.0, 1.4}}, {1.4, 1.4, 1.4, -0.6});
  for (double rho : {0.1, 0.9, 1.0, 1.3, 7.0}) {
    EXPECT_NEAR(custom.H(rho), iso.H(rho), 1e-11);
    for (double r : {0.5, 1.0, 4.0}) EXPECT_NEAR(custom.bregman(rho, r), iso.bregman(rho, r), 1e-11);
  }
}

TEST(Bregman, SmallGapsKeepPrecision) {
  for (double g : {1.0, 1.4, 3.0}) {
    const PressureLaw law = PressureLaw::isentropic(1.0, g);
    const double r = 1.3, d = 1e-7;
    // second-order Taylor: E ~ 1/2 H''(r) d^2
    EXPECT_NEAR(law.bregman(r + d, r) / (0.5 * law.d2H(r) * d * d), 1.0, 1e-6);
  }
}

TEST(Bregman, VacuumAndErrors) {
  const PressureLaw law = PressureLaw::isentropic(1.0, 1.4);
  EXPECT_NEAR(law.bregman(0.0, 2.0), law.pressure(2.0), 1e-14);
  EXPECT_THROW(static_cast<void>(PressureLaw::isentropic(1.0, 1.0).bregman(0.0, 1.0)), NegativeDensity);
  EXPECT_THROW(static_cast<void>(law.bregman(-0.1, 1.0)), NegativeDensity);
  EXPECT_THROW(static_cast<void>(law.bregman(1.0, 0.0)), NonPositiveReference);
  EXPECT_THROW(static_cast<void>(law.bregman(1.0, -1.0)), NonPositiveReference);
}

TEST(PressureLaw, Validation) {
  EXPECT_THROW(PressureLaw::isentropic(0.0, 2.0), InvalidPressureLaw);
  EXPECT_THROW(PressureLaw::isentropic(1.0, 0.5), InvalidPressureLaw);
  // decreasing pressure
  EXPECT_THROW(sum_law({{-1.0, 2.0}}, {2.0, 1.0, {}, {}}), InvalidPressureLaw);
  // gamma < 2 needs the behaviour at zero
  EXPECT_THROW(sum_law({{1.0, 1.5}}, {1.5, 1.5, {}, {}}), InvalidPressureLaw);
  EXPECT_NO_THROW(sum_law({{1.0, 1.5}}, {1.5, 1.5, 1.5, -0.5}));
}

TEST(RelativeEnergy, TwoCellHandValues) {
  const MeshPtr m = build_mesh({Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)}, {{0, 1, 2}, {0, 2, 3}});
  const PressureLaw law = PressureLaw::isentropic(1.0, 2.0);
  const ScalarCellField rho(m, std::vector<double>{1.2, 0.8});
  const ScalarCellField r(m, std::vector<double>{1.0, 1.0});
  CRVectorField u(m), U(m);
  // pure Bregman part: 0.5 * 0.2^2 + 0.5 * 0.2^2
  EXPECT_NEAR(relative_energy(law, rho, u, r, U), 0.04, 1e-15);
  // one dof shared by both cells: cell means are dof/3
  u.set_dof(0, Vec2(3.0, 0.0));
  const double kinetic = 0.5 * 0.5 * 1.2 * 1.0 + 0.5 * 0.5 * 0.8 * 1.0;
  EXPECT_NEAR(relative_energy(law, rho, u, r, U), 0.04 + kinetic, 1e-15);
  EXPECT_NEAR(relative_energy(law, rho, u, rho, u), 0.0, 1e-15);
}

TEST(EssentialResidual, Examples) {
  const MeshPtr m = structured_triangulation(3, 3);
  const ScalarCellField r(m, 1.0);
  const EssentialResidualSplit all = essential_residual_split(r, r, 0.5, 2.0, 2.0);
  EXPECT_EQ(all.residual_measure, 0.0);
  EXPECT_EQ(all.essential_l2_distance_sq, 0.0);

  ScalarCellField rho(m, 1.0);
  rho[5] = 4.0 * 2.0;
  const double area = m->cell(5).measure;
  const EssentialResidualSplit one = essential_residual_split(rho, r, 0.5, 2.0, 1.4);
  EXPECT_FALSE(one.essential[5]);
  EXPECT_NEAR(one.residual_measure, area, 1e-15);
  EXPECT_NEAR(one.residual_gamma_mass, area * std::pow(8.0, 1.4), 1e-13);
  EXPECT_THROW(essential_residual_split(rho, r, 2.0, 1.0, 2.0), Error);
}

TEST(EssentialResidual, CoercivityConstantPositiveAndStable) {
  for (double g : {1.4, 2.0, 3.0}) {
    const PressureLaw law = PressureLaw::isentropic(1.0, g);
    const double c = fit_coercivity_constant(law, 0.5, 2.0);
    const double c_fine = fit_coercivity_constant(law, 0.5, 2.0, 1600, 17);
    EXPECT_GT(c, 0.0);
    EXPECT_NEAR(c_fine / c, 1.0, 0.05) << "gamma=" << g;

    // c * aggregate <= sum E on random density fields
    const MeshPtr m = structured_triangulation(4, 4);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> logu(-5.0, 5.0), ru(0.5, 2.0);
    for (int trial = 0; trial < 50; ++trial) {
      ScalarCellField rho(m), r(m);
      double e = 0.0;
      for (Index k = 0; k < m->num_cells(); ++k) {
        rho[k] = std::exp(logu(rng));
        r[k] = ru(rng);
        e += m->cell(k).measure * law.bregman(rho[k], r[k]);
      }
      const EssentialResidualSplit s = essential_residual_split(rho, r, 0.5, 2.0, g);
      EXPECT_LE(c_fine * s.aggregate(), e * (1.0 + 1e-12));
    }
  }
}

TEST(Viscosity, Validation) {
  EXPECT_NO_THROW((ViscosityParams{1.0, -1.0}.validate()));
  EXPECT_THROW((ViscosityParams{0.0, 0.0}.validate()), Error);
  EXPECT_THROW((ViscosityParams{1.0, -1.5}.validate()), Error);
}
