#pragma once

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cns/errors.hpp"
#include "cns/spaces.hpp"

namespace cns {

/// Barotropic equation of state p(rho) together with its Helmholtz function
///   H(rho) = rho * int_1^rho p(z)/z^2 dz,   rho H' - H = p,   H(1) = 0,
/// and the Bregman distance E(rho|r) = H(rho) - H'(r)(rho - r) - H(r).
class PressureLaw {
 public:
  enum class Form { Isentropic, Custom };

  /// Asymptotic data: p'(rho)/rho^(gamma-1) -> p_infty at infinity and, for
  /// gamma < 2, liminf p'(rho)/rho^(alpha+1) = p0 > 0 at zero with alpha <= 0.
  struct Asymptotics {
    double gamma = 1.0;
    double p_infty = 1.0;
    std::optional<double> p0;
    std::optional<double> alpha;
  };

  /// p(rho) = coefficient * rho^gamma.
  static PressureLaw isentropic(double coefficient, double gamma) {
    if (!(coefficient > 0.0) || !(gamma >= 1.0)) {
      throw InvalidPressureLaw("isentropic law needs coefficient > 0 and gamma >= 1");
    }
    PressureLaw law;
    law.form_ = Form::Isentropic;
    law.coefficient_ = coefficient;
    law.asymptotics_.gamma = gamma;
    law.asymptotics_.p_infty = coefficient * gamma;
    if (gamma < 2.0) {
      law.asymptotics_.alpha = gamma - 2.0;
      law.asymptotics_.p0 = coefficient * gamma;
    }
    return law;
  }

  /// General C^1 law given by p and p'. Validated on a positive sample grid.
  static PressureLaw custom(std::function<double(double)> p, std::function<double(double)> dp, Asymptotics asym) {
    PressureLaw law;
    law.form_ = Form::Custom;
    law.p_ = std::move(p);
    law.dp_ = std::move(dp);
    law.asymptotics_ = asym;
    law.validate();
    return law;
  }

  [[nodiscard]] Form form() const { return form_; }
  [[nodiscard]] double gamma() const { return asymptotics_.gamma; }
  [[nodiscard]] double coefficient() const { return coefficient_; }
  [[nodiscard]] const Asymptotics& asymptotics() const { return asymptotics_; }

  [[nodiscard]] double pressure(double rho) const {
    check_density(rho);
    if (form_ == Form::Isentropic) return coefficient_ * std::pow(rho, gamma());
    return p_(rho);
  }

  [[nodiscard]] double dpressure(double rho) const {
    check_density(rho);
    if (form_ == Form::Isentropic) return coefficient_ * gamma() * std::pow(rho, gamma() - 1.0);
    return dp_(rho);
  }

  [[nodiscard]] double H(double rho) const {
    check_density(rho);
    if (rho == 0.0) return zero_limit();
    if (form_ == Form::Isentropic) {
      const double g = gamma();
      if (g == 1.0) return coefficient_ * rho * std::log(rho);
      return coefficient_ * (std::pow(rho, g) - rho) / (g - 1.0);
    }
    return rho * integral_p_over_z2(rho);
  }

  /// H'(rho) = int_1^rho p(z)/z^2 dz + p(rho)/rho
  [[nodiscard]] double dH(double rho) const {
    if (!(rho > 0.0)) throw NonPositiveReference("H' needs a positive density");
    if (form_ == Form::Isentropic) {
      const double g = gamma();
      if (g == 1.0) return coefficient_ * (std::log(rho) + 1.0);
      return coefficient_ * (g * std::pow(rho, g - 1.0) - 1.0) / (g - 1.0);
    }
    return integral_p_over_z2(rho) + p_(rho) / rho;
  }

  /// H''(rho) = p'(rho)/rho
  [[nodiscard]] double d2H(double rho) const {
    if (!(rho > 0.0)) throw NonPositiveReference("H'' needs a positive density");
    return dpressure(rho) / rho;
  }

  /// E(rho|r) >= 0, evaluated without cancellation near rho = r.
  [[nodiscard]] double bregman(double rho, double r) const {
    if (!(r > 0.0)) throw NonPositiveReference("Bregman distance needs r > 0");
    check_density(rho);
    if (rho == 0.0) {
      zero_limit();
      return pressure(r);  // E(0|r) = r H'(r) - H(r) = p(r)
    }
    if (form_ == Form::Isentropic) return isentropic_bregman(rho, r);
    // E(rho|r) = int_r^rho (rho - z) p'(z)/z dz, a nonnegative integrand.
    auto integrand = [&](double z) { return (rho - z) * dp_(z) / z; };
    const double lo = std::min(rho, r), hi = std::max(rho, r);
    if (hi == lo) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(integrand, lo, hi, 20, 1e-13) *
           (rho >= r ? 1.0 : -1.0);
  }

 private:
  PressureLaw() = default;

  void check_density(double rho) const {
    if (rho < 0.0 || std::isnan(rho)) throw NegativeDensity("negative density " + std::to_string(rho));
  }

  double zero_limit() const {
    if (gamma() <= 1.0) throw NegativeDensity("rho = 0 is not admitted for gamma = 1 laws");
    return 0.0;
  }

  double integral_p_over_z2(double rho) const {
    if (rho == 1.0) return 0.0;
    auto f = [&](double z) { return p_(z) / (z * z); };
    const double v = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, std::min(1.0, rho),
                                                                                    std::max(1.0, rho), 25, 1e-13);
    return rho >= 1.0 ? v : -v;
  }

  double isentropic_bregman(double rho, double r) const {
    const double g = gamma();
    const double d = rho / r - 1.0;
    if (g == 2.0) return coefficient_ * (rho - r) * (rho - r);
    if (g == 1.0) {
      // r * (x log x - x + 1), x = rho / r
      const double x = rho / r;
      const double f = std::abs(d) < 1e-3 ? d * d * (0.5 - d / 6.0 + d * d / 12.0) : x * std::log(x) - x + 1.0;
      return coefficient_ * r * f;
    }
    // a r^g / (g-1) * (x^g - 1 - g (x - 1))
    double f;
    if (std::abs(d) < 1e-3) {
      const double c2 = g * (g - 1.0) / 2.0;
      const double c3 = c2 * (g - 2.0) / 3.0;
      const double c4 = c3 * (g - 3.0) / 4.0;
      f = d * d * (c2 + d * (c3 + d * c4));
    } else {
      f = std::expm1(g * std::log1p(d)) - g * d;
    }
    return coefficient_ * std::pow(r, g) / (g - 1.0) * f;
  }

  void validate() const {
    if (!p_ || !dp_) throw InvalidPressureLaw("custom law needs p and p'");
    if (std::abs(p_(0.0)) > 1e-14) throw InvalidPressureLaw("p(0) must vanish");
    for (double rho = 1e-4; rho < 1e4; rho *= 1.5) {
      if (!(dp_(rho) > 0.0)) throw InvalidPressureLaw("p' must be positive; fails at rho=" + std::to_string(rho));
    }
    if (!(asymptotics_.gamma >= 1.0) || !(asymptotics_.p_infty > 0.0)) {
      throw InvalidPressureLaw("need gamma >= 1 and p_infty > 0");
    }
    if (asymptotics_.gamma < 2.0) {
      if (!asymptotics_.alpha || !asymptotics_.p0 || *asymptotics_.alpha > 0.0 || !(*asymptotics_.p0 > 0.0)) {
        throw InvalidPressureLaw("gamma < 2 requires alpha <= 0 and p0 > 0");
      }
    }
  }

  Form form_ = Form::Isentropic;
  double coefficient_ = 1.0;
  Asymptotics asymptotics_;
  std::function<double(double)> p_;
  std::function<double(double)> dp_;
};

/// Shear viscosity mu > 0 and lambda with lambda + mu >= 0 (2D: lambda + (2/d) mu >= 0).
struct ViscosityParams {
  double mu = 1.0;
  double lambda = 0.0;

  void validate(int dim = 2) const {
    if (!(mu > 0.0) || !(lambda + 2.0 / dim * mu >= 0.0)) {
      throw Error("viscosity needs mu > 0 and lambda + (2/d) mu >= 0");
    }
  }
};

inline double helmholtz_H(const PressureLaw& law, double rho) { return law.H(rho); }
inline double bregman_E(const PressureLaw& law, double rho, double r) { return law.bregman(rho, r); }

/// sum_K |K| ( 1/2 rho_K |u_K - U_K|^2 + E(rho_K | r_K) ) with cell means of the CR fields.
inline double relative_energy(const PressureLaw& law, const ScalarCellField& rho, const CRVectorField& u,
                              const ScalarCellField& r, const CRVectorField& U) {
  const Mesh& mesh = *rho.mesh();
  double s = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const Vec2 du = u.cell_mean(k) - U.cell_mean(k);
    s += mesh.cell(k).measure * (0.5 * rho[k] * du.squaredNorm() + law.bregman(rho[k], r[k]));
  }
  return s;
}

/// Essential cells have rho in [r_low/2, 2 r_high]; the rest are residual.
struct EssentialResidualSplit {
  std::vector<bool> essential;
  double residual_measure = 0.0;        ///< int [1]_res
  double residual_gamma_mass = 0.0;     ///< int [rho^gamma]_res
  double essential_l2_distance_sq = 0.0;  ///< int [rho - r]^2_ess

  [[nodiscard]] double aggregate() const {
    return residual_measure + residual_gamma_mass + essential_l2_distance_sq;
  }
};

inline EssentialResidualSplit essential_residual_split(const ScalarCellField& rho, const ScalarCellField& r,
                                                       double r_low, double r_high, double gamma) {
  if (!(r_low > 0.0) || r_low > r_high) throw Error("essential_residual_split needs 0 < r_low <= r_high");
  const Mesh& mesh = *rho.mesh();
  EssentialResidualSplit out;
  out.essential.resize(static_cast<std::size_t>(mesh.num_cells()));
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const double area = mesh.cell(k).measure;
    const bool ess = rho[k] >= 0.5 * r_low && rho[k] <= 2.0 * r_high;
    out.essential[static_cast<std::size_t>(k)] = ess;
    if (ess) {
      out.essential_l2_distance_sq += area * (rho[k] - r[k]) * (rho[k] - r[k]);
    } else {
      out.residual_measure += area;
      out.residual_gamma_mass += area * std::pow(rho[k], gamma);
    }
  }
  return out;
}

/// Pointwise ratio E(rho|r) / (1_res + rho^gamma 1_res + (rho - r)^2 1_ess), the
/// quantity whose infimum is the coercivity constant of E on [r_low, r_high].
inline double coercivity_ratio(const PressureLaw& law, double rho, double r, double r_low, double r_high) {
  const bool ess = rho >= 0.5 * r_low && rho <= 2.0 * r_high;
  const double denom = ess ? (rho - r) * (rho - r) : 1.0 + std::pow(rho, law.gamma());
  if (denom == 0.0) return std::numeric_limits<double>::infinity();
  return law.bregman(rho, r) / denom;
}

/// Empirical coercivity constant: the smallest coercivity_ratio over a log-spaced
/// density grid and reference values spread over [r_low, r_high].
inline double fit_coercivity_constant(const PressureLaw& law, double r_low, double r_high, int rho_samples = 400,
                                      int r_samples = 9) {
  if (!(r_low > 0.0) || r_low > r_high) throw Error("fit_coercivity_constant needs 0 < r_low <= r_high");
  const double lo = std::log(1e-3 * r_low), hi = std::log(1e3 * r_high);
  double c = std::numeric_limits<double>::infinity();
  for (int j = 0; j < r_samples; ++j) {
    const double r = r_samples == 1 ? r_low : r_low + (r_high - r_low) * j / (r_samples - 1);
    for (int i = 0; i < rho_samples; ++i) {
      const double rho = std::exp(lo + (hi - lo) * i / (rho_samples - 1));
      if (rho == r) continue;
      c = std::min(c, coercivity_ratio(law, rho, r, r_low, r_high));
    }
  }
  return c;
}

}  // namespace cns
