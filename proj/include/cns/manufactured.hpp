#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <numbers>

#include "cns/mesh.hpp"
#include "cns/scheme.hpp"
#include "cns/thermo.hpp"

namespace cns {

/// Second-order forward-mode jet over the variables (t, x, y).
struct Jet {
  double v = 0.0;
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  Eigen::Matrix3d h = Eigen::Matrix3d::Zero();

  static Jet constant(double c) { return Jet{c, Eigen::Vector3d::Zero(), Eigen::Matrix3d::Zero()}; }
  static Jet variable(double value, int i) {
    Jet j = constant(value);
    j.g[i] = 1.0;
    return j;
  }

  Jet& operator+=(const Jet& o) { v += o.v; g += o.g; h += o.h; return *this; }
  Jet& operator-=(const Jet& o) { v -= o.v; g -= o.g; h -= o.h; return *this; }
  Jet& operator*=(double s) { v *= s; g *= s; h *= s; return *this; }

  friend Jet operator+(Jet a, const Jet& b) { return a += b; }
  friend Jet operator-(Jet a, const Jet& b) { return a -= b; }
  friend Jet operator-(Jet a) { return a *= -1.0; }
  friend Jet operator*(Jet a, double s) { return a *= s; }
  friend Jet operator*(double s, Jet a) { return a *= s; }
  friend Jet operator+(Jet a, double s) { a.v += s; return a; }
  friend Jet operator+(double s, Jet a) { a.v += s; return a; }
  friend Jet operator*(const Jet& a, const Jet& b) {
    return Jet{a.v * b.v, a.v * b.g + b.v * a.g, a.v * b.h + b.v * a.h + a.g * b.g.transpose() + b.g * a.g.transpose()};
  }
  friend Jet operator/(const Jet& a, const Jet& b) { return a * reciprocal(b); }

  /// phi(a) given phi, phi', phi'' at a.v.
  static Jet chain(const Jet& a, double f, double df, double d2f) {
    return Jet{f, df * a.g, df * a.h + d2f * a.g * a.g.transpose()};
  }
  friend Jet reciprocal(const Jet& a) { return chain(a, 1.0 / a.v, -1.0 / (a.v * a.v), 2.0 / (a.v * a.v * a.v)); }
  friend Jet sin(const Jet& a) { return chain(a, std::sin(a.v), std::cos(a.v), -std::sin(a.v)); }
  friend Jet cos(const Jet& a) { return chain(a, std::cos(a.v), -std::sin(a.v), -std::cos(a.v)); }
  friend Jet exp(const Jet& a) {
    const double e = std::exp(a.v);
    return chain(a, e, e, e);
  }
};

/// Smooth pair (r, U) on the unit square with U = 0 on the boundary and the
/// forcing that makes it an exact solution of the barotropic system:
///   f_rho = r_t + div(r U)
///   f_m   = (r U)_t + div(r U (x) U) - mu Lap U - (mu + lambda) grad div U + grad p(r).
class ManufacturedFlow {
 public:
  struct Params {
    double density_amplitude = 0.3;
    double velocity_amplitude = 0.5;
    double swirl_amplitude = 0.5;
    double decay = 1.0;
  };

  ManufacturedFlow(Physics physics, Params params) : physics_(std::move(physics)), params_(params) {}
  explicit ManufacturedFlow(Physics physics) : ManufacturedFlow(std::move(physics), Params{}) {}

  [[nodiscard]] double density(double t, const Vec2& x) const { return density_jet(jets(t, x)).v; }
  [[nodiscard]] Vec2 velocity(double t, const Vec2& x) const {
    const auto u = velocity_jet(jets(t, x));
    return {u[0].v, u[1].v};
  }
  [[nodiscard]] Mat2 velocity_gradient(double t, const Vec2& x) const {
    const auto u = velocity_jet(jets(t, x));
    Mat2 g;
    g << u[0].g[1], u[0].g[2], u[1].g[1], u[1].g[2];
    return g;
  }

  [[nodiscard]] double mass_source(double t, const Vec2& x) const {
    const auto j = jets(t, x);
    const Jet r = density_jet(j);
    const auto u = velocity_jet(j);
    const Jet m0 = r * u[0], m1 = r * u[1];
    return r.g[0] + m0.g[1] + m1.g[2];
  }

  [[nodiscard]] Vec2 momentum_source(double t, const Vec2& x) const {
    const auto j = jets(t, x);
    const Jet r = density_jet(j);
    const auto u = velocity_jet(j);
    const double mu = physics_.viscosity.mu;
    const double ml = physics_.viscosity.mu + physics_.viscosity.lambda;
    const double dp = physics_.pressure.dpressure(r.v);
    const double div_x = u[0].h(1, 1) + u[1].h(2, 1);  // d/dx div U
    const double div_y = u[0].h(1, 2) + u[1].h(2, 2);  // d/dy div U
    Vec2 f;
    for (int i = 0; i < 2; ++i) {
      const Jet m = r * u[static_cast<std::size_t>(i)];
      const Jet fx = m * u[0], fy = m * u[1];
      const double lap = u[static_cast<std::size_t>(i)].h(1, 1) + u[static_cast<std::size_t>(i)].h(2, 2);
      f[i] = m.g[0] + fx.g[1] + fy.g[2] - mu * lap - ml * (i == 0 ? div_x : div_y) + dp * r.g[1 + i];
    }
    return f;
  }

  [[nodiscard]] SourceTerms sources() const {
    return {[self = *this](double t, const Vec2& x) { return self.mass_source(t, x); },
            [self = *this](double t, const Vec2& x) { return self.momentum_source(t, x); }};
  }

  [[nodiscard]] State initial_state(const MeshPtr& mesh) const {
    return project_initial_data(mesh, [this](const Vec2& x) { return density(0.0, x); },
                                [this](const Vec2& x) { return velocity(0.0, x); });
  }

  [[nodiscard]] const Physics& physics() const { return physics_; }

 private:
  using Vars = std::array<Jet, 3>;

  static Vars jets(double t, const Vec2& x) {
    return {Jet::variable(t, 0), Jet::variable(x[0], 1), Jet::variable(x[1], 2)};
  }

  // r = 1 + a e^{-kt} cos(pi x) cos(pi y); its spatial mean is 1 for every t.
  Jet density_jet(const Vars& v) const {
    constexpr double pi = std::numbers::pi;
    return 1.0 + params_.density_amplitude * exp(-params_.decay * v[0]) * cos(pi * v[1]) * cos(pi * v[2]);
  }

  // U = b e^{-kt} s (1, 1) + c e^{-kt} (sin^2(pi x) sin(2 pi y), -sin(2 pi x) sin^2(pi y)),
  // s = sin(pi x) sin(pi y).
  std::array<Jet, 2> velocity_jet(const Vars& v) const {
    constexpr double pi = std::numbers::pi;
    const Jet decay = exp(-params_.decay * v[0]);
    const Jet sx = sin(pi * v[1]), sy = sin(pi * v[2]);
    const Jet bump = params_.velocity_amplitude * decay * sx * sy;
    const Jet swirl = params_.swirl_amplitude * decay;
    return {bump + swirl * sx * sx * sin(2.0 * pi * v[2]), bump - swirl * sin(2.0 * pi * v[1]) * sy * sy};
  }

  Physics physics_;
  Params params_;
};

/// Density 1 + amplitude * exp(-|x - center|^2 / width^2).
inline double gaussian_bump(const Vec2& x, const Vec2& center, double amplitude, double width) {
  return 1.0 + amplitude * std::exp(-(x - center).squaredNorm() / (width * width));
}

}  // namespace cns
