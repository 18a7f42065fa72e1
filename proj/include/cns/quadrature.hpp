#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <type_traits>
#include <vector>

#include "cns/errors.hpp"
#include "cns/mesh.hpp"

namespace cns {

/// Gauss-Legendre rule on [0, 1].
struct LineRule {
  std::vector<double> points;
  std::vector<double> weights;  // sum to 1
  int degree = 0;
};

inline LineRule gauss_legendre(int n) {
  LineRule rule;
  rule.points.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  rule.degree = 2 * n - 1;
  for (int i = 0; i < n; ++i) {
    // Newton on P_n starting from the Chebyshev guess.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double pk = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = pk;
      }
      const double pn = n == 1 ? x : p1;
      const double pm = n == 1 ? 1.0 : p0;
      dp = n * (x * pn - pm) / (x * x - 1.0);
      const double dx = pn / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.points[static_cast<std::size_t>(i)] = 0.5 * (1.0 - x);
    rule.weights[static_cast<std::size_t>(i)] = 0.5 * w;
  }
  return rule;
}

/// Rule on the reference triangle in barycentric coordinates; weights sum to 1
/// so that integral over K = |K| * sum w_i f(x_i).
struct TriangleRule {
  std::vector<Eigen::Vector3d> points;
  std::vector<double> weights;
  int degree = 0;
};

inline TriangleRule centroid_rule() { return {{Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3)}, {1.0}, 1}; }

/// Edge-midpoint rule, exact for quadratics.
inline TriangleRule edge_midpoint_rule() {
  return {{Eigen::Vector3d(0.0, 0.5, 0.5), Eigen::Vector3d(0.5, 0.0, 0.5), Eigen::Vector3d(0.5, 0.5, 0.0)},
          {1.0 / 3, 1.0 / 3, 1.0 / 3},
          2};
}

/// Seven-point rule (Strang-Fix / Radon), exact for degree 5.
inline TriangleRule seven_point_rule() {
  const double s15 = std::sqrt(15.0);
  const double a1 = (6.0 - s15) / 21.0, b1 = (9.0 + 2.0 * s15) / 21.0;
  const double a2 = (6.0 + s15) / 21.0, b2 = (9.0 - 2.0 * s15) / 21.0;
  const double w1 = (155.0 - s15) / 1200.0, w2 = (155.0 + s15) / 1200.0;
  TriangleRule r;
  r.degree = 5;
  r.points = {Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3),
              Eigen::Vector3d(b1, a1, a1), Eigen::Vector3d(a1, b1, a1), Eigen::Vector3d(a1, a1, b1),
              Eigen::Vector3d(b2, a2, a2), Eigen::Vector3d(a2, b2, a2), Eigen::Vector3d(a2, a2, b2)};
  r.weights = {9.0 / 40, w1, w1, w1, w2, w2, w2};
  return r;
}

/// Collapsed (Duffy) tensor Gauss rule exact for polynomials of total degree `degree`.
inline TriangleRule collapsed_gauss_rule(int degree) {
  const int n = std::max(1, (degree + 3) / 2);
  const LineRule g = gauss_legendre(n);
  TriangleRule r;
  r.degree = 2 * n - 2;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double u = g.points[static_cast<std::size_t>(i)];
      const double v = g.points[static_cast<std::size_t>(j)];
      const double s = u, t = v * (1.0 - u);
      r.points.emplace_back(1.0 - s - t, s, t);
      r.weights.push_back(2.0 * g.weights[static_cast<std::size_t>(i)] * g.weights[static_cast<std::size_t>(j)] * (1.0 - u));
    }
  }
  return r;
}

/// Cheapest built-in rule exact for the requested degree.
inline TriangleRule triangle_rule(int degree) {
  if (degree <= 1) return centroid_rule();
  if (degree == 2) return edge_midpoint_rule();
  if (degree <= 5) return seven_point_rule();
  return collapsed_gauss_rule(degree);
}

/// Throws unless `rule` integrates polynomials of `required` degree exactly.
inline void require_degree(const TriangleRule& rule, int required) {
  if (rule.degree < required) {
    throw QuadratureDegreeTooLow("triangle rule of degree " + std::to_string(rule.degree) +
                                 " cannot integrate degree " + std::to_string(required) + " exactly");
  }
}

/// Integral of f over cell k.
template <class F>
auto integrate_cell(const Mesh& mesh, Index k, const TriangleRule& rule, F&& f) {
  using R = std::decay_t<decltype(f(Vec2{}))>;
  R acc = f(mesh.point(k, rule.points[0])) * rule.weights[0];
  for (std::size_t q = 1; q < rule.points.size(); ++q) acc += f(mesh.point(k, rule.points[q])) * rule.weights[q];
  acc *= mesh.cell(k).measure;
  return acc;
}

template <class F>
double integrate_cell_scalar(const Mesh& mesh, Index k, const TriangleRule& rule, F&& f) {
  double acc = 0.0;
  for (std::size_t q = 0; q < rule.points.size(); ++q) acc += rule.weights[q] * f(mesh.point(k, rule.points[q]));
  return acc * mesh.cell(k).measure;
}

}  // namespace cns
