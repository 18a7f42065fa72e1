#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

#include "cns/errors.hpp"
#include "cns/mesh.hpp"
#include "cns/quadrature.hpp"

namespace cns {

/// Piecewise-constant function, one value per cell.
class ScalarCellField {
 public:
  ScalarCellField() = default;
  explicit ScalarCellField(MeshPtr mesh, double fill = 0.0)
      : mesh_(std::move(mesh)), values_(static_cast<std::size_t>(mesh_->num_cells()), fill) {}
  ScalarCellField(MeshPtr mesh, std::vector<double> values) : mesh_(std::move(mesh)), values_(std::move(values)) {
    if (static_cast<Index>(values_.size()) != mesh_->num_cells()) throw Error("ScalarCellField size mismatch");
  }

  [[nodiscard]] const MeshPtr& mesh() const { return mesh_; }
  [[nodiscard]] Index size() const { return static_cast<Index>(values_.size()); }
  [[nodiscard]] double operator[](Index k) const { return values_[static_cast<std::size_t>(k)]; }
  double& operator[](Index k) { return values_[static_cast<std::size_t>(k)]; }
  [[nodiscard]] const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  /// sum_K |K| q_K
  [[nodiscard]] double integral() const {
    double s = 0.0;
    for (Index k = 0; k < size(); ++k) s += mesh_->cell(k).measure * (*this)[k];
    return s;
  }
  [[nodiscard]] double min() const { return *std::min_element(values_.begin(), values_.end()); }
  [[nodiscard]] double max() const { return *std::max_element(values_.begin(), values_.end()); }
  [[nodiscard]] bool all_finite() const {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
  }
  /// (sum_K |K| |q_K|^p)^(1/p)
  [[nodiscard]] double lp_norm(double p) const {
    double s = 0.0;
    for (Index k = 0; k < size(); ++k) s += mesh_->cell(k).measure * std::pow(std::abs((*this)[k]), p);
    return std::pow(s, 1.0 / p);
  }

 private:
  MeshPtr mesh_;
  std::vector<double> values_;
};

namespace detail {

template <int Dim>
Eigen::Matrix<double, Dim, 1> as_value(double v) {
  static_assert(Dim == 1);
  return Eigen::Matrix<double, 1, 1>(v);
}

template <int Dim, class Derived>
Eigen::Matrix<double, Dim, 1> as_value(const Eigen::MatrixBase<Derived>& v) {
  return v;
}

}  // namespace detail

/// Crouzeix-Raviart field with `Dim` components: one face-mean value per internal
/// face, zero mean on boundary faces. Components are interleaved in `dofs()`.
template <int Dim>
class CRField {
 public:
  using Value = Eigen::Matrix<double, Dim, 1>;
  using Gradient = Eigen::Matrix<double, Dim, 2>;

  CRField() = default;
  explicit CRField(MeshPtr mesh)
      : mesh_(std::move(mesh)), dofs_(Eigen::VectorXd::Zero(Dim * mesh_->num_internal_faces())) {}
  CRField(MeshPtr mesh, Eigen::VectorXd dofs) : mesh_(std::move(mesh)), dofs_(std::move(dofs)) {
    if (dofs_.size() != Dim * mesh_->num_internal_faces()) throw Error("CRField size mismatch");
  }

  [[nodiscard]] const MeshPtr& mesh() const { return mesh_; }
  [[nodiscard]] const Eigen::VectorXd& dofs() const { return dofs_; }
  Eigen::VectorXd& dofs() { return dofs_; }
  [[nodiscard]] Index num_dofs() const { return static_cast<Index>(dofs_.size()); }

  [[nodiscard]] Value dof(Index d) const { return dofs_.template segment<Dim>(Dim * d); }
  void set_dof(Index d, const Value& v) { dofs_.template segment<Dim>(Dim * d) = v; }

  /// Face mean on `face`; zero on the boundary.
  [[nodiscard]] Value face_value(Index face) const {
    const Index d = mesh_->dof(face);
    return d == kNoDof ? Value::Zero() : dof(d);
  }

  /// Value at barycentric point `bary` of cell k.
  [[nodiscard]] Value eval(Index k, const Eigen::Vector3d& bary) const {
    const Cell& c = mesh_->cell(k);
    Value v = Value::Zero();
    for (int i = 0; i < 3; ++i) v += (1.0 - 2.0 * bary[i]) * face_value(c.faces[static_cast<std::size_t>(i)]);
    return v;
  }

  /// (1/|K|) int_K u: the mean of the three face values.
  [[nodiscard]] Value cell_mean(Index k) const {
    const Cell& c = mesh_->cell(k);
    return (face_value(c.faces[0]) + face_value(c.faces[1]) + face_value(c.faces[2])) / 3.0;
  }

  /// Constant gradient of the affine restriction to cell k.
  [[nodiscard]] Gradient gradient(Index k) const {
    const Cell& c = mesh_->cell(k);
    Gradient g = Gradient::Zero();
    for (Index f : c.faces) {
      const Index d = mesh_->dof(f);
      if (d == kNoDof) continue;
      g += dof(d) * basis_gradient(*mesh_, k, f).transpose();
    }
    return g;
  }

  /// Gradient of phi_sigma on cell k: |sigma| n_{sigma,K} / |K|.
  static Vec2 basis_gradient(const Mesh& mesh, Index k, Index face) {
    return mesh.face(face).measure / mesh.cell(k).measure * mesh.normal(face, k);
  }

  CRField& operator+=(const CRField& o) { dofs_ += o.dofs_; return *this; }
  CRField& operator-=(const CRField& o) { dofs_ -= o.dofs_; return *this; }
  CRField& operator*=(double s) { dofs_ *= s; return *this; }
  friend CRField operator+(CRField a, const CRField& b) { return a += b; }
  friend CRField operator-(CRField a, const CRField& b) { return a -= b; }
  friend CRField operator*(double s, CRField a) { return a *= s; }

 private:
  MeshPtr mesh_;
  Eigen::VectorXd dofs_;
};

using CRScalarField = CRField<1>;
using CRVectorField = CRField<2>;

/// Per-cell gradient tensors of a CR field.
template <int Dim>
struct BrokenGradient {
  std::vector<Eigen::Matrix<double, Dim, 2>> cells;

  /// Trace per cell (vector fields only).
  [[nodiscard]] std::vector<double> divergence() const {
    static_assert(Dim == 2);
    std::vector<double> div;
    div.reserve(cells.size());
    for (const auto& g : cells) div.push_back(g.trace());
    return div;
  }
};

template <int Dim>
BrokenGradient<Dim> broken_gradient(const CRField<Dim>& u) {
  BrokenGradient<Dim> g;
  g.cells.reserve(static_cast<std::size_t>(u.mesh()->num_cells()));
  for (Index k = 0; k < u.mesh()->num_cells(); ++k) g.cells.push_back(u.gradient(k));
  return g;
}

/// |u|_{V_h^p} = (sum_K int_K |grad u|^p)^(1/p), Frobenius norm pointwise.
template <int Dim>
double broken_norm(const CRField<Dim>& u, double p) {
  if (!(p >= 1.0)) throw Error("broken_norm requires p >= 1");
  const Mesh& mesh = *u.mesh();
  double s = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    s += mesh.cell(k).measure * std::pow(u.gradient(k).norm(), p);
  }
  return std::pow(s, 1.0 / p);
}

/// Cell means of a scalar function.
template <class F>
ScalarCellField cell_average(const MeshPtr& mesh, F&& f, const TriangleRule& rule, int required_degree = 0) {
  require_degree(rule, required_degree);
  ScalarCellField out(mesh);
  for (Index k = 0; k < mesh->num_cells(); ++k) {
    out[k] = integrate_cell_scalar(*mesh, k, rule, f) / mesh->cell(k).measure;
  }
  return out;
}

template <class F>
ScalarCellField cell_average(const MeshPtr& mesh, F&& f) {
  return cell_average(mesh, std::forward<F>(f), seven_point_rule());
}

inline ScalarCellField cell_average(const ScalarCellField& q) { return q; }

/// Componentwise cell means of a vector function.
template <class F>
std::vector<Vec2> cell_average_vector(const Mesh& mesh, F&& f, const TriangleRule& rule) {
  std::vector<Vec2> out;
  out.reserve(static_cast<std::size_t>(mesh.num_cells()));
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    out.push_back(integrate_cell(mesh, k, rule, [&](const Vec2& x) -> Vec2 { return f(x); }) / mesh.cell(k).measure);
  }
  return out;
}

/// Mean of f over a face using an n-point Gauss rule.
template <class F>
auto face_mean(const Mesh& mesh, Index face, F&& f, const LineRule& rule) {
  const Face& fc = mesh.face(face);
  const Vec2& a = mesh.vertex(fc.vertices[0]);
  const Vec2& b = mesh.vertex(fc.vertices[1]);
  using R = std::decay_t<decltype(f(Vec2{}))>;
  R acc = f(Vec2((1.0 - rule.points[0]) * a + rule.points[0] * b)) * rule.weights[0];
  for (std::size_t q = 1; q < rule.points.size(); ++q) {
    acc += f(Vec2((1.0 - rule.points[q]) * a + rule.points[q] * b)) * rule.weights[q];
  }
  return acc;
}

/// CR projection v_h: dof on each internal face is the face mean of v.
template <int Dim, class F>
CRField<Dim> cr_interpolate(const MeshPtr& mesh, F&& f, const LineRule& rule) {
  CRField<Dim> out(mesh);
  for (Index d = 0; d < mesh->num_internal_faces(); ++d) {
    const Index face = mesh->internal_faces()[static_cast<std::size_t>(d)];
    out.set_dof(d, face_mean(*mesh, face, [&](const Vec2& x) { return detail::as_value<Dim>(f(x)); }, rule));
  }
  return out;
}

template <int Dim, class F>
CRField<Dim> cr_interpolate(const MeshPtr& mesh, F&& f) {
  return cr_interpolate<Dim>(mesh, std::forward<F>(f), gauss_legendre(3));
}

/// Barycentric coordinates in `cell` of the point (1-s) a + s b on `face`.
inline Eigen::Vector3d face_point_bary(const Mesh& mesh, Index cell, Index face, double s) {
  const Cell& c = mesh.cell(cell);
  const Face& f = mesh.face(face);
  Eigen::Vector3d bary = Eigen::Vector3d::Zero();
  for (int i = 0; i < 3; ++i) {
    if (c.vertices[static_cast<std::size_t>(i)] == f.vertices[0]) bary[i] = 1.0 - s;
    if (c.vertices[static_cast<std::size_t>(i)] == f.vertices[1]) bary[i] = s;
  }
  return bary;
}

/// sum_sigma (1/h) int_sigma |[u]|^2 dS, boundary jump = trace. Two-point Gauss per face.
template <int Dim>
double face_jump_mean_square(const CRField<Dim>& u) {
  const Mesh& mesh = *u.mesh();
  const LineRule rule = gauss_legendre(2);
  double s = 0.0;
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    const Face& fc = mesh.face(f);
    double face_sum = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      typename CRField<Dim>::Value jump = u.eval(fc.owner, face_point_bary(mesh, fc.owner, f, rule.points[q]));
      if (fc.internal()) jump -= u.eval(fc.neighbor, face_point_bary(mesh, fc.neighbor, f, rule.points[q]));
      face_sum += rule.weights[q] * jump.squaredNorm();
    }
    s += fc.measure * face_sum / mesh.h();
  }
  return s;
}

/// ||u||_{L^p} of a CR field by cell quadrature.
template <int Dim>
double lp_norm(const CRField<Dim>& u, double p, const TriangleRule& rule) {
  const Mesh& mesh = *u.mesh();
  double s = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    double cell = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) cell += rule.weights[q] * std::pow(u.eval(k, rule.points[q]).norm(), p);
    s += mesh.cell(k).measure * cell;
  }
  return std::pow(s, 1.0 / p);
}

/// ||f - u||_{L^p} for an analytic f.
template <int Dim, class F>
double lp_error(const CRField<Dim>& u, F&& f, double p, const TriangleRule& rule) {
  const Mesh& mesh = *u.mesh();
  double s = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    double cell = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec2 x = mesh.point(k, rule.points[q]);
      cell += rule.weights[q] * std::pow((detail::as_value<Dim>(f(x)) - u.eval(k, rule.points[q])).norm(), p);
    }
    s += mesh.cell(k).measure * cell;
  }
  return std::pow(s, 1.0 / p);
}

/// (sum_K ||grad f - grad u||_{L^p(K)}^p)^(1/p) for an analytic gradient (Dim x 2 matrix, or Vec2 for scalars).
template <int Dim, class G>
double broken_gradient_error(const CRField<Dim>& u, G&& grad_f, double p, const TriangleRule& rule) {
  const Mesh& mesh = *u.mesh();
  double s = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const typename CRField<Dim>::Gradient gk = u.gradient(k);
    double cell = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec2 x = mesh.point(k, rule.points[q]);
      typename CRField<Dim>::Gradient gf;
      if constexpr (Dim == 1) {
        gf = Eigen::Matrix<double, 1, 2>(Vec2(grad_f(x)).transpose());
      } else {
        gf = grad_f(x);
      }
      cell += rule.weights[q] * std::pow((gf - gk).norm(), p);
    }
    s += mesh.cell(k).measure * cell;
  }
  return std::pow(s, 1.0 / p);
}

/// |sum_K q_K int_K div v_h - int_Omega q div v| for a boundary-vanishing vector field v.
/// The reference side uses `divergence` with a high-order rule when given, else the
/// divergence theorem with a 10-point Gauss rule per face.
template <class F>
double divergence_compatibility_check(const MeshPtr& mesh, F&& v, const ScalarCellField& q,
                                      const std::function<double(const Vec2&)>& divergence = {}) {
  const LineRule fine_line = gauss_legendre(10);
  const CRVectorField vh = cr_interpolate<2>(mesh, v, fine_line);
  const TriangleRule fine_tri = collapsed_gauss_rule(20);
  double discrete = 0.0;
  double reference = 0.0;
  for (Index k = 0; k < mesh->num_cells(); ++k) {
    discrete += q[k] * mesh->cell(k).measure * vh.gradient(k).trace();
    double exact = 0.0;
    if (divergence) {
      exact = integrate_cell_scalar(*mesh, k, fine_tri, divergence);
    } else {
      for (Index f : mesh->cell(k).faces) {
        const Vec2 n = mesh->normal(f, k);
        exact += mesh->face(f).measure * face_mean(*mesh, f, [&](const Vec2& x) { return Vec2(v(x)).dot(n); }, fine_line);
      }
    }
    reference += q[k] * exact;
  }
  return std::abs(discrete - reference);
}

}  // namespace cns
