#include <gtest/gtest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "cns/diagnostics.hpp"
#include "cns/mesh.hpp"
#include "cns/quadrature.hpp"
#include "cns/spaces.hpp"

using namespace cns;

namespace {

constexpr double pi = std::numbers::pi;

MeshPtr two_triangle_square() {
  return build_mesh({Vec2(0, 0), Vec2(1, 0), Vec2(1, 1), Vec2(0, 1)}, {{0, 1, 2}, {0, 2, 3}});
}

bool interior_cell(const Mesh& m, Index k) {
  for (Index f : m.cell(k).faces) {
    if (!m.face(f).internal()) return false;
  }
  return true;
}

CRScalarField random_scalar(const MeshPtr& m, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::VectorXd d(m->num_internal_faces());
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = n01(rng);
  return CRScalarField(m, d);
}

CRVectorField random_vector(const MeshPtr& m, unsigned seed) {
  std::mt19937 rng(seed);
  std::normal_distribution<double> n01;
  Eigen::VectorXd d(2 * m->num_internal_faces());
  for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = n01(rng);
  return CRVectorField(m, d);
}

// Affine reconstruction a + b x + c y through the three face-midpoint values of cell k.
Eigen::Vector3d affine_through_midpoints(const Mesh& m, Index k, const CRScalarField& u) {
  Eigen::Matrix3d a;
  Eigen::Vector3d v;
  for (int i = 0; i < 3; ++i) {
    const Index f = m.cell(k).faces[static_cast<std::size_t>(i)];
    const Vec2 x = m.face(f).midpoint;
    a.row(i) << 1.0, x.x(), x.y();
    v[i] = u.face_value(f)[0];
  }
  return a.partialPivLu().solve(v);
}

}  // namespace

TEST(ScalarCellField, Basics) {
  const MeshPtr m = structured_triangulation(3, 3);
  ScalarCellField q(m, 2.0);
  EXPECT_NEAR(q.integral(), 2.0, 1e-14);
  q[4] = -1.0;
  EXPECT_EQ(q.min(), -1.0);
  EXPECT_EQ(q.max(), 2.0);
  EXPECT_TRUE(q.all_finite());
  EXPECT_THROW(ScalarCellField(m, std::vector<double>(3, 1.0)), Error);
}

TEST(CellAverage, ConstantAndAffine) {
  const MeshPtr m = two_triangle_square();
  const ScalarCellField c = cell_average(m, [](const Vec2&) { return 3.5; });
  for (Index k = 0; k < m->num_cells(); ++k) EXPECT_NEAR(c[k], 3.5, 1e-15);
  const ScalarCellField x = cell_average(m, [](const Vec2& p) { return p.x(); });
  EXPECT_NEAR(x[0], 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(x[1], 1.0 / 3.0, 1e-15);
  const ScalarCellField same = cell_average(x);
  EXPECT_EQ(same.values(), x.values());
}

TEST(CellAverage, RuleDegreeEnforced) {
  const MeshPtr m = two_triangle_square();
  EXPECT_THROW(cell_average(m, [](const Vec2& p) { return p.x() * p.x(); }, centroid_rule(), 2), QuadratureDegreeTooLow);
}

TEST(CRInterpolate, ZeroAndAffine) {
  const MeshPtr m = structured_triangulation(4, 3);
  EXPECT_EQ(cr_interpolate<2>(m, [](const Vec2&) { return Vec2(0, 0); }).dofs().norm(), 0.0);
  const CRVectorField v = cr_interpolate<2>(m, [](const Vec2& x) { return x; });
  for (Index f : m->internal_faces()) EXPECT_NEAR((v.face_value(f) - m->face(f).midpoint).norm(), 0.0, 1e-15);
}

TEST(CRInterpolate, SmoothL2OrderTwo) {
  MeshPtr m = structured_triangulation(4, 4);
  const TriangleRule fine = collapsed_gauss_rule(10);
  auto v = [](const Vec2& x) { return std::sin(pi * x.x()) * std::sin(pi * x.y()); };
  std::vector<double> hs, errs;
  for (int l = 0; l < 4; ++l) {
    hs.push_back(m->h());
    errs.push_back(lp_error(cr_interpolate<1>(m, v), v, 2.0, fine));
    m = refine_uniform(*m);
  }
  EXPECT_NEAR(convergence_order(hs, errs), 2.0, 0.1);
}

TEST(CRBasis, FaceMeanKroneckerProperty) {
  const MeshPtr m = structured_triangulation(18, 18);
  ASSERT_GE(m->num_faces(), 1000);
  const LineRule g2 = gauss_legendre(2);
  CRScalarField phi(m);
  double worst = 0.0;
  for (Index d = 0; d < m->num_internal_faces(); ++d) {
    phi.set_dof(d, Eigen::Matrix<double, 1, 1>(1.0));
    const Index sigma = m->internal_faces()[static_cast<std::size_t>(d)];
    for (Index k : {m->face(sigma).owner, m->face(sigma).neighbor}) {
      for (Index f : m->cell(k).faces) {
        double mean = 0.0;
        for (std::size_t q = 0; q < g2.points.size(); ++q) {
          mean += g2.weights[q] * phi.eval(k, face_point_bary(*m, k, f, g2.points[q]))[0];
        }
        worst = std::max(worst, std::abs(mean - (f == sigma ? 1.0 : 0.0)));
      }
    }
    phi.set_dof(d, Eigen::Matrix<double, 1, 1>(0.0));
  }
  EXPECT_LE(worst, 1e-12);
}

TEST(CRBasis, PartitionOfUnity) {
  const MeshPtr m = structured_triangulation(6, 6);
  const CRScalarField one(m, Eigen::VectorXd::Ones(m->num_internal_faces()));
  const TriangleRule rule = seven_point_rule();
  for (Index k = 0; k < m->num_cells(); ++k) {
    if (!interior_cell(*m, k)) continue;
    for (const auto& b : rule.points) EXPECT_NEAR(one.eval(k, b)[0], 1.0, 1e-13);
  }
}

TEST(CRBasis, BasisGradientMatchesBarycentric) {
  const MeshPtr m = build_mesh({Vec2(0, 0), Vec2(2, 0.3), Vec2(0.4, 1.1)}, {{0, 1, 2}});
  for (int i = 0; i < 3; ++i) {
    const Index f = m->cell(0).faces[static_cast<std::size_t>(i)];
    // phi = 1 - 2 lambda_i, face i opposite vertex i
    EXPECT_NEAR((CRScalarField::basis_gradient(*m, 0, f) + 2.0 * m->barycentric_gradient(0, i)).norm(), 0.0, 1e-14);
  }
}

TEST(BrokenGradient, AffineFieldOnInteriorCells) {
  const MeshPtr m = structured_triangulation(5, 5);
  Eigen::Matrix2d G;
  G << 1.5, -0.5, 2.0, 0.25;
  const CRVectorField u = cr_interpolate<2>(m, [&](const Vec2& x) { return Vec2(G * x + Vec2(0.3, -0.1)); });
  const BrokenGradient<2> g = broken_gradient(u);
  int checked = 0;
  for (Index k = 0; k < m->num_cells(); ++k) {
    if (!interior_cell(*m, k)) continue;
    EXPECT_NEAR((g.cells[static_cast<std::size_t>(k)] - G).norm(), 0.0, 1e-12);
    EXPECT_NEAR(g.divergence()[static_cast<std::size_t>(k)], G.trace(), 1e-12);
    ++checked;
  }
  EXPECT_GT(checked, 0);
  const BrokenGradient<2> z = broken_gradient(CRVectorField(m));
  for (const auto& c : z.cells) EXPECT_EQ(c.norm(), 0.0);
}

TEST(BrokenGradient, RandomDofsMatchAffineSolve) {
  const MeshPtr m = two_triangle_square();
  const CRScalarField u = random_scalar(m, 3);
  for (Index k = 0; k < m->num_cells(); ++k) {
    const Eigen::Vector3d abc = affine_through_midpoints(*m, k, u);
    EXPECT_NEAR(u.gradient(k)(0, 0), abc[1], 1e-13);
    EXPECT_NEAR(u.gradient(k)(0, 1), abc[2], 1e-13);
  }
}

TEST(BrokenNorm, ValueHomogeneityTriangle) {
  const MeshPtr m = structured_triangulation(4, 4);
  EXPECT_EQ(broken_norm(CRVectorField(m), 2.0), 0.0);
  const CRScalarField a = random_scalar(m, 1), b = random_scalar(m, 2);
  double ref = 0.0;
  for (Index k = 0; k < m->num_cells(); ++k) {
    const Eigen::Vector3d abc = affine_through_midpoints(*m, k, a);
    ref += m->cell(k).measure * (abc[1] * abc[1] + abc[2] * abc[2]);
  }
  EXPECT_NEAR(broken_norm(a, 2.0), std::sqrt(ref), 1e-12);
  for (double p : {1.0, 2.0, 3.5}) {
    EXPECT_NEAR(broken_norm(-2.5 * a, p), 2.5 * broken_norm(a, p), 1e-12);
    EXPECT_LE(broken_norm(a + b, p), broken_norm(a, p) + broken_norm(b, p) + 1e-12);
  }
  EXPECT_THROW(broken_norm(a, 0.5), Error);
}

TEST(FaceJump, ConformingHatHasNoJumps) {
  const MeshPtr m = structured_triangulation(4, 4);
  // P1 hat at the centre vertex (0.5, 0.5)
  Index centre = 0;
  for (Index v = 0; v < m->num_vertices(); ++v) {
    if ((m->vertex(v) - Vec2(0.5, 0.5)).norm() < 1e-12) centre = v;
  }
  CRScalarField hat(m);
  for (Index d = 0; d < m->num_internal_faces(); ++d) {
    const Face& f = m->face(m->internal_faces()[static_cast<std::size_t>(d)]);
    const double mid = 0.5 * ((f.vertices[0] == centre) + (f.vertices[1] == centre));
    hat.set_dof(d, Eigen::Matrix<double, 1, 1>(mid));
  }
  EXPECT_NEAR(face_jump_mean_square(hat), 0.0, 1e-28);
  EXPECT_GT(broken_norm(hat, 2.0), 0.0);
}

TEST(FaceJump, MeanJumpVanishesOnInternalFaces) {
  const MeshPtr m = structured_triangulation(5, 4);
  const CRVectorField u = random_vector(m, 11);
  double total_jump2 = 0.0;
  for (Index f : m->internal_faces()) {
    const Face& fc = m->face(f);
    const Vec2 a = u.eval(fc.owner, face_point_bary(*m, fc.owner, f, 0.5));
    const Vec2 b = u.eval(fc.neighbor, face_point_bary(*m, fc.neighbor, f, 0.5));
    EXPECT_NEAR((a - b).norm(), 0.0, 1e-13);
    const Vec2 a0 = u.eval(fc.owner, face_point_bary(*m, fc.owner, f, 0.0));
    const Vec2 b0 = u.eval(fc.neighbor, face_point_bary(*m, fc.neighbor, f, 0.0));
    total_jump2 += (a0 - b0).squaredNorm();
  }
  EXPECT_GT(total_jump2, 0.0);
}

TEST(FaceJump, SingleBasisFunctionClosedForm) {
  const MeshPtr m = two_triangle_square();
  const CRScalarField phi(m, Eigen::VectorXd::Ones(1));
  // phi = 1 on the diagonal; on each unit boundary edge it runs linearly from 1 to -1,
  // so int (1 - 2s)^2 ds = 1/3 on four edges
  EXPECT_NEAR(face_jump_mean_square(phi), 4.0 / 3.0 / std::sqrt(2.0), 1e-14);
}

TEST(DivergenceCompatibility, SmoothFieldAndConstantQ) {
  const MeshPtr m = structured_triangulation(6, 6);
  auto v = [](const Vec2& x) { return Vec2(std::sin(pi * x.x()) * std::sin(pi * x.y()), 0.0); };
  std::mt19937 rng(5);
  std::uniform_real_distribution<double> u(-1, 1);
  ScalarCellField q(m);
  for (Index k = 0; k < m->num_cells(); ++k) q[k] = u(rng);
  EXPECT_LE(divergence_compatibility_check(m, v, q), 1e-12);
  auto div = [](const Vec2& x) { return pi * std::cos(pi * x.x()) * std::sin(pi * x.y()); };
  EXPECT_LE(divergence_compatibility_check(m, v, q, div), 1e-10);
  EXPECT_LE(divergence_compatibility_check(m, v, ScalarCellField(m, 1.0)), 1e-13);
}

TEST(CellAverage, PoincareConstantStable) {
  MeshPtr m = structured_triangulation(4, 4);
  const TriangleRule fine = collapsed_gauss_rule(10);
  auto v = [](const Vec2& x) { return std::exp(x.x()) * std::cos(2.0 * x.y()); };
  auto grad = [](const Vec2& x) { return Vec2(std::exp(x.x()) * std::cos(2.0 * x.y()), -2.0 * std::exp(x.x()) * std::sin(2.0 * x.y())); };
  std::vector<double> ratios;
  for (int l = 0; l < 4; ++l) {
    const ScalarCellField avg = cell_average(m, v, fine, 10);
    double num = 0.0, den = 0.0;
    for (Index k = 0; k < m->num_cells(); ++k) {
      num += integrate_cell_scalar(*m, k, fine, [&](const Vec2& x) { return std::pow(v(x) - avg[k], 2); });
      den += integrate_cell_scalar(*m, k, fine, [&](const Vec2& x) { return grad(x).squaredNorm(); });
    }
    ratios.push_back(std::sqrt(num) / (m->h() * std::sqrt(den)));
    m = refine_uniform(*m);
  }
  for (double r : ratios) EXPECT_NEAR(r / ratios.front(), 1.0, 0.1);
}
