#include <gtest/gtest.h>

#include <cmath>

#include "cns/experiments.hpp"
#include "cns/inequality_lab.hpp"

using namespace cns;

namespace {

// Interior diagonal face closest to the centre of the unit square.
Index central_diagonal_face(const Mesh& m) {
  Index best = -1;
  double dist = 1e300;
  for (Index f : m.internal_faces()) {
    const Face& fc = m.face(f);
    if (std::abs(std::abs(fc.normal.x()) - std::abs(fc.normal.y())) > 1e-12) continue;
    const double d = (fc.midpoint - Vec2(0.5, 0.5)).norm();
    if (d < dist) {
      dist = d;
      best = f;
    }
  }
  return best;
}

CRScalarField basis_function(const MeshPtr& m, Index face) {
  CRScalarField v(m);
  v.set_dof(m->dof(face), CRScalarField::Value::Constant(1.0));
  return v;
}

}  // namespace

TEST(SingleBasisFunction, ClosedForms) {
  for (int nx : {4, 8, 16}) {
    const MeshPtr m = structured_triangulation(nx, nx);
    const double h0 = 1.0 / nx;
    const Index f = central_diagonal_face(*m);
    ASSERT_GE(f, 0);
    const CRScalarField phi = basis_function(m, f);
    // |grad phi|^2 = 4 |sigma|^2 / (4 |K|^2) on both cells, |sigma| = sqrt(2) h0, |K| = h0^2 / 2
    EXPECT_NEAR(std::pow(broken_norm(phi, 2.0), 2), 8.0, 1e-12) << "nx=" << nx;
    // int_K (1 - 2 lambda)^2 = |K| / 3
    EXPECT_NEAR(std::pow(lp_norm(phi, 2.0, seven_point_rule()), 2), h0 * h0 / 3.0, 1e-14);
    // cell mean 1/3, int_K (phi - 1/3)^2 = 2 |K| / 9, mesh size sqrt(2) h0
    EXPECT_NEAR(poincare_ratio(phi, 2.0), 1.0 / (6.0 * std::sqrt(2.0)), 1e-12);
  }
}

TEST(SingleBasisFunction, JumpRatioIsLevelIndependent) {
  std::vector<double> ratios;
  for (int nx : {4, 8, 16, 32}) {
    const MeshPtr m = structured_triangulation(nx, nx);
    const CRScalarField phi = basis_function(m, central_diagonal_face(*m));
    ratios.push_back(face_jump_mean_square(phi) / std::pow(broken_norm(phi, 2.0), 2));
  }
  for (double r : ratios) EXPECT_NEAR(r, ratios.front(), 1e-12);
}

TEST(NormEquivalence, InvariantUnderScaling) {
  const MeshPtr unit = structured_triangulation(6, 6);
  const MeshPtr big = structured_triangulation(6, 6, AxisBox{Vec2(0, 0), Vec2(2, 2)});
  RandomCRFields a(unit, 5), b(big, 5);
  for (int s = 0; s < 6; ++s) {
    const CRScalarField u = a.sample(s), v = b.sample(s);
    const double ru = discrete_face_norm(u, 2.0) / lp_norm(u, 2.0, seven_point_rule());
    const double rv = discrete_face_norm(v, 2.0) / lp_norm(v, 2.0, seven_point_rule());
    EXPECT_NEAR(ru, rv, 1e-12 * ru);
    const CRScalarField w = 3.5 * u;
    EXPECT_NEAR(discrete_face_norm(w, 2.0) / lp_norm(w, 2.0, seven_point_rule()), ru, 1e-12 * ru);
  }
}

TEST(Probes, Deterministic) {
  ProbeOptions opt;
  opt.levels = 2;
  opt.samples = 6;
  opt.base_nx = 4;
  const ProbeReport a = probe_jump_bound(opt), b = probe_jump_bound(opt);
  ASSERT_EQ(a.levels.size(), 2u);
  for (std::size_t l = 0; l < a.levels.size(); ++l) EXPECT_EQ(a.levels[l].max_ratio, b.levels[l].max_ratio);
  opt.seed += 1;
  EXPECT_NE(probe_jump_bound(opt).levels[0].max_ratio, a.levels[0].max_ratio);
}

TEST(Probes, DefaultSuiteWithinBand) {
  const ProbeSuite suite = verify_inequalities(ProbeOptions{});
  EXPECT_FALSE(suite.flagged);
  EXPECT_EQ(suite.reports.size(), 5u);
  for (const Gate& g : suite.gates) EXPECT_TRUE(g.passed) << g.name << " = " << g.value;
  for (const ProbeReport& r : suite.reports) {
    if (r.id == "projection") {
      EXPECT_NEAR(r.value_order, 2.0, 0.2);
      EXPECT_NEAR(r.gradient_order, 1.0, 0.2);
    }
  }
}

TEST(Probes, NeedleMeshIsFlagged) {
  ProbeOptions opt;
  opt.base = needle_mesh(4, 0.01);
  opt.levels = 3;
  opt.samples = 10;
  const ProbeSuite suite = verify_inequalities(opt);
  EXPECT_TRUE(suite.flagged);
  EXPECT_TRUE(suite.gates.empty());
  for (const ProbeReport& r : suite.reports) EXPECT_TRUE(r.flagged) << r.id;
}

TEST(Probes, RejectsTooFewLevelsOrSamples) {
  ProbeOptions opt;
  opt.levels = 2;
  EXPECT_THROW(verify_inequalities(opt), ConfigError);
  opt.levels = 0;
  EXPECT_THROW(refinement_sequence(opt), ConfigError);
  opt.levels = 2;
  opt.samples = 0;
  EXPECT_THROW(probe_sobolev_Vh(opt), ConfigError);
}
