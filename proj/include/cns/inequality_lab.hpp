#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "cns/diagnostics.hpp"
#include "cns/errors.hpp"
#include "cns/mesh.hpp"
#include "cns/quadrature.hpp"
#include "cns/spaces.hpp"

namespace cns {

struct ProbeOptions {
  int levels = 4;
  int samples = 50;
  std::uint64_t seed = 20240611;
  int base_nx = 8;
  double sobolev_q = 4.0;
  double p = 2.0;
  MeshPtr base;  ///< overrides the structured base mesh when set
  /// Slopes must lie in [-band, band]; meshes with theta below theta_min are flagged instead.
  double band = 0.15;
  double theta_min = 0.1;
};

struct ProbeLevel {
  int level = 0;
  double h = 0.0;
  double theta = 0.0;
  double max_ratio = 0.0;
  double min_ratio = std::numeric_limits<double>::infinity();
};

struct ProbeReport {
  std::string id;
  std::vector<ProbeLevel> levels;
  double slope = 0.0;       ///< log(max_ratio) against log(h)
  double min_slope = 0.0;   ///< log(min_ratio) against log(h), two-sided probes only
  bool two_sided = false;
  int samples = 0;
  bool flagged = false;     ///< mesh sequence below theta_min; slopes not gated
  // projection probe only
  double value_order = 0.0;
  double gradient_order = 0.0;

  [[nodiscard]] bool within_band(double band) const {
    if (std::abs(slope) > band) return false;
    return !two_sided || std::abs(min_slope) <= band;
  }
};

/// Base mesh and its uniform refinements.
inline std::vector<MeshPtr> refinement_sequence(const ProbeOptions& opt) {
  if (opt.levels < 1) throw ConfigError("probe needs at least one level");
  std::vector<MeshPtr> meshes{opt.base ? opt.base : structured_triangulation(opt.base_nx, opt.base_nx)};
  for (int l = 1; l < opt.levels; ++l) meshes.push_back(refine_uniform(*meshes.back()));
  return meshes;
}

/// Degenerate sequence: right triangles with leg ratio `aspect` give theta close to `aspect`.
inline MeshPtr needle_mesh(int nx, double aspect) {
  return structured_triangulation(nx, nx, AxisBox{Vec2(0.0, 0.0), Vec2(1.0, aspect)});
}

/// Random scalar CR fields. Even samples have independent N(0,1) DOFs; odd samples
/// interpolate a random combination of low sine modes on the mesh bounding box, which
/// realize the smooth end of the spectrum where Sobolev-type ratios peak.
class RandomCRFields {
 public:
  RandomCRFields(MeshPtr mesh, std::uint64_t seed) : mesh_(std::move(mesh)), rng_(seed) {
    lower_ = upper_ = mesh_->vertex(0);
    for (const Vec2& v : mesh_->vertices()) {
      lower_ = lower_.cwiseMin(v);
      upper_ = upper_.cwiseMax(v);
    }
  }

  CRScalarField white_noise() {
    std::normal_distribution<double> n01;
    Eigen::VectorXd d(mesh_->num_internal_faces());
    for (Eigen::Index i = 0; i < d.size(); ++i) d[i] = n01(rng_);
    return CRScalarField(mesh_, d);
  }

  CRScalarField smooth(int modes = 3) {
    std::normal_distribution<double> n01;
    std::vector<double> a(static_cast<std::size_t>(modes * modes));
    for (double& c : a) c = n01(rng_);
    const Vec2 lo = lower_, ext = upper_ - lower_;
    return cr_interpolate<1>(mesh_, [&, modes](const Vec2& x) {
      const Vec2 s = (x - lo).cwiseQuotient(ext);
      double v = 0.0;
      for (int j = 1; j <= modes; ++j) {
        for (int k = 1; k <= modes; ++k) {
          v += a[static_cast<std::size_t>((j - 1) * modes + k - 1)] / (j * j + k * k) *
               std::sin(j * std::numbers::pi * s.x()) * std::sin(k * std::numbers::pi * s.y());
        }
      }
      return v;
    });
  }

  CRScalarField sample(int i) { return i % 2 == 0 ? white_noise() : smooth(); }

 private:
  MeshPtr mesh_;
  std::mt19937_64 rng_;
  Vec2 lower_, upper_;
};

namespace detail {

/// Runs `ratio(field)` over random fields on every level and fits the trends.
template <class Ratio>
ProbeReport run_sampled_probe(const std::string& id, const ProbeOptions& opt, bool two_sided, Ratio&& ratio) {
  if (opt.samples < 1) throw ConfigError("probe needs at least one sample");
  ProbeReport rep;
  rep.id = id;
  rep.samples = opt.samples;
  rep.two_sided = two_sided;
  const auto meshes = refinement_sequence(opt);
  std::vector<double> hs, maxes, mins;
  for (std::size_t l = 0; l < meshes.size(); ++l) {
    const MeshQuality q = quality(*meshes[l]);
    ProbeLevel lev{static_cast<int>(l), q.h, q.theta};
    RandomCRFields gen(meshes[l], opt.seed + 7919 * l);
    for (int s = 0; s < opt.samples; ++s) {
      const double r = ratio(gen.sample(s));
      if (!std::isfinite(r)) continue;
      lev.max_ratio = std::max(lev.max_ratio, r);
      lev.min_ratio = std::min(lev.min_ratio, r);
    }
    rep.flagged = rep.flagged || q.theta < opt.theta_min;
    rep.levels.push_back(lev);
    hs.push_back(lev.h);
    maxes.push_back(lev.max_ratio);
    mins.push_back(lev.min_ratio);
  }
  if (hs.size() >= 2) {
    rep.slope = loglog_slope(hs, maxes);
    if (two_sided) rep.min_slope = loglog_slope(hs, mins);
  }
  return rep;
}

inline double broken_seminorm(const CRScalarField& v) { return broken_norm(v, 2.0); }

}  // namespace detail

/// ||v||_{L^q} / |v|_{V_h^2}
inline ProbeReport probe_sobolev_Vh(const ProbeOptions& opt = {}) {
  const TriangleRule rule = triangle_rule(static_cast<int>(std::ceil(opt.sobolev_q)));
  return detail::run_sampled_probe("sobolev", opt, false, [&](const CRScalarField& v) {
    return lp_norm(v, opt.sobolev_q, rule) / detail::broken_seminorm(v);
  });
}

/// sum_sigma (1/h) int_sigma [v]^2 / |v|^2_{V_h^2}
inline ProbeReport probe_jump_bound(const ProbeOptions& opt = {}) {
  return detail::run_sampled_probe("jump", opt, false, [](const CRScalarField& v) {
    const double s = detail::broken_seminorm(v);
    return face_jump_mean_square(v) / (s * s);
  });
}

/// (sum_sigma |sigma| h |v_sigma|^p)^{1/p} / ||v||_{L^p}, both bounds tracked.
inline double discrete_face_norm(const CRScalarField& v, double p) {
  const Mesh& mesh = *v.mesh();
  double s = 0.0;
  for (Index f = 0; f < mesh.num_faces(); ++f) {
    s += mesh.face(f).measure * mesh.h() * std::pow(std::abs(v.face_value(f)[0]), p);
  }
  return std::pow(s, 1.0 / p);
}

inline ProbeReport probe_norm_equivalence(const ProbeOptions& opt = {}) {
  const TriangleRule rule = triangle_rule(std::max(2, static_cast<int>(std::ceil(opt.p))));
  return detail::run_sampled_probe("norm_equivalence", opt, true, [&](const CRScalarField& v) {
    return discrete_face_norm(v, opt.p) / lp_norm(v, opt.p, rule);
  });
}

/// ||v - v_hat||_{L^p} / (h ||grad v||_{L^p}) with cell means v_hat and the broken gradient.
inline double poincare_ratio(const CRScalarField& v, double p) {
  const Mesh& mesh = *v.mesh();
  const TriangleRule rule = triangle_rule(std::max(2, static_cast<int>(std::ceil(p))));
  double num = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const double mean = v.cell_mean(k)[0];
    double cell = 0.0;
    for (std::size_t q = 0; q < rule.points.size(); ++q) cell += rule.weights[q] * std::pow(std::abs(v.eval(k, rule.points[q])[0] - mean), p);
    num += mesh.cell(k).measure * cell;
  }
  return std::pow(num, 1.0 / p) / (mesh.h() * broken_norm(v, p));
}

inline ProbeReport probe_poincare(const ProbeOptions& opt = {}) {
  return detail::run_sampled_probe("poincare", opt, false,
                                   [&](const CRScalarField& v) { return poincare_ratio(v, opt.p); });
}

/// Interpolation errors of v = sin(pi x) sin(pi y) (scaled to the mesh bounding box):
/// value and gradient orders, and the stability ratio |v_h|_{V_h^p} / ||grad v||_{L^p}
/// as the per-level ratio.
inline ProbeReport probe_projection_orders(const ProbeOptions& opt = {}) {
  ProbeReport rep;
  rep.id = "projection";
  rep.samples = 1;
  const auto meshes = refinement_sequence(opt);
  const TriangleRule fine = collapsed_gauss_rule(10);
  std::vector<double> hs, value_err, grad_err, stab;
  for (std::size_t l = 0; l < meshes.size(); ++l) {
    const MeshPtr& mesh = meshes[l];
    Vec2 lo = mesh->vertex(0), hi = lo;
    for (const Vec2& x : mesh->vertices()) {
      lo = lo.cwiseMin(x);
      hi = hi.cwiseMax(x);
    }
    const Vec2 ext = hi - lo;
    constexpr double pi = std::numbers::pi;
    auto v = [&](const Vec2& x) {
      const Vec2 s = (x - lo).cwiseQuotient(ext);
      return std::sin(pi * s.x()) * std::sin(pi * s.y());
    };
    auto grad = [&](const Vec2& x) {
      const Vec2 s = (x - lo).cwiseQuotient(ext);
      return Vec2(pi / ext.x() * std::cos(pi * s.x()) * std::sin(pi * s.y()),
                  pi / ext.y() * std::sin(pi * s.x()) * std::cos(pi * s.y()));
    };
    const CRScalarField vh = cr_interpolate<1>(mesh, v);
    const MeshQuality q = quality(*mesh);
    double grad_norm = 0.0;
    for (Index k = 0; k < mesh->num_cells(); ++k) {
      grad_norm += integrate_cell_scalar(*mesh, k, fine, [&](const Vec2& x) { return std::pow(grad(x).norm(), opt.p); });
    }
    grad_norm = std::pow(grad_norm, 1.0 / opt.p);
    const double ratio = broken_norm(vh, opt.p) / grad_norm;
    rep.levels.push_back({static_cast<int>(l), q.h, q.theta, ratio, ratio});
    rep.flagged = rep.flagged || q.theta < opt.theta_min;
    hs.push_back(q.h);
    value_err.push_back(lp_error(vh, v, opt.p, fine));
    grad_err.push_back(broken_gradient_error(vh, grad, opt.p, fine));
    stab.push_back(ratio);
  }
  if (hs.size() >= 2) {
    rep.slope = loglog_slope(hs, stab);
    rep.value_order = convergence_order(hs, value_err);
    rep.gradient_order = convergence_order(hs, grad_err);
  }
  return rep;
}

inline std::vector<ProbeReport> run_all_probes(const ProbeOptions& opt = {}) {
  return {probe_sobolev_Vh(opt), probe_jump_bound(opt), probe_norm_equivalence(opt), probe_projection_orders(opt),
          probe_poincare(opt)};
}

}  // namespace cns
