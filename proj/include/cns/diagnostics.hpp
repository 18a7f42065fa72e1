#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cns/errors.hpp"
#include "cns/mesh.hpp"
#include "cns/scheme.hpp"
#include "cns/spaces.hpp"
#include "cns/thermo.hpp"

namespace cns {

using TimeScalarFn = std::function<double(double, const Vec2&)>;
using TimeVectorFn = std::function<Vec2(double, const Vec2&)>;

// ---------------------------------------------------------------------------
// Energy balance

/// Energy balance of one time level. Dissipation and source entries of step n
/// are already multiplied by dt; `viscous` is the rate mu|grad u|^2 + (mu+lambda)|div u|^2.
struct EnergyStep {
  int n = 0;
  double time = 0.0;
  double kinetic = 0.0;
  double internal = 0.0;
  double viscous = 0.0;
  double d_time_u = 0.0;
  double d_time_rho = 0.0;
  double d_space_u = 0.0;
  double d_space_rho = 0.0;
  double source_work = 0.0;
  /// (E^n - E^{n-1}) + dt viscous + sum D - source_work; zero for exact discrete solutions.
  double identity_residual = 0.0;
  double cumulative_residual = 0.0;

  [[nodiscard]] double total() const { return kinetic + internal; }
  [[nodiscard]] double dissipation() const { return d_time_u + d_time_rho + d_space_u + d_space_rho; }
};

struct EnergyLedger {
  double M0 = 0.0;
  double E0 = 0.0;
  std::vector<EnergyStep> steps;  ///< steps[n] for n = 0..N

  [[nodiscard]] double max_abs_residual() const {
    double m = 0.0;
    for (const EnergyStep& s : steps) m = std::max({m, std::abs(s.identity_residual), std::abs(s.cumulative_residual)});
    return m;
  }
  [[nodiscard]] double min_dissipation_term() const {
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < steps.size(); ++i) {
      const EnergyStep& s = steps[i];
      m = std::min({m, s.d_time_u, s.d_time_rho, s.d_space_u, s.d_space_rho});
    }
    return steps.size() > 1 ? m : 0.0;
  }
};

/// sum_K |K| (mu |grad u|^2 + (mu + lambda) |div u|^2)
inline double viscous_rate(const CRVectorField& u, const ViscosityParams& visc) {
  const Mesh& mesh = *u.mesh();
  double s = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const Mat2 g = u.gradient(k);
    s += mesh.cell(k).measure * (visc.mu * g.squaredNorm() + (visc.mu + visc.lambda) * g.trace() * g.trace());
  }
  return s;
}

/// sum_K |K| (mu grad a : grad b + (mu + lambda) div a div b)
inline double viscous_form(const CRVectorField& a, const CRVectorField& b, const ViscosityParams& visc) {
  const Mesh& mesh = *a.mesh();
  double s = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const Mat2 ga = a.gradient(k), gb = b.gradient(k);
    s += mesh.cell(k).measure * (visc.mu * ga.cwiseProduct(gb).sum() + (visc.mu + visc.lambda) * ga.trace() * gb.trace());
  }
  return s;
}

inline double kinetic_energy(const State& s) {
  const Mesh& mesh = *s.rho.mesh();
  double e = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) e += 0.5 * mesh.cell(k).measure * s.rho[k] * s.u.cell_mean(k).squaredNorm();
  return e;
}

inline double internal_energy(const ScalarCellField& rho, const PressureLaw& law) {
  const Mesh& mesh = *rho.mesh();
  double e = 0.0;
  for (Index k = 0; k < mesh.num_cells(); ++k) e += mesh.cell(k).measure * law.H(rho[k]);
  return e;
}

/// Closed-form energy balance between consecutive levels, with every Taylor
/// remainder evaluated as an exact Bregman gap of H.
inline EnergyStep energy_step(const State& prev, const State& cur, double dt, const Physics& physics,
                              const SourceTerms& sources = {}) {
  const Mesh& mesh = *cur.rho.mesh();
  const PressureLaw& law = physics.pressure;
  EnergyStep e;
  e.n = cur.time_index;
  e.time = cur.time_index * dt;
  e.kinetic = kinetic_energy(cur);
  e.internal = internal_energy(cur.rho, law);
  e.viscous = viscous_rate(cur.u, physics.viscosity);
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const double area = mesh.cell(k).measure;
    e.d_time_u += 0.5 * area * prev.rho[k] * (cur.u.cell_mean(k) - prev.u.cell_mean(k)).squaredNorm();
    e.d_time_rho += area * law.bregman(prev.rho[k], cur.rho[k]);
  }
  for (Index f : mesh.internal_faces()) {
    const Face& fc = mesh.face(f);
    const double flux = cur.u.face_value(f).dot(fc.normal);
    if (flux == 0.0) continue;
    const Index up = flux > 0.0 ? fc.owner : fc.neighbor;
    const Index down = flux > 0.0 ? fc.neighbor : fc.owner;
    const double w = dt * fc.measure * std::abs(flux);
    e.d_space_u += 0.5 * w * cur.rho[up] * (cur.u.cell_mean(fc.owner) - cur.u.cell_mean(fc.neighbor)).squaredNorm();
    e.d_space_rho += w * law.bregman(cur.rho[up], cur.rho[down]);
  }
  if (!sources.empty()) {
    const double t = cur.time_index * dt;
    const Eigen::VectorXd load = discretize_momentum_source(mesh, sources, t);
    const ScalarCellField mass = discretize_mass_source(cur.rho.mesh(), sources, t);
    double work = load.dot(cur.u.dofs());
    for (Index k = 0; k < mesh.num_cells(); ++k) {
      work += mesh.cell(k).measure * mass[k] * (law.dH(cur.rho[k]) - 0.5 * cur.u.cell_mean(k).squaredNorm());
    }
    e.source_work = dt * work;
  }
  return e;
}

inline EnergyLedger energy_ledger(const Trajectory& traj, const Physics& physics, const SourceTerms& sources = {}) {
  EnergyLedger ledger;
  if (traj.states.empty()) return ledger;
  const State& s0 = traj.states.front();
  ledger.M0 = s0.rho.integral();
  EnergyStep first;
  first.n = s0.time_index;
  first.time = s0.time_index * traj.dt;
  first.kinetic = kinetic_energy(s0);
  first.internal = internal_energy(s0.rho, physics.pressure);
  first.viscous = viscous_rate(s0.u, physics.viscosity);
  ledger.E0 = first.total();
  ledger.steps.push_back(first);
  double cumulative = 0.0;
  for (std::size_t n = 1; n < traj.states.size(); ++n) {
    EnergyStep e = energy_step(traj.states[n - 1], traj.states[n], traj.dt, physics, sources);
    e.identity_residual = e.total() - ledger.steps.back().total() + traj.dt * e.viscous + e.dissipation() - e.source_work;
    cumulative += e.identity_residual;
    e.cumulative_residual = cumulative;
    ledger.steps.push_back(e);
  }
  return ledger;
}

// ---------------------------------------------------------------------------
// Mass

struct MassHistory {
  std::vector<double> mass;
  double max_relative_deviation = 0.0;
};

inline MassHistory mass_history(const Trajectory& traj) {
  MassHistory h;
  for (const State& s : traj.states) h.mass.push_back(s.rho.integral());
  if (h.mass.empty()) return h;
  for (double m : h.mass) h.max_relative_deviation = std::max(h.max_relative_deviation, std::abs(m - h.mass[0]) / std::abs(h.mass[0]));
  return h;
}

// ---------------------------------------------------------------------------
// Relative energy inequality

/// Discrete reference pair (r^n_K, U^n_h) sampled at t_n.
struct ReferenceLevel {
  ScalarCellField r;
  CRVectorField U;
};

inline ReferenceLevel sample_reference(const MeshPtr& mesh, const TimeScalarFn& r, const TimeVectorFn& U, double t) {
  ReferenceLevel level{cell_average(mesh, [&](const Vec2& x) { return r(t, x); }, seven_point_rule()),
                       cr_interpolate<2>(mesh, [&](const Vec2& x) { return U(t, x); })};
  for (Index k = 0; k < mesh->num_cells(); ++k) {
    if (!(level.r[k] > 0.0)) {
      throw NonPositiveReferenceField("reference density mean is not positive on cell " + std::to_string(k) +
                                      " at t = " + std::to_string(t));
    }
  }
  return level;
}

/// Terms of the inequality for one step n, each multiplied by dt.
struct RelEnergyTerms {
  double viscous_cross = 0.0;    ///< T1
  double time_derivative = 0.0;  ///< T2
  double convection = 0.0;       ///< T3
  double pressure = 0.0;         ///< T4
  double reference_time = 0.0;   ///< T5
  double upwind_potential = 0.0; ///< T6
  double source = 0.0;           ///< forcing work, zero without sources

  [[nodiscard]] double sum() const {
    return viscous_cross + time_derivative + convection + pressure + reference_time + upwind_potential + source;
  }
};

struct RelEnergyStep {
  int m = 0;
  double relative_energy = 0.0;  ///< discrete relative energy at level m
  double lhs = 0.0;
  double rhs = 0.0;
  double slack = 0.0;
  RelEnergyTerms terms;  ///< contribution of step m alone
};

struct RelEnergyReport {
  double E0 = 0.0;
  std::vector<RelEnergyStep> steps;  ///< m = 1..N

  [[nodiscard]] double min_slack() const {
    double s = std::numeric_limits<double>::infinity();
    for (const RelEnergyStep& st : steps) s = std::min(s, st.slack);
    return steps.empty() ? 0.0 : s;
  }
};

inline RelEnergyTerms relative_energy_terms(const State& prev, const State& cur, const ReferenceLevel& ref_prev,
                                            const ReferenceLevel& ref, double dt, const Physics& physics,
                                            const SourceTerms& sources = {}) {
  const Mesh& mesh = *cur.rho.mesh();
  const PressureLaw& law = physics.pressure;
  RelEnergyTerms t;
  t.viscous_cross = dt * viscous_form(ref.U, ref.U - cur.u, physics.viscosity);
  std::vector<Vec2> Uk(static_cast<std::size_t>(mesh.num_cells()));
  std::vector<Vec2> uk(static_cast<std::size_t>(mesh.num_cells()));
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    Uk[static_cast<std::size_t>(k)] = ref.U.cell_mean(k);
    uk[static_cast<std::size_t>(k)] = cur.u.cell_mean(k);
  }
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const double area = mesh.cell(k).measure;
    const Vec2 U_now = Uk[static_cast<std::size_t>(k)];
    const Vec2 U_old = ref_prev.U.cell_mean(k);
    t.time_derivative += area * prev.rho[k] * (U_now - U_old).dot(0.5 * (U_old + U_now) - prev.u.cell_mean(k));
    double div_flux = 0.0;
    for (Index f : mesh.cell(k).faces) div_flux += mesh.face(f).measure * ref.U.face_value(f).dot(mesh.normal(f, k));
    t.pressure -= dt * law.pressure(cur.rho[k]) * div_flux;
    t.reference_time += area * (ref.r[k] - cur.rho[k]) * (law.dH(ref.r[k]) - law.dH(ref_prev.r[k]));
  }
  for (Index f : mesh.internal_faces()) {
    const Face& fc = mesh.face(f);
    const double flux = cur.u.face_value(f).dot(fc.normal);  // from owner
    if (flux == 0.0) continue;
    const Index up = flux > 0.0 ? fc.owner : fc.neighbor;
    const double rho_up = cur.rho[up];
    const Vec2& u_up = uk[static_cast<std::size_t>(up)];
    const Index K = fc.owner, L = fc.neighbor;
    const Vec2& UK = Uk[static_cast<std::size_t>(K)];
    const Vec2& UL = Uk[static_cast<std::size_t>(L)];
    const Vec2 mid = 0.5 * (UK + UL);
    const double w = dt * fc.measure * rho_up;
    // seen from K with flux, from L with -flux
    t.convection -= w * flux * ((mid - u_up).dot(UK) - (mid - u_up).dot(UL));
    t.upwind_potential += w * flux * (law.dH(ref_prev.r[K]) - law.dH(ref_prev.r[L]));
  }
  if (!sources.empty()) {
    const double time = cur.time_index * dt;
    const Eigen::VectorXd load = discretize_momentum_source(mesh, sources, time);
    const ScalarCellField mass = discretize_mass_source(cur.rho.mesh(), sources, time);
    double work = load.dot(cur.u.dofs() - ref.U.dofs());
    for (Index k = 0; k < mesh.num_cells(); ++k) {
      const std::size_t ks = static_cast<std::size_t>(k);
      work += mesh.cell(k).measure * mass[k] *
              (law.dH(cur.rho[k]) - 0.5 * uk[ks].squaredNorm() + 0.5 * Uk[ks].squaredNorm() - law.dH(ref_prev.r[k]));
    }
    t.source = dt * work;
  }
  return t;
}

/// Evaluates both sides of the discrete relative energy inequality for every m.
inline RelEnergyReport relative_energy_inequality_check(const Trajectory& traj, const Physics& physics,
                                                        const TimeScalarFn& r, const TimeVectorFn& U,
                                                        const SourceTerms& sources = {}) {
  RelEnergyReport report;
  if (traj.states.empty()) return report;
  const MeshPtr& mesh = traj.mesh;
  const PressureLaw& law = physics.pressure;
  const State& s0 = traj.states.front();
  report.E0 = kinetic_energy(s0) + internal_energy(s0.rho, law);
  ReferenceLevel ref_prev = sample_reference(mesh, r, U, s0.time_index * traj.dt);
  const double rel0 = relative_energy(law, s0.rho, s0.u, ref_prev.r, ref_prev.U);
  double visc_acc = 0.0, rhs_acc = 0.0;
  for (std::size_t n = 1; n < traj.states.size(); ++n) {
    const State& prev = traj.states[n - 1];
    const State& cur = traj.states[n];
    ReferenceLevel ref = sample_reference(mesh, r, U, cur.time_index * traj.dt);
    RelEnergyStep st;
    st.m = cur.time_index;
    st.terms = relative_energy_terms(prev, cur, ref_prev, ref, traj.dt, physics, sources);
    st.relative_energy = relative_energy(law, cur.rho, cur.u, ref.r, ref.U);
    visc_acc += traj.dt * viscous_rate(cur.u - ref.U, physics.viscosity);
    rhs_acc += st.terms.sum();
    st.lhs = st.relative_energy - rel0 + visc_acc;
    st.rhs = rhs_acc;
    st.slack = st.rhs - st.lhs;
    report.steps.push_back(st);
    ref_prev = std::move(ref);
  }
  return report;
}

// ---------------------------------------------------------------------------
// Error against a strong solution

struct ErrorHistory {
  std::vector<double> relative_energy;     ///< per level n = 0..N
  std::vector<double> gradient_error_acc;  ///< dt sum_{k<=n} |u^k - U^k_h|^2_{V_h^2}

  [[nodiscard]] double max_relative_energy() const {
    return relative_energy.empty() ? 0.0 : *std::max_element(relative_energy.begin(), relative_energy.end());
  }
  [[nodiscard]] double total_gradient_error() const {
    return gradient_error_acc.empty() ? 0.0 : gradient_error_acc.back();
  }
};

inline ErrorHistory error_vs_strong(const Trajectory& traj, const PressureLaw& law, const TimeScalarFn& r,
                                    const TimeVectorFn& U) {
  ErrorHistory out;
  double acc = 0.0;
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    const State& s = traj.states[n];
    const ReferenceLevel ref = sample_reference(traj.mesh, r, U, s.time_index * traj.dt);
    out.relative_energy.push_back(relative_energy(law, s.rho, s.u, ref.r, ref.U));
    if (n > 0) {
      const double g = broken_norm(s.u - ref.U, 2.0);
      acc += traj.dt * g * g;
    }
    out.gradient_error_acc.push_back(acc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Density dissipation and uniform bounds

struct DensityDissipation {
  bool split = false;   ///< true for gamma < 2
  double total = 0.0;   ///< gamma >= 2 sum, or the sum of both parts
  double high = 0.0;    ///< gamma < 2: faces with max(rho_K, rho_L) >= 1
  double low = 0.0;     ///< gamma < 2: remaining faces
  std::string note;
};

inline DensityDissipation density_dissipation_monitor(const Trajectory& traj, const PressureLaw& law) {
  DensityDissipation d;
  const double gamma = law.gamma();
  d.split = gamma < 2.0;
  if (d.split) {
    d.note = "faces classified by max(rho_K, rho_L) >= 1 as a surrogate for the intermediate density";
  }
  const Mesh& mesh = *traj.mesh;
  for (std::size_t n = 1; n < traj.states.size(); ++n) {
    const State& s = traj.states[n];
    for (Index f : mesh.internal_faces()) {
      const Face& fc = mesh.face(f);
      const double flux = std::abs(s.u.face_value(f).dot(fc.normal));
      const double a = s.rho[fc.owner], b = s.rho[fc.neighbor];
      const double jump2 = (a - b) * (a - b);
      const double mx = std::max(a, b);
      const double w = traj.dt * fc.measure * flux;
      if (!d.split) {
        d.total += w * jump2 / mx;
      } else if (mx >= 1.0) {
        d.high += w * jump2 / std::pow(mx, 2.0 - gamma);
      } else {
        d.low += w * jump2;
      }
    }
  }
  if (d.split) d.total = d.high + d.low;
  return d;
}

/// Quantities bounded independently of h and dt by the energy estimate.
struct UniformBounds {
  double velocity_l2_v2 = 0.0;   ///< (dt sum_n |u^n|^2_{V_h^2})^{1/2}
  double density_linf_lgamma = 0.0;  ///< max_n ||rho^n||_{L^gamma}
  double kinetic_linf_l1 = 0.0;  ///< max_n sum_K |K| rho_K |u_K|^2
};

inline UniformBounds uniform_bounds(const Trajectory& traj, const PressureLaw& law) {
  UniformBounds b;
  const double gamma = law.gamma();
  double acc = 0.0;
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    const State& s = traj.states[n];
    if (n > 0) {
      const double g = broken_norm(s.u, 2.0);
      acc += traj.dt * g * g;
    }
    b.density_linf_lgamma = std::max(b.density_linf_lgamma, s.rho.lp_norm(gamma));
    b.kinetic_linf_l1 = std::max(b.kinetic_linf_l1, 2.0 * kinetic_energy(s));
  }
  b.velocity_l2_v2 = std::sqrt(acc);
  return b;
}

// ---------------------------------------------------------------------------
// Fits

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw Error("loglog_slope needs at least two matching points");
  const double n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Order of convergence in h: slope of log(error) against log(h).
inline double convergence_order(const std::vector<double>& h, const std::vector<double>& error) {
  return loglog_slope(h, error);
}

/// Growth trend under refinement: slope of log(q) against log(1/h).
inline double growth_slope(const std::vector<double>& h, const std::vector<double>& q) {
  return -loglog_slope(h, q);
}

}  // namespace cns
