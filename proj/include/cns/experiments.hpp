#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "cns/config.hpp"
#include "cns/diagnostics.hpp"
#include "cns/inequality_lab.hpp"
#include "cns/manufactured.hpp"
#include "cns/scheme.hpp"

namespace cns {

/// Spatial order A of the error estimate in two dimensions.
inline double predicted_order(double gamma) {
  if (gamma > 2.0) return 1.0;
  if (gamma <= 1.0) return 0.0;
  return (2.0 * gamma - 2.0) / gamma;
}

struct Gate {
  std::string name;
  bool passed = true;
  double value = 0.0;
  double threshold = 0.0;
};

inline bool all_passed(const std::vector<Gate>& gates) {
  return std::all_of(gates.begin(), gates.end(), [](const Gate& g) { return g.passed; });
}

/// Initial state, forcing and comparison pair selected by a config.
struct Problem {
  MeshPtr mesh;
  State initial;
  SourceTerms sources;
  std::optional<ManufacturedFlow> flow;
  TimeScalarFn reference_density;
  TimeVectorFn reference_velocity;
};

inline Problem make_problem(const ExperimentConfig& cfg, MeshPtr mesh) {
  Problem p;
  p.mesh = std::move(mesh);
  if (cfg.manufactured) {
    p.flow.emplace(cfg.physics, cfg.manufactured_params);
    p.initial = p.flow->initial_state(p.mesh);
    p.sources = p.flow->sources();
    const ManufacturedFlow flow = *p.flow;
    p.reference_density = [flow](double t, const Vec2& x) { return flow.density(t, x); };
    p.reference_velocity = [flow](double t, const Vec2& x) { return flow.velocity(t, x); };
    return p;
  }
  const InitialDataSpec& init = cfg.initial;
  if (init.type == "gaussian_bump") {
    const double a = init.velocity_amplitude;
    const Vec2 lo = cfg.mesh.box.lower, ext = cfg.mesh.box.upper - cfg.mesh.box.lower;
    p.initial = project_initial_data(
        p.mesh, [&](const Vec2& x) { return gaussian_bump(x, init.center, init.amplitude, init.width); },
        [&](const Vec2& x) {
          const Vec2 s = (x - lo).cwiseQuotient(ext);
          return Vec2(a * std::sin(std::numbers::pi * s.x()) * std::sin(std::numbers::pi * s.y()), 0.0);
        });
  } else {
    const double rho0 = init.density;
    p.initial = project_initial_data(p.mesh, [rho0](const Vec2&) { return rho0; }, [](const Vec2&) { return Vec2(0.0, 0.0); });
  }
  // Constant mean density and zero velocity: the inequality reduces to the energy inequality.
  const double mean = p.initial.rho.integral() / p.mesh->area();
  p.reference_density = [mean](double, const Vec2&) { return mean; };
  p.reference_velocity = [](double, const Vec2&) { return Vec2(0.0, 0.0); };
  return p;
}

struct RunResult {
  Trajectory trajectory;
  int backoffs = 0;
  EnergyLedger ledger;
  MassHistory mass;
  RelEnergyReport relative;
  std::optional<ErrorHistory> error;
  double min_density = 0.0;
  std::vector<Gate> gates;
};

/// Invariant gates of an accepted run.
inline std::vector<Gate> run_gates(const RunResult& r, const SchemeConfig& scheme, bool zero_source) {
  std::vector<Gate> g;
  const double scale = r.ledger.E0 + 1.0;
  g.push_back({"positivity", r.min_density > 0.0, r.min_density, 0.0});
  if (zero_source) g.push_back({"mass_conservation", r.mass.max_relative_deviation <= 1e-12, r.mass.max_relative_deviation, 1e-12});
  const double id_tol = 10.0 * scheme.picard_tol * scale;
  g.push_back({"energy_identity", r.ledger.max_abs_residual() <= id_tol, r.ledger.max_abs_residual(), id_tol});
  g.push_back({"dissipation_nonnegative", r.ledger.min_dissipation_term() >= -1e-14, r.ledger.min_dissipation_term(), -1e-14});
  const double slack_tol = -1e-8 * scale;
  g.push_back({"relative_energy_slack", r.relative.min_slack() >= slack_tol, r.relative.min_slack(), slack_tol});
  return g;
}

/// Runs the configured problem (with dt backoff) and evaluates every diagnostic.
inline RunResult run_experiment(const ExperimentConfig& cfg, const MeshPtr& mesh) {
  const Problem prob = make_problem(cfg, mesh);
  RunResult r;
  BackoffRun run = run_with_backoff(mesh, cfg.physics, cfg.scheme, prob.initial, prob.sources);
  r.trajectory = std::move(run.trajectory);
  r.backoffs = run.backoffs;
  const Trajectory& tr = r.trajectory;
  r.min_density = std::numeric_limits<double>::infinity();
  for (const State& s : tr.states) r.min_density = std::min(r.min_density, s.rho.min());
  r.ledger = energy_ledger(tr, cfg.physics, prob.sources);
  r.mass = mass_history(tr);
  r.relative = relative_energy_inequality_check(tr, cfg.physics, prob.reference_density, prob.reference_velocity,
                                                prob.sources);
  if (prob.flow) r.error = error_vs_strong(tr, cfg.physics.pressure, prob.reference_density, prob.reference_velocity);
  SchemeConfig effective = cfg.scheme;
  effective.dt = tr.dt;
  r.gates = run_gates(r, effective, prob.sources.empty());
  return r;
}

// ---------------------------------------------------------------------------

struct ConvergenceLevel {
  int level = 0;
  int nx = 0;
  double h = 0.0;
  double dt = 0.0;
  int steps = 0;
  int backoffs = 0;
  bool ok = true;
  std::string failure;
  double max_relative_energy = 0.0;
  double initial_relative_energy = 0.0;
  double gradient_error = 0.0;
  double bound_constant = 0.0;  ///< max E / (E_init + h^A + sqrt(dt))
  UniformBounds bounds;
  DensityDissipation dissipation;
  double min_slack = 0.0;
  double E0 = 0.0;
};

struct ConvergenceStudy {
  double predicted_order = 0.0;
  std::vector<ConvergenceLevel> levels;
  double energy_order = 0.0;    ///< slope of log max E against log h
  double gradient_order = 0.0;  ///< slope of the accumulated gradient error
  double constant_growth = 0.0; ///< slope of log c against log(1/h)
  double velocity_bound_growth = 0.0;
  double density_bound_growth = 0.0;
  double kinetic_bound_growth = 0.0;
  double dissipation_growth = 0.0;

  [[nodiscard]] bool ok() const {
    return std::all_of(levels.begin(), levels.end(), [](const ConvergenceLevel& l) { return l.ok; });
  }
};

/// Coupled refinement h -> h/2, dt -> dt/4 against the manufactured solution.
inline ConvergenceStudy convergence_study(const ExperimentConfig& cfg,
                                          const std::function<void(const ConvergenceLevel&)>& on_level = {}) {
  if (!cfg.manufactured) throw ConfigError("convergence mode needs the manufactured solution");
  if (cfg.convergence.levels < 3) throw ConfigError("convergence mode needs at least 3 levels");
  ConvergenceStudy study;
  const double A = predicted_order(cfg.physics.pressure.gamma());
  study.predicted_order = A;
  std::vector<double> hs, errs, grads, consts, vb, db, kb, diss;
  for (int l = 0; l < cfg.convergence.levels; ++l) {
    ConvergenceLevel lev;
    lev.level = l;
    lev.nx = cfg.convergence.base_nx << l;
    const MeshPtr mesh = structured_triangulation(lev.nx, lev.nx, cfg.mesh.box);
    lev.h = mesh->h();
    ExperimentConfig c = cfg;
    c.scheme.dt = cfg.convergence.dt_coefficient * lev.h * lev.h;
    const RunResult r = run_experiment(c, mesh);
    lev.dt = r.trajectory.dt;
    lev.steps = static_cast<int>(r.trajectory.states.size()) - 1;
    lev.backoffs = r.backoffs;
    lev.ok = r.trajectory.ok();
    if (!lev.ok) lev.failure = *r.trajectory.failure;
    lev.max_relative_energy = r.error->max_relative_energy();
    lev.initial_relative_energy = r.error->relative_energy.front();
    lev.gradient_error = r.error->total_gradient_error();
    lev.bound_constant = lev.max_relative_energy / (lev.initial_relative_energy + std::pow(lev.h, A) + std::sqrt(lev.dt));
    lev.bounds = uniform_bounds(r.trajectory, cfg.physics.pressure);
    lev.dissipation = density_dissipation_monitor(r.trajectory, cfg.physics.pressure);
    lev.min_slack = r.relative.min_slack();
    lev.E0 = r.ledger.E0;
    study.levels.push_back(lev);
    if (on_level) on_level(lev);
    hs.push_back(lev.h);
    errs.push_back(lev.max_relative_energy);
    grads.push_back(lev.gradient_error);
    consts.push_back(lev.bound_constant);
    vb.push_back(lev.bounds.velocity_l2_v2);
    db.push_back(lev.bounds.density_linf_lgamma);
    kb.push_back(lev.bounds.kinetic_linf_l1);
    diss.push_back(std::max(lev.dissipation.total, std::numeric_limits<double>::min()));
  }
  study.energy_order = convergence_order(hs, errs);
  study.gradient_order = convergence_order(hs, grads);
  study.constant_growth = growth_slope(hs, consts);
  study.velocity_bound_growth = growth_slope(hs, vb);
  study.density_bound_growth = growth_slope(hs, db);
  study.kinetic_bound_growth = growth_slope(hs, kb);
  study.dissipation_growth = growth_slope(hs, diss);
  return study;
}

// ---------------------------------------------------------------------------

struct ProbeSuite {
  std::vector<ProbeReport> reports;
  bool flagged = false;
  std::vector<Gate> gates;
};

/// Runs every probe; slopes must lie in the band and projection orders within
/// 0.2 of 2 (values) and 1 (gradients). A degenerate mesh is flagged, not gated.
inline ProbeSuite verify_inequalities(const ProbeOptions& opt) {
  if (opt.levels < 3) throw ConfigError("verify-inequalities needs at least 3 levels");
  ProbeSuite suite;
  suite.reports = run_all_probes(opt);
  for (const ProbeReport& r : suite.reports) {
    suite.flagged = suite.flagged || r.flagged;
    if (r.flagged) continue;
    suite.gates.push_back({r.id + "_slope", r.within_band(opt.band), r.slope, opt.band});
    if (r.two_sided) suite.gates.push_back({r.id + "_lower_slope", std::abs(r.min_slope) <= opt.band, r.min_slope, opt.band});
    if (r.id == "projection") {
      suite.gates.push_back({"projection_value_order", std::abs(r.value_order - 2.0) <= 0.2, r.value_order, 2.0});
      suite.gates.push_back({"projection_gradient_order", std::abs(r.gradient_order - 1.0) <= 0.2, r.gradient_order, 1.0});
      suite.gates.push_back({"projection_hierarchy", r.gradient_order >= r.value_order - 1.1,
                             r.gradient_order - r.value_order, -1.1});
    }
  }
  return suite;
}

}  // namespace cns
