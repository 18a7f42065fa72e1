#pragma once

#include <Eigen/Sparse>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cns/errors.hpp"
#include "cns/mesh.hpp"
#include "cns/quadrature.hpp"
#include "cns/spaces.hpp"
#include "cns/thermo.hpp"

namespace cns {

using SparseMatrix = Eigen::SparseMatrix<double>;
using Triplet = Eigen::Triplet<double>;

/// Discrete state at time level n.
struct State {
  int time_index = 0;
  ScalarCellField rho;
  CRVectorField u;
};

enum class LinearSolverKind { Direct, Iterative };

struct SchemeConfig {
  double dt = 1e-2;
  double t_final = 0.1;
  double picard_tol = 1e-10;
  int picard_max_iters = 100;
  double linear_tol = 1e-12;
  double dt_backoff_factor = 0.5;
  int max_backoffs = 8;
  double theta_min = 0.1;
  LinearSolverKind linear_solver = LinearSolverKind::Direct;

  void validate() const {
    if (!(dt > 0.0)) throw ConfigError("dt must be positive");
    if (!(t_final >= 0.0)) throw ConfigError("T_final must be non-negative");
    if (!(picard_tol > 0.0) || !(linear_tol > 0.0)) throw ConfigError("tolerances must be positive");
    if (picard_max_iters < 1) throw ConfigError("picard_max_iters must be >= 1");
    if (!(dt_backoff_factor > 0.0 && dt_backoff_factor < 1.0)) throw ConfigError("dt_backoff_factor must lie in (0,1)");
    if (max_backoffs < 0) throw ConfigError("max_backoffs must be >= 0");
  }

  [[nodiscard]] int num_steps() const { return static_cast<int>(std::llround(t_final / dt)); }
};

/// Optional manufactured forcing f_rho(t,x) and f_m(t,x).
struct SourceTerms {
  std::function<double(double, const Vec2&)> mass;
  std::function<Vec2(double, const Vec2&)> momentum;

  [[nodiscard]] bool empty() const { return !mass && !momentum; }
};

struct Physics {
  PressureLaw pressure = PressureLaw::isentropic(1.0, 2.0);
  ViscosityParams viscosity;
};

/// Cell means of the mass source at time t (zero field when absent).
inline ScalarCellField discretize_mass_source(const MeshPtr& mesh, const SourceTerms& src, double t) {
  if (!src.mass) return ScalarCellField(mesh, 0.0);
  return cell_average(mesh, [&](const Vec2& x) { return src.mass(t, x); }, seven_point_rule());
}

/// Load vector int f_m . phi_sigma e_i over the support of each basis function.
inline Eigen::VectorXd discretize_momentum_source(const Mesh& mesh, const SourceTerms& src, double t) {
  Eigen::VectorXd load = Eigen::VectorXd::Zero(2 * mesh.num_internal_faces());
  if (!src.momentum) return load;
  const TriangleRule rule = seven_point_rule();
  for (Index k = 0; k < mesh.num_cells(); ++k) {
    const Cell& c = mesh.cell(k);
    for (std::size_t q = 0; q < rule.points.size(); ++q) {
      const Vec2 f = src.momentum(t, mesh.point(k, rule.points[q]));
      for (int i = 0; i < 3; ++i) {
        const Index d = mesh.dof(c.faces[static_cast<std::size_t>(i)]);
        if (d == kNoDof) continue;
        const double phi = 1.0 - 2.0 * rule.points[q][i];
        load.segment<2>(2 * d) += rule.weights[q] * c.measure * phi * f;
      }
    }
  }
  return load;
}

/// Upwind value of q on internal face `face` seen from `owner_cell`:
/// q_K if u_sigma . n_{sigma,K} > 0, else q_L.
inline double upwind_value(const ScalarCellField& q, const CRVectorField& u, Index face, Index owner_cell) {
  const Mesh& mesh = *q.mesh();
  const Face& f = mesh.face(face);
  if (!f.internal()) throw BoundaryFace("upwinding is undefined on boundary face " + std::to_string(face));
  const double flux = u.face_value(face).dot(mesh.normal(face, owner_cell));
  return flux > 0.0 ? q[owner_cell] : q[mesh.other_cell(face, owner_cell)];
}

/// Convergence record of one implicit step.
struct StepReport {
  int picard_iterations = 0;
  double momentum_residual = 0.0;  ///< relative, at acceptance
};

/// Assembles and solves the implicit upwind / Crouzeix-Raviart scheme.
class Scheme {
 public:
  Scheme(MeshPtr mesh, Physics physics, SchemeConfig config)
      : mesh_(std::move(mesh)), physics_(std::move(physics)), config_(config) {
    config_.validate();
    physics_.viscosity.validate();
  }

  [[nodiscard]] const MeshPtr& mesh() const { return mesh_; }
  [[nodiscard]] const Physics& physics() const { return physics_; }
  [[nodiscard]] const SchemeConfig& config() const { return config_; }

  /// Upwind continuity matrix for advecting velocity u:
  ///   |K|/dt rho_K + sum_sigma |sigma| rho_sigma^up u_sigma . n_{sigma,K}.
  /// Nonpositive off-diagonals and zero column sums beyond |K|/dt: an M-matrix.
  [[nodiscard]] SparseMatrix continuity_matrix(const CRVectorField& u, double dt) const {
    const Mesh& mesh = *mesh_;
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(mesh.num_cells() + 2 * mesh.num_internal_faces()));
    for (Index k = 0; k < mesh.num_cells(); ++k) trip.emplace_back(k, k, mesh.cell(k).measure / dt);
    for (Index f : mesh.internal_faces()) {
      const Face& fc = mesh.face(f);
      const double flux = fc.measure * u.face_value(f).dot(fc.normal);  // seen from owner
      const Index up = flux > 0.0 ? fc.owner : fc.neighbor;
      // owner row: + flux * rho_up ; neighbor row: - flux * rho_up
      trip.emplace_back(fc.owner, up, flux);
      trip.emplace_back(fc.neighbor, up, -flux);
    }
    SparseMatrix m(mesh.num_cells(), mesh.num_cells());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
  }

  /// Solve the discrete continuity equation for fixed u.
  [[nodiscard]] ScalarCellField continuity_step(const ScalarCellField& rho_prev, const CRVectorField& u, double dt,
                                                const ScalarCellField* mass_source = nullptr) const {
    const Mesh& mesh = *mesh_;
    Eigen::VectorXd rhs(mesh.num_cells());
    for (Index k = 0; k < mesh.num_cells(); ++k) {
      rhs[k] = mesh.cell(k).measure / dt * rho_prev[k];
      if (mass_source) rhs[k] += mesh.cell(k).measure * (*mass_source)[k];
    }
    const Eigen::VectorXd rho = solve(continuity_matrix(u, dt), rhs, continuity_lu_);
    return ScalarCellField(mesh_, std::vector<double>(rho.data(), rho.data() + rho.size()));
  }

  /// Residual of the continuity equation per cell (zero for an exact solution).
  [[nodiscard]] Eigen::VectorXd continuity_residual(const ScalarCellField& rho_prev, const State& state, double dt,
                                                    const ScalarCellField* mass_source = nullptr) const {
    const Mesh& mesh = *mesh_;
    Eigen::VectorXd r(mesh.num_cells());
    Eigen::VectorXd rho(mesh.num_cells());
    for (Index k = 0; k < mesh.num_cells(); ++k) {
      rho[k] = state.rho[k];
      r[k] = -mesh.cell(k).measure / dt * rho_prev[k];
      if (mass_source) r[k] -= mesh.cell(k).measure * (*mass_source)[k];
    }
    r += continuity_matrix(state.u, dt) * rho;
    return r;
  }

  /// Linear momentum system A u = b for given densities and advecting velocity w.
  struct MomentumSystem {
    SparseMatrix matrix;
    Eigen::VectorXd rhs;
    Eigen::VectorXd pressure_scale;  ///< |tau| (p_K + p_L) per row, residual normalization
  };

  [[nodiscard]] MomentumSystem assemble_momentum(const State& prev, const ScalarCellField& rho, const CRVectorField& w,
                                                 double dt, const Eigen::VectorXd* load = nullptr) const {
    const Mesh& mesh = *mesh_;
    const double mu = physics_.viscosity.mu;
    const double mu_lambda = physics_.viscosity.mu + physics_.viscosity.lambda;
    const Index n = 2 * mesh.num_internal_faces();
    MomentumSystem sys;
    sys.rhs = Eigen::VectorXd::Zero(n);
    sys.pressure_scale = Eigen::VectorXd::Zero(n);
    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(mesh.num_cells()) * 90);

    std::array<Index, 3> dofs{};
    std::array<Vec2, 3> grads{};
    for (Index k = 0; k < mesh.num_cells(); ++k) {
      const Cell& c = mesh.cell(k);
      const double area = c.measure;
      int nloc = 0;
      for (Index f : c.faces) {
        const Index d = mesh.dof(f);
        if (d == kNoDof) continue;
        dofs[static_cast<std::size_t>(nloc)] = d;
        grads[static_cast<std::size_t>(nloc)] = CRVectorField::basis_gradient(mesh, k, f);
        ++nloc;
      }
      const double p = physics_.pressure.pressure(rho[k]);
      const Vec2 u_prev_mean = prev.u.cell_mean(k);
      const double time_coef = area * rho[k] / (9.0 * dt);
      for (int a = 0; a < nloc; ++a) {
        const Index da = dofs[static_cast<std::size_t>(a)];
        const Vec2& ga = grads[static_cast<std::size_t>(a)];
        // time derivative, old level
        sys.rhs.segment<2>(2 * da) += area * prev.rho[k] / (3.0 * dt) * u_prev_mean;
        // -sum_K p(rho_K) sum_sigma |sigma| v_sigma . n_{sigma,K}, moved to the right
        const Vec2 pn = p * area * ga;  // = p |sigma| n_{sigma,K}
        sys.rhs.segment<2>(2 * da) += pn;
        sys.pressure_scale.segment<2>(2 * da).array() += pn.cwiseAbs().array();
        for (int b = 0; b < nloc; ++b) {
          const Index db = dofs[static_cast<std::size_t>(b)];
          const Vec2& gb = grads[static_cast<std::size_t>(b)];
          const double visc = area * mu * ga.dot(gb);
          for (int i = 0; i < 2; ++i) {
            trip.emplace_back(2 * da + i, 2 * db + i, time_coef + visc);
            for (int j = 0; j < 2; ++j) trip.emplace_back(2 * da + i, 2 * db + j, area * mu_lambda * ga[i] * gb[j]);
          }
        }
      }
      // upwind convection: sum_sigma |sigma| rho^up uhat^up [w_sigma . n_{sigma,K}] . v_K
      for (Index f : c.faces) {
        const Index L = mesh.other_cell(f, k);
        if (L == kNoCell) continue;
        const double wn = w.face_value(f).dot(mesh.normal(f, k));
        if (wn == 0.0) continue;
        const Index up = wn > 0.0 ? k : L;
        const double flux = mesh.face(f).measure * rho[up] * wn / 9.0;
        for (int a = 0; a < nloc; ++a) {
          const Index da = dofs[static_cast<std::size_t>(a)];
          for (Index fb : mesh.cell(up).faces) {
            const Index db = mesh.dof(fb);
            if (db == kNoDof) continue;
            trip.emplace_back(2 * da, 2 * db, flux);
            trip.emplace_back(2 * da + 1, 2 * db + 1, flux);
          }
        }
      }
    }
    if (load) sys.rhs += *load;
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(trip.begin(), trip.end());
    return sys;
  }

  /// Residual of the momentum equation tested against every phi_sigma e_i,
  /// with upwinding taken from the state's own velocity.
  [[nodiscard]] Eigen::VectorXd momentum_residual(const State& prev, const State& state, double dt,
                                                  const Eigen::VectorXd* load = nullptr) const {
    const MomentumSystem sys = assemble_momentum(prev, state.rho, state.u, dt, load);
    return sys.matrix * state.u.dofs() - sys.rhs;
  }

  /// max |R| / max(|A u|, |b|, |tau|(p_K + p_L)).
  [[nodiscard]] double relative_momentum_residual(const State& prev, const State& state, double dt,
                                                  const Eigen::VectorXd* load = nullptr) const {
    return relative_residual(assemble_momentum(prev, state.rho, state.u, dt, load), state.u);
  }

  [[nodiscard]] static double relative_residual(const MomentumSystem& sys, const CRVectorField& u) {
    if (u.num_dofs() == 0) return 0.0;
    const Eigen::VectorXd au = sys.matrix * u.dofs();
    const double scale = std::max({au.lpNorm<Eigen::Infinity>(), sys.rhs.lpNorm<Eigen::Infinity>(),
                                   sys.pressure_scale.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min()});
    return (au - sys.rhs).lpNorm<Eigen::Infinity>() / scale;
  }

  /// One implicit step by Picard iteration with lagged advecting velocity.
  [[nodiscard]] State advance_time_step(const State& prev, const SourceTerms& sources = {},
                                        StepReport* report = nullptr) const {
    return advance_time_step(prev, config_.dt, sources, report);
  }

  [[nodiscard]] State advance_time_step(const State& prev, double dt, const SourceTerms& sources,
                                        StepReport* report = nullptr) const {
    const double t = (prev.time_index + 1) * dt;
    const ScalarCellField mass = discretize_mass_source(mesh_, sources, t);
    const Eigen::VectorXd load = discretize_momentum_source(*mesh_, sources, t);
    const ScalarCellField* mass_ptr = sources.mass ? &mass : nullptr;
    const Eigen::VectorXd* load_ptr = sources.momentum ? &load : nullptr;

    State next{prev.time_index + 1, prev.rho, prev.u};
    double first_residual = -1.0;
    for (int it = 1; it <= config_.picard_max_iters; ++it) {
      next.rho = continuity_step(prev.rho, next.u, dt, mass_ptr);
      if (!next.rho.all_finite() || next.rho.min() <= 0.0) {
        throw NonlinearDivergence("density lost positivity in Picard iteration " + std::to_string(it));
      }
      const MomentumSystem sys = assemble_momentum(prev, next.rho, next.u, dt, load_ptr);
      const double res = relative_residual(sys, next.u);
      if (!std::isfinite(res)) throw NonlinearDivergence("non-finite momentum residual");
      if (first_residual < 0.0) first_residual = res;
      if (res <= config_.picard_tol) {
        if (report) *report = {it, res};
        return next;
      }
      if (res > 1e8 * std::max(first_residual, config_.picard_tol)) {
        throw NonlinearDivergence("Picard residual blew up to " + std::to_string(res));
      }
      next.u.dofs() = solve(sys.matrix, sys.rhs, momentum_lu_, &next.u.dofs());
      if (!next.u.dofs().allFinite()) throw NonlinearDivergence("non-finite velocity");
    }
    throw NonlinearDivergence("Picard iteration did not reach tolerance in " +
                              std::to_string(config_.picard_max_iters) + " iterations");
  }

 private:
  using LU = Eigen::SparseLU<SparseMatrix, Eigen::COLAMDOrdering<int>>;

  /// Symbolic LU analysis, reused while the sparsity pattern repeats exactly.
  struct CachedLU {
    std::shared_ptr<LU> lu;
    std::vector<SparseMatrix::StorageIndex> outer, inner;

    bool matches(const SparseMatrix& m) const {
      return lu && outer.size() == static_cast<std::size_t>(m.outerSize() + 1) &&
             inner.size() == static_cast<std::size_t>(m.nonZeros()) &&
             std::equal(outer.begin(), outer.end(), m.outerIndexPtr()) &&
             std::equal(inner.begin(), inner.end(), m.innerIndexPtr());
    }
  };

  [[nodiscard]] Eigen::VectorXd solve(const SparseMatrix& a, const Eigen::VectorXd& b, CachedLU& cache,
                                      const Eigen::VectorXd* guess = nullptr) const {
    if (b.size() == 0) return b;
    SparseMatrix m = a;
    m.makeCompressed();
    if (config_.linear_solver == LinearSolverKind::Iterative) {
      Eigen::BiCGSTAB<SparseMatrix> it;
      it.setTolerance(config_.linear_tol);
      it.setMaxIterations(static_cast<int>(std::min<Eigen::Index>(10 * m.rows(), 20000)));
      it.compute(m);
      Eigen::VectorXd x;
      if (guess && guess->size() == b.size()) {
        x = it.solveWithGuess(b, *guess);
      } else {
        x = it.solve(b);
      }
      if (it.info() == Eigen::Success && x.allFinite()) return x;
      // fall through to the direct solver
    }
    if (!cache.matches(m)) {
      cache.lu = std::make_shared<LU>();
      cache.lu->analyzePattern(m);
      cache.outer.assign(m.outerIndexPtr(), m.outerIndexPtr() + m.outerSize() + 1);
      cache.inner.assign(m.innerIndexPtr(), m.innerIndexPtr() + m.nonZeros());
    }
    cache.lu->factorize(m);
    if (cache.lu->info() != Eigen::Success) throw LinearSolveFailure("sparse LU factorization failed");
    Eigen::VectorXd x = cache.lu->solve(b);
    if (cache.lu->info() != Eigen::Success) throw LinearSolveFailure("sparse LU solve failed");
    return x;
  }

  MeshPtr mesh_;
  Physics physics_;
  SchemeConfig config_;
  mutable CachedLU continuity_lu_;
  mutable CachedLU momentum_lu_;
};

/// Sequence of states t_0 .. t_N with uniform dt.
struct Trajectory {
  MeshPtr mesh;
  double dt = 0.0;
  std::vector<State> states;
  std::vector<StepReport> reports;
  std::optional<std::string> failure;

  [[nodiscard]] double time(int n) const { return n * dt; }
  [[nodiscard]] bool ok() const { return !failure.has_value(); }
};

/// Project (rho0, u0) onto L_h x W_h by cell means and face means.
template <class Rho, class U>
State project_initial_data(const MeshPtr& mesh, Rho&& rho0, U&& u0) {
  State s;
  s.rho = cell_average(mesh, rho0, seven_point_rule());
  for (Index k = 0; k < mesh->num_cells(); ++k) {
    if (!(s.rho[k] > 0.0)) {
      throw NonPositiveInitialDensity("initial density mean is not positive on cell " + std::to_string(k));
    }
  }
  s.u = cr_interpolate<2>(mesh, u0);
  return s;
}

/// March `config.num_steps()` implicit steps. Solver failures end the run early
/// with `failure` set; the states computed so far are kept.
inline Trajectory run_simulation(const Scheme& scheme, const State& initial, const SourceTerms& sources = {},
                                 const std::function<void(const State&)>& on_step = {}) {
  const SchemeConfig& cfg = scheme.config();
  if (cfg.theta_min > 0.0) {
    const double theta = quality(*scheme.mesh()).theta;
    if (theta < cfg.theta_min) {
      throw MeshQualityTooLow("mesh theta " + std::to_string(theta) + " below theta_min " +
                              std::to_string(cfg.theta_min));
    }
  }
  Trajectory traj;
  traj.mesh = scheme.mesh();
  traj.dt = cfg.dt;
  traj.states.push_back(initial);
  if (on_step) on_step(initial);
  const int steps = cfg.num_steps();
  for (int n = 1; n <= steps; ++n) {
    StepReport report;
    try {
      traj.states.push_back(scheme.advance_time_step(traj.states.back(), sources, &report));
    } catch (const NonlinearDivergence& e) {
      traj.failure = std::string("step ") + std::to_string(n) + ": " + e.what();
      return traj;
    } catch (const LinearSolveFailure& e) {
      traj.failure = std::string("step ") + std::to_string(n) + ": " + e.what();
      return traj;
    }
    traj.reports.push_back(report);
    if (on_step) on_step(traj.states.back());
  }
  return traj;
}

/// Restart the whole run with dt * backoff_factor after a solver failure, up to
/// `max_backoffs` times. The returned trajectory is the last attempt.
struct BackoffRun {
  Trajectory trajectory;
  int backoffs = 0;
};

inline BackoffRun run_with_backoff(const MeshPtr& mesh, const Physics& physics, SchemeConfig config,
                                   const State& initial, const SourceTerms& sources = {}) {
  BackoffRun out;
  for (int attempt = 0;; ++attempt) {
    Scheme scheme(mesh, physics, config);
    out.trajectory = run_simulation(scheme, initial, sources);
    out.backoffs = attempt;
    if (out.trajectory.ok() || attempt >= config.max_backoffs) return out;
    config.dt *= config.dt_backoff_factor;
  }
}

}  // namespace cns
