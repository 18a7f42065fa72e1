#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <exception>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "cns/config.hpp"
#include "cns/experiments.hpp"
#include "cns/io.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kSolverFailure = 3;
constexpr int kGateFailure = 4;

struct Flags {
  std::string config;
  std::optional<std::string> output;
  std::optional<int> levels;
  std::optional<std::uint64_t> seed;
};

int fail(int code, const char* what, const std::exception& e) {
  std::fprintf(stderr, "%s: %s\n", what, e.what());
  return code;
}

void add_flags(CLI::App& app, Flags& f) {
  app.add_option("-c,--config", f.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  app.add_option("-o,--output", f.output, "output directory (overrides output.directory)");
  app.add_option("-l,--levels", f.levels, "refinement levels (convergence / verify-inequalities)");
  app.add_option("-s,--seed", f.seed, "random seed for the inequality probes");
}

nlohmann::json gates_json(const std::vector<cns::Gate>& gates) {
  nlohmann::json out = nlohmann::json::array();
  for (const cns::Gate& g : gates) {
    out.push_back({{"name", g.name}, {"passed", g.passed}, {"value", g.value}, {"threshold", g.threshold}});
  }
  return out;
}

void write_summary(const fs::path& dir, const nlohmann::json& j) {
  auto out = cns::open_output(dir / "summary.json");
  out << j.dump(2) << '\n';
}

void report_gates(const std::vector<cns::Gate>& gates) {
  for (const cns::Gate& g : gates) {
    std::printf("  %-28s %s  value=%.6e  threshold=%.6e\n", g.name.c_str(), g.passed ? "ok  " : "FAIL", g.value,
                g.threshold);
  }
}

int cmd_run(const cns::ExperimentConfig& cfg) {
  const fs::path dir = cfg.output.directory;
  const cns::MeshPtr mesh = cns::make_mesh(cfg.mesh);
  const cns::RunResult r = cns::run_experiment(cfg, mesh);
  const cns::Trajectory& tr = r.trajectory;
  const int every = cfg.output.vtk_every;
  for (std::size_t n = 0; n < tr.states.size(); ++n) {
    const cns::State& s = tr.states[n];
    const bool keep = n == 0 || n + 1 == tr.states.size() || (every > 0 && s.time_index % every == 0);
    if (!keep) continue;
    char name[32];
    std::snprintf(name, sizeof name, "state_%05d.vtk", s.time_index);
    auto out = cns::open_output(dir / "vtk" / name);
    cns::write_state_vtk(out, s, tr.time(s.time_index));
  }

  {
    auto out = cns::open_output(dir / "energy_ledger.csv");
    cns::write_energy_csv(out, r.ledger);
  }
  {
    auto out = cns::open_output(dir / "mass_history.csv");
    cns::write_mass_csv(out, r.mass, tr.dt);
  }
  {
    auto out = cns::open_output(dir / "relative_energy.csv");
    cns::write_relative_energy_csv(out, r.relative);
  }

  nlohmann::json summary{{"mode", "run"},
                         {"cells", mesh->num_cells()},
                         {"h", mesh->h()},
                         {"theta", cns::quality(*mesh).theta},
                         {"dt", tr.dt},
                         {"steps", static_cast<int>(tr.states.size()) - 1},
                         {"backoffs", r.backoffs},
                         {"E0", r.ledger.E0},
                         {"M0", r.ledger.M0},
                         {"min_density", r.min_density},
                         {"max_identity_residual", r.ledger.max_abs_residual()},
                         {"max_mass_deviation", r.mass.max_relative_deviation},
                         {"min_relative_energy_slack", r.relative.min_slack()},
                         {"gates", gates_json(r.gates)}};
  if (r.error) summary["max_relative_energy"] = r.error->max_relative_energy();
  if (!tr.ok()) summary["failure"] = *tr.failure;
  write_summary(dir, summary);

  std::printf("run: %lld cells, dt=%.3e, %zu steps, %d backoffs\n", static_cast<long long>(mesh->num_cells()), tr.dt,
              tr.states.size() - 1, r.backoffs);
  if (!tr.ok()) {
    std::fprintf(stderr, "solver failure after %d backoffs: %s\n", r.backoffs, tr.failure->c_str());
    return kSolverFailure;
  }
  report_gates(r.gates);
  return cns::all_passed(r.gates) ? kOk : kGateFailure;
}

int cmd_convergence(const cns::ExperimentConfig& cfg) {
  const fs::path dir = cfg.output.directory;
  auto csv = cns::open_output(dir / "convergence.csv");
  csv << "level,nx,h,dt,steps,backoffs,max_relative_energy,initial_relative_energy,gradient_error,bound_constant,"
         "velocity_l2_v2,density_linf_lgamma,kinetic_linf_l1,density_dissipation,min_slack\n";
  std::printf("%5s %5s %12s %12s %7s %14s %14s %12s\n", "level", "nx", "h", "dt", "steps", "max E", "grad err", "c");
  const cns::ConvergenceStudy study = cns::convergence_study(cfg, [&](const cns::ConvergenceLevel& l) {
    csv << l.level << ',' << l.nx << ',' << l.h << ',' << l.dt << ',' << l.steps << ',' << l.backoffs << ','
        << l.max_relative_energy << ',' << l.initial_relative_energy << ',' << l.gradient_error << ','
        << l.bound_constant << ',' << l.bounds.velocity_l2_v2 << ',' << l.bounds.density_linf_lgamma << ','
        << l.bounds.kinetic_linf_l1 << ',' << l.dissipation.total << ',' << l.min_slack << '\n';
    csv.flush();
    std::printf("%5d %5d %12.5e %12.5e %7d %14.6e %14.6e %12.5e\n", l.level, l.nx, l.h, l.dt, l.steps,
                l.max_relative_energy, l.gradient_error, l.bound_constant);
  });

  const double A = study.predicted_order;
  std::vector<cns::Gate> gates{
      {"energy_order", study.energy_order >= A - 0.25, study.energy_order, A - 0.25},
      {"bound_constant_growth", study.constant_growth <= 0.1, study.constant_growth, 0.1},
  };
  nlohmann::json summary{{"mode", "convergence"},
                         {"predicted_order", A},
                         {"energy_order", study.energy_order},
                         {"gradient_order", study.gradient_order},
                         {"bound_constant_growth", study.constant_growth},
                         {"velocity_bound_growth", study.velocity_bound_growth},
                         {"density_bound_growth", study.density_bound_growth},
                         {"kinetic_bound_growth", study.kinetic_bound_growth},
                         {"density_dissipation_growth", study.dissipation_growth},
                         {"gates", gates_json(gates)}};
  write_summary(dir, summary);
  std::printf("fitted order %.3f (predicted %.3f), gradient order %.3f, constant growth %.3f\n", study.energy_order, A,
              study.gradient_order, study.constant_growth);
  if (!study.ok()) {
    for (const auto& l : study.levels) {
      if (!l.ok) std::fprintf(stderr, "level %d: %s\n", l.level, l.failure.c_str());
    }
    return kSolverFailure;
  }
  report_gates(gates);
  return cns::all_passed(gates) ? kOk : kGateFailure;
}

int cmd_verify(const cns::ExperimentConfig& cfg, bool custom_mesh) {
  const fs::path dir = cfg.output.directory;
  cns::ProbeOptions opt = cfg.probes;
  if (custom_mesh) opt.base = cns::make_mesh(cfg.mesh);
  const cns::ProbeSuite suite = cns::verify_inequalities(opt);
  nlohmann::json probes = nlohmann::json::array();
  for (const cns::ProbeReport& r : suite.reports) {
    auto out = cns::open_output(dir / ("probe_" + r.id + ".csv"));
    cns::write_probe_csv(out, r);
    nlohmann::json p{{"id", r.id}, {"slope", r.slope}, {"samples", r.samples}, {"flagged", r.flagged}};
    if (r.two_sided) p["min_slope"] = r.min_slope;
    if (r.id == "projection") {
      p["value_order"] = r.value_order;
      p["gradient_order"] = r.gradient_order;
    }
    probes.push_back(p);
    std::printf("probe %-18s slope=%+.4f%s%s\n", r.id.c_str(), r.slope,
                r.two_sided ? (" lower=" + std::to_string(r.min_slope)).c_str() : "", r.flagged ? "  [flagged]" : "");
  }
  write_summary(dir, {{"mode", "verify-inequalities"},
                      {"seed", opt.seed},
                      {"levels", opt.levels},
                      {"band", opt.band},
                      {"flagged", suite.flagged},
                      {"probes", probes},
                      {"gates", gates_json(suite.gates)}});
  if (suite.flagged) std::printf("mesh quality below theta_min: slopes reported, not gated\n");
  report_gates(suite.gates);
  return cns::all_passed(suite.gates) ? kOk : kGateFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Implicit upwind FV/CR solver for barotropic compressible Navier-Stokes"};
  Flags flags;
  add_flags(app, flags);
  CLI::App* run = app.add_subcommand("run", "march the configured problem and check the invariant gates");
  CLI::App* conv = app.add_subcommand("convergence", "coupled refinement study against the manufactured solution");
  CLI::App* verify = app.add_subcommand("verify-inequalities", "refinement probes of the discrete inequalities");
  for (CLI::App* sub : {run, conv, verify}) add_flags(*sub, flags);
  app.require_subcommand(0, 1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfigError;
  }

  try {
    if (flags.config.empty()) throw cns::ConfigError("--config is required");
    cns::ExperimentConfig cfg = cns::load_config(flags.config);
    if (run->parsed()) cfg.mode = cns::Mode::Run;
    if (conv->parsed()) cfg.mode = cns::Mode::Convergence;
    if (verify->parsed()) cfg.mode = cns::Mode::VerifyInequalities;
    if (flags.output) cfg.output.directory = *flags.output;
    if (flags.seed) {
      cfg.seed = *flags.seed;
      cfg.probes.seed = *flags.seed;
    }
    if (flags.levels) {
      cfg.convergence.levels = *flags.levels;
      cfg.probes.levels = *flags.levels;
    }
    switch (cfg.mode) {
      case cns::Mode::Run: return cmd_run(cfg);
      case cns::Mode::Convergence: return cmd_convergence(cfg);
      case cns::Mode::VerifyInequalities: {
        // probe mode skips the theta gate; degenerate meshes are flagged in the report
        const bool custom = cfg.mesh.type != "structured";
        return cmd_verify(cfg, custom);
      }
    }
  } catch (const cns::ConfigError& e) {
    return fail(kConfigError, "config error", e);
  } catch (const cns::NonConforming& e) {
    return fail(kConfigError, "mesh error", e);
  } catch (const cns::DegenerateCell& e) {
    return fail(kConfigError, "mesh error", e);
  } catch (const cns::DuplicateCell& e) {
    return fail(kConfigError, "mesh error", e);
  } catch (const cns::MeshFormatError& e) {
    return fail(kConfigError, "mesh error", e);
  } catch (const cns::NonPositiveInitialDensity& e) {
    return fail(kConfigError, "config error", e);
  } catch (const cns::MeshQualityTooLow& e) {
    return fail(kConfigError, "config error", e);
  } catch (const nlohmann::json::exception& e) {
    return fail(kConfigError, "config error", e);
  } catch (const std::exception& e) {
    return fail(kSolverFailure, "error", e);
  }
  return kOk;
}
