#pragma once

#include <json.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "cns/errors.hpp"
#include "cns/inequality_lab.hpp"
#include "cns/manufactured.hpp"
#include "cns/mesh.hpp"
#include "cns/scheme.hpp"
#include "cns/thermo.hpp"

namespace cns {

using Json = nlohmann::json;

enum class Mode { Run, Convergence, VerifyInequalities };

struct MeshSpec {
  std::string type = "structured";  ///< structured | file | needle
  int nx = 16;
  int ny = 16;
  AxisBox box;
  std::string path;
  double aspect = 0.01;  ///< needle: height of the unit-width box
  int refinements = 0;
};

struct InitialDataSpec {
  std::string type = "rest";  ///< rest | gaussian_bump | manufactured
  double density = 1.0;
  double amplitude = 0.5;
  double width = 0.2;
  Vec2 center{0.5, 0.5};
  double velocity_amplitude = 0.0;  ///< bump: u0 = a sin(pi x) sin(pi y) (1, 0)
};

struct ConvergenceSpec {
  int levels = 3;
  int base_nx = 12;
  double dt_coefficient = 0.25;  ///< dt = dt_coefficient * h^2
};

struct OutputSpec {
  std::filesystem::path directory = "output";
  int vtk_every = 0;  ///< 0 disables snapshots other than the first and last
};

struct ExperimentConfig {
  Mode mode = Mode::Run;
  MeshSpec mesh;
  Physics physics;
  SchemeConfig scheme;
  InitialDataSpec initial;
  bool manufactured = false;
  ManufacturedFlow::Params manufactured_params;
  ConvergenceSpec convergence;
  ProbeOptions probes;
  OutputSpec output;
  std::uint64_t seed = 20240611;
};

namespace detail {

template <class T>
void read(const Json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad value for '") + key + "': " + e.what());
  }
}

inline PressureLaw parse_pressure(const Json& j) {
  std::string form = "isentropic";
  double gamma = 2.0, coefficient = 1.0;
  read(j, "form", form);
  read(j, "gamma", gamma);
  read(j, "coefficient", coefficient);
  try {
    if (form == "isentropic") return PressureLaw::isentropic(coefficient, gamma);
    if (form == "sum") {
      // p = sum_i a_i rho^{g_i}
      if (!j.contains("terms") || !j.at("terms").is_array() || j.at("terms").empty()) {
        throw ConfigError("pressure form 'sum' needs a non-empty 'terms' array");
      }
      std::vector<std::pair<double, double>> terms;
      for (const Json& t : j.at("terms")) terms.emplace_back(t.at("coefficient").get<double>(), t.at("exponent").get<double>());
      auto p = [terms](double rho) {
        double s = 0.0;
        for (auto [a, g] : terms) s += a * std::pow(rho, g);
        return s;
      };
      auto dp = [terms](double rho) {
        double s = 0.0;
        for (auto [a, g] : terms) s += a * g * std::pow(rho, g - 1.0);
        return s;
      };
      auto hi = terms.front(), lo = terms.front();
      for (auto t : terms) {
        if (t.second > hi.second) hi = t;
        if (t.second < lo.second) lo = t;
      }
      PressureLaw::Asymptotics asym{hi.second, hi.first * hi.second, std::nullopt, std::nullopt};
      if (hi.second < 2.0) {
        asym.alpha = lo.second - 2.0;
        asym.p0 = lo.first * lo.second;
      }
      return PressureLaw::custom(p, dp, asym);
    }
  } catch (const InvalidPressureLaw& e) {
    throw ConfigError(e.what());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("bad pressure terms: ") + e.what());
  }
  throw ConfigError("unknown pressure form '" + form + "'");
}

inline AxisBox parse_box(const Json& j) {
  std::vector<double> b;
  try {
    b = j.get<std::vector<double>>();
  } catch (const Json::exception&) {
    throw ConfigError("mesh.box must be [x0, y0, x1, y1]");
  }
  if (b.size() != 4 || !(b[2] > b[0]) || !(b[3] > b[1])) throw ConfigError("mesh.box must be [x0, y0, x1, y1]");
  return {Vec2(b[0], b[1]), Vec2(b[2], b[3])};
}

}  // namespace detail

inline Mode parse_mode(const std::string& s) {
  if (s == "run") return Mode::Run;
  if (s == "convergence") return Mode::Convergence;
  if (s == "verify-inequalities") return Mode::VerifyInequalities;
  throw ConfigError("unknown mode '" + s + "'");
}

inline std::string mode_name(Mode m) {
  switch (m) {
    case Mode::Run: return "run";
    case Mode::Convergence: return "convergence";
    case Mode::VerifyInequalities: return "verify-inequalities";
  }
  return "run";
}

inline ExperimentConfig parse_config(const Json& j) {
  using detail::read;
  if (!j.is_object()) throw ConfigError("config root must be an object");
  ExperimentConfig c;
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  read(j, "seed", c.seed);

  if (j.contains("mesh")) {
    const Json& m = j.at("mesh");
    read(m, "type", c.mesh.type);
    read(m, "nx", c.mesh.nx);
    read(m, "ny", c.mesh.ny);
    read(m, "path", c.mesh.path);
    read(m, "aspect", c.mesh.aspect);
    read(m, "refinements", c.mesh.refinements);
    if (m.contains("box")) c.mesh.box = detail::parse_box(m.at("box"));
    if (c.mesh.type != "structured" && c.mesh.type != "file" && c.mesh.type != "needle") {
      throw ConfigError("mesh.type must be structured, file or needle");
    }
    if (c.mesh.nx < 1 || c.mesh.ny < 1) throw ConfigError("mesh.nx and mesh.ny must be >= 1");
    if (c.mesh.type == "file" && c.mesh.path.empty()) throw ConfigError("mesh.path required for file meshes");
    if (c.mesh.refinements < 0) throw ConfigError("mesh.refinements must be >= 0");
  }

  if (j.contains("physics")) {
    const Json& p = j.at("physics");
    if (p.contains("pressure")) c.physics.pressure = detail::parse_pressure(p.at("pressure"));
    read(p, "mu", c.physics.viscosity.mu);
    read(p, "lambda", c.physics.viscosity.lambda);
  }
  try {
    c.physics.viscosity.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }

  if (j.contains("time")) {
    read(j.at("time"), "dt", c.scheme.dt);
    read(j.at("time"), "T_final", c.scheme.t_final);
  }
  if (j.contains("solver")) {
    const Json& s = j.at("solver");
    read(s, "picard_tol", c.scheme.picard_tol);
    read(s, "picard_max_iters", c.scheme.picard_max_iters);
    read(s, "linear_tol", c.scheme.linear_tol);
    read(s, "dt_backoff_factor", c.scheme.dt_backoff_factor);
    read(s, "max_backoffs", c.scheme.max_backoffs);
    std::string kind = "direct";
    read(s, "linear_solver", kind);
    if (kind == "direct") {
      c.scheme.linear_solver = LinearSolverKind::Direct;
    } else if (kind == "iterative") {
      c.scheme.linear_solver = LinearSolverKind::Iterative;
    } else {
      throw ConfigError("solver.linear_solver must be direct or iterative");
    }
  }
  read(j, "theta_min", c.scheme.theta_min);
  c.scheme.validate();

  if (j.contains("initial_data")) {
    const Json& i = j.at("initial_data");
    read(i, "type", c.initial.type);
    read(i, "density", c.initial.density);
    read(i, "amplitude", c.initial.amplitude);
    read(i, "width", c.initial.width);
    read(i, "velocity_amplitude", c.initial.velocity_amplitude);
    if (i.contains("center")) {
      const auto v = i.at("center").get<std::vector<double>>();
      if (v.size() != 2) throw ConfigError("initial_data.center must have two entries");
      c.initial.center = Vec2(v[0], v[1]);
    }
    if (c.initial.type != "rest" && c.initial.type != "gaussian_bump" && c.initial.type != "manufactured") {
      throw ConfigError("initial_data.type must be rest, gaussian_bump or manufactured");
    }
    if (!(c.initial.width > 0.0)) throw ConfigError("initial_data.width must be positive");
  }
  if (j.contains("manufactured")) {
    const Json& m = j.at("manufactured");
    read(m, "enabled", c.manufactured);
    read(m, "density_amplitude", c.manufactured_params.density_amplitude);
    read(m, "velocity_amplitude", c.manufactured_params.velocity_amplitude);
    read(m, "swirl_amplitude", c.manufactured_params.swirl_amplitude);
    read(m, "decay", c.manufactured_params.decay);
    if (!(std::abs(c.manufactured_params.density_amplitude) < 1.0)) {
      throw ConfigError("manufactured.density_amplitude must lie in (-1, 1) to keep r > 0");
    }
  }
  if (c.initial.type == "manufactured") c.manufactured = true;

  if (j.contains("convergence")) {
    const Json& v = j.at("convergence");
    read(v, "levels", c.convergence.levels);
    read(v, "base_nx", c.convergence.base_nx);
    read(v, "dt_coefficient", c.convergence.dt_coefficient);
    if (c.convergence.base_nx < 1 || !(c.convergence.dt_coefficient > 0.0)) {
      throw ConfigError("convergence.base_nx and convergence.dt_coefficient must be positive");
    }
  }
  c.probes.seed = c.seed;
  if (j.contains("inequalities")) {
    const Json& q = j.at("inequalities");
    read(q, "levels", c.probes.levels);
    read(q, "samples", c.probes.samples);
    read(q, "base_nx", c.probes.base_nx);
    read(q, "sobolev_q", c.probes.sobolev_q);
    read(q, "p", c.probes.p);
    read(q, "band", c.probes.band);
    if (c.probes.samples < 1 || c.probes.base_nx < 1) throw ConfigError("inequalities.samples and base_nx must be >= 1");
    if (!(c.probes.p >= 1.0) || !(c.probes.sobolev_q >= 1.0)) throw ConfigError("inequalities.p and sobolev_q must be >= 1");
  }
  c.probes.theta_min = c.scheme.theta_min;

  if (j.contains("output")) {
    const Json& o = j.at("output");
    std::string dir = c.output.directory.string();
    read(o, "directory", dir);
    c.output.directory = dir;
    read(o, "vtk_every", c.output.vtk_every);
    if (c.output.vtk_every < 0) throw ConfigError("output.vtk_every must be >= 0");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path.string());
  Json j;
  try {
    j = Json::parse(in, nullptr, true, true);
  } catch (const Json::parse_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  ExperimentConfig c = parse_config(j);
  // relative mesh paths are resolved against the config file
  if (c.mesh.type == "file" && std::filesystem::path(c.mesh.path).is_relative()) {
    c.mesh.path = (path.parent_path() / c.mesh.path).string();
  }
  return c;
}

inline MeshPtr make_mesh(const MeshSpec& spec) {
  MeshPtr mesh;
  if (spec.type == "file") {
    mesh = read_mesh_ascii(spec.path);
  } else if (spec.type == "needle") {
    mesh = needle_mesh(spec.nx, spec.aspect);
  } else {
    mesh = structured_triangulation(spec.nx, spec.ny, spec.box);
  }
  for (int i = 0; i < spec.refinements; ++i) mesh = refine_uniform(*mesh);
  return mesh;
}

}  // namespace cns
