#pragma once

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "cns/diagnostics.hpp"
#include "cns/errors.hpp"
#include "cns/inequality_lab.hpp"
#include "cns/mesh.hpp"
#include "cns/scheme.hpp"

namespace cns {

/// Legacy VTK snapshot of a state. Each cell gets its own three points so the
/// cellwise affine CR velocity is sampled without averaging across faces.
inline void write_state_vtk(std::ostream& out, const State& s, double time) {
  const Mesh& mesh = *s.rho.mesh();
  const Index nc = mesh.num_cells();
  out << std::setprecision(17);
  out << "# vtk DataFile Version 3.0\nstate n=" << s.time_index << " t=" << time << "\nASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << 3 * nc << " double\n";
  for (const Cell& c : mesh.cells()) {
    for (Index v : c.vertices) out << mesh.vertex(v).x() << ' ' << mesh.vertex(v).y() << " 0\n";
  }
  out << "CELLS " << nc << ' ' << 4 * nc << '\n';
  for (Index k = 0; k < nc; ++k) out << "3 " << 3 * k << ' ' << 3 * k + 1 << ' ' << 3 * k + 2 << '\n';
  out << "CELL_TYPES " << nc << '\n';
  for (Index k = 0; k < nc; ++k) out << "5\n";
  out << "CELL_DATA " << nc << "\nSCALARS density double 1\nLOOKUP_TABLE default\n";
  for (Index k = 0; k < nc; ++k) out << s.rho[k] << '\n';
  out << "VECTORS velocity_mean double\n";
  for (Index k = 0; k < nc; ++k) {
    const Vec2 u = s.u.cell_mean(k);
    out << u.x() << ' ' << u.y() << " 0\n";
  }
  out << "POINT_DATA " << 3 * nc << "\nVECTORS velocity double\n";
  for (Index k = 0; k < nc; ++k) {
    for (int i = 0; i < 3; ++i) {
      Eigen::Vector3d bary = Eigen::Vector3d::Zero();
      bary[i] = 1.0;
      const Vec2 u = s.u.eval(k, bary);
      out << u.x() << ' ' << u.y() << " 0\n";
    }
  }
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out << std::setprecision(17);
  return out;
}

inline void write_energy_csv(std::ostream& out, const EnergyLedger& ledger) {
  out << "n,time,kinetic,internal,viscous,d_time_u,d_time_rho,d_space_u,d_space_rho,source_work,identity_residual,"
         "cumulative_residual\n";
  for (const EnergyStep& e : ledger.steps) {
    out << e.n << ',' << e.time << ',' << e.kinetic << ',' << e.internal << ',' << e.viscous << ',' << e.d_time_u << ','
        << e.d_time_rho << ',' << e.d_space_u << ',' << e.d_space_rho << ',' << e.source_work << ','
        << e.identity_residual << ',' << e.cumulative_residual << '\n';
  }
}

inline void write_mass_csv(std::ostream& out, const MassHistory& h, double dt) {
  out << "n,time,mass,relative_deviation\n";
  for (std::size_t n = 0; n < h.mass.size(); ++n) {
    out << n << ',' << n * dt << ',' << h.mass[n] << ',' << (h.mass[n] - h.mass[0]) / h.mass[0] << '\n';
  }
}

inline void write_relative_energy_csv(std::ostream& out, const RelEnergyReport& rep) {
  out << "m,relative_energy,lhs,rhs,slack,t1_viscous,t2_time,t3_convection,t4_pressure,t5_reference_time,"
         "t6_upwind_potential,source\n";
  for (const RelEnergyStep& s : rep.steps) {
    const RelEnergyTerms& t = s.terms;
    out << s.m << ',' << s.relative_energy << ',' << s.lhs << ',' << s.rhs << ',' << s.slack << ',' << t.viscous_cross
        << ',' << t.time_derivative << ',' << t.convection << ',' << t.pressure << ',' << t.reference_time << ','
        << t.upwind_potential << ',' << t.source << '\n';
  }
}

inline void write_probe_csv(std::ostream& out, const ProbeReport& rep) {
  out << "level,h,theta,max_ratio,min_ratio\n";
  for (const ProbeLevel& l : rep.levels) {
    out << l.level << ',' << l.h << ',' << l.theta << ',' << l.max_ratio << ',' << l.min_ratio << '\n';
  }
}

}  // namespace cns
