// Report and field output for finished runs: estimators.csv (one row per
// slab), report.json (run summary), per-element field snapshots as CSV and
// legacy-VTK unstructured grids, and the mesh in the trimesh text format.
// All floating-point values are printed with 9 significant digits.

#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "richards/driver.hpp"

namespace richards {

inline std::string fmt9(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

// Round through the 9-significant-digit decimal representation so that JSON
// serialization emits at most 9 significant digits.
inline double round9(double v) { return std::stod(fmt9(v)); }

// ---------------------------------------------------------------------------
// estimators.csv
// ---------------------------------------------------------------------------
inline const char* kEstimatorsCsvHeader =
    "n,t0,t1,iters,eta_F,eta_JH1,eta_qd_G,eta_qd_F,eta_qd_t,eta_osc,"
    "eta_deg,eta_R,eta_lin1,eta_lin2,eta_LB,dist,eff_LB,err_s_L2,err_psi_H1";

inline std::string estimators_csv(const DriverResult& R) {
  std::ostringstream out;
  out << kEstimatorsCsvHeader << '\n';
  for (size_t n = 0; n < R.rows.size(); ++n) {
    const SlabSummary& r = R.rows[n];
    out << n + 1 << ',' << fmt9(r.t0) << ',' << fmt9(r.t1) << ',' << r.iters
        << ',' << fmt9(r.etaF) << ',' << fmt9(r.etaJH1) << ','
        << fmt9(r.etaQdG) << ',' << fmt9(r.etaQdF) << ',' << fmt9(r.etaQdT)
        << ',' << fmt9(r.etaOsc) << ',' << fmt9(r.etaDeg) << ','
        << fmt9(r.etaR) << ',' << fmt9(r.etaLin1) << ',' << fmt9(r.etaLin2)
        << ',' << fmt9(r.eta_LB) << ',' << fmt9(r.dist) << ','
        << fmt9(r.eff_lb) << ',' << fmt9(r.err_s_l2) << ','
        << fmt9(r.err_psi_h1) << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// report.json
// ---------------------------------------------------------------------------
inline nlohmann::ordered_json report_json(const DriverResult& R) {
  nlohmann::ordered_json j;
  j["schema_version"] = 1;
  j["config"] = {
      {"case", R.config.case_id},
      {"level", R.config.level},
      {"scheme", SlabSolver::scheme_name(R.config.scheme)},
      {"scheme_L", round9(R.config.scheme.L_const)},
      {"scheme_M", round9(R.config.scheme.M)},
      {"stopping", R.config.adaptive ? "adaptive" : "fixed"},
      {"gamma", round9(R.config.gamma)},
      {"fixed_tol", round9(R.config.fixed_tol)},
      {"lambda", round9(R.lambda)},
      {"n_slabs", static_cast<int>(R.run.slabs.size())},
      {"quad_degree", R.config.quad_degree},
      {"s_m_source", R.s_m_source},
      {"deterministic", true},
  };
  j["mesh"] = {{"vertices", R.mesh->n_verts()},
               {"triangles", R.mesh->n_tris()},
               {"h_max", round9(R.mesh->h_max())}};
  nlohmann::ordered_json res;
  res["avg_iters"] = round9(R.run.avg_iters);
  res["eta_ini_L2"] = round9(R.eta_ini_l2);
  res["eta_ini_Hminus"] = round9(R.eta_ini_hm);
  res["eta_L2"] = round9(R.rel.eta_L2);
  res["eta_H1"] = round9(R.rel.eta_H1);
  res["eta_R_final"] = round9(R.rows.empty() ? 0.0 : R.rows.back().etaR);
  if (R.has_exact()) {
    res["E_L2"] = round9(R.em.E_L2);
    res["E_H1"] = round9(R.em.E_H1);
    res["effectivity_L2"] = round9(R.eff_L2);
    res["effectivity_H1"] = round9(R.eff_H1);
    res["final_err_L2"] = round9(R.final_l2);
    res["final_err_Hminus"] = round9(R.final_hm);
  }
  if (!R.etaF_T.empty()) {
    double mn = R.etaF_T[0], mx = R.etaF_T[0];
    for (double v : R.etaF_T) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    res["eta_F_elementwise_min"] = round9(mn);
    res["eta_F_elementwise_max"] = round9(mx);
  }
  if (!R.local_eff.empty()) {
    double mn = R.local_eff[0], mx = R.local_eff[0];
    for (double v : R.local_eff) {
      mn = std::min(mn, v);
      mx = std::max(mx, v);
    }
    res["local_effectivity_min"] = round9(mn);
    res["local_effectivity_max"] = round9(mx);
  }
  j["results"] = res;
  return j;
}

// ---------------------------------------------------------------------------
// Per-element field snapshots
// ---------------------------------------------------------------------------
struct FieldSnapshot {
  double t = 0.0;
  std::vector<std::string> names;          // per-element field names
  std::vector<std::vector<double>> cells;  // one vector per field
  Vector S_nodal;                          // nodal saturation
};

// Snapshot of the slab whose end time is nearest to the requested time.
inline FieldSnapshot field_snapshot(const DriverResult& R, double t_req) {
  size_t best = 0;
  for (size_t n = 1; n < R.rows.size(); ++n)
    if (std::abs(R.rows[n].t1 - t_req) < std::abs(R.rows[best].t1 - t_req))
      best = n;
  FieldSnapshot f;
  f.t = R.rows[best].t1;
  f.names = {"eta_F"};
  f.cells = {R.est[best].etaF[3]};
  const SlabRecord& slab = R.run.slabs[best];
  f.S_nodal = Vector(R.mesh->n_verts());
  for (int v = 0; v < R.mesh->n_verts(); ++v)
    f.S_nodal[v] = R.form.sat(slab.q1[v]);
  std::vector<double> s_cell(R.mesh->n_tris());
  for (int k = 0; k < R.mesh->n_tris(); ++k) {
    double s = 0.0;
    for (int i = 0; i < 3; ++i) s += f.S_nodal[R.mesh->tris[k][i]];
    s_cell[k] = s / 3.0;
  }
  f.names.push_back("saturation_cell");
  f.cells.push_back(s_cell);
  if (!R.local_eff.empty() && best + 1 == R.rows.size()) {
    f.names.push_back("local_effectivity");
    f.cells.push_back(R.local_eff);
  }
  return f;
}

inline std::string fields_csv(const TriMesh& m, const FieldSnapshot& f) {
  std::ostringstream out;
  out << "element,cx,cy";
  for (const auto& n : f.names) out << ',' << n;
  out << '\n';
  for (int k = 0; k < m.n_tris(); ++k) {
    Vec2 c = m.centroid(k);
    out << k << ',' << fmt9(c.x()) << ',' << fmt9(c.y());
    for (const auto& field : f.cells) out << ',' << fmt9(field[k]);
    out << '\n';
  }
  return out.str();
}

inline std::string fields_vtk(const TriMesh& m, const FieldSnapshot& f) {
  std::ostringstream out;
  out << "# vtk DataFile Version 3.0\n";
  out << "fields at t=" << fmt9(f.t) << '\n';
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << m.n_verts() << " double\n";
  for (const auto& v : m.verts)
    out << fmt9(v.x()) << ' ' << fmt9(v.y()) << " 0\n";
  out << "CELLS " << m.n_tris() << ' ' << 4 * m.n_tris() << '\n';
  for (const auto& t : m.tris)
    out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  out << "CELL_TYPES " << m.n_tris() << '\n';
  for (int k = 0; k < m.n_tris(); ++k) out << "5\n";
  out << "CELL_DATA " << m.n_tris() << '\n';
  for (size_t i = 0; i < f.names.size(); ++i) {
    out << "SCALARS " << f.names[i] << " double 1\nLOOKUP_TABLE default\n";
    for (double v : f.cells[i]) out << fmt9(v) << '\n';
  }
  out << "POINT_DATA " << m.n_verts() << '\n';
  out << "SCALARS saturation double 1\nLOOKUP_TABLE default\n";
  for (int v = 0; v < m.n_verts(); ++v) out << fmt9(f.S_nodal[v]) << '\n';
  return out.str();
}

// ---------------------------------------------------------------------------
// File emission
// ---------------------------------------------------------------------------
inline void write_text(const std::filesystem::path& path,
                       const std::string& content) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << content;
}

// Writes estimators.csv, report.json, mesh.trimesh, and (for each requested
// time) fields/<t>.vtk and fields/<t>.csv; `formats` selects vtk/csv/both.
inline void write_run_outputs(const DriverResult& R,
                              const std::filesystem::path& dir,
                              const std::vector<double>& field_times = {},
                              const std::string& formats = "both") {
  namespace fs = std::filesystem;
  if (formats != "vtk" && formats != "csv" && formats != "both")
    throw std::invalid_argument("unknown field format: " + formats);
  fs::create_directories(dir);
  write_text(dir / "estimators.csv", estimators_csv(R));
  write_text(dir / "report.json", report_json(R).dump(2) + "\n");
  save_mesh(*R.mesh, (dir / "mesh.trimesh").string());
  std::vector<double> times = field_times;
  if (times.empty()) times.push_back(R.spec.T);
  fs::create_directories(dir / "fields");
  for (double t : times) {
    FieldSnapshot f = field_snapshot(R, t);
    std::string stem = fmt9(f.t);
    if (formats != "csv")
      write_text(dir / "fields" / (stem + ".vtk"), fields_vtk(*R.mesh, f));
    if (formats != "vtk")
      write_text(dir / "fields" / (stem + ".csv"), fields_csv(*R.mesh, f));
  }
}

// ---------------------------------------------------------------------------
// Fixed-vs-adaptive linearization study (one row per level and stopping rule)
// ---------------------------------------------------------------------------
struct StudyRow {
  int level = 0;
  bool adaptive = false;
  double avg_iters = 0, eta_lin1 = 0, eta_lin2 = 0, eta_R = 0;
};

// Lean pipeline for the study: estimators only on the final slab.
inline StudyRow study_entry(int level, bool adaptive, double gamma = 0.1,
                            double fixed_tol = 1e-4) {
  CaseSpec spec = case_nondegenerate();
  Formulation form = pressure_form(spec.model);
  TriMesh mesh = spec.mesh(level);
  PermeabilityField Kb(spec.K_regions);
  QuadRule rule = tri_rule(10);
  SlabSolver solver(mesh, Kb, form, spec.source, spec.grav, rule);
  EstimatorEngine eng(mesh, Kb, form, spec.source, spec.grav, rule);
  RTN2Space rt2(mesh);
  SchemeSpec sch;  // modified L-scheme, M = 1
  RunConfig rc;
  rc.T = spec.T;
  rc.n_slabs = 25 * level;
  rc.scheme = sch;
  rc.stop.adaptive = adaptive;
  rc.stop.gamma = gamma;
  rc.stop.fixed_tol = fixed_tol;
  rc.bc = spec.bc;
  rc.s0 = spec.s0;
  RunResult run = run_time_loop(solver, rc,
                                adaptive ? eng.adaptive_callback(rt2)
                                         : nullptr);
  const SlabRecord& slab = run.slabs.back();
  SlabFluxData data = solver.flux_data(sch, slab.tau, slab.t1, slab.q0,
                                       slab.q_pre, slab.q1);
  EquilibratedFlux sigma = equilibrate_flux(rt2, Kb, data, rule);
  SlabEstimators E = eng.slab_estimators(slab, data, sigma, adaptive);
  StudyRow row;
  row.level = level;
  row.adaptive = adaptive;
  row.avg_iters = run.avg_iters;
  row.eta_R = E.etaR[3];
  if (adaptive) {
    row.eta_lin1 = slab.eta_lin1.back();
    row.eta_lin2 = slab.eta_lin2.back();
  } else {
    // fixed stopping records no traces; measure the estimators of the
    // accepted iteration directly
    solver.linearization_estimators(sch, slab.tau, slab.t1, slab.q_pre,
                                    slab.q1, &row.eta_lin1, &row.eta_lin2);
  }
  return row;
}

inline std::string study_csv(const std::vector<StudyRow>& rows) {
  std::ostringstream out;
  out << "level,stopping,avg_iters,eta_lin1,eta_lin2,eta_R\n";
  for (const auto& r : rows)
    out << r.level << ',' << (r.adaptive ? "adaptive" : "fixed") << ','
        << fmt9(r.avg_iters) << ',' << fmt9(r.eta_lin1) << ','
        << fmt9(r.eta_lin2) << ',' << fmt9(r.eta_R) << '\n';
  return out.str();
}

}  // namespace richards
