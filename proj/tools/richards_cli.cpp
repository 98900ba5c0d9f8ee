// Command-line front end for the unsaturated-flow solver and its a
// posteriori error estimators.
//
// Subcommands:
//   run           solve one benchmark case and write estimators.csv,
//                 report.json, mesh.trimesh, and fields/<t>.{vtk,csv}
//   study-table3  fixed vs adaptive linearization stopping on the
//                 nondegenerate case at levels 1, 2, 4
//   emit-fields   solve and write only the field snapshots
//   mesh-gen      write the mesh of a case/level as mesh.trimesh
//
// Options may also come from a JSON config file (flat keys, same names as
// the long flags with '-' replaced by '_'); explicit flags take precedence.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "richards/report.hpp"

namespace fs = std::filesystem;
using richards::DriverConfig;
using richards::DriverResult;
using richards::fmt9;

namespace {

struct CliOptions {
  DriverConfig cfg;
  std::string scheme = "modified_l_scheme";
  std::string stopping = "fixed";  // "fixed" or "adaptive"
  std::string out = "out";
  std::string config_file;
  std::string format = "both";  // field output: vtk | csv | both
  std::vector<double> field_times;
};

void apply_config_file(CliOptions& o, const CLI::App& app) {
  if (o.config_file.empty()) return;
  std::ifstream in(o.config_file);
  if (!in) throw CLI::ValidationError("--config", "cannot open " + o.config_file);
  nlohmann::json j = nlohmann::json::parse(in);
  // a key from the file applies only when the flag was not given explicitly
  auto fresh = [&](const char* flag) {
    const CLI::Option* opt = app.get_option_no_throw(flag);
    return opt == nullptr || opt->count() == 0;
  };
  if (j.contains("case") && fresh("--case")) o.cfg.case_id = j["case"];
  if (j.contains("level") && fresh("--level")) o.cfg.level = j["level"];
  if (j.contains("scheme") && fresh("--scheme")) o.scheme = j["scheme"];
  if (j.contains("scheme_L") && fresh("--scheme-L"))
    o.cfg.scheme.L_const = j["scheme_L"];
  if (j.contains("scheme_M") && fresh("--scheme-M"))
    o.cfg.scheme.M = j["scheme_M"];
  if (j.contains("stopping") && fresh("--adaptive") && fresh("--fixed-tol"))
    o.stopping = j["stopping"];
  if (j.contains("gamma") && fresh("--adaptive")) o.cfg.gamma = j["gamma"];
  if (j.contains("fixed_tol") && fresh("--fixed-tol"))
    o.cfg.fixed_tol = j["fixed_tol"];
  if (j.contains("lambda") && fresh("--lambda")) o.cfg.lambda = j["lambda"];
  if (j.contains("n_slabs") && fresh("--n-slabs"))
    o.cfg.n_slabs = j["n_slabs"];
  if (j.contains("quad_degree") && fresh("--quad-degree"))
    o.cfg.quad_degree = j["quad_degree"];
  if (j.contains("local") && fresh("--local"))
    o.cfg.compute_local = j["local"];
  if (j.contains("out") && fresh("--out")) o.out = j["out"];
  if (j.contains("format") && fresh("--format")) o.format = j["format"];
  if (j.contains("field_times") && fresh("--times"))
    o.field_times = j["field_times"].get<std::vector<double>>();
}

void finalize(CliOptions& o, const CLI::App& app) {
  apply_config_file(o, app);
  o.cfg.scheme = richards::parse_scheme(o.scheme);
  if (o.cfg.scheme.kind == richards::SchemeKind::modified_l_scheme &&
      o.cfg.scheme.M <= 0)
    o.cfg.scheme.M = 1.0;
  if (o.stopping != "fixed" && o.stopping != "adaptive")
    throw CLI::ValidationError("stopping", "must be fixed or adaptive");
  o.cfg.adaptive = (o.stopping == "adaptive");
}

void add_common_flags(CLI::App* sub, CliOptions& o) {
  sub->add_option("--case", o.cfg.case_id,
                  "benchmark case: nondegenerate | degenerate | realistic");
  sub->add_option("--level", o.cfg.level, "refinement level (h = 0.2 / level)");
  sub->add_option("--scheme", o.scheme,
                  "linearization: picard | modified_picard | newton | "
                  "jaeger_kacur | l_scheme | modified_l_scheme");
  sub->add_option("--scheme-L", o.cfg.scheme.L_const, "L-scheme constant");
  sub->add_option("--scheme-M", o.cfg.scheme.M, "modified L-scheme constant");
  sub->add_option("--fixed-tol", o.cfg.fixed_tol,
                  "fixed stopping tolerance on the iteration increment")
      ->expected(1);
  sub->add_option_function<double>(
         "--adaptive",
         [&o](double g) {
           o.stopping = "adaptive";
           o.cfg.gamma = g;
         },
         "adaptive stopping with factor gamma");
  sub->add_option("--lambda", o.cfg.lambda,
                  "decay rate of the error measure (<= 0: case default)");
  sub->add_option("--n-slabs", o.cfg.n_slabs,
                  "number of time slabs (<= 0: 25 * level)");
  sub->add_option("--quad-degree", o.cfg.quad_degree,
                  "polynomial degree of the triangle quadrature");
  sub->add_flag("--local", o.cfg.compute_local,
                "compute local effectivity indices on the final slab");
  sub->add_option("--out", o.out, "output directory");
  sub->add_option("--config", o.config_file, "JSON config file (flat keys)");
}

void add_field_flags(CLI::App* sub, CliOptions& o) {
  sub->add_option("--times", o.field_times,
                  "snapshot times (nearest slab end; default: T)");
  sub->add_option("--format", o.format, "field file format: vtk | csv | both");
}

DriverResult solve(const CliOptions& o) {
  std::cerr << "case=" << o.cfg.case_id << " level=" << o.cfg.level
            << " scheme=" << richards::SlabSolver::scheme_name(o.cfg.scheme)
            << " stopping=" << (o.cfg.adaptive ? "adaptive" : "fixed")
            << "\n";
  DriverResult R = richards::run_case(o.cfg);
  std::cerr << "done: " << R.run.slabs.size() << " slabs, avg "
            << fmt9(R.run.avg_iters) << " iterations/slab\n";
  return R;
}

void print_summary(const DriverResult& R) {
  std::cout << "eta_L2 = " << fmt9(R.rel.eta_L2)
            << "  eta_H1 = " << fmt9(R.rel.eta_H1) << "\n";
  if (R.has_exact())
    std::cout << "E_L2 = " << fmt9(R.em.E_L2) << "  E_H1 = " << fmt9(R.em.E_H1)
              << "  effectivity L2 = " << fmt9(R.eff_L2)
              << "  H1 = " << fmt9(R.eff_H1) << "\n";
  if (!R.rows.empty())
    std::cout << "eta_R(T) = " << fmt9(R.rows.back().etaR) << "\n";
}

int cmd_run(CliOptions& o) {
  DriverResult R = solve(o);
  richards::write_run_outputs(R, o.out, o.field_times, o.format);
  print_summary(R);
  std::cout << "wrote " << o.out << "/estimators.csv, report.json, "
            << "mesh.trimesh, fields/\n";
  return 0;
}

int cmd_study(CliOptions& o) {
  std::vector<richards::StudyRow> rows;
  for (bool adaptive : {false, true})
    for (int level : {1, 2, 4}) {
      std::cerr << "study: level=" << level
                << " stopping=" << (adaptive ? "adaptive" : "fixed") << "\n";
      rows.push_back(richards::study_entry(level, adaptive, o.cfg.gamma,
                                           o.cfg.fixed_tol));
    }
  std::string csv = richards::study_csv(rows);
  fs::create_directories(o.out);
  richards::write_text(fs::path(o.out) / "table3.csv", csv);
  std::cout << csv;
  std::cout << "wrote " << o.out << "/table3.csv\n";
  return 0;
}

int cmd_fields(CliOptions& o) {
  DriverResult R = solve(o);
  fs::create_directories(fs::path(o.out) / "fields");
  std::vector<double> times = o.field_times;
  if (times.empty()) times.push_back(R.spec.T);
  for (double t : times) {
    richards::FieldSnapshot f = richards::field_snapshot(R, t);
    std::string stem = fmt9(f.t);
    if (o.format != "csv")
      richards::write_text(fs::path(o.out) / "fields" / (stem + ".vtk"),
                           richards::fields_vtk(*R.mesh, f));
    if (o.format != "vtk")
      richards::write_text(fs::path(o.out) / "fields" / (stem + ".csv"),
                           richards::fields_csv(*R.mesh, f));
    for (size_t i = 0; i < f.names.size(); ++i) {
      double mn = f.cells[i][0], mx = f.cells[i][0];
      for (double v : f.cells[i]) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
      }
      std::cout << "t=" << fmt9(f.t) << " " << f.names[i]
                << ": min=" << fmt9(mn) << " max=" << fmt9(mx) << "\n";
    }
  }
  return 0;
}

int cmd_mesh(CliOptions& o) {
  richards::CaseSpec spec = richards::make_case(o.cfg.case_id);
  richards::TriMesh m = spec.mesh(o.cfg.level);
  fs::create_directories(o.out);
  richards::save_mesh(m, (fs::path(o.out) / "mesh.trimesh").string());
  std::cout << "wrote " << o.out << "/mesh.trimesh (" << m.n_verts()
            << " vertices, " << m.n_tris() << " triangles)\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Finite-element solver for unsaturated flow with guaranteed "
               "a posteriori error bounds"};
  app.require_subcommand(1);
  CliOptions o;

  CLI::App* run = app.add_subcommand("run", "solve a case and write reports");
  add_common_flags(run, o);
  add_field_flags(run, o);

  CLI::App* study = app.add_subcommand(
      "study-table3", "fixed vs adaptive stopping study (nondegenerate case)");
  study->add_option("--fixed-tol", o.cfg.fixed_tol, "fixed stopping tolerance");
  study->add_option_function<double>(
      "--adaptive", [&o](double g) { o.cfg.gamma = g; },
      "adaptive stopping factor gamma");
  study->add_option("--out", o.out, "output directory");

  CLI::App* fields =
      app.add_subcommand("emit-fields", "solve and write field snapshots only");
  add_common_flags(fields, o);
  add_field_flags(fields, o);

  CLI::App* mesh = app.add_subcommand("mesh-gen", "write a case mesh");
  mesh->add_option("--case", o.cfg.case_id, "benchmark case");
  mesh->add_option("--level", o.cfg.level, "refinement level");
  mesh->add_option("--out", o.out, "output directory");

  CLI11_PARSE(app, argc, argv);
  try {
    if (*run) {
      finalize(o, *run);
      return cmd_run(o);
    }
    if (*study) return cmd_study(o);
    if (*fields) {
      finalize(o, *fields);
      return cmd_fields(o);
    }
    if (*mesh) return cmd_mesh(o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
