#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fmcf/analysis.hpp"
#include "fmcf/assembly.hpp"
#include "fmcf/config.hpp"
#include "fmcf/flow_solver.hpp"
#include "fmcf/mesh_io.hpp"
#include "fmcf/problems.hpp"
#include "fmcf/surface_mesh.hpp"

namespace fmcf::cli {

namespace detail {

inline std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Every config key is also a command-line option; values given on the command
// line override the config file.
struct KeyOptions {
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    static const std::vector<std::pair<std::string, std::string>> keys = {
        {"problem", "problem name (manufactured_sphere, manufactured_sphere_halfsq, pure_mcf_sphere, tumour)"},
        {"scheme", "time scheme: coupled | conservative"},
        {"q", "BDF order (1..5)"},
        {"tau", "time step"},
        {"T", "final time"},
        {"level", "icosphere refinement level"},
        {"degree", "finite element degree k (1 or 2)"},
        {"seed", "RNG seed"},
        {"outdir", "output directory"},
        {"output_every", "output cadence in steps"},
        {"cg_tol", "linear solver relative tolerance"},
        {"cg_maxit", "linear solver iteration cap"},
        {"eps", "mobility parameter"},
        {"R0", "initial sphere radius"},
        {"R1", "logistic carrying radius"},
        {"g_assembly", "velocity-law assembly: interp | quadrature"},
        {"startup", "starting values: cascade | exact"},
        {"allow_q6", "allow BDF order 6 (outside the supported range)"},
        {"jitter", "tangential mesh jitter (fraction of local edge length)"},
        {"gamma", "tumour kinetics strength"},
        {"a", "tumour kinetics parameter a"},
        {"b", "tumour kinetics parameter b"},
        {"d", "tumour diffusivity of u2"},
        {"delta", "tumour velocity forcing coefficient"},
        {"amp", "tumour initial perturbation amplitude"},
        {"pre_T", "tumour pre-integration span on the fixed sphere"},
        {"levels", "mesh levels for converge (comma list)"},
        {"taus", "time steps for converge (comma list)"},
    };
    for (const auto& [key, help] : keys)
      app->add_option("--" + key, values[key], help)->group("Config keys");
  }

  void apply(const CLI::App* app, RunConfig& cfg) const {
    for (const auto& [key, value] : values)
      if (app->count("--" + key) > 0) apply_config_key(cfg, key, value);
  }
};

struct DiagnosticsWriter {
  std::ofstream out;
  long step = 0;

  explicit DiagnosticsWriter(const std::string& path) : out(path) {
    if (!out) throw std::runtime_error("cannot open " + path);
    out << "step,t,cg_iterations,min_gram,max_rel_residual,norm_v,norm_nu,norm_H,u_min,u_max\n";
  }
  void operator()(const FlowState& s, const StepReport& rep) {
    out << step++ << ',' << fmt(s.t) << ',' << rep.cg_iterations << ',' << fmt(rep.min_gram_new)
        << ',' << fmt(rep.max_rel_residual) << ',' << fmt(s.v.norm()) << ',' << fmt(s.w.nu.norm())
        << ',' << fmt(s.w.H.norm()) << ',' << fmt(s.w.u.minCoeff()) << ',' << fmt(s.w.u.maxCoeff())
        << '\n';
  }
};

inline std::vector<NamedField> state_fields(const SurfaceMesh& mesh, const FlowState& s, int m) {
  std::vector<NamedField> fields;
  const int N = mesh.n_nodes;
  for (int c = 0; c < m; ++c)
    fields.push_back({m == 1 ? "u" : "u" + std::to_string(c + 1),
                      s.w.u.segment(c * N, N).eval()});
  fields.push_back({"H", s.w.H});
  fields.push_back({"nu", s.w.nu});
  fields.push_back({"v", s.v});
  return fields;
}

inline void write_snapshot(const std::string& outdir, int index, const SurfaceMesh& mesh,
                           const FlowState& s, int m) {
  char name[64];
  std::snprintf(name, sizeof(name), "surface_%04d.vtk", index);
  write_vtk(outdir + "/" + name, mesh, s.x, state_fields(mesh, s, m));
}

inline void prepare_outdir(const RunConfig& cfg, const std::string& subcommand) {
  std::filesystem::create_directories(cfg.outdir);
  std::ofstream prov(cfg.outdir + "/provenance.cfg");
  if (!prov) throw std::runtime_error("cannot write provenance file in " + cfg.outdir);
  write_provenance(prov, cfg, subcommand);
}

inline int cmd_mesh(const RunConfig& cfg) {
  prepare_outdir(cfg, "mesh");
  const auto [mesh, x] = make_sphere_mesh(cfg.level, cfg.R0, cfg.degree, cfg.jitter);
  write_mesh(cfg.outdir + "/mesh.txt", mesh, x);
  write_vtk(cfg.outdir + "/mesh.vtk", mesh, x);
  const ShapeReport rep = shape_report(mesh, x);
  std::cout << "mesh: level " << cfg.level << ", degree " << cfg.degree << ", " << mesh.n_nodes
            << " nodes, " << mesh.n_elements() << " elements\n"
            << "euler characteristic: " << euler_characteristic(mesh)
            << ", boundary edges: " << boundary_edge_count(mesh) << '\n'
            << "h = " << rep.h << ", quality (diam^2/2area) in [" << rep.min_quality << ", "
            << rep.max_quality << "], min gram = " << rep.min_gram << '\n'
            << "wrote " << cfg.outdir << "/mesh.txt\n";
  return 0;
}

inline int cmd_run(const RunConfig& cfg) {
  const ProblemDefinition problem = cfg.make_problem();
  if (!problem.exact) {
    std::cerr << "problem '" << cfg.problem << "' has no interpolable initial data; "
              << "use the tumour subcommand\n";
    return 1;
  }
  const SolverConfig solver = cfg.solver_config();
  prepare_outdir(cfg, "run");
  const auto [mesh, x0] = make_sphere_mesh(cfg.level, problem.exact->R0, cfg.degree, cfg.jitter);
  // the tau <= C0 h step-size condition of the theory is reported, not enforced
  std::cout << "h = " << mesh_width(mesh, x0) << ", tau/h = " << cfg.tau / mesh_width(mesh, x0)
            << '\n';
  const FlowState initial = make_initial_state(problem, mesh, x0, solver);

  DiagnosticsWriter diag(cfg.outdir + "/diagnostics.csv");
  ErrorTracker tracker(problem, mesh, x0);
  std::ofstream errcsv(cfg.outdir + "/errors.csv");
  errcsv << "t,err_x,err_v,err_nu,err_H,err_u\n";
  const RunResult result =
      run(mesh, problem, initial, solver, [&](const FlowState& s, const StepReport& rep) {
        diag(s, rep);
        const ErrorRecord r = tracker.observe(s);
        errcsv << fmt(r.t) << ',' << fmt(r.x) << ',' << fmt(r.v) << ',' << fmt(r.nu) << ','
               << fmt(r.H) << ',' << fmt(r.u) << '\n';
      });

  write_snapshot(cfg.outdir, 0, mesh, initial, problem.m);
  for (std::size_t i = 0; i < result.outputs.size(); ++i)
    write_snapshot(cfg.outdir, static_cast<int>(i) + 1, mesh, result.outputs[i], problem.m);

  const ErrorMaxima& e = tracker.maxima();
  std::cout << "L_inf(H1) errors: x " << e.x << ", v " << e.v << ", nu " << e.nu << ", H " << e.H
            << ", u " << e.u << '\n';
  if (!result.completed) {
    std::cerr << "run aborted: " << result.error << " (last good state saved)\n";
    return 1;
  }
  std::cout << "completed " << result.steps_total << " steps to T = " << fmt(cfg.T) << '\n';
  return 0;
}

inline int cmd_converge(const RunConfig& cfg) {
  const ProblemDefinition problem = cfg.make_problem();
  prepare_outdir(cfg, "converge");
  StudyConfig study;
  study.levels = cfg.levels;
  study.taus = cfg.taus;
  study.degree = cfg.degree;
  study.jitter = cfg.jitter;
  study.solver = cfg.solver_config();
  const StudyResult result = convergence_study(problem, study);

  std::ofstream csv(cfg.outdir + "/eoc.csv");
  write_study_csv(csv, result);

  bool all_ok = true;
  for (const StudyCell& c : result.cells)
    if (!c.ok) {
      all_ok = false;
      std::cerr << "cell level " << c.level << " tau " << c.tau << " failed: " << c.error_message
                << '\n';
    }

  std::cout << "variable  temporal_eoc  spatial_eoc\n";
  for (const std::string& var : error_variables()) {
    std::vector<double> et, pt, es, ps;
    for (std::size_t ti = 0; ti < study.taus.size(); ++ti) {
      const StudyCell& c = result.cell(study.levels.size() - 1, ti);
      if (c.ok) {
        et.push_back(c.errors.by_name(var));
        pt.push_back(c.tau);
      }
    }
    for (std::size_t li = 0; li < study.levels.size(); ++li) {
      const StudyCell& c = result.cell(li, study.taus.size() - 1);
      if (c.ok) {
        es.push_back(c.errors.by_name(var));
        ps.push_back(c.h);
      }
    }
    std::printf("%-9s %12.3f %12.3f\n", var.c_str(), asymptotic_eoc(et, pt),
                asymptotic_eoc(es, ps));
  }
  std::cout << "wrote " << cfg.outdir << "/eoc.csv\n";
  return all_ok ? 0 : 1;
}

inline int cmd_tumour(const RunConfig& cfg) {
  RunConfig tc = cfg;
  tc.problem = "tumour";
  const TumourParams params = tc.tumour_params();
  const ProblemDefinition problem = tumour_problem(params);
  SolverConfig solver = tc.solver_config();
  prepare_outdir(tc, "tumour");

  const auto [mesh, x0] = make_sphere_mesh(tc.level, 1.0, tc.degree, tc.jitter);

  std::ofstream precsv(tc.outdir + "/preintegration.csv");
  precsv << "t,amp_u1\n";
  const int N = mesh.n_nodes;
  const double steady = params.steady_u1();
  const FlowState initial = tumour_initial_data(
      mesh, x0, params, solver, tc.pre_T, [&](double t, const Eigen::VectorXd& u) {
        precsv << fmt(t) << ','
               << fmt((u.segment(0, N).array() - steady).abs().maxCoeff()) << '\n';
      });
  std::cout << "pre-integration done: pattern amplitude max|u1 - (a+b)| = "
            << (initial.w.u.segment(0, N).array() - steady).abs().maxCoeff() << " at t = " << tc.pre_T
            << '\n';

  DiagnosticsWriter diag(tc.outdir + "/diagnostics.csv");
  const RunResult result = run(mesh, problem, initial, solver, std::ref(diag));

  write_snapshot(tc.outdir, 0, mesh, initial, problem.m);
  for (std::size_t i = 0; i < result.outputs.size(); ++i)
    write_snapshot(tc.outdir, static_cast<int>(i) + 1, mesh, result.outputs[i], problem.m);

  if (!result.completed) {
    std::cerr << "tumour run aborted: " << result.error << " (last good state saved)\n";
    return 1;
  }
  std::cout << "completed " << result.steps_total << " steps, min gram determinant "
            << result.min_gram << ", wrote " << result.outputs.size() + 1 << " snapshots\n";
  return 0;
}

}  // namespace detail

inline int run_main(int argc, const char* const* argv) {
  CLI::App app{"forced mean curvature flow coupled to reaction-diffusion on the moving surface"};
  app.require_subcommand(1);

  struct Sub {
    CLI::App* cmd;
    std::string config_path;
    detail::KeyOptions keys;
  };
  std::map<std::string, Sub> subs;
  const std::vector<std::pair<std::string, std::string>> defs = {
      {"run", "integrate one problem and write VTK/CSV artifacts"},
      {"converge", "run the (h,tau) convergence grid and write the EOC table"},
      {"tumour", "pre-integrate tumour initial data, then run the flow"},
      {"mesh", "generate an icosphere mesh and report its quality"},
  };
  for (const auto& [name, help] : defs) {
    Sub& s = subs[name];  // options bind to the in-map object
    s.cmd = app.add_subcommand(name, help);
    s.cmd->add_option("--config", s.config_path, "key=value config file ('#' comments)");
    s.keys.attach(s.cmd);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto& [name, sub] : subs) {
      if (!sub.cmd->parsed()) continue;
      RunConfig cfg;
      if (!sub.config_path.empty()) parse_config_file(sub.config_path, cfg);
      sub.keys.apply(sub.cmd, cfg);
      if (name == "mesh") return detail::cmd_mesh(cfg);
      if (name == "run") return detail::cmd_run(cfg);
      if (name == "converge") return detail::cmd_converge(cfg);
      if (name == "tumour") return detail::cmd_tumour(cfg);
    }
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace fmcf::cli
