#pragma once

#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fmcf/flow_solver.hpp"
#include "fmcf/problems.hpp"

// Run configuration: plain-text key=value files with '#' comments, every key
// overridable from the command line. Unknown keys and malformed values are
// rejected with the offending line number.

namespace fmcf {

struct RunConfig {
  std::string problem = "manufactured_sphere";
  std::string scheme = "coupled";
  int q = 2;
  double tau = 0.05;
  double T = 1.0;
  int level = 2;
  int degree = 2;
  std::uint64_t seed = 1;
  std::string outdir = "out";
  int output_every = 1;
  double cg_tol = 1e-10;
  int cg_maxit = 20000;
  double eps = 1.0;
  double R0 = 1.0;
  double R1 = 2.0;
  std::string g_assembly = "interp";
  std::string startup = "cascade";
  bool allow_q6 = false;
  double jitter = 0.0;  // tangential mesh symmetry-breaking, fraction of local edge

  // tumour model
  double gamma = 30.0;
  double a = 0.1;
  double b = 0.9;
  double d = 10.0;
  double delta = 0.1;
  double amp = 1e-2;
  double pre_T = 5.0;

  // converge ladders
  std::vector<int> levels = {1, 2, 3, 4};
  std::vector<double> taus = {0.2, 0.1, 0.05, 0.025, 0.0125};

  SolverConfig solver_config() const {
    SolverConfig sc;
    sc.tau = tau;
    sc.T = T;
    sc.q = q;
    if (scheme == "coupled")
      sc.scheme = SolverConfig::Scheme::Coupled;
    else if (scheme == "conservative")
      sc.scheme = SolverConfig::Scheme::Conservative;
    else
      throw std::invalid_argument("scheme must be 'coupled' or 'conservative'");
    if (startup == "cascade")
      sc.startup = SolverConfig::Startup::Cascade;
    else if (startup == "exact")
      sc.startup = SolverConfig::Startup::ExactInjection;
    else
      throw std::invalid_argument("startup must be 'cascade' or 'exact'");
    if (g_assembly == "interp")
      sc.g_assembly = GAssemblyMode::InterpolateFirst;
    else if (g_assembly == "quadrature")
      sc.g_assembly = GAssemblyMode::QuadraturePoints;
    else
      throw std::invalid_argument("g_assembly must be 'interp' or 'quadrature'");
    sc.cg_tol = cg_tol;
    sc.cg_maxit = cg_maxit;
    sc.output_every = output_every;
    sc.allow_q6 = allow_q6;
    sc.validate();
    if (degree != 1 && degree != 2) throw std::invalid_argument("degree must be 1 or 2");
    if (level < 0) throw std::invalid_argument("level must be >= 0");
    return sc;
  }

  TumourParams tumour_params() const {
    TumourParams p;
    p.d = d;
    p.a = a;
    p.b = b;
    p.delta = delta;
    p.eps = eps;
    p.gamma = gamma;
    p.perturbation_amplitude = amp;
    p.seed = seed;
    return p;
  }

  ProblemDefinition make_problem() const {
    if (problem == "manufactured_sphere")
      return manufactured_sphere_problem(eps, R0, R1, ForcingKind::Linear);
    if (problem == "manufactured_sphere_halfsq")
      return manufactured_sphere_problem(eps, R0, R1, ForcingKind::HalfSquare);
    if (problem == "pure_mcf_sphere") return pure_mcf_sphere_problem(eps, R0);
    if (problem == "tumour") return tumour_problem(tumour_params());
    throw std::invalid_argument("unknown problem '" + problem + "'");
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& v) {
  std::size_t pos = 0;
  const double x = std::stod(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not a number: '" + v + "'");
  return x;
}

inline long parse_int(const std::string& v) {
  std::size_t pos = 0;
  const long x = std::stol(v, &pos);
  if (pos != v.size()) throw std::invalid_argument("not an integer: '" + v + "'");
  return x;
}

inline bool parse_bool(const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::invalid_argument("not a boolean: '" + v + "'");
}

template <class T, class Parse>
std::vector<T> parse_list(const std::string& v, Parse parse) {
  std::vector<T> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse(trim(item)));
  if (out.empty()) throw std::invalid_argument("empty list");
  return out;
}

}  // namespace detail

// Applies one key=value pair; throws std::invalid_argument on unknown keys or
// malformed values.
inline void apply_config_key(RunConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "problem") c.problem = value;
  else if (key == "scheme") c.scheme = value;
  else if (key == "q") c.q = static_cast<int>(parse_int(value));
  else if (key == "tau") c.tau = parse_double(value);
  else if (key == "T") c.T = parse_double(value);
  else if (key == "level") c.level = static_cast<int>(parse_int(value));
  else if (key == "degree") c.degree = static_cast<int>(parse_int(value));
  else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_int(value));
  else if (key == "outdir") c.outdir = value;
  else if (key == "output_every") c.output_every = static_cast<int>(parse_int(value));
  else if (key == "cg_tol") c.cg_tol = parse_double(value);
  else if (key == "cg_maxit") c.cg_maxit = static_cast<int>(parse_int(value));
  else if (key == "eps") c.eps = parse_double(value);
  else if (key == "R0") c.R0 = parse_double(value);
  else if (key == "R1") c.R1 = parse_double(value);
  else if (key == "g_assembly") c.g_assembly = value;
  else if (key == "startup") c.startup = value;
  else if (key == "allow_q6") c.allow_q6 = parse_bool(value);
  else if (key == "jitter") c.jitter = parse_double(value);
  else if (key == "gamma") c.gamma = parse_double(value);
  else if (key == "a") c.a = parse_double(value);
  else if (key == "b") c.b = parse_double(value);
  else if (key == "d") c.d = parse_double(value);
  else if (key == "delta") c.delta = parse_double(value);
  else if (key == "amp") c.amp = parse_double(value);
  else if (key == "pre_T") c.pre_T = parse_double(value);
  else if (key == "levels")
    c.levels = parse_list<int>(value, [](const std::string& s) { return static_cast<int>(parse_int(s)); });
  else if (key == "taus")
    c.taus = parse_list<double>(value, [](const std::string& s) { return parse_double(s); });
  else
    throw std::invalid_argument("unknown key '" + key + "'");
}

inline void parse_config_file(const std::string& path, RunConfig& config) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": expected key=value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    try {
      apply_config_key(config, key, value);
    } catch (const std::exception& err) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + err.what());
    }
  }
}

// Effective configuration echo; a run can be reproduced bit-exactly from it.
inline void write_provenance(std::ostream& out, const RunConfig& c, const std::string& subcommand) {
  char buf[64];
  auto fmt = [&buf](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  out << "# effective configuration (subcommand: " << subcommand << ")\n";
  out << "problem = " << c.problem << "\nscheme = " << c.scheme << "\nq = " << c.q
      << "\ntau = " << fmt(c.tau) << "\nT = " << fmt(c.T) << "\nlevel = " << c.level
      << "\ndegree = " << c.degree << "\nseed = " << c.seed << "\noutdir = " << c.outdir
      << "\noutput_every = " << c.output_every << "\ncg_tol = " << fmt(c.cg_tol)
      << "\ncg_maxit = " << c.cg_maxit << "\neps = " << fmt(c.eps) << "\nR0 = " << fmt(c.R0)
      << "\nR1 = " << fmt(c.R1) << "\ng_assembly = " << c.g_assembly
      << "\nstartup = " << c.startup << "\nallow_q6 = " << (c.allow_q6 ? 1 : 0)
      << "\njitter = " << fmt(c.jitter)
      << "\ngamma = " << fmt(c.gamma) << "\na = " << fmt(c.a) << "\nb = " << fmt(c.b)
      << "\nd = " << fmt(c.d) << "\ndelta = " << fmt(c.delta) << "\namp = " << fmt(c.amp)
      << "\npre_T = " << fmt(c.pre_T) << "\nlevels = ";
  for (std::size_t i = 0; i < c.levels.size(); ++i) out << (i ? "," : "") << c.levels[i];
  out << "\ntaus = ";
  for (std::size_t i = 0; i < c.taus.size(); ++i) out << (i ? "," : "") << fmt(c.taus[i]);
  out << '\n';
}

}  // namespace fmcf
