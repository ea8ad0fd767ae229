#include <catch2/catch.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fmcf/cli.hpp"
#include "fmcf/config.hpp"

using namespace fmcf;
namespace fs = std::filesystem;

namespace {

const std::string kPresets = std::string(FMCF_SOURCE_DIR) + "/presets";

int call_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"fmcf"};
  for (const std::string& a : args) argv.push_back(a.c_str());
  return cli::run_main(static_cast<int>(argv.size()), argv.data());
}

std::string write_temp_config(const std::string& body, const std::string& name) {
  const fs::path p = fs::temp_directory_path() / name;
  std::ofstream out(p);
  out << body;
  return p.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing: defaults, comments and overrides") {
  RunConfig cfg;
  const std::string path = write_temp_config("# only comments\n\n  # and blanks\n", "empty.cfg");
  parse_config_file(path, cfg);
  CHECK(cfg.q == 2);
  CHECK(cfg.tau == 0.05);

  const std::string full = write_temp_config("tau = 0.125  # inline comment\nq=3\n", "full.cfg");
  parse_config_file(full, cfg);
  CHECK(cfg.tau == 0.125);
  CHECK(cfg.q == 3);
}

TEST_CASE("config parsing: errors carry line numbers") {
  RunConfig cfg;
  const std::string unknown = write_temp_config("tau = 0.1\nbogus_key = 3\n", "unknown.cfg");
  CHECK_THROWS_WITH(parse_config_file(unknown, cfg), Catch::Contains(":2:") &&
                                                         Catch::Contains("unknown key"));

  const std::string malformed = write_temp_config("tau = abc\n", "malformed.cfg");
  CHECK_THROWS_WITH(parse_config_file(malformed, cfg), Catch::Contains(":1:"));

  const std::string noeq = write_temp_config("tau 0.1\n", "noeq.cfg");
  CHECK_THROWS_WITH(parse_config_file(noeq, cfg), Catch::Contains("key=value"));

  CHECK_THROWS_WITH(parse_config_file("/nonexistent/x.cfg", cfg), Catch::Contains("cannot open"));
}

TEST_CASE("config validation rejects out-of-range values") {
  RunConfig cfg;
  cfg.q = 7;
  CHECK_THROWS_AS(cfg.solver_config(), std::invalid_argument);
  cfg.q = 6;
  CHECK_THROWS_AS(cfg.solver_config(), std::invalid_argument);
  cfg.allow_q6 = true;
  CHECK_NOTHROW(cfg.solver_config());
  cfg = RunConfig{};
  cfg.tau = -1;
  CHECK_THROWS_AS(cfg.solver_config(), std::invalid_argument);
  cfg = RunConfig{};
  cfg.scheme = "magic";
  CHECK_THROWS_AS(cfg.solver_config(), std::invalid_argument);
  cfg = RunConfig{};
  cfg.problem = "unknown_problem";
  CHECK_THROWS_AS(cfg.make_problem(), std::invalid_argument);
}

TEST_CASE("tumour preset reproduces the model parameters") {
  RunConfig cfg;
  parse_config_file(kPresets + "/tumour_g30.cfg", cfg);
  CHECK(cfg.d == 10.0);
  CHECK(cfg.a == 0.1);
  CHECK(cfg.b == 0.9);
  CHECK(cfg.delta == 0.1);
  CHECK(cfg.eps == 0.01);
  CHECK(cfg.gamma == 30.0);
  CHECK(cfg.tau == 0.0015625);
  const TumourParams p = cfg.tumour_params();
  CHECK(p.d == 10.0);
  CHECK(p.steady_u1() == Approx(1.0));

  RunConfig g300;
  parse_config_file(kPresets + "/tumour_g300.cfg", g300);
  CHECK(g300.gamma == 300.0);
}

TEST_CASE("mesh subcommand writes the mesh file with the expected counts") {
  const std::string outdir = (fs::temp_directory_path() / "fmcf_mesh_test").string();
  fs::remove_all(outdir);
  REQUIRE(call_cli({"mesh", "--level", "2", "--degree", "1", "--outdir", outdir}) == 0);
  std::ifstream mesh(outdir + "/mesh.txt");
  REQUIRE(mesh.good());
  int n = 0, nel = 0, k = 0;
  mesh >> n >> nel >> k;
  CHECK(n == 162);  // V_{l+1} = V_l + E_l from the icosahedron
  CHECK(nel == 320);
  CHECK(k == 1);
  CHECK(fs::exists(outdir + "/provenance.cfg"));
  CHECK(fs::exists(outdir + "/mesh.vtk"));
  fs::remove_all(outdir);
}

TEST_CASE("flags override the config file and land in the provenance echo") {
  const std::string outdir = (fs::temp_directory_path() / "fmcf_prov_test").string();
  fs::remove_all(outdir);
  const std::string cfg =
      write_temp_config("level = 1\ndegree = 2\noutdir = ignored\n", "prov.cfg");
  REQUIRE(call_cli({"mesh", "--config", cfg, "--level", "0", "--outdir", outdir}) == 0);
  const std::string prov = slurp(outdir + "/provenance.cfg");
  CHECK(prov.find("level = 0") != std::string::npos);   // flag wins
  CHECK(prov.find("degree = 2") != std::string::npos);  // file value kept
  fs::remove_all(outdir);
}

TEST_CASE("run subcommand produces csv and vtk artifacts deterministically") {
  const std::string out1 = (fs::temp_directory_path() / "fmcf_run1").string();
  const std::string out2 = (fs::temp_directory_path() / "fmcf_run2").string();
  fs::remove_all(out1);
  fs::remove_all(out2);
  const std::vector<std::string> base = {"run",  "--problem", "manufactured_sphere",
                                         "--level", "1",      "--tau",
                                         "0.05", "--T",       "0.2",
                                         "--output_every", "2"};
  auto with_out = [&](const std::string& o) {
    std::vector<std::string> v = base;
    v.push_back("--outdir");
    v.push_back(o);
    return v;
  };
  REQUIRE(call_cli(with_out(out1)) == 0);
  REQUIRE(call_cli(with_out(out2)) == 0);
  CHECK(fs::exists(out1 + "/diagnostics.csv"));
  CHECK(fs::exists(out1 + "/errors.csv"));
  CHECK(fs::exists(out1 + "/surface_0000.vtk"));
  CHECK(slurp(out1 + "/diagnostics.csv") == slurp(out2 + "/diagnostics.csv"));
  CHECK(slurp(out1 + "/errors.csv") == slurp(out2 + "/errors.csv"));

  // output cadence: steps 2 and 4 plus the initial snapshot
  CHECK(fs::exists(out1 + "/surface_0001.vtk"));
  CHECK(fs::exists(out1 + "/surface_0002.vtk"));
  CHECK_FALSE(fs::exists(out1 + "/surface_0003.vtk"));

  // the diagnostics csv has one line per state incl. startup
  std::istringstream diag(slurp(out1 + "/diagnostics.csv"));
  std::string line;
  int lines = 0;
  while (std::getline(diag, line)) ++lines;
  CHECK(lines == 1 + 5);  // header + states 0..4
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("converge subcommand emits the EOC table") {
  const std::string outdir = (fs::temp_directory_path() / "fmcf_conv_test").string();
  fs::remove_all(outdir);
  REQUIRE(call_cli({"converge", "--problem", "manufactured_sphere", "--levels", "0,1", "--taus",
                    "0.1,0.05", "--T", "0.2", "--outdir", outdir}) == 0);
  const std::string csv = slurp(outdir + "/eoc.csv");
  CHECK(csv.rfind("sweep,series,level,h,tau,variable,error,eoc", 0) == 0);
  CHECK(csv.find("temporal,") != std::string::npos);
  CHECK(csv.find("spatial,") != std::string::npos);
  fs::remove_all(outdir);
}

TEST_CASE("tumour subcommand emits snapshots with the model fields") {
  const std::string outdir = (fs::temp_directory_path() / "fmcf_tum_cli").string();
  fs::remove_all(outdir);
  REQUIRE(call_cli({"tumour", "--config", kPresets + "/tumour_g30.cfg", "--level", "0", "--tau",
                    "0.05", "--pre_T", "0.25", "--T", "0.45", "--output_every", "2", "--outdir",
                    outdir}) == 0);
  // snapshots: initial + steps 2 and 4
  CHECK(fs::exists(outdir + "/surface_0000.vtk"));
  CHECK(fs::exists(outdir + "/surface_0002.vtk"));
  CHECK_FALSE(fs::exists(outdir + "/surface_0003.vtk"));
  const std::string vtk = slurp(outdir + "/surface_0000.vtk");
  CHECK(vtk.find("SCALARS u1 double") != std::string::npos);
  CHECK(vtk.find("SCALARS u2 double") != std::string::npos);
  CHECK(vtk.find("SCALARS H double") != std::string::npos);
  CHECK(vtk.find("VECTORS nu double") != std::string::npos);
  CHECK(fs::exists(outdir + "/preintegration.csv"));
  fs::remove_all(outdir);
}

TEST_CASE("unknown subcommand or missing subcommand fails") {
  CHECK(call_cli({}) != 0);
  CHECK(call_cli({"run", "--q", "7"}) != 0);  // out of range
}
