#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "doctest.h"
#include "pointer/errors.hpp"
#include "pointer/run.hpp"

using namespace pointer;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"(
[grid]
N = 64
L = 32
[physics]
nu = 2
[field]
kind = helix
winding = 2
[initial]
kind = unpolarized
x0 = 16
sigma = 2
coherence_length = 1
[solver]
use = all
n_traj = 40
base_seed = 3
[time]
T = 0.1
dt = 5e-4
dt_out = 5e-3
)";

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path = fs::temp_directory_path() / "pointer_run_test";
  TempDir() { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("a run writes its artifacts, never overwrites and is reproducible") {
  TempDir tmp;
  const RunConfig cfg = parse_config_text(kSmall, "small");
  const RunResult a = execute(cfg, {tmp.path / "small", false});
  CHECK(a.directory == tmp.path / "small");
  CHECK(a.exit_code == 0);
  for (const char* f : {"manifest.json", "report.json", "report.txt", "lindblad_series.csv", "lindblad_density.csv",
                        "force_balance.csv", "separation.csv", "flux_source.csv", "trajectories_series.csv",
                        "jump_log.csv", "semiclassical_series.csv", "phase_space.csv", "sectors.csv"}) {
    CHECK_MESSAGE(fs::exists(a.directory / f), f);
  }
  const auto manifest = nlohmann::json::parse(slurp(a.directory / "manifest.json"));
  CHECK(manifest["config_hash"] == config_hash(cfg));
  CHECK(manifest["base_seed"] == 3);
  CHECK(manifest["status"] == "ok");
  CHECK(manifest["artifacts"].size() == 12);
  const auto report = nlohmann::json::parse(slurp(a.directory / "report.json"));
  CHECK(report["version"] == POINTER_LAB_VERSION);
  CHECK(report["checks"].size() == a.report.checks.size());

  const std::string series = slurp(a.directory / "lindblad_series.csv");
  CHECK(series.rfind("t,trace,purity,mean_x,var_x,mean_p,mean_p2,rho_x,rho_y,rho_z,min_eigenvalue,force\n", 0) == 0);
  CHECK(slurp(a.directory / "lindblad_density.csv").rfind("t,x,rho0,rho_x,rho_y,rho_z\n", 0) == 0);
  CHECK(slurp(a.directory / "phase_space.csv").rfind("t,x,p,rho0,rho_x,rho_y,rho_z\n", 0) == 0);
  CHECK(slurp(a.directory / "sectors.csv").rfind("t,sector,norm,mean_x,kinetic_p\n", 0) == 0);
  CHECK(slurp(a.directory / "jump_log.csv").rfind("trajectory,t,outcome\n", 0) == 0);

  const RunResult b = execute(cfg, {tmp.path / "small", true});
  CHECK(b.directory == tmp.path / "small-1");
  for (const auto& f : a.artifacts) {
    CHECK_MESSAGE(slurp(a.directory / f) == slurp(b.directory / f), f);
  }
}

TEST_CASE("failing assertions give exit code 3 and are named in the report") {
  RunConfig cfg = parse_config_text(kSmall, "strict");
  cfg.solvers = SolverSet{true, false, false, false};
  cfg.flux_tol = 1e-9;
  const RunResult r = execute(cfg);
  CHECK(r.directory.empty());
  CHECK(r.exit_code == 3);
  CHECK(r.report.to_text().find("FAIL flux_source.lindblad") != std::string::npos);
}

TEST_CASE("a numerical abort leaves a manifest behind") {
  TempDir tmp;
  RunConfig cfg = parse_config_text(kSmall, "abort");
  cfg.solvers = SolverSet{false, false, true, false};
  cfg.p_max = 2.0;
  cfg.n_p = 64;
  cfg.schedule.total_time = 2.0;
  cfg.schedule.output_interval = 0.01;
  CHECK_THROWS_AS(execute(cfg, {tmp.path / "abort", false}), NumericalAbort);
  const auto manifest = nlohmann::json::parse(slurp(tmp.path / "abort" / "manifest.json"));
  CHECK(manifest["exit_code"] == 2);
  CHECK(manifest["status"].get<std::string>().rfind("numerical abort", 0) == 0);
}

TEST_CASE("invalid configurations are rejected before anything is written") {
  TempDir tmp;
  RunConfig cfg = parse_config_text(kSmall, "bad");
  cfg.nu = -1.0;
  CHECK_THROWS_AS(execute(cfg, {tmp.path / "bad", false}), ConfigError);
  CHECK_FALSE(fs::exists(tmp.path / "bad"));
}
