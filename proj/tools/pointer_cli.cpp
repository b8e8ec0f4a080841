#include <algorithm>
#include <filesystem>
#include <iostream>
#include <stdexcept>

#include <CLI11.hpp>

#include "pointer/errors.hpp"
#include "pointer/run.hpp"

namespace fs = std::filesystem;
using namespace pointer;

namespace {

// accepts a path, a path without ".ini", or a bare preset name
fs::path resolve_config(const std::string& arg) {
  const fs::path p(arg);
  if (fs::is_regular_file(p)) return p;
  fs::path with_ext = p;
  with_ext += ".ini";
  if (fs::is_regular_file(with_ext)) return with_ext;
  const fs::path preset = fs::path(POINTER_LAB_PRESET_DIR) / p.filename();
  fs::path preset_ext = preset;
  preset_ext += ".ini";
  if (fs::is_regular_file(preset_ext)) return preset_ext;
  if (fs::is_regular_file(preset)) return preset;
  throw ConfigError("config file not found: " + arg);
}

SolverSet solver_flag(const std::string& s) {
  return parse_config_text("[solver]\nuse = " + s + "\n").solvers;
}

int guarded(const std::function<int()>& body) {
  try {
    return body();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const NumericalAbort& e) {
    std::cerr << "numerical abort: " << e.what() << '\n';
    return 2;
  } catch (const std::logic_error& e) {
    std::cerr << "assertion failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical laboratory for position-dependent spin decoherence", "pointer_cli"};
  app.set_version_flag("--version", POINTER_LAB_VERSION);
  app.require_subcommand(1);

  std::string config_arg, solver, out_root, nu_list;
  std::uint64_t seed = 0;
  bool parallel = false;

  auto* run = app.add_subcommand("run", "run a configuration and write its outputs");
  run->add_option("config", config_arg, "config file or preset name")->required();
  run->add_option("--solver", solver, "lindblad, trajectories, semiclassical, gauge or all (comma list)");
  run->add_option("--out", out_root, "output root (default $DECOHERENCE_OUT or ./runs)");
  auto* seed_opt = run->add_option("--seed", seed, "base seed for the trajectory ensemble");
  run->add_flag("--parallel", parallel, "run independent solvers and trajectories concurrently");
  run->add_option("--nu-list", nu_list, "comma-separated ascending decoherence rates for the gauge study");

  auto* val = app.add_subcommand("validate", "parse and validate a configuration");
  val->add_option("config", config_arg, "config file or preset name")->required();

  auto* presets = app.add_subcommand("presets", "shipped presets");
  presets->require_subcommand(1);
  auto* list = presets->add_subcommand("list", "list shipped presets");

  CLI11_PARSE(app, argc, argv);

  if (*run) {
    return guarded([&] {
      RunConfig cfg = parse_config(resolve_config(config_arg).string());
      if (!solver.empty()) cfg.solvers = solver_flag(solver);
      if (*seed_opt) cfg.base_seed = seed;
      if (!nu_list.empty()) {
        cfg.nu_list = parse_number_list(nu_list);
        cfg.solvers.gauge = true;
      }
      const fs::path root = !out_root.empty() ? fs::path(out_root)
                            : !cfg.out_dir.empty() ? fs::path(cfg.out_dir)
                                                   : default_output_root();
      RunOptions opt;
      opt.directory = root / cfg.name;
      opt.parallel = parallel;
      const RunResult r = execute(cfg, opt);
      std::cout << r.report.to_text();
      std::cout << "outputs: " << r.directory.string() << '\n';
      for (const auto& c : r.report.checks) {
        if (!c.passed) std::cerr << "FAILED " << c.name << ": " << c.value << " (tolerance " << c.tolerance << ")\n";
      }
      return r.exit_code;
    });
  }
  if (*val) {
    return guarded([&] {
      const fs::path path = resolve_config(config_arg);
      const RunConfig cfg = parse_config(path.string());
      validate(cfg);
      std::cout << path.string() << ": ok (hash " << config_hash(cfg) << ")\n";
      return 0;
    });
  }
  if (*list) {
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(POINTER_LAB_PRESET_DIR)) {
      if (e.path().extension() == ".ini") names.push_back(e.path().stem().string());
    }
    std::sort(names.begin(), names.end());
    for (const auto& n : names) std::cout << n << '\n';
    return 0;
  }
  return 0;
}
