#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pointer/fields.hpp"
#include "pointer/lindblad.hpp"
#include "pointer/semiclassical.hpp"

namespace pointer {

enum class InitialKind { gaussian, unpolarized, sector };

struct SolverSet {
  bool lindblad = false;
  bool trajectories = false;
  bool semiclassical = false;
  bool gauge = false;

  bool any() const { return lindblad || trajectories || semiclassical || gauge; }
};

/// Parsed and validated run description. See README for the file grammar.
struct RunConfig {
  std::string name;  // scenario id, defaults to the file stem

  std::size_t n_points = 128;
  double length = 64.0;

  double mass = 1.0;
  double nu = 1.0;

  FieldKind field_kind = FieldKind::helix;
  FieldParams field;
  std::optional<int> winding;
  std::string field_file;
  std::optional<Rotation> rotation;

  InitialKind initial = InitialKind::gaussian;
  GaussianSpec gaussian;
  Vec3 bloch = Vec3::UnitZ();
  int sector = 1;

  SolverSet solvers;
  Schedule schedule;

  std::size_t n_traj = 200;
  std::uint64_t base_seed = 1;
  std::size_t threads = 0;
  bool jump_log = true;
  std::optional<double> p_max;
  std::optional<std::size_t> n_p;
  std::vector<double> nu_list;
  double gauge_shift_amplitude = 0.5;

  std::vector<double> snapshot_times;
  std::string out_dir;

  // assertion tolerances
  double force_tol = 1e-3;
  double flux_tol = 0.05;
  double diffusion_tol = 0.10;
  double semiclassical_diffusion_tol = 0.02;
};

/// Reads `[section]` / `key = value` text. Unknown sections or keys, malformed
/// lines and unparsable values throw ConfigError with the line number.
RunConfig parse_config_text(const std::string& text, const std::string& name = "run");
RunConfig parse_config(const std::string& path);

/// Cross-field checks that need no heavy construction (grid, rates, schedule,
/// solver knobs). Throws ConfigError naming the constraint and admissible range.
void validate_basic(const RunConfig& cfg);

/// Full validation: validate_basic plus building the field, geometry, initial
/// state and, when selected, the momentum window and transport solver.
void validate(const RunConfig& cfg);

Grid make_grid(const RunConfig& cfg);
AxisField make_field(const RunConfig& cfg, const Grid& grid);
DensityMatrix make_initial_density(const RunConfig& cfg, const AxisField& field);
/// Pure spinor wavefunctions whose mixture is the initial state. Empty
/// weights mean equal weights (cycled over trajectories).
struct InitialEnsemble {
  std::vector<Eigen::VectorXcd> states;
  std::vector<double> weights;
};
InitialEnsemble make_initial_ensemble(const RunConfig& cfg, const AxisField& field);
std::optional<Vec3> initial_bloch(const RunConfig& cfg);
MomentumWindow make_momentum_window(const RunConfig& cfg, const AxisField& field);

/// Canonical key = value dump of every setting (stable order, 17 digits).
std::string canonical_text(const RunConfig& cfg);
/// 64-bit FNV-1a of canonical_text, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

std::vector<double> parse_number_list(const std::string& text);

}  // namespace pointer
