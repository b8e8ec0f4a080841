#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "pointer/fields.hpp"
#include "pointer/lindblad.hpp"

namespace pointer {

/// Sector densities rho_s(x_i|x_j) = <s n(x_i)| rho(x_i|x_j) |s n(x_j)> in the
/// spinor gauge of local_spinors(), plus the norm of the discarded cross terms.
struct SectorProjection {
  Eigen::MatrixXcd plus;
  Eigen::MatrixXcd minus;
  double coherence_norm = 0.0;  // dx * ||<n_i| rho_ij |-n_j>||_F
  const Eigen::MatrixXcd& sector(int s) const { return s > 0 ? plus : minus; }
};

SectorProjection project_sectors(const DensityMatrix& rho, const SpinGeometry& geometry);

/// Mixed sector state as an eigen-ensemble of normalised wavefunctions,
/// rho_s = sum_k w_k |phi_k><phi_k|.
struct SectorState {
  int sector = +1;
  std::vector<double> weights;
  std::vector<Eigen::VectorXcd> modes;

  double norm() const;
  Eigen::MatrixXcd density() const;
};

/// Eigen-decomposes a sector density; weights below 1e-14 are dropped.
SectorState sector_state(int sector, const Eigen::MatrixXcd& rho_s, double dx);

/// H_s = (p + A_s)^2 / 2m + V_s with V_s = |A_{+-}|^2 / 2m + phi_s. The vector
/// potential is stored as its mean plus the gradient of a periodic chi, so the
/// kinetic factor is exact: p + A_s = e^{-i chi} (p + mean) e^{i chi}.
struct EffectiveHamiltonian {
  int sector = +1;
  double mass = 1.0;
  Eigen::VectorXd vector_potential;
  double mean_potential = 0.0;
  Eigen::VectorXd chi;
  Eigen::VectorXd grav;    // the same object contents for both sectors
  Eigen::VectorXd scalar;  // grav + phi_s
};

EffectiveHamiltonian effective_hamiltonian(const SpinGeometry& geometry, int sector, bool include_grav = true);

/// The same Hamiltonian after |s n> -> e^{i chi} |s n>: A -> A + chi'.
EffectiveHamiltonian regauge(const EffectiveHamiltonian& h, const Eigen::VectorXd& chi, const Spectral& spectral);

/// Wavefunction in the re-gauged frame: phi -> e^{-i chi} phi.
Eigen::VectorXcd regauge_wavefunction(const Eigen::VectorXcd& phi, const Eigen::VectorXd& chi);

/// Strang-split propagator for one sector: V/2, exact kinetic, V/2.
class EffectivePropagator {
public:
  /// Tracks the field's rigid rotation when it has one; `gauge` optionally
  /// re-gauges every Hamiltonian it builds.
  EffectivePropagator(AxisField field, double mass, int sector, bool include_grav = true,
                      std::optional<Eigen::VectorXd> gauge = std::nullopt);

  int sector() const { return sector_; }
  const Grid& grid() const { return field_.grid(); }
  EffectiveHamiltonian hamiltonian(double t) const;

  void step(Eigen::VectorXcd& phi, double t, double dt) const;

private:
  void step_with(const EffectiveHamiltonian& h, Eigen::VectorXcd& phi, double dt) const;

  AxisField field_;
  double mass_;
  int sector_;
  bool include_grav_;
  std::optional<Eigen::VectorXd> gauge_;
  Spectral spectral_;
  std::optional<EffectiveHamiltonian> static_h_;
};

void effective_step(SectorState& state, const EffectivePropagator& prop, double t, double dt);

/// tr((p + A) rho) for a sector density given as an N x N matrix.
double kinetic_momentum(const Eigen::MatrixXcd& rho_s, const Eigen::VectorXd& vector_potential,
                        const Spectral& spectral);
/// Same for a sector state (weights included).
double kinetic_momentum(const SectorState& state, const Eigen::VectorXd& vector_potential, const Spectral& spectral);
/// Same, evaluated as e^{-i chi} (p + mean A) e^{i chi} like the propagator, so
/// the value is unchanged by regauge() even for modes near the grid cutoff.
double kinetic_momentum(const SectorState& state, const EffectiveHamiltonian& h, const Spectral& spectral);

struct SectorRecord {
  double time = 0.0;
  int sector = +1;
  double norm = 0.0;
  double mean_x = 0.0;     // normalised by the sector norm
  double kinetic_p = 0.0;  // tr((p + A_s) rho_s), not normalised
};

struct EffectiveRun {
  std::vector<SectorRecord> records;  // plus then minus at each output time
  SectorState plus;
  SectorState minus;
};

EffectiveRun run_effective(const EffectivePropagator& plus_prop, const EffectivePropagator& minus_prop,
                           SectorState plus, SectorState minus, const Schedule& schedule);

struct ConvergenceRow {
  double nu = 0.0;
  double delta = 0.0;             // max_t max_s |p_full,s - p_eff,s|
  double coherence_floor = 0.0;   // mean coherence norm over the second half of the run
  std::vector<double> times;
  std::vector<double> coherence;
  std::vector<std::array<double, 2>> full_p;  // (plus, minus) kinetic momenta
};

struct ConvergenceStudy {
  std::vector<ConvergenceRow> rows;
  std::vector<SectorRecord> effective;
  bool monotone = false;        // delta strictly decreasing over the nu > 0 rows
  double floor_exponent = 0.0;  // log-log slope of the coherence floor against nu
};

/// Lindblad time step used for rate nu: the largest divisor of the output
/// interval not above min(schedule.dt, 0.1/nu).
double convergence_dt(const Schedule& schedule, double nu);

ConvergenceStudy convergence_study(const AxisField& field, double mass, const DensityMatrix& rho0,
                                   const Schedule& schedule, const std::vector<double>& nu_list);

}  // namespace pointer
