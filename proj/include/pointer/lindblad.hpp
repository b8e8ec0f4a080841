#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "pointer/fields.hpp"
#include "pointer/phase_space.hpp"
#include "pointer/spectral.hpp"

namespace pointer {

/// Spinor-valued density matrix rho_ab(x_i | x_j) on a periodic grid, stored as
/// a (2N x 2N) matrix with row/column index a*N + i (a = 0 for up, 1 for down).
class DensityMatrix {
public:
  explicit DensityMatrix(const Grid& grid);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return grid_.size(); }

  Eigen::MatrixXcd& data() { return data_; }
  const Eigen::MatrixXcd& data() const { return data_; }

  Eigen::Matrix2cd block(std::size_t i, std::size_t j) const;
  void set_block(std::size_t i, std::size_t j, const Eigen::Matrix2cd& b);
  /// N x N spin block (a, b).
  auto spin_block(int a, int b) {
    const auto n = static_cast<Eigen::Index>(size());
    return data_.block(a * n, b * n, n, n);
  }
  auto spin_block(int a, int b) const {
    const auto n = static_cast<Eigen::Index>(size());
    return data_.block(a * n, b * n, n, n);
  }

  double trace() const;
  double purity() const;
  /// max |rho - rho^dagger| entrywise.
  double hermiticity_error() const;
  /// Smallest eigenvalue of the density operator (matrix entries times dx).
  double min_eigenvalue() const;

private:
  Grid grid_;
  Eigen::MatrixXcd data_;
};

/// Pauli decomposition rho = (rho0 + rho_vec . sigma) / 2, pointwise in (x_i, x_j).
struct PauliFields {
  Eigen::MatrixXcd rho0;
  std::array<Eigen::MatrixXcd, 3> rho_vec;
};

PauliFields decompose(const DensityMatrix& rho);
DensityMatrix recompose(const Grid& grid, const PauliFields& fields);

struct GaussianSpec {
  double center = 0.0;
  double momentum = 0.0;
  double width = 2.0;  // standard deviation of |psi|^2
  /// Optional Gaussian damping of coherences exp(-(x1-x2)^2 / 2 l^2); infinity keeps the state pure.
  double coherence_length = std::numeric_limits<double>::infinity();
};

/// Normalised periodic Gaussian (sum over images) carrying momentum p0.
/// Throws ConfigError when the width is under 3 dx or the density tail at the
/// antipode exceeds 1e-12 of the peak.
Eigen::VectorXcd gaussian_wavefunction(const Grid& grid, const GaussianSpec& spec);

/// The spatial density of a GaussianSpec as a mixture of pure packets
/// psi(x) e^{ikx} over the grid wavenumbers, exact on the grid. The damping
/// kernel is circulant, so its DFT gives the weights. A pure spec yields a
/// single term. Throws ConfigError if a weight is negative beyond roundoff.
struct PureMixture {
  std::vector<double> weights;
  std::vector<Eigen::VectorXcd> states;
};
PureMixture gaussian_mixture(const Grid& grid, const GaussianSpec& spec);

/// Spinor for a Bloch vector, in the same gauge as local_spinors().
Eigen::Vector2cd spinor_from_bloch(const Vec3& bloch);

DensityMatrix init_gaussian(const Grid& grid, const GaussianSpec& spec, const Eigen::Vector2cd& spinor);
DensityMatrix init_unpolarized(const Grid& grid, const GaussianSpec& spec);
/// psi(x) |s n(x)>: a pure state inside one local superselection sector.
DensityMatrix init_sector(const Grid& grid, const GaussianSpec& spec, const SpinGeometry& geometry, int sector);

/// Unselective measurement map Phi(rho) = sum_s P_s(x_i) rho(x_i|x_j) P_s(x_j).
DensityMatrix pointer_map(std::span<const Vec3> directions, const DensityMatrix& rho);
/// nu (Phi(rho) - rho).
DensityMatrix dissipator_rhs(std::span<const Vec3> directions, const DensityMatrix& rho, double nu);
/// Exact solution of d rho/dt = nu (Phi(rho) - rho) over dt, in place:
/// rho <- e^{-nu dt} rho + (1 - e^{-nu dt}) Phi(rho).
void apply_dissipator(std::span<const Vec3> directions, DensityMatrix& rho, double nu, double dt);
DensityMatrix dissipator_channel(const SpinGeometry& geometry, const DensityMatrix& rho, double nu, double dt);

/// Dissipative right-hand side of the coupled (rho0, rho_vec) equations.
PauliFields pauli_rhs(std::span<const Vec3> directions, const PauliFields& fields, double nu);

/// Exact free evolution exp(-i p^2 t / 2m), applied spectrally.
class KineticPropagator {
public:
  KineticPropagator(const Grid& grid, double mass);

  double mass() const { return mass_; }
  /// rho <- U rho U^dagger with U = exp(-i p^2 tau / 2m).
  void apply(DensityMatrix& rho, double tau) const;
  /// psi <- U psi for a scalar wavefunction.
  void apply(Eigen::VectorXcd& psi, double tau) const;
  /// Spinor wavefunction with layout a*N + i.
  void apply_spinor(Eigen::VectorXcd& psi, double tau) const;

private:
  const Eigen::VectorXcd& phases(double tau) const;

  Grid grid_;
  double mass_;
  Fft fft_;
  mutable double cached_tau_ = std::numeric_limits<double>::quiet_NaN();
  mutable Eigen::VectorXcd cached_phase_;
};

/// Strang-split propagator for the master equation
/// d rho/dt = -i/2m [p^2, rho] + nu (Phi(rho) - rho).
class MasterEquation {
public:
  MasterEquation(AxisField field, double mass, double nu);

  const AxisField& field() const { return field_; }
  const Grid& grid() const { return field_.grid(); }
  double mass() const { return kinetic_.mass(); }
  double nu() const { return nu_; }

  void kinetic_half_step(DensityMatrix& rho, double dt) const;
  /// Exact dissipative channel with the axis field evaluated at time t_mid.
  void dissipate(DensityMatrix& rho, double t_mid, double dt) const;
  /// kinetic(dt/2), dissipator(dt) at t + dt/2, kinetic(dt/2).
  void step(DensityMatrix& rho, double t, double dt) const;

  /// min(0.1/nu, 0.1 m dx^2, T/1000).
  double max_stable_dt(double total_time) const;

private:
  AxisField field_;
  KineticPropagator kinetic_;
  double nu_;
  std::vector<Vec3> static_directions_;
};

struct ObservableRecord {
  double time = 0.0;
  double trace = 0.0;
  double purity = 0.0;
  double mean_x = 0.0;
  double var_x = 0.0;
  double mean_p = 0.0;
  double mean_p2 = 0.0;
  Vec3 orientation = Vec3::Zero();  // integral of the spin density
  std::optional<double> min_eigenvalue;
  Eigen::VectorXd density;                  // rho0(x|x)
  std::array<Eigen::VectorXd, 3> spin;      // rho_vec(x|x)
  std::array<Eigen::VectorXd, 3> flux;      // orientation flux j(x)
};

ObservableRecord observables(const DensityMatrix& rho, const Spectral& spectral, bool with_min_eigenvalue = false);

/// Momentum probabilities on the FFT bins (same ordering as Grid::wavenumber).
Eigen::VectorXd momentum_distribution(const DensityMatrix& rho);

/// Kinetic-momentum expectation tr(p rho) and tr(p^2 rho) of an N x N scalar
/// density on the grid (spectral derivatives).
double mean_momentum(const Eigen::MatrixXcd& rho, const Spectral& spectral);
double mean_momentum_squared(const Eigen::MatrixXcd& rho, const Spectral& spectral);

/// -(nu/2) * integral of F . rho_vec(x) dx.
double effective_force(std::span<const Vec3> force_field, const std::array<Eigen::VectorXd, 3>& spin,
                       double dx, double nu);

/// Discrete Wigner transform of each Pauli component, on the N x N grid of
/// positions and ascending spectral momenta.
PhaseSpaceState wigner_transform(const DensityMatrix& rho);

struct Schedule {
  double total_time = 1.0;
  double dt = 1e-3;
  double output_interval = 1e-2;
  std::size_t eigen_check_every = 50;
};

/// Worst-case conservation numbers seen during a run.
struct ConservationMonitor {
  double max_trace_drift_rate = 0.0;    // |tr(t) - tr(0)| / t
  double max_hermiticity_error = 0.0;   // per step
  double min_eigenvalue = std::numeric_limits<double>::infinity();
  std::size_t steps = 0;
  std::size_t eigen_checks = 0;
};

struct LindbladRun {
  std::vector<ObservableRecord> records;
  ConservationMonitor monitor;
  DensityMatrix final_state;
};

using DensityObserver = std::function<void(double t, const DensityMatrix& rho)>;

/// Propagates rho over the schedule, recording observables every output
/// interval (dt must divide the output interval). Throws NumericalAbort if the
/// smallest eigenvalue drops below -1e-8.
LindbladRun run_lindblad(const MasterEquation& eq, DensityMatrix rho, const Schedule& schedule,
                         const DensityObserver& observer = {});

/// Number of solver steps per output interval; throws ConfigError unless
/// output_interval is an integer multiple of dt.
std::size_t steps_per_output(const Schedule& schedule);

}  // namespace pointer
