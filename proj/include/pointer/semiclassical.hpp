#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "pointer/fields.hpp"
#include "pointer/lindblad.hpp"
#include "pointer/phase_space.hpp"

namespace pointer {

/// Symmetric momentum window [-p_max, p_max) with n_p bins.
struct MomentumWindow {
  double p_max = 0.0;
  std::size_t n_p = 0;
};

/// p_max >= |p0| + 8 sqrt(<p^2>(T)) with <p^2> grown at the initial diffusion
/// rate, and dp <= sigma_p / 4; n_p is rounded up to a power of two.
MomentumWindow choose_momentum_window(const GaussianSpec& spec, const AxisField& field, double nu, double total_time);

PhaseSpaceState make_phase_space(const Grid& grid, const MomentumWindow& window);

/// Exact Wigner function of a (possibly coherence-damped) Gaussian packet times
/// a fixed Bloch vector; no Bloch vector gives the unpolarized state.
PhaseSpaceState init_phase_space(const Grid& grid, const MomentumWindow& window, const GaussianSpec& spec,
                                 const std::optional<Vec3>& bloch);

/// Largest stable time step of the explicit reference scheme,
/// 0.5 min(dx / (p_max/m), dp^2 / (nu max|n'|^2 / 2)).
double transport_cfl_limit(const AxisField& field, double mass, double nu, double p_max, double dp);

/// Gradient-expanded transport for (rho0, rho_vec)(x, p):
///   d rho0 = -(p/m) d_x rho0 + (nu/4)|n'|^2 d_p^2 rho0 + (nu/2) F . d_p rho_vec
///   d r    = -(p/m) d_x r + nu (n (n.r) - r) - (nu/4) A d_p^2 r - (nu/2) F d_p rho0
/// with F = n' x n and A = |n'|^2 I - n' n'^T + (n n''^T + n'' n^T)/2.
/// The p-space part is solved exactly along the Fourier variable s conjugate to
/// p. The second-order rho_vec term is anti-diffusive where A has a positive
/// eigenvalue lambda, and outgrows relaxation for |s| > 2/sqrt(lambda); step()
/// adds a smooth damping of rho_vec that vanishes for |s| < sqrt(2/lambda) and
/// keeps every mode bounded. rhs() is the unregularised operator.
class TransportSolver {
public:
  TransportSolver(AxisField field, double mass, double nu, const MomentumWindow& window, double dt);

  const AxisField& field() const { return field_; }
  double mass() const { return mass_; }
  double nu() const { return nu_; }
  double dt() const { return dt_; }
  const MomentumWindow& window() const { return window_; }
  double coherence_cutoff() const { return s_cut_; }

  PhaseSpaceState rhs(const PhaseSpaceState& state, double t = 0.0) const;
  /// Half advection, exact p-space update, half advection.
  void step(PhaseSpaceState& state, double t) const;

private:
  using Gen = Eigen::Matrix4cd;
  Gen generator(std::size_t i, double s, double t) const;
  void advect(PhaseSpaceState& state, double tau) const;
  void momentum_update(PhaseSpaceState& state, double t) const;
  double s_of_bin(std::size_t j) const;

  AxisField field_;
  double mass_;
  double nu_;
  MomentumWindow window_;
  double dt_;
  double dp_;
  double s_cut_;
  Fft fft_x_;
  Fft fft_p_;
  std::vector<Gen> propagators_;  // exp(M dt) per (x, s bin) at t = 0, row-major in x
  Eigen::MatrixXcd half_shift_;   // advection phases per (k, p) for dt/2
};

/// Moments of a phase-space state. trace holds the total mass; purity is NaN.
ObservableRecord moments(const PhaseSpaceState& state);

/// Mass in the outer 1/16 of the momentum window on each side.
double boundary_leakage(const PhaseSpaceState& state);

struct TransportMonitor {
  double max_mass_drift = 0.0;
  double max_leakage = 0.0;
  double min_rho0_ratio = 0.0;  // min(rho0) / max(rho0)
  std::size_t steps = 0;
};

struct SemiclassicalRun {
  std::vector<ObservableRecord> records;
  TransportMonitor monitor;
  PhaseSpaceState final_state;
};

using PhaseSpaceObserver = std::function<void(double t, const PhaseSpaceState& state)>;

/// Throws NumericalAbort when the boundary leakage exceeds 1e-8.
SemiclassicalRun run_semiclassical(const TransportSolver& solver, PhaseSpaceState state, const Schedule& schedule,
                                   const PhaseSpaceObserver& observer = {});

}  // namespace pointer
