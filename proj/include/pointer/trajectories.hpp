#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <random>
#include <vector>

#include "pointer/fields.hpp"
#include "pointer/lindblad.hpp"

namespace pointer {

struct JumpEvent {
  double time = 0.0;
  int outcome = +1;
};

/// Pure spinor wavefunction with layout a*N + i, plus its private RNG stream.
struct TrajectoryState {
  Eigen::VectorXcd psi;
  std::mt19937_64 rng;
  std::vector<JumpEvent> jumps;
  double time = 0.0;
};

/// Observables of one pure state at one output time.
struct TrajectorySample {
  double time = 0.0;
  double norm = 0.0;
  double mean_x = 0.0;
  double mean_p = 0.0;
  double mean_p2 = 0.0;
  Vec3 orientation = Vec3::Zero();
  Eigen::VectorXd density;
  std::array<Eigen::VectorXd, 3> spin;
};

struct TrajectoryRun {
  TrajectoryState state;
  std::vector<TrajectorySample> samples;
};

/// Independent RNG stream for trajectory `index` derived from `base_seed`.
std::mt19937_64 trajectory_rng(std::uint64_t base_seed, std::uint64_t index);

/// Stream used only to draw the starting state of a weighted ensemble.
std::mt19937_64 selection_rng(std::uint64_t base_seed, std::uint64_t index);

/// psi(x) times a fixed spinor, in the a*N + i layout.
Eigen::VectorXcd spinor_wavefunction(const Eigen::VectorXcd& psi, const Eigen::Vector2cd& spinor);

TrajectorySample trajectory_observables(const Eigen::VectorXcd& psi, const Grid& grid, const Fft& fft);

/// Free spectral evolution between Poisson(nu) jump times; each jump is one
/// global unselective measurement of n(x).sigma with Born-rule outcome.
/// Samples are taken at multiples of schedule.output_interval up to total_time.
TrajectoryRun evolve_trajectory(const Eigen::VectorXcd& psi0, const AxisField& field, double mass, double nu,
                                const Schedule& schedule, std::uint64_t seed_base, std::uint64_t index = 0);

struct EnsembleOptions {
  std::size_t n_traj = 1000;
  std::uint64_t base_seed = 0;
  unsigned threads = 1;  // 0 selects hardware concurrency
  bool keep_jump_logs = false;
  /// Empty: equal weights, trajectory k starts from entry k mod size. Otherwise
  /// each trajectory draws its starting entry with these weights.
  std::vector<double> weights;
};

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

struct EnsembleRecord {
  double time = 0.0;
  MeanSe mean_x, mean_p, mean_p2;
  std::array<MeanSe, 3> orientation;
  Eigen::VectorXd density;
  std::array<Eigen::VectorXd, 3> spin_mean;
  std::array<Eigen::VectorXd, 3> spin_se;
};

struct EnsembleRun {
  std::vector<EnsembleRecord> records;
  std::vector<std::size_t> jump_counts;             // per trajectory
  std::vector<std::vector<JumpEvent>> jump_logs;    // only with keep_jump_logs
  double max_norm_error = 0.0;
};

/// Runs n_traj trajectories and reduces them in trajectory order, so the result
/// does not depend on the thread count. A mixed initial state is given as an
/// list of pure states, either equal-weight and cycled (n_traj must then be a
/// multiple of the list size) or sampled with options.weights.
EnsembleRun ensemble_average(const std::vector<Eigen::VectorXcd>& initial_states, const AxisField& field, double mass, double nu,
                             const Schedule& schedule, const EnsembleOptions& options);

}  // namespace pointer
