#include "pointer/trajectories.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

#include "pointer/errors.hpp"

namespace pointer {

namespace {

using Index = Eigen::Index;

constexpr double kDegenerateBranch = 1e-14;

Index idx(std::size_t i) { return static_cast<Index>(i); }

std::size_t output_count(const Schedule& s) {
  if (!(s.output_interval > 0.0) || !(s.total_time >= 0.0)) {
    throw ConfigError("trajectory schedule needs a positive output interval");
  }
  const double ratio = s.total_time / s.output_interval;
  const auto n = static_cast<std::size_t>(std::llround(ratio));
  if (std::abs(ratio - static_cast<double>(n)) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("total time must be a multiple of the output interval");
  }
  return n;
}

// sum_i psi^dagger P_s(x_i) psi dx for P_s = (1 + s n.sigma)/2
double branch_probability(const Eigen::VectorXcd& psi, const std::vector<Vec3>& dirs, int outcome, double dx) {
  const std::size_t n = dirs.size();
  double p = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx u = psi(idx(i));
    const cplx d = psi(idx(n + i));
    const Vec3& v = dirs[i];
    const double expect = v.z() * (std::norm(u) - std::norm(d)) +
                          2.0 * (std::conj(u) * cplx(v.x(), -v.y()) * d).real();
    p += 0.5 * (std::norm(u) + std::norm(d) + outcome * expect);
  }
  return p * dx;
}

void project(Eigen::VectorXcd& psi, const std::vector<Vec3>& dirs, int outcome, double prob) {
  const std::size_t n = dirs.size();
  const double scale = 1.0 / std::sqrt(prob);
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Vector2cd s(psi(idx(i)), psi(idx(n + i)));
    const Eigen::Vector2cd out =
        0.5 * (s + static_cast<double>(outcome) * (pauli_dot(dirs[i]) * s));
    psi(idx(i)) = scale * out(0);
    psi(idx(n + i)) = scale * out(1);
  }
}

// Welford updates; raw power sums lose the variance to cancellation when the
// mean is large (positions).
struct Accumulator {
  double n = 0.0, mean = 0.0, m2 = 0.0;
  void add(double v) {
    n += 1.0;
    const double d = v - mean;
    mean += d / n;
    m2 += d * (v - mean);
  }
  MeanSe finish() const { return {mean, std::sqrt(m2 / (n - 1.0) / n)}; }
};

struct FieldAccumulator {
  double n = 0.0;
  Eigen::ArrayXd mean, m2;
  explicit FieldAccumulator(Index size) : mean(Eigen::ArrayXd::Zero(size)), m2(Eigen::ArrayXd::Zero(size)) {}
  void add(const Eigen::VectorXd& v) {
    n += 1.0;
    const Eigen::ArrayXd d = v.array() - mean;
    mean += d / n;
    m2 += d * (v.array() - mean);
  }
  Eigen::VectorXd se() const { return (m2 / (n - 1.0) / n).sqrt().matrix(); }
};

struct RecordAccumulator {
  double time = 0.0;
  Accumulator x, p, p2;
  std::array<Accumulator, 3> orient;
  FieldAccumulator density;
  std::array<FieldAccumulator, 3> spin;
  explicit RecordAccumulator(Index n) : density(n), spin{FieldAccumulator(n), FieldAccumulator(n), FieldAccumulator(n)} {}
};

}  // namespace

std::mt19937_64 trajectory_rng(std::uint64_t base_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

std::mt19937_64 selection_rng(std::uint64_t base_seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(base_seed), static_cast<std::uint32_t>(base_seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 1u};
  return std::mt19937_64(seq);
}

Eigen::VectorXcd spinor_wavefunction(const Eigen::VectorXcd& psi, const Eigen::Vector2cd& spinor) {
  const Index n = psi.size();
  Eigen::VectorXcd out(2 * n);
  out.head(n) = spinor(0) * psi;
  out.tail(n) = spinor(1) * psi;
  return out;
}

TrajectorySample trajectory_observables(const Eigen::VectorXcd& psi, const Grid& grid, const Fft& fft) {
  const std::size_t n = grid.size();
  const double dx = grid.dx();
  TrajectorySample s;
  s.density.resize(idx(n));
  for (auto& c : s.spin) c.resize(idx(n));
  double mx = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const cplx u = psi(idx(i));
    const cplx d = psi(idx(n + i));
    const cplx ud = std::conj(u) * d;
    s.density(idx(i)) = std::norm(u) + std::norm(d);
    s.spin[0](idx(i)) = 2.0 * ud.real();
    s.spin[1](idx(i)) = 2.0 * ud.imag();
    s.spin[2](idx(i)) = std::norm(u) - std::norm(d);
    mx += grid.x(i) * s.density(idx(i));
  }
  s.norm = s.density.sum() * dx;
  s.mean_x = mx * dx / s.norm;
  for (int c = 0; c < 3; ++c) s.orientation(c) = s.spin[c].sum() * dx;

  // Parseval: sum |psi_i|^2 = sum |psi_hat_j|^2 / N
  double p = 0.0, p2 = 0.0;
  Eigen::VectorXcd comp(idx(n));
  for (std::size_t a = 0; a < 2; ++a) {
    comp = psi.segment(idx(a * n), idx(n));
    fft.forward({comp.data(), n});
    for (std::size_t j = 0; j < n; ++j) {
      const double w = std::norm(comp(idx(j)));
      p += grid.derivative_wavenumber(j) * w;
      p2 += grid.wavenumber(j) * grid.wavenumber(j) * w;
    }
  }
  const double scale = dx / static_cast<double>(n);
  s.mean_p = p * scale;
  s.mean_p2 = p2 * scale;
  return s;
}

TrajectoryRun evolve_trajectory(const Eigen::VectorXcd& psi0, const AxisField& field, double mass, double nu,
                                const Schedule& schedule, std::uint64_t seed_base, std::uint64_t index) {
  const Grid& grid = field.grid();
  const std::size_t n = grid.size();
  if (static_cast<std::size_t>(psi0.size()) != 2 * n) {
    throw std::invalid_argument("trajectory initial state must have 2N amplitudes");
  }
  if (!(nu >= 0.0)) throw ConfigError("decoherence rate must be >= 0");
  const double norm0 = psi0.squaredNorm() * grid.dx();
  if (std::abs(norm0 - 1.0) > 1e-10) {
    throw ConfigError("trajectory initial state is not normalised: norm " + std::to_string(norm0));
  }
  const std::size_t outputs = output_count(schedule);
  const KineticPropagator kinetic(grid, mass);
  const Fft fft(n);
  const std::vector<Vec3> static_dirs = field.directions(0.0);

  TrajectoryRun run{TrajectoryState{psi0, trajectory_rng(seed_base, index), {}, 0.0}, {}};
  run.samples.reserve(outputs + 1);
  TrajectoryState& st = run.state;
  std::exponential_distribution<double> wait(nu > 0.0 ? nu : 1.0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  double next_jump = nu > 0.0 ? wait(st.rng) : std::numeric_limits<double>::infinity();

  auto sample = [&] {
    TrajectorySample s = trajectory_observables(st.psi, grid, fft);
    s.time = st.time;
    run.samples.push_back(std::move(s));
  };

  sample();
  for (std::size_t o = 1; o <= outputs; ++o) {
    const double t_out = static_cast<double>(o) * schedule.output_interval;
    while (next_jump <= t_out) {
      kinetic.apply_spinor(st.psi, next_jump - st.time);
      st.time = next_jump;
      const std::vector<Vec3> dirs = field.time_dependent() ? field.directions(st.time) : static_dirs;
      const double p_plus = branch_probability(st.psi, dirs, +1, grid.dx());
      const int outcome = uniform(st.rng) < p_plus ? +1 : -1;
      const double prob = outcome > 0 ? p_plus : branch_probability(st.psi, dirs, -1, grid.dx());
      if (prob < kDegenerateBranch) {
        throw std::logic_error("trajectory drew a measurement branch of probability " + std::to_string(prob));
      }
      project(st.psi, dirs, outcome, prob);
      st.jumps.push_back({st.time, outcome});
      next_jump = st.time + wait(st.rng);
    }
    kinetic.apply_spinor(st.psi, t_out - st.time);
    st.time = t_out;
    sample();
  }
  return run;
}

EnsembleRun ensemble_average(const std::vector<Eigen::VectorXcd>& initial_states, const AxisField& field,
                             double mass, double nu, const Schedule& schedule, const EnsembleOptions& options) {
  if (options.n_traj < 2) throw ConfigError("n_traj must be >= 2");
  if (initial_states.empty()) throw std::invalid_argument("ensemble needs at least one initial state");
  if (!options.weights.empty() && options.weights.size() != initial_states.size()) {
    throw std::invalid_argument("one weight per initial state required");
  }
  if (options.weights.empty() && options.n_traj % initial_states.size() != 0) {
    throw ConfigError("n_traj must be a multiple of " + std::to_string(initial_states.size()) +
                      " for this initial state");
  }
  const std::size_t outputs = output_count(schedule);
  const Index n = idx(field.grid().size());
  unsigned threads = options.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.threads;
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, options.n_traj));

  std::vector<RecordAccumulator> acc(outputs + 1, RecordAccumulator(n));
  EnsembleRun out;
  out.jump_counts.reserve(options.n_traj);
  if (options.keep_jump_logs) out.jump_logs.reserve(options.n_traj);

  auto reduce = [&](const TrajectoryRun& run) {
    for (std::size_t o = 0; o <= outputs; ++o) {
      const TrajectorySample& s = run.samples[o];
      RecordAccumulator& a = acc[o];
      a.time = s.time;
      a.x.add(s.mean_x);
      a.p.add(s.mean_p);
      a.p2.add(s.mean_p2);
      for (int c = 0; c < 3; ++c) {
        a.orient[c].add(s.orientation(c));
        a.spin[c].add(s.spin[c]);
      }
      a.density.add(s.density);
      out.max_norm_error = std::max(out.max_norm_error, std::abs(s.norm - 1.0));
    }
    out.jump_counts.push_back(run.state.jumps.size());
    if (options.keep_jump_logs) out.jump_logs.push_back(run.state.jumps);
  };

  // Trajectories run in blocks; each block is reduced in index order.
  const std::size_t block = std::max<std::size_t>(threads, 1) * 4;
  std::vector<TrajectoryRun> runs(block);
  for (std::size_t start = 0; start < options.n_traj; start += block) {
    const std::size_t count = std::min(block, options.n_traj - start);
    auto work = [&](std::size_t k) {
      const std::size_t index = start + k;
      std::size_t pick = index % initial_states.size();
      if (!options.weights.empty()) {
        std::mt19937_64 rng = selection_rng(options.base_seed, index);
        pick = std::discrete_distribution<std::size_t>(options.weights.begin(), options.weights.end())(rng);
      }
      runs[k] = evolve_trajectory(initial_states[pick], field, mass, nu, schedule,
                                  options.base_seed, index);
    };
    if (threads <= 1) {
      for (std::size_t k = 0; k < count; ++k) work(k);
    } else {
      std::vector<std::exception_ptr> errors(threads);
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
          try {
            for (std::size_t k = w; k < count; k += threads) work(k);
          } catch (...) {
            errors[w] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t k = 0; k < count; ++k) reduce(runs[k]);
  }

  out.records.reserve(outputs + 1);
  for (const RecordAccumulator& a : acc) {
    EnsembleRecord r;
    r.time = a.time;
    r.mean_x = a.x.finish();
    r.mean_p = a.p.finish();
    r.mean_p2 = a.p2.finish();
    for (int c = 0; c < 3; ++c) {
      r.orientation[c] = a.orient[c].finish();
      r.spin_mean[c] = a.spin[c].mean.matrix();
      r.spin_se[c] = a.spin[c].se();
    }
    r.density = a.density.mean.matrix();
    out.records.push_back(std::move(r));
  }
  return out;
}

}  // namespace pointer
