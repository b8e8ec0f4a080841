#include "pointer/gauge.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pointer/errors.hpp"

namespace pointer {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

constexpr double kWeightFloor = 1e-14;

}  // namespace

SectorProjection project_sectors(const DensityMatrix& rho, const SpinGeometry& geometry) {
  const std::size_t n = rho.size();
  if (geometry.spinor_plus.size() != n) throw std::invalid_argument("project_sectors: grid mismatch");
  SectorProjection out;
  out.plus.resize(idx(n), idx(n));
  out.minus.resize(idx(n), idx(n));
  double cross = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    const Eigen::Vector2cd& pj = geometry.spinor_plus[j];
    const Eigen::Vector2cd& mj = geometry.spinor_minus[j];
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Matrix2cd b = rho.block(i, j);
      out.plus(idx(i), idx(j)) = geometry.spinor_plus[i].dot(b * pj);
      out.minus(idx(i), idx(j)) = geometry.spinor_minus[i].dot(b * mj);
      cross += std::norm(geometry.spinor_plus[i].dot(b * mj));
    }
  }
  out.coherence_norm = std::sqrt(cross) * rho.grid().dx();
  return out;
}

double SectorState::norm() const {
  double s = 0.0;
  for (double w : weights) s += w;
  return s;
}

Eigen::MatrixXcd SectorState::density() const {
  if (modes.empty()) return {};
  const Index n = modes.front().size();
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(n, n);
  for (std::size_t k = 0; k < modes.size(); ++k) rho.noalias() += weights[k] * modes[k] * modes[k].adjoint();
  return rho;
}

SectorState sector_state(int sector, const Eigen::MatrixXcd& rho_s, double dx) {
  const Eigen::MatrixXcd h = 0.5 * (rho_s + rho_s.adjoint()) * dx;
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  SectorState st;
  st.sector = sector;
  for (Index k = h.rows() - 1; k >= 0; --k) {
    const double w = es.eigenvalues()(k);
    if (w <= kWeightFloor) continue;
    st.weights.push_back(w);
    st.modes.push_back(es.eigenvectors().col(k) / std::sqrt(dx));
  }
  return st;
}

EffectiveHamiltonian effective_hamiltonian(const SpinGeometry& geometry, int sector, bool include_grav) {
  const Spectral spectral(geometry.grid);
  EffectiveHamiltonian h;
  h.sector = sector;
  h.mass = geometry.mass;
  h.vector_potential = geometry.vector_potential(sector);
  h.mean_potential = h.vector_potential.mean();
  h.chi = spectral.antiderivative(h.vector_potential);
  const Index n = h.vector_potential.size();
  h.grav = include_grav ? geometry.grav_potential : Eigen::VectorXd::Zero(n);
  h.scalar = h.grav + geometry.scalar_potential(sector);
  return h;
}

EffectiveHamiltonian regauge(const EffectiveHamiltonian& h, const Eigen::VectorXd& chi, const Spectral& spectral) {
  EffectiveHamiltonian out = h;
  out.vector_potential = h.vector_potential + spectral.derivative(chi);
  out.mean_potential = out.vector_potential.mean();
  out.chi = spectral.antiderivative(out.vector_potential);
  return out;
}

Eigen::VectorXcd regauge_wavefunction(const Eigen::VectorXcd& phi, const Eigen::VectorXd& chi) {
  Eigen::VectorXcd out = phi;
  for (Index i = 0; i < out.size(); ++i) out(i) *= std::polar(1.0, -chi(i));
  return out;
}

EffectivePropagator::EffectivePropagator(AxisField field, double mass, int sector, bool include_grav,
                                         std::optional<Eigen::VectorXd> gauge)
    : field_(std::move(field)),
      mass_(mass),
      sector_(sector),
      include_grav_(include_grav),
      gauge_(std::move(gauge)),
      spectral_(field_.grid()) {
  if (sector != 1 && sector != -1) throw std::invalid_argument("sector must be +1 or -1");
  if (!(mass > 0.0)) throw ConfigError("mass must be > 0");
  if (gauge_ && static_cast<std::size_t>(gauge_->size()) != field_.grid().size()) {
    throw std::invalid_argument("gauge function has the wrong length");
  }
  if (!field_.time_dependent()) static_h_ = hamiltonian(0.0);
}

EffectiveHamiltonian EffectivePropagator::hamiltonian(double t) const {
  if (static_h_) return *static_h_;
  EffectiveHamiltonian h = effective_hamiltonian(spin_geometry(field_, mass_, t), sector_, include_grav_);
  if (gauge_) h = regauge(h, *gauge_, spectral_);
  return h;
}

void EffectivePropagator::step_with(const EffectiveHamiltonian& h, Eigen::VectorXcd& phi, double dt) const {
  const Grid& grid = field_.grid();
  const std::size_t n = grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    phi(idx(i)) *= std::polar(1.0, -0.5 * dt * h.scalar(idx(i)) + h.chi(idx(i)));
  }
  spectral_.fft().forward({phi.data(), n});
  for (std::size_t j = 0; j < n; ++j) {
    const double k = grid.wavenumber(j) + h.mean_potential;
    phi(idx(j)) *= std::polar(1.0, -k * k * dt / (2.0 * mass_));
  }
  spectral_.fft().inverse({phi.data(), n});
  for (std::size_t i = 0; i < n; ++i) {
    phi(idx(i)) *= std::polar(1.0, -0.5 * dt * h.scalar(idx(i)) - h.chi(idx(i)));
  }
}

void EffectivePropagator::step(Eigen::VectorXcd& phi, double t, double dt) const {
  if (static_h_) {
    step_with(*static_h_, phi, dt);
  } else {
    step_with(hamiltonian(t + 0.5 * dt), phi, dt);
  }
}

void effective_step(SectorState& state, const EffectivePropagator& prop, double t, double dt) {
  if (state.sector != prop.sector()) throw std::invalid_argument("sector state and propagator disagree");
  for (auto& m : state.modes) prop.step(m, t, dt);
}

double kinetic_momentum(const Eigen::MatrixXcd& rho_s, const Eigen::VectorXd& vector_potential,
                        const Spectral& spectral) {
  const double dx = spectral.grid().dx();
  return mean_momentum(rho_s, spectral) + vector_potential.dot(rho_s.diagonal().real()) * dx;
}

double kinetic_momentum(const SectorState& state, const EffectiveHamiltonian& h, const Spectral& spectral) {
  const Grid& grid = spectral.grid();
  const std::size_t n = grid.size();
  double total = 0.0;
  for (std::size_t k = 0; k < state.modes.size(); ++k) {
    Eigen::VectorXcd f(idx(n));
    for (std::size_t i = 0; i < n; ++i) f(idx(i)) = std::polar(1.0, h.chi(idx(i))) * state.modes[k](idx(i));
    spectral.fft().forward({f.data(), n});
    double p = 0.0;
    for (std::size_t j = 0; j < n; ++j) p += grid.derivative_wavenumber(j) * std::norm(f(idx(j)));
    total += state.weights[k] * (p * grid.dx() / static_cast<double>(n) + h.mean_potential * state.modes[k].squaredNorm() * grid.dx());
  }
  return total;
}

double kinetic_momentum(const SectorState& state, const Eigen::VectorXd& vector_potential, const Spectral& spectral) {
  const Grid& grid = spectral.grid();
  const std::size_t n = grid.size();
  double total = 0.0;
  for (std::size_t k = 0; k < state.modes.size(); ++k) {
    Eigen::VectorXcd f = state.modes[k];
    spectral.fft().forward({f.data(), n});
    double p = 0.0;
    for (std::size_t j = 0; j < n; ++j) p += grid.derivative_wavenumber(j) * std::norm(f(idx(j)));
    p *= grid.dx() / static_cast<double>(n);
    p += vector_potential.dot(state.modes[k].cwiseAbs2()) * grid.dx();
    total += state.weights[k] * p;
  }
  return total;
}

namespace {

SectorRecord sector_record(double t, const SectorState& st, const EffectiveHamiltonian& h, const Spectral& spectral) {
  const Grid& grid = spectral.grid();
  SectorRecord r;
  r.time = t;
  r.sector = st.sector;
  r.norm = 0.0;
  double mx = 0.0;
  for (std::size_t k = 0; k < st.modes.size(); ++k) {
    const Eigen::VectorXd d = st.modes[k].cwiseAbs2() * grid.dx();
    r.norm += st.weights[k] * d.sum();
    for (std::size_t i = 0; i < grid.size(); ++i) mx += st.weights[k] * grid.x(i) * d(idx(i));
  }
  r.mean_x = r.norm > 0.0 ? mx / r.norm : 0.0;
  r.kinetic_p = kinetic_momentum(st, h, spectral);
  return r;
}

std::size_t output_steps(const Schedule& s, std::size_t& outputs) {
  const std::size_t per = steps_per_output(s);
  outputs = static_cast<std::size_t>(std::llround(s.total_time / s.output_interval));
  return per;
}

}  // namespace

EffectiveRun run_effective(const EffectivePropagator& plus_prop, const EffectivePropagator& minus_prop,
                           SectorState plus, SectorState minus, const Schedule& schedule) {
  std::size_t outputs = 0;
  const std::size_t per = output_steps(schedule, outputs);
  const Spectral spectral(plus_prop.grid());
  EffectiveRun run;
  auto record = [&](double t) {
    run.records.push_back(sector_record(t, plus, plus_prop.hamiltonian(t), spectral));
    run.records.push_back(sector_record(t, minus, minus_prop.hamiltonian(t), spectral));
  };
  record(0.0);
  std::size_t step = 0;
  for (std::size_t o = 1; o <= outputs; ++o) {
    for (std::size_t k = 0; k < per; ++k) {
      const double t = static_cast<double>(step) * schedule.dt;
      effective_step(plus, plus_prop, t, schedule.dt);
      effective_step(minus, minus_prop, t, schedule.dt);
      ++step;
    }
    record(static_cast<double>(step) * schedule.dt);
  }
  run.plus = std::move(plus);
  run.minus = std::move(minus);
  return run;
}

double convergence_dt(const Schedule& schedule, double nu) {
  double target = schedule.dt;
  if (nu > 0.0) target = std::min(target, 0.1 / nu);
  const double k = std::ceil(schedule.output_interval / target - 1e-9);
  return schedule.output_interval / k;
}

ConvergenceStudy convergence_study(const AxisField& field, double mass, const DensityMatrix& rho0,
                                   const Schedule& schedule, const std::vector<double>& nu_list) {
  if (nu_list.empty()) throw ConfigError("nu_list must not be empty");
  for (std::size_t k = 1; k < nu_list.size(); ++k) {
    if (!(nu_list[k] > nu_list[k - 1])) throw ConfigError("nu_list must be strictly ascending");
  }
  const Grid& grid = field.grid();
  const double dx = grid.dx();
  const Spectral spectral(grid);
  const SpinGeometry geo0 = spin_geometry(field, mass, 0.0);
  const SectorProjection initial = project_sectors(rho0, geo0);

  ConvergenceStudy study;
  {
    const EffectivePropagator pp(field, mass, +1), pm(field, mass, -1);
    Schedule s = schedule;
    s.dt = convergence_dt(schedule, 0.0);
    study.effective = run_effective(pp, pm, sector_state(+1, initial.plus, dx), sector_state(-1, initial.minus, dx),
                                    s).records;
  }

  for (double nu : nu_list) {
    ConvergenceRow row;
    row.nu = nu;
    Schedule s = schedule;
    s.dt = convergence_dt(schedule, nu);
    const MasterEquation eq(field, mass, nu);
    auto observer = [&](double t, const DensityMatrix& rho) {
      const SpinGeometry geo = field.time_dependent() ? spin_geometry(field, mass, t) : geo0;
      const SectorProjection proj = project_sectors(rho, geo);
      row.times.push_back(t);
      row.coherence.push_back(proj.coherence_norm);
      row.full_p.push_back({kinetic_momentum(proj.plus, geo.a_plus, spectral),
                            kinetic_momentum(proj.minus, geo.a_minus, spectral)});
    };
    run_lindblad(eq, rho0, s, observer);
    for (std::size_t o = 0; o < row.times.size(); ++o) {
      const double dp = std::abs(row.full_p[o][0] - study.effective[2 * o].kinetic_p);
      const double dm = std::abs(row.full_p[o][1] - study.effective[2 * o + 1].kinetic_p);
      row.delta = std::max({row.delta, dp, dm});
    }
    double sum = 0.0;
    std::size_t cnt = 0;
    const double half = 0.5 * schedule.total_time;
    for (std::size_t o = 0; o < row.times.size(); ++o) {
      if (row.times[o] >= half - 1e-12 && row.times[o] > 0.0) {
        sum += row.coherence[o];
        ++cnt;
      }
    }
    row.coherence_floor = cnt > 0 ? sum / static_cast<double>(cnt) : std::numeric_limits<double>::quiet_NaN();
    study.rows.push_back(std::move(row));
  }

  std::vector<const ConvergenceRow*> active;
  for (const auto& r : study.rows)
    if (r.nu > 0.0) active.push_back(&r);
  study.monotone = active.size() >= 2;
  for (std::size_t k = 1; k < active.size(); ++k) {
    if (!(active[k]->delta < active[k - 1]->delta)) study.monotone = false;
  }
  if (active.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (const auto* r : active) {
      const double x = std::log(r->nu), y = std::log(r->coherence_floor);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const auto m = static_cast<double>(active.size());
    study.floor_exponent = (m * sxy - sx * sy) / (m * sxx - sx * sx);
  } else {
    study.floor_exponent = std::numeric_limits<double>::quiet_NaN();
  }
  return study;
}

}  // namespace pointer
