#include "pointer/semiclassical.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include <unsupported/Eigen/MatrixFunctions>

#include "pointer/errors.hpp"

namespace pointer {

namespace {

using Index = Eigen::Index;

constexpr double kLeakageLimit = 1e-8;

Index idx(std::size_t i) { return static_cast<Index>(i); }

Eigen::Matrix3d second_order_tensor(const Vec3& n, const Vec3& dn, const Vec3& d2n) {
  return dn.squaredNorm() * Eigen::Matrix3d::Identity() - dn * dn.transpose() +
         0.5 * (n * d2n.transpose() + d2n * n.transpose());
}

// Extra damping of rho_vec in units of nu, as a function of u = lambda s^2 / 4
// where lambda is the largest eigenvalue of A. Zero below u = 1/2, C^2, and
// h(u) >= u - 1, so the anti-diffusive growth nu (u - 1) is always cancelled.
double regularization(double u) {
  if (u <= 0.5) return 0.0;
  const double d = u - 0.5;
  return d * d * d / 1.6875;
}

double max_gradient_sq(const AxisField& f) {
  double g = 0.0;
  for (std::size_t i = 0; i < f.grid().size(); ++i) g = std::max(g, f.dn(i).squaredNorm());
  return g;
}

std::size_t next_pow2(double v) {
  std::size_t n = 16;
  while (static_cast<double>(n) < v) n *= 2;
  return n;
}

// Spatial profile of the packet with periodic images, normalised on the grid.
Eigen::VectorXd packet_density(const Grid& grid, const GaussianSpec& spec) {
  const auto psi = gaussian_wavefunction(grid, spec);
  return psi.cwiseAbs2();
}

double momentum_width(const GaussianSpec& spec) {
  // 1/(2 sigma_s^2) = 1/(8 sigma^2) + 1/(2 l^2), sigma_p = 1/sigma_s
  const double inv = 1.0 / (8.0 * spec.width * spec.width) +
                     (std::isfinite(spec.coherence_length)
                          ? 1.0 / (2.0 * spec.coherence_length * spec.coherence_length)
                          : 0.0);
  return std::sqrt(2.0 * inv);
}

}  // namespace

MomentumWindow choose_momentum_window(const GaussianSpec& spec, const AxisField& field, double nu,
                                      double total_time) {
  const double sp = momentum_width(spec);
  const double p2 = spec.momentum * spec.momentum + sp * sp + 0.5 * nu * max_gradient_sq(field) * total_time;
  MomentumWindow w;
  w.p_max = std::abs(spec.momentum) + 8.0 * std::sqrt(p2);
  w.n_p = next_pow2(2.0 * w.p_max / (0.25 * sp));
  return w;
}

PhaseSpaceState make_phase_space(const Grid& grid, const MomentumWindow& window) {
  if (!(window.p_max > 0.0)) throw ConfigError("p_max must be > 0");
  if (window.n_p < 8 || window.n_p % 2 != 0) throw ConfigError("n_p must be even and >= 8");
  const double dp = 2.0 * window.p_max / static_cast<double>(window.n_p);
  Eigen::VectorXd p(idx(window.n_p));
  for (std::size_t k = 0; k < window.n_p; ++k) p(idx(k)) = -window.p_max + static_cast<double>(k) * dp;
  return PhaseSpaceState(grid, std::move(p));
}

PhaseSpaceState init_phase_space(const Grid& grid, const MomentumWindow& window, const GaussianSpec& spec,
                                 const std::optional<Vec3>& bloch) {
  PhaseSpaceState st = make_phase_space(grid, window);
  const Eigen::VectorXd rho_x = packet_density(grid, spec);
  const double sp = momentum_width(spec);
  Eigen::VectorXd g(st.p.size());
  for (Index k = 0; k < g.size(); ++k) {
    const double d = (st.p(k) - spec.momentum) / sp;
    g(k) = std::exp(-0.5 * d * d) / (std::sqrt(2.0 * std::numbers::pi) * sp);
  }
  st.rho0 = rho_x * g.transpose();
  if (bloch) {
    if (std::abs(bloch->norm() - 1.0) > 1e-9) throw ConfigError("Bloch vector must be a unit vector");
    for (int c = 0; c < 3; ++c) st.rho_vec[c] = (*bloch)(c) * st.rho0;
  }
  return st;
}

double transport_cfl_limit(const AxisField& field, double mass, double nu, double p_max, double dp) {
  const double adv = field.grid().dx() / (p_max / mass);
  const double diff_rate = 0.5 * nu * max_gradient_sq(field);
  const double diff = diff_rate > 0.0 ? dp * dp / diff_rate : std::numeric_limits<double>::infinity();
  return 0.5 * std::min(adv, diff);
}

TransportSolver::TransportSolver(AxisField field, double mass, double nu, const MomentumWindow& window, double dt)
    : field_(std::move(field)),
      mass_(mass),
      nu_(nu),
      window_(window),
      dt_(dt),
      dp_(2.0 * window.p_max / static_cast<double>(window.n_p)),
      s_cut_(std::numeric_limits<double>::infinity()),
      fft_x_(field_.grid().size()),
      fft_p_(window.n_p) {
  if (!(mass > 0.0)) throw ConfigError("mass must be > 0");
  if (!(nu >= 0.0)) throw ConfigError("decoherence rate must be >= 0");
  if (!(dt > 0.0)) throw ConfigError("time step must be > 0");
  make_phase_space(field_.grid(), window);  // validates the window
  const double cfl = transport_cfl_limit(field_, mass, nu, window.p_max, dp_);
  if (dt > cfl) {
    throw ConfigError("semiclassical time step " + std::to_string(dt) + " violates the CFL bound " +
                      std::to_string(cfl));
  }

  const Grid& grid = field_.grid();
  const std::size_t nx = grid.size();
  double lam = 0.0;
  for (std::size_t i = 0; i < nx; ++i) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(
        second_order_tensor(field_.n(i), field_.dn(i), field_.d2n(i)), Eigen::EigenvaluesOnly);
    lam = std::max(lam, es.eigenvalues().maxCoeff());
  }
  if (lam > 0.0) s_cut_ = 2.0 / std::sqrt(lam);

  const std::size_t np = window.n_p;
  propagators_.resize(nx * np);
  for (std::size_t i = 0; i < nx; ++i) {
    const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(
        second_order_tensor(field_.n(i), field_.dn(i), field_.d2n(i)), Eigen::EigenvaluesOnly);
    const double lam_i = std::max(0.0, es.eigenvalues().maxCoeff());
    for (std::size_t j = 0; j < np; ++j) {
      const double s = s_of_bin(j);
      Gen m = generator(i, s, 0.0);
      const double damp = nu * regularization(0.25 * lam_i * s * s);
      for (int a = 1; a < 4; ++a) m(a, a) -= damp;
      propagators_[i * np + j] = (m * dt).exp();
    }
  }

  half_shift_.resize(idx(nx), idx(np));
  const auto& p = make_phase_space(grid, window).p;
  for (std::size_t k = 0; k < nx; ++k) {
    for (Index j = 0; j < idx(np); ++j) {
      half_shift_(idx(k), j) = std::polar(1.0, -grid.derivative_wavenumber(k) * p(j) * 0.5 * dt / mass);
    }
  }
}

double TransportSolver::s_of_bin(std::size_t j) const {
  // A forward FFT over p_k = p_min + k dp produces f(-s_j) up to a phase, with
  // s_j the signed bin wavenumber.
  const auto n = static_cast<long>(window_.n_p);
  auto jj = static_cast<long>(j);
  if (jj >= n / 2) jj -= n;
  return -2.0 * std::numbers::pi * static_cast<double>(jj) / (static_cast<double>(n) * dp_);
}

TransportSolver::Gen TransportSolver::generator(std::size_t i, double s, double t) const {
  const Vec3 n = field_.n(i, t);
  const Vec3 dn = field_.dn(i, t);
  const Vec3 d2n = field_.d2n(i, t);
  const Vec3 f = dn.cross(n);
  const cplx is(0.0, 0.5 * nu_ * s);
  Gen m = Gen::Zero();
  m(0, 0) = -0.25 * nu_ * dn.squaredNorm() * s * s;
  const Eigen::Matrix3d rel = nu_ * (n * n.transpose() - Eigen::Matrix3d::Identity()) +
                              0.25 * nu_ * s * s * second_order_tensor(n, dn, d2n);
  for (int a = 0; a < 3; ++a) {
    m(0, a + 1) = -is * f(a);
    m(a + 1, 0) = is * f(a);
    for (int b = 0; b < 3; ++b) m(a + 1, b + 1) = rel(a, b);
  }
  return m;
}

void TransportSolver::advect(PhaseSpaceState& st, double tau) const {
  const std::size_t nx = field_.grid().size();
  const Index np = st.p.size();
  const bool half = std::abs(tau - 0.5 * dt_) < 1e-15 * dt_;
  Eigen::VectorXcd col(idx(nx));
  auto shift = [&](Eigen::MatrixXd& m) {
    for (Index j = 0; j < np; ++j) {
      col = m.col(j).cast<cplx>();
      fft_x_.forward({col.data(), nx});
      for (std::size_t k = 0; k < nx; ++k) {
        col(idx(k)) *= half ? half_shift_(idx(k), j)
                            : std::polar(1.0, -field_.grid().derivative_wavenumber(k) * st.p(j) * tau / mass_);
      }
      fft_x_.inverse({col.data(), nx});
      m.col(j) = col.real();
    }
  };
  shift(st.rho0);
  for (auto& c : st.rho_vec) shift(c);
}

void TransportSolver::momentum_update(PhaseSpaceState& st, double t) const {
  const std::size_t nx = field_.grid().size();
  const std::size_t np = window_.n_p;
  const bool rotating = field_.time_dependent() && t != 0.0;
  Eigen::Matrix4d d = Eigen::Matrix4d::Identity();
  if (rotating) d.bottomRightCorner<3, 3>() = field_.rotation_matrix(t);
  std::array<Eigen::VectorXcd, 4> rows;
  for (auto& r : rows) r.resize(idx(np));
  for (std::size_t i = 0; i < nx; ++i) {
    rows[0] = st.rho0.row(idx(i)).transpose().cast<cplx>();
    for (int c = 0; c < 3; ++c) rows[c + 1] = st.rho_vec[c].row(idx(i)).transpose().cast<cplx>();
    for (auto& r : rows) fft_p_.forward({r.data(), np});
    for (std::size_t j = 0; j < np; ++j) {
      Eigen::Vector4cd v(rows[0](idx(j)), rows[1](idx(j)), rows[2](idx(j)), rows[3](idx(j)));
      const Gen& e = propagators_[i * np + j];
      v = rotating ? Eigen::Vector4cd(d.cast<cplx>() * (e * (d.transpose().cast<cplx>() * v))) : Eigen::Vector4cd(e * v);
      for (int a = 0; a < 4; ++a) rows[a](idx(j)) = v(a);
    }
    for (auto& r : rows) fft_p_.inverse({r.data(), np});
    st.rho0.row(idx(i)) = rows[0].real().transpose();
    for (int c = 0; c < 3; ++c) st.rho_vec[c].row(idx(i)) = rows[c + 1].real().transpose();
  }
}

void TransportSolver::step(PhaseSpaceState& st, double t) const {
  advect(st, 0.5 * dt_);
  momentum_update(st, t + 0.5 * dt_);
  advect(st, 0.5 * dt_);
}

PhaseSpaceState TransportSolver::rhs(const PhaseSpaceState& st, double t) const {
  const Grid& grid = field_.grid();
  const std::size_t nx = grid.size();
  const std::size_t np = window_.n_p;
  PhaseSpaceState out = st;

  // advection -(p/m) d_x
  Eigen::VectorXcd col(idx(nx));
  auto advection = [&](const Eigen::MatrixXd& in, Eigen::MatrixXd& res) {
    for (Index j = 0; j < idx(np); ++j) {
      col = in.col(j).cast<cplx>();
      fft_x_.forward({col.data(), nx});
      for (std::size_t k = 0; k < nx; ++k) col(idx(k)) *= cplx(0.0, grid.derivative_wavenumber(k));
      fft_x_.inverse({col.data(), nx});
      res.col(j) = -(st.p(j) / mass_) * col.real();
    }
  };
  advection(st.rho0, out.rho0);
  for (int c = 0; c < 3; ++c) advection(st.rho_vec[c], out.rho_vec[c]);

  // p-space generator, no coherence cutoff
  std::array<Eigen::VectorXcd, 4> rows;
  for (auto& r : rows) r.resize(idx(np));
  for (std::size_t i = 0; i < nx; ++i) {
    rows[0] = st.rho0.row(idx(i)).transpose().cast<cplx>();
    for (int c = 0; c < 3; ++c) rows[c + 1] = st.rho_vec[c].row(idx(i)).transpose().cast<cplx>();
    for (auto& r : rows) fft_p_.forward({r.data(), np});
    for (std::size_t j = 0; j < np; ++j) {
      // Nyquist bin has no partner; drop it so the result stays real.
      const double s = j == np / 2 ? 0.0 : s_of_bin(j);
      Eigen::Vector4cd v(rows[0](idx(j)), rows[1](idx(j)), rows[2](idx(j)), rows[3](idx(j)));
      if (j == np / 2) v.setZero();
      v = generator(i, s, t) * v;
      for (int a = 0; a < 4; ++a) rows[a](idx(j)) = v(a);
    }
    for (auto& r : rows) fft_p_.inverse({r.data(), np});
    out.rho0.row(idx(i)) += rows[0].real().transpose();
    for (int c = 0; c < 3; ++c) out.rho_vec[c].row(idx(i)) += rows[c + 1].real().transpose();
  }
  return out;
}

ObservableRecord moments(const PhaseSpaceState& st) {
  const Grid& grid = st.x_grid;
  const double dx = grid.dx();
  const double dp = st.dp;
  ObservableRecord r;
  r.purity = std::numeric_limits<double>::quiet_NaN();
  r.density = st.rho0.rowwise().sum() * dp;
  r.trace = r.density.sum() * dx;
  double mx = 0.0, mx2 = 0.0;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    mx += grid.x(i) * r.density(idx(i));
    mx2 += grid.x(i) * grid.x(i) * r.density(idx(i));
  }
  r.mean_x = mx * dx / r.trace;
  r.var_x = mx2 * dx / r.trace - r.mean_x * r.mean_x;
  const Eigen::VectorXd pm = st.rho0.colwise().sum().transpose() * dx * dp;
  r.mean_p = pm.dot(st.p);
  r.mean_p2 = pm.dot(st.p.cwiseAbs2());
  for (int c = 0; c < 3; ++c) {
    r.spin[c] = st.rho_vec[c].rowwise().sum() * dp;
    r.flux[c] = st.rho_vec[c] * st.p * dp;
    r.orientation(c) = r.spin[c].sum() * dx;
  }
  return r;
}

double boundary_leakage(const PhaseSpaceState& st) {
  const Index np = st.p.size();
  const Index band = std::max<Index>(1, np / 16);
  const double outer = st.rho0.leftCols(band).cwiseAbs().sum() + st.rho0.rightCols(band).cwiseAbs().sum();
  return outer * st.x_grid.dx() * st.dp;
}

SemiclassicalRun run_semiclassical(const TransportSolver& solver, PhaseSpaceState state, const Schedule& schedule,
                                   const PhaseSpaceObserver& observer) {
  Schedule s = schedule;
  s.dt = solver.dt();
  const std::size_t per_output = steps_per_output(s);
  const auto outputs = static_cast<std::size_t>(std::llround(s.total_time / s.output_interval));
  TransportMonitor mon;
  const double mass0 = state.mass();
  std::vector<ObservableRecord> records;
  records.reserve(outputs + 1);

  auto check = [&](double t) {
    const double leak = boundary_leakage(state);
    mon.max_leakage = std::max(mon.max_leakage, leak);
    if (leak > kLeakageLimit) {
      throw NumericalAbort("semiclassical momentum window too small: boundary mass " + std::to_string(leak) +
                           " at t = " + std::to_string(t) + " (limit 1e-8); increase p_max");
    }
    mon.max_mass_drift = std::max(mon.max_mass_drift, std::abs(state.mass() - mass0));
    const double top = state.rho0.maxCoeff();
    if (top > 0.0) mon.min_rho0_ratio = std::min(mon.min_rho0_ratio, state.rho0.minCoeff() / top);
  };
  auto record = [&](double t) {
    ObservableRecord r = moments(state);
    r.time = t;
    records.push_back(std::move(r));
    if (observer) observer(t, state);
  };

  check(0.0);
  record(0.0);
  std::size_t step = 0;
  for (std::size_t o = 1; o <= outputs; ++o) {
    for (std::size_t k = 0; k < per_output; ++k) {
      solver.step(state, static_cast<double>(step) * s.dt);
      ++step;
      ++mon.steps;
    }
    const double t = static_cast<double>(step) * s.dt;
    check(t);
    record(t);
  }
  return SemiclassicalRun{std::move(records), mon, std::move(state)};
}

}  // namespace pointer
