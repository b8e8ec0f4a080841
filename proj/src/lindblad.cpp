#include "pointer/lindblad.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Eigenvalues>

#include "pointer/errors.hpp"

namespace pointer {

namespace {

using Index = Eigen::Index;

constexpr double kPositivityFloor = -1e-8;

Index idx(std::size_t i) { return static_cast<Index>(i); }

// diag(A * B) without forming the product.
Eigen::VectorXcd diag_product(const Eigen::MatrixXd& a, const Eigen::MatrixXcd& b) {
  return (a.cast<cplx>().array() * b.transpose().array()).rowwise().sum();
}

// diag(B * A^T)_i = sum_l B(i,l) A(i,l)
Eigen::VectorXcd diag_product_right(const Eigen::MatrixXcd& b, const Eigen::MatrixXd& a) {
  return (b.array() * a.cast<cplx>().array()).rowwise().sum();
}

}  // namespace

// ---------------------------------------------------------------------------
// DensityMatrix

DensityMatrix::DensityMatrix(const Grid& grid)
    : grid_(grid), data_(Eigen::MatrixXcd::Zero(2 * idx(grid.size()), 2 * idx(grid.size()))) {}

Eigen::Matrix2cd DensityMatrix::block(std::size_t i, std::size_t j) const {
  const Index n = idx(size());
  Eigen::Matrix2cd b;
  b << data_(idx(i), idx(j)), data_(idx(i), n + idx(j)),
       data_(n + idx(i), idx(j)), data_(n + idx(i), n + idx(j));
  return b;
}

void DensityMatrix::set_block(std::size_t i, std::size_t j, const Eigen::Matrix2cd& b) {
  const Index n = idx(size());
  data_(idx(i), idx(j)) = b(0, 0);
  data_(idx(i), n + idx(j)) = b(0, 1);
  data_(n + idx(i), idx(j)) = b(1, 0);
  data_(n + idx(i), n + idx(j)) = b(1, 1);
}

double DensityMatrix::trace() const { return data_.trace().real() * grid_.dx(); }

double DensityMatrix::purity() const {
  const double dx = grid_.dx();
  return data_.squaredNorm() * dx * dx;
}

double DensityMatrix::hermiticity_error() const {
  return (data_ - data_.adjoint()).cwiseAbs().maxCoeff();
}

double DensityMatrix::min_eigenvalue() const {
  const Eigen::MatrixXcd h = 0.5 * (data_ + data_.adjoint()) * grid_.dx();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

// ---------------------------------------------------------------------------
// Pauli decomposition

PauliFields decompose(const DensityMatrix& rho) {
  PauliFields f;
  const auto uu = rho.spin_block(0, 0);
  const auto ud = rho.spin_block(0, 1);
  const auto du = rho.spin_block(1, 0);
  const auto dd = rho.spin_block(1, 1);
  const cplx i(0.0, 1.0);
  f.rho0 = uu + dd;
  f.rho_vec[0] = ud + du;
  f.rho_vec[1] = i * ud - i * du;
  f.rho_vec[2] = uu - dd;
  return f;
}

DensityMatrix recompose(const Grid& grid, const PauliFields& f) {
  DensityMatrix rho(grid);
  const cplx i(0.0, 1.0);
  rho.spin_block(0, 0) = 0.5 * (f.rho0 + f.rho_vec[2]);
  rho.spin_block(1, 1) = 0.5 * (f.rho0 - f.rho_vec[2]);
  rho.spin_block(0, 1) = 0.5 * (f.rho_vec[0] - i * f.rho_vec[1]);
  rho.spin_block(1, 0) = 0.5 * (f.rho_vec[0] + i * f.rho_vec[1]);
  return rho;
}

// ---------------------------------------------------------------------------
// Initial states

Eigen::VectorXcd gaussian_wavefunction(const Grid& grid, const GaussianSpec& spec) {
  const double dx = grid.dx();
  if (!(spec.width >= 3.0 * dx)) {
    throw ConfigError("wavepacket width " + std::to_string(spec.width) + " is not resolvable: need sigma_x >= 3 dx = " +
                      std::to_string(3.0 * dx));
  }
  const double half = 0.5 * grid.length();
  const double tail = std::exp(-half * half / (2.0 * spec.width * spec.width));
  if (tail > 1e-12) {
    throw ConfigError("wavepacket tails wrap around the periodic domain: density at the antipode is " +
                      std::to_string(tail) + " of the peak (limit 1e-12); need L >= " +
                      std::to_string(2.0 * spec.width * std::sqrt(2.0 * std::log(1e12))));
  }
  if (!std::isfinite(spec.center) || !std::isfinite(spec.momentum)) {
    throw ConfigError("wavepacket center and momentum must be finite");
  }
  const std::size_t n = grid.size();
  Eigen::VectorXcd psi(idx(n));
  const double L = grid.length();
  for (std::size_t i = 0; i < n; ++i) {
    cplx v{};
    for (int image = -2; image <= 2; ++image) {
      const double d = grid.x(i) - spec.center - image * L;
      v += std::exp(-d * d / (4.0 * spec.width * spec.width)) * std::polar(1.0, spec.momentum * d);
    }
    psi(idx(i)) = v;
  }
  psi /= std::sqrt(psi.squaredNorm() * dx);
  return psi;
}

Eigen::Vector2cd spinor_from_bloch(const Vec3& bloch) {
  const double norm = bloch.norm();
  if (std::abs(norm - 1.0) > 1e-9) {
    throw ConfigError("Bloch vector must have unit length (|b| = " + std::to_string(norm) + ")");
  }
  const Vec3 b = bloch / norm;
  if ((b + Vec3::UnitZ()).norm() < 1e-6) return Eigen::Vector2cd(0.0, 1.0);
  return local_spinors(b).plus;
}

namespace {

Eigen::MatrixXcd spatial_density(const Grid& grid, const GaussianSpec& spec) {
  const Eigen::VectorXcd psi = gaussian_wavefunction(grid, spec);
  Eigen::MatrixXcd m = psi * psi.adjoint();
  if (std::isfinite(spec.coherence_length)) {
    if (!(spec.coherence_length > 0.0)) throw ConfigError("coherence length must be > 0");
    const std::size_t n = grid.size();
    const double L = grid.length();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double d = std::abs(grid.x(i) - grid.x(j));
        d = std::min(d, L - d);
        m(idx(i), idx(j)) *= std::exp(-d * d / (2.0 * spec.coherence_length * spec.coherence_length));
      }
    }
  }
  return m;
}

}  // namespace

PureMixture gaussian_mixture(const Grid& grid, const GaussianSpec& spec) {
  const Eigen::VectorXcd psi = gaussian_wavefunction(grid, spec);
  if (!std::isfinite(spec.coherence_length)) return {{1.0}, {psi}};
  if (!(spec.coherence_length > 0.0)) throw ConfigError("coherence length must be > 0");
  const std::size_t n = grid.size();
  const double L = grid.length();
  Eigen::VectorXcd c(idx(n));
  for (std::size_t m = 0; m < n; ++m) {
    const double d = std::min(grid.x(m), L - grid.x(m));
    c(idx(m)) = std::exp(-d * d / (2.0 * spec.coherence_length * spec.coherence_length));
  }
  Fft(n).forward({c.data(), n});
  PureMixture out;
  for (std::size_t k = 0; k < n; ++k) {
    const double w = c(idx(k)).real() / static_cast<double>(n);
    if (w < -1e-13) throw ConfigError("coherence kernel is not positive on this grid; reduce coherence_length");
    if (w <= 1e-15) continue;
    const double kk = grid.wavenumber(k);
    Eigen::VectorXcd phi(idx(n));
    for (std::size_t i = 0; i < n; ++i) phi(idx(i)) = psi(idx(i)) * std::polar(1.0, kk * grid.x(i));
    out.weights.push_back(w);
    out.states.push_back(std::move(phi));
  }
  return out;
}

DensityMatrix init_gaussian(const Grid& grid, const GaussianSpec& spec, const Eigen::Vector2cd& spinor) {
  if (std::abs(spinor.norm() - 1.0) > 1e-9) throw ConfigError("spinor must be normalised");
  const Eigen::MatrixXcd m = spatial_density(grid, spec);
  DensityMatrix rho(grid);
  const Eigen::Matrix2cd s = spinor * spinor.adjoint();
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) rho.spin_block(a, b) = s(a, b) * m;
  }
  return rho;
}

DensityMatrix init_unpolarized(const Grid& grid, const GaussianSpec& spec) {
  const Eigen::MatrixXcd m = spatial_density(grid, spec);
  DensityMatrix rho(grid);
  rho.spin_block(0, 0) = 0.5 * m;
  rho.spin_block(1, 1) = 0.5 * m;
  return rho;
}

DensityMatrix init_sector(const Grid& grid, const GaussianSpec& spec, const SpinGeometry& geometry, int sector) {
  const Eigen::MatrixXcd m = spatial_density(grid, spec);
  const auto& spinors = sector > 0 ? geometry.spinor_plus : geometry.spinor_minus;
  DensityMatrix rho(grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    for (std::size_t j = 0; j < grid.size(); ++j) {
      rho.set_block(i, j, m(idx(i), idx(j)) * spinors[i] * spinors[j].adjoint());
    }
  }
  return rho;
}

// ---------------------------------------------------------------------------
// Dissipator

DensityMatrix pointer_map(std::span<const Vec3> directions, const DensityMatrix& rho) {
  // P+ r P+ + P- r P- = (r + (n_i.sigma) r (n_j.sigma)) / 2
  const std::size_t n = rho.size();
  std::vector<Eigen::Matrix2cd> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = pauli_dot(directions[i]);
  DensityMatrix out(rho.grid());
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Matrix2cd b = rho.block(i, j);
      out.set_block(i, j, 0.5 * (b + s[i] * b * s[j]));
    }
  }
  return out;
}

DensityMatrix dissipator_rhs(std::span<const Vec3> directions, const DensityMatrix& rho, double nu) {
  DensityMatrix out = pointer_map(directions, rho);
  out.data() = nu * (out.data() - rho.data());
  return out;
}

void apply_dissipator(std::span<const Vec3> directions, DensityMatrix& rho, double nu, double dt) {
  if (!(dt >= 0.0)) throw ConfigError("dissipator time step must be >= 0");
  if (dt == 0.0 || nu == 0.0) return;
  const double decay = std::exp(-nu * dt);
  const double keep = 0.5 * (1.0 + decay);
  const double mix = 0.5 * (1.0 - decay);
  const std::size_t n = rho.size();
  std::vector<Eigen::Matrix2cd> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = pauli_dot(directions[i]);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const Eigen::Matrix2cd b = rho.block(i, j);
      rho.set_block(i, j, keep * b + mix * (s[i] * b * s[j]));
    }
  }
}

DensityMatrix dissipator_channel(const SpinGeometry& geometry, const DensityMatrix& rho, double nu, double dt) {
  DensityMatrix out = rho;
  apply_dissipator(geometry.direction, out, nu, dt);
  return out;
}

PauliFields pauli_rhs(std::span<const Vec3> directions, const PauliFields& f, double nu) {
  const Index n = f.rho0.rows();
  const cplx i_unit(0.0, 1.0);
  PauliFields out;
  out.rho0 = Eigen::MatrixXcd::Zero(n, n);
  for (auto& c : out.rho_vec) c = Eigen::MatrixXcd::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    const Vec3& n2 = directions[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i) {
      const Vec3& n1 = directions[static_cast<std::size_t>(i)];
      const Vec3 cross = n1.cross(n2);
      const Eigen::Vector3cd r(f.rho_vec[0](i, j), f.rho_vec[1](i, j), f.rho_vec[2](i, j));
      const cplx r0 = f.rho0(i, j);
      const cplx n1r = n1.cast<cplx>().transpose() * r;
      const cplx n2r = n2.cast<cplx>().transpose() * r;
      const cplx crossr = cross.cast<cplx>().transpose() * r;
      out.rho0(i, j) = -0.25 * nu * (n1 - n2).squaredNorm() * r0 - 0.5 * i_unit * nu * crossr;
      const Eigen::Vector3cd dr = 0.5 * nu * n1.cast<cplx>() * n2r + 0.5 * nu * n1r * n2.cast<cplx>() -
                                  0.25 * nu * (n1 + n2).squaredNorm() * r +
                                  0.5 * i_unit * nu * cross.cast<cplx>() * r0;
      for (int c = 0; c < 3; ++c) out.rho_vec[c](i, j) = dr(c);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Kinetic propagator

KineticPropagator::KineticPropagator(const Grid& grid, double mass) : grid_(grid), mass_(mass), fft_(grid.size()) {
  if (!(mass > 0.0)) throw ConfigError("mass must be > 0");
}

const Eigen::VectorXcd& KineticPropagator::phases(double tau) const {
  if (tau != cached_tau_) {
    const std::size_t n = grid_.size();
    cached_phase_.resize(idx(n));
    for (std::size_t j = 0; j < n; ++j) {
      const double k = grid_.wavenumber(j);
      cached_phase_(idx(j)) = std::polar(1.0, -k * k * tau / (2.0 * mass_));
    }
    cached_tau_ = tau;
  }
  return cached_phase_;
}

void KineticPropagator::apply(DensityMatrix& rho, double tau) const {
  // With a plain 2D forward FFT the column index carries momentum -k2, and
  // (-k2)^2 = k2^2, so each bin picks up phase(k1) * conj(phase(k2)).
  const Eigen::VectorXcd& ph = phases(tau);
  const Eigen::MatrixXcd factor = ph * ph.adjoint();
  const Index n = idx(grid_.size());
  Eigen::MatrixXcd buf(n, n);
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      buf = rho.spin_block(a, b);
      fft_.forward2d(buf);
      buf.array() *= factor.array();
      fft_.inverse2d(buf);
      rho.spin_block(a, b) = buf;
    }
  }
}

void KineticPropagator::apply(Eigen::VectorXcd& psi, double tau) const {
  const Eigen::VectorXcd& ph = phases(tau);
  fft_.forward({psi.data(), static_cast<std::size_t>(psi.size())});
  psi.array() *= ph.array();
  fft_.inverse({psi.data(), static_cast<std::size_t>(psi.size())});
}

void KineticPropagator::apply_spinor(Eigen::VectorXcd& psi, double tau) const {
  const Eigen::VectorXcd& ph = phases(tau);
  const std::size_t n = grid_.size();
  for (std::size_t a = 0; a < 2; ++a) {
    std::span<cplx> comp(psi.data() + a * n, n);
    fft_.forward(comp);
    for (std::size_t j = 0; j < n; ++j) comp[j] *= ph(idx(j));
    fft_.inverse(comp);
  }
}

// ---------------------------------------------------------------------------
// Master equation

MasterEquation::MasterEquation(AxisField field, double mass, double nu)
    : field_(std::move(field)), kinetic_(field_.grid(), mass), nu_(nu) {
  if (!(nu >= 0.0)) throw ConfigError("decoherence rate must be >= 0");
  static_directions_ = field_.directions(0.0);
}

void MasterEquation::kinetic_half_step(DensityMatrix& rho, double dt) const { kinetic_.apply(rho, 0.5 * dt); }

void MasterEquation::dissipate(DensityMatrix& rho, double t_mid, double dt) const {
  if (field_.time_dependent()) {
    const auto dirs = field_.directions(t_mid);
    apply_dissipator(dirs, rho, nu_, dt);
  } else {
    apply_dissipator(static_directions_, rho, nu_, dt);
  }
}

void MasterEquation::step(DensityMatrix& rho, double t, double dt) const {
  kinetic_half_step(rho, dt);
  dissipate(rho, t + 0.5 * dt, dt);
  kinetic_half_step(rho, dt);
}

double MasterEquation::max_stable_dt(double total_time) const {
  double bound = std::min(0.1 * mass() * grid().dx() * grid().dx(), total_time / 1000.0);
  if (nu_ > 0.0) bound = std::min(bound, 0.1 / nu_);
  return bound;
}

// ---------------------------------------------------------------------------
// Observables

double mean_momentum(const Eigen::MatrixXcd& rho, const Spectral& spectral) {
  const Eigen::VectorXcd d = diag_product(spectral.first_derivative_matrix(), rho);
  return (cplx(0.0, -1.0) * d.sum()).real() * spectral.grid().dx();
}

double mean_momentum_squared(const Eigen::MatrixXcd& rho, const Spectral& spectral) {
  const Eigen::VectorXcd d = diag_product(spectral.second_derivative_matrix(), rho);
  return -d.sum().real() * spectral.grid().dx();
}

ObservableRecord observables(const DensityMatrix& rho, const Spectral& spectral, bool with_min_eigenvalue) {
  const Grid& grid = rho.grid();
  const double dx = grid.dx();
  const Index n = idx(grid.size());
  const PauliFields f = decompose(rho);
  ObservableRecord r;
  r.trace = rho.trace();
  r.purity = rho.purity();
  r.density = f.rho0.diagonal().real();
  double mx = 0.0, mx2 = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double x = grid.x(static_cast<std::size_t>(i));
    mx += x * r.density(i) * dx;
    mx2 += x * x * r.density(i) * dx;
  }
  r.mean_x = mx / r.trace;
  r.var_x = mx2 / r.trace - r.mean_x * r.mean_x;
  r.mean_p = mean_momentum(f.rho0, spectral);
  r.mean_p2 = mean_momentum_squared(f.rho0, spectral);
  const Eigen::MatrixXd& d1 = spectral.first_derivative_matrix();
  for (int c = 0; c < 3; ++c) {
    r.spin[c] = f.rho_vec[c].diagonal().real();
    r.orientation(c) = r.spin[c].sum() * dx;
    const Eigen::VectorXcd left = diag_product(d1, f.rho_vec[c]);
    const Eigen::VectorXcd right = diag_product_right(f.rho_vec[c], d1);
    r.flux[c] = (cplx(0.0, -0.5) * (left - right)).real();
  }
  if (with_min_eigenvalue) r.min_eigenvalue = rho.min_eigenvalue();
  return r;
}

Eigen::VectorXd momentum_distribution(const DensityMatrix& rho) {
  const Grid& grid = rho.grid();
  const std::size_t n = grid.size();
  Eigen::MatrixXcd m = rho.spin_block(0, 0) + rho.spin_block(1, 1);
  Fft(n).forward2d(m);
  Eigen::VectorXd prob(idx(n));
  const double scale = grid.dx() / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) prob(idx(k)) = scale * m(idx(k), idx((n - k) % n)).real();
  return prob;
}

double effective_force(std::span<const Vec3> force_field, const std::array<Eigen::VectorXd, 3>& spin, double dx,
                       double nu) {
  double s = 0.0;
  for (std::size_t i = 0; i < force_field.size(); ++i) {
    for (int c = 0; c < 3; ++c) s += force_field[i](c) * spin[c](idx(i));
  }
  return -0.5 * nu * s * dx;
}

// ---------------------------------------------------------------------------
// Wigner transform

namespace {

// Spectral interpolation of an N x N periodic matrix onto the 2N x 2N half grid.
Eigen::MatrixXcd refine(const Eigen::MatrixXcd& m, const Fft& coarse, const Fft& fine) {
  const Index n = m.rows();
  Eigen::MatrixXcd c = m;
  coarse.forward2d(c);
  Eigen::MatrixXcd f = Eigen::MatrixXcd::Zero(2 * n, 2 * n);
  auto targets = [n](Index a) {
    std::vector<std::pair<Index, double>> t;
    if (a < n / 2) t.emplace_back(a, 1.0);
    else if (a > n / 2) t.emplace_back(a + n, 1.0);
    else {
      t.emplace_back(n / 2, 0.5);
      t.emplace_back(n / 2 + n, 0.5);
    }
    return t;
  };
  for (Index b = 0; b < n; ++b) {
    const auto tb = targets(b);
    for (Index a = 0; a < n; ++a) {
      for (const auto& [ra, wa] : targets(a)) {
        for (const auto& [rb, wb] : tb) f(ra, rb) += wa * wb * c(a, b);
      }
    }
  }
  fine.inverse2d(f);
  f *= 4.0;
  return f;
}

Eigen::MatrixXd wigner_component(const Eigen::MatrixXcd& m, const Grid& grid, const Fft& coarse, const Fft& fine) {
  const Index n = idx(grid.size());
  const Eigen::MatrixXcd f = refine(m, coarse, fine);
  Eigen::MatrixXd w(n, n);
  std::vector<cplx> h(static_cast<std::size_t>(n));
  const double scale = grid.dx() / (2.0 * std::numbers::pi);
  for (Index i = 0; i < n; ++i) {
    for (Index m_off = -n / 2; m_off < n / 2; ++m_off) {
      const Index a = ((2 * i + m_off) % (2 * n) + 2 * n) % (2 * n);
      const Index b = ((2 * i - m_off) % (2 * n) + 2 * n) % (2 * n);
      h[static_cast<std::size_t>((m_off + n) % n)] = f(a, b);
    }
    coarse.forward(h);
    for (Index k = 0; k < n; ++k) {
      w(i, k) = scale * h[static_cast<std::size_t>((k - n / 2 + n) % n)].real();
    }
  }
  return w;
}

}  // namespace

PhaseSpaceState wigner_transform(const DensityMatrix& rho) {
  const Grid& grid = rho.grid();
  const Index n = idx(grid.size());
  Eigen::VectorXd p(n);
  for (Index k = 0; k < n; ++k) p(k) = grid.dk() * static_cast<double>(k - n / 2);
  PhaseSpaceState out(grid, p);
  const Fft coarse(grid.size());
  const Fft fine(2 * grid.size());
  const PauliFields f = decompose(rho);
  out.rho0 = wigner_component(f.rho0, grid, coarse, fine);
  for (int c = 0; c < 3; ++c) out.rho_vec[c] = wigner_component(f.rho_vec[c], grid, coarse, fine);
  return out;
}

// ---------------------------------------------------------------------------
// Runner

std::size_t steps_per_output(const Schedule& s) {
  if (!(s.dt > 0.0) || !(s.output_interval > 0.0) || !(s.total_time > 0.0)) {
    throw ConfigError("time step, output interval and total time must be > 0");
  }
  const double ratio = s.output_interval / s.dt;
  const double rounded = std::round(ratio);
  if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * ratio) {
    throw ConfigError("output interval must be an integer multiple of dt");
  }
  return static_cast<std::size_t>(rounded);
}

LindbladRun run_lindblad(const MasterEquation& eq, DensityMatrix rho, const Schedule& schedule,
                         const DensityObserver& observer) {
  const std::size_t per_output = steps_per_output(schedule);
  const auto outputs = static_cast<std::size_t>(std::llround(schedule.total_time / schedule.output_interval));
  const Spectral spectral(eq.grid());
  const std::size_t eig_every = std::max<std::size_t>(1, schedule.eigen_check_every);

  ConservationMonitor mon;
  std::vector<ObservableRecord> records;
  records.reserve(outputs + 1);
  const double trace0 = rho.trace();

  auto check_positivity = [&](double t) {
    const double ev = rho.min_eigenvalue();
    ++mon.eigen_checks;
    mon.min_eigenvalue = std::min(mon.min_eigenvalue, ev);
    if (ev < kPositivityFloor) {
      throw NumericalAbort("positivity violated: smallest eigenvalue " + std::to_string(ev) + " at t = " +
                           std::to_string(t));
    }
  };

  auto record = [&](double t) {
    ObservableRecord r = observables(rho, spectral, false);
    r.time = t;
    records.push_back(std::move(r));
    if (observer) observer(t, rho);
  };

  check_positivity(0.0);
  record(0.0);
  std::size_t step = 0;
  for (std::size_t o = 1; o <= outputs; ++o) {
    for (std::size_t s = 0; s < per_output; ++s) {
      const double t = static_cast<double>(step) * schedule.dt;
      eq.step(rho, t, schedule.dt);
      ++step;
      ++mon.steps;
      mon.max_hermiticity_error = std::max(mon.max_hermiticity_error, rho.hermiticity_error());
      const double tn = static_cast<double>(step) * schedule.dt;
      mon.max_trace_drift_rate = std::max(mon.max_trace_drift_rate, std::abs(rho.trace() - trace0) / tn);
      if (step % eig_every == 0) check_positivity(tn);
    }
    record(static_cast<double>(step) * schedule.dt);
  }
  if (step % eig_every != 0) check_positivity(static_cast<double>(step) * schedule.dt);
  return LindbladRun{std::move(records), mon, std::move(rho)};
}

}  // namespace pointer
