#include "pointer/spectral.hpp"

#include <cmath>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include <fftw3.h>

namespace pointer {

namespace {

// FFTW's planner is not re-entrant; execution with new-array functions is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

fftw_complex* as_fftw(cplx* p) { return reinterpret_cast<fftw_complex*>(p); }

}  // namespace

Grid::Grid(std::size_t points, double length) : n_(points), length_(length) {
  if (points < 8) {
    throw std::invalid_argument("grid needs at least 8 points, got " + std::to_string(points));
  }
  if (points % 2 != 0) {
    throw std::invalid_argument("grid point count must be even, got " + std::to_string(points));
  }
  if (!(length > 0.0) || !std::isfinite(length)) {
    throw std::invalid_argument("grid length must be positive");
  }
}

double Grid::dk() const { return 2.0 * std::numbers::pi / length_; }

double Grid::wavenumber(std::size_t j) const {
  const auto n = static_cast<long>(n_);
  auto jj = static_cast<long>(j);
  if (jj >= n / 2) jj -= n;
  return dk() * static_cast<double>(jj);
}

double Grid::derivative_wavenumber(std::size_t j) const {
  return j == n_ / 2 ? 0.0 : wavenumber(j);
}

struct Fft::Plans {
  fftw_plan fwd = nullptr;
  fftw_plan bwd = nullptr;
  fftw_plan fwd2 = nullptr;
  fftw_plan bwd2 = nullptr;

  explicit Plans(std::size_t n) {
    std::lock_guard lock(planner_mutex());
    const int ni = static_cast<int>(n);
    std::vector<cplx> a(n), b(n * n);
    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fwd = fftw_plan_dft_1d(ni, as_fftw(a.data()), as_fftw(a.data()), FFTW_FORWARD, flags);
    bwd = fftw_plan_dft_1d(ni, as_fftw(a.data()), as_fftw(a.data()), FFTW_BACKWARD, flags);
    fwd2 = fftw_plan_dft_2d(ni, ni, as_fftw(b.data()), as_fftw(b.data()), FFTW_FORWARD, flags);
    bwd2 = fftw_plan_dft_2d(ni, ni, as_fftw(b.data()), as_fftw(b.data()), FFTW_BACKWARD, flags);
    if (!fwd || !bwd || !fwd2 || !bwd2) throw std::runtime_error("FFTW planning failed");
  }
  Plans(const Plans&) = delete;
  Plans& operator=(const Plans&) = delete;
  ~Plans() {
    std::lock_guard lock(planner_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
    fftw_destroy_plan(fwd2);
    fftw_destroy_plan(bwd2);
  }
};

Fft::Fft(std::size_t n) : n_(n), plans_(std::make_shared<const Plans>(n)) {}

void Fft::forward(std::span<cplx> data) const {
  if (data.size() != n_) throw std::invalid_argument("Fft::forward: length mismatch");
  fftw_execute_dft(plans_->fwd, as_fftw(data.data()), as_fftw(data.data()));
}

void Fft::inverse(std::span<cplx> data) const {
  if (data.size() != n_) throw std::invalid_argument("Fft::inverse: length mismatch");
  fftw_execute_dft(plans_->bwd, as_fftw(data.data()), as_fftw(data.data()));
  const double s = 1.0 / static_cast<double>(n_);
  for (auto& v : data) v *= s;
}

void Fft::forward2d(Eigen::MatrixXcd& m) const {
  if (static_cast<std::size_t>(m.rows()) != n_ || m.rows() != m.cols()) {
    throw std::invalid_argument("Fft::forward2d: shape mismatch");
  }
  fftw_execute_dft(plans_->fwd2, as_fftw(m.data()), as_fftw(m.data()));
}

void Fft::inverse2d(Eigen::MatrixXcd& m) const {
  if (static_cast<std::size_t>(m.rows()) != n_ || m.rows() != m.cols()) {
    throw std::invalid_argument("Fft::inverse2d: shape mismatch");
  }
  fftw_execute_dft(plans_->bwd2, as_fftw(m.data()), as_fftw(m.data()));
  m /= static_cast<double>(n_ * n_);
}

Spectral::Spectral(const Grid& grid) : grid_(grid), fft_(grid.size()) {
  const auto n = grid.size();
  const auto ni = static_cast<Eigen::Index>(n);
  d1_.resize(ni, ni);
  d2_.resize(ni, ni);
  // Columns are the derivatives of the unit vectors.
  for (std::size_t c = 0; c < n; ++c) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(ni);
    e(static_cast<Eigen::Index>(c)) = 1.0;
    d1_.col(static_cast<Eigen::Index>(c)) = derivative(e);
    d2_.col(static_cast<Eigen::Index>(c)) = second_derivative(e);
  }
}

Eigen::VectorXcd Spectral::derivative(const Eigen::VectorXcd& f) const {
  Eigen::VectorXcd g = f;
  fft_.forward({g.data(), static_cast<std::size_t>(g.size())});
  for (std::size_t j = 0; j < grid_.size(); ++j) {
    g(static_cast<Eigen::Index>(j)) *= cplx(0.0, grid_.derivative_wavenumber(j));
  }
  fft_.inverse({g.data(), static_cast<std::size_t>(g.size())});
  return g;
}

Eigen::VectorXd Spectral::derivative(const Eigen::VectorXd& f) const {
  return derivative(Eigen::VectorXcd(f.cast<cplx>())).real();
}

Eigen::VectorXd Spectral::second_derivative(const Eigen::VectorXd& f) const {
  Eigen::VectorXcd g = f.cast<cplx>();
  fft_.forward({g.data(), static_cast<std::size_t>(g.size())});
  for (std::size_t j = 0; j < grid_.size(); ++j) {
    const double k = grid_.wavenumber(j);
    g(static_cast<Eigen::Index>(j)) *= -k * k;
  }
  fft_.inverse({g.data(), static_cast<std::size_t>(g.size())});
  return g.real();
}

Eigen::VectorXd Spectral::antiderivative(const Eigen::VectorXd& f) const {
  Eigen::VectorXcd g = f.cast<cplx>();
  fft_.forward({g.data(), static_cast<std::size_t>(g.size())});
  for (std::size_t j = 0; j < grid_.size(); ++j) {
    const double k = grid_.derivative_wavenumber(j);
    g(static_cast<Eigen::Index>(j)) = k == 0.0 ? cplx{} : g(static_cast<Eigen::Index>(j)) / cplx(0.0, k);
  }
  fft_.inverse({g.data(), static_cast<std::size_t>(g.size())});
  Eigen::VectorXd out = g.real();
  out.array() -= out(0);
  return out;
}

}  // namespace pointer
