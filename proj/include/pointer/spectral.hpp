#pragma once

#include <complex>
#include <cstddef>
#include <memory>
#include <span>

#include <Eigen/Dense>

namespace pointer {

using cplx = std::complex<double>;
using Vec3 = Eigen::Vector3d;

/// Periodic 1D grid x_i = i*dx on [0, L), with N even.
class Grid {
public:
  Grid(std::size_t points, double length);

  std::size_t size() const { return n_; }
  double length() const { return length_; }
  double dx() const { return length_ / static_cast<double>(n_); }
  double dk() const;
  double x(std::size_t i) const { return static_cast<double>(i) * dx(); }

  /// Wavenumber of FFT bin j (Nyquist bin carries -pi/dx).
  double wavenumber(std::size_t j) const;
  /// Same as wavenumber() but zero in the Nyquist bin; used for odd-order
  /// derivatives so that real data stays real.
  double derivative_wavenumber(std::size_t j) const;

  bool operator==(const Grid& other) const {
    return n_ == other.n_ && length_ == other.length_;
  }

private:
  std::size_t n_;
  double length_;
};

/// Unnormalised FFTW transforms of fixed length n (1D) and n x n (2D).
/// Inverse transforms are normalised by 1/n (1D) and 1/n^2 (2D).
class Fft {
public:
  explicit Fft(std::size_t n);

  std::size_t size() const { return n_; }

  void forward(std::span<cplx> data) const;
  void inverse(std::span<cplx> data) const;
  /// In-place 2D transforms of a square column-major matrix.
  void forward2d(Eigen::MatrixXcd& m) const;
  void inverse2d(Eigen::MatrixXcd& m) const;

private:
  struct Plans;
  std::size_t n_;
  std::shared_ptr<const Plans> plans_;
};

/// Spectral calculus on a periodic grid.
class Spectral {
public:
  explicit Spectral(const Grid& grid);

  const Grid& grid() const { return grid_; }
  const Fft& fft() const { return fft_; }

  Eigen::VectorXcd derivative(const Eigen::VectorXcd& f) const;
  Eigen::VectorXd derivative(const Eigen::VectorXd& f) const;
  Eigen::VectorXd second_derivative(const Eigen::VectorXd& f) const;
  /// Periodic antiderivative of f - mean(f), fixed to vanish at x = 0.
  Eigen::VectorXd antiderivative(const Eigen::VectorXd& f) const;

  /// Dense matrices of d/dx and d^2/dx^2 acting on grid samples.
  const Eigen::MatrixXd& first_derivative_matrix() const { return d1_; }
  const Eigen::MatrixXd& second_derivative_matrix() const { return d2_; }

private:
  Grid grid_;
  Fft fft_;
  Eigen::MatrixXd d1_;
  Eigen::MatrixXd d2_;
};

}  // namespace pointer
