#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "pointer/spectral.hpp"

namespace pointer {

enum class FieldKind { constant, helix, domain_wall, sampled };

std::string to_string(FieldKind kind);
FieldKind field_kind_from_string(const std::string& name);

struct FieldParams {
  Vec3 direction = Vec3::UnitZ();  // constant
  double q = 0.0;                  // helix pitch wavenumber
  double center = 0.0;             // domain wall
  double width = 1.0;
  std::vector<Vec3> samples;       // sampled, one per grid point
};

/// Rigid rotation of the whole field about `axis` at angular rate `rate`.
struct Rotation {
  Vec3 axis = Vec3::UnitZ();
  double rate = 0.0;
};

/// Measurement-axis field n(x, t) sampled on a periodic grid, with its first
/// and second spatial derivatives. Immutable after construction.
class AxisField {
public:
  FieldKind kind() const { return kind_; }
  const Grid& grid() const { return grid_; }
  const FieldParams& params() const { return params_; }
  const std::optional<Rotation>& rotation() const { return rotation_; }
  bool time_dependent() const { return rotation_.has_value() && rotation_->rate != 0.0; }

  Vec3 n(std::size_t i, double t = 0.0) const { return rotate(n0_[i], t); }
  Vec3 dn(std::size_t i, double t = 0.0) const { return rotate(dn0_[i], t); }
  Vec3 d2n(std::size_t i, double t = 0.0) const { return rotate(d2n0_[i], t); }
  /// Time derivative of n; zero unless the field rotates.
  Vec3 dndt(std::size_t i, double t = 0.0) const;

  std::vector<Vec3> directions(double t = 0.0) const;
  /// R(t) with n(x, t) = R(t) n(x, 0).
  Eigen::Matrix3d rotation_matrix(double t) const;

private:
  friend AxisField build_axis_field(FieldKind, FieldParams, const Grid&, std::optional<Rotation>);

  AxisField(FieldKind kind, FieldParams params, const Grid& grid)
      : kind_(kind), params_(std::move(params)), grid_(grid) {}

  Vec3 rotate(const Vec3& v, double t) const;

  FieldKind kind_;
  FieldParams params_;
  Grid grid_;
  std::optional<Rotation> rotation_;
  std::vector<Vec3> n0_, dn0_, d2n0_;
};

/// Validates the family parameters and tabulates n, dn/dx, d2n/dx2.
/// Throws ConfigError on a non-periodic helix, a non-positive wall width,
/// or a degenerate sample.
AxisField build_axis_field(FieldKind kind, FieldParams params, const Grid& grid,
                           std::optional<Rotation> rotation = std::nullopt);

/// Reads a whitespace-separated table of rows (x, n1, n2, n3), one per grid point.
std::vector<Vec3> read_sampled_table(std::istream& in, const Grid& grid);
std::vector<Vec3> read_sampled_table(const std::string& path, const Grid& grid);

/// Spinors |n> and |-n> in the fixed spherical-angle gauge
/// |n> = (cos(theta/2), e^{i phi} sin(theta/2)), |-n> = (-e^{-i phi} sin(theta/2), cos(theta/2)).
struct SpinorPair {
  Eigen::Vector2cd plus;
  Eigen::Vector2cd minus;
};

SpinorPair local_spinors(const Vec3& n);
/// Directional derivative of the spinor pair along dn (chain rule, no branch cuts).
SpinorPair local_spinors_derivative(const Vec3& n, const Vec3& dn);

Eigen::Matrix2cd pauli_dot(const Vec3& v);  // v . sigma

/// Local pointer geometry at one instant.
struct SpinGeometry {
  Grid grid;
  double mass = 1.0;
  double time = 0.0;
  std::vector<Vec3> direction;
  std::vector<Eigen::Vector2cd> spinor_plus;
  std::vector<Eigen::Vector2cd> spinor_minus;
  std::vector<Eigen::Matrix2cd> projector_plus;
  std::vector<Eigen::Matrix2cd> projector_minus;
  std::vector<Vec3> force_field;  // (dn/dx) x n
  Eigen::VectorXd a_plus;
  Eigen::VectorXd a_minus;
  Eigen::VectorXcd a_pm;
  Eigen::VectorXd grav_potential;  // |A_{+-}|^2 / 2m
  Eigen::VectorXd phi_plus;
  Eigen::VectorXd phi_minus;

  const Eigen::VectorXd& vector_potential(int sector) const { return sector > 0 ? a_plus : a_minus; }
  const Eigen::VectorXd& scalar_potential(int sector) const { return sector > 0 ? phi_plus : phi_minus; }
};

/// Throws ConfigError when n comes within 1e-6 of the south pole, where the
/// spinor gauge is singular.
SpinGeometry spin_geometry(const AxisField& field, double mass, double t = 0.0);

}  // namespace pointer
