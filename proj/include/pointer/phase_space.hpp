#pragma once

#include <array>

#include "pointer/spectral.hpp"

namespace pointer {

/// Real phase-space fields rho0(x, p) and rho_vec(x, p); rows index x, columns index p.
struct PhaseSpaceState {
  Grid x_grid;
  Eigen::VectorXd p;  // ascending, uniform spacing dp
  double dp = 0.0;
  Eigen::MatrixXd rho0;
  std::array<Eigen::MatrixXd, 3> rho_vec;

  PhaseSpaceState(const Grid& grid, Eigen::VectorXd momenta)
      : x_grid(grid), p(std::move(momenta)) {
    const auto nx = static_cast<Eigen::Index>(grid.size());
    dp = p.size() > 1 ? p(1) - p(0) : 0.0;
    rho0 = Eigen::MatrixXd::Zero(nx, p.size());
    for (auto& c : rho_vec) c = Eigen::MatrixXd::Zero(nx, p.size());
  }

  double mass() const { return rho0.sum() * x_grid.dx() * dp; }
};

}  // namespace pointer
