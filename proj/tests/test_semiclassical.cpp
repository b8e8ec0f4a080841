#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pointer/errors.hpp"
#include "pointer/semiclassical.hpp"

using namespace pointer;
using std::numbers::pi;

namespace {

AxisField helix_field(const Grid& g, int winding) {
  FieldParams p;
  p.q = 2 * pi * winding / g.length();
  return build_axis_field(FieldKind::helix, p, g);
}

AxisField constant_field(const Grid& g, const Vec3& n) {
  FieldParams p;
  p.direction = n;
  return build_axis_field(FieldKind::constant, p, g);
}

// Separable Gaussian G(x) g(p) with its analytic derivatives.
struct Packet {
  double x0, p0, sx, sp;
  double gx(double x) const { return std::exp(-0.5 * (x - x0) * (x - x0) / (sx * sx)) / (std::sqrt(2 * pi) * sx); }
  double dgx(double x) const { return -(x - x0) / (sx * sx) * gx(x); }
  double gp(double p) const { return std::exp(-0.5 * (p - p0) * (p - p0) / (sp * sp)) / (std::sqrt(2 * pi) * sp); }
  double dgp(double p) const { return -(p - p0) / (sp * sp) * gp(p); }
  double d2gp(double p) const { return ((p - p0) * (p - p0) / (sp * sp) - 1.0) / (sp * sp) * gp(p); }
};

PhaseSpaceState packet_state(const Grid& g, const MomentumWindow& w, const Packet& pk) {
  PhaseSpaceState st = make_phase_space(g, w);
  for (Eigen::Index i = 0; i < st.rho0.rows(); ++i)
    for (Eigen::Index k = 0; k < st.rho0.cols(); ++k)
      st.rho0(i, k) = pk.gx(g.x(static_cast<std::size_t>(i))) * pk.gp(st.p(k));
  return st;
}

// Slope at t = 0 of a least-squares quadratic through (t, y).
double initial_slope(const std::vector<double>& t, const std::vector<double>& y) {
  Eigen::MatrixXd a(t.size(), 3);
  Eigen::VectorXd b(t.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    a(i, 0) = 1.0;
    a(i, 1) = t[i];
    a(i, 2) = t[i] * t[i];
    b(i) = y[i];
  }
  return a.colPivHouseholderQr().solve(b)(1);
}

}  // namespace

TEST_CASE("initial phase-space Gaussian has the right moments") {
  const Grid g(64, 32.0);
  const MomentumWindow w{6.0, 256};
  GaussianSpec spec{16.0, 0.5, 2.0};
  const auto st = init_phase_space(g, w, spec, Vec3(0, 0, 1));
  const auto m = moments(st);
  // pure Gaussian: sigma_p = 1 / (2 sigma)
  CHECK(m.trace == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m.mean_x == doctest::Approx(16.0).epsilon(1e-10));
  CHECK(m.var_x == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(m.mean_p == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(m.mean_p2 == doctest::Approx(0.25 + 1.0 / 16.0).epsilon(1e-10));
  CHECK(m.orientation.z() == doctest::Approx(1.0).epsilon(1e-12));

  spec.coherence_length = 1.0;
  const auto mixed = moments(init_phase_space(g, MomentumWindow{14.0, 512}, spec, std::nullopt));
  // 1/(2 sigma_s^2) = 1/32 + 1/2
  CHECK(mixed.mean_p2 - 0.25 == doctest::Approx(2.0 * (1.0 / 32.0 + 0.5)).epsilon(1e-10));
  CHECK(mixed.orientation.norm() == 0.0);
}

TEST_CASE("constant axis: advection plus relaxation only") {
  const Grid g(64, 32.0);
  const MomentumWindow w{4.0, 128};
  const double nu = 0.8, m = 1.5;
  const TransportSolver solver(constant_field(g, Vec3::UnitZ()), m, nu, w, 1e-3);
  const Packet pk{16.0, 0.3, 2.0, 0.4};
  auto st = packet_state(g, w, pk);
  st.rho_vec[0] = 0.6 * st.rho0;
  st.rho_vec[2] = 0.8 * st.rho0;
  const auto r = solver.rhs(st);
  double err = 0.0;
  for (Eigen::Index i = 0; i < st.rho0.rows(); ++i) {
    for (Eigen::Index k = 0; k < st.rho0.cols(); ++k) {
      const double adv = -(st.p(k) / m) * pk.dgx(g.x(static_cast<std::size_t>(i))) * pk.gp(st.p(k));
      err = std::max(err, std::abs(r.rho0(i, k) - adv));
      err = std::max(err, std::abs(r.rho_vec[0](i, k) - (0.6 * adv - nu * st.rho_vec[0](i, k))));
      err = std::max(err, std::abs(r.rho_vec[1](i, k)));
      err = std::max(err, std::abs(r.rho_vec[2](i, k) - 0.8 * adv));
    }
  }
  CHECK(err < 1e-9);
}

TEST_CASE("x-independent isotropic state with spin along n is stationary") {
  const Grid g(32, 16.0);
  const MomentumWindow w{4.0, 128};
  const Vec3 n = Vec3(1, 2, 2).normalized();
  const TransportSolver solver(constant_field(g, n), 1.0, 2.0, w, 1e-3);
  auto st = make_phase_space(g, w);
  for (Eigen::Index k = 0; k < st.p.size(); ++k) {
    st.rho0.col(k).setConstant(std::exp(-st.p(k) * st.p(k)));
    for (int c = 0; c < 3; ++c) st.rho_vec[c].col(k).setConstant(0.4 * n(c) * std::exp(-st.p(k) * st.p(k)));
  }
  const auto r = solver.rhs(st);
  CHECK(r.rho0.cwiseAbs().maxCoeff() < 1e-12);
  for (int c = 0; c < 3; ++c) CHECK(r.rho_vec[c].cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("helix: diffusion coefficient and orientation source") {
  const Grid g(64, 32.0);
  const MomentumWindow w{4.0, 256};
  const double nu = 1.2, q = 2 * pi * 2 / 32.0;
  const TransportSolver solver(helix_field(g, 2), 1.0, nu, w, 1e-3);
  const Packet pk{16.0, 0.0, 2.0, 0.4};
  const auto st = packet_state(g, w, pk);
  const auto r = solver.rhs(st);
  double err0 = 0.0, errz = 0.0, errxy = 0.0;
  for (Eigen::Index i = 0; i < st.rho0.rows(); ++i) {
    const double x = g.x(static_cast<std::size_t>(i));
    for (Eigen::Index k = 0; k < st.rho0.cols(); ++k) {
      const double p = st.p(k);
      // d rho0 = -(p/m) d_x rho0 + (nu q^2/4) d_p^2 rho0 ; d rho_z = +(nu q/2) d_p rho0
      const double d0 = -p * pk.dgx(x) * pk.gp(p) + 0.25 * nu * q * q * pk.gx(x) * pk.d2gp(p);
      const double dz = 0.5 * nu * q * pk.gx(x) * pk.dgp(p);
      err0 = std::max(err0, std::abs(r.rho0(i, k) - d0));
      errz = std::max(errz, std::abs(r.rho_vec[2](i, k) - dz));
      errxy = std::max({errxy, std::abs(r.rho_vec[0](i, k)), std::abs(r.rho_vec[1](i, k))});
    }
  }
  CHECK(err0 < 1e-9);
  CHECK(errz < 1e-9);
  CHECK(errxy < 1e-12);
}

TEST_CASE("mass and momentum balance of the right-hand side") {
  const Grid g(64, 32.0);
  const MomentumWindow w{5.0, 256};
  const double nu = 0.9;
  const auto field = helix_field(g, 2);
  const TransportSolver solver(field, 1.0, nu, w, 1e-3);
  GaussianSpec spec{16.0, 0.2, 2.0};
  const auto st = init_phase_space(g, w, spec, Vec3(0.6, 0.0, 0.8));
  const auto dm = moments(solver.rhs(st));
  const auto m0 = moments(st);
  const auto geo = spin_geometry(field, 1.0);
  CHECK(std::abs(dm.trace) < 1e-12);
  CHECK(dm.mean_p == doctest::Approx(effective_force(geo.force_field, m0.spin, g.dx(), nu)).epsilon(1e-10));
  // z-polarized helix: force = nu q / 2
  const auto zpol = moments(init_phase_space(g, w, spec, Vec3(0, 0, 1)));
  CHECK(effective_force(geo.force_field, zpol.spin, g.dx(), nu) == doctest::Approx(0.5 * nu * 2 * pi * 2 / 32.0));
  // constant axis: no force and no flux source
  const auto cgeo = spin_geometry(constant_field(g, Vec3::UnitX()), 1.0);
  CHECK(effective_force(cgeo.force_field, zpol.spin, g.dx(), nu) == 0.0);
}

TEST_CASE("pure advection translates the packet exactly") {
  const Grid g(64, 32.0);
  const MomentumWindow w{3.0, 64};
  const double m = 1.0, dt = 0.01;
  const TransportSolver solver(constant_field(g, Vec3::UnitZ()), m, 0.0, w, dt);
  GaussianSpec spec{12.0, 0.5, 2.0};
  auto st = init_phase_space(g, w, spec, std::nullopt);
  const double sp = 0.25;
  for (int s = 0; s < 100; ++s) solver.step(st, s * dt);
  const double t = 100 * dt;
  double err = 0.0;
  for (Eigen::Index k = 0; k < st.p.size(); ++k) {
    GaussianSpec moved = spec;
    moved.center = spec.center + st.p(k) * t / m;
    const Eigen::VectorXd col = gaussian_wavefunction(g, moved).cwiseAbs2();
    const double gp = std::exp(-0.5 * std::pow((st.p(k) - 0.5) / sp, 2)) / (std::sqrt(2 * pi) * sp);
    err = std::max(err, (st.rho0.col(k) - gp * col).cwiseAbs().maxCoeff());
  }
  CHECK(err < 1e-4 * st.rho0.maxCoeff());
}

TEST_CASE("relaxation of transverse orientation is exact") {
  const Grid g(64, 32.0);
  const MomentumWindow w{3.0, 64};
  const double nu = 1.7, dt = 0.01;
  const TransportSolver solver(constant_field(g, Vec3::UnitZ()), 1.0, nu, w, dt);
  auto st = init_phase_space(g, w, GaussianSpec{16.0, 0.0, 2.0}, Vec3(1, 0, 0));
  for (int s = 0; s < 100; ++s) solver.step(st, s * dt);
  CHECK(moments(st).orientation.x() == doctest::Approx(std::exp(-nu * 1.0)).epsilon(5e-3));
  CHECK(moments(st).orientation.x() == doctest::Approx(std::exp(-nu * 1.0)).epsilon(1e-10));
}

TEST_CASE("helix momentum diffusion rate") {
  const Grid g(64, 32.0);
  const double nu = 0.5, q = 2 * pi * 2 / 32.0, T = 0.2;
  const GaussianSpec spec{16.0, 0.0, 2.0, 1.0};
  const auto field = helix_field(g, 2);
  const auto w = choose_momentum_window(spec, field, nu, T);
  const TransportSolver solver(field, 1.0, nu, w, 1e-3);
  const auto run = run_semiclassical(solver, init_phase_space(g, w, spec, std::nullopt), Schedule{T, 1e-3, 0.01, 0});
  std::vector<double> t, y;
  for (const auto& r : run.records) {
    t.push_back(r.time);
    y.push_back(r.mean_p2);
  }
  CHECK(initial_slope(t, y) == doctest::Approx(0.5 * nu * q * q).epsilon(0.02));
  CHECK(run.monitor.max_mass_drift < 1e-10);
  CHECK(run.monitor.max_leakage < 1e-8);
}

TEST_CASE("window and step validation") {
  const Grid g(64, 32.0);
  const auto field = helix_field(g, 2);
  CHECK_THROWS_AS(TransportSolver(field, 1.0, 1.0, MomentumWindow{4.0, 256}, 0.5), ConfigError);
  CHECK_THROWS_AS(TransportSolver(field, 1.0, 1.0, MomentumWindow{4.0, 7}, 1e-3), ConfigError);
  const MomentumWindow tiny{0.6, 32};
  const TransportSolver solver(field, 1.0, 1.0, tiny, 1e-3);
  CHECK_THROWS_AS(run_semiclassical(solver, init_phase_space(g, tiny, GaussianSpec{16.0, 0.0, 2.0}, std::nullopt),
                                    Schedule{0.1, 1e-3, 0.01, 0}),
                  NumericalAbort);
}
