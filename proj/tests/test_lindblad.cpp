#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"
#include "pointer/errors.hpp"
#include "pointer/lindblad.hpp"

using namespace pointer;
using std::numbers::pi;

namespace {

DensityMatrix random_state(const Grid& g, std::mt19937_64& rng) {
  const auto n = static_cast<Eigen::Index>(2 * g.size());
  std::normal_distribution<double> gauss;
  Eigen::MatrixXcd a(n, 4);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < 4; ++j) a(i, j) = cplx(gauss(rng), gauss(rng));
  DensityMatrix rho(g);
  rho.data() = a * a.adjoint();
  rho.data() /= rho.trace();
  return rho;
}

std::vector<Vec3> random_directions(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  std::vector<Vec3> out(n);
  for (auto& v : out) v = Vec3(gauss(rng), gauss(rng), gauss(rng)).normalized();
  return out;
}

// Closed-form generator for (rho0, rho_vec) at one pair of points with axes n1, n2:
// d rho0 = -(nu/4)|n1 - n2|^2 rho0 - (i nu/2)(n1 x n2) . r
// d r    = (nu/2) n1 (r . n2) + (nu/2)(n1 . r) n2 - (nu/4)|n1 + n2|^2 r + (i nu/2)(n1 x n2) rho0
void pair_oracle(const Vec3& n1, const Vec3& n2, cplx rho0, const Eigen::Vector3cd& r, double nu, cplx& d0,
                 Eigen::Vector3cd& dr) {
  const Eigen::Vector3cd c1 = n1.cast<cplx>();
  const Eigen::Vector3cd c2 = n2.cast<cplx>();
  const Eigen::Vector3cd cross = n1.cross(n2).cast<cplx>();
  const cplx i(0, 1);
  // plain bilinear products without conjugation
  const cplx r_dot_n2 = (r.array() * c2.array()).sum();
  const cplx n1_dot_r = (r.array() * c1.array()).sum();
  const cplx cross_dot_r = (r.array() * cross.array()).sum();
  d0 = -(nu / 4) * (n1 - n2).squaredNorm() * rho0 - (i * nu / 2.0) * cross_dot_r;
  dr = (nu / 2) * c1 * r_dot_n2 + (nu / 2) * n1_dot_r * c2 - (nu / 4) * (n1 + n2).squaredNorm() * r +
       (i * nu / 2.0) * cross * rho0;
}

double max_abs(const Eigen::MatrixXcd& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("Pauli decomposition round trip") {
  std::mt19937_64 rng(11);
  const Grid g(16, 4.0);
  const auto rho = random_state(g, rng);
  const auto back = recompose(g, decompose(rho));
  CHECK(max_abs(back.data() - rho.data()) < 1e-14);
}

TEST_CASE("pointer map is an idempotent projection preserving trace") {
  std::mt19937_64 rng(3);
  const Grid g(16, 4.0);
  const auto dirs = random_directions(g.size(), rng);
  const auto rho = random_state(g, rng);
  const auto once = pointer_map(dirs, rho);
  const auto twice = pointer_map(dirs, once);
  CHECK(max_abs(twice.data() - once.data()) < 1e-14);
  CHECK(once.trace() == doctest::Approx(rho.trace()).epsilon(1e-14));
  CHECK(once.hermiticity_error() < 1e-15);
  CHECK(once.min_eigenvalue() > -1e-12);
}

TEST_CASE("closed-form Pauli generator agrees with the brute-force dissipator") {
  std::mt19937_64 rng(2024);
  const Grid g(32, 8.0);
  const double nu = 1.3;
  for (int trial = 0; trial < 20; ++trial) {
    const auto dirs = random_directions(g.size(), rng);
    const auto rho = random_state(g, rng);
    const auto brute = decompose(dissipator_rhs(dirs, rho, nu));
    const auto fields = decompose(rho);
    const auto fast = pauli_rhs(dirs, fields, nu);
    double err = 0.0;
    const auto n = static_cast<Eigen::Index>(g.size());
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        Eigen::Vector3cd r(fields.rho_vec[0](i, j), fields.rho_vec[1](i, j), fields.rho_vec[2](i, j));
        cplx d0;
        Eigen::Vector3cd dr;
        pair_oracle(dirs[static_cast<std::size_t>(i)], dirs[static_cast<std::size_t>(j)], fields.rho0(i, j), r,
                    nu, d0, dr);
        err = std::max(err, std::abs(d0 - brute.rho0(i, j)));
        err = std::max(err, std::abs(d0 - fast.rho0(i, j)));
        for (int c = 0; c < 3; ++c) {
          err = std::max(err, std::abs(dr(c) - brute.rho_vec[c](i, j)));
          err = std::max(err, std::abs(dr(c) - fast.rho_vec[c](i, j)));
        }
      }
    }
    CHECK(err < 1e-12);
  }
}

TEST_CASE("exact dissipative channel") {
  std::mt19937_64 rng(5);
  const Grid g(16, 4.0);
  FieldParams p;
  p.q = 2 * pi / g.length();
  const auto geo = spin_geometry(build_axis_field(FieldKind::helix, p, g), 1.0);
  const auto rho = random_state(g, rng);

  SUBCASE("zero time is the identity") {
    CHECK(max_abs(dissipator_channel(geo, rho, 2.0, 0.0).data() - rho.data()) < 1e-15);
  }
  SUBCASE("long time reaches the pointer map") {
    const auto phi = pointer_map(geo.direction, rho);
    CHECK(max_abs(dissipator_channel(geo, rho, 2.0, 40.0).data() - phi.data()) < 1e-14);
  }
  SUBCASE("semigroup property") {
    const auto a = dissipator_channel(geo, dissipator_channel(geo, rho, 1.5, 0.2), 1.5, 0.3);
    const auto b = dissipator_channel(geo, rho, 1.5, 0.5);
    CHECK(max_abs(a.data() - b.data()) < 1e-14);
  }
}

TEST_CASE("constant axis: transverse spin decays as exp(-nu t) and the longitudinal part is untouched") {
  const Grid g(64, 32.0);
  FieldParams p;
  p.direction = Vec3::UnitZ();
  const auto field = build_axis_field(FieldKind::constant, p, g);
  const double nu = 0.7;
  const MasterEquation eq(field, 1.0, nu);
  GaussianSpec spec{16.0, 0.0, 1.5};
  auto rho = init_gaussian(g, spec, spinor_from_bloch(Vec3(1, 0, 0)));
  const Spectral sp(g);
  const double dt = 0.01;
  for (int s = 0; s < 100; ++s) eq.step(rho, s * dt, dt);
  const auto obs = observables(rho, sp);
  CHECK(obs.orientation.x() == doctest::Approx(std::exp(-nu * 1.0)).epsilon(1e-10));
  CHECK(std::abs(obs.orientation.z()) < 1e-14);
  CHECK(obs.trace == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("Gaussian initial states") {
  const Grid g(64, 32.0);
  const Spectral sp(g);
  GaussianSpec spec{16.0, 0.8, 2.0};
  const auto psi = gaussian_wavefunction(g, spec);
  CHECK(psi.squaredNorm() * g.dx() == doctest::Approx(1.0).epsilon(1e-12));

  const auto pure = init_gaussian(g, spec, spinor_from_bloch(Vec3(0, 0, 1)));
  const auto obs = observables(pure, sp);
  CHECK(obs.purity == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(obs.mean_x == doctest::Approx(16.0).epsilon(1e-10));
  CHECK(obs.var_x == doctest::Approx(4.0).epsilon(1e-8));
  CHECK(obs.mean_p == doctest::Approx(0.8).epsilon(1e-8));
  // <p^2> = p0^2 + 1/(4 sigma^2)
  CHECK(obs.mean_p2 == doctest::Approx(0.64 + 1.0 / 16.0).epsilon(1e-8));
  CHECK((obs.orientation - Vec3(0, 0, 1)).norm() < 1e-12);

  const auto mixed = init_unpolarized(g, spec);
  CHECK(observables(mixed, sp).purity == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(observables(mixed, sp).orientation.norm() < 1e-14);

  CHECK_THROWS_AS(gaussian_wavefunction(g, GaussianSpec{16.0, 0.0, 0.9}), ConfigError);
  CHECK_THROWS_AS(gaussian_wavefunction(g, GaussianSpec{16.0, 0.0, 6.0}), ConfigError);
}

TEST_CASE("free evolution: drift and spreading") {
  const Grid g(128, 64.0);
  FieldParams p;
  const auto field = build_axis_field(FieldKind::constant, p, g);
  const double m = 1.3, p0 = 0.4, sigma = 2.0, T = 3.0;
  const MasterEquation eq(field, m, 0.0);
  auto rho = init_gaussian(g, GaussianSpec{20.0, p0, sigma}, spinor_from_bloch(Vec3(1, 0, 0)));
  const double dt = 0.05;
  for (int s = 0; s < 60; ++s) eq.step(rho, s * dt, dt);
  const auto obs = observables(rho, Spectral(g));
  // sigma(t)^2 = sigma^2 + (t / (2 m sigma))^2
  const double var = sigma * sigma + std::pow(T / (2 * m * sigma), 2);
  CHECK(obs.mean_x == doctest::Approx(20.0 + p0 * T / m).epsilon(1e-9));
  CHECK(obs.var_x == doctest::Approx(var).epsilon(1e-8));
  CHECK(obs.mean_p == doctest::Approx(p0).epsilon(1e-9));
  CHECK(obs.purity == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("kinetic propagator agrees between density and spinor paths") {
  const Grid g(32, 16.0);
  const KineticPropagator kin(g, 0.9);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> gauss;
  Eigen::VectorXcd psi(64);
  for (auto& v : psi) v = cplx(gauss(rng), gauss(rng));
  DensityMatrix rho(g);
  rho.data() = psi * psi.adjoint();
  kin.apply_spinor(psi, 0.37);
  kin.apply(rho, 0.37);
  CHECK(max_abs(rho.data() - psi * psi.adjoint()) < 1e-10 * max_abs(rho.data()));
}

TEST_CASE("Wigner transform marginals and positivity") {
  const Grid g(128, 32.0);
  GaussianSpec spec{16.0, 0.5, 1.0};
  const auto rho = init_gaussian(g, spec, spinor_from_bloch(Vec3(0, 1, 0)));
  const auto w = wigner_transform(rho);
  const auto obs = observables(rho, Spectral(g));
  const auto nx = w.rho0.rows();
  for (Eigen::Index i = 0; i < nx; ++i) {
    CHECK(w.rho0.row(i).sum() * w.dp == doctest::Approx(obs.density(i)).epsilon(1e-10).scale(1.0));
    CHECK(w.rho_vec[1].row(i).sum() * w.dp == doctest::Approx(obs.spin[1](i)).epsilon(1e-10).scale(1.0));
  }
  // a pure Gaussian has a positive Gaussian Wigner function
  CHECK(w.rho0.minCoeff() > -1e-10 * w.rho0.maxCoeff());
  CHECK(w.mass() == doctest::Approx(1.0).epsilon(1e-10));
  double mean_p = 0.0;
  for (Eigen::Index i = 0; i < nx; ++i)
    for (Eigen::Index k = 0; k < w.rho0.cols(); ++k) mean_p += w.p(k) * w.rho0(i, k);
  CHECK(mean_p * g.dx() * w.dp == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("run_lindblad bookkeeping") {
  const Grid g(64, 32.0);
  FieldParams p;
  p.q = 2 * pi / g.length();
  const MasterEquation eq(build_axis_field(FieldKind::helix, p, g), 1.0, 1.0);
  auto rho = init_gaussian(g, GaussianSpec{16.0, 0.0, 1.5}, spinor_from_bloch(Vec3(0, 0, 1)));
  Schedule s{0.5, 0.01, 0.1, 10};
  int calls = 0;
  const auto run = run_lindblad(eq, rho, s, [&](double, const DensityMatrix&) { ++calls; });
  CHECK(run.records.size() == 6);
  CHECK(calls == 6);
  CHECK(run.records.back().time == doctest::Approx(0.5));
  CHECK(run.monitor.max_trace_drift_rate < 1e-10);
  CHECK(run.monitor.max_hermiticity_error < 1e-12);
  CHECK(run.monitor.min_eigenvalue > -1e-8);
  CHECK_THROWS_AS(steps_per_output(Schedule{1.0, 0.03, 0.1, 10}), ConfigError);
  CHECK(eq.max_stable_dt(10.0) == doctest::Approx(std::min({0.1, 0.1 * 0.25, 0.01})));
}

TEST_CASE("coherence-limited packet as a mixture of kicked pure packets") {
  const Grid g(64, 32.0);
  const GaussianSpec spec{16.0, 0.3, 2.0, 1.5};
  const auto mix = gaussian_mixture(g, spec);
  REQUIRE(mix.states.size() > 1);
  Eigen::MatrixXcd sum = Eigen::MatrixXcd::Zero(64, 64);
  double wsum = 0.0;
  for (std::size_t k = 0; k < mix.states.size(); ++k) {
    CHECK(mix.weights[k] > 0.0);
    CHECK(mix.states[k].squaredNorm() * g.dx() == doctest::Approx(1.0).epsilon(1e-12));
    sum += mix.weights[k] * mix.states[k] * mix.states[k].adjoint();
    wsum += mix.weights[k];
  }
  CHECK(wsum == doctest::Approx(1.0).epsilon(1e-12));
  // oracle: the damped density built entry by entry
  const auto psi = gaussian_wavefunction(g, spec);
  double err = 0.0;
  for (std::size_t i = 0; i < 64; ++i) {
    for (std::size_t j = 0; j < 64; ++j) {
      double d = std::abs(g.x(i) - g.x(j));
      d = std::min(d, 32.0 - d);
      const auto ii = static_cast<Eigen::Index>(i), jj = static_cast<Eigen::Index>(j);
      const std::complex<double> want = psi(ii) * std::conj(psi(jj)) * std::exp(-d * d / (2 * 1.5 * 1.5));
      err = std::max(err, std::abs(sum(ii, jj) - want));
    }
  }
  CHECK(err < 1e-12);
  CHECK(gaussian_mixture(g, GaussianSpec{16.0, 0.3, 2.0}).states.size() == 1);
}
