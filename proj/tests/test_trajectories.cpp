#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pointer/errors.hpp"
#include "pointer/trajectories.hpp"

using namespace pointer;
using std::numbers::pi;

namespace {

AxisField helix_field(const Grid& g, int winding) {
  FieldParams p;
  p.q = 2 * pi * winding / g.length();
  return build_axis_field(FieldKind::helix, p, g);
}

}  // namespace

TEST_CASE("no decoherence gives exact free evolution without jumps") {
  const Grid g(64, 32.0);
  const auto field = helix_field(g, 1);
  const auto psi = gaussian_wavefunction(g, GaussianSpec{16.0, 0.6, 2.0});
  const auto psi0 = spinor_wavefunction(psi, spinor_from_bloch(Vec3(1, 0, 0)));
  const Schedule s{2.0, 0.01, 0.5, 50};
  const auto run = evolve_trajectory(psi0, field, 1.0, 0.0, s, 1);
  CHECK(run.state.jumps.empty());
  CHECK(run.samples.size() == 5);
  Eigen::VectorXcd ref = psi0;
  KineticPropagator(g, 1.0).apply_spinor(ref, 2.0);
  CHECK((run.state.psi - ref).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(run.samples.back().mean_x == doctest::Approx(16.0 + 0.6 * 2.0).epsilon(1e-9));
  CHECK(run.samples.back().mean_p == doctest::Approx(0.6).epsilon(1e-9));
}

TEST_CASE("eigenstates of every local projector are left invariant") {
  const Grid g(64, 32.0);
  FieldParams p;
  const auto field = build_axis_field(FieldKind::constant, p, g);
  const auto psi = gaussian_wavefunction(g, GaussianSpec{16.0, 0.3, 2.0});
  const auto psi0 = spinor_wavefunction(psi, spinor_from_bloch(Vec3(0, 0, 1)));
  const Schedule s{3.0, 0.01, 0.5, 50};
  const auto run = evolve_trajectory(psi0, field, 1.0, 4.0, s, 5);
  CHECK(run.state.jumps.size() > 3);
  for (const auto& j : run.state.jumps) CHECK(j.outcome == 1);
  Eigen::VectorXcd ref = psi0;
  KineticPropagator(g, 1.0).apply_spinor(ref, 3.0);
  CHECK((run.state.psi - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("norm is preserved through jumps") {
  const Grid g(64, 32.0);
  const auto field = helix_field(g, 2);
  const auto psi0 = spinor_wavefunction(gaussian_wavefunction(g, GaussianSpec{16.0, 0.0, 2.0}),
                                        spinor_from_bloch(Vec3(0, 0, 1)));
  const auto run = evolve_trajectory(psi0, field, 1.0, 10.0, Schedule{2.0, 0.01, 0.1, 50}, 3);
  CHECK(run.state.jumps.size() > 5);
  for (const auto& s : run.samples) CHECK(std::abs(s.norm - 1.0) < 1e-10);
}

TEST_CASE("jump counts are Poisson distributed") {
  const Grid g(64, 32.0);
  const auto field = helix_field(g, 1);
  const auto psi0 = spinor_wavefunction(gaussian_wavefunction(g, GaussianSpec{16.0, 0.0, 2.0}),
                                        spinor_from_bloch(Vec3(0, 0, 1)));
  const double nu = 2.0, T = 1.5, lambda = nu * T;
  const std::size_t n = 1000;
  EnsembleOptions opt;
  opt.n_traj = n;
  opt.base_seed = 77;
  const auto ens = ensemble_average({psi0}, field, 1.0, nu, Schedule{T, 0.01, 0.5, 50}, opt);
  REQUIRE(ens.jump_counts.size() == n);
  double s = 0.0, s2 = 0.0;
  for (auto c : ens.jump_counts) {
    s += static_cast<double>(c);
    s2 += static_cast<double>(c * c);
  }
  const double mean = s / n;
  const double var = (s2 - n * mean * mean) / (n - 1.0);
  // Poisson: Var[mean] = lambda/n, Var[sample variance] ~ (lambda + 2 lambda^2)/n
  CHECK(std::abs(mean - lambda) < 3.0 * std::sqrt(lambda / n));
  CHECK(std::abs(var - lambda) < 3.0 * std::sqrt((lambda + 2 * lambda * lambda) / n));
}

TEST_CASE("ensembles are reproducible and independent of the thread count") {
  const Grid g(64, 32.0);
  const auto field = helix_field(g, 1);
  const auto psi0 = spinor_wavefunction(gaussian_wavefunction(g, GaussianSpec{16.0, 0.2, 2.0}),
                                        spinor_from_bloch(Vec3(1, 0, 0)));
  const Schedule s{1.0, 0.01, 0.25, 50};
  EnsembleOptions opt;
  opt.n_traj = 60;
  opt.base_seed = 123;
  const auto a = ensemble_average({psi0}, field, 1.0, 3.0, s, opt);
  const auto b = ensemble_average({psi0}, field, 1.0, 3.0, s, opt);
  opt.threads = 4;
  const auto c = ensemble_average({psi0}, field, 1.0, 3.0, s, opt);
  opt.base_seed = 124;
  const auto d = ensemble_average({psi0}, field, 1.0, 3.0, s, opt);
  for (std::size_t o = 0; o < a.records.size(); ++o) {
    CHECK(a.records[o].mean_p.mean == b.records[o].mean_p.mean);
    CHECK(a.records[o].mean_p.mean == c.records[o].mean_p.mean);
    CHECK(a.records[o].orientation[2].se == c.records[o].orientation[2].se);
    CHECK((a.records[o].spin_mean[0] - c.records[o].spin_mean[0]).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(a.jump_counts == c.jump_counts);
  CHECK(a.jump_counts != d.jump_counts);
}

TEST_CASE("unpolarized ensembles stay unpolarized along z") {
  const Grid g(64, 32.0);
  const auto field = helix_field(g, 1);
  const auto psi = gaussian_wavefunction(g, GaussianSpec{16.0, 0.0, 2.0});
  const std::vector<Eigen::VectorXcd> mix{spinor_wavefunction(psi, spinor_from_bloch(Vec3(0, 0, 1))),
                                          spinor_wavefunction(psi, spinor_from_bloch(Vec3(0, 0, -1)))};
  EnsembleOptions opt;
  opt.n_traj = 200;
  opt.base_seed = 9;
  const auto ens = ensemble_average(mix, field, 1.0, 2.0, Schedule{1.0, 0.01, 0.25, 50}, opt);
  for (const auto& r : ens.records) {
    CHECK(std::abs(r.orientation[2].mean) <= 3.0 * r.orientation[2].se + 1e-12);
    // 64 strongly correlated points per time: a family-wise bound, not 3 SE per point
    for (Eigen::Index i = 0; i < r.spin_mean[2].size(); ++i) {
      CHECK(std::abs(r.spin_mean[2](i)) <= 5.0 * r.spin_se[2](i) + 1e-12);
    }
  }
  opt.n_traj = 201;
  CHECK_THROWS_AS(ensemble_average(mix, field, 1.0, 2.0, Schedule{1.0, 0.01, 0.25, 50}, opt), ConfigError);
}

TEST_CASE("ensemble reproduces the master equation within Monte Carlo error") {
  const Grid g(64, 32.0);
  const auto field = helix_field(g, 2);
  const double nu = 2.0, m = 1.0;
  const auto psi = gaussian_wavefunction(g, GaussianSpec{16.0, 0.0, 2.0});
  const auto spinor = spinor_from_bloch(Vec3(0, 0, 1));
  const Schedule s{1.0, 0.005, 0.1, 50};
  const auto ref = run_lindblad(MasterEquation(field, m, nu), init_gaussian(g, {16.0, 0.0, 2.0}, spinor), s);
  EnsembleOptions opt;
  opt.n_traj = 400;
  opt.base_seed = 2;
  const auto ens = ensemble_average({spinor_wavefunction(psi, spinor)}, field, m, nu, s, opt);
  REQUIRE(ens.records.size() == ref.records.size());
  for (std::size_t o = 0; o < ens.records.size(); ++o) {
    const auto& e = ens.records[o];
    CHECK(std::abs(e.mean_p.mean - ref.records[o].mean_p) <= 3.0 * e.mean_p.se + 1e-10);
    CHECK(std::abs(e.orientation[2].mean - ref.records[o].orientation.z()) <= 3.0 * e.orientation[2].se + 1e-10);
  }
}

TEST_CASE("weighted ensembles of kicked packets reproduce a coherence-limited state") {
  const Grid g(64, 32.0);
  const auto field = helix_field(g, 2);
  const double nu = 2.0;
  const GaussianSpec spec{16.0, 0.0, 2.0, 1.0};
  const auto mix = gaussian_mixture(g, spec);
  std::vector<Eigen::VectorXcd> states;
  std::vector<double> weights;
  for (std::size_t k = 0; k < mix.states.size(); ++k) {
    for (const auto& b : {Vec3(0, 0, 1), Vec3(0, 0, -1)}) {
      states.push_back(spinor_wavefunction(mix.states[k], spinor_from_bloch(b)));
      weights.push_back(0.5 * mix.weights[k]);
    }
  }
  const Schedule s{1.0, 0.005, 0.1, 50};
  const auto ref = run_lindblad(MasterEquation(field, 1.0, nu), init_unpolarized(g, spec), s);
  EnsembleOptions opt;
  opt.n_traj = 400;
  opt.base_seed = 5;
  opt.weights = weights;
  const auto ens = ensemble_average(states, field, 1.0, nu, s, opt);
  for (std::size_t o = 0; o < ens.records.size(); ++o) {
    const auto& e = ens.records[o];
    CHECK(std::abs(e.mean_p2.mean - ref.records[o].mean_p2) <= 3.0 * e.mean_p2.se + 1e-10);
    CHECK(std::abs(e.mean_p.mean - ref.records[o].mean_p) <= 3.0 * e.mean_p.se + 1e-10);
  }
  opt.threads = 3;
  const auto again = ensemble_average(states, field, 1.0, nu, s, opt);
  CHECK(again.records.back().mean_p2.mean == ens.records.back().mean_p2.mean);
  opt.weights.pop_back();
  CHECK_THROWS(ensemble_average(states, field, 1.0, nu, s, opt));
}
