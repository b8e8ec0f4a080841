#include <cmath>
#include <numbers>

#include "doctest.h"
#include "pointer/diagnostics.hpp"
#include "pointer/errors.hpp"

using namespace pointer;
using std::numbers::pi;

namespace {

AxisField helix_field(const Grid& g, int winding) {
  FieldParams p;
  p.q = 2 * pi * winding / g.length();
  return build_axis_field(FieldKind::helix, p, g);
}

}  // namespace

TEST_CASE("early rate recovers the slope of a quadratic") {
  std::vector<double> t, y;
  for (int k = 0; k <= 20; ++k) {
    t.push_back(0.01 * k);
    y.push_back(1.0 + 3.0 * t.back() - 7.0 * t.back() * t.back());
  }
  CHECK(early_rate(t, y, 0.1) == doctest::Approx(3.0).epsilon(1e-10));
  CHECK_THROWS_AS(early_rate(t, y, 0.05), ConfigError);
}

TEST_CASE("force balance on a z-polarized helix state") {
  const Grid g(64, 32.0);
  const auto field = helix_field(g, 2);
  const double nu = 1.0, q = 2 * pi * 2 / 32.0;
  const auto geo = spin_geometry(field, 1.0);
  const auto rho = init_gaussian(g, GaussianSpec{16.0, 0.0, 2.0}, spinor_from_bloch(Vec3(0, 0, 1)));
  const auto run = run_lindblad(MasterEquation(field, 1.0, nu), rho, Schedule{0.5, 1e-3, 0.01, 50});
  const auto fb = force_balance(run.records, geo, nu);
  CHECK(fb.relative_residual < 1e-3);
  CHECK(fb.early_force == doctest::Approx(0.5 * nu * q).epsilon(0.02));
  CHECK_THROWS_AS(force_balance(run.records, geo, 10.0), ConfigError);

  // antipodal spinor flips the whole momentum history
  const auto anti = run_lindblad(MasterEquation(field, 1.0, nu),
                                 init_gaussian(g, GaussianSpec{16.0, 0.0, 2.0}, spinor_from_bloch(Vec3(0, 0, -1))),
                                 Schedule{0.5, 1e-3, 0.01, 50});
  for (std::size_t k = 0; k < run.records.size(); ++k) {
    CHECK(std::abs(run.records[k].mean_p + anti.records[k].mean_p) < 1e-8);
  }
}

TEST_CASE("trivial zero cases") {
  const Grid g(64, 32.0);
  FieldParams p;
  p.direction = Vec3::UnitX();
  const auto field = build_axis_field(FieldKind::constant, p, g);
  const auto geo = spin_geometry(field, 1.0);
  const auto run = run_lindblad(MasterEquation(field, 1.0, 2.0),
                                init_gaussian(g, GaussianSpec{16.0, 0.3, 2.0}, spinor_from_bloch(Vec3(0, 0, 1))),
                                Schedule{0.2, 1e-3, 0.005, 50});
  const auto fb = force_balance(run.records, geo, 2.0);
  CHECK(fb.max_abs_force == 0.0);
  CHECK(fb.max_abs_residual < 1e-10);
  const auto d = diffusion_rate(run.records, field, 2.0);
  CHECK(d.expected == 0.0);
  CHECK(std::abs(d.slope) < 1e-10);
  CHECK(flux_source_check(run.records, geo, 2.0).skipped);
  CHECK_THROWS_AS(separation_axis(field), ConfigError);
}

TEST_CASE("unpolarized helix: flux source, diffusion and spin separation") {
  const Grid g(64, 32.0);
  const auto field = helix_field(g, 2);
  const double nu = 4.0, q = 2 * pi * 2 / 32.0;
  const auto geo = spin_geometry(field, 1.0);
  SeparationCollector col(field, 1.0);
  const auto run = run_lindblad(MasterEquation(field, 1.0, nu), init_unpolarized(g, GaussianSpec{16.0, 0.0, 2.0}),
                                Schedule{0.1, 2.5e-4, 2.5e-3, 50}, std::ref(col));
  const auto fc = flux_source_check(run.records, geo, nu);
  REQUIRE_FALSE(fc.skipped);
  CHECK(fc.relative_residual < 0.05);
  const auto d = diffusion_rate(run.records, field, nu);
  CHECK(d.slope == doctest::Approx(0.5 * nu * q * q).epsilon(0.1));
  const auto sep = spin_separation(col, nu);
  CHECK(sep.max_abs_total_p < 1e-8);
  CHECK(sep.early_force_plus == doctest::Approx(0.5 * nu * q).epsilon(0.05));
  CHECK(sep.early_force_minus == doctest::Approx(-0.5 * nu * q).epsilon(0.05));
  CHECK(sep.max_abs_pointer_separation < 1e-10);
  CHECK(sep.separation.back() > 0.0);
  CHECK(sep.correlator_monotone);
}

TEST_CASE("report formatting") {
  ExperimentReport r;
  r.scenario = "demo";
  r.add(Check{"a", 1.0, 2.0, true, "", {}});
  r.add(Check{"b", 3.0, 2.0, false, "too big", {{"raw", {1, 2}}}});
  r.derived["rate"] = 0.5;
  CHECK_FALSE(r.all_passed());
  const auto j = r.to_json();
  CHECK(j["checks"].size() == 2);
  CHECK(j["checks"][1]["data"]["raw"][1] == 2);
  const auto text = r.to_text();
  CHECK(text.find("FAIL b") != std::string::npos);
  CHECK(text.find("rate = 0.5") != std::string::npos);
}
