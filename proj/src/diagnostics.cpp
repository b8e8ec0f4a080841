#include "pointer/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>

#include "pointer/errors.hpp"

namespace pointer {

namespace {

using Index = Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

double output_interval(const std::vector<ObservableRecord>& r) {
  if (r.size() < 2) throw ConfigError("diagnostic needs at least two output records");
  return r[1].time - r[0].time;
}

}  // namespace

double early_rate(const std::vector<double>& t, const std::vector<double>& y, double window, std::size_t min_points) {
  std::vector<std::size_t> use;
  for (std::size_t i = 0; i < t.size(); ++i)
    if (t[i] <= window * (1.0 + 1e-9)) use.push_back(i);
  if (use.size() < std::max<std::size_t>(min_points, 3)) {
    throw ConfigError("early-time window t <= " + std::to_string(window) + " holds " + std::to_string(use.size()) +
                      " outputs; need at least " + std::to_string(std::max<std::size_t>(min_points, 3)) +
                      " (reduce the output interval)");
  }
  Eigen::MatrixXd a(idx(use.size()), 3);
  Eigen::VectorXd b(idx(use.size()));
  for (std::size_t k = 0; k < use.size(); ++k) {
    const double tt = t[use[k]];
    a.row(idx(k)) << 1.0, tt, tt * tt;
    b(idx(k)) = y[use[k]];
  }
  return a.colPivHouseholderQr().solve(b)(1);
}

std::vector<double> force_series(const std::vector<ObservableRecord>& records, const SpinGeometry& geometry,
                                 double nu) {
  std::vector<double> f;
  f.reserve(records.size());
  for (const auto& r : records) f.push_back(effective_force(geometry.force_field, r.spin, geometry.grid.dx(), nu));
  return f;
}

ForceBalance force_balance(const std::vector<ObservableRecord>& records, const SpinGeometry& geometry, double nu) {
  const double h = output_interval(records);
  if (records.size() < 3) throw ConfigError("force balance needs at least three output records");
  if (nu > 0.0 && h > 0.05 / nu) {
    throw ConfigError("output interval " + std::to_string(h) +
                      " is too coarse for centered differences; need <= 0.05/nu = " + std::to_string(0.05 / nu));
  }
  ForceBalance fb;
  const std::vector<double> force = force_series(records, geometry, nu);
  for (std::size_t k = 1; k + 1 < records.size(); ++k) {
    const double d = (records[k + 1].mean_p - records[k - 1].mean_p) / (records[k + 1].time - records[k - 1].time);
    fb.times.push_back(records[k].time);
    fb.dpdt.push_back(d);
    fb.force.push_back(force[k]);
    fb.residual.push_back(d - force[k]);
    fb.max_abs_residual = std::max(fb.max_abs_residual, std::abs(d - force[k]));
    fb.max_abs_force = std::max(fb.max_abs_force, std::abs(force[k]));
  }
  fb.relative_residual = fb.max_abs_force > 0.0 ? fb.max_abs_residual / fb.max_abs_force : fb.max_abs_residual;
  std::vector<double> t, p;
  for (const auto& r : records) {
    t.push_back(r.time);
    p.push_back(r.mean_p);
  }
  const double window = nu > 0.0 ? 0.1 / nu : records.back().time;
  fb.early_force = early_rate(t, p, window, 3);
  return fb;
}

AxisField separation_axis(const AxisField& field) {
  const Grid& grid = field.grid();
  FieldParams p;
  p.samples.resize(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const Vec3 e = field.n(i).cross(field.dn(i));
    if (e.norm() < 1e-10) {
      throw ConfigError("separation axis undefined at grid index " + std::to_string(i) + ": dn/dx is parallel to n");
    }
    p.samples[i] = e.normalized();
  }
  return build_axis_field(FieldKind::sampled, std::move(p), grid);
}

SeparationCollector::SeparationCollector(const AxisField& field, double mass)
    : field_(&field),
      mass_(mass),
      pointer_geometry_(spin_geometry(field, mass)),
      axis_geometry_(spin_geometry(separation_axis(field), mass)),
      spectral_(field.grid()) {}

void SeparationCollector::operator()(double t, const DensityMatrix& rho) {
  const double dx = rho.grid().dx();
  if (field_->time_dependent()) pointer_geometry_ = spin_geometry(*field_, mass_, t);
  const SectorProjection axis = project_sectors(rho, axis_geometry_);
  const SectorProjection ptr = project_sectors(rho, pointer_geometry_);
  times.push_back(t);
  total_p.push_back(mean_momentum(decompose(rho).rho0, spectral_));
  // + is the sector along F = n' x n, i.e. the -e sector of the sampled axis
  p_plus.push_back(kinetic_momentum(axis.minus, axis_geometry_.a_minus, spectral_));
  p_minus.push_back(kinetic_momentum(axis.plus, axis_geometry_.a_plus, spectral_));
  w_plus.push_back(axis.minus.diagonal().real().sum() * dx);
  w_minus.push_back(axis.plus.diagonal().real().sum() * dx);
  p_pointer_plus.push_back(kinetic_momentum(ptr.plus, pointer_geometry_.a_plus, spectral_));
  p_pointer_minus.push_back(kinetic_momentum(ptr.minus, pointer_geometry_.a_minus, spectral_));
  const PhaseSpaceState w = wigner_transform(rho);
  correlator.push_back((w.rho_vec[2] * w.p).sum() * dx * w.dp);
}

SpinSeparation spin_separation(const SeparationCollector& c, double nu) {
  SpinSeparation s;
  s.times = c.times;
  for (std::size_t k = 0; k < c.times.size(); ++k) {
    s.separation.push_back(c.p_plus[k] - c.p_minus[k]);
    s.max_abs_total_p = std::max(s.max_abs_total_p, std::abs(c.total_p[k]));
    s.max_abs_pointer_separation =
        std::max(s.max_abs_pointer_separation, std::abs(c.p_pointer_plus[k] - c.p_pointer_minus[k]));
  }
  if (c.times.empty()) return s;
  const double window = nu > 0.0 ? 0.1 / nu : c.times.back();
  s.early_force_plus = early_rate(c.times, c.p_plus, window, 3) / c.w_plus.front();
  s.early_force_minus = early_rate(c.times, c.p_minus, window, 3) / c.w_minus.front();
  s.correlator_monotone = true;
  double prev = c.correlator.front();
  for (std::size_t k = 1; k < c.times.size() && c.times[k] <= window * (1.0 + 1e-9); ++k) {
    if (!(std::abs(c.correlator[k]) > std::abs(prev))) s.correlator_monotone = false;
    if (c.correlator[k] * c.correlator[1] < 0.0) s.correlator_monotone = false;
    prev = c.correlator[k];
  }
  return s;
}

FluxSourceCheck flux_source_check(const std::vector<ObservableRecord>& records, const SpinGeometry& geometry,
                                  double nu) {
  FluxSourceCheck fc;
  fc.dt = output_interval(records);
  const ObservableRecord& a = records[0];
  const ObservableRecord& b = records[1];
  double pol = 0.0;
  for (int c = 0; c < 3; ++c) pol = std::max(pol, a.spin[c].cwiseAbs().maxCoeff());
  if (pol > 1e-12 * a.density.cwiseAbs().maxCoeff()) {
    fc.skipped = true;
    fc.note = "initial state is polarized; other transport terms contribute to the flux, check skipped";
    return fc;
  }
  const Index n = a.density.size();
  fc.measured = (b.flux[2] - a.flux[2]) / fc.dt;
  fc.predicted.resize(n);
  for (Index i = 0; i < n; ++i) {
    fc.predicted(i) = 0.5 * nu * geometry.force_field[static_cast<std::size_t>(i)].z() * 0.5 *
                      (a.density(i) + b.density(i));
  }
  fc.max_source = fc.predicted.cwiseAbs().maxCoeff();
  const double res = (fc.measured - fc.predicted).cwiseAbs().maxCoeff();
  fc.relative_residual = fc.max_source > 0.0 ? res / fc.max_source : res;
  return fc;
}

DiffusionFit diffusion_rate(const std::vector<ObservableRecord>& records, const AxisField& field, double nu) {
  DiffusionFit d;
  double g2 = 0.0;
  for (std::size_t i = 0; i < field.grid().size(); ++i) g2 = std::max(g2, field.dn(i).squaredNorm());
  d.expected = 0.5 * nu * g2;
  d.window = nu > 0.0 ? 0.1 / nu : records.back().time;
  std::vector<double> t, p2;
  for (const auto& r : records) {
    t.push_back(r.time);
    p2.push_back(r.mean_p2);
    if (r.time <= d.window * (1.0 + 1e-9)) ++d.points;
  }
  d.slope = early_rate(t, p2, d.window, 10);
  d.relative_error = d.expected != 0.0 ? std::abs(d.slope - d.expected) / d.expected : std::abs(d.slope);
  return d;
}

bool ExperimentReport::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
}

nlohmann::json ExperimentReport::to_json() const {
  nlohmann::json j;
  j["scenario"] = scenario;
  j["config_hash"] = config_hash;
  j["seed"] = seed;
  j["version"] = version;
  j["all_passed"] = all_passed();
  j["derived"] = derived;
  j["notes"] = notes;
  j["checks"] = nlohmann::json::array();
  for (const auto& c : checks) {
    j["checks"].push_back({{"name", c.name},
                           {"value", c.value},
                           {"tolerance", c.tolerance},
                           {"passed", c.passed},
                           {"detail", c.detail},
                           {"data", c.data}});
  }
  return j;
}

std::string ExperimentReport::to_text() const {
  std::ostringstream os;
  os << "scenario: " << scenario << "\n"
     << "version: " << version << "  config: " << config_hash << "  seed: " << seed << "\n";
  for (const auto& c : checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.name << "  value=" << std::setprecision(6) << c.value
       << "  tol=" << c.tolerance;
    if (!c.detail.empty()) os << "  (" << c.detail << ")";
    os << "\n";
  }
  for (const auto& n : notes) os << "note: " << n << "\n";
  for (auto it = derived.begin(); it != derived.end(); ++it) {
    if (it.value().is_number()) os << it.key() << " = " << std::setprecision(10) << it.value().get<double>() << "\n";
  }
  return os.str();
}

}  // namespace pointer
