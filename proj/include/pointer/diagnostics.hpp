#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "pointer/fields.hpp"
#include "pointer/gauge.hpp"
#include "pointer/lindblad.hpp"

namespace pointer {

/// Slope at t = 0 of a least-squares quadratic through the samples with
/// t <= window. Throws ConfigError with fewer than `min_points` samples.
double early_rate(const std::vector<double>& t, const std::vector<double>& y, double window,
                  std::size_t min_points = 10);

/// -(nu/2) integral of F . rho_vec, per output record.
std::vector<double> force_series(const std::vector<ObservableRecord>& records, const SpinGeometry& geometry,
                                 double nu);

struct ForceBalance {
  std::vector<double> times;     // interior output times
  std::vector<double> dpdt;      // centered differences of <p>
  std::vector<double> force;     // -(nu/2) integral F . rho_vec at the same times
  std::vector<double> residual;  // dpdt - force
  double max_abs_residual = 0.0;
  double max_abs_force = 0.0;
  double relative_residual = 0.0;  // max|residual| / max|force| (absolute when the force vanishes)
  double early_force = 0.0;        // early_rate of <p>
};

/// Requires at least three records and an output interval <= 0.05/nu.
ForceBalance force_balance(const std::vector<ObservableRecord>& records, const SpinGeometry& geometry, double nu);

/// Collects sector-resolved momenta during a lindblad run. Two sector pairs are
/// tracked: the local pointer basis +-n(x), and +-F(x) with F = n' x n, the
/// direction in which an unpolarized state separates.
class SeparationCollector {
public:
  SeparationCollector(const AxisField& field, double mass);

  void operator()(double t, const DensityMatrix& rho);

  std::vector<double> times;
  std::vector<double> total_p;
  std::vector<double> p_plus, p_minus, w_plus, w_minus;          // along +-F, F = n' x n
  std::vector<double> p_pointer_plus, p_pointer_minus;           // along +-n
  std::vector<double> correlator;                                // integral p W_z dx dp

private:
  const AxisField* field_;
  double mass_;
  SpinGeometry pointer_geometry_;
  SpinGeometry axis_geometry_;
  Spectral spectral_;
};

/// Unit separation axis n x n' / |n x n'| as a sampled field; throws ConfigError
/// where n' vanishes.
AxisField separation_axis(const AxisField& field);

struct SpinSeparation {
  std::vector<double> times;
  std::vector<double> separation;  // <p>_+ - <p>_-
  double early_force_plus = 0.0;   // per unit sector weight
  double early_force_minus = 0.0;
  double max_abs_total_p = 0.0;
  double max_abs_pointer_separation = 0.0;
  bool correlator_monotone = false;  // over the early window
};

SpinSeparation spin_separation(const SeparationCollector& c, double nu);

struct FluxSourceCheck {
  bool skipped = false;
  std::string note;
  double dt = 0.0;
  Eigen::VectorXd measured;   // d j_z / dt over the first output interval
  Eigen::VectorXd predicted;  // (nu/2) F_z rho0, averaged over the interval ends
  double max_source = 0.0;
  double relative_residual = 0.0;
};

/// Uses the first output interval; skipped when the initial state is polarized.
FluxSourceCheck flux_source_check(const std::vector<ObservableRecord>& records, const SpinGeometry& geometry,
                                  double nu);

struct DiffusionFit {
  double slope = 0.0;
  double expected = 0.0;
  double relative_error = 0.0;
  double window = 0.0;
  std::size_t points = 0;
};

/// Early slope of <p^2> over t <= 0.1/nu (the whole run when nu = 0), compared
/// with nu max|n'|^2 / 2.
DiffusionFit diffusion_rate(const std::vector<ObservableRecord>& records, const AxisField& field, double nu);

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
  nlohmann::json data;
};

struct ExperimentReport {
  std::string scenario;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::string version = POINTER_LAB_VERSION;
  std::vector<Check> checks;
  nlohmann::json derived = nlohmann::json::object();
  std::vector<std::string> notes;

  void add(Check c) { checks.push_back(std::move(c)); }
  bool all_passed() const;
  nlohmann::json to_json() const;
  std::string to_text() const;
};

}  // namespace pointer
