#include "pointer/run.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>

#include "pointer/errors.hpp"
#include "pointer/gauge.hpp"
#include "pointer/semiclassical.hpp"
#include "pointer/trajectories.hpp"

namespace pointer {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Csv {
public:
  Csv(const fs::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t k = 0; k < header.size(); ++k) out_ << (k ? "," : "") << header[k];
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    for (std::size_t k = 0; k < values.size(); ++k) out_ << (k ? "," : "") << g17(values[k]);
    out_ << '\n';
  }

private:
  std::ofstream out_;
};

class Output {
public:
  Output(fs::path dir, std::vector<std::string>& artifacts) : dir_(std::move(dir)), artifacts_(&artifacts) {}

  bool enabled() const { return !dir_.empty(); }

  std::optional<Csv> csv(const std::string& name, const std::vector<std::string>& header) {
    if (!enabled()) return std::nullopt;
    artifacts_->push_back(name);
    return Csv(dir_ / name, header);
  }

  void text(const std::string& name, const std::string& body) {
    if (!enabled()) return;
    artifacts_->push_back(name);
    std::ofstream out(dir_ / name);
    out << body;
  }

private:
  fs::path dir_;
  std::vector<std::string>* artifacts_;
};

Check less_than(std::string name, double value, double tol, std::string detail = {}) {
  return Check{std::move(name), value, tol, value < tol, std::move(detail), {}};
}

// |n'| is the same at every grid point (and not zero)
std::optional<double> uniform_gradient(const AxisField& field) {
  double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
  for (std::size_t i = 0; i < field.grid().size(); ++i) {
    const double g = field.dn(i).norm();
    lo = std::min(lo, g);
    hi = std::max(hi, g);
  }
  if (hi - lo > 1e-12 * std::max(1.0, hi)) return std::nullopt;
  return hi;
}

struct LindbladOut {
  LindbladRun run;
  std::unique_ptr<SeparationCollector> collector;
};

struct SemiOut {
  SemiclassicalRun run;
  MomentumWindow window;
  std::vector<PhaseSpaceState> snapshots;
  std::vector<double> snapshot_times;
};

struct GaugeOut {
  EffectiveRun run;
  EffectiveRun regauged;
  std::optional<ConvergenceStudy> study;
};

void spin_row(std::vector<double>& row, const Vec3& v) {
  row.insert(row.end(), {v.x(), v.y(), v.z()});
}

}  // namespace

fs::path default_output_root() {
  if (const char* env = std::getenv("DECOHERENCE_OUT"); env && *env) return env;
  return "runs";
}

fs::path unique_directory(const fs::path& dir) {
  if (!fs::exists(dir)) return dir;
  for (int k = 1;; ++k) {
    fs::path candidate = dir;
    candidate += "-" + std::to_string(k);
    if (!fs::exists(candidate)) return candidate;
  }
}

RunResult execute(const RunConfig& cfg, const RunOptions& options) {
  validate(cfg);
  const Grid grid = make_grid(cfg);
  const AxisField field = make_field(cfg, grid);
  const SpinGeometry geo = spin_geometry(field, cfg.mass);
  const DensityMatrix rho0 = make_initial_density(cfg, field);
  const double nu = cfg.nu;
  const Schedule& sched = cfg.schedule;
  const bool unpolarized = cfg.initial == InitialKind::unpolarized;
  const auto gradient = field.time_dependent() ? std::nullopt : uniform_gradient(field);

  RunResult result;
  if (!options.directory.empty()) {
    result.directory = unique_directory(options.directory);
    fs::create_directories(result.directory);
  }
  Output out(result.directory, result.artifacts);
  ExperimentReport& report = result.report;
  report.scenario = cfg.name;
  report.config_hash = config_hash(cfg);
  report.seed = cfg.base_seed;

  auto write_manifest = [&](const std::string& status) {
    if (!out.enabled()) return;
    json m;
    m["scenario"] = cfg.name;
    m["config_hash"] = report.config_hash;
    m["version"] = report.version;
    m["base_seed"] = cfg.base_seed;
    m["status"] = status;
    m["exit_code"] = result.exit_code;
    m["solvers"] = json::array();
    if (cfg.solvers.lindblad) m["solvers"].push_back("lindblad");
    if (cfg.solvers.trajectories) m["solvers"].push_back("trajectories");
    if (cfg.solvers.semiclassical) m["solvers"].push_back("semiclassical");
    if (cfg.solvers.gauge) m["solvers"].push_back("gauge");
    m["artifacts"] = result.artifacts;
    m["config"] = canonical_text(cfg);
    std::ofstream(result.directory / "manifest.json") << m.dump(2) << '\n';
  };

  auto run_lindblad_part = [&] {
    std::unique_ptr<SeparationCollector> collector;
    if (unpolarized) {
      try {
        collector = std::make_unique<SeparationCollector>(field, cfg.mass);
      } catch (const ConfigError&) {
        // n' vanishes somewhere: no separation axis
      }
    }
    DensityObserver obs;
    if (collector) obs = std::ref(*collector);
    LindbladRun run = run_lindblad(MasterEquation(field, cfg.mass, nu), rho0, sched, obs);
    return LindbladOut{std::move(run), std::move(collector)};
  };

  auto run_trajectory_part = [&] {
    EnsembleOptions opt;
    opt.n_traj = cfg.n_traj;
    opt.base_seed = cfg.base_seed;
    opt.threads = static_cast<unsigned>(cfg.threads ? cfg.threads : (options.parallel ? 0 : 1));
    opt.keep_jump_logs = cfg.jump_log;
    InitialEnsemble init = make_initial_ensemble(cfg, field);
    opt.weights = std::move(init.weights);
    return ensemble_average(init.states, field, cfg.mass, nu, sched, opt);
  };

  auto run_semiclassical_part = [&] {
    const MomentumWindow window = make_momentum_window(cfg, field);
    const TransportSolver solver(field, cfg.mass, nu, window, sched.dt);
    const std::vector<double> wanted =
        cfg.snapshot_times.empty() ? std::vector<double>{0.0, sched.total_time} : cfg.snapshot_times;
    std::vector<bool> taken(wanted.size(), false);
    std::vector<PhaseSpaceState> snaps;
    std::vector<double> times;
    PhaseSpaceObserver obs = [&](double t, const PhaseSpaceState& st) {
      for (std::size_t k = 0; k < wanted.size(); ++k) {
        if (!taken[k] && std::abs(t - wanted[k]) <= 0.5 * sched.output_interval) {
          taken[k] = true;
          snaps.push_back(st);
          times.push_back(t);
        }
      }
    };
    SemiclassicalRun run =
        run_semiclassical(solver, init_phase_space(grid, window, cfg.gaussian, initial_bloch(cfg)), sched, obs);
    return SemiOut{std::move(run), window, std::move(snaps), std::move(times)};
  };

  auto run_gauge_part = [&] {
    GaugeOut o;
    const SectorProjection proj = project_sectors(rho0, geo);
    const SectorState plus = sector_state(+1, proj.plus, grid.dx());
    const SectorState minus = sector_state(-1, proj.minus, grid.dx());
    o.run = run_effective(EffectivePropagator(field, cfg.mass, +1), EffectivePropagator(field, cfg.mass, -1), plus,
                          minus, sched);
    Eigen::VectorXd chi(static_cast<Eigen::Index>(grid.size()));
    for (std::size_t i = 0; i < grid.size(); ++i) {
      chi(static_cast<Eigen::Index>(i)) =
          cfg.gauge_shift_amplitude * std::sin(2.0 * std::numbers::pi * grid.x(i) / grid.length());
    }
    SectorState gp = plus, gm = minus;
    for (auto& m : gp.modes) m = regauge_wavefunction(m, chi);
    for (auto& m : gm.modes) m = regauge_wavefunction(m, chi);
    o.regauged = run_effective(EffectivePropagator(field, cfg.mass, +1, true, chi),
                               EffectivePropagator(field, cfg.mass, -1, true, chi), gp, gm, sched);
    if (!cfg.nu_list.empty()) o.study = convergence_study(field, cfg.mass, rho0, sched, cfg.nu_list);
    return o;
  };

  std::optional<LindbladOut> lind;
  std::optional<EnsembleRun> traj;
  std::optional<SemiOut> semi;
  std::optional<GaugeOut> gauge;
  try {
    if (options.parallel) {
      std::future<EnsembleRun> ft;
      std::future<SemiOut> fs_;
      std::future<GaugeOut> fg;
      if (cfg.solvers.trajectories) ft = std::async(std::launch::async, run_trajectory_part);
      if (cfg.solvers.semiclassical) fs_ = std::async(std::launch::async, run_semiclassical_part);
      if (cfg.solvers.gauge) fg = std::async(std::launch::async, run_gauge_part);
      if (cfg.solvers.lindblad) lind = run_lindblad_part();
      if (ft.valid()) traj = ft.get();
      if (fs_.valid()) semi = fs_.get();
      if (fg.valid()) gauge = fg.get();
    } else {
      if (cfg.solvers.lindblad) lind = run_lindblad_part();
      if (cfg.solvers.trajectories) traj = run_trajectory_part();
      if (cfg.solvers.semiclassical) semi = run_semiclassical_part();
      if (cfg.solvers.gauge) gauge = run_gauge_part();
    }
  } catch (const NumericalAbort& e) {
    result.exit_code = 2;
    write_manifest(std::string("numerical abort: ") + e.what());
    throw;
  }

  // ---- lindblad
  if (lind) {
    const auto& recs = lind->run.records;
    const auto& mon = lind->run.monitor;
    report.add(less_than("lindblad.trace_drift_rate", mon.max_trace_drift_rate, 1e-10));
    report.add(less_than("lindblad.hermiticity", mon.max_hermiticity_error, 1e-12));
    report.add(Check{"lindblad.min_eigenvalue", mon.min_eigenvalue, -1e-8, mon.min_eigenvalue >= -1e-8, "", {}});

    const std::vector<double> force = force_series(recs, geo, nu);
    if (auto csv = out.csv("lindblad_series.csv", {"t", "trace", "purity", "mean_x", "var_x", "mean_p", "mean_p2",
                                                   "rho_x", "rho_y", "rho_z", "min_eigenvalue", "force"})) {
      for (std::size_t k = 0; k < recs.size(); ++k) {
        const auto& r = recs[k];
        std::vector<double> row{r.time, r.trace, r.purity, r.mean_x, r.var_x, r.mean_p, r.mean_p2};
        spin_row(row, r.orientation);
        row.push_back(r.min_eigenvalue.value_or(std::nan("")));
        row.push_back(force[k]);
        csv->row(row);
      }
    }
    if (auto csv = out.csv("lindblad_density.csv", {"t", "x", "rho0", "rho_x", "rho_y", "rho_z"})) {
      for (const auto& r : recs) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
          const auto ii = static_cast<Eigen::Index>(i);
          csv->row({r.time, grid.x(i), r.density(ii), r.spin[0](ii), r.spin[1](ii), r.spin[2](ii)});
        }
      }
    }

    if (nu > 0.0 && sched.output_interval <= 0.05 / nu * (1.0 + 1e-12)) {
      const ForceBalance fb = force_balance(recs, geo, nu);
      if (auto csv = out.csv("force_balance.csv", {"t", "dpdt", "force", "residual"})) {
        for (std::size_t k = 0; k < fb.times.size(); ++k) csv->row({fb.times[k], fb.dpdt[k], fb.force[k], fb.residual[k]});
      }
      if (fb.max_abs_force > 1e-12) {
        report.add(less_than("force_balance.relative_residual", fb.relative_residual, cfg.force_tol));
      } else {
        report.add(less_than("force_balance.absolute_residual", fb.max_abs_residual, 1e-6, "force vanishes"));
      }
      report.derived["force_balance"] = {{"early_force", fb.early_force},
                                         {"max_abs_force", fb.max_abs_force},
                                         {"relative_residual", fb.relative_residual}};
    } else {
      report.notes.push_back("force balance skipped: needs nu > 0 and dt_out <= 0.05/nu");
    }

    if (field.kind() == FieldKind::constant) {
      double fmax = 0.0, p2drift = 0.0;
      for (std::size_t k = 0; k < recs.size(); ++k) {
        fmax = std::max(fmax, std::abs(force[k]));
        p2drift = std::max(p2drift, std::abs(recs[k].mean_p2 - recs.front().mean_p2));
      }
      report.add(less_than("constant_field.force", fmax, 1e-12));
      report.add(less_than("constant_field.p2_drift", p2drift, 1e-9));
      const Vec3 n = field.n(0);
      const Vec3 b0 = recs.front().orientation;
      const Vec3 perp0 = b0 - n * n.dot(b0);
      if (nu > 0.0 && perp0.norm() > 1e-3) {
        std::vector<double> t, logp;
        for (const auto& r : recs) {
          const Vec3 perp = r.orientation - n * n.dot(r.orientation);
          if (perp.norm() < 1e-12 * perp0.norm()) break;
          t.push_back(r.time);
          logp.push_back(std::log(perp.norm()));
        }
        const double rate = -early_rate(t, logp, t.back(), 3);
        report.add(less_than("constant_field.transverse_decay", std::abs(rate - nu) / nu, 0.01));
        report.derived["transverse_decay_rate"] = rate;
      }
    }

    if (nu == 0.0 && std::isinf(cfg.gaussian.coherence_length)) {
      const double s = cfg.gaussian.width;
      double worst = 0.0;
      for (const auto& r : recs) {
        const double v = s * s + std::pow(r.time / (2.0 * cfg.mass * s), 2);
        worst = std::max(worst, std::abs(r.var_x - v) / v);
      }
      report.add(less_than("free_spreading.var_x", worst, 1e-6));
    }

    if (unpolarized) {
      const FluxSourceCheck fc = flux_source_check(recs, geo, nu);
      if (!fc.skipped && fc.max_source > 0.0) {
        report.add(less_than("flux_source.lindblad", fc.relative_residual, cfg.flux_tol));
        if (auto csv = out.csv("flux_source.csv", {"x", "measured", "predicted"})) {
          for (std::size_t i = 0; i < grid.size(); ++i) {
            csv->row({grid.x(i), fc.measured(static_cast<Eigen::Index>(i)), fc.predicted(static_cast<Eigen::Index>(i))});
          }
        }
      } else if (!fc.skipped) {
        report.add(less_than("flux_source.lindblad_zero", fc.relative_residual, 1e-10, "source vanishes"));
      }
      if (gradient && nu > 0.0) {
        try {
          const DiffusionFit d = diffusion_rate(recs, field, nu);
          if (d.expected > 0.0) {
            report.add(less_than("diffusion.lindblad", d.relative_error, cfg.diffusion_tol));
          } else {
            report.add(less_than("diffusion.lindblad_zero", std::abs(d.slope), 1e-8));
          }
          report.derived["diffusion_lindblad"] = {{"slope", d.slope}, {"expected", d.expected}};
        } catch (const ConfigError& e) {
          report.notes.push_back(std::string("lindblad diffusion skipped: ") + e.what());
        }
      }
    }

    if (lind->collector) {
      const auto& c = *lind->collector;
      if (auto csv = out.csv("separation.csv", {"t", "total_p", "p_plus", "p_minus", "w_plus", "w_minus",
                                                "separation", "p_pointer_plus", "p_pointer_minus", "correlator"})) {
        for (std::size_t k = 0; k < c.times.size(); ++k) {
          csv->row({c.times[k], c.total_p[k], c.p_plus[k], c.p_minus[k], c.w_plus[k], c.w_minus[k],
                    c.p_plus[k] - c.p_minus[k], c.p_pointer_plus[k], c.p_pointer_minus[k], c.correlator[k]});
        }
      }
      try {
        const SpinSeparation sep = spin_separation(c, nu);
        report.add(less_than("separation.total_p", sep.max_abs_total_p, 1e-8));
        const double last = sep.separation.back();
        double lowest = std::numeric_limits<double>::infinity();
        for (std::size_t k = 1; k < sep.separation.size(); ++k) lowest = std::min(lowest, sep.separation[k]);
        report.add(Check{"separation.delta_p_positive", lowest, 0.0, lowest > 0.0, "minimum over t > 0", {}});
        report.add(Check{"separation.correlator_monotone", sep.correlator_monotone ? 1.0 : 0.0, 1.0,
                         sep.correlator_monotone, "", {}});
        if (gradient && nu > 0.0) {
          const double expect = 0.5 * nu * *gradient;
          const double err = std::max(std::abs(sep.early_force_plus - expect), std::abs(sep.early_force_minus + expect)) / expect;
          report.add(less_than("separation.sector_force", err, 0.05));
        }
        report.derived["separation"] = {{"early_force_plus", sep.early_force_plus},
                                        {"early_force_minus", sep.early_force_minus},
                                        {"final_separation", last},
                                        {"max_abs_pointer_separation", sep.max_abs_pointer_separation}};
      } catch (const ConfigError& e) {
        report.notes.push_back(std::string("separation rates skipped: ") + e.what());
      }
    }
  }

  // ---- trajectories
  if (traj) {
    const auto& recs = traj->records;
    if (auto csv = out.csv("trajectories_series.csv",
                           {"t", "mean_x", "se_x", "mean_p", "se_p", "mean_p2", "se_p2", "rho_x", "se_rho_x", "rho_y",
                            "se_rho_y", "rho_z", "se_rho_z"})) {
      for (const auto& r : recs) {
        csv->row({r.time, r.mean_x.mean, r.mean_x.se, r.mean_p.mean, r.mean_p.se, r.mean_p2.mean, r.mean_p2.se,
                  r.orientation[0].mean, r.orientation[0].se, r.orientation[1].mean, r.orientation[1].se,
                  r.orientation[2].mean, r.orientation[2].se});
      }
    }
    if (cfg.jump_log) {
      if (auto csv = out.csv("jump_log.csv", {"trajectory", "t", "outcome"})) {
        for (std::size_t k = 0; k < traj->jump_logs.size(); ++k) {
          for (const auto& j : traj->jump_logs[k]) csv->row({static_cast<double>(k), j.time, static_cast<double>(j.outcome)});
        }
      }
    }
    const double lambda = nu * sched.total_time;
    const double n = static_cast<double>(traj->jump_counts.size());
    double mean = 0.0, var = 0.0;
    for (auto c : traj->jump_counts) mean += static_cast<double>(c);
    mean /= n;
    for (auto c : traj->jump_counts) var += std::pow(static_cast<double>(c) - mean, 2);
    var /= n - 1.0;
    if (lambda > 0.0) {
      report.add(less_than("trajectories.jump_mean_sigma", std::abs(mean - lambda) / std::sqrt(lambda / n), 3.0));
      report.add(less_than("trajectories.jump_var_sigma",
                           std::abs(var - lambda) / std::sqrt((lambda + 2.0 * lambda * lambda) / n), 3.0));
    } else {
      report.add(less_than("trajectories.jump_mean", mean, 0.5));
    }
    report.add(less_than("trajectories.norm_error", traj->max_norm_error, 1e-10));
    if (lind) {
      double zp = 0.0, zz = 0.0;
      const auto& lr = lind->run.records;
      for (std::size_t k = 0; k < recs.size() && k < lr.size(); ++k) {
        // the sample SE is 0 while no trajectory has jumped; 1/n is the resolution of the ensemble mean
        const auto z = [n](double d, double se) { return std::max(std::abs(d) - 1e-10, 0.0) / std::max(se, 1.0 / n); };
        zp = std::max(zp, z(recs[k].mean_p.mean - lr[k].mean_p, recs[k].mean_p.se));
        zz = std::max(zz, z(recs[k].orientation[2].mean - lr[k].orientation.z(), recs[k].orientation[2].se));
      }
      report.add(Check{"trajectories.mean_p_vs_lindblad", zp, 3.0, zp <= 3.0, "max |diff| / max(SE, 1/n)", {}});
      report.add(Check{"trajectories.rho_z_vs_lindblad", zz, 3.0, zz <= 3.0, "max |diff| / max(SE, 1/n)", {}});
    }
    report.derived["trajectories"] = {{"n_traj", traj->jump_counts.size()}, {"jump_mean", mean}, {"jump_var", var}};
  }

  // ---- semiclassical
  if (semi) {
    const auto& recs = semi->run.records;
    const auto& mon = semi->run.monitor;
    report.add(less_than("semiclassical.mass_drift", mon.max_mass_drift, 1e-10));
    report.add(less_than("semiclassical.leakage", mon.max_leakage, 1e-8));
    if (auto csv = out.csv("semiclassical_series.csv",
                           {"t", "mass", "mean_x", "var_x", "mean_p", "mean_p2", "rho_x", "rho_y", "rho_z"})) {
      for (const auto& r : recs) {
        std::vector<double> row{r.time, r.trace, r.mean_x, r.var_x, r.mean_p, r.mean_p2};
        spin_row(row, r.orientation);
        csv->row(row);
      }
    }
    if (auto csv = out.csv("phase_space.csv", {"t", "x", "p", "rho0", "rho_x", "rho_y", "rho_z"})) {
      for (std::size_t k = 0; k < semi->snapshots.size(); ++k) {
        const auto& st = semi->snapshots[k];
        for (Eigen::Index i = 0; i < st.rho0.rows(); ++i) {
          for (Eigen::Index j = 0; j < st.rho0.cols(); ++j) {
            csv->row({semi->snapshot_times[k], grid.x(static_cast<std::size_t>(i)), st.p(j), st.rho0(i, j),
                      st.rho_vec[0](i, j), st.rho_vec[1](i, j), st.rho_vec[2](i, j)});
          }
        }
      }
    }
    if (unpolarized) {
      const FluxSourceCheck fc = flux_source_check(recs, geo, nu);
      if (!fc.skipped && fc.max_source > 0.0) {
        report.add(less_than("flux_source.semiclassical", fc.relative_residual, cfg.flux_tol));
      }
      if (gradient && nu > 0.0) {
        try {
          const DiffusionFit d = diffusion_rate(recs, field, nu);
          if (d.expected > 0.0) {
            report.add(less_than("diffusion.semiclassical", d.relative_error, cfg.semiclassical_diffusion_tol));
          }
          report.derived["diffusion_semiclassical"] = {{"slope", d.slope}, {"expected", d.expected}};
        } catch (const ConfigError& e) {
          report.notes.push_back(std::string("semiclassical diffusion skipped: ") + e.what());
        }
      }
    }
    report.derived["momentum_window"] = {{"p_max", semi->window.p_max}, {"n_p", semi->window.n_p}};
    if (lind) {
      double dp = 0.0;
      for (std::size_t k = 0; k < recs.size() && k < lind->run.records.size(); ++k) {
        dp = std::max(dp, std::abs(recs[k].mean_p - lind->run.records[k].mean_p));
      }
      report.derived["semiclassical_vs_lindblad_max_dp"] = dp;
    }
  }

  // ---- gauge
  if (gauge) {
    const auto write_sectors = [&](const std::string& name, const std::vector<SectorRecord>& recs) {
      if (auto csv = out.csv(name, {"t", "sector", "norm", "mean_x", "kinetic_p"})) {
        for (const auto& r : recs) csv->row({r.time, static_cast<double>(r.sector), r.norm, r.mean_x, r.kinetic_p});
      }
    };
    write_sectors("sectors.csv", gauge->run.records);
    double gdiff = 0.0;
    for (std::size_t k = 0; k < gauge->run.records.size(); ++k) {
      const auto& a = gauge->run.records[k];
      const auto& b = gauge->regauged.records[k];
      gdiff = std::max({gdiff, std::abs(a.norm - b.norm), std::abs(a.mean_x - b.mean_x), std::abs(a.kinetic_p - b.kinetic_p)});
    }
    report.add(less_than("gauge.invariance", gdiff, 1e-8));
    if (gauge->study) {
      const auto& st = *gauge->study;
      if (auto csv = out.csv("convergence.csv", {"nu", "delta", "coherence_floor"})) {
        for (const auto& r : st.rows) csv->row({r.nu, r.delta, r.coherence_floor});
      }
      report.add(Check{"gauge.delta_monotone", st.monotone ? 1.0 : 0.0, 1.0, st.monotone, "", {}});
      report.add(Check{"gauge.floor_exponent", st.floor_exponent, 0.3, std::abs(st.floor_exponent + 1.0) <= 0.3,
                       "target -1", {}});
      json rows = json::array();
      for (const auto& r : st.rows) rows.push_back({{"nu", r.nu}, {"delta", r.delta}, {"coherence_floor", r.coherence_floor}});
      report.derived["convergence"] = rows;
    }
  }

  result.exit_code = report.all_passed() ? 0 : 3;
  out.text("report.json", report.to_json().dump(2) + "\n");
  out.text("report.txt", report.to_text());
  write_manifest(result.exit_code == 0 ? "ok" : "assertion failure");
  return result;
}

}  // namespace pointer
