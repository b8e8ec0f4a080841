#include "pointer/config.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "pointer/errors.hpp"
#include "pointer/trajectories.hpp"

namespace pointer {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

double to_double(const std::string& v) {
  std::size_t used = 0;
  double d = 0.0;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected a number, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("expected a number, got '" + v + "'");
  return d;
}

long long to_integer(const std::string& v) {
  std::size_t used = 0;
  long long n = 0;
  try {
    n = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError("expected an integer, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError("expected an integer, got '" + v + "'");
  return n;
}

std::size_t to_count(const std::string& v) {
  const long long n = to_integer(v);
  if (n < 0) throw ConfigError("expected a non-negative integer, got '" + v + "'");
  return static_cast<std::size_t>(n);
}

bool to_bool(const std::string& v) {
  const std::string l = lower(v);
  if (l == "true" || l == "yes" || l == "on" || l == "1") return true;
  if (l == "false" || l == "no" || l == "off" || l == "0") return false;
  throw ConfigError("expected true or false, got '" + v + "'");
}

Vec3 to_vec3(const std::string& v) {
  const auto xs = parse_number_list(v);
  if (xs.size() != 3) throw ConfigError("expected three comma-separated numbers, got '" + v + "'");
  return Vec3(xs[0], xs[1], xs[2]);
}

FieldKind to_field_kind(const std::string& v) {
  const std::string l = lower(v);
  if (l == "constant") return FieldKind::constant;
  if (l == "helix") return FieldKind::helix;
  if (l == "domain_wall") return FieldKind::domain_wall;
  if (l == "sampled") return FieldKind::sampled;
  throw ConfigError("unknown field kind '" + v + "' (constant, helix, domain_wall, sampled)");
}

InitialKind to_initial_kind(const std::string& v) {
  const std::string l = lower(v);
  if (l == "gaussian") return InitialKind::gaussian;
  if (l == "unpolarized") return InitialKind::unpolarized;
  if (l == "sector") return InitialKind::sector;
  throw ConfigError("unknown initial kind '" + v + "' (gaussian, unpolarized, sector)");
}

SolverSet to_solvers(const std::string& v) {
  SolverSet s;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string l = lower(trim(item));
    if (l == "lindblad") s.lindblad = true;
    else if (l == "trajectories") s.trajectories = true;
    else if (l == "semiclassical") s.semiclassical = true;
    else if (l == "gauge") s.gauge = true;
    else if (l == "all") s = SolverSet{true, true, true, true};
    else throw ConfigError("unknown solver '" + item + "' (lindblad, trajectories, semiclassical, gauge, all)");
  }
  return s;
}

const char* kind_name(FieldKind k) {
  switch (k) {
    case FieldKind::constant: return "constant";
    case FieldKind::helix: return "helix";
    case FieldKind::domain_wall: return "domain_wall";
    case FieldKind::sampled: return "sampled";
  }
  return "?";
}

const char* kind_name(InitialKind k) {
  switch (k) {
    case InitialKind::gaussian: return "gaussian";
    case InitialKind::unpolarized: return "unpolarized";
    case InitialKind::sector: return "sector";
  }
  return "?";
}

using Setter = std::function<void(RunConfig&, const std::string&)>;

const std::map<std::string, std::map<std::string, Setter>>& grammar() {
  static const std::map<std::string, std::map<std::string, Setter>> g = {
      {"run",
       {{"name", [](RunConfig& c, const std::string& v) { c.name = v; }},
        {"out", [](RunConfig& c, const std::string& v) { c.out_dir = v; }},
        {"snapshots", [](RunConfig& c, const std::string& v) { c.snapshot_times = parse_number_list(v); }}}},
      {"grid",
       {{"N", [](RunConfig& c, const std::string& v) { c.n_points = to_count(v); }},
        {"L", [](RunConfig& c, const std::string& v) { c.length = to_double(v); }}}},
      {"physics",
       {{"m", [](RunConfig& c, const std::string& v) { c.mass = to_double(v); }},
        {"nu", [](RunConfig& c, const std::string& v) { c.nu = to_double(v); }}}},
      {"field",
       {{"kind", [](RunConfig& c, const std::string& v) { c.field_kind = to_field_kind(v); }},
        {"q", [](RunConfig& c, const std::string& v) { c.field.q = to_double(v); }},
        {"winding", [](RunConfig& c, const std::string& v) { c.winding = static_cast<int>(to_integer(v)); }},
        {"direction", [](RunConfig& c, const std::string& v) { c.field.direction = to_vec3(v); }},
        {"center", [](RunConfig& c, const std::string& v) { c.field.center = to_double(v); }},
        {"width", [](RunConfig& c, const std::string& v) { c.field.width = to_double(v); }},
        {"file", [](RunConfig& c, const std::string& v) { c.field_file = v; }},
        {"rotation_axis",
         [](RunConfig& c, const std::string& v) {
           if (!c.rotation) c.rotation = Rotation{};
           c.rotation->axis = to_vec3(v);
         }},
        {"rotation_rate",
         [](RunConfig& c, const std::string& v) {
           if (!c.rotation) c.rotation = Rotation{};
           c.rotation->rate = to_double(v);
         }}}},
      {"initial",
       {{"kind", [](RunConfig& c, const std::string& v) { c.initial = to_initial_kind(v); }},
        {"x0", [](RunConfig& c, const std::string& v) { c.gaussian.center = to_double(v); }},
        {"p0", [](RunConfig& c, const std::string& v) { c.gaussian.momentum = to_double(v); }},
        {"sigma", [](RunConfig& c, const std::string& v) { c.gaussian.width = to_double(v); }},
        {"coherence_length", [](RunConfig& c, const std::string& v) { c.gaussian.coherence_length = to_double(v); }},
        {"bloch", [](RunConfig& c, const std::string& v) { c.bloch = to_vec3(v); }},
        {"sector", [](RunConfig& c, const std::string& v) { c.sector = static_cast<int>(to_integer(v)); }}}},
      {"solver",
       {{"use", [](RunConfig& c, const std::string& v) { c.solvers = to_solvers(v); }},
        {"n_traj", [](RunConfig& c, const std::string& v) { c.n_traj = to_count(v); }},
        {"base_seed", [](RunConfig& c, const std::string& v) { c.base_seed = static_cast<std::uint64_t>(to_count(v)); }},
        {"threads", [](RunConfig& c, const std::string& v) { c.threads = to_count(v); }},
        {"jump_log", [](RunConfig& c, const std::string& v) { c.jump_log = to_bool(v); }},
        {"p_max", [](RunConfig& c, const std::string& v) { c.p_max = to_double(v); }},
        {"n_p", [](RunConfig& c, const std::string& v) { c.n_p = to_count(v); }},
        {"nu_list", [](RunConfig& c, const std::string& v) { c.nu_list = parse_number_list(v); }},
        {"gauge_shift", [](RunConfig& c, const std::string& v) { c.gauge_shift_amplitude = to_double(v); }}}},
      {"time",
       {{"T", [](RunConfig& c, const std::string& v) { c.schedule.total_time = to_double(v); }},
        {"dt", [](RunConfig& c, const std::string& v) { c.schedule.dt = to_double(v); }},
        {"dt_out", [](RunConfig& c, const std::string& v) { c.schedule.output_interval = to_double(v); }},
        {"eigen_check_every",
         [](RunConfig& c, const std::string& v) { c.schedule.eigen_check_every = to_count(v); }}}},
      {"checks",
       {{"force_tol", [](RunConfig& c, const std::string& v) { c.force_tol = to_double(v); }},
        {"flux_tol", [](RunConfig& c, const std::string& v) { c.flux_tol = to_double(v); }},
        {"diffusion_tol", [](RunConfig& c, const std::string& v) { c.diffusion_tol = to_double(v); }},
        {"semiclassical_diffusion_tol",
         [](RunConfig& c, const std::string& v) { c.semiclassical_diffusion_tol = to_double(v); }}}},
  };
  return g;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string fmt(const Vec3& v) { return fmt(v.x()) + ", " + fmt(v.y()) + ", " + fmt(v.z()); }

std::string fmt(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t k = 0; k < xs.size(); ++k) s += (k ? ", " : "") + fmt(xs[k]);
  return s;
}

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

}  // namespace

std::vector<double> parse_number_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (t.empty()) throw ConfigError("empty entry in number list '" + text + "'");
    out.push_back(to_double(t));
  }
  return out;
}

RunConfig parse_config_text(const std::string& text, const std::string& name) {
  RunConfig cfg;
  cfg.name = name;
  const auto& g = grammar();
  std::istringstream in(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(lineno) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where + "unterminated section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (!g.count(section)) throw ConfigError(where + "unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value', got '" + line + "'");
    if (section.empty()) throw ConfigError(where + "key outside of any [section]");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto& keys = g.at(section);
    const auto it = keys.find(key);
    if (it == keys.end()) throw ConfigError(where + "unknown key '" + key + "' in section [" + section + "]");
    if (value.empty()) throw ConfigError(where + "missing value for '" + key + "'");
    try {
      it->second(cfg, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  RunConfig cfg = parse_config_text(ss.str(), std::filesystem::path(path).stem().string());
  if (!cfg.field_file.empty() && std::filesystem::path(cfg.field_file).is_relative()) {
    cfg.field_file = (std::filesystem::path(path).parent_path() / cfg.field_file).string();
  }
  return cfg;
}

void validate_basic(const RunConfig& cfg) {
  require(cfg.n_points >= 8 && cfg.n_points % 2 == 0,
          "grid size N must be even and >= 8 (N = " + std::to_string(cfg.n_points) + ")");
  require(cfg.length > 0.0 && std::isfinite(cfg.length), "domain length L must be > 0");
  require(cfg.mass > 0.0 && std::isfinite(cfg.mass), "mass must be > 0 (m = " + fmt(cfg.mass) + ")");
  require(cfg.nu >= 0.0 && std::isfinite(cfg.nu), "decoherence rate must be ≥ 0 (nu = " + fmt(cfg.nu) + ")");
  require(cfg.solvers.any(), "no solver selected: [solver] use must name lindblad, trajectories, semiclassical, gauge or all");

  const Schedule& s = cfg.schedule;
  require(s.total_time > 0.0, "total time T must be > 0");
  require(s.dt > 0.0, "time step dt must be > 0");
  require(s.output_interval >= s.dt, "output interval dt_out must be >= dt");
  require(s.output_interval <= s.total_time, "output interval dt_out must be <= T");
  steps_per_output(s);
  const double outputs = s.total_time / s.output_interval;
  require(std::abs(outputs - std::round(outputs)) < 1e-9 * std::max(1.0, outputs),
          "T must be an integer multiple of dt_out (T / dt_out = " + fmt(outputs) + ")");
  if (cfg.nu > 0.0) {
    require(s.dt <= 0.1 / cfg.nu * (1.0 + 1e-12),
            "time step dt must resolve the decoherence time: dt <= 0.1/nu = " + fmt(0.1 / cfg.nu));
  }

  if (cfg.field_kind == FieldKind::helix && cfg.winding) {
    require(cfg.field.q == 0.0, "give either q or winding for the helix, not both");
  }
  require(cfg.field_kind != FieldKind::sampled || !cfg.field_file.empty(), "sampled field needs [field] file");
  if (cfg.rotation) require(cfg.rotation->axis.norm() > 0.0, "rotation_axis must be non-zero");

  require(cfg.gaussian.width > 0.0, "initial width sigma must be > 0");
  require(cfg.gaussian.coherence_length > 0.0, "coherence_length must be > 0");
  if (cfg.initial == InitialKind::gaussian) {
    require(std::abs(cfg.bloch.norm() - 1.0) < 1e-9, "initial bloch vector must be a unit vector (|b| = " +
                                                         fmt(cfg.bloch.norm()) + ")");
  }
  if (cfg.initial == InitialKind::sector) require(cfg.sector == 1 || cfg.sector == -1, "sector must be +1 or -1");

  if (cfg.solvers.trajectories) {
    require(cfg.n_traj >= 2, "n_traj must be >= 2");
    if (cfg.initial == InitialKind::unpolarized && std::isinf(cfg.gaussian.coherence_length)) {
      require(cfg.n_traj % 2 == 0, "n_traj must be even for an unpolarized start");
    }
  }
  if (cfg.solvers.semiclassical) {
    require(cfg.initial != InitialKind::sector, "semiclassical solver supports gaussian and unpolarized initial states only");
    if (cfg.p_max) require(*cfg.p_max > 0.0, "p_max must be > 0");
    if (cfg.n_p) require(*cfg.n_p >= 8 && *cfg.n_p % 2 == 0, "n_p must be even and >= 8");
    require(!cfg.field_file.empty() || cfg.field_kind != FieldKind::sampled, "sampled field needs [field] file");
  }
  for (std::size_t k = 1; k < cfg.nu_list.size(); ++k) {
    require(cfg.nu_list[k] > cfg.nu_list[k - 1], "nu_list must be strictly ascending");
  }
  for (double v : cfg.nu_list) require(v >= 0.0, "nu_list entries must be >= 0");
  if (!cfg.nu_list.empty()) require(cfg.solvers.gauge, "nu_list needs the gauge solver");
  for (double t : cfg.snapshot_times) {
    require(t >= 0.0 && t <= s.total_time * (1.0 + 1e-12), "snapshot times must lie in [0, T]");
  }
  for (double tol : {cfg.force_tol, cfg.flux_tol, cfg.diffusion_tol, cfg.semiclassical_diffusion_tol}) {
    require(tol > 0.0, "check tolerances must be > 0");
  }
}

Grid make_grid(const RunConfig& cfg) { return Grid(cfg.n_points, cfg.length); }

AxisField make_field(const RunConfig& cfg, const Grid& grid) {
  FieldParams p = cfg.field;
  if (cfg.field_kind == FieldKind::helix && cfg.winding) {
    p.q = 2.0 * std::numbers::pi * static_cast<double>(*cfg.winding) / grid.length();
  }
  if (cfg.field_kind == FieldKind::sampled) p.samples = read_sampled_table(cfg.field_file, grid);
  return build_axis_field(cfg.field_kind, std::move(p), grid, cfg.rotation);
}

DensityMatrix make_initial_density(const RunConfig& cfg, const AxisField& field) {
  const Grid& g = field.grid();
  switch (cfg.initial) {
    case InitialKind::gaussian: return init_gaussian(g, cfg.gaussian, spinor_from_bloch(cfg.bloch));
    case InitialKind::unpolarized: return init_unpolarized(g, cfg.gaussian);
    case InitialKind::sector: return init_sector(g, cfg.gaussian, spin_geometry(field, cfg.mass), cfg.sector);
  }
  throw ConfigError("unknown initial kind");
}

InitialEnsemble make_initial_ensemble(const RunConfig& cfg, const AxisField& field) {
  const Grid& g = field.grid();
  const PureMixture mix = gaussian_mixture(g, cfg.gaussian);
  std::vector<std::vector<Eigen::Vector2cd>> spinor_sets;  // equal-weight spin mixture, per grid point
  switch (cfg.initial) {
    case InitialKind::gaussian:
      spinor_sets.emplace_back(g.size(), spinor_from_bloch(cfg.bloch));
      break;
    case InitialKind::unpolarized:
      spinor_sets.emplace_back(g.size(), Eigen::Vector2cd(1.0, 0.0));
      spinor_sets.emplace_back(g.size(), Eigen::Vector2cd(0.0, 1.0));
      break;
    case InitialKind::sector: {
      const SpinGeometry geo = spin_geometry(field, cfg.mass);
      spinor_sets.push_back(cfg.sector > 0 ? geo.spinor_plus : geo.spinor_minus);
      break;
    }
  }
  const std::size_t n = g.size();
  const auto ni = static_cast<Eigen::Index>(n);
  InitialEnsemble out;
  for (std::size_t m = 0; m < mix.states.size(); ++m) {
    for (const auto& spinors : spinor_sets) {
      Eigen::VectorXcd psi(2 * ni);
      for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        psi(ii) = mix.states[m](ii) * spinors[i](0);
        psi(ii + ni) = mix.states[m](ii) * spinors[i](1);
      }
      out.states.push_back(std::move(psi));
      if (mix.states.size() > 1) out.weights.push_back(mix.weights[m] / static_cast<double>(spinor_sets.size()));
    }
  }
  return out;
}

std::optional<Vec3> initial_bloch(const RunConfig& cfg) {
  if (cfg.initial == InitialKind::gaussian) return cfg.bloch;
  return std::nullopt;
}

MomentumWindow make_momentum_window(const RunConfig& cfg, const AxisField& field) {
  MomentumWindow w = choose_momentum_window(cfg.gaussian, field, cfg.nu, cfg.schedule.total_time);
  if (cfg.p_max) w.p_max = *cfg.p_max;
  if (cfg.n_p) w.n_p = *cfg.n_p;
  return w;
}

void validate(const RunConfig& cfg) {
  validate_basic(cfg);
  Grid grid = [&] {
    try {
      return make_grid(cfg);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("grid: ") + e.what());
    }
  }();
  const AxisField field = make_field(cfg, grid);
  spin_geometry(field, cfg.mass);
  try {
    make_initial_density(cfg, field);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("initial state: ") + e.what());
  }
  if (cfg.solvers.semiclassical) {
    const MomentumWindow w = make_momentum_window(cfg, field);
    make_phase_space(grid, w);
    TransportSolver(field, cfg.mass, cfg.nu, w, cfg.schedule.dt);
  }
}

std::string canonical_text(const RunConfig& cfg) {
  std::ostringstream os;
  os << "name = " << cfg.name << "\n";
  os << "N = " << cfg.n_points << "\nL = " << fmt(cfg.length) << "\n";
  os << "m = " << fmt(cfg.mass) << "\nnu = " << fmt(cfg.nu) << "\n";
  os << "field.kind = " << kind_name(cfg.field_kind) << "\n";
  os << "field.q = " << fmt(cfg.field.q) << "\n";
  os << "field.winding = " << (cfg.winding ? std::to_string(*cfg.winding) : "none") << "\n";
  os << "field.direction = " << fmt(cfg.field.direction) << "\n";
  os << "field.center = " << fmt(cfg.field.center) << "\nfield.width = " << fmt(cfg.field.width) << "\n";
  os << "field.file = " << cfg.field_file << "\n";
  if (cfg.rotation) {
    os << "field.rotation_axis = " << fmt(cfg.rotation->axis) << "\n";
    os << "field.rotation_rate = " << fmt(cfg.rotation->rate) << "\n";
  }
  os << "initial.kind = " << kind_name(cfg.initial) << "\n";
  os << "initial.x0 = " << fmt(cfg.gaussian.center) << "\ninitial.p0 = " << fmt(cfg.gaussian.momentum) << "\n";
  os << "initial.sigma = " << fmt(cfg.gaussian.width) << "\n";
  os << "initial.coherence_length = " << fmt(cfg.gaussian.coherence_length) << "\n";
  os << "initial.bloch = " << fmt(cfg.bloch) << "\ninitial.sector = " << cfg.sector << "\n";
  os << "solver.use =" << (cfg.solvers.lindblad ? " lindblad" : "") << (cfg.solvers.trajectories ? " trajectories" : "")
     << (cfg.solvers.semiclassical ? " semiclassical" : "") << (cfg.solvers.gauge ? " gauge" : "") << "\n";
  os << "solver.n_traj = " << cfg.n_traj << "\nsolver.base_seed = " << cfg.base_seed << "\n";
  os << "solver.jump_log = " << (cfg.jump_log ? "true" : "false") << "\n";
  os << "solver.p_max = " << (cfg.p_max ? fmt(*cfg.p_max) : "auto") << "\n";
  os << "solver.n_p = " << (cfg.n_p ? std::to_string(*cfg.n_p) : "auto") << "\n";
  os << "solver.nu_list = " << fmt(cfg.nu_list) << "\n";
  os << "solver.gauge_shift = " << fmt(cfg.gauge_shift_amplitude) << "\n";
  os << "time.T = " << fmt(cfg.schedule.total_time) << "\ntime.dt = " << fmt(cfg.schedule.dt) << "\n";
  os << "time.dt_out = " << fmt(cfg.schedule.output_interval) << "\n";
  os << "time.eigen_check_every = " << cfg.schedule.eigen_check_every << "\n";
  os << "run.snapshots = " << fmt(cfg.snapshot_times) << "\n";
  os << "checks = " << fmt(std::vector<double>{cfg.force_tol, cfg.flux_tol, cfg.diffusion_tol,
                                                cfg.semiclassical_diffusion_tol})
     << "\n";
  return os.str();
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : canonical_text(cfg)) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << h;
  return os.str();
}

}  // namespace pointer
