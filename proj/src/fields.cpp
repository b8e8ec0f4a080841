#include "pointer/fields.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <sstream>

#include "pointer/errors.hpp"

namespace pointer {

namespace {

constexpr double kUnitTolerance = 1e-6;
constexpr double kSouthPoleTolerance = 1e-6;
constexpr double kPeriodicityTolerance = 1e-9;

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

std::string to_string(FieldKind kind) {
  switch (kind) {
    case FieldKind::constant: return "constant";
    case FieldKind::helix: return "helix";
    case FieldKind::domain_wall: return "domain_wall";
    case FieldKind::sampled: return "sampled";
  }
  return "unknown";
}

FieldKind field_kind_from_string(const std::string& name) {
  if (name == "constant") return FieldKind::constant;
  if (name == "helix") return FieldKind::helix;
  if (name == "domain_wall") return FieldKind::domain_wall;
  if (name == "sampled") return FieldKind::sampled;
  throw ConfigError("unknown field kind '" + name +
                    "' (expected constant | helix | domain_wall | sampled)");
}

Vec3 AxisField::rotate(const Vec3& v, double t) const {
  if (!time_dependent() || t == 0.0) return v;
  return Eigen::AngleAxisd(rotation_->rate * t, rotation_->axis) * v;
}

Eigen::Matrix3d AxisField::rotation_matrix(double t) const {
  if (!time_dependent() || t == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(rotation_->rate * t, rotation_->axis).toRotationMatrix();
}

Vec3 AxisField::dndt(std::size_t i, double t) const {
  if (!time_dependent()) return Vec3::Zero();
  return rotation_->rate * rotation_->axis.cross(n(i, t));
}

std::vector<Vec3> AxisField::directions(double t) const {
  std::vector<Vec3> out(n0_.size());
  for (std::size_t i = 0; i < n0_.size(); ++i) out[i] = n(i, t);
  return out;
}

AxisField build_axis_field(FieldKind kind, FieldParams params, const Grid& grid,
                           std::optional<Rotation> rotation) {
  const std::size_t n = grid.size();
  AxisField field(kind, std::move(params), grid);
  auto& p = field.params_;
  field.n0_.resize(n);
  field.dn0_.resize(n);
  field.d2n0_.resize(n);

  switch (kind) {
    case FieldKind::constant: {
      const double norm = p.direction.norm();
      if (std::abs(norm - 1.0) > kUnitTolerance) {
        throw ConfigError("constant field direction must be a unit vector (|n| = " + fmt_double(norm) + ")");
      }
      p.direction /= norm;
      for (std::size_t i = 0; i < n; ++i) {
        field.n0_[i] = p.direction;
        field.dn0_[i].setZero();
        field.d2n0_[i].setZero();
      }
      break;
    }
    case FieldKind::helix: {
      const double winding = p.q * grid.length() / (2.0 * std::numbers::pi);
      const double nearest = std::round(winding);
      if (std::abs(winding - nearest) > kPeriodicityTolerance) {
        const double admissible = nearest * 2.0 * std::numbers::pi / grid.length();
        throw ConfigError("helix wavenumber q = " + fmt_double(p.q) + " is not periodic on L = " +
                          fmt_double(grid.length()) + "; nearest admissible q = " + fmt_double(admissible) +
                          " (integer multiples of 2*pi/L)");
      }
      const double q = p.q;
      for (std::size_t i = 0; i < n; ++i) {
        const double ph = q * grid.x(i);
        field.n0_[i] = Vec3(std::cos(ph), std::sin(ph), 0.0);
        field.dn0_[i] = q * Vec3(-std::sin(ph), std::cos(ph), 0.0);
        field.d2n0_[i] = -q * q * field.n0_[i];
      }
      break;
    }
    case FieldKind::domain_wall: {
      if (!(p.width > 0.0)) throw ConfigError("domain wall width must be > 0");
      for (std::size_t i = 0; i < n; ++i) {
        const double u = (grid.x(i) - p.center) / p.width;
        const double th = 0.5 * std::numbers::pi * (1.0 + std::tanh(u));
        const double sech2 = 1.0 / (std::cosh(u) * std::cosh(u));
        const double th1 = 0.5 * std::numbers::pi * sech2 / p.width;
        const double th2 = -std::numbers::pi * sech2 * std::tanh(u) / (p.width * p.width);
        const Vec3 nn(std::sin(th), 0.0, std::cos(th));
        const Vec3 tt(std::cos(th), 0.0, -std::sin(th));
        field.n0_[i] = nn;
        field.dn0_[i] = th1 * tt;
        field.d2n0_[i] = th2 * tt - th1 * th1 * nn;
      }
      break;
    }
    case FieldKind::sampled: {
      if (p.samples.size() != n) {
        throw ConfigError("sampled field has " + std::to_string(p.samples.size()) +
                          " rows, grid has " + std::to_string(n));
      }
      for (std::size_t i = 0; i < n; ++i) {
        const double norm = p.samples[i].norm();
        if (!(norm >= kUnitTolerance)) {
          throw ConfigError("sampled field vector at index " + std::to_string(i) +
                            " has norm " + fmt_double(norm) + " < 1e-6");
        }
        p.samples[i] /= norm;
        field.n0_[i] = p.samples[i];
      }
      const Spectral spectral(grid);
      const auto ni = static_cast<Eigen::Index>(n);
      for (int c = 0; c < 3; ++c) {
        Eigen::VectorXd comp(ni);
        for (std::size_t i = 0; i < n; ++i) comp(static_cast<Eigen::Index>(i)) = field.n0_[i](c);
        const Eigen::VectorXd d1 = spectral.derivative(comp);
        const Eigen::VectorXd d2 = spectral.second_derivative(comp);
        for (std::size_t i = 0; i < n; ++i) {
          field.dn0_[i](c) = d1(static_cast<Eigen::Index>(i));
          field.d2n0_[i](c) = d2(static_cast<Eigen::Index>(i));
        }
      }
      break;
    }
  }

  if (rotation) {
    const double an = rotation->axis.norm();
    if (!(an > 0.0)) throw ConfigError("rotation axis must be non-zero");
    rotation->axis /= an;
    field.rotation_ = rotation;
  }
  return field;
}

std::vector<Vec3> read_sampled_table(std::istream& in, const Grid& grid) {
  std::vector<Vec3> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    std::istringstream row(line);
    double x = 0, a = 0, b = 0, c = 0;
    if (!(row >> x >> a >> b >> c)) {
      throw ConfigError("sampled field table: line " + std::to_string(lineno) + " needs 4 columns (x n1 n2 n3)");
    }
    const std::size_t i = out.size();
    if (i < grid.size() && std::abs(x - grid.x(i)) > 1e-9 * std::max(1.0, grid.length())) {
      throw ConfigError("sampled field table: line " + std::to_string(lineno) + " has x = " + fmt_double(x) +
                        ", expected grid point " + fmt_double(grid.x(i)));
    }
    out.emplace_back(a, b, c);
  }
  if (out.size() != grid.size()) {
    throw ConfigError("sampled field table has " + std::to_string(out.size()) + " rows, grid has " +
                      std::to_string(grid.size()));
  }
  return out;
}

std::vector<Vec3> read_sampled_table(const std::string& path, const Grid& grid) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sampled field table '" + path + "'");
  return read_sampled_table(in, grid);
}

Eigen::Matrix2cd pauli_dot(const Vec3& v) {
  Eigen::Matrix2cd m;
  m << cplx(v.z(), 0.0), cplx(v.x(), -v.y()),
       cplx(v.x(), v.y()), cplx(-v.z(), 0.0);
  return m;
}

namespace {
// cos(theta/2), without cancellation in 1 + n_z near the south pole.
double half_cos(const Vec3& n) {
  const double one_plus = n.z() >= 0.0 ? 1.0 + n.z() : (n.x() * n.x() + n.y() * n.y()) / (1.0 - n.z());
  return std::sqrt(0.5 * one_plus);
}
}  // namespace

SpinorPair local_spinors(const Vec3& n) {
  const double c = half_cos(n);
  SpinorPair s;
  s.plus << cplx(c, 0.0), cplx(n.x(), n.y()) / (2.0 * c);
  s.minus << -cplx(n.x(), -n.y()) / (2.0 * c), cplx(c, 0.0);
  return s;
}

SpinorPair local_spinors_derivative(const Vec3& n, const Vec3& dn) {
  const double c = half_cos(n);
  const double dc = dn.z() / (4.0 * c);
  const cplx up(n.x(), n.y());
  const cplx dup(dn.x(), dn.y());
  SpinorPair d;
  d.plus << cplx(dc, 0.0), dup / (2.0 * c) - up * dc / (2.0 * c * c);
  d.minus << -std::conj(dup) / (2.0 * c) + std::conj(up) * dc / (2.0 * c * c), cplx(dc, 0.0);
  return d;
}

SpinGeometry spin_geometry(const AxisField& field, double mass, double t) {
  const Grid& grid = field.grid();
  const std::size_t n = grid.size();
  const auto ni = static_cast<Eigen::Index>(n);
  SpinGeometry g{.grid = grid, .mass = mass, .time = t};
  g.direction.resize(n);
  g.spinor_plus.resize(n);
  g.spinor_minus.resize(n);
  g.projector_plus.resize(n);
  g.projector_minus.resize(n);
  g.force_field.resize(n);
  g.a_plus.resize(ni);
  g.a_minus.resize(ni);
  g.a_pm.resize(ni);
  g.grav_potential.resize(ni);
  g.phi_plus.resize(ni);
  g.phi_minus.resize(ni);

  const cplx minus_i(0.0, -1.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const Vec3 nv = field.n(i, t);
    if ((nv + Vec3::UnitZ()).norm() < kSouthPoleTolerance) {
      throw ConfigError("axis field reaches the south pole n = -z at x = " + fmt_double(grid.x(i)) +
                        " (t = " + fmt_double(t) + "), where the spinor gauge is singular; "
                        "rotate the field family away from -z");
    }
    const Vec3 dn = field.dn(i, t);
    const SpinorPair s = local_spinors(nv);
    const SpinorPair ds = local_spinors_derivative(nv, dn);
    const SpinorPair dts = local_spinors_derivative(nv, field.dndt(i, t));

    g.direction[i] = nv;
    g.spinor_plus[i] = s.plus;
    g.spinor_minus[i] = s.minus;
    const Eigen::Matrix2cd sn = pauli_dot(nv);
    g.projector_plus[i] = 0.5 * (Eigen::Matrix2cd::Identity() + sn);
    g.projector_minus[i] = 0.5 * (Eigen::Matrix2cd::Identity() - sn);
    g.force_field[i] = dn.cross(nv);
    g.a_plus(ii) = (minus_i * s.plus.dot(ds.plus)).real();
    g.a_minus(ii) = (minus_i * s.minus.dot(ds.minus)).real();
    g.a_pm(ii) = minus_i * s.plus.dot(ds.minus);
    g.grav_potential(ii) = std::norm(g.a_pm(ii)) / (2.0 * mass);
    g.phi_plus(ii) = (minus_i * s.plus.dot(dts.plus)).real();
    g.phi_minus(ii) = (minus_i * s.minus.dot(dts.minus)).real();
  }
  return g;
}

}  // namespace pointer
