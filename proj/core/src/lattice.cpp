#include "qlbm/lattice.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace qlbm {

namespace {

constexpr double kCs2 = 1.0 / 3.0;

double dot(const std::array<int, 3>& c, std::span<const double> v, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += c[i] * v[i];
  return s;
}

double dot(const std::array<int, 3>& c, const std::array<double, 3>& v, int dim) {
  double s = 0.0;
  for (int i = 0; i < dim; ++i) s += c[i] * v[i];
  return s;
}

int norm2(const std::array<int, 3>& c) { return c[0] * c[0] + c[1] * c[1] + c[2] * c[2]; }

LatticeConfig make_d2q9() {
  LatticeConfig cfg;
  cfg.name = LatticeName::D2Q9;
  cfg.dim = 2;
  cfg.velocities = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0},   {0, 1, 0}, {-1, 1, 0},
                    {-1, 0, 0}, {-1, -1, 0}, {0, -1, 0}, {1, -1, 0}};
  for (const auto& c : cfg.velocities) {
    const int n = norm2(c);
    cfg.weights.push_back(n == 0 ? Rational{4, 9} : n == 1 ? Rational{1, 9} : Rational{1, 36});
  }
  cfg.c_s = 1.0 / std::sqrt(3.0);
  cfg.level_of.assign(cfg.velocities.size(), 1);
  return cfg;
}

LatticeConfig make_d2q17() {
  LatticeConfig cfg = make_d2q9();
  cfg.name = LatticeName::D2Q17;
  for (std::size_t a = 1; a < 9; ++a) {
    cfg.velocities.push_back(cfg.velocities[a]);
    cfg.weights.push_back(cfg.weights[a]);
    cfg.level_of.push_back(2);
  }
  return cfg;
}

LatticeConfig make_d3q27() {
  LatticeConfig cfg;
  cfg.name = LatticeName::D3Q27;
  cfg.dim = 3;
  cfg.velocities.push_back({0, 0, 0});
  for (int z = -1; z <= 1; ++z)
    for (int y = -1; y <= 1; ++y)
      for (int x = -1; x <= 1; ++x)
        if (x != 0 || y != 0 || z != 0) cfg.velocities.push_back({x, y, z});
  for (const auto& c : cfg.velocities) {
    switch (norm2(c)) {
      case 0: cfg.weights.push_back({8, 27}); break;
      case 1: cfg.weights.push_back({2, 27}); break;
      case 2: cfg.weights.push_back({1, 54}); break;
      default: cfg.weights.push_back({1, 216}); break;
    }
  }
  cfg.c_s = 1.0 / std::sqrt(3.0);
  cfg.level_of.assign(cfg.velocities.size(), 1);
  return cfg;
}

void require_2d_shallow(const LatticeConfig& config) {
  if (config.dim != 2) throw std::invalid_argument("shallow-water models are defined on 2D lattices only");
}

// Zhou's shallow-water equilibrium with unit lattice speed; diagonal entries carry a factor 1/4.
double shallow_water_entry(const std::array<int, 3>& c, double g, double h, std::span<const double> v1) {
  const double cv = dot(c, v1, 2);
  const double vv = v1[0] * v1[0] + v1[1] * v1[1];
  const int n = norm2(c);
  if (n == 0) return h - 5.0 * g * h * h / 6.0 - 2.0 * vv / (3.0 * h);
  const double axis = g * h * h / 6.0 + cv / 3.0 + cv * cv / (2.0 * h) - vv / (6.0 * h);
  return n == 1 ? axis : 0.25 * axis;
}

// Linearization of shallow_water_entry about (h0, h0 u0).
double linear_shallow_water_entry(const std::array<int, 3>& c, const LinearShallowWater& m, double dh,
                                  std::span<const double> dv1) {
  const double cu = c[0] * m.u0[0] + c[1] * m.u0[1];
  const double uu = m.u0[0] * m.u0[0] + m.u0[1] * m.u0[1];
  const double udv = m.u0[0] * dv1[0] + m.u0[1] * dv1[1];
  const int n = norm2(c);
  if (n == 0) return dh * (1.0 - 5.0 * m.g * m.h0 / 3.0 + 2.0 * uu / 3.0) - 4.0 * udv / 3.0;
  const double cdv = dot(c, dv1, 2);
  const double axis =
      dh * (m.g * m.h0 / 3.0 - cu * cu / 2.0 + uu / 6.0) + cdv / 3.0 + cu * cdv - udv / 3.0;
  return n == 1 ? axis : 0.25 * axis;
}

}  // namespace

std::string_view to_string(LatticeName name) {
  switch (name) {
    case LatticeName::D2Q9: return "D2Q9";
    case LatticeName::D2Q17: return "D2Q17";
    case LatticeName::D3Q27: return "D3Q27";
  }
  return "?";
}

LatticeName lattice_name_from_string(std::string_view text) {
  if (text == "D2Q9") return LatticeName::D2Q9;
  if (text == "D2Q17") return LatticeName::D2Q17;
  if (text == "D3Q27") return LatticeName::D3Q27;
  throw std::invalid_argument("unknown lattice name: " + std::string(text));
}

std::vector<std::size_t> LatticeConfig::level_indices(int level) const {
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < size(); ++a)
    if (level_of[a] == level) out.push_back(a);
  return out;
}

std::size_t LatticeConfig::opposite(std::size_t a) const {
  for (std::size_t b = 0; b < size(); ++b) {
    if (level_of[b] != level_of[a]) continue;
    if (velocities[b][0] == -velocities[a][0] && velocities[b][1] == -velocities[a][1] &&
        velocities[b][2] == -velocities[a][2])
      return b;
  }
  throw std::logic_error("velocity set is not symmetric");
}

bool LatticeConfig::two_levels() const {
  for (int l : level_of)
    if (l == 2) return true;
  return false;
}

LatticeConfig standard_config(LatticeName name) {
  switch (name) {
    case LatticeName::D2Q9: return make_d2q9();
    case LatticeName::D2Q17: return make_d2q17();
    case LatticeName::D3Q27: return make_d3q27();
  }
  throw std::invalid_argument("unknown lattice");
}

LatticeConfig standard_config(std::string_view name) { return standard_config(lattice_name_from_string(name)); }

void validate(const PhysicsModel& model) {
  if (!(model.tau > 0.5 && model.tau < 2.0))
    throw std::invalid_argument("tau must lie in (0.5, 2), got " + std::to_string(model.tau));
  std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, IncompressibleAthermal> || std::is_same_v<T, LinearAcoustics>) {
          if (!(m.rho0 > 0.0)) throw std::invalid_argument("rho0 must be positive");
        } else if constexpr (std::is_same_v<T, LinearShallowWater>) {
          if (!(m.h0 > 0.0)) throw std::invalid_argument("h0 must be positive");
        }
      },
      model.kind);
}

std::string model_name(const PhysicsModel& model) {
  static const char* names[] = {"LowMachAthermal", "IncompressibleAthermal", "LinearAcoustics", "ShallowWater",
                                "LinearShallowWater"};
  return names[model.kind.index()];
}

bool is_linear_model(const PhysicsModel& model) {
  return std::holds_alternative<LinearAcoustics>(model.kind) ||
         std::holds_alternative<LinearShallowWater>(model.kind);
}

std::size_t model_arity(const LatticeConfig& config) { return 1 + static_cast<std::size_t>(config.dim); }

std::vector<double> equilibrium(const PhysicsModel& model, const LatticeConfig& config,
                                std::span<const double> site_values) {
  const int d = config.dim;
  if (site_values.size() != model_arity(config))
    throw std::invalid_argument("equilibrium: expected " + std::to_string(model_arity(config)) +
                                " macroscopic values, got " + std::to_string(site_values.size()));
  const double v0 = site_values[0];
  const std::span<const double> v1 = site_values.subspan(1);
  double vv = 0.0;
  for (int i = 0; i < d; ++i) vv += v1[i] * v1[i];

  std::vector<double> f(config.size());
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LowMachAthermal>) {
          if (!(v0 > 0.0)) throw std::invalid_argument("LowMachAthermal requires V0 > 0");
          for (std::size_t a = 0; a < f.size(); ++a) {
            const double cv = dot(config.velocities[a], v1, d);
            f[a] = config.weight(a) *
                   (v0 + cv / kCs2 + cv * cv / (2.0 * v0 * kCs2 * kCs2) - vv / (2.0 * v0 * kCs2));
          }
        } else if constexpr (std::is_same_v<T, IncompressibleAthermal>) {
          for (std::size_t a = 0; a < f.size(); ++a) {
            const double cv = dot(config.velocities[a], v1, d);
            f[a] = config.weight(a) *
                   (v0 + cv / kCs2 + (cv * cv / (2.0 * kCs2 * kCs2) - vv / (2.0 * kCs2)) / m.rho0);
          }
        } else if constexpr (std::is_same_v<T, LinearAcoustics>) {
          // j = rho0 u' recovered from V1 = (rho u)' = rho0 u' + rho' u0
          std::array<double, 3> j{};
          double uu = 0.0;
          double uj = 0.0;
          for (int i = 0; i < d; ++i) {
            j[i] = v1[i] - v0 * m.u0[i];
            uu += m.u0[i] * m.u0[i];
            uj += m.u0[i] * j[i];
          }
          for (std::size_t a = 0; a < f.size(); ++a) {
            const double cu = dot(config.velocities[a], m.u0, d);
            const double cj = dot(config.velocities[a], j, d);
            const double c0 = 1.0 + cu / kCs2 + cu * cu / (2.0 * kCs2 * kCs2) - uu / (2.0 * kCs2);
            f[a] = config.weight(a) * (v0 * c0 + cj / kCs2 + cu * cj / (kCs2 * kCs2) - uj / kCs2);
          }
        } else if constexpr (std::is_same_v<T, ShallowWater>) {
          require_2d_shallow(config);
          if (!(v0 > 0.0)) throw std::invalid_argument("ShallowWater requires V0 > 0");
          for (std::size_t a = 0; a < f.size(); ++a)
            f[a] = shallow_water_entry(config.velocities[a], m.g, v0, v1);
        } else {
          require_2d_shallow(config);
          for (std::size_t a = 0; a < f.size(); ++a)
            f[a] = linear_shallow_water_entry(config.velocities[a], m, v0, v1);
        }
      },
      model.kind);
  return f;
}

Moments moments(std::span<const double> f, const LatticeConfig& config) {
  if (f.size() != config.size()) throw std::invalid_argument("moments: distribution size mismatch");
  Moments out;
  for (std::size_t a = 0; a < f.size(); ++a) {
    if (config.level_of[a] != 1) continue;
    out.v0 += f[a];
    for (int i = 0; i < config.dim; ++i) out.v1[i] += config.velocities[a][i] * f[a];
  }
  return out;
}

double viscosity(double tau, double dx, double dt) {
  if (tau < 0.5) throw std::invalid_argument("viscosity: tau < 0.5 gives negative viscosity");
  if (!(dx > 0.0) || !(dt > 0.0)) throw std::invalid_argument("viscosity: dx and dt must be positive");
  return kCs2 * (dx * dx / dt) * (tau - 0.5);
}

std::array<double, 6> nonlinear_extend(double v0, std::array<double, 2> u) {
  return {v0, u[0], u[1], u[0] * u[0], u[1] * u[1], u[0] * u[1]};
}

std::array<double, 6> extended_inputs(const PhysicsModel& model, double v0, std::array<double, 2> v1) {
  if (std::holds_alternative<IncompressibleAthermal>(model.kind)) return nonlinear_extend(v0, v1);
  if (std::holds_alternative<LowMachAthermal>(model.kind)) {
    if (!(v0 > 0.0)) throw std::invalid_argument("LowMachAthermal requires V0 > 0");
    return {v0, v1[0], v1[1], v1[0] * v1[0] / v0, v1[1] * v1[1] / v0, v1[0] * v1[1] / v0};
  }
  throw std::invalid_argument("nonlinear-extended inputs are defined for LowMach and Incompressible models");
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

FieldState::FieldState(std::size_t nx, std::size_t ny, std::size_t num_vars, std::size_t levels)
    : nx_(nx), ny_(ny), num_vars_(num_vars), levels_(levels) {
  if (!is_power_of_two(nx) || !is_power_of_two(ny))
    throw std::invalid_argument("grid dimensions must be powers of two");
  if (num_vars != 3 && num_vars != 6) throw std::invalid_argument("FieldState carries 3 or 6 variables");
  if (levels != 1 && levels != 2) throw std::invalid_argument("FieldState carries 1 or 2 time-levels");
  grids_.assign(num_vars * levels, std::vector<double>(nx * ny, 0.0));
}

void FieldState::refresh_products() {
  if (!nonlinear()) return;
  for (std::size_t l = 0; l < levels_; ++l) {
    const auto& ux = grid(l, 1);
    const auto& uy = grid(l, 2);
    auto& xx = grid(l, 3);
    auto& yy = grid(l, 4);
    auto& xy = grid(l, 5);
    for (std::size_t i = 0; i < sites(); ++i) {
      xx[i] = ux[i] * ux[i];
      yy[i] = uy[i] * uy[i];
      xy[i] = ux[i] * uy[i];
    }
  }
}

FieldState FieldState::with_products() const {
  FieldState out(nx_, ny_, 6, levels_);
  for (std::size_t l = 0; l < levels_; ++l)
    for (std::size_t v = 0; v < 3; ++v) out.grid(l, v) = grid(l, v);
  out.refresh_products();
  return out;
}

FieldState FieldState::linear_part() const {
  FieldState out(nx_, ny_, 3, levels_);
  for (std::size_t l = 0; l < levels_; ++l)
    for (std::size_t v = 0; v < 3; ++v) out.grid(l, v) = grid(l, v);
  return out;
}

FieldState FieldState::with_levels(std::size_t levels) const {
  FieldState out(nx_, ny_, num_vars_, levels);
  for (std::size_t l = 0; l < levels; ++l)
    for (std::size_t v = 0; v < num_vars_; ++v) out.grid(l, v) = grid(std::min(l, levels_ - 1), v);
  return out;
}

double max_abs_difference(const FieldState& a, const FieldState& b, std::size_t vars) {
  if (a.nx() != b.nx() || a.ny() != b.ny() || a.levels() != b.levels())
    throw std::invalid_argument("max_abs_difference: shape mismatch");
  double m = 0.0;
  for (std::size_t l = 0; l < a.levels(); ++l)
    for (std::size_t v = 0; v < vars; ++v)
      for (std::size_t i = 0; i < a.sites(); ++i)
        m = std::max(m, std::abs(a.grid(l, v)[i] - b.grid(l, v)[i]));
  return m;
}

DistributionState equilibrium_state(const PhysicsModel& model, const LatticeConfig& config,
                                    const FieldState& fields) {
  DistributionState out;
  out.nx = fields.nx();
  out.ny = fields.ny();
  out.m = config.size();
  out.levels.resize(fields.levels());
  for (std::size_t l = 0; l < fields.levels(); ++l) {
    auto& data = out.levels[l];
    data.resize(fields.sites() * out.m);
    for (std::size_t i = 0; i < fields.sites(); ++i) {
      const double v[3] = {fields.grid(l, 0)[i], fields.grid(l, 1)[i], fields.grid(l, 2)[i]};
      const auto f = equilibrium(model, config, std::span<const double>(v, 3));
      std::copy(f.begin(), f.end(), data.begin() + static_cast<std::ptrdiff_t>(i * out.m));
    }
  }
  return out;
}

}  // namespace qlbm
