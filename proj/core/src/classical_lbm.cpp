#include "qlbm/classical_lbm.hpp"

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>

namespace qlbm {

namespace {

struct Integrated {
  std::vector<double> v0, v1x, v1y;
};

// Sum over alpha of f^eq_alpha(x - shift * c_alpha), together with its first moment.
Integrated stream_equilibria(const PhysicsModel& model, const LatticeConfig& config, const FieldState& fields,
                             std::size_t level, int shift) {
  const std::size_t nx = fields.nx();
  const std::size_t ny = fields.ny();
  const auto idx = config.level_indices(1);
  Integrated out;
  out.v0.assign(fields.sites(), 0.0);
  out.v1x.assign(fields.sites(), 0.0);
  out.v1y.assign(fields.sites(), 0.0);
  const auto& g0 = fields.grid(level, 0);
  const auto& g1 = fields.grid(level, 1);
  const auto& g2 = fields.grid(level, 2);
  const long lnx = static_cast<long>(nx);
  const long lny = static_cast<long>(ny);
  for (std::size_t y = 0; y < ny; ++y) {
    for (std::size_t x = 0; x < nx; ++x) {
      const std::size_t s = fields.site(x, y);
      const double v[3] = {g0[s], g1[s], g2[s]};
      const auto f = equilibrium(model, config, std::span<const double>(v, 3));
      for (std::size_t a : idx) {
        const auto& c = config.velocities[a];
        const long tx = ((static_cast<long>(x) + shift * c[0]) % lnx + lnx) % lnx;
        const long ty = ((static_cast<long>(y) + shift * c[1]) % lny + lny) % lny;
        const std::size_t t = static_cast<std::size_t>(tx) + nx * static_cast<std::size_t>(ty);
        out.v0[t] += f[a];
        out.v1x[t] += c[0] * f[a];
        out.v1y[t] += c[1] * f[a];
      }
    }
  }
  return out;
}

void check_state(const SolverState& state, const LatticeConfig& config) {
  if (config.dim != 2) throw std::invalid_argument("the classical solver is two-dimensional");
  if (state.fields.sites() == 0) throw std::invalid_argument("empty field state");
}

FieldState finish(FieldState next, bool nonlinear, const BoundarySpec& bc, const ObjectMask& mask) {
  next = apply_boundary(std::move(next), bc);
  next = apply_mask(std::move(next), mask);
  if (nonlinear) return next.with_products();
  return next;
}

std::vector<std::size_t> outer_cells(std::size_t nx, std::size_t ny, Edge e, std::size_t depth) {
  std::vector<std::size_t> out;
  switch (e) {
    case Edge::Left:
      for (std::size_t y = 0; y < ny; ++y) out.push_back(depth + nx * y);
      break;
    case Edge::Right:
      for (std::size_t y = 0; y < ny; ++y) out.push_back(nx - 1 - depth + nx * y);
      break;
    case Edge::Bottom:
      for (std::size_t x = 0; x < nx; ++x) out.push_back(x + nx * depth);
      break;
    case Edge::Top:
      for (std::size_t x = 0; x < nx; ++x) out.push_back(x + nx * (ny - 1 - depth));
      break;
  }
  return out;
}

}  // namespace

EdgeCondition edge(EdgeKind kind, std::array<double, 2> inlet) {
  EdgeCondition e;
  e.kind = kind;
  e.inlet = inlet;
  return e;
}

void BoundarySpec::validate(std::size_t nx, std::size_t ny) const {
  if (edges[0].bounded() != edges[1].bounded() || edges[2].bounded() != edges[3].bounded())
    throw std::invalid_argument("periodic edges must pair with their opposite edge");
  for (const auto& e : edges)
    if (e.kind == EdgeKind::Inlet && !(std::isfinite(e.inlet[0]) && std::isfinite(e.inlet[1])))
      throw std::invalid_argument("inlet velocity must be finite");
  if ((x_bounded() && nx < 4) || (y_bounded() && ny < 4))
    throw std::invalid_argument("bounded dimensions need at least 4 cells");
}

void ObjectMask::validate(std::size_t nx, std::size_t ny) const {
  for (const auto& r : rects) {
    if (r.x1 <= r.x0 || r.y1 <= r.y0) throw std::invalid_argument("mask rectangle is empty");
    if (r.x0 < 2 || r.y0 < 2 || r.x1 > static_cast<int>(nx) - 2 || r.y1 > static_cast<int>(ny) - 2)
      throw std::invalid_argument("mask rectangle needs 2 cells clearance from the domain edges");
  }
}

std::vector<std::size_t> ObjectMask::two_layer_cells(std::size_t nx, std::size_t ny) const {
  validate(nx, ny);
  std::vector<bool> hit(nx * ny, false);
  for (const auto& r : rects)
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) {
        const int depth = std::min({x - r.x0, r.x1 - 1 - x, y - r.y0, r.y1 - 1 - y});
        if (depth < 2) hit[static_cast<std::size_t>(x) + nx * static_cast<std::size_t>(y)] = true;
      }
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < hit.size(); ++i)
    if (hit[i]) out.push_back(i);
  return out;
}

std::vector<std::size_t> ObjectMask::interior_cells(std::size_t nx, std::size_t ny) const {
  validate(nx, ny);
  std::vector<bool> hit(nx * ny, false);
  for (const auto& r : rects)
    for (int y = r.y0; y < r.y1; ++y)
      for (int x = r.x0; x < r.x1; ++x) hit[static_cast<std::size_t>(x) + nx * static_cast<std::size_t>(y)] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < hit.size(); ++i)
    if (hit[i]) out.push_back(i);
  return out;
}

std::vector<bool> boundary_layer_flags(std::size_t nx, std::size_t ny, const BoundarySpec& bc) {
  std::vector<bool> flags(nx * ny, false);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      const bool bx = bc.x_bounded() && (x < 2 || x + 2 >= nx);
      const bool by = bc.y_bounded() && (y < 2 || y + 2 >= ny);
      flags[x + nx * y] = bx || by;
    }
  return flags;
}

SolverState tau1_step(const SolverState& state, const PhysicsModel& model, const LatticeConfig& config,
                      const BoundarySpec& bc, const ObjectMask& mask) {
  check_state(state, config);
  if (state.fields.levels() != 1) throw std::invalid_argument("tau1_step expects a one-level state");
  bc.validate(state.fields.nx(), state.fields.ny());
  const auto in = stream_equilibria(model, config, state.fields, 0, 1);
  FieldState next(state.fields.nx(), state.fields.ny(), 3, 1);
  next.grid(0, 0) = in.v0;
  next.grid(0, 1) = in.v1x;
  next.grid(0, 2) = in.v1y;
  SolverState out = state;
  out.fields = finish(std::move(next), state.fields.nonlinear(), bc, mask);
  ++out.step;
  return out;
}

SolverState osslbm_step(const SolverState& state, const PhysicsModel& model, const LatticeConfig& config,
                        const BoundarySpec& bc, const ObjectMask& mask) {
  check_state(state, config);
  validate(model);
  if (state.fields.levels() != 2) throw std::invalid_argument("osslbm_step expects a two-level state");
  const FieldState& f = state.fields;
  bc.validate(f.nx(), f.ny());
  const double tau = model.tau;
  const double c1 = (3.0 - 2.0 * tau) / (2.0 - tau);
  const double c2 = (tau - 1.0) / (2.0 - tau);

  auto v = stream_equilibria(model, config, f, 0, 1);
  if (c2 != 0.0) {
    const auto w = stream_equilibria(model, config, f, 1, 2);
    const auto layer = boundary_layer_flags(f.nx(), f.ny(), bc);
    for (std::size_t i = 0; i < f.sites(); ++i) {
      if (layer[i]) continue;
      v.v0[i] = c1 * v.v0[i] + c2 * w.v0[i];
      v.v1x[i] = c1 * v.v1x[i] + c2 * w.v1x[i];
      v.v1y[i] = c1 * v.v1y[i] + c2 * w.v1y[i];
    }
  }
  FieldState next(f.nx(), f.ny(), 3, 2);
  next.grid(0, 0) = std::move(v.v0);
  next.grid(0, 1) = std::move(v.v1x);
  next.grid(0, 2) = std::move(v.v1y);
  for (std::size_t k = 0; k < 3; ++k) next.grid(1, k) = f.grid(0, k);
  SolverState out = state;
  out.fields = finish(std::move(next), f.nonlinear(), bc, mask);
  ++out.step;
  return out;
}

SolverState lbm_step(const SolverState& state, const PhysicsModel& model, const LatticeConfig& config,
                     const BoundarySpec& bc, const ObjectMask& mask) {
  if (state.fields.levels() == 1) return tau1_step(state, model, config, bc, mask);
  return osslbm_step(state, model, config, bc, mask);
}

FieldState apply_boundary(FieldState fields, const BoundarySpec& bc) {
  const std::size_t nx = fields.nx();
  const std::size_t ny = fields.ny();
  for (int e = 0; e < 4; ++e) {
    const auto& cond = bc.edges[e];
    if (!cond.bounded()) continue;
    const auto outer = outer_cells(nx, ny, static_cast<Edge>(e), 0);
    const auto inner = outer_cells(nx, ny, static_cast<Edge>(e), 1);
    for (std::size_t v = 0; v < 3; ++v) {
      if (!(cond.applies_to & (1u << v))) continue;
      auto& g = fields.grid(0, v);
      for (std::size_t k = 0; k < outer.size(); ++k) {
        switch (cond.kind) {
          case EdgeKind::DirichletZero: g[outer[k]] = 0.0; break;
          case EdgeKind::ZeroGradient: g[outer[k]] = g[inner[k]]; break;
          case EdgeKind::Inlet: g[outer[k]] = v == 0 ? g[inner[k]] : cond.inlet[v - 1]; break;
          case EdgeKind::Periodic: break;
        }
      }
    }
  }
  if (fields.levels() == 2 && !bc.all_periodic()) {
    const auto layer = boundary_layer_flags(nx, ny, bc);
    for (std::size_t v = 0; v < fields.num_vars(); ++v) {
      auto& g = fields.grid(1, v);
      for (std::size_t i = 0; i < g.size(); ++i)
        if (layer[i]) g[i] = 0.0;
    }
  }
  fields.refresh_products();
  return fields;
}

namespace {
FieldState zero_cells(FieldState fields, const std::vector<std::size_t>& cells) {
  for (std::size_t l = 0; l < fields.levels(); ++l)
    for (std::size_t v = 0; v < fields.num_vars(); ++v) {
      auto& g = fields.grid(l, v);
      for (std::size_t i : cells) g[i] = 0.0;
    }
  return fields;
}
}  // namespace

FieldState apply_mask(FieldState fields, const ObjectMask& mask) {
  if (mask.empty()) return fields;
  const auto cells = mask.two_layer_cells(fields.nx(), fields.ny());
  return zero_cells(std::move(fields), cells);
}

FieldState apply_mask_full(FieldState fields, const ObjectMask& mask) {
  if (mask.empty()) return fields;
  const auto cells = mask.interior_cells(fields.nx(), fields.ny());
  return zero_cells(std::move(fields), cells);
}

std::vector<SolverState> run_simulation(const SolverState& state, const PhysicsModel& model,
                                        const LatticeConfig& config, const BoundarySpec& bc,
                                        const ObjectMask& mask, std::size_t steps) {
  std::vector<SolverState> traj;
  traj.reserve(steps + 1);
  traj.push_back(state);
  for (std::size_t n = 0; n < steps; ++n) traj.push_back(lbm_step(traj.back(), model, config, bc, mask));
  return traj;
}

double gaussian_pulse_radial(double beta, double t, double r, double c) {
  if (!(beta > 0.0) || t < 0.0) throw std::invalid_argument("gaussian_pulse_analytic: need beta > 0, t >= 0");
  if (t == 0.0) return std::exp(-beta * r * r);
  auto integrand = [&](double k) {
    return k * std::exp(-k * k / (4.0 * beta)) / (2.0 * beta) * std::cos(c * k * t) * std::cyl_bessel_j(0.0, k * r);
  };
  // exp(-k^2/(4 beta)) < 1e-40 beyond this cut-off
  const double kmax = 2.0 * std::sqrt(beta) * std::sqrt(40.0 * std::log(10.0));
  double error = 0.0;
  double l1 = 0.0;
  const double value = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, 0.0, kmax, 25,
                                                                                     1e-10, &error, &l1);
  if (!(error <= 1e-8 * std::max(std::abs(value), 1e-6 * l1) || error <= 1e-14))
    throw std::runtime_error("gaussian_pulse_analytic: quadrature did not converge at r=" + std::to_string(r) +
                             ", t=" + std::to_string(t));
  return value;
}

std::vector<double> gaussian_pulse_analytic(double beta, double t, const PulseGrid& grid, double c) {
  std::vector<double> p(grid.nx * grid.ny);
  std::map<double, double> cache;
  for (std::size_t j = 0; j < grid.ny; ++j)
    for (std::size_t i = 0; i < grid.nx; ++i) {
      const double r2 = grid.x(i) * grid.x(i) + grid.y(j) * grid.y(j);
      auto it = cache.find(r2);
      if (it == cache.end()) it = cache.emplace(r2, gaussian_pulse_radial(beta, t, std::sqrt(r2), c)).first;
      p[i + grid.nx * j] = it->second;
    }
  return p;
}

}  // namespace qlbm
