#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <random>

#include "qlbm/classical_lbm.hpp"

using namespace qlbm;

namespace {

FieldState random_state(std::size_t nx, std::size_t ny, std::size_t levels, std::uint64_t seed, double amp = 0.1) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amp, amp);
  FieldState f(nx, ny, 3, levels);
  for (std::size_t l = 0; l < levels; ++l)
    for (std::size_t v = 0; v < 3; ++v)
      for (auto& x : f.grid(l, v)) x = u(rng);
  return f;
}

// Periodic collide-and-stream of level `level` equilibria over a distance `d` per velocity.
std::array<std::vector<double>, 3> streamed_moments(const FieldState& f, std::size_t level, int d,
                                                    const PhysicsModel& model, const LatticeConfig& cfg) {
  const auto nx = static_cast<long>(f.nx()), ny = static_cast<long>(f.ny());
  std::array<std::vector<double>, 3> out;
  for (auto& g : out) g.assign(f.sites(), 0.0);
  const auto l1 = cfg.level_indices(1);
  for (long y = 0; y < ny; ++y)
    for (long x = 0; x < nx; ++x) {
      for (auto a : l1) {
        const long sx = ((x - d * cfg.velocities[a][0]) % nx + nx) % nx;
        const long sy = ((y - d * cfg.velocities[a][1]) % ny + ny) % ny;
        const double v[3] = {f.at(level, 0, sx, sy), f.at(level, 1, sx, sy), f.at(level, 2, sx, sy)};
        const double fa = equilibrium(model, cfg, std::span<const double>(v, 3))[a];
        const auto i = static_cast<std::size_t>(x + nx * y);
        out[0][i] += fa;
        out[1][i] += fa * cfg.velocities[a][0];
        out[2][i] += fa * cfg.velocities[a][1];
      }
    }
  return out;
}

double sum(const std::vector<double>& g) {
  double s = 0.0;
  for (double x : g) s += x;
  return s;
}

}  // namespace

TEST_CASE("tau1_step matches an explicit collide-and-stream") {
  const auto cfg = standard_config(LatticeName::D2Q9);
  for (const PhysicsModel& model : {PhysicsModel{LinearAcoustics{}, 1.0}, PhysicsModel{IncompressibleAthermal{1.0}, 1.0},
                                    PhysicsModel{LowMachAthermal{}, 1.0}}) {
    auto f = random_state(8, 16, 1, 3);
    if (std::holds_alternative<LowMachAthermal>(model.kind))
      for (auto& x : f.grid(0, 0)) x += 1.0;
    const auto next = tau1_step({f, 0, 1.0, 1.0}, model, cfg, {}, {});
    const auto ref = streamed_moments(f, 0, 1, model, cfg);
    double worst = 0.0;
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t i = 0; i < f.sites(); ++i) worst = std::max(worst, std::abs(next.fields.grid(0, v)[i] - ref[v][i]));
    INFO(model_name(model));
    CHECK(worst < 1e-13);
    CHECK(next.step == 1);
  }
}

TEST_CASE("osslbm_step combines the two streamed levels") {
  const auto cfg = standard_config(LatticeName::D2Q17);
  for (double tau : {0.55, 0.8, 1.3}) {
    const PhysicsModel model{LinearAcoustics{}, tau};
    const auto f = random_state(16, 8, 2, 5);
    const auto next = osslbm_step({f, 0, 1.0, 1.0}, model, cfg, {}, {});
    const double c1 = (3.0 - 2.0 * tau) / (2.0 - tau), c2 = (tau - 1.0) / (2.0 - tau);
    const auto a = streamed_moments(f, 0, 1, model, cfg);
    const auto b = streamed_moments(f, 1, 2, model, cfg);
    double worst = 0.0;
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t i = 0; i < f.sites(); ++i) {
        worst = std::max(worst, std::abs(next.fields.grid(0, v)[i] - (c1 * a[v][i] + c2 * b[v][i])));
        worst = std::max(worst, std::abs(next.fields.grid(1, v)[i] - f.grid(0, v)[i]));
      }
    CHECK(worst < 1e-13);
  }
}

TEST_CASE("periodic steps conserve mass and momentum") {
  const PhysicsModel model{LinearAcoustics{}, 0.7};
  const auto cfg = standard_config(LatticeName::D2Q17);
  const auto f = random_state(16, 16, 2, 9);
  auto st = SolverState{f, 0, 1.0, 1.0};
  st.fields.grid(1, 0) = st.fields.grid(0, 0);
  st.fields.grid(1, 1) = st.fields.grid(0, 1);
  st.fields.grid(1, 2) = st.fields.grid(0, 2);
  const double m0 = sum(st.fields.grid(0, 0)), px = sum(st.fields.grid(0, 1)), py = sum(st.fields.grid(0, 2));
  for (int k = 0; k < 10; ++k) st = lbm_step(st, model, cfg, {}, {});
  CHECK(sum(st.fields.grid(0, 0)) == doctest::Approx(m0).epsilon(1e-12));
  CHECK(sum(st.fields.grid(0, 1)) == doctest::Approx(px).epsilon(1e-12));
  CHECK(sum(st.fields.grid(0, 2)) == doctest::Approx(py).epsilon(1e-12));
  CHECK(st.step == 10);
}

TEST_CASE("uniform state is stationary under periodic tau1 steps") {
  const PhysicsModel model{IncompressibleAthermal{1.0}, 1.0};
  const auto cfg = standard_config(LatticeName::D2Q9);
  FieldState f(8, 8, 3, 1);
  for (auto& x : f.grid(0, 0)) x = 0.01;
  for (auto& x : f.grid(0, 1)) x = 0.02;
  const auto runs = run_simulation({f, 0, 1.0, 1.0}, model, cfg, {}, {}, 5);
  REQUIRE(runs.size() == 6);
  CHECK(max_abs_difference(runs.back().fields, f) < 1e-15);
}

TEST_CASE("apply_boundary edge rules") {
  FieldState f = random_state(8, 8, 1, 1);
  BoundarySpec bc;
  bc[Edge::Left] = edge(EdgeKind::Inlet, {0.02, 0.0});
  bc[Edge::Right] = edge(EdgeKind::ZeroGradient);
  bc[Edge::Bottom] = edge(EdgeKind::DirichletZero);
  bc[Edge::Top] = edge(EdgeKind::DirichletZero);
  const auto g = apply_boundary(f, bc);
  for (std::size_t y = 1; y + 1 < 8; ++y) {
    CHECK(g.at(0, 1, 0, y) == 0.02);
    CHECK(g.at(0, 2, 0, y) == 0.0);
    CHECK(g.at(0, 0, 0, y) == g.at(0, 0, 1, y));
    for (std::size_t v = 0; v < 3; ++v) CHECK(g.at(0, v, 7, y) == g.at(0, v, 6, y));
  }
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t v = 0; v < 3; ++v) {
      CHECK(g.at(0, v, x, 0) == 0.0);
      CHECK(g.at(0, v, x, 7) == 0.0);
    }
  CHECK(g.at(0, 0, 3, 3) == f.at(0, 0, 3, 3));
}

TEST_CASE("boundary spec validation") {
  BoundarySpec bc;
  bc[Edge::Left] = edge(EdgeKind::DirichletZero);
  CHECK_THROWS_AS(bc.validate(8, 8), std::invalid_argument);
  bc[Edge::Right] = edge(EdgeKind::ZeroGradient);
  CHECK_NOTHROW(bc.validate(8, 8));
  bc[Edge::Left] = edge(EdgeKind::Inlet, {std::nan(""), 0.0});
  CHECK_THROWS_AS(bc.validate(8, 8), std::invalid_argument);
}

TEST_CASE("object masks") {
  ObjectMask mask{{{2, 3, 6, 5}}};
  CHECK_NOTHROW(mask.validate(8, 8));
  CHECK(mask.interior_cells(8, 8).size() == 8);
  FieldState f = random_state(8, 8, 1, 2);
  const auto g = apply_mask(f, mask);
  for (auto i : mask.two_layer_cells(8, 8))
    for (std::size_t v = 0; v < 3; ++v) CHECK(g.grid(0, v)[i] == 0.0);
  const auto h = apply_mask_full(f, mask);
  for (auto i : mask.interior_cells(8, 8)) CHECK(h.grid(0, 0)[i] == 0.0);
  CHECK(h.at(0, 0, 0, 0) == f.at(0, 0, 0, 0));
  CHECK_THROWS_AS((ObjectMask{{{0, 0, 2, 2}}}.validate(8, 8)), std::invalid_argument);
  CHECK_THROWS_AS((ObjectMask{{{3, 3, 3, 5}}}.validate(8, 8)), std::invalid_argument);
}

TEST_CASE("masked and bounded steps keep the prescribed cells") {
  const PhysicsModel model{IncompressibleAthermal{1.0}, 1.0};
  const auto cfg = standard_config(LatticeName::D2Q9);
  BoundarySpec bc;
  bc[Edge::Left] = edge(EdgeKind::Inlet, {0.02, 0.0});
  bc[Edge::Right] = edge(EdgeKind::ZeroGradient);
  bc[Edge::Bottom] = edge(EdgeKind::DirichletZero);
  bc[Edge::Top] = edge(EdgeKind::DirichletZero);
  const ObjectMask mask{{{2, 3, 4, 5}}};
  FieldState f(8, 8, 3, 1);
  for (auto& x : f.grid(0, 1)) x = 0.02;
  auto st = SolverState{apply_mask(apply_boundary(f, bc), mask), 0, 1.0, 1.0};
  for (int k = 0; k < 20; ++k) st = tau1_step(st, model, cfg, bc, mask);
  for (auto i : mask.two_layer_cells(8, 8)) CHECK(st.fields.grid(0, 1)[i] == 0.0);
  for (std::size_t y = 1; y < 7; ++y) CHECK(st.fields.at(0, 1, 0, y) == 0.02);
}

TEST_CASE("analytic pulse") {
  const double beta = 15.0;
  const PulseGrid g{16, 16, 3.0 / 16.0, 0.0, 0.0};
  const auto p0 = gaussian_pulse_analytic(beta, 0.0, g, 1.0);
  for (std::size_t j = 0; j < 16; ++j)
    for (std::size_t i = 0; i < 16; ++i) {
      const double r2 = g.x(i) * g.x(i) + g.y(j) * g.y(j);
      CHECK(p0[i + 16 * j] == doctest::Approx(std::exp(-beta * r2)).epsilon(1e-8));
    }

  // Independent midpoint quadrature of the Hankel integral.
  auto oracle = [beta](double r, double t) {
    const double kmax = 12.0 * std::sqrt(beta);
    const int n = 200000;
    const double h = kmax / n;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
      const double k = (i + 0.5) * h;
      s += k * std::exp(-k * k / (4.0 * beta)) / (2.0 * beta) * std::cos(k * t) * std::cyl_bessel_j(0.0, k * r);
    }
    return s * h;
  };
  for (double t : {0.1, 0.4, 0.8})
    for (double r : {0.0, 0.2, 0.5, 0.9}) {
      INFO("r=", r, " t=", t);
      CHECK(gaussian_pulse_radial(beta, t, r, 1.0) == doctest::Approx(oracle(r, t)).epsilon(1e-6).scale(1.0));
    }
  // Sound speed rescales time.
  CHECK(gaussian_pulse_radial(beta, 0.2, 0.3, 2.0) == doctest::Approx(gaussian_pulse_radial(beta, 0.4, 0.3, 1.0)));
}
