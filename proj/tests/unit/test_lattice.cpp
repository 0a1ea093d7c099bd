#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numeric>
#include <random>

#include "qlbm/lattice.hpp"

using namespace qlbm;

namespace {

double weight_sum(const LatticeConfig& c) {
  double s = 0.0;
  for (std::size_t a = 0; a < c.size(); ++a) s += c.weight(a);
  return s;
}

std::vector<PhysicsModel> all_models() {
  return {
      {LowMachAthermal{}, 1.0},
      {IncompressibleAthermal{1.2}, 0.8},
      {LinearAcoustics{1.0, {0.05, -0.03, 0.0}}, 0.6},
      {ShallowWater{9.81}, 1.0},
      {LinearShallowWater{1.5, 1.0, {0.02, 0.01, 0.0}}, 1.0},
  };
}

bool is_linear(const PhysicsModel& m) {
  return std::holds_alternative<LinearAcoustics>(m.kind) || std::holds_alternative<LinearShallowWater>(m.kind);
}

}  // namespace

TEST_CASE("D2Q9 velocity order and weights") {
  const auto c = standard_config(LatticeName::D2Q9);
  REQUIRE(c.size() == 9);
  const std::array<std::array<int, 2>, 9> expect = {
      {{0, 0}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};
  for (std::size_t a = 0; a < 9; ++a) {
    CHECK(c.velocities[a][0] == expect[a][0]);
    CHECK(c.velocities[a][1] == expect[a][1]);
  }
  CHECK(c.weights[0] == Rational{4, 9});
  CHECK(c.weights[1] == Rational{1, 9});
  CHECK(c.weights[2] == Rational{1, 36});
  CHECK(weight_sum(c) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(c.c_s * c.c_s == doctest::Approx(1.0 / 3.0));
  CHECK_FALSE(c.two_levels());
}

TEST_CASE("second-order isotropy of the level-1 velocities") {
  for (auto name : {LatticeName::D2Q9, LatticeName::D2Q17, LatticeName::D3Q27}) {
    const auto c = standard_config(name);
    const auto idx = c.level_indices(1);
    double w = 0.0;
    for (auto a : idx) w += c.weight(a);
    CHECK(w == doctest::Approx(1.0));
    for (int i = 0; i < c.dim; ++i)
      for (int j = 0; j < c.dim; ++j) {
        double s = 0.0, first = 0.0;
        for (auto a : idx) {
          s += c.weight(a) * c.velocities[a][i] * c.velocities[a][j];
          first += c.weight(a) * c.velocities[a][i];
        }
        CHECK(s == doctest::Approx(i == j ? c.c_s * c.c_s : 0.0));
        CHECK(first == doctest::Approx(0.0));
      }
  }
}

TEST_CASE("D2Q17 carries a second time level") {
  const auto c = standard_config("D2Q17");
  CHECK(c.size() == 17);
  CHECK(c.two_levels());
  CHECK(c.level_indices(1).size() == 9);
  CHECK(c.level_indices(2).size() == 8);
  for (std::size_t a = 0; a < c.size(); ++a) {
    const auto b = c.opposite(a);
    CHECK(c.level_of[b] == c.level_of[a]);
    CHECK(c.opposite(b) == a);
  }
}

TEST_CASE("D3Q27 table") {
  const auto c = standard_config(LatticeName::D3Q27);
  CHECK(c.size() == 27);
  CHECK(c.dim == 3);
  CHECK(model_arity(c) == 4);
  CHECK(weight_sum(c) == doctest::Approx(1.0));
}

TEST_CASE("lattice names round trip and reject unknown names") {
  for (auto n : {LatticeName::D2Q9, LatticeName::D2Q17, LatticeName::D3Q27})
    CHECK(lattice_name_from_string(to_string(n)) == n);
  CHECK_THROWS_AS(lattice_name_from_string("D2Q5"), std::invalid_argument);
}

TEST_CASE("model validation") {
  CHECK_THROWS_AS(validate(PhysicsModel{LowMachAthermal{}, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(validate(PhysicsModel{IncompressibleAthermal{-1.0}, 1.0}), std::invalid_argument);
  CHECK_NOTHROW(validate(PhysicsModel{LinearAcoustics{}, 0.55}));
  CHECK(is_linear_model(PhysicsModel{LinearAcoustics{}, 1.0}));
  CHECK(is_linear_model(PhysicsModel{LinearShallowWater{}, 1.0}));
  CHECK_FALSE(is_linear_model(PhysicsModel{ShallowWater{}, 1.0}));
  CHECK(viscosity(1.0) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("zeroth and first moments of every equilibrium reproduce the inputs") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> pert(-0.1, 0.1);
  std::uniform_real_distribution<double> pos(0.5, 1.5);
  for (auto name : {LatticeName::D2Q9, LatticeName::D2Q17}) {
    const auto cfg = standard_config(name);
    for (const auto& model : all_models()) {
      double worst = 0.0;
      for (int trial = 0; trial < 1000; ++trial) {
        const double v0 = is_linear(model) ? pert(rng) : pos(rng);
        const double v[3] = {v0, pert(rng), pert(rng)};
        const auto f = equilibrium(model, cfg, std::span<const double>(v, 3));
        REQUIRE(f.size() == cfg.size());
        const auto m = moments(f, cfg);
        worst = std::max({worst, std::abs(m.v0 - v[0]), std::abs(m.v1[0] - v[1]), std::abs(m.v1[1] - v[2])});
      }
      INFO(model_name(model), " on ", to_string(name));
      CHECK(worst <= 1e-10);
    }
  }
}

TEST_CASE("level-2 entries of D2Q17 repeat their level-1 mirrors") {
  const auto cfg = standard_config(LatticeName::D2Q17);
  const auto l1 = cfg.level_indices(1);
  const auto l2 = cfg.level_indices(2);
  const double v[3] = {0.3, 0.01, -0.02};
  const auto f = equilibrium(PhysicsModel{LinearAcoustics{}, 0.8}, cfg, std::span<const double>(v, 3));
  for (std::size_t k = 0; k < l2.size(); ++k) CHECK(f[l2[k]] == doctest::Approx(f[l1[k + 1]]));
}

TEST_CASE("linear models are affine in the inputs") {
  const auto cfg = standard_config(LatticeName::D2Q9);
  for (const auto& model : all_models()) {
    if (!is_linear(model)) continue;
    const double a[3] = {0.2, 0.05, -0.01}, b[3] = {-0.1, 0.02, 0.04};
    double ab[3];
    for (int i = 0; i < 3; ++i) ab[i] = a[i] + b[i];
    const auto fa = equilibrium(model, cfg, std::span<const double>(a, 3));
    const auto fb = equilibrium(model, cfg, std::span<const double>(b, 3));
    const auto fab = equilibrium(model, cfg, std::span<const double>(ab, 3));
    const double z[3] = {0.0, 0.0, 0.0};
    const auto f0 = equilibrium(model, cfg, std::span<const double>(z, 3));
    for (std::size_t k = 0; k < 9; ++k) CHECK(fab[k] == doctest::Approx(fa[k] + fb[k] - f0[k]).epsilon(1e-12));
  }
}

TEST_CASE("nonlinear_extend and extended_inputs") {
  const auto e = nonlinear_extend(1.1, {0.2, -0.3});
  CHECK(e[0] == 1.1);
  CHECK(e[3] == doctest::Approx(0.04));
  CHECK(e[4] == doctest::Approx(0.09));
  CHECK(e[5] == doctest::Approx(-0.06));
  const auto inc = extended_inputs(PhysicsModel{IncompressibleAthermal{1.0}, 1.0}, 0.1, {0.2, 0.3});
  CHECK(inc[3] == doctest::Approx(0.04));
  CHECK(inc[5] == doctest::Approx(0.06));
  const auto lm = extended_inputs(PhysicsModel{LowMachAthermal{}, 1.0}, 2.0, {0.2, 0.3});
  CHECK(lm[3] == doctest::Approx(0.02));
  CHECK(lm[5] == doctest::Approx(0.03));
}

TEST_CASE("FieldState layout and level conversion") {
  FieldState f(4, 8, 6, 2);
  CHECK(f.sites() == 32);
  CHECK(f.nonlinear());
  f.at(0, 1, 1, 2) = 0.5;
  f.at(0, 2, 1, 2) = -0.25;
  f.refresh_products();
  CHECK(f.at(0, 3, 1, 2) == doctest::Approx(0.25));
  CHECK(f.at(0, 5, 1, 2) == doctest::Approx(-0.125));
  const auto one = f.with_levels(1);
  CHECK(one.levels() == 1);
  CHECK(one.at(0, 1, 1, 2) == 0.5);
  CHECK(f.linear_part().num_vars() == 3);
  CHECK(is_power_of_two(64));
  CHECK_FALSE(is_power_of_two(48));
}
