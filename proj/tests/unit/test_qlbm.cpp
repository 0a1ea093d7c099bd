#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "qlbm/qlbm.hpp"

using namespace qlbm;

namespace {

// a_c = 0 block of the embedding circuit, column j = image of |s = j>.
Eigen::MatrixXcd embedded_block(const CollisionEmbedding& emb) {
  const auto layout = make_layout(4, 4, false, {});
  const auto gs = svd_embed(emb, layout);
  const unsigned lat = layout.lattice_qubits();
  Eigen::MatrixXcd m(16, 16);
  for (std::size_t j = 0; j < 16; ++j) {
    auto psi = init_basis(layout.total(), j << lat);
    for (const auto& g : gs) apply_gate(psi, g);
    for (std::size_t i = 0; i < 16; ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = psi[i << lat];
  }
  return m;
}

FieldState random_fields(std::size_t n, std::size_t levels, std::uint64_t seed) {
  Rng rng(seed);
  FieldState f(n, n, 3, levels);
  for (std::size_t l = 0; l < levels; ++l)
    for (std::size_t v = 0; v < 3; ++v)
      for (auto& x : f.grid(l, v)) x = 0.1 * (2.0 * rng.uniform() - 1.0);
  return f;
}

}  // namespace

TEST_CASE("collision embedding reproduces C / sigma_max on the a_c = 0 block") {
  struct Case {
    PhysicsModel model;
    CollisionMode mode;
  };
  const Case cases[] = {
      {{LinearAcoustics{1.0, {0.0, 0.0, 0.0}}, 1.0}, CollisionMode::Linear},
      {{LinearAcoustics{1.2, {0.05, -0.02, 0.0}}, 0.8}, CollisionMode::Linear},
      {{LinearShallowWater{1.0, 1.0, {0.01, 0.02, 0.0}}, 1.0}, CollisionMode::Linear},
      {{IncompressibleAthermal{1.0}, 1.0}, CollisionMode::NonlinearExtended},
      {{LowMachAthermal{}, 1.0}, CollisionMode::NonlinearExtended},
  };
  for (auto name : {LatticeName::D2Q9, LatticeName::D2Q17})
    for (const auto& c : cases) {
      const auto emb = build_collision_matrix(c.model, standard_config(name), c.mode);
      const auto m = embedded_block(emb);
      const double err = (m - emb.C.cast<cplx>() / emb.sigma.front()).cwiseAbs().maxCoeff();
      INFO(model_name(c.model), " ", to_string(name));
      CHECK(err < 1e-12);
      CHECK(emb.scale == doctest::Approx(emb.sigma.front()));
    }
}

TEST_CASE("collision rows are the equilibria in collision slot order") {
  const PhysicsModel model{LinearAcoustics{}, 1.0};
  const auto cfg = standard_config(LatticeName::D2Q9);
  const auto emb = build_collision_matrix(model, cfg, CollisionMode::Linear);
  const double v[3] = {0.3, -0.1, 0.2};
  const auto f = equilibrium(model, cfg, std::span<const double>(v, 3));
  for (std::size_t a = 0; a < 9; ++a) {
    double row = 0.0;
    for (int j = 0; j < 3; ++j) row += emb.C(static_cast<Eigen::Index>(slots::kCollision[a]), j) * v[j];
    CHECK(row == doctest::Approx(f[a]));
  }
  CHECK_THROWS_AS(build_collision_matrix({ShallowWater{}, 1.0}, cfg, CollisionMode::Linear), std::invalid_argument);
  CHECK_THROWS_AS(build_collision_matrix(model, cfg, CollisionMode::NonlinearExtended), std::invalid_argument);
}

TEST_CASE("arbitrary matrices embed exactly") {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(16, 16);
  Rng rng(7);
  for (Eigen::Index i = 0; i < 16; ++i)
    for (Eigen::Index j = 0; j < 16; ++j) c(i, j) = rng.normal();
  const auto emb = embed_matrix(c);
  CHECK((embedded_block(emb) - c.cast<cplx>() / emb.scale).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(embed_matrix(Eigen::MatrixXd::Zero(16, 16)), std::invalid_argument);
  CHECK_THROWS_AS(embed_matrix(Eigen::MatrixXd::Zero(8, 8)), std::invalid_argument);
}

TEST_CASE("propagation streams every basis state along its velocity") {
  for (bool two : {false, true}) {
    const auto cfg = standard_config(two ? LatticeName::D2Q17 : LatticeName::D2Q9);
    const std::size_t n = 8;
    const auto layout = make_layout(n, n, two, {});
    const auto gs = build_propagation(cfg, layout);
    const unsigned lat = layout.lattice_qubits();
    auto index = [&](std::size_t x, std::size_t y, std::size_t slot, std::size_t level) {
      return x | y << layout.nx_qubits | slot << lat | level << (lat + 4);
    };
    std::size_t checked = 0;
    double worst = 0.0;
    for (std::size_t level = 0; level < (two ? 2u : 1u); ++level)
      for (std::size_t a = 0; a < 9; ++a)
        for (std::size_t y = 0; y < n; ++y)
          for (std::size_t x = 0; x < n; ++x) {
            auto psi = init_basis(layout.total(), index(x, y, slots::kCollision[a], level));
            for (const auto& g : gs) apply_gate(psi, g);
            const long d = static_cast<long>(level + 1);
            const auto tx = static_cast<std::size_t>((static_cast<long>(x) + d * cfg.velocities[a][0] + 8 * n) % n);
            const auto ty = static_cast<std::size_t>((static_cast<long>(y) + d * cfg.velocities[a][1] + 8 * n) % n);
            worst = std::max(worst, std::abs(psi[index(tx, ty, slots::kPropagated[a], level)] - cplx(1.0)));
            ++checked;
          }
    // Level-1 copies are not streamed.
    for (std::size_t k = 0; k < 3 && two; ++k) {
      auto psi = init_basis(layout.total(), index(3, 5, slots::kCopy + k, 0));
      for (const auto& g : gs) apply_gate(psi, g);
      worst = std::max(worst, std::abs(psi[index(3, 5, slots::kCopy + k, 0)] - cplx(1.0)));
    }
    CHECK(checked == (two ? 2u : 1u) * 9 * n * n);
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("a perturbed phase ladder breaks streaming") {
  const auto cfg = standard_config(LatticeName::D2Q9);
  const auto layout = make_layout(8, 8, false, {});
  const auto gs = build_propagation(cfg, layout, {0.05});
  auto psi = init_basis(layout.total(), 2 | 3 << 3 | slots::kCollision[1] << 6);
  for (const auto& g : gs) apply_gate(psi, g);
  CHECK(std::abs(psi[3 | 3 << 3 | slots::kPropagated[1] << 6]) < 1.0 - 1e-4);
}

TEST_CASE("register sizes") {
  CHECK(make_layout(128, 128, true, {}).total() == 21);
  CHECK(make_layout(8, 8, false, {}).total() == 12);
  BoundarySpec bc;
  bc[Edge::Left] = edge(EdgeKind::ZeroGradient);
  bc[Edge::Right] = edge(EdgeKind::DirichletZero);
  CHECK(make_layout(8, 8, false, bc).total() == 13);
  CHECK_THROWS_AS(make_layout(4096, 4096, true, {}), std::invalid_argument);
}

TEST_CASE("boundary block argument checks") {
  const auto layout = make_layout(8, 8, true, {});
  CHECK_THROWS_AS(build_boundary({}, 2.5, layout), std::invalid_argument);
  CHECK_THROWS_AS(build_boundary({}, 0.8, make_layout(8, 8, false, {})), std::invalid_argument);
}

TEST_CASE("encode and decode round trip with the ledger") {
  const PhysicsModel model{LinearAcoustics{}, 0.8};
  const auto plan = build_step(model, standard_config(LatticeName::D2Q17), {}, {}, 8, 8);
  const auto f = random_fields(8, 2, 1);
  const auto enc = encode_fields(f, make_encoding_map(plan, model, CollisionMode::Linear));
  REQUIRE(enc.map.ledger.size() == 1);
  const auto dec = decode_fields(enc.state, enc.map);
  CHECK(max_abs_difference(dec.fields, f) < 1e-15);
  CHECK(dec.residual_probability < 1e-15);
  CHECK(dec.max_imaginary == 0.0);
  CHECK_THROWS_AS(encode_fields(f.with_levels(1), enc.map), std::invalid_argument);
}

TEST_CASE("one quantum step equals one classical step") {
  struct Case {
    double tau;
    bool mixed;
    bool masked;
  };
  for (const Case c : {Case{1.0, false, false}, Case{0.8, true, true}, Case{0.8, false, false}, Case{1.0, true, true}}) {
    const PhysicsModel model{LinearAcoustics{}, c.tau};
    const auto cfg = standard_config(c.tau == 1.0 ? LatticeName::D2Q9 : LatticeName::D2Q17);
    BoundarySpec bc;
    if (c.mixed) {
      bc[Edge::Left] = edge(EdgeKind::ZeroGradient);
      bc[Edge::Right] = edge(EdgeKind::DirichletZero);
      bc[Edge::Bottom] = edge(EdgeKind::DirichletZero);
      bc[Edge::Top] = edge(EdgeKind::ZeroGradient);
    }
    ObjectMask mask;
    if (c.masked) mask.rects.push_back({3, 3, 5, 5});
    const auto plan = build_step(model, cfg, bc, mask, 8, 8);
    CHECK(validate(plan.full).ok);
    const auto f = random_fields(8, cfg.two_levels() ? 2 : 1, 17);
    const auto classical = lbm_step({f, 0, 1.0, 1.0}, model, cfg, bc, mask).fields;
    double p_keep = 0.0;
    const auto quantum = quantum_step(f, plan, model, CollisionMode::Linear, &p_keep);
    CHECK(max_abs_difference(classical, quantum) < 1e-12);
    CHECK(p_keep > 0.0);
    CHECK(p_keep < 1.0);
  }
}

TEST_CASE("run_step ledger and discarded probability bookkeeping") {
  const PhysicsModel model{LinearAcoustics{}, 1.0};
  const auto plan = build_step(model, standard_config(LatticeName::D2Q9), {}, {}, 8, 8);
  auto enc = encode_fields(random_fields(8, 1, 3), make_encoding_map(plan, model, CollisionMode::Linear));
  const auto r = run_step(plan, std::move(enc.state), std::move(enc.map));
  double lost = 0.0;
  for (const auto& [block, p] : r.discarded) lost += p;
  CHECK(lost == doctest::Approx(1.0 - r.p_keep).epsilon(1e-12));
  CHECK(r.map.ledger.back().value == doctest::Approx(1.0 / std::sqrt(r.p_keep)));
  CHECK(r.state.norm() == doctest::Approx(1.0));
}

TEST_CASE("nonlinear-extended step matches tau1 for the incompressible model") {
  const PhysicsModel model{IncompressibleAthermal{1.0}, 1.0};
  const auto cfg = standard_config(LatticeName::D2Q9);
  const auto plan = build_step(model, cfg, {}, {}, 8, 8, {CollisionMode::NonlinearExtended, {}});
  const auto f = random_fields(8, 1, 5);
  const auto classical = tau1_step({f, 0, 1.0, 1.0}, model, cfg, {}, {}).fields;
  const auto quantum = quantum_step(f, plan, model, CollisionMode::NonlinearExtended);
  CHECK(max_abs_difference(classical, quantum) < 1e-12);
}
