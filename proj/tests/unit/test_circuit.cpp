#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numbers>
#include <random>

#include "qlbm/circuit.hpp"
#include "qlbm/simulator.hpp"

using namespace qlbm;

namespace {

std::size_t reverse_bits(std::size_t v, unsigned k) {
  std::size_t r = 0;
  for (unsigned b = 0; b < k; ++b)
    if (v >> b & 1) r |= std::size_t{1} << (k - 1 - b);
  return r;
}

Statevector run_gates(const std::vector<Gate>& gs, Statevector psi) {
  for (const auto& g : gs) apply_gate(psi, g);
  return psi;
}

Statevector random_state(unsigned n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<cplx> v(std::size_t{1} << n);
  for (auto& a : v) a = {rng.normal(), rng.normal()};
  return init_amplitudes(std::move(v)).state;
}

double distance(const Statevector& a, const Statevector& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

}  // namespace

TEST_CASE("qft_block matches the bit-reversed Fourier matrix") {
  for (unsigned k : {1u, 2u, 3u, 4u}) {
    std::vector<unsigned> t;
    for (unsigned j = 0; j < k; ++j) t.push_back(j);
    const std::size_t d = std::size_t{1} << k;
    for (std::size_t x = 0; x < d; ++x) {
      const auto out = run_gates(qft_block(t), init_basis(k, x));
      for (std::size_t y = 0; y < d; ++y) {
        const double ang = 2.0 * std::numbers::pi * static_cast<double>(x * y) / static_cast<double>(d);
        const cplx expect = std::polar(1.0 / std::sqrt(static_cast<double>(d)), ang);
        CHECK(std::abs(out[reverse_bits(y, k)] - expect) < 1e-12);
      }
    }
  }
}

TEST_CASE("native QFT gates agree with their networks") {
  const std::vector<unsigned> t = {1, 3, 4};
  const auto psi = random_state(5, 3);
  CHECK(distance(run_gates({gates::qft(t)}, psi), run_gates(qft_block(t), psi)) < 1e-12);
  CHECK(distance(run_gates({gates::iqft(t)}, psi), run_gates(iqft_block(t), psi)) < 1e-12);
  CHECK(distance(run_gates({gates::qft(t), gates::iqft(t)}, psi), psi) < 1e-12);
  CHECK(expand({gates::qft(t)}).size() == qft_block(t).size());
}

TEST_CASE("inverse undoes a circuit and rejects measurements") {
  Circuit c(4);
  c.begin_block("mix");
  c.append(gates::h(0));
  c.append(gates::cx(0, 1));
  c.append(gates::p(2, 0.3, {neg(1)}));
  c.append(gates::ry(3, 1.1, {pos(0), pos(2)}));
  c.append(gates::ch(neg(3), 2));
  c.append(gates::qft({0, 1, 2}));
  const auto psi = random_state(4, 1);
  const auto both = compose(c, inverse(c));
  Statevector out = psi;
  for (const auto& g : both.gates()) apply_gate(out, g);
  CHECK(distance(out, psi) < 1e-12);
  CHECK(inverse(c).label_of(0) == "mix^-1");

  c.append(gates::measure(0, c.new_cbit()));
  CHECK(c.has_measurements());
  CHECK_THROWS_AS(inverse(c), std::invalid_argument);
}

TEST_CASE("compose renumbers classical bits") {
  Circuit a(2), b(2);
  a.append(gates::measure(0, a.new_cbit()));
  b.append(gates::measure(1, b.new_cbit()));
  b.append(gates::conditional(0, {gates::x(0)}));
  const auto c = compose(a, b);
  CHECK(c.num_cbits() == 2);
  CHECK(c.gates()[1].cbit == 1);
  CHECK(c.gates()[2].cbit == 1);
}

TEST_CASE("validate reports structural errors and counts") {
  Circuit ok(3);
  ok.begin_block("a");
  ok.append(gates::h(0));
  ok.append(gates::cx(0, 1));
  ok.append(gates::mcx({pos(0), pos(1)}, 2));
  ok.begin_block("b");
  ok.append(gates::cp(0, 2, 0.5));
  ok.append(gates::measure(2, ok.new_cbit()));
  const auto d = validate(ok);
  CHECK(d.ok);
  CHECK(d.total.gates == 5);
  CHECK(d.per_block.at("a").cx_estimate == 7);
  CHECK(d.per_block.at("b").cx_estimate == 2);
  CHECK(d.per_block.at("b").measurements == 1);

  Circuit bad(2);
  bad.append(gates::x(5));
  CHECK_FALSE(validate(bad).ok);

  Circuit overlap(2);
  overlap.append(gates::x(0, {pos(0)}));
  CHECK_FALSE(validate(overlap).ok);

  Circuit nonunitary(1);
  nonunitary.append(gates::unitary({0}, {1.0, 1.0, 0.0, 1.0}));
  CHECK_FALSE(validate(nonunitary).ok);

  Circuit guard(1);
  guard.append(gates::conditional(3, {gates::x(0)}));
  CHECK_FALSE(validate(guard).ok);
}

TEST_CASE("dump writes one gate per line with labels") {
  Circuit c(2);
  c.begin_block("prep");
  c.append(gates::h(0));
  c.append(gates::x(1, {neg(0)}));
  const auto text = dump(c);
  CHECK(text.find("# prep") != std::string::npos);
  CHECK(text.find("~0") != std::string::npos);
}

TEST_CASE("permutation_gates realise arbitrary permutations") {
  std::mt19937_64 rng(4);
  for (unsigned k : {2u, 3u, 4u}) {
    const std::size_t d = std::size_t{1} << k;
    for (int trial = 0; trial < 5; ++trial) {
      std::vector<std::size_t> perm(d);
      for (std::size_t i = 0; i < d; ++i) perm[i] = i;
      std::shuffle(perm.begin(), perm.end(), rng);
      std::vector<unsigned> q;
      for (unsigned j = 0; j < k; ++j) q.push_back(j + 1);
      const auto gs = permutation_gates(q, perm, {pos(0)});
      for (std::size_t i = 0; i < d; ++i) {
        const auto on = run_gates(gs, init_basis(k + 1, (i << 1) | 1));
        CHECK(std::abs(on[(perm[i] << 1) | 1]) == doctest::Approx(1.0));
        const auto off = run_gates(gs, init_basis(k + 1, i << 1));
        CHECK(std::abs(off[i << 1]) == doctest::Approx(1.0));
      }
    }
  }
  CHECK(permutation_gates({0, 1}, {0, 1, 2, 3}).empty());
}

TEST_CASE("complete_permutation fills free slots in increasing order") {
  const auto p = complete_permutation(4, {{0, 2}, {3, 0}});
  CHECK(p == std::vector<std::size_t>{2, 1, 3, 0});
  CHECK_THROWS(complete_permutation(4, {{0, 2}, {1, 2}}));
}

TEST_CASE("pattern_controls select a local value") {
  const auto c = pattern_controls({4, 5, 6}, 0b101);
  REQUIRE(c.size() == 3);
  CHECK(c[0] == pos(4));
  CHECK(c[1] == neg(5));
  CHECK(c[2] == pos(6));
}

TEST_CASE("adjoint of single gates") {
  const auto psi = random_state(2, 9);
  for (const auto& g : {gates::h(0), gates::p(1, 0.7, {pos(0)}), gates::ry(0, -0.4, {neg(1)}),
                        gates::unitary({0, 1}, {1, 0, 0, 0, 0, 0, 1, 0, 0, cplx(0, 1), 0, 0, 0, 0, 0, 1})}) {
    CHECK(distance(run_gates({g, adjoint(g)}, psi), psi) < 1e-12);
  }
}
