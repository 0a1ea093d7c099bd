#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <numbers>
#include <set>

#include "qlbm/simulator.hpp"

using namespace qlbm;

namespace {

Statevector random_state(unsigned n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<cplx> v(std::size_t{1} << n);
  for (auto& a : v) a = {rng.normal(), rng.normal()};
  return init_amplitudes(std::move(v)).state;
}

Gate random_gate(Rng& rng, unsigned n) {
  const unsigned t = static_cast<unsigned>(rng.next() % n);
  std::vector<Control> ctl;
  for (unsigned q = 0; q < n; ++q)
    if (q != t && rng.uniform() < 0.3) ctl.push_back({q, rng.uniform() < 0.5});
  const double th = 2.0 * std::numbers::pi * rng.uniform();
  switch (rng.next() % 6) {
    case 0: return gates::h(t, ctl);
    case 1: return gates::x(t, ctl);
    case 2: return gates::p(t, th, ctl);
    case 3: return gates::ry(t, th, ctl);
    case 4: {
      const unsigned u = (t + 1) % n;
      const double c = std::cos(th), s = std::sin(th);
      return gates::unitary({t, u}, {c, -s, 0, 0, s, c, 0, 0, 0, 0, cplx(0, c), cplx(0, s), 0, 0, cplx(0, -s),
                                     cplx(0, c)});
    }
    default: {
      std::vector<unsigned> q;
      for (unsigned j = 0; j < n; ++j)
        if (rng.uniform() < 0.5) q.push_back(j);
      if (q.empty()) q.push_back(t);
      return rng.uniform() < 0.5 ? gates::qft(q) : gates::iqft(q);
    }
  }
}

}  // namespace

TEST_CASE("single-qubit gates") {
  auto psi = init_basis(1, 0);
  apply_gate(psi, gates::h(0));
  CHECK(psi[0].real() == doctest::Approx(std::sqrt(0.5)));
  CHECK(psi[1].real() == doctest::Approx(std::sqrt(0.5)));
  apply_gate(psi, gates::p(0, std::numbers::pi / 2));
  CHECK(psi[1].imag() == doctest::Approx(std::sqrt(0.5)));

  auto r = init_basis(1, 0);
  apply_gate(r, gates::ry(0, std::numbers::pi / 3));
  CHECK(r[0].real() == doctest::Approx(std::cos(std::numbers::pi / 6)));
  CHECK(r[1].real() == doctest::Approx(std::sin(std::numbers::pi / 6)));
}

TEST_CASE("control polarity") {
  auto a = init_basis(2, 0b00);
  apply_gate(a, gates::x(1, {neg(0)}));
  CHECK(std::abs(a[0b10]) == doctest::Approx(1.0));
  auto b = init_basis(2, 0b01);
  apply_gate(b, gates::x(1, {neg(0)}));
  CHECK(std::abs(b[0b01]) == doctest::Approx(1.0));
  auto c = init_basis(3, 0b011);
  apply_gate(c, gates::mcx({pos(0), pos(1)}, 2));
  CHECK(std::abs(c[0b111]) == doctest::Approx(1.0));
}

TEST_CASE("measurement-free circuits preserve the norm") {
  Rng rng(21);
  for (int trial = 0; trial < 50; ++trial) {
    const unsigned n = 2 + static_cast<unsigned>(rng.next() % 6);
    Circuit c(n);
    for (int k = 0; k < 40; ++k) c.append(random_gate(rng, n));
    const auto out = run(c, random_state(n, rng.next()));
    CHECK(std::abs(out.state.norm() - 1.0) < 1e-12);
    CHECK(out.p_keep == 1.0);
  }
}

TEST_CASE("post-selection records branch probabilities") {
  Circuit c(2);
  c.begin_block("prep");
  c.append(gates::ry(0, 2.0 * std::acos(std::sqrt(0.3))));
  c.append(gates::measure(0, c.new_cbit()));
  const auto out = run(c, init_basis(2, 0));
  CHECK(out.p_keep == doctest::Approx(0.3));
  REQUIRE(out.branches.size() == 1);
  CHECK(out.branches[0].block == "prep");
  CHECK(out.branches[0].outcome == 0);
  CHECK(std::abs(out.state[0]) == doctest::Approx(1.0));

  Circuit z(1);
  z.append(gates::x(0));
  z.append(gates::measure(0, z.new_cbit()));
  CHECK_THROWS_AS(run(z, init_basis(1, 0)), PostSelectionError);
}

TEST_CASE("sampled runs are reproducible and conditionals fire on 0") {
  Circuit c(2);
  c.append(gates::h(0));
  c.append(gates::measure(0, c.new_cbit()));
  c.append(gates::conditional(0, {gates::x(1)}));
  std::set<int> seen;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto a = run(c, init_basis(2, 0), {RunMode::Sample, s});
    const auto b = run(c, init_basis(2, 0), {RunMode::Sample, s});
    CHECK(a.cbits == b.cbits);
    seen.insert(a.cbits[0]);
    const std::size_t expect = a.cbits[0] == 0 ? 0b10 : 0b01;
    CHECK(std::abs(a.state[expect]) == doctest::Approx(1.0));
  }
  CHECK(seen.size() == 2);
}

TEST_CASE("Born sampling") {
  const auto psi = random_state(4, 8);
  const auto probs = probabilities(psi);
  const std::uint64_t shots = 200000;
  const auto a = sample(psi, shots, 5);
  const auto b = sample(psi, shots, 5);
  CHECK(a.counts == b.counts);
  std::uint64_t total = 0;
  for (const auto& [i, c] : a.counts) {
    total += c;
    const double sd = std::sqrt(shots * probs[i] * (1.0 - probs[i]));
    CHECK(std::abs(static_cast<double>(c) - shots * probs[i]) < 5.0 * sd + 1.0);
  }
  CHECK(total == shots);
  CHECK_THROWS_AS(sample(psi, 0, 1), std::invalid_argument);
  CHECK(bitstring(0b0011, 4) == "0011");
}

TEST_CASE("state preparation helpers") {
  CHECK_THROWS_AS(init_amplitudes(std::vector<cplx>(8, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(init_amplitudes(std::vector<cplx>(6, 1.0)), std::invalid_argument);
  const auto init = init_amplitudes({3.0, 4.0});
  CHECK(init.norm == doctest::Approx(5.0));
  CHECK(init.state[1].real() == doctest::Approx(0.8));
  CHECK(derive_seed(1, 0) != derive_seed(1, 1));
  CHECK(derive_seed(1, 0) == derive_seed(1, 0));
  Rng rng(3);
  for (int k = 0; k < 1000; ++k) {
    const double u = rng.uniform();
    CHECK((u >= 0.0 && u < 1.0));
  }
  CHECK(std::string(Rng::kAlgorithm) == "mt19937_64");
}

TEST_CASE("marginals, projections and diagonal expectations") {
  const auto psi = random_state(3, 2);
  const auto probs = probabilities(psi);
  double p = 0.0, e = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    if ((i & 0b101) == 0b001) p += probs[i];
    e += static_cast<double>(i) * probs[i];
  }
  CHECK(marginal_probability(psi, {0, 2}, 0b01) == doctest::Approx(p));
  const auto proj = postselect(psi, {0, 2}, 0b01);
  CHECK(proj.probability == doctest::Approx(p));
  CHECK(proj.state.norm() == doctest::Approx(1.0));
  CHECK(expect_diagonal(psi, [](std::uint64_t i) { return static_cast<double>(i); }) == doctest::Approx(e));
  CHECK_THROWS_AS(postselect(init_basis(2, 0), {0}, 1), PostSelectionError);
}

TEST_CASE("kernel op counter") {
  reset_kernel_op_count();
  auto psi = init_basis(3, 0);
  apply_gate(psi, gates::h(0));
  CHECK(kernel_op_count() > 0);
  reset_kernel_op_count();
  CHECK(kernel_op_count() == 0);
}
