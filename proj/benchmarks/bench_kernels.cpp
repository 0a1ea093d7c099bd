#include <benchmark/benchmark.h>

#include "qlbm/classical_lbm.hpp"
#include "qlbm/qlbm.hpp"
#include "qlbm/simulator.hpp"

using namespace qlbm;

namespace {

Statevector random_state(unsigned n) {
  Rng rng(1);
  std::vector<cplx> v(std::size_t{1} << n);
  for (auto& a : v) a = {rng.normal(), rng.normal()};
  return init_amplitudes(std::move(v)).state;
}

FieldState pulse_fields(std::size_t n, std::size_t levels) {
  FieldState f(n, n, 3, levels);
  for (std::size_t l = 0; l < levels; ++l)
    for (std::size_t y = 0; y < n; ++y)
      for (std::size_t x = 0; x < n; ++x) {
        const double dx = static_cast<double>(x) - 0.5 * n, dy = static_cast<double>(y) - 0.5 * n;
        f.at(l, 0, x, y) = 0.05 * std::exp(-(dx * dx + dy * dy) / 8.0);
      }
  return f;
}

void BM_ControlledRy(benchmark::State& state) {
  const auto n = static_cast<unsigned>(state.range(0));
  auto psi = random_state(n);
  const auto g = gates::ry(0, 0.3, {pos(n - 1), neg(n / 2)});
  for (auto _ : state) {
    apply_gate(psi, g);
    benchmark::DoNotOptimize(psi[0]);
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(psi.size()));
}
BENCHMARK(BM_ControlledRy)->Arg(14)->Arg(18)->Arg(21);

void BM_NativeQft(benchmark::State& state) {
  const auto n = static_cast<unsigned>(state.range(0));
  auto psi = random_state(n);
  std::vector<unsigned> t;
  for (unsigned q = 0; q < n / 2; ++q) t.push_back(q);
  const auto g = gates::qft(t);
  for (auto _ : state) {
    apply_gate(psi, g);
    benchmark::DoNotOptimize(psi[0]);
  }
}
BENCHMARK(BM_NativeQft)->Arg(14)->Arg(18);

void BM_QuantumStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PhysicsModel model{LinearAcoustics{}, 0.55};
  const auto plan = build_step(model, standard_config(LatticeName::D2Q17), {}, {}, n, n);
  const auto f = pulse_fields(n, 2);
  for (auto _ : state) benchmark::DoNotOptimize(quantum_step(f, plan, model, CollisionMode::Linear));
}
BENCHMARK(BM_QuantumStep)->Arg(16)->Arg(32)->Arg(64)->Unit(benchmark::kMillisecond);

void BM_ClassicalStep(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const PhysicsModel model{LinearAcoustics{}, 0.55};
  const auto cfg = standard_config(LatticeName::D2Q17);
  SolverState st{pulse_fields(n, 2), 0, 1.0, 1.0};
  for (auto _ : state) {
    st = lbm_step(st, model, cfg, {}, {});
    benchmark::DoNotOptimize(st.fields.at(0, 0, 0, 0));
  }
}
BENCHMARK(BM_ClassicalStep)->Arg(32)->Arg(128);

void BM_Sampling(benchmark::State& state) {
  const auto psi = random_state(16);
  for (auto _ : state) benchmark::DoNotOptimize(sample(psi, static_cast<std::uint64_t>(state.range(0)), 3));
}
BENCHMARK(BM_Sampling)->Arg(1 << 14)->Arg(1 << 17)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
