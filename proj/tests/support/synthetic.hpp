#pragma once

#include <cmath>
#include <map>
#include <vector>

#include "qlbm/readout.hpp"
#include "qlbm/simulator.hpp"

namespace qlbm::testing {

/// Statevector with amplitudes f_a(i) / sqrt(W(a)) over the basis grid.
inline Statevector basis_state(const Eigen::VectorXd& a, const TomographyBasis& basis) {
  std::vector<cplx> v(basis.points());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = basis.eval(a, i);
  return init_amplitudes(std::move(v)).state;
}

inline std::map<std::uint64_t, double> to_map(const ShotCounts& sc) {
  std::map<std::uint64_t, double> m;
  for (const auto& [i, c] : sc.counts) m[i] = static_cast<double>(c);
  return m;
}

/// Z counts from `z_shots` plus X-basis counts on every lattice qubit from `x_shots` each.
inline TomographyProblem sampled_problem(const Eigen::VectorXd& a, const TomographyBasis& basis,
                                         std::uint64_t z_shots, std::uint64_t x_shots, std::uint64_t seed) {
  const auto psi = basis_state(a, basis);
  TomographyProblem p;
  p.num_qubits = psi.num_qubits();
  p.z = to_map(sample(psi, z_shots, derive_seed(seed, 0)));
  p.x.resize(p.num_qubits);
  if (x_shots == 0) return p;
  for (unsigned k = 0; k < p.num_qubits; ++k) {
    auto rotated = psi;
    apply_gate(rotated, gates::h(k));
    p.x[k] = to_map(sample(rotated, x_shots, derive_seed(seed, k + 1)));
  }
  return p;
}

/// Max-abs coefficient error after aligning the global sign.
inline double coefficient_error(const Eigen::VectorXd& fit, const Eigen::VectorXd& truth) {
  return std::min((fit - truth).cwiseAbs().maxCoeff(), (fit + truth).cwiseAbs().maxCoeff());
}

}  // namespace qlbm::testing
