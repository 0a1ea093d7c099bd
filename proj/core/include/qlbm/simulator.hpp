#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "qlbm/circuit.hpp"

namespace qlbm {

/// Seeded generator shared by every sampling routine. Uniforms use the top 53 bits of one draw.
class Rng {
 public:
  static constexpr const char* kAlgorithm = "mt19937_64";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  std::uint64_t next() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Standard normal via Box-Muller (two uniforms per call).
  double normal();

 private:
  std::mt19937_64 engine_;
};

/// Derives an independent child seed (splitmix64 of master ^ index).
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index);

class Statevector {
 public:
  Statevector() = default;
  explicit Statevector(unsigned num_qubits);

  unsigned num_qubits() const { return n_; }
  std::size_t size() const { return amps_.size(); }
  std::vector<cplx>& amplitudes() { return amps_; }
  const std::vector<cplx>& amplitudes() const { return amps_; }
  cplx& operator[](std::size_t i) { return amps_[i]; }
  const cplx& operator[](std::size_t i) const { return amps_[i]; }
  double norm() const;

 private:
  unsigned n_ = 0;
  std::vector<cplx> amps_;
};

Statevector init_basis(unsigned num_qubits, std::size_t index);

struct Initialized {
  Statevector state;
  double norm = 0.0;
};

/// Normalizes `values` (size 2^n); throws std::invalid_argument on the zero vector.
Initialized init_amplitudes(std::vector<cplx> values);

enum class RunMode { PostSelectZero, Sample };

struct RunOptions {
  RunMode mode = RunMode::PostSelectZero;
  std::uint64_t seed = 0;
};

struct BranchRecord {
  std::size_t gate_index = 0;
  unsigned qubit = 0;
  unsigned cbit = 0;
  int outcome = 0;
  double probability = 1.0;
  std::string block;
};

struct RunOutcome {
  Statevector state;
  double p_keep = 1.0;
  std::vector<int> cbits;
  std::vector<BranchRecord> branches;
};

class PostSelectionError : public std::runtime_error {
 public:
  PostSelectionError(std::size_t gate_index, const std::string& what)
      : std::runtime_error(what), gate_index_(gate_index) {}
  std::size_t gate_index() const { return gate_index_; }

 private:
  std::size_t gate_index_;
};

/// Applies one unitary gate in place. Measure and Conditional are rejected.
void apply_gate(Statevector& psi, const Gate& g);

RunOutcome run(const Circuit& circuit, Statevector psi, const RunOptions& options = {});

/// Amplitude updates performed by the kernel since the last reset (each touched amplitude counts once).
std::uint64_t kernel_op_count();
void reset_kernel_op_count();

struct ShotCounts {
  unsigned num_qubits = 0;
  std::map<std::uint64_t, std::uint64_t> counts;
  std::uint64_t shots = 0;
  std::uint64_t seed = 0;

  std::uint64_t count(std::uint64_t index) const;
};

/// Bitstring with the highest qubit first.
std::string bitstring(std::uint64_t index, unsigned num_qubits);

/// Inverse-CDF sampler over a fixed probability table.
class DiscreteSampler {
 public:
  explicit DiscreteSampler(std::span<const double> weights);
  std::uint64_t draw(Rng& rng) const;
  double total() const { return cdf_.empty() ? 0.0 : cdf_.back(); }

 private:
  std::vector<double> cdf_;
};

std::vector<double> probabilities(const Statevector& psi);

/// Born-rule sampling; throws std::invalid_argument when shots == 0.
ShotCounts sample(const Statevector& psi, std::uint64_t shots, std::uint64_t seed);

/// Probability that `qubits` read `pattern` (pattern bit j belongs to qubits[j]).
double marginal_probability(const Statevector& psi, const std::vector<unsigned>& qubits, std::uint64_t pattern);

struct Projected {
  Statevector state;
  double probability = 0.0;
};

/// Projects onto `qubits` == `pattern` and renormalizes; throws PostSelectionError on a zero-probability branch.
Projected postselect(const Statevector& psi, const std::vector<unsigned>& qubits, std::uint64_t pattern);

double expect_diagonal(const Statevector& psi, const std::function<double(std::uint64_t)>& weight);

}  // namespace qlbm
