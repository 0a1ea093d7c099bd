#pragma once

#include <complex>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace qlbm {

using cplx = std::complex<double>;

/// Qubit order is [q1, q2, s, s_d?, a_c, a_s, a_b?]; qubit 0 of every subregister is its least significant bit.
struct RegisterLayout {
  unsigned nx_qubits = 0;
  unsigned ny_qubits = 0;
  bool two_levels = false;
  bool boundary_ancilla = false;

  static constexpr unsigned kSubstateQubits = 4;
  static constexpr unsigned kMaxQubits = 30;

  unsigned q1(unsigned j) const { return j; }
  unsigned q2(unsigned j) const { return nx_qubits + j; }
  unsigned lattice_qubits() const { return nx_qubits + ny_qubits; }
  unsigned s(unsigned j) const { return lattice_qubits() + j; }
  unsigned s_d() const { return lattice_qubits() + kSubstateQubits; }
  unsigned a_c() const { return lattice_qubits() + kSubstateQubits + (two_levels ? 1 : 0); }
  unsigned a_s() const { return a_c() + 1; }
  unsigned a_b() const { return a_c() + 2; }
  unsigned first_ancilla() const { return a_c(); }
  unsigned total() const { return a_c() + 2 + (boundary_ancilla ? 1 : 0); }

  /// Throws std::invalid_argument when the register exceeds the desk-scale guard.
  void validate() const;
  friend bool operator==(const RegisterLayout&, const RegisterLayout&) = default;
};

struct Control {
  unsigned qubit = 0;
  bool on_one = true;
  friend bool operator==(const Control&, const Control&) = default;
};

inline Control pos(unsigned q) { return {q, true}; }
inline Control neg(unsigned q) { return {q, false}; }

enum class GateKind { H, X, P, RY, SmallUnitary, QFT, IQFT, Measure, Conditional };

/// One IR instruction. H, X, P and RY take any number of polarity controls (CH, CX/MCX, CP, CRY).
struct Gate {
  GateKind kind = GateKind::H;
  std::vector<unsigned> targets;
  std::vector<Control> controls;
  double theta = 0.0;
  /// Row-major 2^t x 2^t matrix for SmallUnitary; targets[0] is the least significant matrix index bit.
  std::vector<cplx> matrix;
  unsigned cbit = 0;
  std::vector<Gate> body;

  std::string name() const;
  std::size_t num_qubits() const { return targets.size() + controls.size(); }
};

namespace gates {
Gate h(unsigned t, std::vector<Control> controls = {});
Gate x(unsigned t, std::vector<Control> controls = {});
Gate p(unsigned t, double theta, std::vector<Control> controls = {});
Gate ry(unsigned t, double theta, std::vector<Control> controls = {});
Gate cx(unsigned c, unsigned t);
Gate cp(unsigned c, unsigned t, double theta);
Gate ch(Control c, unsigned t);
Gate mcx(std::vector<Control> controls, unsigned t);
Gate cry(std::vector<Control> controls, unsigned t, double theta);
Gate unitary(std::vector<unsigned> targets, std::vector<cplx> matrix, std::vector<Control> controls = {});
Gate qft(std::vector<unsigned> targets);
Gate iqft(std::vector<unsigned> targets);
Gate measure(unsigned t, unsigned cbit);
Gate conditional(unsigned cbit, std::vector<Gate> body);
}  // namespace gates

Gate adjoint(const Gate& g);

struct BlockRange {
  std::string label;
  std::size_t begin = 0;
  std::size_t end = 0;
};

class Circuit {
 public:
  Circuit() = default;
  explicit Circuit(unsigned num_qubits) : num_qubits_(num_qubits) {}

  unsigned num_qubits() const { return num_qubits_; }
  unsigned num_cbits() const { return num_cbits_; }
  const std::vector<Gate>& gates() const { return gates_; }
  const std::vector<BlockRange>& blocks() const { return blocks_; }
  std::size_t size() const { return gates_.size(); }
  bool empty() const { return gates_.empty(); }

  /// Starts a labelled block; gates appended afterwards belong to it.
  void begin_block(const std::string& label);
  void append(Gate g);
  void append(const std::vector<Gate>& gs);
  unsigned new_cbit() { return num_cbits_++; }
  /// Label of the block containing gate index i ("" when unlabelled).
  std::string label_of(std::size_t i) const;
  bool has_measurements() const;

 private:
  unsigned num_qubits_ = 0;
  unsigned num_cbits_ = 0;
  std::vector<Gate> gates_;
  std::vector<BlockRange> blocks_;
};

Circuit append(Circuit c, Gate g);
/// Concatenates two circuits over the same register; classical bits of the second are renumbered.
Circuit compose(const Circuit& a, const Circuit& b);
/// Reverses and adjoints every gate; throws std::invalid_argument on Measure or Conditional.
Circuit inverse(const Circuit& c);

/// Textbook QFT network without swaps over targets (targets[0] least significant):
/// |x> -> 2^{-k/2} sum_y exp(2 pi i x y / 2^k) |rev(y)>, so Fourier bit b lands on targets[k-1-b].
std::vector<Gate> qft_block(const std::vector<unsigned>& targets);
std::vector<Gate> iqft_block(const std::vector<unsigned>& targets);
/// Replaces QFT/IQFT gates by their H/CP networks (recursively inside Conditional bodies).
std::vector<Gate> expand(const std::vector<Gate>& gs);

struct BlockCounts {
  std::size_t gates = 0;
  std::size_t single_qubit = 0;
  std::size_t two_qubit = 0;
  std::size_t multi_qubit = 0;
  std::size_t measurements = 0;
  /// CX count in an all-to-all decomposition: CX 1, CP/CH/CRY 2, Toffoli 6, C^kX 12(k-1)-6 for k > 2.
  std::size_t cx_estimate = 0;
};

struct Diagnostics {
  bool ok = true;
  std::vector<std::string> messages;
  std::map<std::string, BlockCounts> per_block;
  BlockCounts total;
};

Diagnostics validate(const Circuit& c);

/// One gate per line: NAME targets [controls] [theta]. Negative controls are written with a leading '~'.
std::string dump(const Circuit& c);

/// Multi-controlled-X network realising a basis-state permutation on `qubits`
/// (perm[i] = image of local index i; qubits[0] is the least significant local bit).
/// Extra controls are added to every gate.
std::vector<Gate> permutation_gates(const std::vector<unsigned>& qubits, const std::vector<std::size_t>& perm,
                                    const std::vector<Control>& extra_controls = {});

/// Completes a partial injective map on {0..n-1} to a permutation, filling free slots in increasing order.
std::vector<std::size_t> complete_permutation(std::size_t n, const std::map<std::size_t, std::size_t>& partial);

/// Controls selecting local index `value` on `qubits`.
std::vector<Control> pattern_controls(const std::vector<unsigned>& qubits, std::size_t value);

}  // namespace qlbm
