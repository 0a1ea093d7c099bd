#include "qlbm/circuit.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <sstream>
#include <stdexcept>

namespace qlbm {

void RegisterLayout::validate() const {
  if (nx_qubits == 0 || ny_qubits == 0) throw std::invalid_argument("lattice subregisters must be non-empty");
  if (total() > kMaxQubits)
    throw std::invalid_argument("register of " + std::to_string(total()) + " qubits exceeds the " +
                                std::to_string(kMaxQubits) + "-qubit guard");
}

std::string Gate::name() const {
  const bool c = !controls.empty();
  switch (kind) {
    case GateKind::H: return c ? "CH" : "H";
    case GateKind::X: return controls.size() > 1 ? "MCX" : c ? "CX" : "X";
    case GateKind::P: return c ? "CP" : "P";
    case GateKind::RY: return c ? "CRY" : "RY";
    case GateKind::SmallUnitary: return c ? "CU" : "U";
    case GateKind::QFT: return "QFT";
    case GateKind::IQFT: return "IQFT";
    case GateKind::Measure: return "MEASURE";
    case GateKind::Conditional: return "IF";
  }
  return "?";
}

namespace gates {

namespace {
Gate single(GateKind k, unsigned t, double theta, std::vector<Control> controls) {
  Gate g;
  g.kind = k;
  g.targets = {t};
  g.theta = theta;
  g.controls = std::move(controls);
  return g;
}
}  // namespace

Gate h(unsigned t, std::vector<Control> controls) { return single(GateKind::H, t, 0.0, std::move(controls)); }
Gate x(unsigned t, std::vector<Control> controls) { return single(GateKind::X, t, 0.0, std::move(controls)); }
Gate p(unsigned t, double theta, std::vector<Control> controls) {
  return single(GateKind::P, t, theta, std::move(controls));
}
Gate ry(unsigned t, double theta, std::vector<Control> controls) {
  return single(GateKind::RY, t, theta, std::move(controls));
}
Gate cx(unsigned c, unsigned t) { return x(t, {pos(c)}); }
Gate cp(unsigned c, unsigned t, double theta) { return p(t, theta, {pos(c)}); }
Gate ch(Control c, unsigned t) { return h(t, {c}); }
Gate mcx(std::vector<Control> controls, unsigned t) { return x(t, std::move(controls)); }
Gate cry(std::vector<Control> controls, unsigned t, double theta) { return ry(t, theta, std::move(controls)); }

Gate unitary(std::vector<unsigned> targets, std::vector<cplx> matrix, std::vector<Control> controls) {
  Gate g;
  g.kind = GateKind::SmallUnitary;
  g.targets = std::move(targets);
  g.matrix = std::move(matrix);
  g.controls = std::move(controls);
  return g;
}

Gate qft(std::vector<unsigned> targets) {
  Gate g;
  g.kind = GateKind::QFT;
  g.targets = std::move(targets);
  return g;
}

Gate iqft(std::vector<unsigned> targets) {
  Gate g;
  g.kind = GateKind::IQFT;
  g.targets = std::move(targets);
  return g;
}

Gate measure(unsigned t, unsigned cbit) {
  Gate g;
  g.kind = GateKind::Measure;
  g.targets = {t};
  g.cbit = cbit;
  return g;
}

Gate conditional(unsigned cbit, std::vector<Gate> body) {
  Gate g;
  g.kind = GateKind::Conditional;
  g.cbit = cbit;
  g.body = std::move(body);
  return g;
}

}  // namespace gates

Gate adjoint(const Gate& g) {
  Gate out = g;
  switch (g.kind) {
    case GateKind::H:
    case GateKind::X: break;
    case GateKind::P:
    case GateKind::RY: out.theta = -g.theta; break;
    case GateKind::SmallUnitary: {
      const std::size_t d = std::size_t{1} << g.targets.size();
      for (std::size_t r = 0; r < d; ++r)
        for (std::size_t c = 0; c < d; ++c) out.matrix[r * d + c] = std::conj(g.matrix[c * d + r]);
      break;
    }
    case GateKind::QFT: out.kind = GateKind::IQFT; break;
    case GateKind::IQFT: out.kind = GateKind::QFT; break;
    case GateKind::Measure:
    case GateKind::Conditional: throw std::invalid_argument("cannot invert a measuring gate");
  }
  return out;
}

void Circuit::begin_block(const std::string& label) {
  if (!blocks_.empty() && blocks_.back().end == blocks_.back().begin) {
    blocks_.back().label = label;
    return;
  }
  blocks_.push_back({label, gates_.size(), gates_.size()});
}

void Circuit::append(Gate g) {
  if (g.kind == GateKind::Measure || g.kind == GateKind::Conditional) num_cbits_ = std::max(num_cbits_, g.cbit + 1);
  gates_.push_back(std::move(g));
  if (!blocks_.empty()) blocks_.back().end = gates_.size();
}

void Circuit::append(const std::vector<Gate>& gs) {
  for (const auto& g : gs) append(g);
}

std::string Circuit::label_of(std::size_t i) const {
  for (const auto& b : blocks_)
    if (i >= b.begin && i < b.end) return b.label;
  return "";
}

bool Circuit::has_measurements() const {
  for (const auto& g : gates_)
    if (g.kind == GateKind::Measure || g.kind == GateKind::Conditional) return true;
  return false;
}

Circuit append(Circuit c, Gate g) {
  c.append(std::move(g));
  return c;
}

namespace {
void shift_cbits(Gate& g, unsigned offset) {
  if (g.kind == GateKind::Measure || g.kind == GateKind::Conditional) g.cbit += offset;
  for (auto& b : g.body) shift_cbits(b, offset);
}
}  // namespace

Circuit compose(const Circuit& a, const Circuit& b) {
  if (a.num_qubits() != b.num_qubits()) throw std::invalid_argument("compose: register size mismatch");
  Circuit out = a;
  const unsigned offset = a.num_cbits();
  for (std::size_t i = 0; i < b.size(); ++i) {
    const std::string label = b.label_of(i);
    if (!label.empty() && (i == 0 || b.label_of(i - 1) != label)) out.begin_block(label);
    Gate g = b.gates()[i];
    shift_cbits(g, offset);
    out.append(std::move(g));
  }
  return out;
}

Circuit inverse(const Circuit& c) {
  if (c.has_measurements()) throw std::invalid_argument("inverse: circuit contains measurements");
  Circuit out(c.num_qubits());
  for (std::size_t i = c.size(); i-- > 0;) {
    const std::string label = c.label_of(i);
    if (!label.empty() && (i + 1 == c.size() || c.label_of(i + 1) != label)) out.begin_block(label + "^-1");
    out.append(adjoint(c.gates()[i]));
  }
  return out;
}

std::vector<Gate> qft_block(const std::vector<unsigned>& targets) {
  std::vector<Gate> out;
  const std::size_t k = targets.size();
  for (std::size_t j = k; j-- > 0;) {
    out.push_back(gates::h(targets[j]));
    for (std::size_t m = j; m-- > 0;)
      out.push_back(gates::cp(targets[m], targets[j], std::numbers::pi / static_cast<double>(1ull << (j - m))));
  }
  return out;
}

std::vector<Gate> iqft_block(const std::vector<unsigned>& targets) {
  auto fwd = qft_block(targets);
  std::vector<Gate> out;
  for (auto it = fwd.rbegin(); it != fwd.rend(); ++it) out.push_back(adjoint(*it));
  return out;
}

std::vector<Gate> expand(const std::vector<Gate>& gs) {
  std::vector<Gate> out;
  for (const auto& g : gs) {
    if (g.kind == GateKind::QFT) {
      auto b = qft_block(g.targets);
      out.insert(out.end(), b.begin(), b.end());
    } else if (g.kind == GateKind::IQFT) {
      auto b = iqft_block(g.targets);
      out.insert(out.end(), b.begin(), b.end());
    } else if (g.kind == GateKind::Conditional) {
      Gate c = g;
      c.body = expand(g.body);
      out.push_back(std::move(c));
    } else {
      out.push_back(g);
    }
  }
  return out;
}

namespace {

std::size_t mcx_cost(std::size_t k) {
  if (k == 0) return 0;
  if (k == 1) return 1;
  if (k == 2) return 6;
  return 12 * (k - 1) - 6;
}

void count_gate(const Gate& g, BlockCounts& bc) {
  if (g.kind == GateKind::Conditional) {
    for (const auto& b : g.body) count_gate(b, bc);
    return;
  }
  if (g.kind == GateKind::QFT || g.kind == GateKind::IQFT) {
    for (const auto& b : qft_block(g.targets)) count_gate(b, bc);
    return;
  }
  ++bc.gates;
  if (g.kind == GateKind::Measure) {
    ++bc.measurements;
    return;
  }
  const std::size_t n = g.num_qubits();
  if (n == 1) ++bc.single_qubit;
  else if (n == 2) ++bc.two_qubit;
  else ++bc.multi_qubit;
  const std::size_t k = g.controls.size();
  switch (g.kind) {
    case GateKind::X: bc.cx_estimate += mcx_cost(k); break;
    case GateKind::H:
    case GateKind::P:
    case GateKind::RY: bc.cx_estimate += k == 0 ? 0 : k == 1 ? 2 : 2 * mcx_cost(k) + 2; break;
    case GateKind::SmallUnitary: {
      const std::size_t t = g.targets.size();
      const std::size_t base = t <= 1 ? (k > 0 ? 2 : 0) : ((std::size_t{1} << (2 * t)) - 3 * t - 1 + 3) / 4;
      bc.cx_estimate += base * (k == 0 ? 1 : (std::size_t{1} << k));
      break;
    }
    default: break;
  }
}

void add(BlockCounts& a, const BlockCounts& b) {
  a.gates += b.gates;
  a.single_qubit += b.single_qubit;
  a.two_qubit += b.two_qubit;
  a.multi_qubit += b.multi_qubit;
  a.measurements += b.measurements;
  a.cx_estimate += b.cx_estimate;
}

void check_gate(const Gate& g, unsigned n, std::set<unsigned>& measured, std::size_t index, Diagnostics& d) {
  auto fail = [&](const std::string& msg) {
    d.ok = false;
    d.messages.push_back("gate " + std::to_string(index) + " (" + g.name() + "): " + msg);
  };
  std::set<unsigned> seen;
  for (unsigned t : g.targets) {
    if (t >= n) fail("target " + std::to_string(t) + " out of range");
    if (!seen.insert(t).second) fail("repeated target " + std::to_string(t));
  }
  for (const auto& c : g.controls) {
    if (c.qubit >= n) fail("control " + std::to_string(c.qubit) + " out of range");
    if (!seen.insert(c.qubit).second) fail("control " + std::to_string(c.qubit) + " overlaps another operand");
  }
  if (g.kind != GateKind::Conditional && g.targets.empty()) fail("no target");
  if (g.kind == GateKind::SmallUnitary) {
    if (g.targets.size() > 5) fail("SmallUnitary acts on more than 5 targets");
    const std::size_t dim = std::size_t{1} << g.targets.size();
    if (g.matrix.size() != dim * dim) {
      fail("matrix has wrong size");
    } else {
      double err = 0.0;
      for (std::size_t r = 0; r < dim; ++r)
        for (std::size_t c = 0; c < dim; ++c) {
          cplx s = 0.0;
          for (std::size_t k = 0; k < dim; ++k) s += std::conj(g.matrix[k * dim + r]) * g.matrix[k * dim + c];
          err = std::max(err, std::abs(s - (r == c ? 1.0 : 0.0)));
        }
      if (err > 1e-12) fail("matrix is not unitary (deviation " + std::to_string(err) + ")");
    }
  }
  if ((g.kind == GateKind::QFT || g.kind == GateKind::IQFT || g.kind == GateKind::Measure) && !g.controls.empty())
    fail("gate does not accept controls");
  if (g.kind == GateKind::Conditional && !measured.count(g.cbit)) fail("guard bit not produced by an earlier measurement");
  if (g.kind == GateKind::Measure) measured.insert(g.cbit);
  for (std::size_t i = 0; i < g.body.size(); ++i) check_gate(g.body[i], n, measured, index, d);
}

}  // namespace

Diagnostics validate(const Circuit& c) {
  Diagnostics d;
  std::set<unsigned> measured;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const auto& g = c.gates()[i];
    check_gate(g, c.num_qubits(), measured, i, d);
    std::string label = c.label_of(i);
    if (label.empty()) label = "(unlabelled)";
    BlockCounts bc;
    count_gate(g, bc);
    add(d.per_block[label], bc);
    add(d.total, bc);
  }
  return d;
}

namespace {
void dump_gate(std::ostringstream& os, const Gate& g, int indent) {
  os << std::string(static_cast<std::size_t>(indent), ' ') << g.name();
  if (g.kind == GateKind::Conditional) {
    os << " c" << g.cbit << "==0 {\n";
    for (const auto& b : g.body) dump_gate(os, b, indent + 2);
    os << std::string(static_cast<std::size_t>(indent), ' ') << "}\n";
    return;
  }
  for (std::size_t i = 0; i < g.targets.size(); ++i) os << (i == 0 ? " " : ",") << g.targets[i];
  if (!g.controls.empty()) {
    os << " [";
    for (std::size_t i = 0; i < g.controls.size(); ++i)
      os << (i ? "," : "") << (g.controls[i].on_one ? "" : "~") << g.controls[i].qubit;
    os << "]";
  }
  if (g.kind == GateKind::P || g.kind == GateKind::RY) {
    std::ostringstream t;
    t.precision(12);
    t << g.theta;
    os << " " << t.str();
  }
  if (g.kind == GateKind::Measure) os << " -> c" << g.cbit;
  os << "\n";
}
}  // namespace

std::string dump(const Circuit& c) {
  std::ostringstream os;
  std::string current;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const std::string label = c.label_of(i);
    if (label != current) {
      os << "# " << label << "\n";
      current = label;
    }
    dump_gate(os, c.gates()[i], 0);
  }
  return os.str();
}

std::vector<Control> pattern_controls(const std::vector<unsigned>& qubits, std::size_t value) {
  std::vector<Control> out;
  for (std::size_t j = 0; j < qubits.size(); ++j) out.push_back({qubits[j], ((value >> j) & 1u) != 0});
  return out;
}

std::vector<std::size_t> complete_permutation(std::size_t n, const std::map<std::size_t, std::size_t>& partial) {
  std::vector<std::size_t> perm(n, n);
  std::vector<bool> used(n, false);
  for (const auto& [from, to] : partial) {
    if (from >= n || to >= n || used[to]) throw std::invalid_argument("complete_permutation: map is not injective");
    perm[from] = to;
    used[to] = true;
  }
  std::size_t next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (perm[i] != n) continue;
    while (used[next]) ++next;
    perm[i] = next;
    used[next] = true;
  }
  return perm;
}

std::vector<Gate> permutation_gates(const std::vector<unsigned>& qubits, const std::vector<std::size_t>& perm,
                                    const std::vector<Control>& extra_controls) {
  const std::size_t n = std::size_t{1} << qubits.size();
  if (perm.size() != n) throw std::invalid_argument("permutation_gates: size mismatch");
  std::vector<Gate> out;
  // Adjacent transposition of two states differing in a single bit.
  auto flip = [&](std::size_t state, std::size_t bit) {
    std::vector<Control> ctl = extra_controls;
    for (std::size_t j = 0; j < qubits.size(); ++j)
      if (j != bit) ctl.push_back({qubits[j], ((state >> j) & 1u) != 0});
    out.push_back(gates::mcx(std::move(ctl), qubits[bit]));
  };
  // Transposition (a b) along a Gray-code path: forward chain then its mirror.
  auto transpose = [&](std::size_t a, std::size_t b) {
    std::vector<std::size_t> bits;
    for (std::size_t j = 0; j < qubits.size(); ++j)
      if (((a ^ b) >> j) & 1u) bits.push_back(j);
    std::vector<std::size_t> path{a};
    for (std::size_t j : bits) path.push_back(path.back() ^ (std::size_t{1} << j));
    for (std::size_t i = 0; i < bits.size(); ++i) flip(path[i], bits[i]);
    for (std::size_t i = bits.size() - 1; i-- > 0;) flip(path[i], bits[i]);
  };
  std::vector<bool> done(n, false);
  for (std::size_t start = 0; start < n; ++start) {
    if (done[start]) continue;
    std::vector<std::size_t> cycle;
    for (std::size_t i = start; !done[i]; i = perm[i]) {
      done[i] = true;
      cycle.push_back(i);
    }
    for (std::size_t k = cycle.size() - 1; k-- > 0;) transpose(cycle[k], cycle[k + 1]);
  }
  return out;
}

}  // namespace qlbm
