#include "qlbm/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <unsupported/Eigen/FFT>

namespace qlbm {

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  std::uint64_t z = master ^ (index * 0x9e3779b97f4a7c15ULL) ^ 0xd1b54a32d192ed03ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

Statevector::Statevector(unsigned num_qubits) : n_(num_qubits), amps_(std::size_t{1} << num_qubits) {
  if (num_qubits > RegisterLayout::kMaxQubits) throw std::invalid_argument("statevector exceeds the qubit guard");
}

double Statevector::norm() const {
  double s = 0.0;
  for (const auto& a : amps_) s += std::norm(a);
  return std::sqrt(s);
}

Statevector init_basis(unsigned num_qubits, std::size_t index) {
  Statevector psi(num_qubits);
  if (index >= psi.size()) throw std::invalid_argument("init_basis: index out of range");
  psi[index] = 1.0;
  return psi;
}

Initialized init_amplitudes(std::vector<cplx> values) {
  const std::size_t n = values.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("init_amplitudes: size must be a power of two");
  unsigned q = 0;
  while ((std::size_t{1} << q) < n) ++q;
  double s = 0.0;
  for (const auto& v : values) s += std::norm(v);
  if (!(s > 0.0)) throw std::invalid_argument("init_amplitudes: zero vector");
  const double norm = std::sqrt(s);
  Initialized out{Statevector(q), norm};
  auto& a = out.state.amplitudes();
  for (std::size_t i = 0; i < n; ++i) a[i] = values[i] / norm;
  return out;
}

namespace {

thread_local std::uint64_t g_ops = 0;

/// Enumerates indices whose `fixed` bit positions equal `value`; positions must be sorted ascending.
struct Subspace {
  std::vector<unsigned> fixed;
  std::uint64_t value = 0;
  std::uint64_t count = 0;

  Subspace(unsigned n, std::vector<unsigned> positions, std::uint64_t v) : fixed(std::move(positions)), value(v) {
    std::sort(fixed.begin(), fixed.end());
    count = std::uint64_t{1} << (n - fixed.size());
  }

  std::uint64_t index(std::uint64_t k) const {
    for (unsigned p : fixed) k = ((k >> p) << (p + 1)) | (k & ((std::uint64_t{1} << p) - 1));
    return k | value;
  }
};

std::uint64_t control_value(const std::vector<Control>& controls) {
  std::uint64_t v = 0;
  for (const auto& c : controls)
    if (c.on_one) v |= std::uint64_t{1} << c.qubit;
  return v;
}

std::vector<unsigned> positions(const Gate& g) {
  std::vector<unsigned> p = g.targets;
  for (const auto& c : g.controls) p.push_back(c.qubit);
  return p;
}

std::vector<std::uint64_t> deposit_offsets(const std::vector<unsigned>& targets) {
  const std::size_t d = std::size_t{1} << targets.size();
  std::vector<std::uint64_t> off(d, 0);
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t b = 0; b < targets.size(); ++b)
      if ((j >> b) & 1u) off[j] |= std::uint64_t{1} << targets[b];
  return off;
}

void apply_single(Statevector& psi, const Gate& g) {
  auto& a = psi.amplitudes();
  const unsigned t = g.targets[0];
  const std::uint64_t tbit = std::uint64_t{1} << t;
  const std::uint64_t cval = control_value(g.controls);
  if (g.kind == GateKind::P) {
    const Subspace sub(psi.num_qubits(), positions(g), cval | tbit);
    const cplx ph = std::polar(1.0, g.theta);
    for (std::uint64_t k = 0; k < sub.count; ++k) a[sub.index(k)] *= ph;
    g_ops += sub.count;
    return;
  }
  const Subspace sub(psi.num_qubits(), positions(g), cval);
  g_ops += 2 * sub.count;
  switch (g.kind) {
    case GateKind::X:
      for (std::uint64_t k = 0; k < sub.count; ++k) {
        const std::uint64_t i = sub.index(k);
        std::swap(a[i], a[i | tbit]);
      }
      break;
    case GateKind::H: {
      const double r = std::numbers::sqrt2 / 2.0;
      for (std::uint64_t k = 0; k < sub.count; ++k) {
        const std::uint64_t i = sub.index(k);
        const cplx x0 = a[i], x1 = a[i | tbit];
        a[i] = r * (x0 + x1);
        a[i | tbit] = r * (x0 - x1);
      }
      break;
    }
    case GateKind::RY: {
      const double c = std::cos(0.5 * g.theta), s = std::sin(0.5 * g.theta);
      for (std::uint64_t k = 0; k < sub.count; ++k) {
        const std::uint64_t i = sub.index(k);
        const cplx x0 = a[i], x1 = a[i | tbit];
        a[i] = c * x0 - s * x1;
        a[i | tbit] = s * x0 + c * x1;
      }
      break;
    }
    default: throw std::logic_error("apply_single: unsupported gate");
  }
}

void apply_matrix(Statevector& psi, const Gate& g) {
  auto& a = psi.amplitudes();
  const Subspace sub(psi.num_qubits(), positions(g), control_value(g.controls));
  const auto off = deposit_offsets(g.targets);
  const std::size_t d = off.size();
  bool diagonal = true;
  for (std::size_t r = 0; r < d && diagonal; ++r)
    for (std::size_t c = 0; c < d; ++c)
      if (r != c && g.matrix[r * d + c] != 0.0) {
        diagonal = false;
        break;
      }
  if (diagonal) {
    for (std::uint64_t k = 0; k < sub.count; ++k) {
      const std::uint64_t base = sub.index(k);
      for (std::size_t j = 0; j < d; ++j) a[base | off[j]] *= g.matrix[j * d + j];
    }
    g_ops += sub.count * d;
    return;
  }
  std::vector<cplx> in(d), out(d);
  for (std::uint64_t k = 0; k < sub.count; ++k) {
    const std::uint64_t base = sub.index(k);
    for (std::size_t j = 0; j < d; ++j) in[j] = a[base | off[j]];
    for (std::size_t r = 0; r < d; ++r) {
      cplx s = 0.0;
      const cplx* row = &g.matrix[r * d];
      for (std::size_t c = 0; c < d; ++c) s += row[c] * in[c];
      out[r] = s;
    }
    for (std::size_t j = 0; j < d; ++j) a[base | off[j]] = out[j];
  }
  g_ops += sub.count * d;
}

std::size_t reverse_bits(std::size_t v, std::size_t k) {
  std::size_t r = 0;
  for (std::size_t b = 0; b < k; ++b) r |= ((v >> b) & 1u) << (k - 1 - b);
  return r;
}

// QFT: |x> -> N^{-1/2} sum_y e^{2 pi i x y / N} |rev(y)>; IQFT is its adjoint.
void apply_fourier(Statevector& psi, const Gate& g, bool inverse) {
  auto& a = psi.amplitudes();
  const std::size_t k = g.targets.size();
  const Subspace sub(psi.num_qubits(), g.targets, 0);
  const auto off = deposit_offsets(g.targets);
  const std::size_t d = off.size();
  std::vector<std::size_t> rev(d);
  for (std::size_t j = 0; j < d; ++j) rev[j] = reverse_bits(j, k);
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<cplx> in(d), out(d);
  for (std::uint64_t m = 0; m < sub.count; ++m) {
    const std::uint64_t base = sub.index(m);
    if (!inverse) {
      for (std::size_t j = 0; j < d; ++j) in[j] = a[base | off[j]];
      fft.inv(out, in);
      for (std::size_t y = 0; y < d; ++y) a[base | off[rev[y]]] = out[y] * scale;
    } else {
      for (std::size_t y = 0; y < d; ++y) in[y] = a[base | off[rev[y]]];
      fft.fwd(out, in);
      for (std::size_t x = 0; x < d; ++x) a[base | off[x]] = out[x] * scale;
    }
  }
  g_ops += sub.count * d;
}

}  // namespace

void apply_gate(Statevector& psi, const Gate& g) {
  switch (g.kind) {
    case GateKind::H:
    case GateKind::X:
    case GateKind::P:
    case GateKind::RY: apply_single(psi, g); break;
    case GateKind::SmallUnitary: apply_matrix(psi, g); break;
    case GateKind::QFT: apply_fourier(psi, g, false); break;
    case GateKind::IQFT: apply_fourier(psi, g, true); break;
    case GateKind::Measure:
    case GateKind::Conditional: throw std::invalid_argument("apply_gate: non-unitary instruction");
  }
}

std::uint64_t kernel_op_count() { return g_ops; }
void reset_kernel_op_count() { g_ops = 0; }

namespace {

struct Runner {
  const Circuit& circuit;
  RunOptions options;
  Rng rng;
  RunOutcome out;

  void measure(const Gate& g, std::size_t index) {
    auto& a = out.state.amplitudes();
    const std::uint64_t tbit = std::uint64_t{1} << g.targets[0];
    double p0 = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
      if (!(i & tbit)) p0 += std::norm(a[i]);
    p0 = std::min(p0, 1.0);
    int outcome = 0;
    if (options.mode == RunMode::Sample) outcome = rng.uniform() < p0 ? 0 : 1;
    const double p = outcome == 0 ? p0 : 1.0 - p0;
    if (!(p > 0.0))
      throw PostSelectionError(index, "measurement " + std::to_string(index) + " on qubit " +
                                          std::to_string(g.targets[0]) + " has a zero-probability kept branch");
    const double scale = 1.0 / std::sqrt(p);
    for (std::size_t i = 0; i < a.size(); ++i) {
      if (static_cast<bool>(i & tbit) == static_cast<bool>(outcome)) a[i] *= scale;
      else a[i] = 0.0;
    }
    g_ops += a.size();
    out.p_keep *= p;
    out.cbits[g.cbit] = outcome;
    out.branches.push_back({index, g.targets[0], g.cbit, outcome, p, circuit.label_of(index)});
  }

  void exec(const Gate& g, std::size_t index) {
    if (g.kind == GateKind::Measure) {
      measure(g, index);
    } else if (g.kind == GateKind::Conditional) {
      if (out.cbits[g.cbit] == 0)
        for (const auto& b : g.body) exec(b, index);
    } else {
      apply_gate(out.state, g);
    }
  }
};

}  // namespace

RunOutcome run(const Circuit& circuit, Statevector psi, const RunOptions& options) {
  if (psi.num_qubits() != circuit.num_qubits()) throw std::invalid_argument("run: register size mismatch");
  Runner r{circuit, options, Rng(options.seed), {}};
  r.out.state = std::move(psi);
  r.out.cbits.assign(circuit.num_cbits(), 0);
  for (std::size_t i = 0; i < circuit.size(); ++i) r.exec(circuit.gates()[i], i);
  return std::move(r.out);
}

std::uint64_t ShotCounts::count(std::uint64_t index) const {
  auto it = counts.find(index);
  return it == counts.end() ? 0 : it->second;
}

std::string bitstring(std::uint64_t index, unsigned num_qubits) {
  std::string s(num_qubits, '0');
  for (unsigned b = 0; b < num_qubits; ++b)
    if ((index >> b) & 1u) s[num_qubits - 1 - b] = '1';
  return s;
}

DiscreteSampler::DiscreteSampler(std::span<const double> weights) : cdf_(weights.size()) {
  double s = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    s += weights[i];
    cdf_[i] = s;
  }
  if (!(s > 0.0)) throw std::invalid_argument("DiscreteSampler: weights sum to zero");
}

std::uint64_t DiscreteSampler::draw(Rng& rng) const {
  const double u = rng.uniform() * cdf_.back();
  auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  std::size_t i = static_cast<std::size_t>(it - cdf_.begin());
  return std::min(i, cdf_.size() - 1);
}

std::vector<double> probabilities(const Statevector& psi) {
  std::vector<double> p(psi.size());
  for (std::size_t i = 0; i < p.size(); ++i) p[i] = std::norm(psi[i]);
  return p;
}

ShotCounts sample(const Statevector& psi, std::uint64_t shots, std::uint64_t seed) {
  if (shots == 0) throw std::invalid_argument("sample: shots must be positive");
  const auto p = probabilities(psi);
  const DiscreteSampler sampler(p);
  Rng rng(seed);
  ShotCounts sc;
  sc.num_qubits = psi.num_qubits();
  sc.shots = shots;
  sc.seed = seed;
  for (std::uint64_t s = 0; s < shots; ++s) ++sc.counts[sampler.draw(rng)];
  return sc;
}

namespace {
std::uint64_t pattern_mask(const std::vector<unsigned>& qubits, std::uint64_t pattern, std::uint64_t& value) {
  std::uint64_t mask = 0;
  value = 0;
  for (std::size_t j = 0; j < qubits.size(); ++j) {
    mask |= std::uint64_t{1} << qubits[j];
    if ((pattern >> j) & 1u) value |= std::uint64_t{1} << qubits[j];
  }
  return mask;
}
}  // namespace

double marginal_probability(const Statevector& psi, const std::vector<unsigned>& qubits, std::uint64_t pattern) {
  std::uint64_t value = 0;
  const std::uint64_t mask = pattern_mask(qubits, pattern, value);
  double s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i)
    if ((i & mask) == value) s += std::norm(psi[i]);
  return s;
}

Projected postselect(const Statevector& psi, const std::vector<unsigned>& qubits, std::uint64_t pattern) {
  std::uint64_t value = 0;
  const std::uint64_t mask = pattern_mask(qubits, pattern, value);
  Projected out{psi, 0.0};
  auto& a = out.state.amplitudes();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if ((i & mask) == value) out.probability += std::norm(a[i]);
    else a[i] = 0.0;
  }
  if (!(out.probability > 0.0)) throw PostSelectionError(0, "postselect: zero-probability branch");
  const double scale = 1.0 / std::sqrt(out.probability);
  for (auto& v : a) v *= scale;
  return out;
}

double expect_diagonal(const Statevector& psi, const std::function<double(std::uint64_t)>& weight) {
  double s = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    const double p = std::norm(psi[i]);
    if (p != 0.0) s += weight(i) * p;
  }
  return s;
}

}  // namespace qlbm
