#include "qlbm/qlbm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qlbm {

namespace {

constexpr double kCs2 = 1.0 / 3.0;

unsigned log2_exact(std::size_t n) {
  if (!is_power_of_two(n)) throw std::invalid_argument("grid dimensions must be powers of two");
  unsigned k = 0;
  while ((std::size_t{1} << k) < n) ++k;
  return k;
}

std::vector<unsigned> s_qubits(const RegisterLayout& l) { return {l.s(0), l.s(1), l.s(2), l.s(3)}; }

std::vector<unsigned> x_qubits(const RegisterLayout& l) {
  std::vector<unsigned> q;
  for (unsigned j = 0; j < l.nx_qubits; ++j) q.push_back(l.q1(j));
  return q;
}

std::vector<unsigned> y_qubits(const RegisterLayout& l) {
  std::vector<unsigned> q;
  for (unsigned j = 0; j < l.ny_qubits; ++j) q.push_back(l.q2(j));
  return q;
}

std::vector<Control> cat(std::vector<Control> a, const std::vector<Control>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

/// Controls on bits 1..k-1 of a coordinate register, all equal to `ones`.
std::vector<Control> high_bits(const std::vector<unsigned>& q, bool ones) {
  std::vector<Control> c;
  for (std::size_t j = 1; j < q.size(); ++j) c.push_back({q[j], ones});
  return c;
}

std::vector<Control> all_bits(const std::vector<unsigned>& q, bool ones) {
  std::vector<Control> c;
  for (unsigned j : q) c.push_back({j, ones});
  return c;
}

/// Keeps cos(theta/2) = w of the amplitude in the a_s = 0 branch.
void weight(Circuit& c, const RegisterLayout& l, double w, std::vector<Control> controls) {
  if (w == 1.0) return;
  if (w == 0.0) {
    c.append(gates::x(l.a_s(), std::move(controls)));
    return;
  }
  c.append(gates::cry(std::move(controls), l.a_s(), 2.0 * std::acos(w)));
}

void measure_flag(Circuit& c, const RegisterLayout& l) { c.append(gates::measure(l.a_s(), c.new_cbit())); }

std::vector<Gate> ladder(const std::vector<unsigned>& q, const RegisterLayout& l, double perturbation) {
  std::vector<Gate> out;
  const std::size_t k = q.size();
  for (int doubled = 0; doubled <= (l.two_levels ? 1 : 0); ++doubled) {
    for (std::size_t j = 0; j < k; ++j) {
      // qubit j carries Fourier bit k-1-j, so a unit shift needs 2 pi 2^(k-1-j) / 2^k
      const double theta = 2.0 * std::numbers::pi * std::ldexp(1.0, static_cast<int>(k - 1 - j)) /
                               std::ldexp(1.0, static_cast<int>(k)) +
                           perturbation;
      std::vector<Control> base{neg(l.s(3))};
      if (doubled) base.push_back(pos(l.s_d()));
      out.push_back(gates::p(q[j], theta, cat(base, {neg(l.s(0))})));
      out.push_back(gates::p(q[j], -theta, cat(base, {pos(l.s(0))})));
    }
  }
  return out;
}

std::vector<std::size_t> regroup(const std::array<std::size_t, 9>& from, const std::array<std::size_t, 9>& to) {
  std::map<std::size_t, std::size_t> m;
  for (std::size_t a = 0; a < 9; ++a) m[from[a]] = to[a];
  for (std::size_t s = slots::kCopy; s < slots::kCount; ++s) m[s] = s;
  return complete_permutation(slots::kCount, m);
}

/// Marks the two-cell layers next to bounded edges on a_b (self-inverse).
void mark_region(Circuit& c, const RegisterLayout& l, const BoundarySpec& bc) {
  const auto qx = x_qubits(l);
  const auto qy = y_qubits(l);
  if (bc.x_bounded())
    for (bool ones : {false, true}) c.append(gates::mcx(high_bits(qx, ones), l.a_b()));
  if (bc.y_bounded())
    for (bool ones : {false, true}) c.append(gates::mcx(high_bits(qy, ones), l.a_b()));
  if (bc.x_bounded() && bc.y_bounded())
    for (bool ox : {false, true})
      for (bool oy : {false, true}) c.append(gates::mcx(cat(high_bits(qx, ox), high_bits(qy, oy)), l.a_b()));
}

}  // namespace

std::string to_string(CollisionMode mode) {
  return mode == CollisionMode::Linear ? "linear" : "nonlinear-extended";
}

CollisionEmbedding embed_matrix(const Eigen::MatrixXd& C) {
  if (C.rows() != static_cast<Eigen::Index>(slots::kCount) || C.cols() != C.rows())
    throw std::invalid_argument("collision matrix must be 16x16");
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(C, Eigen::ComputeFullU | Eigen::ComputeFullV);
  CollisionEmbedding e;
  e.C = C;
  e.U = svd.matrixU();
  e.Vt = svd.matrixV().transpose();
  const auto& sv = svd.singularValues();
  if (!(sv(0) > 0.0)) throw std::invalid_argument("collision matrix is zero");
  e.scale = sv(0);
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    const double r = std::min(sv(k) / e.scale, 1.0);
    e.sigma.push_back(sv(k));
    e.sigma1.emplace_back(r, std::sqrt(std::max(0.0, 1.0 - r * r)));
    e.sigma2.push_back(std::conj(e.sigma1.back()));
  }
  return e;
}

CollisionEmbedding build_collision_matrix(const PhysicsModel& model, const LatticeConfig& config,
                                          CollisionMode mode) {
  if (config.dim != 2) throw std::invalid_argument("quantum circuits are built for 2D lattices only");
  validate(model);
  const std::size_t n_in = mode == CollisionMode::Linear ? 3 : 6;
  Eigen::MatrixXd C = Eigen::MatrixXd::Zero(slots::kCount, slots::kCount);
  if (mode == CollisionMode::Linear) {
    if (!is_linear_model(model))
      throw std::invalid_argument(model_name(model) + " is not affine in (V0, V1); use the nonlinear-extended mode");
    for (std::size_t j = 0; j < 3; ++j) {
      double e[3] = {0.0, 0.0, 0.0};
      e[j] = 1.0;
      const auto f = equilibrium(model, config, std::span<const double>(e, 3));
      for (std::size_t a = 0; a < 9; ++a) C(static_cast<Eigen::Index>(slots::kCollision[a]), j) = f[a];
    }
  } else {
    double inv_rho0 = 1.0;
    if (const auto* m = std::get_if<IncompressibleAthermal>(&model.kind)) inv_rho0 = 1.0 / m->rho0;
    else if (!std::holds_alternative<LowMachAthermal>(model.kind))
      throw std::invalid_argument(model_name(model) + " has no nonlinear-extended input form");
    for (std::size_t a = 0; a < 9; ++a) {
      const double w = config.weight(a);
      const double cx = config.velocities[a][0];
      const double cy = config.velocities[a][1];
      const double row[6] = {w,
                             w * cx / kCs2,
                             w * cy / kCs2,
                             w * inv_rho0 * (cx * cx / (2.0 * kCs2 * kCs2) - 1.0 / (2.0 * kCs2)),
                             w * inv_rho0 * (cy * cy / (2.0 * kCs2 * kCs2) - 1.0 / (2.0 * kCs2)),
                             w * inv_rho0 * (cx * cy / (kCs2 * kCs2))};
      for (std::size_t j = 0; j < 6; ++j) C(static_cast<Eigen::Index>(slots::kCollision[a]), j) = row[j];
    }
  }
  const bool copies = config.two_levels();
  if (copies)
    for (std::size_t i = 0; i < 3; ++i) C(static_cast<Eigen::Index>(slots::kCopy + i), i) = 1.0;
  auto e = embed_matrix(C);
  e.mode = mode;
  e.num_inputs = n_in;
  e.copy_block = copies;
  return e;
}

std::vector<Gate> svd_embed(const CollisionEmbedding& emb, const RegisterLayout& layout) {
  const auto s = s_qubits(layout);
  const std::size_t d = slots::kCount;
  std::vector<cplx> vt(d * d), u(d * d), s1(d * d, 0.0), s2(d * d, 0.0);
  for (std::size_t r = 0; r < d; ++r)
    for (std::size_t c = 0; c < d; ++c) {
      vt[r * d + c] = emb.Vt(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
      u[r * d + c] = emb.U(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    }
  for (std::size_t k = 0; k < d; ++k) {
    s1[k * d + k] = emb.sigma1[k];
    s2[k * d + k] = emb.sigma2[k];
  }
  const unsigned ac = layout.a_c();
  return {gates::unitary(s, vt),
          gates::h(ac),
          gates::unitary(s, s1, {neg(ac)}),
          gates::unitary(s, s2, {pos(ac)}),
          gates::h(ac),
          gates::unitary(s, u)};
}

double Block::scale() const {
  double p = 1.0;
  for (const auto& f : factors) p *= f.value;
  return p;
}

Block build_collision(const CollisionEmbedding& emb, const RegisterLayout& layout) {
  Block b{"collision", Circuit(layout.total()), {{"collision 1/s_C", 1.0 / emb.scale}}};
  b.circuit.begin_block(b.label);
  b.circuit.append(svd_embed(emb, layout));
  b.circuit.append(gates::measure(layout.a_c(), b.circuit.new_cbit()));
  return b;
}

std::vector<Gate> build_propagation(const LatticeConfig& config, const RegisterLayout& layout,
                                    const PropagationOptions& options) {
  if (config.dim != 2 || config.level_indices(1).size() != 9)
    throw std::invalid_argument("propagation circuits are built for D2Q9 and D2Q17 only");
  if (config.two_levels() != layout.two_levels) throw std::invalid_argument("lattice and register disagree on levels");
  const auto qx = x_qubits(layout);
  const auto qy = y_qubits(layout);
  const auto s = s_qubits(layout);
  std::vector<Gate> out{gates::qft(qx), gates::qft(qy)};
  for (auto& g : ladder(qy, layout, options.ladder_perturbation)) out.push_back(std::move(g));
  for (auto& g : permutation_gates(s, regroup(slots::kCollision, slots::kHorizontal))) out.push_back(std::move(g));
  for (auto& g : ladder(qx, layout, options.ladder_perturbation)) out.push_back(std::move(g));
  out.push_back(gates::iqft(qx));
  out.push_back(gates::iqft(qy));
  for (auto& g : permutation_gates(s, regroup(slots::kHorizontal, slots::kPropagated))) out.push_back(std::move(g));
  return out;
}

Block build_integration(const RegisterLayout& l, bool keep_copies) {
  Block b{"integration", Circuit(l.total()), {{"integration 1/4", 0.25}}};
  Circuit& c = b.circuit;
  c.begin_block(b.label);
  const auto s = s_qubits(l);
  // stage 1: pair sums and differences, then the mixed diagonal differences on slots 3 and 7
  c.append(gates::h(l.s(0), {neg(l.s(3))}));
  c.append(gates::h(l.s(2), {pos(l.s(0)), pos(l.s(1)), neg(l.s(3))}));
  // stage 2: collect the pair sums on slot 0
  c.append(gates::h(l.s(1), {neg(l.s(0)), neg(l.s(3))}));
  c.append(gates::h(l.s(2), {neg(l.s(0)), neg(l.s(1)), neg(l.s(3))}));
  c.append(permutation_gates(
      s, complete_permutation(slots::kCount, {{0, 0}, {1, 1}, {12, 8}, {7, 9}, {5, 2}, {3, 10}, {13, 13}, {14, 14}, {15, 15}})));
  const double r2 = std::numbers::sqrt2;
  const std::pair<std::size_t, double> att[] = {{8, 1.0 / (2.0 * r2)}, {1, 0.5}, {2, 0.5}, {9, 1.0 / r2}, {10, 1.0 / r2}};
  for (const auto& [slot, w] : att) weight(c, l, w, pattern_controls(s, slot));
  measure_flag(c, l);
  c.append(gates::h(l.s(3), {neg(l.s(2))}));
  c.append(gates::x(l.a_s(), {pos(l.s(0)), pos(l.s(1)), neg(l.s(2)), neg(l.s(3))}));
  c.append(gates::x(l.a_s(), {pos(l.s(2)), neg(l.s(3))}));
  c.append(gates::x(l.a_s(), {neg(l.s(2)), pos(l.s(3))}));
  c.append(gates::x(l.a_s(), {neg(l.s(0)), neg(l.s(1)), pos(l.s(2)), pos(l.s(3))}));
  std::vector<Control> copy_ctl;
  if (keep_copies) copy_ctl.push_back(pos(l.s_d()));
  c.append(gates::x(l.a_s(), cat(pattern_controls(s, 13), copy_ctl)));
  c.append(gates::x(l.a_s(), cat({pos(l.s(1)), pos(l.s(2)), pos(l.s(3))}, copy_ctl)));
  measure_flag(c, l);
  return b;
}

Block build_boundary(const BoundarySpec& bc, double tau, const RegisterLayout& l) {
  if (!(tau > 0.5 && tau < 2.0)) throw std::invalid_argument("tau must lie in (0.5, 2)");
  for (const auto& e : bc.edges)
    if (e.bounded() && e.kind != EdgeKind::Inlet && e.applies_to != 0b111)
      throw std::invalid_argument("the quantum boundary block applies conditions to all variables");
  if (!bc.all_periodic() && !l.boundary_ancilla) throw std::invalid_argument("bounded domains need the a_b ancilla");
  if (!l.two_levels && tau != 1.0) throw std::invalid_argument("one-level circuits implement tau = 1 only");

  Block b{"boundary", Circuit(l.total()), {}};
  Circuit& c = b.circuit;
  c.begin_block(b.label);
  const bool bounded = !bc.all_periodic();
  const std::vector<Control> slot03{neg(l.s(3)), neg(l.s(2))};

  double c_dom = 1.0, gamma = 1.0;
  if (l.two_levels) {
    const double c1 = (3.0 - 2.0 * tau) / (2.0 - tau);
    const double c2 = (tau - 1.0) / (2.0 - tau);
    c_dom = std::max(std::abs(c1), std::abs(c2));
    gamma = std::min(1.0, c_dom);
    const double w1 = gamma * c1 / c_dom, w2 = gamma * c2 / c_dom, w1b = gamma / c_dom;
    if (bounded) mark_region(c, l, bc);
    const std::size_t before = c.size();
    if (bounded) {
      weight(c, l, w1, cat(slot03, {neg(l.s_d()), neg(l.a_b())}));
      weight(c, l, w1b, cat(slot03, {neg(l.s_d()), pos(l.a_b())}));
      weight(c, l, w2, cat(slot03, {pos(l.s_d()), neg(l.a_b())}));
      weight(c, l, 0.0, cat(slot03, {pos(l.s_d()), pos(l.a_b())}));
    } else {
      weight(c, l, w1, cat(slot03, {neg(l.s_d())}));
      weight(c, l, w2, cat(slot03, {pos(l.s_d())}));
    }
    if (c.size() != before) measure_flag(c, l);
    if (bounded) mark_region(c, l, bc);
    c.append(gates::h(l.s_d(), slot03));
    c.append(gates::x(l.a_s(), cat(slot03, {pos(l.s_d())})));
    measure_flag(c, l);
    b.factors.push_back({"combine gamma/(sqrt2 c_dom)", gamma / (std::numbers::sqrt2 * c_dom)});
  }

  std::vector<Control> lvl = slot03;
  if (l.two_levels) lvl.push_back(neg(l.s_d()));
  int zg_dims = 0;
  for (int dim = 0; dim < 2; ++dim) {
    const auto q = dim == 0 ? x_qubits(l) : y_qubits(l);
    const auto& lo = bc.edges[dim == 0 ? 0 : 2];
    const auto& hi = bc.edges[dim == 0 ? 1 : 3];
    if (!lo.bounded()) continue;
    c.append(gates::x(l.a_s(), cat(lvl, all_bits(q, false))));
    c.append(gates::x(l.a_s(), cat(lvl, all_bits(q, true))));
    measure_flag(c, l);
    if (!lo.copies_inner() && !hi.copies_inner()) continue;
    if (lo.copies_inner()) c.append(gates::cry(cat(lvl, high_bits(q, false)), q[0], -std::numbers::pi / 2.0));
    if (hi.copies_inner()) c.append(gates::cry(cat(lvl, high_bits(q, true)), q[0], std::numbers::pi / 2.0));
    std::vector<Gate> mark;
    if (lo.copies_inner()) mark.push_back(gates::mcx(cat(lvl, high_bits(q, false)), l.a_b()));
    if (hi.copies_inner()) mark.push_back(gates::mcx(cat(lvl, high_bits(q, true)), l.a_b()));
    c.append(mark);
    weight(c, l, 1.0 / std::numbers::sqrt2, cat(lvl, {neg(l.a_b())}));
    c.append(mark);
    measure_flag(c, l);
    ++zg_dims;
    b.factors.push_back({dim == 0 ? "zero-gradient x 1/sqrt2" : "zero-gradient y 1/sqrt2", 1.0 / std::numbers::sqrt2});
  }

  if (l.two_levels) {
    // (s_d=0, slot 13+i) <-> (s_d=1, slot i)
    auto sq = s_qubits(l);
    sq.push_back(l.s_d());
    c.append(permutation_gates(sq, complete_permutation(32, {{13, 16}, {14, 17}, {15, 18}, {16, 13}, {17, 14}, {18, 15}})));
    const double r = 0.25 * gamma / (std::numbers::sqrt2 * c_dom) * std::pow(std::numbers::sqrt2 / 2.0, zg_dims);
    if (bounded) {
      mark_region(c, l, bc);
      weight(c, l, r, cat(slot03, {pos(l.s_d()), neg(l.a_b())}));
      weight(c, l, 0.0, cat(slot03, {pos(l.s_d()), pos(l.a_b())}));
      mark_region(c, l, bc);
    } else {
      weight(c, l, r, cat(slot03, {pos(l.s_d())}));
    }
    measure_flag(c, l);
  }
  return b;
}

Block build_object(const ObjectMask& mask, const RegisterLayout& l) {
  Block b{"object", Circuit(l.total()), {}};
  if (mask.empty()) return b;
  Circuit& c = b.circuit;
  c.begin_block(b.label);
  const std::size_t nx = std::size_t{1} << l.nx_qubits;
  const std::size_t ny = std::size_t{1} << l.ny_qubits;
  auto q = x_qubits(l);
  for (unsigned j : y_qubits(l)) q.push_back(j);
  for (std::size_t site : mask.two_layer_cells(nx, ny)) c.append(gates::x(l.a_s(), pattern_controls(q, site)));
  measure_flag(c, l);
  return b;
}

RegisterLayout make_layout(std::size_t nx, std::size_t ny, bool two_levels, const BoundarySpec& bc) {
  RegisterLayout l;
  l.nx_qubits = log2_exact(nx);
  l.ny_qubits = log2_exact(ny);
  l.two_levels = two_levels;
  l.boundary_ancilla = !bc.all_periodic();
  l.validate();
  return l;
}

double StepCircuitPlan::scale() const {
  double p = 1.0;
  for (const auto& b : blocks) p *= b.scale();
  return p;
}

StepCircuitPlan build_step(const PhysicsModel& model, const LatticeConfig& config, const BoundarySpec& bc,
                           const ObjectMask& mask, std::size_t nx, std::size_t ny, const StepOptions& options) {
  bc.validate(nx, ny);
  mask.validate(nx, ny);
  StepCircuitPlan plan;
  plan.nx = nx;
  plan.ny = ny;
  plan.layout = make_layout(nx, ny, config.two_levels(), bc);
  const auto& l = plan.layout;
  plan.collision = build_collision_matrix(model, config, options.mode);
  plan.blocks.push_back(build_collision(plan.collision, l));
  Block prop{"propagation", Circuit(l.total()), {}};
  prop.circuit.begin_block(prop.label);
  prop.circuit.append(build_propagation(config, l, options.propagation));
  plan.blocks.push_back(std::move(prop));
  plan.blocks.push_back(build_integration(l, plan.collision.copy_block));
  plan.blocks.push_back(build_boundary(bc, model.tau, l));
  plan.blocks.push_back(build_object(mask, l));
  plan.full = Circuit(l.total());
  for (const auto& b : plan.blocks) plan.full = compose(plan.full, b.circuit);
  return plan;
}

double EncodingMap::scale() const {
  double p = 1.0;
  for (const auto& e : ledger) p *= e.value;
  return p;
}

std::uint64_t EncodingMap::index(std::size_t x, std::size_t y, std::size_t slot, std::size_t level) const {
  const unsigned lat = layout.lattice_qubits();
  return static_cast<std::uint64_t>(x) | (static_cast<std::uint64_t>(y) << layout.nx_qubits) |
         (static_cast<std::uint64_t>(slot) << lat) |
         (static_cast<std::uint64_t>(level) << (lat + RegisterLayout::kSubstateQubits));
}

EncodingMap make_encoding_map(const StepCircuitPlan& plan, const PhysicsModel& model, CollisionMode mode) {
  EncodingMap m;
  m.layout = plan.layout;
  m.nx = plan.nx;
  m.ny = plan.ny;
  m.mode = mode;
  m.model = model;
  return m;
}

Encoded encode_fields(const FieldState& fields, EncodingMap map) {
  const std::size_t levels = map.two_levels() ? 2 : 1;
  if (fields.nx() != map.nx || fields.ny() != map.ny || fields.levels() != levels)
    throw std::invalid_argument("encode_fields: field shape does not match the encoding map");
  std::vector<cplx> v(std::size_t{1} << map.layout.total(), 0.0);
  for (std::size_t l = 0; l < levels; ++l)
    for (std::size_t y = 0; y < map.ny; ++y)
      for (std::size_t x = 0; x < map.nx; ++x) {
        const double v0 = fields.at(l, 0, x, y);
        const std::array<double, 2> v1{fields.at(l, 1, x, y), fields.at(l, 2, x, y)};
        if (map.mode == CollisionMode::Linear) {
          v[map.index(x, y, 0, l)] = v0;
          v[map.index(x, y, 1, l)] = v1[0];
          v[map.index(x, y, 2, l)] = v1[1];
        } else {
          const auto e = extended_inputs(map.model, v0, v1);
          for (std::size_t j = 0; j < 6; ++j) v[map.index(x, y, j, l)] = e[j];
        }
      }
  auto init = init_amplitudes(std::move(v));
  map.ledger = {{"encoding 1/norm", 1.0 / init.norm}};
  return {std::move(init.state), std::move(map)};
}

Decoded decode_fields(const Statevector& psi, const EncodingMap& map) {
  if (psi.num_qubits() != map.layout.total()) throw std::invalid_argument("decode_fields: register size mismatch");
  const std::size_t levels = map.two_levels() ? 2 : 1;
  Decoded out{FieldState(map.nx, map.ny, 3, levels), 0.0, 0.0};
  const double scale = map.scale();
  double kept = 0.0;
  for (std::size_t l = 0; l < levels; ++l)
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t y = 0; y < map.ny; ++y)
        for (std::size_t x = 0; x < map.nx; ++x) {
          const cplx a = psi[map.index(x, y, v, l)];
          kept += std::norm(a);
          out.max_imaginary = std::max(out.max_imaginary, std::abs(a.imag()));
          out.fields.at(l, v, x, y) = a.real() / scale;
        }
  double total = 0.0;
  for (const auto& a : psi.amplitudes()) total += std::norm(a);
  if (!(kept > 0.0)) throw PostSelectionError(0, "decode_fields: the kept branch has zero probability");
  out.residual_probability = std::max(0.0, 1.0 - kept / total);
  return out;
}

StepRun run_step(const StepCircuitPlan& plan, Statevector psi, EncodingMap map) {
  auto outcome = run(plan.full, std::move(psi), {RunMode::PostSelectZero, 0});
  StepRun r;
  r.p_keep = outcome.p_keep;
  double cumulative = 1.0;
  for (const auto& b : outcome.branches) {
    r.discarded[b.block] += cumulative * (1.0 - b.probability);
    cumulative *= b.probability;
  }
  for (const auto& b : plan.blocks)
    for (const auto& f : b.factors) map.ledger.push_back(f);
  map.ledger.push_back({"post-selection 1/sqrt(p_keep)", 1.0 / std::sqrt(outcome.p_keep)});
  r.state = std::move(outcome.state);
  r.map = std::move(map);
  r.branches = std::move(outcome.branches);
  return r;
}

FieldState quantum_step(const FieldState& fields, const StepCircuitPlan& plan, const PhysicsModel& model,
                        CollisionMode mode, double* p_keep) {
  auto enc = encode_fields(fields, make_encoding_map(plan, model, mode));
  auto r = run_step(plan, std::move(enc.state), std::move(enc.map));
  if (p_keep) *p_keep = r.p_keep;
  return decode_fields(r.state, r.map).fields;
}

}  // namespace qlbm
