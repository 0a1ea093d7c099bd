#include "qlbm/readout.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qlbm {

namespace {

std::vector<bool> site_mask(std::size_t sites, const CellSet& cells) {
  std::vector<bool> m(sites, !cells.has_value());
  if (cells)
    for (std::size_t i : *cells) {
      if (i >= sites) throw std::invalid_argument("subdomain cell out of range");
      m[i] = true;
    }
  return m;
}

struct EigenTable {
  std::uint64_t site_bits = 0;
  unsigned lat = 0;
  std::uint64_t high_mask = 0;
  std::vector<bool> sites;
  double lambda_rho = 0.0;

  EigenTable(const EncodingMap& map, double c_phys, const CellSet& cells)
      : site_bits((std::uint64_t{1} << map.layout.lattice_qubits()) - 1),
        lat(map.layout.lattice_qubits()),
        high_mask(~std::uint64_t{0} << (map.layout.lattice_qubits() + RegisterLayout::kSubstateQubits)),
        sites(site_mask(map.nx * map.ny, cells)),
        lambda_rho(0.5 * c_phys * c_phys) {}

  /// 0 = rho, 1 = u, -1 = zero eigenvalue.
  int kind(std::uint64_t i) const {
    if (i & high_mask) return -1;
    const std::uint64_t slot = (i >> lat) & 0xF;
    if (slot > 2 || !sites[i & site_bits]) return -1;
    return slot == 0 ? 0 : 1;
  }
  double eigenvalue(std::uint64_t i) const {
    const int k = kind(i);
    return k < 0 ? 0.0 : k == 0 ? lambda_rho : 0.5;
  }
};

double chebyshev(int n, double x) {
  double t0 = 1.0, t1 = x;
  if (n == 0) return t0;
  for (int k = 1; k < n; ++k) {
    const double t2 = 2.0 * x * t1 - t0;
    t0 = t1;
    t1 = t2;
  }
  return t1;
}

std::vector<std::pair<std::uint64_t, double>> frequencies(const std::map<std::uint64_t, double>& m) {
  double total = 0.0;
  for (const auto& [i, c] : m) total += c;
  std::vector<std::pair<std::uint64_t, double>> out;
  if (!(total > 0.0)) return out;
  for (const auto& [i, c] : m)
    if (c > 0.0) out.emplace_back(i, c / total);
  return out;
}

void check_index(std::uint64_t i, const TomographyBasis& basis) {
  if (i >= basis.points()) throw std::invalid_argument("outcome index outside the tomography grid");
}

}  // namespace

double acoustic_energy(const FieldState& fields, double c_phys, const CellSet& cells) {
  const auto m = site_mask(fields.sites(), cells);
  const auto& r = fields.grid(0, 0);
  const auto& u1 = fields.grid(0, 1);
  const auto& u2 = fields.grid(0, 2);
  double e = 0.0;
  for (std::size_t i = 0; i < fields.sites(); ++i)
    if (m[i]) e += c_phys * c_phys * r[i] * r[i] + u1[i] * u1[i] + u2[i] * u2[i];
  return 0.5 * e;
}

double energy_eigenvalue(std::uint64_t index, const EncodingMap& map, double c_phys, const CellSet& cells) {
  return EigenTable(map, c_phys, cells).eigenvalue(index);
}

EnergyExpectation energy_expectation(const Statevector& psi, const EncodingMap& map, double c_phys,
                                     const CellSet& cells) {
  const EigenTable t(map, c_phys, cells);
  EnergyExpectation out;
  double second = 0.0;
  for (std::uint64_t i = 0; i < psi.size(); ++i) {
    const double p = std::norm(psi[i]);
    if (p == 0.0) continue;
    const int k = t.kind(i);
    if (k == 0) out.p_rho += p;
    else if (k == 1) out.p_u += p;
  }
  out.value = t.lambda_rho * out.p_rho + 0.5 * out.p_u;
  second = t.lambda_rho * t.lambda_rho * out.p_rho + 0.25 * out.p_u;
  out.variance = std::max(0.0, second - out.value * out.value);
  out.variance_two_term = (t.lambda_rho - out.value) * (t.lambda_rho - out.value) * out.p_rho +
                          (0.5 - out.value) * (0.5 - out.value) * out.p_u;
  return out;
}

std::uint64_t shots_for_accuracy(double eps, std::optional<double> variance, double mean) {
  if (!(eps > 0.0)) throw std::invalid_argument("shots_for_accuracy: eps must be positive");
  if (mean == 0.0) throw std::invalid_argument("shots_for_accuracy: mean must be non-zero");
  const double n = variance ? *variance / (eps * eps * mean * mean) : 1.0 / (eps * eps);
  // absorb rounding in exact ratios such as 4.000000000000001
  return static_cast<std::uint64_t>(std::max(1.0, std::ceil(n * (1.0 - 1e-12))));
}

EnergyEstimate estimate_energy(const ShotCounts& counts, const EncodingMap& map, double c_phys, const CellSet& cells) {
  const EigenTable t(map, c_phys, cells);
  const std::uint64_t ancilla = ~std::uint64_t{0} << map.layout.first_ancilla();
  EnergyEstimate e;
  e.shots = counts.shots;
  double s1 = 0.0, s2 = 0.0;
  for (const auto& [i, c] : counts.counts) {
    if (i & ancilla) continue;
    e.kept += c;
    const double l = t.eigenvalue(i);
    s1 += l * static_cast<double>(c);
    s2 += l * l * static_cast<double>(c);
  }
  if (e.kept == 0) throw std::runtime_error("estimate_energy: no shot has all ancillas in 0");
  const double n = static_cast<double>(e.shots);
  e.kept_ratio = static_cast<double>(e.kept) / n;
  e.mean = s1 / n;
  e.variance = e.shots > 1 ? std::max(0.0, (s2 - n * e.mean * e.mean) / (n - 1.0)) : 0.0;
  e.stderr_ = std::sqrt(e.variance / n);
  return e;
}

ShotCounts sample_with_postselection(const Statevector& kept_state, double p_keep, const RegisterLayout& layout,
                                     std::uint64_t shots, Rng& rng, const DiscreteSampler* sampler) {
  if (shots == 0) throw std::invalid_argument("sample_with_postselection: shots must be positive");
  std::optional<DiscreteSampler> own;
  if (!sampler) {
    own.emplace(probabilities(kept_state));
    sampler = &*own;
  }
  ShotCounts sc;
  sc.num_qubits = kept_state.num_qubits();
  sc.shots = shots;
  const std::uint64_t discarded = std::uint64_t{1} << layout.a_s();
  for (std::uint64_t s = 0; s < shots; ++s) {
    if (rng.uniform() < p_keep) ++sc.counts[sampler->draw(rng)];
    else ++sc.counts[discarded];
  }
  return sc;
}

GridTransform rect_grid_transform(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("rect_grid_transform: half-sizes must be positive");
  return [a, b](double x, double y) -> std::array<double, 2> {
    const double r = std::max(std::abs(x / a), std::abs(y / b));
    if (r == 0.0) return {0.0, 0.0};
    const double f = std::max(r - 1.0, 0.0) / r;
    return {x * f, y * f};
  };
}

double TomographyBasis::eval(const Eigen::VectorXd& a, std::size_t i) const {
  double s = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) s += a(static_cast<Eigen::Index>(j)) * values[j][i];
  return s;
}

TomographyBasis chebyshev_basis(std::size_t nx, std::size_t ny, std::array<int, 2> degree,
                                const std::optional<BasisGeometry>& geometry) {
  if (degree[0] < 0 || degree[1] < 0) throw std::invalid_argument("chebyshev_basis: negative degree");
  const BasisGeometry g = geometry.value_or(BasisGeometry{0.5 * static_cast<double>(nx), 0.5 * static_cast<double>(ny), {}});
  std::vector<std::array<double, 2>> pts(nx * ny);
  double mx = 0.0, my = 0.0;
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      const double px = static_cast<double>(x) + 0.5 - g.cx;
      const double py = static_cast<double>(y) + 0.5 - g.cy;
      auto p = g.transform ? g.transform(px, py) : std::array<double, 2>{px, py};
      pts[x + nx * y] = p;
      mx = std::max(mx, std::abs(p[0]));
      my = std::max(my, std::abs(p[1]));
    }
  if (mx == 0.0) mx = 1.0;
  if (my == 0.0) my = 1.0;
  TomographyBasis b;
  b.nx = nx;
  b.ny = ny;
  b.degree = degree;
  for (int by = 0; by <= degree[1]; ++by)
    for (int bx = 0; bx <= degree[0]; ++bx) {
      std::vector<double> v(pts.size());
      for (std::size_t i = 0; i < pts.size(); ++i) v[i] = chebyshev(bx, pts[i][0] / mx) * chebyshev(by, pts[i][1] / my);
      b.values.push_back(std::move(v));
    }
  // values are ordered a + (degree[0]+1) b because bx runs fastest
  const auto m = static_cast<Eigen::Index>(b.values.size());
  b.gram = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index k = 0; k <= j; ++k) {
      double s = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i)
        s += b.values[static_cast<std::size_t>(j)][i] * b.values[static_cast<std::size_t>(k)][i];
      b.gram(j, k) = b.gram(k, j) = s;
    }
  return b;
}

bool TomographyProblem::has_x() const {
  for (const auto& m : x)
    if (!m.empty()) return true;
  return false;
}

std::map<std::uint64_t, double> normalize_counts(const std::map<std::uint64_t, double>& counts, double floor) {
  double total = 0.0;
  for (const auto& [i, c] : counts) total += c;
  std::map<std::uint64_t, double> out;
  if (!(total > 0.0)) return out;
  for (const auto& [i, c] : counts)
    if (c / total > floor) out[i] = c / total;
  return out;
}

double norm_w(const Eigen::VectorXd& a, const TomographyBasis& basis) { return a.dot(basis.gram * a); }

double kl_loss(const Eigen::VectorXd& a, const TomographyProblem& problem, const TomographyBasis& basis) {
  const double w = norm_w(a, basis);
  if (!(w > 0.0)) throw std::invalid_argument("kl_loss: W(a) must be positive");
  double l = 0.0;
  for (const auto& [i, p] : frequencies(problem.z)) {
    check_index(i, basis);
    const double f = basis.eval(a, i);
    if (f == 0.0) return std::numeric_limits<double>::infinity();
    l -= p * std::log(f * f / (w * p));
  }
  return l;
}

Eigen::VectorXd kl_gradient(const Eigen::VectorXd& a, const TomographyProblem& problem, const TomographyBasis& basis) {
  const double w = norm_w(a, basis);
  if (!(w > 0.0)) throw std::invalid_argument("kl_gradient: W(a) must be positive");
  const auto freq = frequencies(problem.z);
  Eigen::VectorXd g = Eigen::VectorXd::Zero(a.size());
  double mass = 0.0;
  for (const auto& [i, p] : freq) {
    check_index(i, basis);
    const double f = basis.eval(a, i);
    if (f == 0.0) throw std::domain_error("kl_gradient: f_a vanishes at observed outcome " + std::to_string(i));
    for (Eigen::Index j = 0; j < a.size(); ++j) g(j) -= 2.0 * p * basis.values[static_cast<std::size_t>(j)][i] / f;
    mass += p;
  }
  g += 2.0 * mass * (basis.gram * a) / w;
  return g;
}

double xbasis_loss(const Eigen::VectorXd& a, const TomographyProblem& problem, const TomographyBasis& basis,
                   unsigned k) {
  if (k >= problem.x.size() || problem.x[k].empty()) throw std::invalid_argument("xbasis_loss: no data for qubit");
  const double w = norm_w(a, basis);
  if (!(w > 0.0)) throw std::invalid_argument("xbasis_loss: W(a) must be positive");
  const std::uint64_t bit = std::uint64_t{1} << k;
  double l = 0.0;
  for (const auto& [i, p] : frequencies(problem.x[k])) {
    check_index(i, basis);
    const double sign = (i & bit) ? -1.0 : 1.0;
    const double h = basis.eval(a, i) + sign * basis.eval(a, i ^ bit);
    if (h == 0.0) return std::numeric_limits<double>::infinity();
    l -= p * std::log(h * h / (2.0 * w * p));
  }
  return l;
}

Eigen::VectorXd xbasis_gradient(const Eigen::VectorXd& a, const TomographyProblem& problem,
                                const TomographyBasis& basis, unsigned k) {
  if (k >= problem.x.size() || problem.x[k].empty()) throw std::invalid_argument("xbasis_gradient: no data for qubit");
  const double w = norm_w(a, basis);
  const std::uint64_t bit = std::uint64_t{1} << k;
  Eigen::VectorXd g = Eigen::VectorXd::Zero(a.size());
  double mass = 0.0;
  for (const auto& [i, p] : frequencies(problem.x[k])) {
    check_index(i, basis);
    const double sign = (i & bit) ? -1.0 : 1.0;
    const std::uint64_t partner = i ^ bit;
    const double h = basis.eval(a, i) + sign * basis.eval(a, partner);
    if (h == 0.0) throw std::domain_error("xbasis_gradient: vanishing amplitude at outcome " + std::to_string(i));
    for (Eigen::Index j = 0; j < a.size(); ++j) {
      const auto& v = basis.values[static_cast<std::size_t>(j)];
      g(j) -= 2.0 * p * (v[i] + sign * v[partner]) / h;
    }
    mass += p;
  }
  g += 2.0 * mass * (basis.gram * a) / w;
  return g;
}

double total_loss(const Eigen::VectorXd& a, const TomographyProblem& problem, const TomographyBasis& basis) {
  double l = kl_loss(a, problem, basis);
  for (unsigned k = 0; k < problem.x.size(); ++k)
    if (!problem.x[k].empty()) l += xbasis_loss(a, problem, basis, k);
  return l;
}

Eigen::VectorXd total_gradient(const Eigen::VectorXd& a, const TomographyProblem& problem,
                               const TomographyBasis& basis) {
  Eigen::VectorXd g = kl_gradient(a, problem, basis);
  for (unsigned k = 0; k < problem.x.size(); ++k)
    if (!problem.x[k].empty()) g += xbasis_gradient(a, problem, basis, k);
  return g;
}

namespace {

Eigen::VectorXd normalized(Eigen::VectorXd a, const TomographyBasis& basis) {
  const double w = norm_w(a, basis);
  if (!(w > 0.0)) return a;
  return a / std::sqrt(w);
}

struct Descent {
  Eigen::VectorXd a;
  double loss = std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  std::vector<double> trace;
};

Descent descend(Eigen::VectorXd a, const TomographyProblem& problem, const TomographyBasis& basis,
                const FitOptions& opt) {
  Descent d;
  d.a = normalized(std::move(a), basis);
  d.loss = total_loss(d.a, problem, basis);
  d.trace.push_back(d.loss);
  if (!std::isfinite(d.loss)) return d;
  double eta = opt.step_size;
  for (std::size_t it = 0; it < opt.max_iterations; ++it) {
    const Eigen::VectorXd g = total_gradient(d.a, problem, basis);
    const double gn = g.norm();
    if (gn == 0.0) break;
    const Eigen::VectorXd dir = g * (d.a.norm() / gn);
    bool accepted = false;
    while (eta > 1e-14) {
      const Eigen::VectorXd trial = normalized(d.a - eta * dir, basis);
      const double l = total_loss(trial, problem, basis);
      if (l < d.loss) {
        const double gain = d.loss - l;
        d.a = trial;
        d.loss = l;
        accepted = true;
        eta = std::min(1.0, eta * 1.5);
        d.iterations = it + 1;
        d.trace.push_back(l);
        if (gain < opt.tolerance * std::max(1.0, std::abs(l))) return d;
        break;
      }
      eta *= 0.5;
    }
    if (!accepted) break;
  }
  return d;
}

}  // namespace

TomographyFit fit(const TomographyProblem& problem, const TomographyBasis& basis, const FitOptions& options) {
  if (problem.z.empty()) throw std::invalid_argument("fit: no observed outcomes");
  const auto m = static_cast<Eigen::Index>(basis.size());
  std::vector<Eigen::VectorXd> starts;
  {
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (const auto& [i, p] : frequencies(problem.z)) {
      check_index(i, basis);
      for (Eigen::Index j = 0; j < m; ++j) rhs(j) += basis.values[static_cast<std::size_t>(j)][i] * std::sqrt(p);
    }
    starts.push_back(basis.gram.ldlt().solve(rhs));
  }
  Rng rng(options.seed);
  for (std::size_t s = 0; s < options.starts; ++s) {
    Eigen::VectorXd a(m);
    for (Eigen::Index j = 0; j < m; ++j) a(j) = rng.normal();
    starts.push_back(a);
  }
  TomographyFit best;
  best.loss = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < starts.size(); ++s) {
    if (!(norm_w(starts[s], basis) > 0.0)) {
      best.traces.push_back({});
      continue;
    }
    auto d = descend(starts[s], problem, basis, options);
    best.traces.push_back(d.trace);
    if (d.loss < best.loss) {
      best.a = d.a;
      best.loss = d.loss;
      best.iterations = d.iterations;
      best.best_start = s;
    }
  }
  if (!std::isfinite(best.loss)) throw std::runtime_error("fit: every start has infinite loss");
  best.constraint_residual = std::abs(norm_w(best.a, basis) - 1.0);
  return best;
}

FieldState sign_restore_symmetric(const FieldState& abs_fields, const SymmetryAxis& axis) {
  FieldState out = abs_fields;
  for (std::size_t l = 0; l < out.levels(); ++l)
    for (std::size_t v = 0; v < out.num_vars(); ++v) {
      const bool anti = v < axis.antisymmetric.size() && axis.antisymmetric[v];
      for (std::size_t y = 0; y < out.ny(); ++y) {
        const double yc = static_cast<double>(y);
        const double sign = !anti ? 1.0 : yc > axis.position ? 1.0 : yc < axis.position ? -1.0 : 0.0;
        for (std::size_t x = 0; x < out.nx(); ++x) out.at(l, v, x, y) = sign * std::abs(out.at(l, v, x, y));
      }
    }
  return out;
}

}  // namespace qlbm
