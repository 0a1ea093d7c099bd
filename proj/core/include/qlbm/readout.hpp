#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlbm/lattice.hpp"
#include "qlbm/qlbm.hpp"
#include "qlbm/simulator.hpp"

namespace qlbm {

/// Sites (x + nx*y) of a subdomain; std::nullopt means the whole lattice.
using CellSet = std::optional<std::vector<std::size_t>>;

/// E = 1/2 sum_{x in S} (c^2 rho^2 + u1^2 + u2^2) over level-1 fields.
double acoustic_energy(const FieldState& fields, double c_phys, const CellSet& cells = std::nullopt);

/// Eigenvalue of the energy observable on basis index i: c^2/2 on level-1 rho, 1/2 on level-1 u, 0 elsewhere.
double energy_eigenvalue(std::uint64_t index, const EncodingMap& map, double c_phys, const CellSet& cells = std::nullopt);

struct EnergyExpectation {
  double value = 0.0;
  /// sum lambda^2 p - value^2.
  double variance = 0.0;
  /// (c^2/2 - E)^2 P_rho + (1/2 - E)^2 P_u; equals `variance` when every outcome has a non-zero eigenvalue.
  double variance_two_term = 0.0;
  double p_rho = 0.0;
  double p_u = 0.0;
};

EnergyExpectation energy_expectation(const Statevector& psi, const EncodingMap& map, double c_phys,
                                     const CellSet& cells = std::nullopt);

/// n = ceil(variance / (eps^2 mean^2)), or ceil(eps^-2) without a variance. Throws on eps <= 0 or mean == 0.
std::uint64_t shots_for_accuracy(double eps, std::optional<double> variance, double mean);

struct EnergyEstimate {
  /// Per-shot mean of lambda(i) * [ancillas read 0]; the kept ratio enters as the norm factor.
  double mean = 0.0;
  double variance = 0.0;
  double stderr_ = 0.0;
  std::uint64_t shots = 0;
  std::uint64_t kept = 0;
  double kept_ratio = 0.0;
};

/// Throws std::runtime_error when no shot has all ancillas 0.
EnergyEstimate estimate_energy(const ShotCounts& counts, const EncodingMap& map, double c_phys,
                               const CellSet& cells = std::nullopt);

/// Shots taken from the final flag measurement: each survives with p_keep and then reads |psi|^2 of the
/// post-selected state; discarded shots are recorded with a_s = 1.
ShotCounts sample_with_postselection(const Statevector& kept_state, double p_keep, const RegisterLayout& layout,
                                     std::uint64_t shots, Rng& rng, const DiscreteSampler* sampler = nullptr);

using GridTransform = std::function<std::array<double, 2>(double, double)>;

/// (x, y) -> (x, y) max(r - 1, 0) / r with r = max(|x/a|, |y/b|); the origin maps to itself.
GridTransform rect_grid_transform(double a, double b);

struct TomographyBasis {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::array<int, 2> degree{};
  /// values[j][i]: basis function j at site i = x + nx*y.
  std::vector<std::vector<double>> values;
  Eigen::MatrixXd gram;

  std::size_t size() const { return values.size(); }
  std::size_t points() const { return nx * ny; }
  double eval(const Eigen::VectorXd& a, std::size_t i) const;
};

struct BasisGeometry {
  /// Site coordinates are (x + 1/2 - cx, y + 1/2 - cy) before the transform.
  double cx = 0.0;
  double cy = 0.0;
  GridTransform transform;
};

/// Tensor-product Chebyshev polynomials T_a(x) T_b(y), a <= degree[0], b <= degree[1], index a + (degree[0]+1) b,
/// evaluated on (transformed) site coordinates rescaled to [-1, 1] per dimension.
TomographyBasis chebyshev_basis(std::size_t nx, std::size_t ny, std::array<int, 2> degree,
                                const std::optional<BasisGeometry>& geometry = std::nullopt);

struct TomographyProblem {
  unsigned num_qubits = 0;
  /// Z-basis outcome frequencies or counts keyed by lattice index.
  std::map<std::uint64_t, double> z;
  /// x[k]: outcomes after an X-basis measurement of qubit k (empty when not measured).
  std::vector<std::map<std::uint64_t, double>> x;

  bool has_x() const;
};

/// Frequencies from exact probabilities or counts; entries below `floor` are dropped.
std::map<std::uint64_t, double> normalize_counts(const std::map<std::uint64_t, double>& counts, double floor = 0.0);

double norm_w(const Eigen::VectorXd& a, const TomographyBasis& basis);

/// Negative log-likelihood over observed outcomes; +infinity when f_a vanishes at an observed point.
double kl_loss(const Eigen::VectorXd& a, const TomographyProblem& problem, const TomographyBasis& basis);
/// Throws std::domain_error naming the singular point when f_a vanishes at an observed outcome.
Eigen::VectorXd kl_gradient(const Eigen::VectorXd& a, const TomographyProblem& problem, const TomographyBasis& basis);

/// Partner of outcome i under an X-basis measurement of qubit k is i XOR 2^k; the sign is + when bit k of i is 0.
double xbasis_loss(const Eigen::VectorXd& a, const TomographyProblem& problem, const TomographyBasis& basis,
                   unsigned k);
Eigen::VectorXd xbasis_gradient(const Eigen::VectorXd& a, const TomographyProblem& problem,
                                const TomographyBasis& basis, unsigned k);

double total_loss(const Eigen::VectorXd& a, const TomographyProblem& problem, const TomographyBasis& basis);
Eigen::VectorXd total_gradient(const Eigen::VectorXd& a, const TomographyProblem& problem,
                               const TomographyBasis& basis);

struct FitOptions {
  std::size_t max_iterations = 2000;
  double step_size = 0.5;
  double tolerance = 1e-12;
  std::size_t starts = 8;
  std::uint64_t seed = 0;
};

struct TomographyFit {
  Eigen::VectorXd a;
  double loss = 0.0;
  std::size_t iterations = 0;
  double constraint_residual = 0.0;
  std::size_t best_start = 0;
  std::vector<std::vector<double>> traces;
};

/// Projected gradient descent with backtracking; start 0 is the least-squares fit of sqrt(P), then random starts.
TomographyFit fit(const TomographyProblem& problem, const TomographyBasis& basis, const FitOptions& options = {});

struct SymmetryAxis {
  /// Horizontal axis between rows: y = position (cell-centre units, e.g. ny/2 - 1/2).
  double position = 0.0;
  /// Per variable: true when the field is antisymmetric about the axis.
  std::vector<bool> antisymmetric{false, false, true};
};

/// Signs antisymmetric fields + above the axis and - below; symmetric fields take +.
FieldState sign_restore_symmetric(const FieldState& abs_fields, const SymmetryAxis& axis);

}  // namespace qlbm
