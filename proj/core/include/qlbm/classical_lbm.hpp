#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qlbm/lattice.hpp"

namespace qlbm {

enum class EdgeKind { Periodic, DirichletZero, ZeroGradient, Inlet };

struct EdgeCondition {
  EdgeKind kind = EdgeKind::Periodic;
  /// Prescribed V1 for Inlet edges.
  std::array<double, 2> inlet{};
  /// Bit v set when the condition applies to variable v (V0, V1x, V1y).
  std::uint32_t applies_to = 0b111;

  bool bounded() const { return kind != EdgeKind::Periodic; }
  bool copies_inner() const { return kind == EdgeKind::ZeroGradient || kind == EdgeKind::Inlet; }
};

enum class Edge { Left = 0, Right = 1, Bottom = 2, Top = 3 };

struct BoundarySpec {
  /// Indexed by Edge: left, right, bottom, top.
  std::array<EdgeCondition, 4> edges{};

  const EdgeCondition& operator[](Edge e) const { return edges[static_cast<int>(e)]; }
  EdgeCondition& operator[](Edge e) { return edges[static_cast<int>(e)]; }

  bool x_bounded() const { return edges[0].bounded(); }
  bool y_bounded() const { return edges[2].bounded(); }
  bool all_periodic() const { return !x_bounded() && !y_bounded(); }

  static BoundarySpec periodic() { return {}; }
  /// Throws std::invalid_argument on unpaired periodic edges or non-finite inlet data.
  void validate(std::size_t nx, std::size_t ny) const;
};

EdgeCondition edge(EdgeKind kind, std::array<double, 2> inlet = {});

/// Half-open rectangle [x0, x1) x [y0, y1) of cells.
struct Rect {
  int x0 = 0;
  int y0 = 0;
  int x1 = 0;
  int y1 = 0;
};

struct ObjectMask {
  std::vector<Rect> rects;

  bool empty() const { return rects.empty(); }
  void validate(std::size_t nx, std::size_t ny) const;
  /// Site indices of the outer boundary layer and the next layer inside each rectangle.
  std::vector<std::size_t> two_layer_cells(std::size_t nx, std::size_t ny) const;
  std::vector<std::size_t> interior_cells(std::size_t nx, std::size_t ny) const;
};

struct SolverState {
  FieldState fields;
  std::size_t step = 0;
  double dx = 1.0;
  double dt = 1.0;
};

/// Site indices of the two-cell layers next to bounded edges.
std::vector<bool> boundary_layer_flags(std::size_t nx, std::size_t ny, const BoundarySpec& bc);

SolverState tau1_step(const SolverState& state, const PhysicsModel& model, const LatticeConfig& config,
                      const BoundarySpec& bc, const ObjectMask& mask);

SolverState osslbm_step(const SolverState& state, const PhysicsModel& model, const LatticeConfig& config,
                        const BoundarySpec& bc, const ObjectMask& mask);

/// Picks tau1_step for one-level states and osslbm_step for two-level states.
SolverState lbm_step(const SolverState& state, const PhysicsModel& model, const LatticeConfig& config,
                     const BoundarySpec& bc, const ObjectMask& mask);

FieldState apply_boundary(FieldState fields, const BoundarySpec& bc);
FieldState apply_mask(FieldState fields, const ObjectMask& mask);
FieldState apply_mask_full(FieldState fields, const ObjectMask& mask);

std::vector<SolverState> run_simulation(const SolverState& state, const PhysicsModel& model,
                                        const LatticeConfig& config, const BoundarySpec& bc,
                                        const ObjectMask& mask, std::size_t steps);

/// Cell-centred grid geometry for the analytic pulse: x_i = (i + 1/2 - nx/2) dx - cx.
struct PulseGrid {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double dx = 1.0;
  double center_x = 0.0;
  double center_y = 0.0;
  double x(std::size_t i) const { return (static_cast<double>(i) + 0.5 - 0.5 * static_cast<double>(nx)) * dx - center_x; }
  double y(std::size_t j) const { return (static_cast<double>(j) + 0.5 - 0.5 * static_cast<double>(ny)) * dx - center_y; }
};

/// Inviscid 2D linear-acoustics pressure for p(r, 0) = exp(-beta r^2), zero initial velocity.
/// Evaluates p(r,t) = int_0^inf k F(k) cos(c k t) J0(k r) dk with F(k) = exp(-k^2/(4 beta)) / (2 beta).
/// Throws std::runtime_error when the adaptive quadrature does not reach relative tolerance 1e-8.
std::vector<double> gaussian_pulse_analytic(double beta, double t, const PulseGrid& grid, double c);
double gaussian_pulse_radial(double beta, double t, double r, double c);

}  // namespace qlbm
