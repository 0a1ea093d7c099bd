#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace qlbm {

enum class LatticeName { D2Q9, D2Q17, D3Q27 };

std::string_view to_string(LatticeName name);
LatticeName lattice_name_from_string(std::string_view text);

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  friend bool operator==(const Rational&, const Rational&) = default;
};

/// Discrete velocity set. Components beyond `dim` are zero.
struct LatticeConfig {
  LatticeName name = LatticeName::D2Q9;
  int dim = 2;
  std::vector<std::array<int, 3>> velocities;
  std::vector<Rational> weights;
  double c_s = 0.0;
  std::vector<int> level_of;

  std::size_t size() const { return velocities.size(); }
  double weight(std::size_t a) const { return weights[a].value(); }
  /// Indices carrying the given time-level tag, in table order.
  std::vector<std::size_t> level_indices(int level) const;
  /// Index with the opposite velocity on the same time-level.
  std::size_t opposite(std::size_t a) const;
  bool two_levels() const;
};

LatticeConfig standard_config(LatticeName name);
LatticeConfig standard_config(std::string_view name);

struct LowMachAthermal {};
struct IncompressibleAthermal {
  double rho0 = 1.0;
};
struct LinearAcoustics {
  double rho0 = 1.0;
  std::array<double, 3> u0{};
};
/// Shallow-water equilibria are written with the unit lattice speed e = 1.
struct ShallowWater {
  double g = 1.0;
};
struct LinearShallowWater {
  double g = 1.0;
  double h0 = 1.0;
  std::array<double, 3> u0{};
};

using ModelKind =
    std::variant<LowMachAthermal, IncompressibleAthermal, LinearAcoustics, ShallowWater, LinearShallowWater>;

struct PhysicsModel {
  ModelKind kind;
  double tau = 1.0;
};

/// Throws std::invalid_argument when tau or the base state is inadmissible.
void validate(const PhysicsModel& model);
std::string model_name(const PhysicsModel& model);
/// True for models whose equilibrium is affine in (V0, V1).
bool is_linear_model(const PhysicsModel& model);

/// Number of macroscopic inputs (V0 plus dim momentum components).
std::size_t model_arity(const LatticeConfig& config);

/// F_alpha(V0, V1) for every table entry. Level-2 entries of D2Q17 repeat their level-1 mirrors.
std::vector<double> equilibrium(const PhysicsModel& model, const LatticeConfig& config,
                                std::span<const double> site_values);

struct Moments {
  double v0 = 0.0;
  std::array<double, 3> v1{};
};

/// Zeroth and first moments over the level-1 velocities.
Moments moments(std::span<const double> f, const LatticeConfig& config);

double viscosity(double tau, double dx = 1.0, double dt = 1.0);

/// {V0, u1, u2, u1^2, u2^2, u1 u2}
std::array<double, 6> nonlinear_extend(double v0, std::array<double, 2> u);

/// Extended input vector on which the model's equilibrium is linear:
/// Incompressible uses V1 products, LowMach uses V1 products divided by V0.
std::array<double, 6> extended_inputs(const PhysicsModel& model, double v0, std::array<double, 2> v1);

class FieldState {
 public:
  FieldState() = default;
  FieldState(std::size_t nx, std::size_t ny, std::size_t num_vars = 3, std::size_t levels = 1);

  std::size_t nx() const { return nx_; }
  std::size_t ny() const { return ny_; }
  std::size_t sites() const { return nx_ * ny_; }
  std::size_t num_vars() const { return num_vars_; }
  std::size_t levels() const { return levels_; }
  bool nonlinear() const { return num_vars_ == 6; }

  std::size_t site(std::size_t x, std::size_t y) const { return x + nx_ * y; }

  double& at(std::size_t level, std::size_t var, std::size_t x, std::size_t y) {
    return grids_[level * num_vars_ + var][site(x, y)];
  }
  double at(std::size_t level, std::size_t var, std::size_t x, std::size_t y) const {
    return grids_[level * num_vars_ + var][site(x, y)];
  }
  std::vector<double>& grid(std::size_t level, std::size_t var) { return grids_[level * num_vars_ + var]; }
  const std::vector<double>& grid(std::size_t level, std::size_t var) const {
    return grids_[level * num_vars_ + var];
  }

  /// Recomputes the quadratic grids from V1 on every level (nonlinear states only).
  void refresh_products();
  FieldState with_products() const;
  FieldState linear_part() const;
  FieldState with_levels(std::size_t levels) const;

 private:
  std::size_t nx_ = 0;
  std::size_t ny_ = 0;
  std::size_t num_vars_ = 0;
  std::size_t levels_ = 0;
  std::vector<std::vector<double>> grids_;
};

bool is_power_of_two(std::size_t n);
double max_abs_difference(const FieldState& a, const FieldState& b, std::size_t vars = 3);

/// Per-site distributions for every time-level.
struct DistributionState {
  std::size_t nx = 0;
  std::size_t ny = 0;
  std::size_t m = 0;
  std::vector<std::vector<double>> levels;  // [level][site * m + alpha]
};

DistributionState equilibrium_state(const PhysicsModel& model, const LatticeConfig& config,
                                    const FieldState& fields);

}  // namespace qlbm
