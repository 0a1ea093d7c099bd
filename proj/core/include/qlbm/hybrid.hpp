#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlbm/classical_lbm.hpp"
#include "qlbm/config.hpp"
#include "qlbm/lattice.hpp"
#include "qlbm/qlbm.hpp"
#include "qlbm/readout.hpp"

namespace qlbm {

/// Column headers of every emitted table.
namespace schema {
inline const std::vector<std::string> kAcousticsError = {"step", "time", "rel_l2_error", "p_keep", "ledger_audit"};
inline const std::vector<std::string> kAcousticsProfile = {"step", "time", "x", "p_numeric", "p_analytic"};
inline const std::vector<std::string> kEnergyDissipation = {"step", "time", "statevector", "p_keep"};
inline const std::vector<std::string> kEnergySamples = {"step", "shots", "seed", "normalized_energy", "stderr", "kept"};
inline const std::vector<std::string> kEnergyRms = {"shots", "seeds", "rms_deviation", "rms_spread"};
inline const std::vector<std::string> kEnergyRepetitions = {"repetition", "seed", "mean", "stderr", "kept", "shots"};
inline const std::vector<std::string> kEnergyHistogram = {"bin", "lower", "upper", "count"};
inline const std::vector<std::string> kShotScaling = {"shots", "seeds", "mean_stderr", "std_of_means"};
inline const std::vector<std::string> kAirfoilMse = {"step",     "mode",     "mse",     "p_keep",
                                                     "shots",    "kept",     "kept_rho", "kept_ux",
                                                     "kept_uy"};
inline const std::vector<std::string> kAirfoilFields = {"step", "mode", "x", "y", "rho", "ux", "uy"};
inline const std::vector<std::string> kAirfoilSteady = {"x", "y", "rho", "ux", "uy"};
inline const std::vector<std::string> kVerify = {"case", "model", "tau", "boundary", "nx", "mask",
                                                 "trials", "max_abs_deviation", "mean_p_keep"};
}  // namespace schema

/// Shortest round-trip decimal text of a double.
std::string format_number(double v);

struct Table {
  std::string name;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Table(std::string name, std::vector<std::string> header);
  /// Throws std::invalid_argument when the row width differs from the header.
  void add(std::vector<std::string> row);
  std::string to_csv() const;
};

template <typename T>
std::string cell(T v) {
  if constexpr (std::is_floating_point_v<T>) {
    return format_number(static_cast<double>(v));
  } else if constexpr (std::is_integral_v<T>) {
    return std::to_string(v);
  } else {
    return std::string(v);
  }
}

struct OutputRecord {
  std::string experiment;
  std::vector<Table> tables;
  nlohmann::json summary = nlohmann::json::object();

  const Table& table(std::string_view name) const;
};

/// Column `name` of `t` parsed as doubles.
std::vector<double> column(const Table& t, std::string_view name);

/// Pulse experiments share this lattice, model and geometry.
struct PulseSetup {
  PhysicsModel model;
  LatticeConfig lattice;
  BoundarySpec bc;
  PulseGrid grid;
  double dx = 1.0;
  double dt = 1.0;
};

PulseSetup make_pulse_setup(const ExperimentConfig& cfg);

/// rho = exp(-beta r^2) / c_s^2, zero velocity; the second level holds the backward step (rho, c_s^2 grad rho).
FieldState pulse_initial_state(const PulseSetup& setup, const ExperimentConfig& cfg);

/// Sites of the configured energy region (std::nullopt for the whole lattice).
CellSet pulse_region(const ExperimentConfig& cfg);

/// Snapshot steps 0 = s_0 < ... <= steps, evenly spaced and rounded.
std::vector<std::size_t> snapshot_steps(std::size_t steps, std::size_t snapshots);

/// Maximum of | |amp| - scale |field| | over the field slots of every level.
double ledger_audit(const Statevector& psi, const EncodingMap& map, const FieldState& fields);

struct AirfoilSetup {
  PhysicsModel model;
  LatticeConfig lattice;
  BoundarySpec bc;
  ObjectMask mask;
  StepCircuitPlan plan;
  std::size_t nx = 0;
  std::size_t ny = 0;
};

AirfoilSetup make_airfoil_setup(const ExperimentConfig& cfg);

/// rho' = 0 and u = inlet velocity everywhere, boundaries applied, object cells zeroed.
FieldState airfoil_initial_state(const AirfoilSetup& setup);

/// Classical run from the initial state; `residual` receives the last-step max-abs change.
FieldState airfoil_steady_state(const AirfoilSetup& setup, std::size_t steps, double* residual = nullptr);

/// Mean squared error over rho, u_x, u_y of level 1 and all sites.
double field_mse(const FieldState& a, const FieldState& b);

struct HybridStepOptions {
  ReadoutMode mode = ReadoutMode::Statevector;
  std::uint64_t shots = 30000;
  std::uint64_t seed = 0;
  std::array<int, 2> tomography_degree{2, 2};
  std::size_t tomography_starts = 4;
};

struct StepDiagnostics {
  double p_keep = 1.0;
  std::uint64_t shots = 0;
  std::uint64_t kept = 0;
  /// Kept shots whose substate reads rho, u_x, u_y.
  std::array<std::uint64_t, 3> kept_per_field{};
  double residual_probability = 0.0;
  double ledger_audit = 0.0;
  /// True when the inputs were identically zero and no circuit ran.
  bool zero_state = false;
};

/// One hybrid step: products computed classically, encode, circuit, readout, field renormalization,
/// inlet reset and object re-zeroing.
std::pair<FieldState, StepDiagnostics> hybrid_airfoil_step(const FieldState& fields, const AirfoilSetup& setup,
                                                           const HybridStepOptions& options);

OutputRecord run_acoustics_pulse(const ExperimentConfig& cfg);
OutputRecord run_energy_dissipation(const ExperimentConfig& cfg);
OutputRecord run_energy_histogram(const ExperimentConfig& cfg);
OutputRecord run_airfoil(const ExperimentConfig& cfg);
OutputRecord verify_equivalence(const ExperimentConfig& cfg);

/// Dispatches on cfg.experiment after validation.
OutputRecord run_experiment(const ExperimentConfig& cfg);

/// Library, dependency and RNG versions recorded in the manifest.
nlohmann::json version_info();

nlohmann::json make_manifest(const OutputRecord& record, const ExperimentConfig& cfg);

/// Writes one <name>.csv per table and manifest.json into `dir` (created when missing).
void write_outputs(const OutputRecord& record, const ExperimentConfig& cfg, const std::filesystem::path& dir);

}  // namespace qlbm
