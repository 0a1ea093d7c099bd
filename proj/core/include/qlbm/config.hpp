#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "qlbm/classical_lbm.hpp"

namespace qlbm {

enum class ReadoutMode { Statevector, Shots, ShotsTomography };

std::string_view to_string(ReadoutMode mode);
ReadoutMode readout_mode_from_string(std::string_view text);

/// Experiment tags accepted by the CLI and the config file.
inline constexpr std::array<std::string_view, 5> kExperiments = {"acoustics-pulse", "energy-dissipation",
                                                                 "energy-histogram", "airfoil", "verify"};

struct GridConfig {
  std::size_t nx = 128;
  std::size_t ny = 128;
};

struct ModelConfig {
  std::string lattice = "D2Q17";
  double tau = 0.55;
  double rho0 = 1.0;
  std::array<double, 2> u0{};
  /// Gaussian pulse exponent in physical units: rho(r, 0) = exp(-beta r^2) / c_s^2.
  double beta = 15.0;
  /// Speed of sound in the energy observable, in lattice units.
  double c_phys = 1.0;
  std::array<double, 2> inlet_u{0.02, 0.0};
};

struct SamplingConfig {
  std::uint64_t shots = 3146;
  std::size_t repetitions = 1;
  /// Shot counts compared by the dissipation and shot-scaling runs.
  std::vector<std::uint64_t> shot_levels;
  /// Independent seeds per shot level.
  std::size_t seeds = 10;
};

struct ReadoutConfig {
  std::string mode = "statevector";
  std::array<int, 2> tomography_degree{2, 2};
  std::size_t tomography_starts = 4;
};

struct PulseConfig {
  /// Side of the square physical domain.
  double length = 3.0;
  /// Physical sound speed; dt = c_s dx / wave_speed.
  double wave_speed = 1.0;
  /// Pulse centre in physical coordinates (domain centre is the origin).
  std::array<double, 2> center{};
  std::size_t snapshots = 9;
  /// "all" or "lower-left" (the x < nx/2, y < ny/2 quadrant).
  std::string region = "all";
};

struct AirfoilConfig {
  Rect object{2, 3, 4, 5};
  /// Tau1 steps used for the classical steady state.
  std::size_t steady_steps = 4000;
  /// Two-level OSSLBM plan instead of Tau1.
  bool two_level = false;
};

struct VerifyConfig {
  std::vector<std::size_t> sizes{8, 16};
  std::vector<double> taus{1.0, 0.8};
  /// Random field states per (tau, boundary, size, mask) cell.
  std::size_t trials = 100;
  double amplitude = 0.05;
  /// Phase-ladder error injected for the sensitivity row.
  double ladder_perturbation = 0.05;
};

struct ExperimentConfig {
  std::string experiment = "acoustics-pulse";
  GridConfig grid;
  ModelConfig model;
  std::size_t steps = 59;
  SamplingConfig sampling;
  std::uint64_t seed = 1;
  ReadoutConfig readout;
  std::string output_dir = "out";
  PulseConfig pulse;
  AirfoilConfig airfoil;
  VerifyConfig verify;

  ReadoutMode mode() const { return readout_mode_from_string(readout.mode); }
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Defaults of the published setup for each experiment tag.
ExperimentConfig default_config(std::string_view experiment);

/// Throws std::invalid_argument naming the offending field.
void validate(const ExperimentConfig& c);

/// Overlays `patch` on the defaults of `experiment`; unknown keys and type mismatches are errors.
ExperimentConfig merge_config(std::string_view experiment, const nlohmann::json& patch);

/// Reads a JSON config file and merges it over the defaults of `experiment`.
ExperimentConfig load_config(std::string_view experiment, const std::filesystem::path& path);

}  // namespace qlbm
