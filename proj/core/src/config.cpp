#include "qlbm/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>

#include "qlbm/lattice.hpp"

namespace qlbm {

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(Rect, x0, y0, x1, y1)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(GridConfig, nx, ny)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ModelConfig, lattice, tau, rho0, u0, beta, c_phys, inlet_u)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(SamplingConfig, shots, repetitions, shot_levels, seeds)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(ReadoutConfig, mode, tomography_degree, tomography_starts)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(PulseConfig, length, wave_speed, center, snapshots, region)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(AirfoilConfig, object, steady_steps, two_level)
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(VerifyConfig, sizes, taus, trials, amplitude, ladder_perturbation)

void to_json(nlohmann::json& j, const ExperimentConfig& c) {
  j = nlohmann::json{{"experiment", c.experiment},
                     {"grid", c.grid},
                     {"model", c.model},
                     {"steps", c.steps},
                     {"sampling", c.sampling},
                     {"seed", c.seed},
                     {"readout", c.readout},
                     {"output_dir", c.output_dir},
                     {"pulse", c.pulse},
                     {"airfoil", c.airfoil},
                     {"verify", c.verify}};
}

void from_json(const nlohmann::json& j, ExperimentConfig& c) {
  j.at("experiment").get_to(c.experiment);
  j.at("grid").get_to(c.grid);
  j.at("model").get_to(c.model);
  j.at("steps").get_to(c.steps);
  j.at("sampling").get_to(c.sampling);
  j.at("seed").get_to(c.seed);
  j.at("readout").get_to(c.readout);
  j.at("output_dir").get_to(c.output_dir);
  j.at("pulse").get_to(c.pulse);
  j.at("airfoil").get_to(c.airfoil);
  j.at("verify").get_to(c.verify);
}

std::string_view to_string(ReadoutMode mode) {
  switch (mode) {
    case ReadoutMode::Statevector: return "statevector";
    case ReadoutMode::Shots: return "shots";
    case ReadoutMode::ShotsTomography: return "shots+tomography";
  }
  return "statevector";
}

ReadoutMode readout_mode_from_string(std::string_view text) {
  if (text == "statevector") return ReadoutMode::Statevector;
  if (text == "shots") return ReadoutMode::Shots;
  if (text == "shots+tomography") return ReadoutMode::ShotsTomography;
  throw std::invalid_argument("unknown readout mode '" + std::string(text) + "'");
}

ExperimentConfig default_config(std::string_view experiment) {
  if (std::find(kExperiments.begin(), kExperiments.end(), experiment) == kExperiments.end())
    throw std::invalid_argument("unknown experiment '" + std::string(experiment) + "'");
  ExperimentConfig c;
  c.experiment = std::string(experiment);
  if (experiment == "acoustics-pulse") {
    c.steps = 59;
  } else if (experiment == "energy-dissipation") {
    c.model.c_phys = 1.0 / std::sqrt(3.0);
    c.steps = 100;
    c.pulse.center = {-0.75, -0.75};
    c.pulse.region = "lower-left";
    c.sampling.shot_levels = {16384, 131072};
    c.sampling.seeds = 10;
  } else if (experiment == "energy-histogram") {
    c.grid = {32, 32};
    c.steps = 4;
    c.sampling.shots = 3146;
    c.sampling.repetitions = 1000;
    c.sampling.shot_levels = {1024, 2048, 4096, 8192};
    c.sampling.seeds = 10;
  } else if (experiment == "airfoil") {
    c.grid = {8, 8};
    c.model.lattice = "D2Q9";
    c.model.tau = 1.0;
    c.steps = 15;
    c.sampling.shots = 30000;
  } else {
    c.grid = {16, 16};
    c.steps = 1;
  }
  return c;
}

void validate(const ExperimentConfig& c) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("config: " + what); };
  if (std::find(kExperiments.begin(), kExperiments.end(), c.experiment) == kExperiments.end())
    fail("unknown experiment '" + c.experiment + "'");
  if (!is_power_of_two(c.grid.nx) || !is_power_of_two(c.grid.ny) || c.grid.nx < 4 || c.grid.ny < 4)
    fail("grid.nx and grid.ny must be powers of two >= 4");
  lattice_name_from_string(c.model.lattice);
  if (!(c.model.tau > 0.5)) fail("model.tau must exceed 1/2");
  if (!(c.model.rho0 > 0.0)) fail("model.rho0 must be positive");
  if (!(c.model.c_phys > 0.0)) fail("model.c_phys must be positive");
  if (!(c.model.beta > 0.0)) fail("model.beta must be positive");
  readout_mode_from_string(c.readout.mode);
  if (c.readout.tomography_degree[0] < 0 || c.readout.tomography_degree[1] < 0)
    fail("readout.tomography_degree must be non-negative");
  if (c.sampling.shots < 1) fail("sampling.shots must be >= 1");
  if (c.sampling.repetitions < 1) fail("sampling.repetitions must be >= 1");
  if (c.sampling.seeds < 1) fail("sampling.seeds must be >= 1");
  for (auto s : c.sampling.shot_levels)
    if (s < 1) fail("sampling.shot_levels entries must be >= 1");
  if (!(c.pulse.length > 0.0) || !(c.pulse.wave_speed > 0.0)) fail("pulse.length and pulse.wave_speed must be positive");
  if (c.pulse.snapshots < 1) fail("pulse.snapshots must be >= 1");
  if (c.pulse.region != "all" && c.pulse.region != "lower-left") fail("pulse.region must be 'all' or 'lower-left'");
  for (auto n : c.verify.sizes)
    if (!is_power_of_two(n) || n < 8) fail("verify.sizes entries must be powers of two >= 8");
  for (auto t : c.verify.taus)
    if (!(t > 0.5 && t < 2.0)) fail("verify.taus entries must lie in (1/2, 2)");
  if (c.output_dir.empty()) fail("output_dir must not be empty");
}

namespace {

void check_keys(const nlohmann::json& base, const nlohmann::json& patch, const std::string& path) {
  if (!patch.is_object()) throw std::invalid_argument("config: '" + path + "' must be an object");
  for (const auto& [key, value] : patch.items()) {
    const std::string name = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw std::invalid_argument("config: unknown key '" + name + "'");
    const auto& b = base.at(key);
    if (b.is_object()) {
      check_keys(b, value, name);
    } else if (b.is_number_unsigned()) {
      if (!value.is_number_unsigned()) throw std::invalid_argument("config: '" + name + "' must be a non-negative integer");
    } else if (b.is_number()) {
      if (!value.is_number()) throw std::invalid_argument("config: '" + name + "' must be a number");
    } else if (b.is_string()) {
      if (!value.is_string()) throw std::invalid_argument("config: '" + name + "' must be a string");
    } else if (b.is_boolean()) {
      if (!value.is_boolean()) throw std::invalid_argument("config: '" + name + "' must be a boolean");
    } else if (b.is_array()) {
      if (!value.is_array()) throw std::invalid_argument("config: '" + name + "' must be an array");
    }
  }
}

}  // namespace

ExperimentConfig merge_config(std::string_view experiment, const nlohmann::json& patch) {
  nlohmann::json base = default_config(experiment);
  check_keys(base, patch, "");
  if (patch.contains("experiment") && patch.at("experiment") != std::string(experiment))
    throw std::invalid_argument("config: experiment '" + patch.at("experiment").get<std::string>() +
                                "' does not match the subcommand '" + std::string(experiment) + "'");
  base.merge_patch(patch);
  ExperimentConfig c;
  try {
    c = base.get<ExperimentConfig>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  validate(c);
  return c;
}

ExperimentConfig load_config(std::string_view experiment, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("config: cannot open " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("config: " + path.string() + ": " + e.what());
  }
  return merge_config(experiment, j);
}

}  // namespace qlbm
