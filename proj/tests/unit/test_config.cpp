#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "qlbm/config.hpp"

using namespace qlbm;
using nlohmann::json;

TEST_CASE("every experiment tag has valid defaults") {
  for (auto tag : kExperiments) {
    const auto c = default_config(tag);
    CHECK(c.experiment == tag);
    CHECK_NOTHROW(validate(c));
  }
  CHECK_THROWS_AS(default_config("cavity"), std::invalid_argument);
}

TEST_CASE("published setups") {
  const auto pulse = default_config("acoustics-pulse");
  CHECK(pulse.grid.nx == 128);
  CHECK(pulse.model.lattice == "D2Q17");
  CHECK(pulse.model.tau == 0.55);
  CHECK(pulse.model.beta == 15.0);

  const auto diss = default_config("energy-dissipation");
  CHECK(diss.sampling.shot_levels == std::vector<std::uint64_t>{16384, 131072});
  CHECK(diss.pulse.region == "lower-left");
  CHECK(diss.model.c_phys == doctest::Approx(1.0 / std::sqrt(3.0)));

  const auto hist = default_config("energy-histogram");
  CHECK(hist.sampling.shots == 3146);
  CHECK(hist.sampling.repetitions == 1000);
  CHECK(hist.sampling.shot_levels.size() == 4);

  const auto air = default_config("airfoil");
  CHECK(air.grid.nx == 8);
  CHECK(air.model.lattice == "D2Q9");
  CHECK(air.steps == 15);
  CHECK(air.sampling.shots == 30000);
  CHECK(air.airfoil.object.x0 == 2);
}

TEST_CASE("merge overlays nested sections") {
  const auto c = merge_config("airfoil", json::parse(R"({"grid": {"nx": 16}, "readout": {"mode": "shots"}, "steps": 4})"));
  CHECK(c.grid.nx == 16);
  CHECK(c.grid.ny == 8);
  CHECK(c.steps == 4);
  CHECK(c.mode() == ReadoutMode::Shots);
  CHECK(c.model.tau == 1.0);
}

TEST_CASE("merge rejects bad input") {
  auto bad = [](const char* text) { return merge_config("airfoil", json::parse(text)); };
  CHECK_THROWS_AS(bad(R"({"model": {"viscosity": 0.1}})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"steps": -3})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"steps": "ten"})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"grid": 8})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"grid": {"nx": 12}})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"model": {"tau": 0.5}})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"readout": {"mode": "tomography"}})"), std::invalid_argument);
  CHECK_THROWS_AS(bad(R"({"experiment": "verify"})"), std::invalid_argument);
  CHECK_NOTHROW(bad(R"({"experiment": "airfoil"})"));
}

TEST_CASE("JSON round trip") {
  auto c = default_config("energy-histogram");
  c.seed = 1234567890123ULL;
  c.readout.tomography_degree = {3, 1};
  const json j = c;
  CHECK(j.at("sampling").at("shots") == 3146);
  const auto back = j.get<ExperimentConfig>();
  CHECK(json(back) == j);
  CHECK(merge_config("energy-histogram", j).seed == c.seed);
}

TEST_CASE("readout modes") {
  for (auto m : {ReadoutMode::Statevector, ReadoutMode::Shots, ReadoutMode::ShotsTomography})
    CHECK(readout_mode_from_string(to_string(m)) == m);
  CHECK(to_string(ReadoutMode::ShotsTomography) == "shots+tomography");
  CHECK_THROWS_AS(readout_mode_from_string("noisy"), std::invalid_argument);
}

TEST_CASE("config files load from disk") {
  const auto c = load_config("airfoil", std::string(QLBM_CONFIG_DIR) + "/airfoil_short.json");
  CHECK(c.steps == 3);
  CHECK_THROWS_AS(load_config("airfoil", std::string(QLBM_CONFIG_DIR) + "/bad_unknown_key.json"), std::invalid_argument);
  CHECK_THROWS_AS(load_config("airfoil", "/nonexistent/config.json"), std::invalid_argument);
}

TEST_CASE("shipped experiment configs load under their own subcommand") {
  for (auto tag : kExperiments) {
    const auto c = load_config(tag, std::string(QLBM_EXAMPLE_CONFIG_DIR) + "/" + std::string(tag) + ".json");
    CHECK(c.experiment == tag);
  }
}
