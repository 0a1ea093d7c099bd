#include "qlbm/hybrid.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "qlbm/simulator.hpp"

#ifndef QLBM_VERSION
#define QLBM_VERSION "0.0.0"
#endif

namespace qlbm {

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, end);
}

Table::Table(std::string n, std::vector<std::string> h) : name(std::move(n)), header(std::move(h)) {}

void Table::add(std::vector<std::string> row) {
  if (row.size() != header.size())
    throw std::invalid_argument("table " + name + ": row has " + std::to_string(row.size()) + " cells, header has " +
                                std::to_string(header.size()));
  rows.push_back(std::move(row));
}

std::string Table::to_csv() const {
  std::string out;
  auto line = [&out](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out;
}

const Table& OutputRecord::table(std::string_view n) const {
  for (const auto& t : tables)
    if (t.name == n) return t;
  throw std::out_of_range("no table named " + std::string(n));
}

std::vector<double> column(const Table& t, std::string_view n) {
  const auto it = std::find(t.header.begin(), t.header.end(), n);
  if (it == t.header.end()) throw std::out_of_range("table " + t.name + " has no column " + std::string(n));
  const auto k = static_cast<std::size_t>(it - t.header.begin());
  std::vector<double> out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows) out.push_back(std::stod(r[k]));
  return out;
}

namespace {

double cs2_of(const LatticeConfig& lattice) { return lattice.c_s * lattice.c_s; }

nlohmann::json circuit_summary(const StepCircuitPlan& plan) {
  const auto d = validate(plan.full);
  nlohmann::json blocks = nlohmann::json::object();
  for (const auto& [label, counts] : d.per_block)
    blocks[label] = {{"gates", counts.gates}, {"cx_estimate", counts.cx_estimate}, {"measurements", counts.measurements}};
  return {{"qubits", plan.layout.total()},
          {"gates", d.total.gates},
          {"cx_estimate", d.total.cx_estimate},
          {"blocks", blocks}};
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_std(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void require_statevector(const ExperimentConfig& cfg) {
  if (cfg.mode() != ReadoutMode::Statevector)
    throw std::invalid_argument(cfg.experiment + " supports only the statevector readout mode");
}

}  // namespace

PulseSetup make_pulse_setup(const ExperimentConfig& cfg) {
  PulseSetup s;
  s.lattice = standard_config(cfg.model.lattice);
  if (s.lattice.dim != 2) throw std::invalid_argument("pulse experiments need a 2D lattice");
  s.model = {LinearAcoustics{cfg.model.rho0, {cfg.model.u0[0], cfg.model.u0[1], 0.0}}, cfg.model.tau};
  validate(s.model);
  if (!s.lattice.two_levels() && cfg.model.tau != 1.0)
    throw std::invalid_argument("one-level lattices need tau = 1; use D2Q17 for other tau");
  s.bc = BoundarySpec::periodic();
  s.dx = cfg.pulse.length / static_cast<double>(cfg.grid.nx);
  s.dt = s.lattice.c_s * s.dx / cfg.pulse.wave_speed;
  s.grid = {cfg.grid.nx, cfg.grid.ny, s.dx, cfg.pulse.center[0], cfg.pulse.center[1]};
  return s;
}

FieldState pulse_initial_state(const PulseSetup& setup, const ExperimentConfig& cfg) {
  const std::size_t nx = cfg.grid.nx, ny = cfg.grid.ny;
  const std::size_t levels = setup.lattice.two_levels() ? 2 : 1;
  const double cs2 = cs2_of(setup.lattice);
  FieldState f(nx, ny, 3, levels);
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      const double r2 = setup.grid.x(x) * setup.grid.x(x) + setup.grid.y(y) * setup.grid.y(y);
      const double rho = std::exp(-cfg.model.beta * r2) / cs2;
      for (std::size_t l = 0; l < levels; ++l) f.at(l, 0, x, y) = rho;
    }
  if (levels == 2) {
    for (std::size_t y = 0; y < ny; ++y)
      for (std::size_t x = 0; x < nx; ++x) {
        f.at(1, 1, x, y) = 0.5 * cs2 * (f.at(0, 0, (x + 1) % nx, y) - f.at(0, 0, (x + nx - 1) % nx, y));
        f.at(1, 2, x, y) = 0.5 * cs2 * (f.at(0, 0, x, (y + 1) % ny) - f.at(0, 0, x, (y + ny - 1) % ny));
      }
  }
  return f;
}

CellSet pulse_region(const ExperimentConfig& cfg) {
  if (cfg.pulse.region == "all") return std::nullopt;
  std::vector<std::size_t> cells;
  for (std::size_t y = 0; y < cfg.grid.ny / 2; ++y)
    for (std::size_t x = 0; x < cfg.grid.nx / 2; ++x) cells.push_back(x + cfg.grid.nx * y);
  return cells;
}

std::vector<std::size_t> snapshot_steps(std::size_t steps, std::size_t snapshots) {
  std::vector<std::size_t> out{0};
  for (std::size_t k = 1; k < snapshots; ++k) {
    const auto s = static_cast<std::size_t>(
        std::llround(static_cast<double>(k) * static_cast<double>(steps) / static_cast<double>(snapshots - 1)));
    if (s != out.back()) out.push_back(s);
  }
  return out;
}

double ledger_audit(const Statevector& psi, const EncodingMap& map, const FieldState& fields) {
  const double scale = map.scale();
  double worst = 0.0;
  for (std::size_t l = 0; l < fields.levels(); ++l)
    for (std::size_t v = 0; v < 3; ++v)
      for (std::size_t y = 0; y < map.ny; ++y)
        for (std::size_t x = 0; x < map.nx; ++x)
          worst = std::max(worst, std::abs(std::abs(psi[map.index(x, y, v, l)]) - scale * std::abs(fields.at(l, v, x, y))));
  return worst;
}

OutputRecord run_acoustics_pulse(const ExperimentConfig& cfg) {
  require_statevector(cfg);
  const auto setup = make_pulse_setup(cfg);
  const std::size_t nx = cfg.grid.nx, ny = cfg.grid.ny;
  const auto plan = build_step(setup.model, setup.lattice, setup.bc, {}, nx, ny, {CollisionMode::Linear, {}});
  const auto map0 = make_encoding_map(plan, setup.model, CollisionMode::Linear);
  const double cs2 = cs2_of(setup.lattice);
  const auto snaps = snapshot_steps(cfg.steps, cfg.pulse.snapshots);

  OutputRecord rec{cfg.experiment, {}, {}};
  Table err("acoustics_error", schema::kAcousticsError);
  Table prof("acoustics_profile", schema::kAcousticsProfile);
  const auto row0 = static_cast<std::size_t>(std::clamp<double>(
      std::floor(cfg.pulse.center[1] / setup.dx + 0.5 * static_cast<double>(ny)), 0.0, static_cast<double>(ny - 1)));

  std::vector<double> errors;
  auto snapshot = [&](std::size_t step, const FieldState& f, double p_keep, double audit) {
    const double t = static_cast<double>(step) * setup.dt;
    const auto exact = gaussian_pulse_analytic(cfg.model.beta, t, setup.grid, cfg.pulse.wave_speed);
    double num = 0.0, den = 0.0;
    const auto& rho = f.grid(0, 0);
    for (std::size_t i = 0; i < rho.size(); ++i) {
      const double d = cs2 * rho[i] - exact[i];
      num += d * d;
      den += exact[i] * exact[i];
    }
    const double e = std::sqrt(num / den);
    errors.push_back(e);
    err.add({cell(step), cell(t), cell(e), cell(p_keep), cell(audit)});
    for (std::size_t x = 0; x < nx; ++x)
      prof.add({cell(step), cell(t), cell(setup.grid.x(x) + setup.grid.center_x), cell(cs2 * f.at(0, 0, x, row0)),
                cell(exact[x + nx * row0])});
  };

  FieldState f = pulse_initial_state(setup, cfg);
  {
    auto enc = encode_fields(f, map0);
    f = decode_fields(enc.state, enc.map).fields;
    snapshot(0, f, 1.0, ledger_audit(enc.state, enc.map, f));
  }
  double min_keep = 1.0, max_keep = 0.0, worst_audit = 0.0;
  std::size_t next = 1;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    auto enc = encode_fields(f, map0);
    auto r = run_step(plan, std::move(enc.state), std::move(enc.map));
    f = decode_fields(r.state, r.map).fields;
    const double audit = ledger_audit(r.state, r.map, f);
    worst_audit = std::max(worst_audit, audit);
    min_keep = std::min(min_keep, r.p_keep);
    max_keep = std::max(max_keep, r.p_keep);
    if (next < snaps.size() && snaps[next] == step) {
      snapshot(step, f, r.p_keep, audit);
      ++next;
    }
  }

  rec.summary = {{"mean_rel_l2_error", mean_of(errors)},
                 {"max_rel_l2_error", *std::max_element(errors.begin(), errors.end())},
                 {"snapshots", errors.size()},
                 {"dx", setup.dx},
                 {"dt", setup.dt},
                 {"t_end", static_cast<double>(cfg.steps) * setup.dt},
                 {"p_keep_min", cfg.steps ? min_keep : 1.0},
                 {"p_keep_max", cfg.steps ? max_keep : 1.0},
                 {"ledger_audit_max", worst_audit},
                 {"circuit", circuit_summary(plan)}};
  rec.tables.push_back(std::move(err));
  rec.tables.push_back(std::move(prof));
  return rec;
}

OutputRecord run_energy_dissipation(const ExperimentConfig& cfg) {
  if (cfg.sampling.shot_levels.empty()) throw std::invalid_argument("energy-dissipation needs sampling.shot_levels");
  const auto setup = make_pulse_setup(cfg);
  const std::size_t nx = cfg.grid.nx, ny = cfg.grid.ny;
  const auto plan = build_step(setup.model, setup.lattice, setup.bc, {}, nx, ny, {CollisionMode::Linear, {}});
  const auto map0 = make_encoding_map(plan, setup.model, CollisionMode::Linear);
  const auto cells = pulse_region(cfg);
  const double c = cfg.model.c_phys;
  const auto& levels = cfg.sampling.shot_levels;
  const std::size_t seeds = cfg.sampling.seeds;

  OutputRecord rec{cfg.experiment, {}, {}};
  Table sv("energy_dissipation", schema::kEnergyDissipation);
  Table samples("energy_samples", schema::kEnergySamples);
  Table rms("energy_rms", schema::kEnergyRms);

  // sq_dev[level][seed] accumulates squared deviations from the statevector curve.
  std::vector<std::vector<double>> sq_dev(levels.size(), std::vector<double>(seeds, 0.0));
  double e0 = 0.0, worst_audit = 0.0;
  FieldState f = pulse_initial_state(setup, cfg);
  std::vector<double> curve;

  for (std::size_t step = 0; step <= cfg.steps; ++step) {
    auto enc = encode_fields(f, map0);
    Statevector psi;
    EncodingMap map;
    double p_keep = 1.0;
    if (step == 0) {
      psi = std::move(enc.state);
      map = std::move(enc.map);
    } else {
      auto r = run_step(plan, std::move(enc.state), std::move(enc.map));
      psi = std::move(r.state);
      map = std::move(r.map);
      p_keep = r.p_keep;
    }
    f = decode_fields(psi, map).fields;
    worst_audit = std::max(worst_audit, ledger_audit(psi, map, f));
    const double scale2 = map.scale() * map.scale();
    const double energy = energy_expectation(psi, map, c, cells).value / scale2;
    if (step == 0) e0 = energy;
    if (!(e0 > 0.0)) throw std::runtime_error("energy-dissipation: initial energy in the region is zero");
    const double norm = energy / e0;
    curve.push_back(norm);
    const double t = static_cast<double>(step) * setup.dt;
    sv.add({cell(step), cell(t), cell(norm), cell(p_keep)});

    const auto probs = probabilities(psi);
    const DiscreteSampler sampler(probs);
    for (std::size_t li = 0; li < levels.size(); ++li)
      for (std::size_t s = 0; s < seeds; ++s) {
        const std::uint64_t seed = derive_seed(cfg.seed, (step * levels.size() + li) * seeds + s);
        Rng rng(seed);
        const auto counts = sample_with_postselection(psi, p_keep, map.layout, levels[li], rng, &sampler);
        const auto est = estimate_energy(counts, map, c, cells);
        const double k2 = scale2 * p_keep * e0;
        const double value = est.mean / k2;
        sq_dev[li][s] += (value - norm) * (value - norm);
        samples.add({cell(step), cell(levels[li]), cell(seed), cell(value), cell(est.stderr_ / k2), cell(est.kept)});
      }
  }

  nlohmann::json per_level = nlohmann::json::array();
  const double n = static_cast<double>(cfg.steps + 1);
  for (std::size_t li = 0; li < levels.size(); ++li) {
    std::vector<double> r;
    for (double d : sq_dev[li]) r.push_back(std::sqrt(d / n));
    rms.add({cell(levels[li]), cell(seeds), cell(mean_of(r)), cell(sample_std(r))});
    per_level.push_back({{"shots", levels[li]}, {"rms_deviation", mean_of(r)}});
  }
  rec.summary = {{"initial_energy", e0},
                 {"final_normalized_energy", curve.back()},
                 {"rms", per_level},
                 {"ledger_audit_max", worst_audit},
                 {"circuit", circuit_summary(plan)}};
  rec.tables.push_back(std::move(sv));
  rec.tables.push_back(std::move(samples));
  rec.tables.push_back(std::move(rms));
  return rec;
}

OutputRecord run_energy_histogram(const ExperimentConfig& cfg) {
  const auto setup = make_pulse_setup(cfg);
  const std::size_t nx = cfg.grid.nx, ny = cfg.grid.ny;
  const auto plan = build_step(setup.model, setup.lattice, setup.bc, {}, nx, ny, {CollisionMode::Linear, {}});
  const auto map0 = make_encoding_map(plan, setup.model, CollisionMode::Linear);
  const auto cells = pulse_region(cfg);
  const double c = cfg.model.c_phys;

  FieldState f = pulse_initial_state(setup, cfg);
  auto enc = encode_fields(f, map0);
  Statevector psi = std::move(enc.state);
  EncodingMap map = std::move(enc.map);
  double p_keep = 1.0;
  for (std::size_t step = 1; step <= cfg.steps; ++step) {
    auto next = encode_fields(decode_fields(psi, map).fields, map0);
    auto r = run_step(plan, std::move(next.state), std::move(next.map));
    psi = std::move(r.state);
    map = std::move(r.map);
    p_keep = r.p_keep;
  }
  const auto exact = energy_expectation(psi, map, c, cells);
  const double exact_mean = exact.value * p_keep;
  const double physical_scale = map.scale() * map.scale() * p_keep;
  const DiscreteSampler sampler(probabilities(psi));

  OutputRecord rec{cfg.experiment, {}, {}};
  Table reps("energy_repetitions", schema::kEnergyRepetitions);
  std::vector<double> means, stderrs;
  for (std::size_t r = 0; r < cfg.sampling.repetitions; ++r) {
    const std::uint64_t seed = derive_seed(cfg.seed, r);
    Rng rng(seed);
    const auto counts = sample_with_postselection(psi, p_keep, map.layout, cfg.sampling.shots, rng, &sampler);
    const auto est = estimate_energy(counts, map, c, cells);
    means.push_back(est.mean);
    stderrs.push_back(est.stderr_);
    reps.add({cell(r), cell(seed), cell(est.mean), cell(est.stderr_), cell(est.kept), cell(est.shots)});
  }

  Table hist("energy_histogram", schema::kEnergyHistogram);
  const double lo = *std::min_element(means.begin(), means.end());
  const double hi = *std::max_element(means.begin(), means.end());
  const std::size_t bins =
      std::max<std::size_t>(1, std::min<std::size_t>(means.size(), static_cast<std::size_t>(std::ceil(std::sqrt(means.size())))));
  const double width = hi > lo ? (hi - lo) / static_cast<double>(bins) : 1.0;
  std::vector<std::size_t> counts(bins, 0);
  for (double m : means) {
    auto b = hi > lo ? static_cast<std::size_t>((m - lo) / width) : 0;
    ++counts[std::min(b, bins - 1)];
  }
  for (std::size_t b = 0; b < bins; ++b)
    hist.add({cell(b), cell(lo + width * static_cast<double>(b)), cell(lo + width * static_cast<double>(b + 1)),
              cell(counts[b])});

  const double grand = mean_of(means);
  const double sd = sample_std(means);
  double m3 = 0.0, m4 = 0.0;
  for (double m : means) {
    const double z = sd > 0.0 ? (m - grand) / sd : 0.0;
    m3 += z * z * z;
    m4 += z * z * z * z;
  }
  const double nr = static_cast<double>(means.size());

  Table scaling("shot_scaling", schema::kShotScaling);
  std::vector<double> log_n, log_se;
  for (std::size_t li = 0; li < cfg.sampling.shot_levels.size(); ++li) {
    const auto shots = cfg.sampling.shot_levels[li];
    std::vector<double> se, mu;
    for (std::size_t s = 0; s < cfg.sampling.seeds; ++s) {
      Rng rng(derive_seed(~cfg.seed, li * cfg.sampling.seeds + s));
      const auto est = estimate_energy(sample_with_postselection(psi, p_keep, map.layout, shots, rng, &sampler), map, c, cells);
      se.push_back(est.stderr_);
      mu.push_back(est.mean);
    }
    scaling.add({cell(shots), cell(cfg.sampling.seeds), cell(mean_of(se)), cell(sample_std(mu))});
    log_n.push_back(std::log(static_cast<double>(shots)));
    log_se.push_back(std::log(mean_of(se)));
  }
  double slope = std::nan("");
  if (log_n.size() >= 2) {
    const double mx = mean_of(log_n), my = mean_of(log_se);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < log_n.size(); ++i) {
      sxy += (log_n[i] - mx) * (log_se[i] - my);
      sxx += (log_n[i] - mx) * (log_n[i] - mx);
    }
    slope = sxy / sxx;
  }

  rec.summary = {{"exact_mean", exact_mean},
                 {"exact_variance", exact.variance},
                 {"physical_energy", exact.value / (map.scale() * map.scale())},
                 {"physical_scale", physical_scale},
                 {"p_keep", p_keep},
                 {"grand_mean", grand},
                 {"sample_std", sd},
                 {"stderr_of_mean", sd / std::sqrt(nr)},
                 {"z_score", sd > 0.0 ? (grand - exact_mean) / (sd / std::sqrt(nr)) : 0.0},
                 {"mean_reported_stderr", mean_of(stderrs)},
                 {"skewness", m3 / nr},
                 {"excess_kurtosis", m4 / nr - 3.0},
                 {"stderr_slope", log_n.size() >= 2 ? nlohmann::json(slope) : nlohmann::json(nullptr)}};
  rec.tables.push_back(std::move(reps));
  rec.tables.push_back(std::move(hist));
  rec.tables.push_back(std::move(scaling));
  return rec;
}

AirfoilSetup make_airfoil_setup(const ExperimentConfig& cfg) {
  AirfoilSetup s;
  s.nx = cfg.grid.nx;
  s.ny = cfg.grid.ny;
  s.lattice = standard_config(cfg.model.lattice);
  if (s.lattice.dim != 2) throw std::invalid_argument("airfoil needs a 2D lattice");
  if (s.lattice.two_levels() != cfg.airfoil.two_level)
    throw std::invalid_argument("airfoil.two_level must match model.lattice (D2Q9 one-level, D2Q17 two-level)");
  if (!cfg.airfoil.two_level && cfg.model.tau != 1.0) throw std::invalid_argument("the one-level airfoil needs tau = 1");
  s.model = {IncompressibleAthermal{cfg.model.rho0}, cfg.model.tau};
  validate(s.model);
  s.bc[Edge::Left] = edge(EdgeKind::Inlet, cfg.model.inlet_u);
  s.bc[Edge::Right] = edge(EdgeKind::ZeroGradient);
  s.bc[Edge::Bottom] = edge(EdgeKind::DirichletZero);
  s.bc[Edge::Top] = edge(EdgeKind::DirichletZero);
  s.bc.validate(s.nx, s.ny);
  s.mask.rects.push_back(cfg.airfoil.object);
  s.mask.validate(s.nx, s.ny);
  s.plan = build_step(s.model, s.lattice, s.bc, s.mask, s.nx, s.ny, {CollisionMode::NonlinearExtended, {}});
  return s;
}

FieldState airfoil_initial_state(const AirfoilSetup& setup) {
  const auto& inlet = setup.bc[Edge::Left].inlet;
  FieldState f(setup.nx, setup.ny, 3, setup.lattice.two_levels() ? 2 : 1);
  for (std::size_t l = 0; l < f.levels(); ++l) {
    std::fill(f.grid(l, 1).begin(), f.grid(l, 1).end(), inlet[0]);
    std::fill(f.grid(l, 2).begin(), f.grid(l, 2).end(), inlet[1]);
  }
  return apply_mask(apply_boundary(std::move(f), setup.bc), setup.mask);
}

FieldState airfoil_steady_state(const AirfoilSetup& setup, std::size_t steps, double* residual) {
  SolverState st{airfoil_initial_state(setup), 0, 1.0, 1.0};
  double last = 0.0;
  for (std::size_t k = 0; k < steps; ++k) {
    auto next = lbm_step(st, setup.model, setup.lattice, setup.bc, setup.mask);
    last = max_abs_difference(next.fields, st.fields);
    st = std::move(next);
  }
  if (residual) *residual = last;
  return st.fields;
}

double field_mse(const FieldState& a, const FieldState& b) {
  if (a.nx() != b.nx() || a.ny() != b.ny()) throw std::invalid_argument("field_mse: shape mismatch");
  double s = 0.0;
  for (std::size_t v = 0; v < 3; ++v)
    for (std::size_t i = 0; i < a.sites(); ++i) {
      const double d = a.grid(0, v)[i] - b.grid(0, v)[i];
      s += d * d;
    }
  return s / static_cast<double>(3 * a.sites());
}

std::pair<FieldState, StepDiagnostics> hybrid_airfoil_step(const FieldState& fields, const AirfoilSetup& setup,
                                                           const HybridStepOptions& options) {
  StepDiagnostics diag;
  const std::size_t levels = setup.lattice.two_levels() ? 2 : 1;
  if (fields.nx() != setup.nx || fields.ny() != setup.ny || fields.levels() != levels)
    throw std::invalid_argument("hybrid_airfoil_step: field shape does not match the setup");

  bool zero = true;
  for (std::size_t l = 0; l < levels && zero; ++l)
    for (std::size_t v = 0; v < 3 && zero; ++v)
      for (double x : fields.grid(l, v))
        if (x != 0.0) {
          zero = false;
          break;
        }
  if (zero) {
    diag.zero_state = true;
    FieldState out(setup.nx, setup.ny, 3, levels);
    return {apply_mask(apply_boundary(std::move(out), setup.bc), setup.mask), diag};
  }

  auto enc = encode_fields(fields.linear_part(), make_encoding_map(setup.plan, setup.model, CollisionMode::NonlinearExtended));
  auto r = run_step(setup.plan, std::move(enc.state), std::move(enc.map));
  diag.p_keep = r.p_keep;
  const auto exact = decode_fields(r.state, r.map);
  diag.residual_probability = exact.residual_probability;
  diag.ledger_audit = ledger_audit(r.state, r.map, exact.fields);

  FieldState out;
  if (options.mode == ReadoutMode::Statevector) {
    out = exact.fields;
  } else {
    Rng rng(options.seed);
    const auto counts = sample_with_postselection(r.state, r.p_keep, r.map.layout, options.shots, rng);
    diag.shots = counts.shots;
    diag.kept = counts.shots - counts.count(std::uint64_t{1} << r.map.layout.a_s());
    if (diag.kept == 0) throw std::runtime_error("hybrid_airfoil_step: no shot survived post-selection");
    const double k_pre = r.map.scale() * std::sqrt(r.p_keep);
    const double shots = static_cast<double>(counts.shots);
    out = FieldState(setup.nx, setup.ny, 3, levels);

    std::optional<TomographyBasis> basis;
    if (options.mode == ReadoutMode::ShotsTomography) {
      const auto& o = setup.mask.rects.front();
      const double a = 0.5 * (o.x1 - o.x0), b = 0.5 * (o.y1 - o.y0);
      basis = chebyshev_basis(setup.nx, setup.ny, options.tomography_degree,
                              BasisGeometry{0.5 * (o.x0 + o.x1), 0.5 * (o.y0 + o.y1), rect_grid_transform(a, b)});
    }
    for (std::size_t l = 0; l < levels; ++l)
      for (std::size_t v = 0; v < 3; ++v) {
        std::map<std::uint64_t, double> z;
        std::uint64_t field_kept = 0;
        for (std::size_t y = 0; y < setup.ny; ++y)
          for (std::size_t x = 0; x < setup.nx; ++x) {
            const auto c = counts.count(r.map.index(x, y, v, l));
            field_kept += c;
            if (c) z[x + setup.nx * y] = static_cast<double>(c);
          }
        if (l == 0) diag.kept_per_field[v] = field_kept;
        if (field_kept == 0) continue;
        // Each field is rescaled so its squared norm is the marginal probability of its substate.
        const double field_norm = std::sqrt(static_cast<double>(field_kept) / shots) / k_pre;
        if (!basis) {
          for (const auto& [i, c] : z) out.grid(l, v)[i] = std::sqrt(c / static_cast<double>(field_kept)) * field_norm;
        } else {
          TomographyProblem problem{r.map.layout.lattice_qubits(), z, {}};
          FitOptions fo;
          fo.starts = options.tomography_starts;
          fo.seed = derive_seed(options.seed, 3 * l + v);
          const auto result = fit(problem, *basis, fo);
          const double w = std::sqrt(norm_w(result.a, *basis));
          for (std::size_t i = 0; i < basis->points(); ++i)
            out.grid(l, v)[i] = std::abs(basis->eval(result.a, i)) / w * field_norm;
        }
      }
    out = sign_restore_symmetric(out, SymmetryAxis{0.5 * static_cast<double>(setup.ny) - 0.5, {false, false, true}});
  }
  return {apply_mask(apply_boundary(std::move(out), setup.bc), setup.mask), diag};
}

OutputRecord run_airfoil(const ExperimentConfig& cfg) {
  const auto setup = make_airfoil_setup(cfg);
  double residual = 0.0;
  const auto steady = airfoil_steady_state(setup, cfg.airfoil.steady_steps, &residual);
  const auto init = airfoil_initial_state(setup);

  std::vector<ReadoutMode> modes{ReadoutMode::Statevector};
  if (cfg.mode() != ReadoutMode::Statevector) modes.push_back(cfg.mode());

  OutputRecord rec{cfg.experiment, {}, {}};
  Table mse("airfoil_mse", schema::kAirfoilMse);
  Table dump("airfoil_fields", schema::kAirfoilFields);
  Table st("airfoil_steady", schema::kAirfoilSteady);
  auto dump_fields = [&](std::size_t step, std::string_view mode, const FieldState& f) {
    for (std::size_t y = 0; y < setup.ny; ++y)
      for (std::size_t x = 0; x < setup.nx; ++x)
        dump.add({cell(step), cell(mode), cell(x), cell(y), cell(f.at(0, 0, x, y)), cell(f.at(0, 1, x, y)),
                  cell(f.at(0, 2, x, y))});
  };

  nlohmann::json per_mode = nlohmann::json::object();
  for (auto mode : modes) {
    const std::string name(to_string(mode));
    FieldState f = init;
    const bool sampled = mode != ReadoutMode::Statevector;
    mse.add({cell(0), name, cell(field_mse(f, steady)), cell(1.0), cell(0), cell(0), cell(0), cell(0), cell(0)});
    dump_fields(0, name, f);
    double min_keep = 1.0, max_keep = 0.0, min_ratio = 1.0, max_ratio = 0.0, worst_audit = 0.0;
    std::vector<double> trace{field_mse(f, steady)};
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
      HybridStepOptions o{mode, cfg.sampling.shots, derive_seed(cfg.seed, step), cfg.readout.tomography_degree,
                          cfg.readout.tomography_starts};
      auto [next, d] = hybrid_airfoil_step(f, setup, o);
      f = std::move(next);
      const double e = field_mse(f, steady);
      trace.push_back(e);
      mse.add({cell(step), name, cell(e), cell(d.p_keep), cell(d.shots), cell(d.kept), cell(d.kept_per_field[0]),
               cell(d.kept_per_field[1]), cell(d.kept_per_field[2])});
      dump_fields(step, name, f);
      min_keep = std::min(min_keep, d.p_keep);
      max_keep = std::max(max_keep, d.p_keep);
      worst_audit = std::max(worst_audit, d.ledger_audit);
      if (sampled && d.shots) {
        const double ratio = static_cast<double>(d.kept) / static_cast<double>(d.shots);
        min_ratio = std::min(min_ratio, ratio);
        max_ratio = std::max(max_ratio, ratio);
      }
    }
    nlohmann::json m = {{"final_mse", trace.back()},
                        {"max_mse", *std::max_element(trace.begin(), trace.end())},
                        {"p_keep_min", cfg.steps ? min_keep : 1.0},
                        {"p_keep_max", cfg.steps ? max_keep : 1.0},
                        {"ledger_audit_max", worst_audit}};
    if (sampled && cfg.steps) {
      m["kept_ratio_min"] = min_ratio;
      m["kept_ratio_max"] = max_ratio;
    }
    per_mode[name] = m;
  }
  for (std::size_t y = 0; y < setup.ny; ++y)
    for (std::size_t x = 0; x < setup.nx; ++x)
      st.add({cell(x), cell(y), cell(steady.at(0, 0, x, y)), cell(steady.at(0, 1, x, y)), cell(steady.at(0, 2, x, y))});

  rec.summary = {{"initial_mse", field_mse(init, steady)},
                 {"steady_residual", residual},
                 {"modes", per_mode},
                 {"circuit", circuit_summary(setup.plan)}};
  rec.tables.push_back(std::move(mse));
  rec.tables.push_back(std::move(dump));
  rec.tables.push_back(std::move(st));
  return rec;
}

namespace {

struct VerifyCase {
  std::string name;
  bool nonlinear = false;
  double tau = 1.0;
  bool mixed = false;
  std::size_t n = 8;
  bool masked = false;
};

BoundarySpec verify_boundary(bool mixed) {
  BoundarySpec bc;
  if (mixed) {
    bc[Edge::Left] = edge(EdgeKind::ZeroGradient);
    bc[Edge::Right] = edge(EdgeKind::DirichletZero);
    bc[Edge::Bottom] = edge(EdgeKind::DirichletZero);
    bc[Edge::Top] = edge(EdgeKind::ZeroGradient);
  }
  return bc;
}

ObjectMask verify_mask(bool masked, std::size_t n) {
  ObjectMask m;
  if (masked) {
    const int c = static_cast<int>(n / 2) - 1;
    m.rects.push_back({c, c, c + 2, c + 2});
  }
  return m;
}

PhysicsModel verify_model(bool nonlinear, double tau) {
  if (nonlinear) return {IncompressibleAthermal{1.0}, tau};
  return {LinearAcoustics{1.0, {0.0, 0.0, 0.0}}, tau};
}

FieldState random_fields(std::size_t n, std::size_t levels, double amplitude, Rng& rng) {
  FieldState f(n, n, 3, levels);
  for (std::size_t l = 0; l < levels; ++l)
    for (std::size_t v = 0; v < 3; ++v)
      for (auto& x : f.grid(l, v)) x = amplitude * (2.0 * rng.uniform() - 1.0);
  return f;
}

}  // namespace

OutputRecord verify_equivalence(const ExperimentConfig& cfg) {
  require_statevector(cfg);
  OutputRecord rec{cfg.experiment, {}, {}};
  Table t("verify", schema::kVerify);
  Rng rng(cfg.seed);
  double worst = 0.0;

  auto emit = [&](const VerifyCase& vc, std::size_t trials, double dev, double keep) {
    t.add({vc.name, vc.nonlinear ? "incompressible" : "linear-acoustics", cell(vc.tau), vc.mixed ? "mixed" : "periodic",
           cell(vc.n), vc.masked ? "2x2" : "none", cell(trials), cell(dev), cell(keep)});
  };

  for (bool nonlinear : {false, true})
    for (double tau : cfg.verify.taus)
      for (bool mixed : {false, true})
        for (std::size_t n : cfg.verify.sizes)
          for (bool masked : {false, true}) {
            const VerifyCase vc{"oracle", nonlinear, tau, mixed, n, masked};
            const auto lattice = standard_config(tau == 1.0 ? LatticeName::D2Q9 : LatticeName::D2Q17);
            const auto model = verify_model(nonlinear, tau);
            const auto bc = verify_boundary(mixed);
            const auto mask = verify_mask(masked, n);
            const auto mode = nonlinear ? CollisionMode::NonlinearExtended : CollisionMode::Linear;
            const auto plan = build_step(model, lattice, bc, mask, n, n, {mode, {}});
            double dev = 0.0, keep = 0.0;
            for (std::size_t k = 0; k < cfg.verify.trials; ++k) {
              const auto f = random_fields(n, lattice.two_levels() ? 2 : 1, cfg.verify.amplitude, rng);
              const auto classical = lbm_step({f, 0, 1.0, 1.0}, model, lattice, bc, mask).fields;
              double p = 0.0;
              const auto quantum = quantum_step(f, plan, model, mode, &p);
              dev = std::max(dev, max_abs_difference(classical, quantum));
              keep += p;
            }
            worst = std::max(worst, dev);
            emit(vc, cfg.verify.trials, dev, keep / static_cast<double>(std::max<std::size_t>(cfg.verify.trials, 1)));
          }

  double levels_dev = 0.0;
  for (bool mixed : {false, true})
    for (std::size_t n : cfg.verify.sizes) {
      const VerifyCase vc{"two-level-tau1", false, 1.0, mixed, n, false};
      const auto model = verify_model(false, 1.0);
      const auto bc = verify_boundary(mixed);
      const auto one = build_step(model, standard_config(LatticeName::D2Q9), bc, {}, n, n);
      const auto two = build_step(model, standard_config(LatticeName::D2Q17), bc, {}, n, n);
      double dev = 0.0, keep = 0.0;
      for (std::size_t k = 0; k < cfg.verify.trials; ++k) {
        const auto f2 = random_fields(n, 2, cfg.verify.amplitude, rng);
        const auto f1 = f2.with_levels(1);
        double p = 0.0;
        const auto a = quantum_step(f1, one, model, CollisionMode::Linear);
        const auto b = quantum_step(f2, two, model, CollisionMode::Linear, &p);
        dev = std::max(dev, max_abs_difference(a, b.with_levels(1)));
        keep += p;
      }
      levels_dev = std::max(levels_dev, dev);
      emit(vc, cfg.verify.trials, dev, keep / static_cast<double>(std::max<std::size_t>(cfg.verify.trials, 1)));
    }

  double mutation_dev = 0.0;
  {
    const VerifyCase vc{"mutated-ladder", false, 1.0, false, 8, false};
    const auto model = verify_model(false, 1.0);
    const auto lattice = standard_config(LatticeName::D2Q9);
    StepOptions so;
    so.propagation.ladder_perturbation = cfg.verify.ladder_perturbation;
    const auto plan = build_step(model, lattice, {}, {}, 8, 8, so);
    const std::size_t trials = std::min<std::size_t>(cfg.verify.trials, 10);
    double keep = 0.0;
    for (std::size_t k = 0; k < trials; ++k) {
      const auto f = random_fields(8, 1, cfg.verify.amplitude, rng);
      const auto classical = lbm_step({f, 0, 1.0, 1.0}, model, lattice, {}, {}).fields;
      double p = 0.0;
      const auto quantum = quantum_step(f, plan, model, CollisionMode::Linear, &p);
      mutation_dev = std::max(mutation_dev, max_abs_difference(classical, quantum) / cfg.verify.amplitude);
      keep += p;
    }
    emit(vc, trials, mutation_dev, keep / static_cast<double>(std::max<std::size_t>(trials, 1)));
  }

  rec.summary = {{"oracle_max_abs_deviation", worst},
                 {"two_level_tau1_max_abs_deviation", levels_dev},
                 {"mutated_ladder_relative_deviation", mutation_dev}};
  rec.tables.push_back(std::move(t));
  return rec;
}

OutputRecord run_experiment(const ExperimentConfig& cfg) {
  validate(cfg);
  if (cfg.experiment == "acoustics-pulse") return run_acoustics_pulse(cfg);
  if (cfg.experiment == "energy-dissipation") return run_energy_dissipation(cfg);
  if (cfg.experiment == "energy-histogram") return run_energy_histogram(cfg);
  if (cfg.experiment == "airfoil") return run_airfoil(cfg);
  return verify_equivalence(cfg);
}

nlohmann::json version_info() {
  const auto boost = std::to_string(BOOST_VERSION / 100000) + "." + std::to_string(BOOST_VERSION / 100 % 1000) + "." +
                     std::to_string(BOOST_VERSION % 100);
  return {{"qlbm", QLBM_VERSION},
          {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                        std::to_string(EIGEN_MINOR_VERSION)},
          {"boost", boost},
          {"nlohmann_json", std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                                std::to_string(NLOHMANN_JSON_VERSION_PATCH)},
#if defined(__VERSION__)
          {"compiler", __VERSION__},
#endif
          {"cxx_standard", __cplusplus}};
}

nlohmann::json make_manifest(const OutputRecord& record, const ExperimentConfig& cfg) {
  nlohmann::json tables = nlohmann::json::array();
  for (const auto& t : record.tables)
    tables.push_back({{"name", t.name}, {"file", t.name + ".csv"}, {"columns", t.header}, {"rows", t.rows.size()}});
  return {{"experiment", record.experiment},
          {"config", cfg},
          {"seed", cfg.seed},
          {"rng", Rng::kAlgorithm},
          {"versions", version_info()},
          {"tables", tables},
          {"summary", record.summary}};
}

void write_outputs(const OutputRecord& record, const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write = [&dir](const std::string& file, const std::string& text) {
    std::ofstream out(dir / file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + (dir / file).string());
    out << text;
  };
  for (const auto& t : record.tables) write(t.name + ".csv", t.to_csv());
  write("manifest.json", make_manifest(record, cfg).dump(2) + "\n");
}

}  // namespace qlbm
