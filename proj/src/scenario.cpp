#include "coagflow/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace coagflow {

using nlohmann::json;

namespace {

[[noreturn]] void config_fail(const std::string& where, const std::string& what) {
  throw ConfigError(where + ": " + what);
}

template <typename T>
T get_req(const json& j, const std::string& key, const std::string& where) {
  if (!j.contains(key)) config_fail(where, "missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    config_fail(where + "/" + key, e.what());
  }
}

template <typename T>
T get_opt(const json& j, const std::string& key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

TypeMixture parse_mixture(const json& j, const std::string& where) {
  TypeMixture mix;
  if (!j.is_array() || j.empty()) config_fail(where, "types must be a non-empty array");
  for (const auto& e : j) {
    mix.masses.push_back(get_req<double>(e, "mass", where));
    mix.weights.push_back(get_opt<double>(e, "weight", 1.0));
  }
  double total = 0.0;
  for (double w : mix.weights) total += w;
  if (total <= 0.0) config_fail(where, "mixture weights must have positive total");
  for (double& w : mix.weights) w /= total;
  mix.validate();
  return mix;
}

}  // namespace

SpatialMeasure Scenario::initial_measure() const {
  SpatialMeasure c0 = SpatialMeasure::zero_grid(grid, bins, 0.0);
  if (initial_.kind == "zero") return c0;
  if (initial_.kind == "uniform") {
    const double to = initial_.to < 0.0 ? domain->length() : initial_.to;
    const double w = grid.cell_width();
    for (int i = 0; i < grid.cells; ++i) {
      const double a = i * w, b = (i + 1) * w;
      const double overlap = std::max(0.0, std::min(b, to) - std::max(a, initial_.from));
      if (overlap <= 0.0) continue;
      const double number = initial_.density * overlap * grid.cross_area();
      for (std::size_t k = 0; k < initial_.types.masses.size(); ++k)
        c0.deposit(i, initial_.types.masses[k], number * initial_.types.weights[k]);
    }
    return c0;
  }
  throw ConfigError("unknown initial condition kind: " + initial_.kind);
}

PropagatorSchedule Scenario::schedule() const {
  PropagatorSchedule s;
  s.dt = numerics.dt;
  s.splitting = numerics.splitting;
  s.coag_substep = numerics.coag_substep;
  s.kernel = kernel;
  s.deloc = deloc;
  s.flow = flow;
  return s;
}

StochModels Scenario::stoch_models() const {
  return {kernel, deloc, flow, inception};
}

Dictionary Scenario::dictionary() const { return make_dictionary(*domain); }

Scenario scenario_from_json_text(const std::string& text, const std::string& origin) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(origin + ": " + e.what());
  }
  Scenario sc;
  sc.raw_config = j.dump(2);
  sc.schema_version = get_req<int>(j, "schema_version", origin);
  if (sc.schema_version != 1)
    config_fail(origin, "unsupported schema_version " + std::to_string(sc.schema_version));
  sc.name = get_opt<std::string>(j, "name", "unnamed");

  // Domain.
  const json jd = get_req<json>(j, "domain", origin);
  const int dim = get_req<int>(jd, "dimension", origin + "/domain");
  const double length = get_req<double>(jd, "length", origin + "/domain");
  std::array<double, 2> widths{1.0, 1.0};
  if (jd.contains("widths")) {
    auto ws = jd.at("widths").get<std::vector<double>>();
    for (std::size_t i = 0; i < ws.size() && i < 2; ++i) widths[i] = ws[i];
  }
  auto domain = std::make_shared<BoxDomain>(dim, length, widths);
  sc.domain = domain;

  // Velocity.
  const json jv = get_req<json>(j, "velocity", origin);
  sc.velocity = make_velocity_field(
      get_req<std::string>(jv, "name", origin + "/velocity"), dim,
      get_opt<std::vector<double>>(jv, "params", {}), *domain);

  // Kernel.
  const json jk = get_req<json>(j, "kernel", origin);
  sc.kernel = make_kernel(get_req<std::string>(jk, "name", origin + "/kernel"),
                          get_opt<std::vector<double>>(jk, "params", {}),
                          get_req<double>(jk, "bound", origin + "/kernel"));

  // Delocalisation.
  const json jh = get_req<json>(j, "delocalisation", origin);
  const std::string form = get_req<std::string>(jh, "form", origin + "/delocalisation");
  if (form == "cells") {
    sc.deloc = std::make_shared<CellDelocalisation>(
        *domain, get_req<int>(jh, "cells", origin + "/delocalisation"));
  } else if (form == "uniform") {
    sc.deloc = std::make_shared<UniformDelocalisation>(
        *domain, get_req<double>(jh, "value", origin + "/delocalisation"));
  } else if (form == "gaussian") {
    sc.deloc = std::make_shared<GaussianDelocalisation>(
        *domain, get_req<double>(jh, "amplitude", origin + "/delocalisation"),
        get_req<double>(jh, "width", origin + "/delocalisation"));
  } else {
    config_fail(origin + "/delocalisation", "unknown form '" + form + "'");
  }

  // Inception.
  std::vector<InteriorInceptionComponent> interior;
  std::vector<BoundaryInceptionComponent> boundary;
  double flux_bound = 0.0;
  if (j.contains("inception")) {
    const json ji = j.at("inception");
    for (const auto& e : get_opt<json>(ji, "interior", json::array())) {
      InteriorInceptionComponent c;
      c.rate_density = get_req<double>(e, "rate_density", origin + "/inception/interior");
      c.types = parse_mixture(get_req<json>(e, "types", origin + "/inception/interior"),
                              origin + "/inception/interior/types");
      interior.push_back(std::move(c));
    }
    for (const auto& e : get_opt<json>(ji, "boundary", json::array())) {
      BoundaryInceptionComponent c;
      c.rate_per_area = get_req<double>(e, "rate_per_area", origin + "/inception/boundary");
      c.types = parse_mixture(get_req<json>(e, "types", origin + "/inception/boundary"),
                              origin + "/inception/boundary/types");
      boundary.push_back(std::move(c));
    }
    flux_bound = get_opt<double>(ji, "flux_bound", 0.0);
  }
  sc.inception = std::make_shared<InceptionModel>(std::move(interior),
                                                  std::move(boundary), flux_bound);

  sc.horizon = get_req<double>(j, "horizon", origin);
  if (sc.horizon <= 0.0) config_fail(origin, "horizon must be positive");

  // Numerics.
  const json jn = get_req<json>(j, "numerics", origin);
  NumericsConfig& n = sc.numerics;
  n.dt = get_req<double>(jn, "dt", origin + "/numerics");
  n.grid_cells = get_req<int>(jn, "grid_cells", origin + "/numerics");
  n.bin_ratio = get_opt<double>(jn, "bin_ratio", n.bin_ratio);
  n.mass_min = get_opt<double>(jn, "mass_min", 1.0);
  n.mass_max = get_opt<double>(jn, "mass_max", 4096.0);
  const std::string split = get_opt<std::string>(jn, "splitting", "lie");
  if (split == "lie") n.splitting = Splitting::lie;
  else if (split == "strang") n.splitting = Splitting::strang;
  else config_fail(origin + "/numerics", "splitting must be 'lie' or 'strang'");
  const std::string cs = get_opt<std::string>(jn, "coag_substep", "euler");
  if (cs == "euler") n.coag_substep = CoagSubstepKind::euler;
  else if (cs == "exponential") n.coag_substep = CoagSubstepKind::exponential;
  else config_fail(origin + "/numerics", "coag_substep must be 'euler' or 'exponential'");
  n.flow_step = get_opt<double>(jn, "flow_step", 1e-3);
  n.boundary_tol = get_opt<double>(jn, "boundary_tolerance", -1.0);
  n.particles = get_opt<long>(jn, "particles", 1000L);
  n.replicas = get_opt<int>(jn, "replicas", 8);
  n.seed = get_opt<std::uint64_t>(jn, "seed", 1);
  if (jn.contains("picard")) {
    const json jp = jn.at("picard");
    n.picard.containment_radius =
        get_req<double>(jp, "containment_radius", origin + "/numerics/picard");
    n.picard.tolerance = get_opt<double>(jp, "tolerance", 1e-9);
    n.picard.max_iterations = get_opt<int>(jp, "max_iterations", 60);
  }

  // Output knots.
  if (j.contains("output"))
    sc.knots = get_opt<std::vector<double>>(j.at("output"), "knots", {});
  if (sc.knots.empty()) {
    for (int k = 1; k <= 8; ++k) sc.knots.push_back(sc.horizon * k / 8.0);
  }
  for (std::size_t k = 0; k < sc.knots.size(); ++k) {
    if (sc.knots[k] <= 0.0 || sc.knots[k] > sc.horizon + 1e-12 ||
        (k > 0 && sc.knots[k] <= sc.knots[k - 1]))
      config_fail(origin + "/output/knots", "knots must increase within (0, horizon]");
  }

  // Assemble derived objects.
  FlowMapConfig fc;
  fc.step = n.flow_step;
  fc.boundary_tol = n.boundary_tol > 0.0 ? n.boundary_tol : 1e-8 * domain->diameter();
  sc.flow = std::make_shared<FlowMap>(sc.velocity, domain, fc);
  sc.bins = TypeBinning::geometric(n.mass_min, n.mass_max, n.bin_ratio,
                                   sc.inception->anchor_masses());
  sc.grid = GridSpec{dim, length, widths, n.grid_cells};

  // Initial condition.
  if (j.contains("initial")) {
    const json jini = j.at("initial");
    sc.initial_.kind = get_opt<std::string>(jini, "kind", "zero");
    if (sc.initial_.kind == "uniform") {
      sc.initial_.density = get_req<double>(jini, "density", origin + "/initial");
      sc.initial_.from = get_opt<double>(jini, "from", 0.0);
      sc.initial_.to = get_opt<double>(jini, "to", -1.0);
      sc.initial_.types = parse_mixture(get_req<json>(jini, "types", origin + "/initial"),
                                        origin + "/initial/types");
      for (double m : sc.initial_.types.masses)
        if (sc.bins->exact_index(m) < 0)
          sc.bins = TypeBinning::geometric(
              n.mass_min, n.mass_max, n.bin_ratio,
              [&] {
                auto a = sc.inception->anchor_masses();
                a.insert(a.end(), sc.initial_.types.masses.begin(),
                         sc.initial_.types.masses.end());
                return a;
              }());
    } else if (sc.initial_.kind != "zero") {
      config_fail(origin + "/initial", "kind must be 'zero' or 'uniform'");
    }
  }

  // Cross-module validity.
  const double t0 = sc.flow->residence_bound();
  if (std::isfinite(t0) && n.dt > t0 / 10.0 * (1.0 + 1e-12))
    config_fail(origin + "/numerics", "dt must be at most residence_bound/10");
  if (sc.deloc->form() == DelocalisationForm::cells &&
      n.grid_cells % sc.deloc->cell_count() != 0)
    config_fail(origin + "/numerics",
                "grid_cells must be a multiple of the delocalisation cell count");
  sc.inception->certify_flux_bound(*sc.velocity, *domain, 128);

  return sc;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return scenario_from_json_text(ss.str(), path);
}

std::string canonical_scenario_json() {
  return R"({
  "schema_version": 1,
  "name": "canonical",
  "domain": {"dimension": 1, "length": 1.0},
  "velocity": {"name": "constant", "params": [1.0]},
  "kernel": {"name": "constant", "params": [1.0], "bound": 1.0},
  "delocalisation": {"form": "cells", "cells": 64},
  "inception": {
    "boundary": [{"rate_per_area": 1.0, "types": [{"mass": 1.0, "weight": 1.0}]}],
    "flux_bound": 1.0
  },
  "initial": {"kind": "zero"},
  "horizon": 3.0,
  "numerics": {
    "dt": 0.00390625,
    "grid_cells": 128,
    "bin_ratio": 1.189207115002721,
    "mass_min": 1.0,
    "mass_max": 4096.0,
    "flow_step": 0.001,
    "picard": {"containment_radius": 1.1, "tolerance": 1e-9, "max_iterations": 60},
    "particles": 10000,
    "replicas": 8,
    "seed": 20240811
  },
  "output": {"knots": [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0, 2.25, 2.5, 2.75, 3.0]}
})";
}

std::string homogeneous_scenario_json() {
  return R"({
  "schema_version": 1,
  "name": "homogeneous",
  "domain": {"dimension": 1, "length": 1.0},
  "velocity": {"name": "zero"},
  "kernel": {"name": "constant", "params": [1.0], "bound": 1.0},
  "delocalisation": {"form": "uniform", "value": 1.0},
  "initial": {"kind": "uniform", "density": 1.0, "types": [{"mass": 1.0, "weight": 1.0}]},
  "horizon": 4.0,
  "numerics": {
    "dt": 0.001,
    "grid_cells": 1,
    "mass_max": 65536.0,
    "flow_step": 0.001,
    "picard": {"containment_radius": 2.0},
    "seed": 7
  },
  "output": {"knots": [1.0, 2.0, 4.0]}
})";
}

std::string plugflow_scenario_json(int grid_cells) {
  std::string s = R"({
  "schema_version": 1,
  "name": "plugflow",
  "domain": {"dimension": 1, "length": 1.0},
  "velocity": {"name": "constant", "params": [1.0]},
  "kernel": {"name": "constant", "params": [0.0], "bound": 0.0},
  "delocalisation": {"form": "cells", "cells": 64},
  "inception": {
    "boundary": [{"rate_per_area": 1.0, "types": [{"mass": 1.0, "weight": 1.0}]}],
    "flux_bound": 1.0
  },
  "initial": {"kind": "zero"},
  "horizon": 2.0,
  "numerics": {
    "dt": 0.00390625,
    "grid_cells": GRID,
    "flow_step": 0.001,
    "picard": {"containment_radius": 1.2},
    "seed": 3
  },
  "output": {"knots": [1.5, 2.0]}
})";
  const std::string key = "GRID";
  s.replace(s.find(key), key.size(), std::to_string(grid_cells));
  return s;
}

}  // namespace coagflow
