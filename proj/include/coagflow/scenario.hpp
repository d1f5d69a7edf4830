#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "coagflow/det_solver.hpp"
#include "coagflow/dictionary.hpp"
#include "coagflow/measures.hpp"
#include "coagflow/stoch_solver.hpp"

namespace coagflow {

struct NumericsConfig {
  double dt = 1e-2;
  int grid_cells = 64;
  double bin_ratio = 1.189207115002721;  // 2^(1/4)
  double mass_min = 1.0;
  double mass_max = 4096.0;
  Splitting splitting = Splitting::lie;
  CoagSubstepKind coag_substep = CoagSubstepKind::euler;
  double flow_step = 1e-3;
  double boundary_tol = -1.0;  // <0: use 1e-8 * diam(X)
  FixedPointConfig picard;
  long particles = 1000;
  int replicas = 8;
  std::uint64_t seed = 1;
};

// A fully resolved run configuration: catalogue objects plus numerics.
struct Scenario {
  std::string name;
  int schema_version = 1;

  std::shared_ptr<const BoxDomain> domain;
  std::shared_ptr<const VelocityField> velocity;
  std::shared_ptr<const Kernel> kernel;
  std::shared_ptr<const Delocalisation> deloc;
  std::shared_ptr<const InceptionModel> inception;
  std::shared_ptr<const FlowMap> flow;
  std::shared_ptr<const TypeBinning> bins;
  GridSpec grid;
  double horizon = 1.0;
  NumericsConfig numerics;
  std::vector<double> knots;
  std::string raw_config;  // config echo for the manifest

  SpatialMeasure initial_measure() const;
  PropagatorSchedule schedule() const;
  StochModels stoch_models() const;
  Dictionary dictionary() const;

 private:
  friend Scenario scenario_from_json_text(const std::string&, const std::string&);
  struct InitialSpec {
    std::string kind = "zero";
    double density = 0.0;
    double from = 0.0, to = -1.0;
    TypeMixture types;
  } initial_;
};

Scenario load_scenario(const std::string& path);
Scenario scenario_from_json_text(const std::string& text,
                                 const std::string& origin = "<inline>");

// Built-in scenarios used by the verification suite and tests.
std::string canonical_scenario_json();
std::string homogeneous_scenario_json();
std::string plugflow_scenario_json(int grid_cells);

}  // namespace coagflow
