#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "coagflow/dictionary.hpp"
#include "coagflow/measures.hpp"

namespace coagflow {

struct StochModels {
  std::shared_ptr<const Kernel> kernel;
  std::shared_ptr<const Delocalisation> deloc;
  std::shared_ptr<const FlowMap> flow;
  std::shared_ptr<const InceptionModel> inception;
};

struct ExitEvent {
  double time = 0.0;
  Vec position = zero_vec();
  double mass = 0.0;
};

struct StochResult {
  Trajectory snapshots;  // ensemble measures (weights 1/N) at the knots
  std::vector<ExitEvent> exits;
  long initial_particles = 0;
  long final_particles = 0;
  long proposed_events = 0;
  long accepted_events = 0;
  double kernel_sum_on_proposals = 0.0;  // sum of K over proposed pairs
  double accept_prob_sum = 0.0;          // sum of thinning probabilities
  long interior_inceptions = 0;
  long boundary_inceptions = 0;
};

// Event-driven jump process: per-cell majorant coagulation rates with
// thinning acceptance K/K_inf (times h/C1 for smooth delocalisations),
// Poisson inception in the interior and on the inflow boundary, continuous
// advection between events (cell crossings are scheduled exactly), and
// removal through the outflow boundary.  Each particle carries weight 1/N.
StochResult simulate(const SpatialMeasure& c0, double horizon, long scale_n,
                     std::uint64_t seed, std::uint64_t replica,
                     const StochModels& models, const std::vector<double>& knots);

SpatialMeasure empirical_measure(const StochResult& result, double t);

struct ReplicaMoments {
  std::vector<double> knots;
  std::vector<std::string> functionals;
  // mean[knot][fn], stderr[knot][fn]
  std::vector<std::vector<double>> mean;
  std::vector<std::vector<double>> stderr_;
  // per replica/knot/fn raw pairings (replica-major)
  std::vector<std::vector<std::vector<double>>> raw;
};

// Independent-seed replicas aggregated with a deterministic pairwise
// reduction over the replica index; embarrassingly parallel over `workers`.
ReplicaMoments replica_moments(const SpatialMeasure& c0, double horizon,
                               long scale_n, int replicas, std::uint64_t seed,
                               const StochModels& models,
                               const std::vector<double>& knots,
                               const Dictionary& dict, int workers = 1);

}  // namespace coagflow
