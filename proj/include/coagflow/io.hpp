#pragma once

#include <string>
#include <vector>

#include "coagflow/det_solver.hpp"
#include "coagflow/dictionary.hpp"
#include "coagflow/measures.hpp"
#include "coagflow/stoch_solver.hpp"

namespace coagflow {

// Column-based text format, one row per cell or particle; the header carries
// the representation kind, time stamp and grid/bin layout.
std::string measure_to_text(const SpatialMeasure& m);
SpatialMeasure measure_from_text(const std::string& text);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

// Trajectory emission: one measure file per knot plus an index file.
std::vector<std::string> write_trajectory(const std::string& dir,
                                          const std::string& prefix,
                                          const Trajectory& traj);

std::string pairings_csv(const Trajectory& traj, const Dictionary& dict);
std::string profile_csv(const SpatialMeasure& grid_measure);
std::string exits_csv(const std::vector<ExitEvent>& exits);
std::string gnuplot_script(const std::string& pairings_file,
                           const std::vector<std::string>& columns);

// Run manifest as structured text (JSON).  `wall_seconds` is the only
// non-reproducible field.
std::string run_manifest(const std::string& config_echo,
                         const std::vector<WindowInfo>& windows,
                         const std::vector<std::string>& warnings,
                         double wall_seconds, std::uint64_t seed, int workers);

std::string replica_manifest(std::uint64_t seed, int replicas, long scale_n);

}  // namespace coagflow
