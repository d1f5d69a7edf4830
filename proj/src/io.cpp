#include "coagflow/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace coagflow {

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string measure_to_text(const SpatialMeasure& m) {
  std::ostringstream os;
  os << "# coagflow-measure v1\n";
  os << "# kind: " << (m.is_grid() ? "grid" : "ensemble") << "\n";
  os << "# time: " << fmt(m.time) << "\n";
  if (m.is_grid()) {
    os << "# grid: dim=" << m.grid.dim << " length=" << fmt(m.grid.length)
       << " cells=" << m.grid.cells << " w2=" << fmt(m.grid.widths[0])
       << " w3=" << fmt(m.grid.widths[1]) << "\n";
    os << "# bins:";
    for (double p : m.bins->pivots()) os << ' ' << fmt(p);
    os << "\n# columns: cell bin pivot_mass mass\n";
    for (int i = 0; i < m.grid.cells; ++i)
      for (int b = 0; b < m.nbins(); ++b) {
        const double v = m.at(i, b);
        if (v != 0.0)
          os << i << ' ' << b << ' ' << fmt(m.bins->pivot(b)) << ' ' << fmt(v) << "\n";
      }
  } else {
    os << "# columns: x1 x2 x3 mass weight\n";
    for (const auto& a : m.atoms)
      os << fmt(a.x[0]) << ' ' << fmt(a.x[1]) << ' ' << fmt(a.x[2]) << ' '
         << fmt(a.mass) << ' ' << fmt(a.weight) << "\n";
  }
  return os.str();
}

SpatialMeasure measure_from_text(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::string kind;
  double time = 0.0;
  GridSpec grid;
  std::vector<double> pivots;
  std::vector<std::string> data;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream ls(line.substr(1));
      std::string tag;
      ls >> tag;
      if (tag == "kind:") ls >> kind;
      else if (tag == "time:") ls >> time;
      else if (tag == "grid:") {
        std::string kv;
        while (ls >> kv) {
          const auto eq = kv.find('=');
          if (eq == std::string::npos) continue;
          const std::string key = kv.substr(0, eq);
          const double val = std::stod(kv.substr(eq + 1));
          if (key == "dim") grid.dim = int(val);
          else if (key == "length") grid.length = val;
          else if (key == "cells") grid.cells = int(val);
          else if (key == "w2") grid.widths[0] = val;
          else if (key == "w3") grid.widths[1] = val;
        }
      } else if (tag == "bins:") {
        double p;
        while (ls >> p) pivots.push_back(p);
      }
      continue;
    }
    data.push_back(line);
  }
  if (kind == "grid") {
    if (pivots.empty()) throw Error("measure text: missing bins header");
    auto bins = TypeBinning::from_pivots(pivots);
    SpatialMeasure m = SpatialMeasure::zero_grid(grid, bins, time);
    if (m.nbins() != int(pivots.size()))
      throw Error("measure text: pivot reconstruction mismatch");
    for (const auto& row : data) {
      std::istringstream rs(row);
      int cell, bin;
      double pivot, mass;
      rs >> cell >> bin >> pivot >> mass;
      m.at(cell, bin) = mass;
    }
    return m;
  }
  if (kind == "ensemble") {
    std::vector<EnsembleAtom> atoms;
    for (const auto& row : data) {
      std::istringstream rs(row);
      EnsembleAtom a;
      rs >> a.x[0] >> a.x[1] >> a.x[2] >> a.mass >> a.weight;
      atoms.push_back(a);
    }
    return SpatialMeasure::from_atoms(std::move(atoms), nullptr, time);
  }
  throw Error("measure text: unknown kind '" + kind + "'");
}

void write_text_file(const std::string& path, const std::string& content) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  out << content;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> write_trajectory(const std::string& dir,
                                          const std::string& prefix,
                                          const Trajectory& traj) {
  std::vector<std::string> files;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    char name[128];
    std::snprintf(name, sizeof name, "%s_%03zu_t%.6f.txt", prefix.c_str(), k,
                  traj.knots[k]);
    const std::string path = dir + "/" + name;
    write_text_file(path, measure_to_text(traj.values[k]));
    files.push_back(name);
  }
  std::ostringstream idx;
  for (std::size_t k = 0; k < traj.size(); ++k)
    idx << fmt(traj.knots[k]) << ' ' << files[k] << "\n";
  write_text_file(dir + "/" + prefix + "_index.txt", idx.str());
  return files;
}

std::string pairings_csv(const Trajectory& traj, const Dictionary& dict) {
  std::ostringstream os;
  os << "t";
  for (const auto& f : dict) os << ',' << f.name;
  os << "\n";
  for (std::size_t k = 0; k < traj.size(); ++k) {
    os << fmt(traj.knots[k]);
    for (const auto& f : dict) os << ',' << fmt(pair(f.f, traj.values[k]));
    os << "\n";
  }
  return os.str();
}

std::string profile_csv(const SpatialMeasure& m) {
  m.require_grid("profile_csv");
  std::ostringstream os;
  os << "x,number_density,mass_density\n";
  const double vol = m.grid.cell_volume();
  for (int i = 0; i < m.grid.cells; ++i) {
    double n = 0.0, y = 0.0;
    for (int b = 0; b < m.nbins(); ++b) {
      n += m.at(i, b);
      y += m.at(i, b) * m.bins->pivot(b);
    }
    os << fmt(m.grid.cell_center(i)[0]) << ',' << fmt(n / vol) << ',' << fmt(y / vol)
       << "\n";
  }
  return os.str();
}

std::string exits_csv(const std::vector<ExitEvent>& exits) {
  std::ostringstream os;
  os << "time,x1,x2,x3,mass\n";
  for (const auto& e : exits)
    os << fmt(e.time) << ',' << fmt(e.position[0]) << ',' << fmt(e.position[1]) << ','
       << fmt(e.position[2]) << ',' << fmt(e.mass) << "\n";
  return os.str();
}

std::string gnuplot_script(const std::string& pairings_file,
                           const std::vector<std::string>& columns) {
  std::ostringstream os;
  os << "set datafile separator ','\n";
  os << "set key autotitle columnhead\n";
  os << "set xlabel 't'\n";
  os << "plot";
  for (std::size_t i = 0; i < columns.size(); ++i) {
    os << (i ? "," : "") << " '" << pairings_file << "' using 1:" << (i + 2)
       << " with lines";
  }
  os << "\n";
  return os.str();
}

std::string run_manifest(const std::string& config_echo,
                         const std::vector<WindowInfo>& windows,
                         const std::vector<std::string>& warnings,
                         double wall_seconds, std::uint64_t seed, int workers) {
  nlohmann::json j;
  j["config"] = nlohmann::json::parse(config_echo.empty() ? "{}" : config_echo);
  j["seed"] = seed;
  j["workers"] = workers;
  j["warnings"] = warnings;
  nlohmann::json jw = nlohmann::json::array();
  for (const auto& w : windows) {
    nlohmann::json e;
    e["start"] = w.start;
    e["length"] = w.length;
    e["tau_m"] = w.tau_m;
    e["r_m"] = w.r_m;
    e["iterations"] = w.iterations;
    e["halvings"] = w.halvings;
    e["ratios"] = w.ratios;
    e["max_ratio"] = w.max_ratio;
    e["final_diff"] = w.final_diff;
    jw.push_back(e);
  }
  j["windows"] = jw;
  j["wall_seconds"] = wall_seconds;  // not covered by reproducibility
  return j.dump(2) + "\n";
}

std::string replica_manifest(std::uint64_t seed, int replicas, long scale_n) {
  nlohmann::json j;
  j["seed"] = seed;
  j["scale_n"] = scale_n;
  nlohmann::json r = nlohmann::json::array();
  for (int i = 0; i < replicas; ++i) r.push_back({{"replica", i}, {"stream", i}});
  j["replicas"] = r;
  return j.dump(2) + "\n";
}

}  // namespace coagflow
