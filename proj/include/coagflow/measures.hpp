#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "coagflow/binning.hpp"
#include "coagflow/common.hpp"
#include "coagflow/flowfield.hpp"
#include "coagflow/rng.hpp"
#include "coagflow/typespace.hpp"

namespace coagflow {

// Axial spatial grid: `cells` equal slabs over [0, L), each spanning the full
// cross-section.
struct GridSpec {
  int dim = 1;
  double length = 1.0;
  std::array<double, 2> widths{1.0, 1.0};
  int cells = 1;

  double cell_width() const { return length / cells; }
  double cross_area() const {
    double a = 1.0;
    for (int i = 1; i < dim; ++i) a *= widths[i - 1];
    return a;
  }
  double cell_volume() const { return cell_width() * cross_area(); }
  Vec cell_center(int i) const {
    Vec x = zero_vec();
    x[0] = (i + 0.5) * cell_width();
    for (int k = 1; k < dim; ++k) x[k] = 0.5 * widths[k - 1];
    return x;
  }
  int cell_of(double x1) const {
    int i = int(x1 / length * cells);
    return std::min(std::max(i, 0), cells - 1);
  }
  bool operator==(const GridSpec&) const = default;
};

struct EnsembleAtom {
  Vec x = zero_vec();
  double mass = 0.0;    // particle type (scalar mass)
  double weight = 0.0;  // signed weight
};

// Finite signed measure on position x type, as either a weighted particle
// ensemble or a cell/bin histogram of signed masses.
class SpatialMeasure {
 public:
  enum class Kind { ensemble, grid };

  static SpatialMeasure zero_grid(GridSpec grid,
                                  std::shared_ptr<const TypeBinning> bins,
                                  double time = 0.0);
  static SpatialMeasure from_atoms(std::vector<EnsembleAtom> atoms,
                                   std::shared_ptr<const TypeBinning> bins = nullptr,
                                   double time = 0.0);

  Kind kind = Kind::grid;
  double time = 0.0;

  GridSpec grid;
  std::shared_ptr<const TypeBinning> bins;
  std::vector<double> masses;  // grid data, [cell * nbins + bin]

  std::vector<EnsembleAtom> atoms;  // ensemble data

  bool is_grid() const { return kind == Kind::grid; }
  int nbins() const { return bins ? bins->size() : 0; }
  double& at(int cell, int bin) { return masses[std::size_t(cell) * nbins() + bin]; }
  double at(int cell, int bin) const { return masses[std::size_t(cell) * nbins() + bin]; }

  // Deposit `amount` of number at particle mass m into cell (grid form),
  // splitting between the bracketing pivots.  Returns overflow count.
  int deposit(int cell, double m, double amount);

  void require_grid(const char* what) const;
  void require_same_layout(const SpatialMeasure& other, const char* what) const;
};

using TestFn = std::function<double(const Vec&, double mass)>;

// <f, mu>; grid form evaluates f at cell centers and bin pivots.
double pair(const TestFn& f, const SpatialMeasure& mu);

// Total variation norm.  Ensemble atoms are consolidated on exact position
// equality and type-bin identity (exact mass when no binning is attached).
double tv_norm(const SpatialMeasure& mu);

// esssup_x of the per-position type-space TV (grid form only).
double moi_norm(const SpatialMeasure& mu);

// Sum of |a - b| over matching cells/bins (grid) or of consolidated weights
// (ensemble); both measures must share the layout.
double tv_distance(const SpatialMeasure& a, const SpatialMeasure& b);

double total_weight(const SpatialMeasure& mu);       // <1, mu>
double total_mass_pairing(const SpatialMeasure& mu); // <y, mu>
double min_grid_mass(const SpatialMeasure& mu);

SpatialMeasure scaled(const SpatialMeasure& mu, double factor);
// a + factor * b (same layout).
SpatialMeasure axpy(const SpatialMeasure& a, const SpatialMeasure& b, double factor);

// Transport pushforward over [s, t] (s <= t).  Ensemble: advect atoms, drop
// those leaving X.  Grid: conservative semi-Lagrangian remap from the
// backward images of the cell edges; the part of a backward image that lies
// upstream of Gamma_in contributes nothing (boundary inception fills it).
// The grid path requires an axially uniform field (u = (u1(t,x1), 0, ...)).
struct PushforwardResult {
  SpatialMeasure measure;
  double outflow_weight = 0.0;  // number removed through Gamma_out
  double outflow_mass = 0.0;    // type mass removed
};
PushforwardResult transport_pushforward(const SpatialMeasure& mu, double s,
                                        double t, const FlowMap& flow);

// Backward x1-feet of the grid edges for one transport interval; cached by
// the deterministic solver when the field is time independent.
struct EdgeFeet {
  std::vector<double> x1;        // foot of each edge, -1 when it left through Gamma_in
  std::vector<double> entry_age; // t - s(t, edge): backward time to Gamma_in (inf if never)
};
EdgeFeet backward_edge_feet(const GridSpec& grid, double s, double t,
                            const FlowMap& flow, bool with_entry_age);
PushforwardResult grid_remap(const SpatialMeasure& mu, const EdgeFeet& feet,
                             double new_time);

// Gain and loss rates of the coagulation generator parametrised by mu_param,
// applied to c.  Both outputs are nonnegative for nonnegative inputs;
// the generator itself is gain - loss.
struct CoagRates {
  SpatialMeasure gain;
  SpatialMeasure loss;
  int overflow_events = 0;
};
CoagRates compute_coag_rates(const SpatialMeasure& c, const SpatialMeasure& mu_param,
                             const Kernel& kernel, const Delocalisation& h);
SpatialMeasure coag_generator_apply(const SpatialMeasure& c,
                                    const SpatialMeasure& mu_param,
                                    const Kernel& kernel, const Delocalisation& h);

// (3/2) K_inf C1 ||mu||_TV: certified operator norm bound of the coagulation
// generator on measures.
double operator_norm_bound_H(const SpatialMeasure& mu_param, double k_inf, double c1);

// Representation conversions.
SpatialMeasure to_grid(const SpatialMeasure& ensemble, GridSpec grid,
                       std::shared_ptr<const TypeBinning> bins);
// Stratified conversion: per (cell, bin) spawn round(scale * mass) particles
// at the cell center (largest-remainder rounding keeps the total exact).
SpatialMeasure to_ensemble_stratified(const SpatialMeasure& grid_measure,
                                      long scale);

// Time-indexed family of measures; piecewise-constant-left interpolation.
class Trajectory {
 public:
  std::vector<double> knots;
  std::vector<SpatialMeasure> values;

  void push(double t, SpatialMeasure m);
  const SpatialMeasure& at(double t) const;
  const SpatialMeasure& front() const { return values.front(); }
  const SpatialMeasure& back() const { return values.back(); }
  bool empty() const { return knots.empty(); }
  std::size_t size() const { return knots.size(); }
};

}  // namespace coagflow
