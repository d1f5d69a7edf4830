#include "coagflow/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace coagflow {

SpatialMeasure SpatialMeasure::zero_grid(GridSpec grid,
                                         std::shared_ptr<const TypeBinning> bins,
                                         double time) {
  SpatialMeasure m;
  m.kind = Kind::grid;
  m.time = time;
  m.grid = grid;
  m.bins = std::move(bins);
  if (!m.bins) throw RepresentationError("grid measure needs a type binning");
  m.masses.assign(std::size_t(grid.cells) * m.bins->size(), 0.0);
  return m;
}

SpatialMeasure SpatialMeasure::from_atoms(std::vector<EnsembleAtom> atoms,
                                          std::shared_ptr<const TypeBinning> bins,
                                          double time) {
  SpatialMeasure m;
  m.kind = Kind::ensemble;
  m.time = time;
  m.bins = std::move(bins);
  m.atoms = std::move(atoms);
  return m;
}

int SpatialMeasure::deposit(int cell, double m, double amount) {
  auto s = bins->split(m);
  at(cell, s.lo) += amount * s.w_lo;
  if (s.hi != s.lo) at(cell, s.hi) += amount * s.w_hi;
  return s.overflow ? 1 : 0;
}

void SpatialMeasure::require_grid(const char* what) const {
  if (kind != Kind::grid)
    throw RepresentationError(std::string(what) + " requires the grid representation");
}

void SpatialMeasure::require_same_layout(const SpatialMeasure& other,
                                         const char* what) const {
  if (kind != other.kind)
    throw RepresentationError(std::string(what) + ": representation mismatch");
  if (kind == Kind::grid) {
    if (!(grid == other.grid) || !bins || !other.bins || !bins->same_grid(*other.bins))
      throw RepresentationError(std::string(what) + ": grid layout mismatch");
  }
}

double pair(const TestFn& f, const SpatialMeasure& mu) {
  std::vector<double> terms;
  if (mu.kind == SpatialMeasure::Kind::grid) {
    const int nb = mu.nbins();
    terms.reserve(mu.masses.size());
    for (int i = 0; i < mu.grid.cells; ++i) {
      const Vec xc = mu.grid.cell_center(i);
      for (int b = 0; b < nb; ++b) {
        const double m = mu.at(i, b);
        if (m != 0.0) terms.push_back(m * f(xc, mu.bins->pivot(b)));
      }
    }
  } else {
    terms.reserve(mu.atoms.size());
    for (const auto& a : mu.atoms)
      if (a.weight != 0.0) terms.push_back(a.weight * f(a.x, a.mass));
  }
  return pairwise_sum(terms);
}

namespace {

// Consolidated (position, type-bin) weights of an ensemble.
std::vector<double> consolidated_weights(const SpatialMeasure& mu) {
  const auto& atoms = mu.atoms;
  std::vector<std::size_t> idx(atoms.size());
  std::iota(idx.begin(), idx.end(), 0);
  auto key_mass = [&](const EnsembleAtom& a) {
    return mu.bins ? double(mu.bins->containing_index(a.mass)) : a.mass;
  };
  std::sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) {
    const auto& a = atoms[i];
    const auto& b = atoms[j];
    if (a.x != b.x) return a.x < b.x;
    return key_mass(a) < key_mass(b);
  });
  std::vector<double> groups;
  std::size_t k = 0;
  while (k < idx.size()) {
    const auto& a = atoms[idx[k]];
    double w = a.weight;
    std::size_t j = k + 1;
    while (j < idx.size()) {
      const auto& b = atoms[idx[j]];
      if (b.x != a.x || key_mass(b) != key_mass(a)) break;
      w += b.weight;
      ++j;
    }
    groups.push_back(w);
    k = j;
  }
  return groups;
}

}  // namespace

double tv_norm(const SpatialMeasure& mu) {
  std::vector<double> terms;
  if (mu.kind == SpatialMeasure::Kind::grid) {
    terms.reserve(mu.masses.size());
    for (double m : mu.masses) terms.push_back(std::abs(m));
  } else {
    for (double w : consolidated_weights(mu)) terms.push_back(std::abs(w));
  }
  return pairwise_sum(terms);
}

double moi_norm(const SpatialMeasure& mu) {
  mu.require_grid("moi_norm");
  const int nb = mu.nbins();
  const double vol = mu.grid.cell_volume();
  double worst = 0.0;
  for (int i = 0; i < mu.grid.cells; ++i) {
    double tv = 0.0;
    for (int b = 0; b < nb; ++b) tv += std::abs(mu.at(i, b));
    worst = std::max(worst, tv / vol);
  }
  return worst;
}

double tv_distance(const SpatialMeasure& a, const SpatialMeasure& b) {
  a.require_same_layout(b, "tv_distance");
  if (a.kind == SpatialMeasure::Kind::grid) {
    std::vector<double> terms(a.masses.size());
    for (std::size_t k = 0; k < a.masses.size(); ++k)
      terms[k] = std::abs(a.masses[k] - b.masses[k]);
    return pairwise_sum(terms);
  }
  SpatialMeasure diff = a;
  for (const auto& atom : b.atoms) {
    EnsembleAtom neg = atom;
    neg.weight = -neg.weight;
    diff.atoms.push_back(neg);
  }
  return tv_norm(diff);
}

double total_weight(const SpatialMeasure& mu) {
  return pair([](const Vec&, double) { return 1.0; }, mu);
}

double total_mass_pairing(const SpatialMeasure& mu) {
  return pair([](const Vec&, double y) { return y; }, mu);
}

double min_grid_mass(const SpatialMeasure& mu) {
  mu.require_grid("min_grid_mass");
  double m = 0.0;
  for (double v : mu.masses) m = std::min(m, v);
  return m;
}

SpatialMeasure scaled(const SpatialMeasure& mu, double factor) {
  SpatialMeasure out = mu;
  if (out.kind == SpatialMeasure::Kind::grid) {
    for (double& m : out.masses) m *= factor;
  } else {
    for (auto& a : out.atoms) a.weight *= factor;
  }
  return out;
}

SpatialMeasure axpy(const SpatialMeasure& a, const SpatialMeasure& b, double factor) {
  a.require_same_layout(b, "axpy");
  SpatialMeasure out = a;
  if (a.kind == SpatialMeasure::Kind::grid) {
    for (std::size_t k = 0; k < out.masses.size(); ++k)
      out.masses[k] += factor * b.masses[k];
  } else {
    for (const auto& atom : b.atoms) {
      EnsembleAtom s = atom;
      s.weight *= factor;
      out.atoms.push_back(s);
    }
  }
  return out;
}

EdgeFeet backward_edge_feet(const GridSpec& grid, double s, double t,
                            const FlowMap& flow, bool with_entry_age) {
  EdgeFeet feet;
  const int n = grid.cells;
  feet.x1.resize(n + 1);
  feet.entry_age.assign(n + 1, kInf);
  for (int e = 0; e <= n; ++e) {
    Vec x = grid.cell_center(0);
    x[0] = std::min(e * grid.cell_width(), grid.length * (1.0 - 1e-15));
    AdvectResult r = flow.advect(t, s, x);
    if (!r.exited) {
      feet.x1[e] = r.position[0];
    } else if (r.exit.boundary == BoundaryClass::inflow) {
      feet.x1[e] = -1.0;
      if (with_entry_age) feet.entry_age[e] = t - r.exit.time;
    } else {
      throw FlowAssumptionViolation(
          "backward characteristic of a grid edge leaves through " +
          to_string(r.exit.boundary));
    }
  }
  return feet;
}

PushforwardResult grid_remap(const SpatialMeasure& mu, const EdgeFeet& feet,
                             double new_time) {
  mu.require_grid("grid_remap");
  const int n = mu.grid.cells;
  const int nb = mu.nbins();
  const double w = mu.grid.cell_width();
  SpatialMeasure out = SpatialMeasure::zero_grid(mu.grid, mu.bins, new_time);
  for (int i = 0; i < n; ++i) {
    const double lo = std::max(feet.x1[i], 0.0);
    const double hi = std::max(feet.x1[i + 1], 0.0);
    if (hi <= lo) continue;
    // Overlap the backward interval with the source cells.
    const int j0 = std::min(int(lo / w), n - 1);
    const int j1 = std::min(int(hi / w), n - 1);
    for (int j = j0; j <= j1; ++j) {
      const double a = std::max(lo, j * w);
      const double b = std::min(hi, (j + 1) * w);
      if (b <= a) continue;
      const double frac = (b - a) / w;
      for (int bn = 0; bn < nb; ++bn) {
        const double m = mu.at(j, bn);
        if (m != 0.0) out.at(i, bn) += frac * m;
      }
    }
  }
  PushforwardResult res{std::move(out), 0.0, 0.0};
  res.outflow_weight = total_weight(mu) - total_weight(res.measure);
  res.outflow_mass = total_mass_pairing(mu) - total_mass_pairing(res.measure);
  return res;
}

PushforwardResult transport_pushforward(const SpatialMeasure& mu, double s,
                                        double t, const FlowMap& flow) {
  if (t < s) throw Error("transport_pushforward needs s <= t");
  if (flow.field().is_zero() || t == s) {
    PushforwardResult res{mu, 0.0, 0.0};
    res.measure.time = t;
    return res;
  }
  if (mu.kind == SpatialMeasure::Kind::ensemble) {
    PushforwardResult res;
    res.measure = mu;
    res.measure.time = t;
    res.measure.atoms.clear();
    for (const auto& a : mu.atoms) {
      AdvectResult r = flow.advect(s, t, a.x);
      if (r.exited) {
        res.outflow_weight += a.weight;
        res.outflow_mass += a.weight * a.mass;
        continue;
      }
      EnsembleAtom moved = a;
      moved.x = r.position;
      res.measure.atoms.push_back(moved);
    }
    return res;
  }
  if (!flow.field().axially_uniform())
    throw NotApplicableError(
        "grid transport requires an axially uniform velocity field");
  EdgeFeet feet = backward_edge_feet(mu.grid, s, t, flow, false);
  return grid_remap(mu, feet, t);
}

namespace {

struct PairTables {
  std::vector<double> kval;                    // K on pivot pairs
  std::vector<TypeBinning::Split> splits;      // split of pivot sums
  int nb = 0;
};

PairTables build_pair_tables(const TypeBinning& bins, const Kernel& kernel) {
  PairTables t;
  t.nb = bins.size();
  t.kval.resize(std::size_t(t.nb) * t.nb);
  t.splits.resize(std::size_t(t.nb) * t.nb);
  for (int a = 0; a < t.nb; ++a)
    for (int b = 0; b < t.nb; ++b) {
      t.kval[std::size_t(a) * t.nb + b] = kernel.evaluate(bins.pivot(a), bins.pivot(b));
      t.splits[std::size_t(a) * t.nb + b] = bins.split(bins.pivot(a) + bins.pivot(b));
    }
  return t;
}

}  // namespace

CoagRates compute_coag_rates(const SpatialMeasure& c, const SpatialMeasure& mu,
                             const Kernel& kernel, const Delocalisation& h) {
  CoagRates out;
  if (c.kind == SpatialMeasure::Kind::ensemble) {
    if (mu.kind != SpatialMeasure::Kind::ensemble)
      throw RepresentationError("coagulation rates: mixed representations");
    out.gain = SpatialMeasure::from_atoms({}, c.bins, c.time);
    out.loss = SpatialMeasure::from_atoms({}, c.bins, c.time);
    for (const auto& a : c.atoms) {
      for (const auto& p : mu.atoms) {
        const double k = kernel.evaluate(a.mass, p.mass);
        if (k == 0.0) continue;
        const double h12 = h.evaluate(a.x, p.x);
        const double h21 = h.evaluate(p.x, a.x);
        if (h12 != 0.0)
          out.gain.atoms.push_back({a.x, a.mass + p.mass, 0.5 * k * h12 * a.weight * p.weight});
        if (h12 != 0.0 || h21 != 0.0)
          out.loss.atoms.push_back({a.x, a.mass, 0.5 * k * (h12 + h21) * a.weight * p.weight});
      }
    }
    return out;
  }

  c.require_same_layout(mu, "coagulation rates");
  const int nb = c.nbins();
  const int ncells = c.grid.cells;
  out.gain = SpatialMeasure::zero_grid(c.grid, c.bins, c.time);
  out.loss = SpatialMeasure::zero_grid(c.grid, c.bins, c.time);
  PairTables tab = build_pair_tables(*c.bins, kernel);

  const bool cellwise = h.form() == DelocalisationForm::cells;
  std::vector<double> partner;  // h-weighted aggregate of mu per destination
  std::vector<double> partner_sym;
  std::vector<int> cell_group(ncells, 0);
  std::vector<std::vector<double>> group_agg;
  if (cellwise) {
    if (ncells % h.cell_count() != 0)
      throw ConfigError("grid cells must refine the delocalisation cells");
    group_agg.assign(h.cell_count(), std::vector<double>(nb, 0.0));
    for (int j = 0; j < ncells; ++j) {
      cell_group[j] = h.cell_index(c.grid.cell_center(j));
      for (int b = 0; b < nb; ++b) group_agg[cell_group[j]][b] += mu.at(j, b);
    }
  }

  for (int i = 0; i < ncells; ++i) {
    const double* agg = nullptr;
    const double* agg_sym = nullptr;
    double hval = 0.0;
    if (cellwise) {
      agg = group_agg[cell_group[i]].data();
      agg_sym = agg;
      hval = 1.0 / h.cell_volume(cell_group[i]);
    } else {
      partner.assign(nb, 0.0);
      partner_sym.assign(nb, 0.0);
      const Vec xi = c.grid.cell_center(i);
      for (int j = 0; j < ncells; ++j) {
        const Vec xj = c.grid.cell_center(j);
        const double hij = h.evaluate(xi, xj);
        const double hji = h.evaluate(xj, xi);
        if (hij == 0.0 && hji == 0.0) continue;
        for (int b = 0; b < nb; ++b) {
          const double m = mu.at(j, b);
          if (m == 0.0) continue;
          partner[b] += hij * m;
          partner_sym[b] += 0.5 * (hij + hji) * m;
        }
      }
      agg = partner.data();
      agg_sym = partner_sym.data();
      hval = 1.0;
    }
    for (int b = 0; b < nb; ++b) {
      const double cm = c.at(i, b);
      if (cm == 0.0) continue;
      const double* krow = &tab.kval[std::size_t(b) * nb];
      const TypeBinning::Split* srow = &tab.splits[std::size_t(b) * nb];
      double loss_acc = 0.0;
      for (int b2 = 0; b2 < nb; ++b2) {
        const double m2 = agg[b2];
        const double m2s = agg_sym[b2];
        if (m2 == 0.0 && m2s == 0.0) continue;
        const double k = krow[b2];
        if (k == 0.0) continue;
        loss_acc += k * hval * m2s;
        const double g = 0.5 * k * hval * cm * m2;
        if (g != 0.0) {
          const auto& s = srow[b2];
          out.gain.at(i, s.lo) += g * s.w_lo;
          if (s.hi != s.lo) out.gain.at(i, s.hi) += g * s.w_hi;
          if (s.overflow) ++out.overflow_events;
        }
      }
      out.loss.at(i, b) += loss_acc * cm;
    }
  }
  return out;
}

SpatialMeasure coag_generator_apply(const SpatialMeasure& c,
                                    const SpatialMeasure& mu_param,
                                    const Kernel& kernel, const Delocalisation& h) {
  CoagRates r = compute_coag_rates(c, mu_param, kernel, h);
  if (c.kind == SpatialMeasure::Kind::grid) return axpy(r.gain, r.loss, -1.0);
  SpatialMeasure out = r.gain;
  for (auto& a : r.loss.atoms) {
    a.weight = -a.weight;
    out.atoms.push_back(a);
  }
  return out;
}

double operator_norm_bound_H(const SpatialMeasure& mu_param, double k_inf, double c1) {
  return 1.5 * k_inf * c1 * tv_norm(mu_param);
}

SpatialMeasure to_grid(const SpatialMeasure& ens, GridSpec grid,
                       std::shared_ptr<const TypeBinning> bins) {
  if (ens.kind != SpatialMeasure::Kind::ensemble)
    throw RepresentationError("to_grid takes an ensemble measure");
  SpatialMeasure out = SpatialMeasure::zero_grid(grid, std::move(bins), ens.time);
  for (const auto& a : ens.atoms)
    out.deposit(grid.cell_of(a.x[0]), a.mass, a.weight);
  return out;
}

SpatialMeasure to_ensemble_stratified(const SpatialMeasure& g, long scale) {
  g.require_grid("to_ensemble_stratified");
  const int nb = g.nbins();
  struct Slot { int cell; int bin; double target; long count; double frac; };
  std::vector<Slot> slots;
  double total = 0.0;
  for (int i = 0; i < g.grid.cells; ++i)
    for (int b = 0; b < nb; ++b) {
      const double m = g.at(i, b);
      if (m == 0.0) continue;
      if (m < 0.0)
        throw ModelError("stratified sampling needs a nonnegative measure");
      const double target = m * double(scale);
      slots.push_back({i, b, target, long(std::floor(target)), 0.0});
      slots.back().frac = target - double(slots.back().count);
      total += target;
    }
  long want = std::lround(total);
  long have = 0;
  for (const auto& s : slots) have += s.count;
  // Largest-remainder rounding keeps the total particle count exact.
  std::vector<std::size_t> order(slots.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (slots[a].frac != slots[b].frac) return slots[a].frac > slots[b].frac;
    return a < b;
  });
  for (std::size_t k = 0; k < order.size() && have < want; ++k, ++have)
    ++slots[order[k]].count;

  std::vector<EnsembleAtom> atoms;
  atoms.reserve(std::size_t(std::max(want, 0L)));
  const double w = 1.0 / double(scale);
  for (const auto& s : slots) {
    const Vec xc = g.grid.cell_center(s.cell);
    for (long k = 0; k < s.count; ++k)
      atoms.push_back({xc, g.bins->pivot(s.bin), w});
  }
  return SpatialMeasure::from_atoms(std::move(atoms), g.bins, g.time);
}

void Trajectory::push(double t, SpatialMeasure m) {
  if (!knots.empty() && t <= knots.back())
    throw Error("trajectory knots must be strictly increasing");
  if (!values.empty() && values.back().kind != m.kind)
    throw RepresentationError("trajectory measures must share one representation");
  knots.push_back(t);
  values.push_back(std::move(m));
}

const SpatialMeasure& Trajectory::at(double t) const {
  if (empty()) throw Error("empty trajectory");
  auto it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) return values.front();
  return values[std::size_t(it - knots.begin()) - 1];
}

}  // namespace coagflow
