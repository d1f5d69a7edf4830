#include "coagflow/stoch_solver.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <queue>
#include <thread>

namespace coagflow {

namespace {

struct Particle {
  Vec pos = zero_vec();
  double t_ref = 0.0;
  double mass = 0.0;
  int cell = 0;
  int slot = -1;  // index in the cell member list, -1 when dead
  std::uint64_t seq = 0;
};

struct Crossing {
  double time = kInf;
  int particle = -1;
  std::uint64_t seq = 0;
  Vec position = zero_vec();
  int new_cell = 0;  // -1: outflow exit, -2: side exit
  bool operator>(const Crossing& o) const { return time > o.time; }
};

class EventSystem {
 public:
  EventSystem(long scale_n, const StochModels& models, Philox rng)
      : n_scale_(scale_n), models_(models), rng_(rng) {
    const auto& h = *models_.deloc;
    const int j = h.cell_count();
    cells_.resize(j);
    // Majorant prefactor per cell: K_inf * C1_cell / (2N) with
    // C1_cell = 1/vol for the cell form and the global C1 otherwise.
    majorant_prefactor_.resize(j);
    for (int c = 0; c < j; ++c) {
      const double c1 = (h.form() == DelocalisationForm::cells)
                            ? 1.0 / h.cell_volume(c)
                            : h.c1();
      majorant_prefactor_[c] = models_.kernel->bound() * c1 / (2.0 * double(scale_n));
    }
    smooth_ = h.form() == DelocalisationForm::smooth;
    const auto& domain = models_.flow->domain();
    interior_rate_ = 0.0;
    for (const auto& comp : models_.inception->interior())
      interior_rate_ += comp.rate_density * domain.volume();
    boundary_rate_ = 0.0;
    for (const auto& comp : models_.inception->boundary())
      boundary_rate_ += comp.rate_per_area * domain.inflow_area();
  }

  void insert(const Vec& x, double mass, double t) {
    Particle p;
    p.pos = x;
    p.t_ref = t;
    p.mass = mass;
    p.cell = models_.deloc->cell_index(x);
    p.seq = ++seq_counter_;
    const int id = int(particles_.size());
    particles_.push_back(p);
    attach(id);
    schedule_crossing(id, t);
  }

  long alive() const { return alive_; }

  double coag_rate(int cell) const {
    const double n = double(cells_[cell].size());
    return majorant_prefactor_[cell] * n * (n - 1.0);
  }

  double total_coag_rate() {
    if (++resync_tick_ % 4096 == 0 || lam_dirty_) {
      lam_coag_ = 0.0;
      for (int c = 0; c < int(cells_.size()); ++c) lam_coag_ += coag_rate(c);
      lam_dirty_ = false;
    }
    return lam_coag_;
  }

  double interior_rate() const { return interior_rate_ * double(n_scale_); }
  double boundary_rate() const { return boundary_rate_ * double(n_scale_); }

  Vec position_at(const Particle& p, double t) const {
    if (t == p.t_ref || models_.flow->field().is_zero()) return p.pos;
    return models_.flow->advance_position(p.t_ref, t, p.pos, march_step(p.cell));
  }

  double march_step(int cell) const {
    const auto [lo, hi] = models_.deloc->cell_span(cell);
    const double speed = std::max(models_.flow->field().bounds().sup_speed, 1e-9);
    const double transit = (hi - lo) / speed;
    const double base = models_.flow->config().step;
    return std::clamp(0.25 * transit, base, 256.0 * base);
  }

  void run(double horizon, const std::vector<double>& knots, StochResult& out) {
    double t = 0.0;
    std::size_t knot_idx = 0;
    while (knot_idx < knots.size() && knots[knot_idx] <= 1e-15) {
      out.snapshots.push(knots[knot_idx] == 0.0 ? 0.0 : knots[knot_idx],
                         snapshot(0.0));
      ++knot_idx;
    }
    while (true) {
      const double lam_coag = total_coag_rate();
      const double lam = lam_coag + interior_rate() + boundary_rate();
      if (!(lam < 1e15))
        throw ScaleError("event rate overflow; the particle count is too large");
      const double t_jump = lam > 0.0 ? t + rng_.exponential(lam) : kInf;
      const double t_cross = peek_crossing();
      const double t_knot =
          knot_idx < knots.size() ? knots[knot_idx] : kInf;
      double tm = std::min({t_jump, t_cross, t_knot});
      if (tm > horizon && t_knot > horizon) break;
      if (t_knot <= t_cross && t_knot <= t_jump) {
        out.snapshots.push(t_knot, snapshot(t_knot));
        ++knot_idx;
        t = t_knot;
        continue;
      }
      if (t_cross <= t_jump) {
        apply_crossing(out);
        t = t_cross;
        continue;
      }
      t = t_jump;
      // Classify the tentative event.
      const double u = rng_.uniform() * lam;
      if (u < lam_coag) {
        coagulation_event(t, u, out);
      } else if (u < lam_coag + interior_rate()) {
        interior_inception(t, out);
      } else {
        boundary_inception(t, out);
      }
    }
    out.final_particles = alive_;
  }

 private:
  void attach(int id) {
    Particle& p = particles_[id];
    lam_coag_ -= coag_rate(p.cell);
    p.slot = int(cells_[p.cell].size());
    cells_[p.cell].push_back(id);
    lam_coag_ += coag_rate(p.cell);
    ++alive_;
  }

  void detach(int id) {
    Particle& p = particles_[id];
    auto& members = cells_[p.cell];
    lam_coag_ -= coag_rate(p.cell);
    const int last = members.back();
    members[p.slot] = last;
    particles_[last].slot = p.slot;
    members.pop_back();
    lam_coag_ += coag_rate(p.cell);
    p.slot = -1;
    --alive_;
  }

  double peek_crossing() {
    while (!crossings_.empty()) {
      const Crossing& c = crossings_.top();
      const Particle& p = particles_[c.particle];
      if (p.slot < 0 || p.seq != c.seq) {
        crossings_.pop();
        continue;
      }
      return c.time;
    }
    return kInf;
  }

  void apply_crossing(StochResult& out) {
    Crossing c = crossings_.top();
    crossings_.pop();
    Particle& p = particles_[c.particle];
    if (c.new_cell == -1 || c.new_cell == -2) {
      out.exits.push_back({c.time, c.position, p.mass});
      detach(c.particle);
      return;
    }
    detach(c.particle);
    p.pos = c.position;
    p.t_ref = c.time;
    p.cell = c.new_cell;
    p.seq = ++seq_counter_;
    attach(c.particle);
    schedule_crossing(c.particle, c.time);
  }

  // First time the trajectory leaves its delocalisation cell (or the domain).
  void schedule_crossing(int id, double t) {
    const auto& flow = *models_.flow;
    if (flow.field().is_zero()) return;
    Particle& p = particles_[id];
    const auto [lo, hi] = models_.deloc->cell_span(p.cell);
    const auto& domain = flow.domain();
    const double tol = flow.config().boundary_tol;

    Crossing cr;
    cr.particle = id;
    cr.seq = p.seq;
    FlowMap::IntervalExit ex = flow.first_slab_exit(t, p.pos, lo, hi,
                                                    march_step(p.cell));
    cr.time = ex.time;
    cr.position = ex.position;
    const Vec& xb = ex.position;
    if (xb[0] >= domain.length() - tol) {
      cr.new_cell = -1;
      cr.position[0] = domain.length();
    } else if (!domain.contains(xb, tol)) {
      cr.new_cell = -2;
    } else if (xb[0] >= hi - tol) {
      cr.new_cell = std::min(p.cell + 1, models_.deloc->cell_count() - 1);
      cr.position[0] = hi;
    } else {
      cr.new_cell = std::max(p.cell - 1, 0);
      cr.position[0] = lo;
    }
    crossings_.push(cr);
  }

  void coagulation_event(double t, double u, StochResult& out) {
    // Cell selection proportional to the majorant rates.
    int cell = -1;
    double acc = 0.0;
    for (int c = 0; c < int(cells_.size()); ++c) {
      acc += coag_rate(c);
      if (u < acc) {
        cell = c;
        break;
      }
    }
    if (cell < 0) return;  // rounding at the top edge
    auto& members = cells_[cell];
    const std::size_t n = members.size();
    if (n < 2) return;
    const std::size_t i = std::size_t(rng_.uniform_below(n));
    std::size_t j = std::size_t(rng_.uniform_below(n - 1));
    if (j >= i) ++j;
    Particle& pi = particles_[members[i]];
    Particle& pj = particles_[members[j]];
    const double k = models_.kernel->evaluate(pi.mass, pj.mass);
    double accept = k / models_.kernel->bound();
    Vec xi = position_at(pi, t);
    if (smooth_) {
      Vec xj = position_at(pj, t);
      accept *= models_.deloc->evaluate(xi, xj) / models_.deloc->c1();
    }
    ++out.proposed_events;
    out.kernel_sum_on_proposals += k;
    out.accept_prob_sum += accept;
    if (rng_.uniform() >= accept) return;
    ++out.accepted_events;
    // The surviving particle sits at the first argument's position.
    pi.pos = xi;
    pi.t_ref = t;
    pi.mass += pj.mass;
    detach(members_value(cell, j));
  }

  int members_value(int cell, std::size_t idx) const { return cells_[cell][idx]; }

  void interior_inception(double t, StochResult& out) {
    // Pick a component proportional to its total rate, then a mixture mass.
    double total = 0.0;
    const auto& domain = models_.flow->domain();
    for (const auto& comp : models_.inception->interior())
      total += comp.rate_density * domain.volume();
    double u = rng_.uniform() * total;
    for (const auto& comp : models_.inception->interior()) {
      const double r = comp.rate_density * domain.volume();
      if (u >= r) {
        u -= r;
        continue;
      }
      Vec x = zero_vec();
      x[0] = rng_.uniform() * domain.length();
      for (int a = 1; a < domain.dim(); ++a)
        x[a] = rng_.uniform() * domain.width(a);
      insert(x, comp.types.sample(rng_), t);
      ++out.interior_inceptions;
      return;
    }
  }

  void boundary_inception(double t, StochResult& out) {
    double total = 0.0;
    const auto& domain = models_.flow->domain();
    for (const auto& comp : models_.inception->boundary())
      total += comp.rate_per_area * domain.inflow_area();
    double u = rng_.uniform() * total;
    for (const auto& comp : models_.inception->boundary()) {
      const double r = comp.rate_per_area * domain.inflow_area();
      if (u >= r) {
        u -= r;
        continue;
      }
      Vec xi = zero_vec();
      for (int a = 1; a < domain.dim(); ++a)
        xi[a] = rng_.uniform() * domain.width(a);
      insert(xi, comp.types.sample(rng_), t);
      ++out.boundary_inceptions;
      return;
    }
  }

  SpatialMeasure snapshot(double t) const {
    std::vector<EnsembleAtom> atoms;
    atoms.reserve(std::size_t(alive_));
    const double w = 1.0 / double(n_scale_);
    for (const auto& cell : cells_)
      for (int id : cell) {
        const Particle& p = particles_[id];
        atoms.push_back({position_at(p, t), p.mass, w});
      }
    return SpatialMeasure::from_atoms(std::move(atoms), nullptr, t);
  }

  long n_scale_;
  const StochModels& models_;
  Philox rng_;
  std::vector<Particle> particles_;
  std::vector<std::vector<int>> cells_;
  std::vector<double> majorant_prefactor_;
  std::priority_queue<Crossing, std::vector<Crossing>, std::greater<Crossing>> crossings_;
  std::uint64_t seq_counter_ = 0;
  long alive_ = 0;
  double lam_coag_ = 0.0;
  bool lam_dirty_ = false;
  long resync_tick_ = 0;
  double interior_rate_ = 0.0;
  double boundary_rate_ = 0.0;
  bool smooth_ = false;
};

}  // namespace

StochResult simulate(const SpatialMeasure& c0, double horizon, long scale_n,
                     std::uint64_t seed, std::uint64_t replica,
                     const StochModels& models, const std::vector<double>& knots) {
  if (scale_n < 1) throw ConfigError("stochastic scale N must be >= 1");
  for (std::size_t k = 1; k < knots.size(); ++k)
    if (knots[k] <= knots[k - 1]) throw ConfigError("snapshot knots must increase");
  StochResult out;
  EventSystem sys(scale_n, models, Philox(seed, replica));

  if (tv_norm(c0) > 0.0) {
    SpatialMeasure ens = c0.kind == SpatialMeasure::Kind::ensemble
                             ? c0
                             : to_ensemble_stratified(c0, scale_n);
    for (const auto& a : ens.atoms) {
      const long copies = std::lround(a.weight * double(scale_n));
      for (long c = 0; c < copies; ++c) sys.insert(a.x, a.mass, 0.0);
    }
  }
  out.initial_particles = sys.alive();
  sys.run(horizon, knots, out);
  return out;
}

SpatialMeasure empirical_measure(const StochResult& result, double t) {
  return result.snapshots.at(t);
}

ReplicaMoments replica_moments(const SpatialMeasure& c0, double horizon,
                               long scale_n, int replicas, std::uint64_t seed,
                               const StochModels& models,
                               const std::vector<double>& knots,
                               const Dictionary& dict, int workers) {
  if (replicas < 2) throw ConfigError("replica_moments needs at least 2 replicas");
  ReplicaMoments out;
  out.knots = knots;
  for (const auto& f : dict) out.functionals.push_back(f.name);
  out.raw.assign(std::size_t(replicas), {});

  std::vector<std::thread> pool;
  const int nw = std::max(1, workers);
  std::atomic_long next{0};
  auto work = [&]() {
    for (;;) {
      const long r = next.fetch_add(1);
      if (r >= replicas) return;
      StochResult res =
          simulate(c0, horizon, scale_n, seed, std::uint64_t(r), models, knots);
      auto& rows = out.raw[std::size_t(r)];
      rows.assign(knots.size(), std::vector<double>(dict.size(), 0.0));
      for (std::size_t k = 0; k < knots.size(); ++k) {
        const SpatialMeasure& m = res.snapshots.values[k];
        for (std::size_t f = 0; f < dict.size(); ++f)
          rows[k][f] = pair(dict[f].f, m);
      }
    }
  };
  for (int w = 0; w < nw; ++w) pool.emplace_back(work);
  for (auto& th : pool) th.join();

  out.mean.assign(knots.size(), std::vector<double>(dict.size(), 0.0));
  out.stderr_.assign(knots.size(), std::vector<double>(dict.size(), 0.0));
  std::vector<double> vals(static_cast<std::size_t>(replicas), 0.0);
  for (std::size_t k = 0; k < knots.size(); ++k)
    for (std::size_t f = 0; f < dict.size(); ++f) {
      for (int r = 0; r < replicas; ++r) vals[std::size_t(r)] = out.raw[r][k][f];
      const double mean = pairwise_sum(vals) / double(replicas);
      std::vector<double> sq(vals.size());
      for (std::size_t r = 0; r < vals.size(); ++r)
        sq[r] = (vals[r] - mean) * (vals[r] - mean);
      const double var = pairwise_sum(sq) / double(replicas - 1);
      out.mean[k][f] = mean;
      out.stderr_[k][f] = std::sqrt(var / double(replicas));
    }
  return out;
}

}  // namespace coagflow
