#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "coagflow/io.hpp"
#include "coagflow/verify.hpp"

namespace {

using namespace coagflow;

struct CommonArgs {
  std::string scenario_file;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  int workers = 0;
  std::vector<double> knots;
};

Scenario load(const CommonArgs& args) {
  Scenario sc = args.scenario_file.empty()
                    ? scenario_from_json_text(canonical_scenario_json(), "builtin")
                    : load_scenario(args.scenario_file);
  if (args.seed) sc.numerics.seed = *args.seed;
  if (!args.knots.empty()) sc.knots = args.knots;
  return sc;
}

int effective_workers(const CommonArgs& args) {
  if (args.workers > 0) return args.workers;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? int(hc) : 1;
}

void emit_det_outputs(const Scenario& sc, const SolveResult& run,
                      const std::string& out_dir, double wall, int workers) {
  if (out_dir.empty()) return;
  write_trajectory(out_dir, "traj", run.trajectory);
  const Dictionary dict = sc.dictionary();
  write_text_file(out_dir + "/pairings.csv", pairings_csv(run.trajectory, dict));
  std::vector<std::string> cols;
  for (const auto& f : dict) cols.push_back(f.name);
  write_text_file(out_dir + "/plot.gp", gnuplot_script("pairings.csv", cols));
  if (!run.trajectory.empty() && run.trajectory.back().is_grid())
    write_text_file(out_dir + "/profile_final.csv",
                    profile_csv(run.trajectory.back()));
  write_text_file(out_dir + "/manifest.json",
                  run_manifest(sc.raw_config, run.windows, run.warnings, wall,
                               sc.numerics.seed, workers));
}

int cmd_det(const CommonArgs& args, bool picard) {
  Scenario sc = load(args);
  const auto start = std::chrono::steady_clock::now();
  SolveResult run;
  if (picard) {
    run = picard_solve(sc.initial_measure(), sc.horizon, sc.numerics.picard,
                       sc.schedule(), *sc.inception, sc.knots);
  } else {
    run = direct_solve(sc.initial_measure(), sc.horizon, sc.schedule(),
                       *sc.inception, sc.knots);
  }
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  emit_det_outputs(sc, run, args.out_dir, wall, effective_workers(args));
  std::printf("%s: %ld substeps, %zu windows, final tv %.6g, wall %.2fs\n",
              picard ? "picard" : "det-solve", run.total_substeps,
              run.windows.size(),
              run.trace.empty() ? tv_norm(sc.initial_measure()) : run.trace.back().tv,
              wall);
  for (const auto& w : run.warnings) std::printf("warning: %s\n", w.c_str());
  return 0;
}

int cmd_stoch(const CommonArgs& args) {
  Scenario sc = load(args);
  const auto start = std::chrono::steady_clock::now();
  const Dictionary dict = smooth_subset(sc.dictionary());
  ReplicaMoments mom = replica_moments(
      sc.initial_measure(), sc.horizon, sc.numerics.particles, sc.numerics.replicas,
      sc.numerics.seed, sc.stoch_models(), sc.knots, dict, effective_workers(args));
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (!args.out_dir.empty()) {
    // Snapshot files and the exits log come from a dedicated replica 0 run.
    StochResult one = simulate(sc.initial_measure(), sc.horizon,
                               sc.numerics.particles, sc.numerics.seed, 0,
                               sc.stoch_models(), sc.knots);
    write_trajectory(args.out_dir, "snap", one.snapshots);
    write_text_file(args.out_dir + "/exits.csv", exits_csv(one.exits));
    write_text_file(args.out_dir + "/replicas.json",
                    replica_manifest(sc.numerics.seed, sc.numerics.replicas,
                                     sc.numerics.particles));
    std::ostringstream os;
    os << "t";
    for (const auto& f : dict) os << ',' << f.name << ",stderr_" << f.name;
    os << "\n";
    for (std::size_t k = 0; k < mom.knots.size(); ++k) {
      os << mom.knots[k];
      for (std::size_t f = 0; f < dict.size(); ++f)
        os << ',' << mom.mean[k][f] << ',' << mom.stderr_[k][f];
      os << "\n";
    }
    write_text_file(args.out_dir + "/moments.csv", os.str());
    write_text_file(args.out_dir + "/manifest.json",
                    run_manifest(sc.raw_config, {}, {}, wall, sc.numerics.seed,
                                 effective_workers(args)));
  }
  std::printf("stoch-solve: N=%ld R=%d knots=%zu wall %.2fs\n", sc.numerics.particles,
              sc.numerics.replicas, mom.knots.size(), wall);
  return 0;
}

int cmd_flow_probe(const CommonArgs& args) {
  Scenario sc = load(args);
  const double t0 = sc.flow->residence_bound();
  const auto b = sc.velocity->bounds();
  std::printf("t0 = %g\n", t0);
  std::printf("sup|u| = %g  sup|div u| = %g  opnorm(grad u) = %g  sup|grad div u| = %g\n",
              b.sup_speed, b.sup_divergence, b.sup_grad_opnorm, b.sup_grad_div);
  std::printf("entry-time gradient estimate (sampled) = %g\n",
              sc.flow->entry_time_gradient_estimate());
  return 0;
}

int cmd_verify(const CommonArgs& args, bool quick) {
  Scenario sc = load(args);
  SuiteOptions opt;
  opt.include_stochastic = !quick;
  opt.workers = effective_workers(args);
  const auto start = std::chrono::steady_clock::now();
  std::vector<PropertyReport> reports = run_suite(sc, opt);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::fputs(reports_text(reports).c_str(), stdout);
  std::printf("verify: %zu properties, wall %.1fs\n", reports.size(), wall);
  if (!args.out_dir.empty()) {
    write_text_file(args.out_dir + "/report.json", reports_json(reports));
    write_text_file(args.out_dir + "/report.txt", reports_text(reports));
  }
  return all_pass(reports) ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"coagflow: delocalised coagulation-advection solvers and checks"};
  app.require_subcommand(1);

  CommonArgs args;
  // Every flag can also be supplied through the COAGFLOW_* environment.
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", args.scenario_file, "scenario config file (JSON)")
        ->envname("COAGFLOW_SCENARIO");
    cmd->add_option("--out", args.out_dir, "output directory")
        ->envname("COAGFLOW_OUT");
    cmd->add_option_function<std::uint64_t>(
           "--seed", [&args](const std::uint64_t& v) { args.seed = v; },
           "override the scenario seed")
        ->envname("COAGFLOW_SEED");
    cmd->add_option("--workers", args.workers, "parallel worker cap (0 = cores)")
        ->envname("COAGFLOW_WORKERS");
    cmd->add_option("--knots", args.knots, "output knot times")
        ->delimiter(',')
        ->envname("COAGFLOW_KNOTS");
  };

  auto* det = app.add_subcommand("det-solve", "self-consistent deterministic solve");
  add_common(det);
  auto* pic = app.add_subcommand("picard", "fixed-point iteration solve");
  add_common(pic);
  auto* sto = app.add_subcommand("stoch-solve", "stochastic particle replicas");
  add_common(sto);
  auto* ver = app.add_subcommand("verify", "run the property suite");
  add_common(ver);
  bool quick = false;
  ver->add_flag("--quick", quick, "skip the stochastic convergence study");
  auto* probe = app.add_subcommand("flow-probe", "print flow-map diagnostics");
  add_common(probe);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (det->parsed()) return cmd_det(args, false);
    if (pic->parsed()) return cmd_det(args, true);
    if (sto->parsed()) return cmd_stoch(args);
    if (ver->parsed()) return cmd_verify(args, quick);
    if (probe->parsed()) return cmd_flow_probe(args);
  } catch (const coagflow::ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
