// Command-line front end.
//
//   coarsen solve        [--ic NAME] [--h H] [--t-max T] [--probe T] [--out DIR]
//   coarsen scheme       [--ic NAME] [--h H] [--delta D] [--t-end T] [--out DIR]
//   coarsen simulate     [--ic NAME] [--h H] [--n N] [--seed S] [--t-end T] [--out DIR]
//   coarsen sweep-scheme --config PATH [--out DIR]
//   coarsen sweep-pdmp   --config PATH [--workers W] [--seed S] [--out DIR]
//   coarsen validate
//
// Exit codes: 0 ok, 1 validation failure or runtime error, 2 configuration or
// usage error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <limits>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "coarsen/harness.hpp"
#include "coarsen/validation.hpp"

namespace {

namespace fs = std::filesystem;
using namespace coarsen;

constexpr int kOk = 0;
constexpr int kFailure = 1;
constexpr int kUsage = 2;

struct Options {
  std::string ic;
  double h = 1e-3;
  double t_max = 1.0;
  double probe = 0.5;
  double delta = 0.025;
  double t_end = std::numeric_limits<double>::infinity();
  std::size_t n = 2;
  std::uint64_t seed = 7;
  std::string config;
  std::string out;
  std::size_t workers = 0;
  bool seed_given = false;
};

std::ofstream open_file(const fs::path& dir, const std::string& name) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  std::ofstream os(dir / name, std::ios::binary);
  if (!os) throw Error("cannot write '" + (dir / name).string() + "'");
  return os;
}

int cmd_solve(const Options& o) {
  const auto ic = make_initial_condition(o.ic.empty() ? "uniform_halves" : o.ic, o.h);
  KineticOptions opts;
  opts.t_max = o.t_max;
  const auto sol = solve_kinetic(ic.f1, ic.f2, opts);
  std::cout << "ic " << ic.name << ", h " << csv::num(o.h) << ", series terms " << sol.series_terms << '\n';
  if (o.probe <= sol.t_max()) std::cout << "a(" << csv::num(o.probe) << ") = " << sol.rate(o.probe) << '\n';
  std::cout << "blow-up time " << blowup_time(sol, 0.0) << '\n';
  std::cout << "floor horizon " << sol.horizon << " (N2 floor " << csv::num(sol.n2_floor) << ")\n";
  std::cout << "renewal residual " << renewal_residual(sol) << '\n';
  if (!o.out.empty()) {
    auto os = open_file(o.out, "kinetic_solution.csv");
    os << "t,a,L,n2\n";
    for (std::size_t i = 0; i < sol.time_count(); ++i) {
      os << csv::num(sol.time(i)) << ',' << csv::num(sol.rate[i]) << ',' << csv::num(sol.loss[i]) << ','
         << csv::num(sol.n2[i]) << '\n';
    }
  }
  return kOk;
}

int cmd_scheme(const Options& o) {
  const auto ic = make_initial_condition(o.ic.empty() ? "tent" : o.ic, o.h);
  const double t_end = std::isfinite(o.t_end) ? o.t_end : 0.4;
  const auto run = scheme_run(scheme_init(ic.f1, ic.f2, o.delta), t_end);
  if (o.out.empty()) {
    write_scheme_snapshots(std::cout, run);
  } else {
    auto os = open_file(o.out, "scheme_snapshots.csv");
    write_scheme_snapshots(os, run);
    std::cout << run.size() << " snapshots written to " << (fs::path(o.out) / "scheme_snapshots.csv").string() << '\n';
  }
  return kOk;
}

int cmd_simulate(const Options& o) {
  const auto ic = make_initial_condition(o.ic.empty() ? "two_particle" : o.ic, o.h);
  auto state = pdmp_init(ic.f1, ic.f2, o.n, o.seed);
  if (std::isfinite(o.t_end)) {
    state.run_until(o.t_end);
  } else {
    while (state.next_event_time()) state.advance();
  }
  if (o.out.empty()) {
    write_event_log(std::cout, state);
  } else {
    auto os = open_file(o.out, "event_log.csv");
    write_event_log(os, state);
  }
  std::cerr << state.events().size() << " events, " << (state.terminal() ? "cemetery reached" : "running") << " at t = "
            << csv::num(state.time()) << '\n';
  return kOk;
}

ExperimentConfig config_from(const Options& o) {
  std::ifstream in(o.config);
  if (!in) throw ConfigError("cannot open config file '" + o.config + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + o.config + "' is not valid JSON: " + e.what());
  }
  if (o.seed_given && j.is_object()) j["master_seed"] = o.seed;
  if (!o.out.empty() && j.is_object()) j["output_dir"] = o.out;
  return parse_config(j, fs::path(o.config).parent_path());
}

int cmd_sweep_scheme(const Options& o) {
  const auto cfg = config_from(o);
  const auto records = run_scheme_sweep(cfg);
  for (const auto& r : records) std::cout << "delta " << csv::num(r.param_value) << "  sup d " << csv::num(r.sup_distance) << '\n';
  for (const auto& p : write_results(records, cfg, "scheme", cfg.output_dir)) std::cout << "wrote " << p.string() << '\n';
  return kOk;
}

int cmd_sweep_pdmp(const Options& o) {
  const auto cfg = config_from(o);
  const std::size_t workers = o.workers ? o.workers : std::max(1u, std::thread::hardware_concurrency());
  const auto records = run_pdmp_sweep(cfg, workers);
  for (const auto& s : summarize_pdmp(records, cfg.eps_list)) {
    std::cout << "n " << s.n << "  used " << s.used << "  cemetery " << s.cemetery << "  median " << csv::num(s.median)
              << '\n';
  }
  for (const auto& p : write_results(records, cfg, "pdmp", cfg.output_dir)) std::cout << "wrote " << p.string() << '\n';
  return kOk;
}

int cmd_validate() {
  bool all = true;
  for (const auto& r : run_invariant_suite()) {
    all = all && r.passed;
    std::printf("%s  %-72s %s (%.2fs)\n", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.seconds);
  }
  std::printf("%s\n", all ? "all invariants hold" : "invariant suite FAILED");
  return all ? kOk : kFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-species coarsening: kinetic solver, discretization scheme and particle simulator"};
  app.set_help_flag("--help", "Print this help message and exit");
  app.require_subcommand(1);
  Options o;

  auto* solve = app.add_subcommand("solve", "Solve the kinetic equations by the renewal series");
  solve->add_option("--ic", o.ic, "Initial condition (default uniform_halves)");
  solve->add_option("--h", o.h, "Grid step")->capture_default_str();
  solve->add_option("--t-max", o.t_max, "Time horizon")->capture_default_str();
  solve->add_option("--probe", o.probe, "Print a(t) at this time")->capture_default_str();
  solve->add_option("--out", o.out, "Directory for kinetic_solution.csv");

  auto* scheme = app.add_subcommand("scheme", "Run the delta-discretization and dump bin masses");
  scheme->add_option("--ic", o.ic, "Initial condition (default tent)");
  scheme->add_option("--h", o.h, "Grid step")->capture_default_str();
  scheme->add_option("--delta", o.delta, "Bin width")->capture_default_str();
  scheme->add_option("--t-end", o.t_end, "Final time (default 0.4)");
  scheme->add_option("--out", o.out, "Directory for scheme_snapshots.csv (default stdout)");

  auto* simulate = app.add_subcommand("simulate", "Single particle-system run with event log");
  simulate->add_option("--ic", o.ic, "Initial condition (default two_particle)");
  simulate->add_option("--h", o.h, "Grid step")->capture_default_str();
  simulate->add_option("--n", o.n, "Particle count")->capture_default_str();
  simulate->add_option("--seed", o.seed, "RNG seed")->capture_default_str();
  simulate->add_option("--t-end", o.t_end, "Stop time (default: run to the end)");
  simulate->add_option("--out", o.out, "Directory for event_log.csv (default stdout)");

  auto* sweep_scheme = app.add_subcommand("sweep-scheme", "Scheme convergence sweep over delta_list");
  sweep_scheme->add_option("--config", o.config, "JSON experiment config")->required();
  sweep_scheme->add_option("--out", o.out, "Output directory (overrides output_dir)");

  auto* sweep_pdmp = app.add_subcommand("sweep-pdmp", "Particle-system sweep over n_list and replicas");
  sweep_pdmp->add_option("--config", o.config, "JSON experiment config")->required();
  sweep_pdmp->add_option("--workers", o.workers, "Worker threads (default: hardware concurrency)");
  sweep_pdmp->add_option("--seed", o.seed, "Override master_seed")->each([&](const std::string&) { o.seed_given = true; });
  sweep_pdmp->add_option("--out", o.out, "Output directory (overrides output_dir)");

  auto* validate = app.add_subcommand("validate", "Run the invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kUsage;
  }

  try {
    if (*solve) return cmd_solve(o);
    if (*scheme) return cmd_scheme(o);
    if (*simulate) return cmd_simulate(o);
    if (*sweep_scheme) return cmd_sweep_scheme(o);
    if (*sweep_pdmp) return cmd_sweep_pdmp(o);
    if (*validate) return cmd_validate();
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kFailure;
  }
  return kUsage;
}
