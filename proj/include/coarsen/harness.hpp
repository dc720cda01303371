#pragma once

// Experiment orchestration: JSON configuration, scheme and particle sweeps
// against the explicit kinetic solution, aggregation, and CSV output.
//
// Config schema (JSON object):
//   ic               "uniform_halves" | "tent" | "two_particle" | "custom_file"   (required)
//   grid_step        h > 0, must divide the support bound                    (required)
//   t_end            T' > 0, below the blow-up time                          (required)
//   custom_ic_path   CSV path for custom_file, relative to the config file
//   name             experiment name for the manifest          default "experiment"
//   delta_list       scheme bin widths                         default []
//   n_list           particle counts >= 2                      default []
//   replicas         R >= 1                                    default 1
//   master_seed      unsigned integer                          default 0
//   snap_count       snapshot intervals on [0, t_end]          default 32
//   eps_list         tail thresholds                           default []
//   n2_floor         N2 floor for the horizon                  default 1e-3 N2(0)
//   series_tol       renewal-series tolerance                  default 1e-10
//   output_dir       output directory                          default "results"
//   record_runtime   write measured runtimes (breaks byte-identical output)  default false

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

#include <json.hpp>

#include "coarsen/csv.hpp"
#include "coarsen/errors.hpp"
#include "coarsen/initial_conditions.hpp"
#include "coarsen/kinetic.hpp"
#include "coarsen/measures.hpp"
#include "coarsen/pdmp.hpp"
#include "coarsen/rng.hpp"
#include "coarsen/scheme.hpp"

#ifndef COARSEN_VERSION
#define COARSEN_VERSION "0.1.0"
#endif

namespace coarsen {

struct ExperimentConfig {
  std::string name = "experiment";
  std::string ic_name;
  std::optional<std::string> custom_ic_path;
  double grid_step = 0.0;
  std::vector<double> delta_list;
  std::vector<std::size_t> n_list;
  std::size_t replicas = 1;
  std::uint64_t master_seed = 0;
  double t_end = 0.0;
  std::size_t snap_count = 32;
  std::vector<double> eps_list;
  double n2_floor = 0.0;
  double series_tol = 1e-10;
  std::string output_dir = "results";
  bool record_runtime = false;
  std::string config_hash;

  // Filled by validation.
  InitialCondition ic;
  KineticSolution reference;
};

struct SnapshotDistance {
  double t = 0.0;
  double d1 = 0.0;
  double d2 = 0.0;
  double d() const noexcept { return d1 + d2; }
};

struct ResultRecord {
  std::string experiment;
  std::string param_kind;
  double param_value = 0.0;
  std::size_t replica = 0;
  std::uint64_t seed = 0;
  double sup_distance = 0.0;
  std::vector<SnapshotDistance> snapshots;
  double runtime_ms = 0.0;
  bool cemetery = false;
};

// Equal up to the measured runtime.
inline bool same_outcome(const ResultRecord& a, const ResultRecord& b) {
  if (a.experiment != b.experiment || a.param_kind != b.param_kind || a.param_value != b.param_value ||
      a.replica != b.replica || a.seed != b.seed || a.sup_distance != b.sup_distance || a.cemetery != b.cemetery ||
      a.snapshots.size() != b.snapshots.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.snapshots.size(); ++i) {
    const auto& x = a.snapshots[i];
    const auto& y = b.snapshots[i];
    if (x.t != y.t || x.d1 != y.d1 || x.d2 != y.d2) return false;
  }
  return true;
}

namespace detail {

[[noreturn]] inline void field_error(const std::string& field, const std::string& what) {
  throw ConfigError("config field '" + field + "': " + what);
}

template <class T>
T get_field(const nlohmann::json& j, const std::string& key) {
  if constexpr (std::is_unsigned_v<T>) {
    if (j.contains(key) && j.at(key).is_number_integer() && j.at(key).get<long long>() < 0) {
      field_error(key, "must be nonnegative");
    }
  }
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    field_error(key, j.contains(key) ? std::string("wrong type (") + e.what() + ")" : "missing");
  }
}

template <class T>
T get_field(const nlohmann::json& j, const std::string& key, T fallback) {
  return j.contains(key) ? get_field<T>(j, key) : fallback;
}

}  // namespace detail

// Checks every invariant, builds the initial condition and solves the
// reference kinetic problem on [0, t_end].
inline void validate_config(ExperimentConfig& cfg, std::optional<double> n2_floor = std::nullopt) {
  using detail::field_error;
  if (!(cfg.grid_step > 0.0)) field_error("grid_step", "must be positive");
  if (!(cfg.t_end > 0.0)) field_error("t_end", "must be positive");
  if (cfg.replicas < 1) field_error("replicas", "must be at least 1");
  if (cfg.snap_count < 1) field_error("snap_count", "must be at least 1");
  if (!(cfg.series_tol > 0.0)) field_error("series_tol", "must be positive");
  for (std::size_t n : cfg.n_list) {
    if (n < 2) field_error("n_list", "entries must be at least 2");
  }
  for (double e : cfg.eps_list) {
    if (!(e > 0.0)) field_error("eps_list", "entries must be positive");
  }
  try {
    cfg.ic = make_initial_condition(cfg.ic_name, cfg.grid_step, cfg.custom_ic_path.value_or(""));
  } catch (const Error& e) {
    field_error("ic", e.what());
  }
  const double support = cfg.ic.support_bound();
  if (!detail::is_integer_multiple(support, cfg.grid_step)) field_error("grid_step", "must divide the support bound");
  if (std::abs(cfg.ic.f1.mass() + cfg.ic.f2.mass() - 1.0) > 1e-8) field_error("ic", "densities must have total mass 1");
  if (!(cfg.ic.f2.mass() > 0.0)) field_error("ic", "species 2 must have positive mass");
  for (double delta : cfg.delta_list) {
    if (!detail::is_integer_multiple(delta, cfg.grid_step)) field_error("delta_list", "entries must be multiples of grid_step");
    if (!detail::is_integer_multiple(support, delta)) field_error("delta_list", "entries must divide the support bound");
  }
  const double n2_zero = cfg.ic.f2.mass();
  cfg.n2_floor = n2_floor.value_or(1e-3 * n2_zero);
  if (!(cfg.n2_floor >= 0.0) || cfg.n2_floor >= n2_zero) field_error("n2_floor", "must lie in [0, N2(0))");
  const double t_max = std::ceil(cfg.t_end / cfg.grid_step - 1e-9) * cfg.grid_step;
  cfg.reference = solve_kinetic(cfg.ic.f1, cfg.ic.f2, {t_max, cfg.series_tol, cfg.n2_floor, ConvolutionMethod::direct});
  if (cfg.reference.horizon_reached && cfg.reference.horizon <= cfg.t_end) {
    field_error("t_end", "must be below the blow-up time (N2 reaches the floor at t = " +
                             csv::num(cfg.reference.horizon) + ")");
  }
}

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "name",     "ic",         "custom_ic_path", "grid_step", "delta_list", "n_list",     "replicas",      "master_seed",
      "t_end",    "snap_count", "eps_list",       "n2_floor",  "series_tol", "output_dir", "record_runtime"};
  return keys;
}

inline ExperimentConfig parse_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::get_field;
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& item : j.items()) {
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), item.key()) == keys.end()) detail::field_error(item.key(), "unknown field");
  }
  ExperimentConfig cfg;
  cfg.name = get_field<std::string>(j, "name", cfg.name);
  cfg.ic_name = get_field<std::string>(j, "ic");
  if (j.contains("custom_ic_path")) {
    std::filesystem::path p = get_field<std::string>(j, "custom_ic_path");
    cfg.custom_ic_path = (p.is_relative() && !base_dir.empty() ? base_dir / p : p).string();
  }
  cfg.grid_step = get_field<double>(j, "grid_step");
  cfg.t_end = get_field<double>(j, "t_end");
  cfg.delta_list = get_field<std::vector<double>>(j, "delta_list", {});
  cfg.n_list = get_field<std::vector<std::size_t>>(j, "n_list", {});
  cfg.replicas = get_field<std::size_t>(j, "replicas", cfg.replicas);
  cfg.master_seed = get_field<std::uint64_t>(j, "master_seed", cfg.master_seed);
  cfg.snap_count = get_field<std::size_t>(j, "snap_count", cfg.snap_count);
  cfg.eps_list = get_field<std::vector<double>>(j, "eps_list", {});
  cfg.series_tol = get_field<double>(j, "series_tol", cfg.series_tol);
  cfg.output_dir = get_field<std::string>(j, "output_dir", cfg.output_dir);
  cfg.record_runtime = get_field<bool>(j, "record_runtime", cfg.record_runtime);
  std::optional<double> floor;
  if (j.contains("n2_floor")) floor = get_field<double>(j, "n2_floor");
  cfg.config_hash = csv::fnv1a_hex(j.dump());
  validate_config(cfg, floor);
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j, path.parent_path());
}

// Snapshot times s * t_end / snap_count, rounded to the reference grid.
inline std::vector<double> snapshot_times(const ExperimentConfig& cfg) {
  const double h = cfg.grid_step;
  const double last = std::floor(cfg.t_end / h + 1e-9);
  std::vector<double> out;
  for (std::size_t s = 0; s <= cfg.snap_count; ++s) {
    const double idx = std::round(last * static_cast<double>(s) / static_cast<double>(cfg.snap_count));
    const double t = idx * h;
    if (out.empty() || t > out.back()) out.push_back(t);
  }
  return out;
}

namespace detail {

inline double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

inline void finish_record(ResultRecord& r) {
  r.sup_distance = 0.0;
  for (const auto& s : r.snapshots) r.sup_distance = std::max(r.sup_distance, s.d());
}

}  // namespace detail

// For each delta: run the scheme to t_end and compare with the explicit
// solution at every step time t_k. Distances are evaluated at the bin edges,
// where the scheme's cumulative functions are exact.
inline std::vector<ResultRecord> run_scheme_sweep(const ExperimentConfig& cfg) {
  std::vector<ResultRecord> out;
  const double support = cfg.ic.support_bound();
  for (double delta : cfg.delta_list) {
    const auto start = std::chrono::steady_clock::now();
    const auto run = scheme_run(scheme_init(cfg.ic.f1, cfg.ic.f2, delta), cfg.t_end);
    ResultRecord r{"scheme", "delta", delta, 0, 0, 0.0, {}, 0.0, false};
    for (const auto& s : run) {
      const double t = std::round(s.time() / cfg.grid_step) * cfg.grid_step;
      const GridDensity f1 = f1_eval(cfg.reference, t);
      const GridDensity f2 = f2_eval(cfg.reference, t);
      r.snapshots.push_back(
          {t, ks_distance_on_grid(s.mu1, f1, delta, support), ks_distance_on_grid(s.mu2, f2, delta, support)});
    }
    detail::finish_record(r);
    r.runtime_ms = detail::elapsed_ms(start);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::uint64_t replica_seed(std::uint64_t master, std::size_t n, std::size_t replica) {
  return derive_seed(master, n, replica);
}

// For each n and replica: simulate from the quantile configuration and take
// the exact KS pair distance to the explicit solution at every snapshot.
// Records are ordered by (n, replica) whatever the worker count.
inline std::vector<ResultRecord> run_pdmp_sweep(const ExperimentConfig& cfg, std::size_t workers = 1) {
  const auto times = snapshot_times(cfg);
  std::vector<CumulativeProfile> kin1;
  std::vector<CumulativeProfile> kin2;
  for (double t : times) {
    kin1.push_back(to_profile(f1_eval(cfg.reference, t)));
    kin2.push_back(to_profile(f2_eval(cfg.reference, t)));
  }
  std::vector<InitialPositions> bases;
  for (std::size_t n : cfg.n_list) bases.push_back(quantile_positions(cfg.ic.f1, cfg.ic.f2, n));

  const std::size_t total = cfg.n_list.size() * cfg.replicas;
  std::vector<ResultRecord> out(total);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t task = next++; task < total; task = next++) {
      const std::size_t ni = task / cfg.replicas;
      const std::size_t rep = task % cfg.replicas;
      const std::size_t n = cfg.n_list[ni];
      const auto start = std::chrono::steady_clock::now();
      ResultRecord r{"pdmp", "n", static_cast<double>(n), rep, replica_seed(cfg.master_seed, n, rep), 0.0, {}, 0.0,
                     false};
      auto state = ParticleState::from_positions(bases[ni].species1, bases[ni].species2, n, r.seed);
      const auto snaps = pdmp_run(state, cfg.t_end, times);
      for (std::size_t s = 0; s < snaps.size(); ++s) {
        r.snapshots.push_back({snaps[s].t, ks_distance(to_profile(snaps[s].species1), kin1[s]),
                               ks_distance(to_profile(snaps[s].species2), kin2[s])});
      }
      r.cemetery = state.terminal();
      detail::finish_record(r);
      r.runtime_ms = detail::elapsed_ms(start);
      out[task] = std::move(r);
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(total, 1));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

struct TailFraction {
  double eps = 0.0;
  double fraction = 0.0;
};

struct PdmpSummary {
  std::size_t n = 0;
  std::size_t used = 0;      // replicas that avoided the cemetery
  std::size_t cemetery = 0;  // excluded replicas
  double median = 0.0;
  double mean = 0.0;
  std::vector<TailFraction> tails;  // #{sup >= eps} / used
};

inline double median_of(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

inline std::vector<PdmpSummary> summarize_pdmp(const std::vector<ResultRecord>& records,
                                               const std::vector<double>& eps_list) {
  std::vector<PdmpSummary> out;
  for (const auto& r : records) {
    const auto n = static_cast<std::size_t>(r.param_value);
    if (out.empty() || out.back().n != n) out.push_back({n, 0, 0, 0.0, 0.0, {}});
  }
  for (auto& s : out) {
    std::vector<double> sups;
    for (const auto& r : records) {
      if (static_cast<std::size_t>(r.param_value) != s.n) continue;
      if (r.cemetery) {
        ++s.cemetery;
      } else {
        sups.push_back(r.sup_distance);
      }
    }
    s.used = sups.size();
    s.median = median_of(sups);
    s.mean = sups.empty() ? std::numeric_limits<double>::quiet_NaN()
                          : std::accumulate(sups.begin(), sups.end(), 0.0) / static_cast<double>(sups.size());
    for (double eps : eps_list) {
      const auto hits = std::count_if(sups.begin(), sups.end(), [eps](double d) { return d >= eps; });
      s.tails.push_back({eps, sups.empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : static_cast<double>(hits) / static_cast<double>(sups.size())});
    }
  }
  return out;
}

// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline void write_records_csv(std::ostream& os, const std::vector<ResultRecord>& records, bool with_runtime) {
  os << "experiment,param_kind,param_value,replica,seed,sup_distance,cemetery,runtime_ms\n";
  for (const auto& r : records) {
    os << r.experiment << ',' << r.param_kind << ',' << csv::num(r.param_value) << ',' << r.replica << ',' << r.seed
       << ',' << csv::num(r.sup_distance) << ',' << (r.cemetery ? 1 : 0) << ','
       << csv::num(with_runtime ? r.runtime_ms : 0.0) << '\n';
  }
}

inline void write_snapshots_csv(std::ostream& os, const std::vector<ResultRecord>& records) {
  os << "experiment,param_value,replica,t,d1,d2,d\n";
  for (const auto& r : records) {
    for (const auto& s : r.snapshots) {
      os << r.experiment << ',' << csv::num(r.param_value) << ',' << r.replica << ',' << csv::num(s.t) << ','
         << csv::num(s.d1) << ',' << csv::num(s.d2) << ',' << csv::num(s.d()) << '\n';
    }
  }
}

inline void write_summary_csv(std::ostream& os, const std::vector<PdmpSummary>& summary) {
  os << "n,used,cemetery,median,mean,eps,tail_fraction\n";
  for (const auto& s : summary) {
    auto prefix = [&] {
      os << s.n << ',' << s.used << ',' << s.cemetery << ',' << csv::num(s.median) << ',' << csv::num(s.mean) << ',';
    };
    if (s.tails.empty()) {
      prefix();
      os << ",\n";
    }
    for (const auto& t : s.tails) {
      prefix();
      os << csv::num(t.eps) << ',' << csv::num(t.fraction) << '\n';
    }
  }
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write '" + path.string() + "'");
  return os;
}

inline void close_output(std::ofstream& os, const std::filesystem::path& path) {
  os.close();
  if (!os) throw Error("failed writing '" + path.string() + "'");
}

}  // namespace detail

// Writes <out>/<kind>_results.csv, <kind>_snapshots.csv, pdmp_summary.csv for
// particle sweeps, and <kind>_manifest.json. Output depends only on the
// records and the config unless record_runtime is set.
inline std::vector<std::filesystem::path> write_results(const std::vector<ResultRecord>& records,
                                                        const ExperimentConfig& cfg, const std::string& kind,
                                                        const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw Error("cannot create output directory '" + out_dir.string() + "': " + ec.message());
  std::vector<std::filesystem::path> written;
  auto emit = [&](const std::string& file, auto&& body) {
    const auto path = out_dir / file;
    auto os = detail::open_output(path);
    body(os);
    detail::close_output(os, path);
    written.push_back(path);
  };
  emit(kind + "_results.csv", [&](std::ostream& os) { write_records_csv(os, records, cfg.record_runtime); });
  emit(kind + "_snapshots.csv", [&](std::ostream& os) { write_snapshots_csv(os, records); });
  if (kind == "pdmp") {
    emit("pdmp_summary.csv", [&](std::ostream& os) { write_summary_csv(os, summarize_pdmp(records, cfg.eps_list)); });
  }
  nlohmann::json manifest{{"name", cfg.name},
                          {"experiment", kind},
                          {"config_hash", cfg.config_hash},
                          {"code_version", COARSEN_VERSION},
                          {"master_seed", cfg.master_seed},
                          {"ic", cfg.ic_name},
                          {"grid_step", cfg.grid_step},
                          {"t_end", cfg.t_end}};
  std::vector<std::string> files;
  for (const auto& p : written) files.push_back(p.filename().string());
  manifest["files"] = files;
  emit(kind + "_manifest.json", [&](std::ostream& os) { os << manifest.dump(2) << '\n'; });
  return written;
}

}  // namespace coarsen
