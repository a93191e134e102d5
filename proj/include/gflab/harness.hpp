#ifndef GFLAB_HARNESS_HPP
#define GFLAB_HARNESS_HPP

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "analytics.hpp"
#include "cell_system.hpp"
#include "errors.hpp"
#include "estimators.hpp"
#include "io.hpp"
#include "lamperti.hpp"
#include "level_cut.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "stats.hpp"

namespace gflab {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitNumeric = 3, kExitStatistical = 4 };

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names{
      "sample-excursion", "cut",          "locally-largest", "simulate-gf",          "cumulant",
      "martingales",      "compare-theorem1", "mu-check",    "derivative-martingale"};
  return names;
}

struct ExperimentConfig {
  std::string experiment;
  double z = 1.0;
  std::vector<double> levels{0.3};  // key `a`
  double C = 4.0;
  std::size_t N = 100;
  GridSpec grid;
  LevyConfig levy;
  double s_min = 1e-3;
  int G = 6;
  double A = std::numeric_limits<double>::infinity();
  double floor_ratio = 0.2;
  std::size_t resamples = 1000;
  std::uint64_t seed = 20240917;
  std::string output_dir = "out";
  std::size_t workers = 1;

  // Values exactly as supplied by the file, the environment or the flags.
  std::map<std::string, std::string> supplied;

  void validate() const;
  Json echo() const;
};

struct ConfigKey {
  const char* name;
  const char* help;
};

inline const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys{
      {"experiment", "experiment name"},
      {"z", "excursion size (default 1)"},
      {"a", "level or comma-separated level list (default 0.3)"},
      {"C", "size cutoff for the truncated derivative martingale (default 4)"},
      {"N", "number of replicas (default 100)"},
      {"grid.dt", "time step of excursion paths (default 1e-4)"},
      {"grid.level_da", "level step of locally largest paths (default 1e-2)"},
      {"grid.max_steps", "step cap per path (default 2097152)"},
      {"levy.eps", "small-jump cutoff of xi (default 1e-3)"},
      {"levy.dt", "time step of xi (default 1e-3)"},
      {"levy.quadrature_tol", "quadrature tolerance (default 1e-12)"},
      {"s_min", "smallest explicit cell size (default 1e-3)"},
      {"G", "last generation (default 6)"},
      {"A", "level horizon, inf for none (default inf)"},
      {"floor_ratio", "cell death floor as a fraction of s_min (default 0.2)"},
      {"resamples", "bootstrap resamples (default 1000)"},
      {"seed", "master seed (default 20240917)"},
      {"output_dir", "output directory (default out)"},
      {"workers", "worker threads (default 1)"},
  };
  return keys;
}

/// Environment variable overriding `key`: GFLAB_ + upper case, '.' -> '_'.
inline std::string env_name(const std::string& key) {
  std::string s = "GFLAB_";
  for (char c : key) s += (c == '.') ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  if (v == "inf") return std::numeric_limits<double>::infinity();
  std::size_t used = 0;
  double d;
  try {
    d = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key + ": not a number: '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key + ": not a number: '" + v + "'");
  return d;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(key + ": not a non-negative integer: '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key + ": integer out of range: '" + v + "'");
  }
}

inline void apply(ExperimentConfig& c, const std::string& key, const std::string& v) {
  if (key == "experiment") {
    c.experiment = v;
  } else if (key == "z") {
    c.z = parse_double(key, v);
  } else if (key == "a") {
    c.levels.clear();
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) c.levels.push_back(parse_double(key, trim(item)));
  } else if (key == "C") {
    c.C = parse_double(key, v);
  } else if (key == "N") {
    c.N = parse_uint(key, v);
  } else if (key == "grid.dt") {
    c.grid.dt = parse_double(key, v);
  } else if (key == "grid.level_da") {
    c.grid.level_da = parse_double(key, v);
  } else if (key == "grid.max_steps") {
    c.grid.max_steps = parse_uint(key, v);
  } else if (key == "levy.eps") {
    c.levy.eps = parse_double(key, v);
  } else if (key == "levy.dt") {
    c.levy.dt = parse_double(key, v);
  } else if (key == "levy.quadrature_tol") {
    c.levy.quadrature_tol = parse_double(key, v);
  } else if (key == "s_min") {
    c.s_min = parse_double(key, v);
  } else if (key == "G") {
    c.G = static_cast<int>(parse_uint(key, v));
  } else if (key == "A") {
    c.A = parse_double(key, v);
  } else if (key == "floor_ratio") {
    c.floor_ratio = parse_double(key, v);
  } else if (key == "resamples") {
    c.resamples = parse_uint(key, v);
  } else if (key == "seed") {
    c.seed = parse_uint(key, v);
    c.grid.seed = c.seed;
  } else if (key == "output_dir") {
    c.output_dir = v;
  } else if (key == "workers") {
    c.workers = parse_uint(key, v);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
  c.supplied[key] = v;
}

}  // namespace detail

inline void set_config_value(ExperimentConfig& c, const std::string& key, const std::string& value) {
  detail::apply(c, key, detail::trim(value));
}

/// Flat `key = value` text; `#` starts a comment. Unknown and repeated keys
/// are errors.
inline ExperimentConfig parse_config(std::istream& is, ExperimentConfig c = {}) {
  std::string line;
  std::map<std::string, int> seen;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    if (seen.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": repeated key '" + key + "'");
    seen[key] = lineno;
    detail::apply(c, key, detail::trim(line.substr(eq + 1)));
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& p, ExperimentConfig c = {}) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open config " + p.string());
  return parse_config(in, std::move(c));
}

/// Applies GFLAB_* variables for every known key.
inline void apply_env(ExperimentConfig& c) {
  for (const auto& k : config_keys()) {
    if (const char* v = std::getenv(env_name(k.name).c_str())) detail::apply(c, k.name, detail::trim(v));
  }
}

inline void ExperimentConfig::validate() const {
  if (std::find(experiment_names().begin(), experiment_names().end(), experiment) == experiment_names().end())
    throw ConfigError("unknown experiment '" + experiment + "'");
  if (!(z != 0.0) || !std::isfinite(z)) throw ConfigError("z must be nonzero and finite");
  if (levels.empty()) throw ConfigError("a: at least one level is required");
  for (double a : levels)
    if (!(a >= 0.0) || !std::isfinite(a)) throw ConfigError("a: levels must be finite and >= 0");
  if (!(C > 0.0)) throw ConfigError("C must be positive");
  if (N == 0) throw ConfigError("N must be positive");
  if (workers == 0) throw ConfigError("workers must be positive");
  if (!(s_min > 0.0)) throw ConfigError("s_min must be positive");
  if (!(A > 0.0)) throw ConfigError("A must be positive");
  if (!(floor_ratio > 0.0 && floor_ratio < 1.0)) throw ConfigError("floor_ratio must lie in (0, 1)");
  try {
    grid.validate();
    levy.validate();
  } catch (const InvalidParameter& e) {
    throw ConfigError(e.what());
  }
}

inline Json ExperimentConfig::echo() const {
  Json j;
  j["experiment"] = experiment;
  j["z"] = z;
  j["a"] = levels;
  j["C"] = C;
  j["N"] = N;
  j["grid.dt"] = grid.dt;
  j["grid.level_da"] = grid.level_da;
  j["grid.max_steps"] = grid.max_steps;
  j["levy.eps"] = levy.eps;
  j["levy.dt"] = levy.dt;
  j["levy.quadrature_tol"] = levy.quadrature_tol;
  j["s_min"] = s_min;
  j["G"] = G;
  j["A"] = std::isfinite(A) ? Json(A) : Json("inf");
  j["floor_ratio"] = floor_ratio;
  j["resamples"] = resamples;
  j["seed"] = seed;
  j["output_dir"] = output_dir;
  j["workers"] = workers;
  Json s = Json::object();
  for (const auto& [k, v] : supplied) s[k] = v;
  j["supplied"] = s;
  return j;
}

/// Runs f(0..n-1) on `workers` threads. The first exception is rethrown.
template <class F>
void parallel_for(std::size_t n, std::size_t workers, F&& f) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex mu;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(mu);
        if (!err) err = std::current_exception();
        next.store(n);
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < std::min(workers, n); ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

/// Output directory whose files are all listed in its manifest.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec) throw ConfigError("cannot create output directory " + root_.string());
  }

  void put(const std::string& rel, const std::string& content) {
    const auto p = root_ / rel;
    std::filesystem::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write " + p.string());
    out << content;
    out.close();
    if (std::find(files_.begin(), files_.end(), rel) == files_.end()) files_.push_back(rel);
  }

  const std::filesystem::path& root() const { return root_; }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::filesystem::path root_;
  std::vector<std::string> files_;
};

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline void write_manifest(OutputDir& out, const Json& config, std::uint64_t seed, const std::string& started) {
  Json m;
  m["version"] = kVersion;
  m["rng"] = "counter-based splitmix64, format " + std::to_string(CounterRng::kFormatVersion);
  m["seed"] = seed;
  m["config"] = config;
  m["started"] = started;
  m["finished"] = utc_now();
  Json files = Json::array();
  for (const auto& f : out.files()) {
    Json e;
    e["path"] = f;
    e["sha256"] = sha256_file(out.root() / f);
    files.push_back(e);
  }
  m["files"] = files;
  std::ofstream o(out.root() / "manifest.json", std::ios::binary | std::ios::trunc);
  o << m.dump(2) << '\n';
}

/// Files whose recomputed digest differs from the manifest.
inline std::vector<std::string> verify_manifest(const std::filesystem::path& dir) {
  const Json m = Json::parse(read_file(dir / "manifest.json"));
  std::vector<std::string> bad;
  for (const auto& e : m.at("files")) {
    const std::string p = e.at("path");
    if (!std::filesystem::exists(dir / p) || sha256_file(dir / p) != e.at("sha256").get<std::string>())
      bad.push_back(p);
  }
  return bad;
}

/// One row of a verdict table.
struct Check {
  std::string name;
  std::string target;
  double estimate = 0.0;
  std::string tolerance;
  bool pass = false;

  Json json() const {
    Json j;
    j["name"] = name;
    j["target"] = target;
    j["estimate"] = estimate;
    j["tolerance"] = tolerance;
    j["pass"] = pass;
    return j;
  }
};

struct RunResult {
  Json report;
  std::vector<Check> checks;
  bool pass() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
  }
};

namespace detail {

inline std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

inline double abs_rank(const std::vector<double>& sorted, std::size_t k) {
  return k < sorted.size() ? std::fabs(sorted[k]) : 0.0;
}

inline Json ks_json(const KsResult& k) {
  Json j;
  j["D"] = k.d;
  j["p"] = k.p;
  j["n_eff_a"] = k.n_eff_a;
  j["n_eff_b"] = k.n_eff_b;
  return j;
}

inline CounterRng side(const ExperimentConfig& c, std::uint64_t k) { return CounterRng(c.seed, 0).split(k); }

inline CellConfig cell_config(const ExperimentConfig& c) {
  CellConfig cc;
  cc.A = c.A;
  cc.s_min = c.s_min;
  cc.G = c.G;
  cc.floor_ratio = c.floor_ratio;
  cc.dt = c.levy.dt;
  return cc;
}

inline Check p_check(const std::string& name, const KsResult& k) {
  return {name, "p > 0.01", k.p, "0.01", k.p > 0.01};
}

}  // namespace detail

inline RunResult run_sample_excursion(const ExperimentConfig& c, OutputDir& out) {
  std::vector<ExcursionPath> paths(c.N);
  parallel_for(c.N, c.workers, [&](std::size_t i) {
    CounterRng r = detail::side(c, 0).split(i);
    paths[i] = sample_excursion(c.z, c.grid, r);
  });
  RunResult res;
  std::vector<double> dur;
  bool ends = true;
  for (std::size_t i = 0; i < c.N; ++i) {
    std::ostringstream os;
    write_path_csv(os, paths[i]);
    out.put("paths/excursion_" + std::to_string(i) + ".csv", os.str());
    dur.push_back(paths[i].duration);
    ends = ends && paths[i].x.front() == 0.0 && paths[i].x.back() == c.z && paths[i].y.front() == 0.0 &&
           paths[i].y.back() == 0.0;
  }
  const auto ms = mean_se(dur);
  res.report["durations"] = {{"mean", ms.mean}, {"se", ms.se}, {"n", ms.n}};
  res.checks.push_back({"endpoints", "x(0)=0, x(r)=z, y(0)=y(r)=0", ends ? 1.0 : 0.0, "exact", ends});
  return res;
}

inline RunResult run_cut(const ExperimentConfig& c, OutputDir& out) {
  std::vector<std::vector<FragmentSet>> fs(c.N);
  parallel_for(c.N, c.workers, [&](std::size_t i) {
    CounterRng r = detail::side(c, 0).split(i);
    const ExcursionPath p = sample_excursion(c.z, c.grid, r);
    for (double a : c.levels) fs[i].push_back(fragments_at_level(p, a));
  });
  std::ostringstream os;
  RunResult res;
  Json lv = Json::array();
  for (std::size_t k = 0; k < c.levels.size(); ++k) {
    std::vector<double> m, n;
    for (std::size_t i = 0; i < c.N; ++i) {
      write_jsonl(os, fragment_record(i, fs[i][k]));
      double s = 0.0;
      for (double x : fs[i][k].sizes) s += x * x;
      m.push_back(s);
      n.push_back(static_cast<double>(fs[i][k].sizes.size()));
    }
    const auto mm = mean_se(m), nn = mean_se(n);
    lv.push_back({{"level", c.levels[k]}, {"mean_sum_sq", mm.mean}, {"se_sum_sq", mm.se}, {"mean_count", nn.mean}});
  }
  out.put("fragments.jsonl", os.str());
  res.report["levels"] = lv;
  return res;
}

inline RunResult run_locally_largest(const ExperimentConfig& c, OutputDir& out) {
  std::vector<LocallyLargestPath> ll(c.N);
  parallel_for(c.N, c.workers, [&](std::size_t i) {
    CounterRng r = detail::side(c, 0).split(i);
    const ExcursionPath p = sample_excursion(c.z, c.grid, r);
    ll[i] = locally_largest(build_split_tree(p), p, c.grid);
  });
  RunResult res;
  std::vector<double> apex;
  std::size_t ties = 0;
  bool starts = true;
  for (std::size_t i = 0; i < c.N; ++i) {
    std::ostringstream xs, js;
    write_xi_csv(xs, js, ll[i]);
    out.put("xi/xi_" + std::to_string(i) + ".csv", xs.str());
    out.put("xi/jumps_" + std::to_string(i) + ".csv", js.str());
    apex.push_back(ll[i].apex_height);
    ties += ll[i].tie_count;
    starts = starts && !ll[i].values.empty() && ll[i].values.front() == c.z;
  }
  const auto ms = mean_se(apex);
  res.report["apex_height"] = {{"mean", ms.mean}, {"se", ms.se}};
  res.report["ties"] = ties;
  res.checks.push_back({"xi(0) = z", "z", starts ? c.z : 0.0, "exact", starts});
  return res;
}

inline RunResult run_simulate_gf(const ExperimentConfig& c, OutputDir& out) {
  CellConfig cc = detail::cell_config(c);
  cc.snapshot_levels.clear();
  for (double a : c.levels)
    if (a <= cc.A) cc.snapshot_levels.push_back(a);
  cc.keep_paths = false;
  std::vector<std::string> cells(c.N), snaps(c.N);
  std::vector<double> counts(c.N);
  parallel_for(c.N, c.workers, [&](std::size_t i) {
    const CellSystem cs = simulate_cell_system(c.z, cc, detail::side(c, 1).split(i));
    std::ostringstream os, ss;
    write_cells_jsonl(os, cs);
    for (double a : cc.snapshot_levels) write_jsonl(ss, snapshot_record(i, snapshot_Xbar(cs, a)));
    cells[i] = os.str();
    snaps[i] = ss.str();
    counts[i] = static_cast<double>(cs.cells.size());
  });
  for (std::size_t i = 0; i < c.N; ++i) out.put("cells/system_" + std::to_string(i) + ".jsonl", cells[i]);
  std::string all;
  for (const auto& s : snaps) all += s;
  out.put("snapshots.jsonl", all);
  RunResult res;
  const auto ms = mean_se(counts);
  res.report["cells_per_system"] = {{"mean", ms.mean}, {"se", ms.se}};
  return res;
}

inline RunResult run_cumulant(const ExperimentConfig& c, OutputDir& out) {
  const CumulantGrid g = cumulant_grid(c.levy);
  std::ostringstream k, r, ph;
  write_kappa_csv(k, g);
  write_rc_csv(r, c.C);
  ph << "q,phi_plus,kappa_shifted\n";
  for (std::size_t i = 0; i < g.phi_q.size(); ++i)
    write_csv_row(ph, {g.phi_q[i], g.phi_plus[i], g.phi_plus[i] - g.phi_residual[i]});
  out.put("kappa.csv", k.str());
  out.put("rc.csv", r.str());
  out.put("phi_plus.csv", ph.str());
  RunResult res;
  double phi_max = 0.0;
  for (double v : g.phi_residual) phi_max = std::max(phi_max, std::fabs(v));
  res.report["omega_minus"] = g.roots.omega_minus;
  res.report["omega_plus"] = g.roots.omega_plus;
  res.report["max_kappa_diff"] = g.max_kappa_diff;
  res.report["max_phi_residual"] = phi_max;
  res.checks.push_back({"max |kappa - kappa_closed|", "0", g.max_kappa_diff, "1e-6", g.max_kappa_diff <= 1e-6});
  res.checks.push_back({"omega_minus", "1.5", g.roots.omega_minus, "1e-6",
                        std::fabs(g.roots.omega_minus - 1.5) <= 1e-6});
  res.checks.push_back({"omega_plus", "2.5", g.roots.omega_plus, "1e-6",
                        std::fabs(g.roots.omega_plus - 2.5) <= 1e-6});
  res.checks.push_back({"max |phi_plus - kappa(q + 5/2)|", "0", phi_max, "1e-6", phi_max <= 1e-6});
  return res;
}

inline RunResult run_martingales(const ExperimentConfig& c, OutputDir& out) {
  std::vector<std::vector<double>> m(c.levels.size(), std::vector<double>(c.N));
  parallel_for(c.N, c.workers, [&](std::size_t i) {
    CounterRng r = detail::side(c, 0).split(i);
    const ExcursionPath p = sample_excursion(c.z, c.grid, r);
    for (std::size_t k = 0; k < c.levels.size(); ++k) m[k][i] = martingale_value(p, c.levels[k]);
  });
  RunResult res;
  std::ostringstream os;
  os << "a,mean,se,lo,hi,target\n";
  Json arr = Json::array();
  for (std::size_t k = 0; k < c.levels.size(); ++k) {
    const double a = c.levels[k];
    if (!(a > 0.0)) throw ConfigError("martingales: levels must be positive");
    const auto r = martingale_report(m[k], c.z, a, detail::side(c, 9).split(k), c.resamples);
    write_csv_row(os, {a, r.mean, r.se, r.lo, r.hi, r.target});
    arr.push_back({{"a", a}, {"mean", r.mean}, {"se", r.se}, {"lo", r.lo}, {"hi", r.hi}, {"target", r.target},
                   {"n", r.n}, {"vacuous", r.vacuous}});
    res.checks.push_back({"M_a at a=" + detail::g6(a), detail::g6(r.target), r.mean,
                          "max(3 SE, 5%) = " + detail::g6(std::max(3 * r.se, 0.05 * r.target)), r.within()});
  }
  out.put("martingales.csv", os.str());
  res.report["levels"] = arr;
  return res;
}

inline RunResult run_compare_theorem1(const ExperimentConfig& c, OutputDir& out) {
  const double a = c.levels.front();
  std::vector<FragmentSet> ex(c.N);
  parallel_for(c.N, c.workers, [&](std::size_t i) {
    CounterRng r = detail::side(c, 0).split(i);
    ex[i] = fragments_at_level(sample_excursion(c.z, c.grid, r), a);
  });
  CellConfig cc = detail::cell_config(c);
  cc.A = a;
  cc.snapshot_levels = {a};
  cc.keep_paths = false;
  std::vector<Snapshot> ce(c.N);
  parallel_for(c.N, c.workers, [&](std::size_t i) {
    ce[i] = snapshot_Xbar(simulate_cell_system(c.z, cc, detail::side(c, 1).split(i)), a);
  });
  std::ostringstream oe, oc;
  for (std::size_t i = 0; i < c.N; ++i) {
    write_jsonl(oe, fragment_record(i, ex[i]));
    write_jsonl(oc, snapshot_record(i, ce[i]));
  }
  out.put("excursion_side.jsonl", oe.str());
  out.put("cell_side.jsonl", oc.str());
  RunResult res;
  Json ks = Json::object();
  for (std::size_t k = 0; k < 3; ++k) {
    std::vector<double> u, v;
    for (std::size_t i = 0; i < c.N; ++i) {
      u.push_back(detail::abs_rank(ex[i].sizes, k));
      v.push_back(detail::abs_rank(ce[i].sizes, k));
    }
    const auto r = ks_two_sample(u, v);
    ks["rank" + std::to_string(k + 1)] = detail::ks_json(r);
    res.checks.push_back(detail::p_check("KS rank " + std::to_string(k + 1), r));
  }
  std::vector<double> u, v;
  for (std::size_t i = 0; i < c.N; ++i) {
    u.push_back(ex[i].sizes.empty() ? 0.0 : ex[i].sizes[0]);
    v.push_back(ce[i].sizes.empty() ? 0.0 : ce[i].sizes[0]);
  }
  const auto r = ks_two_sample(u, v);
  ks["signed_largest"] = detail::ks_json(r);
  res.checks.push_back(detail::p_check("KS signed largest", r));
  res.report["ks"] = ks;
  return res;
}

inline RunResult run_mu_check(const ExperimentConfig& c, OutputDir& out) {
  const double a = c.levels.front();
  if (!(a > 0.0)) throw ConfigError("mu-check: a must be positive");
  std::vector<double> hx(c.N), w(c.N), ref(c.N);
  parallel_for(c.N, c.workers, [&](std::size_t i) {
    CounterRng r = detail::side(c, 0).split(i);
    const ExcursionPath p = sample_excursion(c.z, c.grid, r);
    const auto h = first_hit_x(p, a);
    hx[i] = h.value_or(0.0);
    w[i] = h ? martingale_value(p, a) / (c.z * c.z) : 0.0;
    CounterRng q = detail::side(c, 2).split(i);
    ref[i] = sample_h_excursion(0.0, a, c.grid, q, 0, false).hit_x;
  });
  std::ostringstream os;
  os << "x_hit,weight,reference_x\n";
  for (std::size_t i = 0; i < c.N; ++i) write_csv_row(os, {hx[i], w[i], ref[i]});
  out.put("mu_check.csv", os.str());
  const auto r = mu_z_check(hx, w, ref, c.z, a, c.resamples, detail::side(c, 9));
  RunResult res;
  res.report["ks"] = detail::ks_json(r.ks);
  res.report["bootstrap_p"] = r.p_bootstrap;
  res.report["mean_weight"] = r.mean_weight;
  res.report["se_weight"] = r.se_weight;
  res.report["ess"] = r.ess;
  res.report["n_reached"] = r.n_reached;
  res.checks.push_back(detail::p_check("weighted KS on x(T_a)", r.ks));
  res.checks.push_back({"mean weight", "1", r.mean_weight, "3 SE = " + detail::g6(3 * r.se_weight),
                        std::fabs(r.mean_weight - 1.0) <= 3 * r.se_weight});
  res.checks.push_back({"ESS", ">= 1000", r.ess, "1000", r.ess >= 1000.0});
  return res;
}

inline RunResult run_derivative_martingale(const ExperimentConfig& c, OutputDir& out) {
  if (c.G < 1) throw ConfigError("derivative-martingale: G must be >= 1");
  CellConfig cc = detail::cell_config(c);
  cc.A = std::numeric_limits<double>::infinity();
  cc.simulate_last_generation = false;
  cc.keep_paths = false;
  const int G = c.G;
  std::vector<std::vector<BrwReport>> br(c.N);
  std::vector<double> tc(c.N);
  parallel_for(c.N, c.workers, [&](std::size_t i) {
    const CellSystem cs = simulate_cell_system(c.z, cc, detail::side(c, 1).split(i));
    br[i] = brw_extrapolated(cs, G, c.C);
    CounterRng r = detail::side(c, 0).split(i);
    const ExcursionPath p = sample_excursion(c.z, c.grid, r);
    tc[i] = time_in_small_excursions(build_split_tree(p), p, c.C);
  });
  std::ostringstream os;
  os << "system,n,M,D,DC\n";
  for (std::size_t i = 0; i < c.N; ++i)
    for (int n = 0; n < G; ++n)
      write_csv_row(os, {double(i), double(n), br[i][n].M_n, br[i][n].D_n, br[i][n].DC_n});
  out.put("brw.csv", os.str());
  std::ostringstream ot;
  ot << "excursion,T_C\n";
  for (std::size_t i = 0; i < c.N; ++i) write_csv_row(ot, {double(i), tc[i]});
  out.put("time_small.csv", ot.str());
  RunResult res;
  const double target = std::numbers::pi * c.z * c.z * green_RC(c.z / 2.0, c.C);
  std::vector<std::vector<double>> dc(G);
  Json arr = Json::array();
  for (int n = 0; n < G; ++n) {
    std::vector<double> m, d;
    for (std::size_t i = 0; i < c.N; ++i) {
      dc[n].push_back(br[i][n].DC_n);
      m.push_back(br[i][n].M_n);
      d.push_back(br[i][n].D_n);
    }
    const auto a = mean_se(dc[n]), b = mean_se(m), e = mean_se(d);
    arr.push_back({{"n", n}, {"DC", a.mean}, {"DC_se", a.se}, {"M", b.mean}, {"M_se", b.se}, {"D", e.mean}, {"D_se", e.se}});
  }
  res.report["generations"] = arr;
  for (int i = 0; i < G; ++i)
    for (int j = i + 1; j < G; ++j) {
      const auto d = paired_difference(dc[i], dc[j]);
      res.checks.push_back({"E DC_" + std::to_string(i) + " - E DC_" + std::to_string(j), "0", d.mean,
                            "3 SE = " + detail::g6(3 * d.se), std::fabs(d.mean) <= 3 * d.se});
    }
  const auto d0 = mean_se(dc[0]);
  res.checks.push_back({"E DC_0", detail::g6(target), d0.mean, "3 SE = " + detail::g6(3 * d0.se),
                        std::fabs(d0.mean - target) <= 3 * d0.se});
  const auto t = mean_se(tc);
  res.report["T_C"] = {{"mean", t.mean}, {"se", t.se}, {"target", target}};
  res.checks.push_back({"E T_C", detail::g6(target), t.mean, "3 SE = " + detail::g6(3 * t.se),
                        std::fabs(t.mean - target) <= 3 * t.se});
  return res;
}

inline RunResult run_experiment(const ExperimentConfig& c, OutputDir& out) {
  static const std::map<std::string, std::function<RunResult(const ExperimentConfig&, OutputDir&)>> table{
      {"sample-excursion", run_sample_excursion},
      {"cut", run_cut},
      {"locally-largest", run_locally_largest},
      {"simulate-gf", run_simulate_gf},
      {"cumulant", run_cumulant},
      {"martingales", run_martingales},
      {"compare-theorem1", run_compare_theorem1},
      {"mu-check", run_mu_check},
      {"derivative-martingale", run_derivative_martingale},
  };
  return table.at(c.experiment)(c, out);
}

/// Validates, runs, and writes report.json and manifest.json. Returns the exit code.
inline int run(const ExperimentConfig& c) {
  c.validate();
  const std::string started = utc_now();
  OutputDir out(c.output_dir);
  RunResult res = run_experiment(c, out);
  Json rep;
  rep["experiment"] = c.experiment;
  rep["results"] = res.report;
  Json checks = Json::array();
  for (const auto& k : res.checks) checks.push_back(k.json());
  rep["checks"] = checks;
  rep["pass"] = res.pass();
  out.put("report.json", rep.dump(2) + "\n");
  write_manifest(out, c.echo(), c.seed, started);
  return res.pass() ? kExitOk : kExitStatistical;
}

/// Machine-readable error object and exit code for an exception.
inline int error_exit(const std::exception& e, std::ostream& err) {
  Json j;
  int code = kExitNumeric;
  if (const auto* ge = dynamic_cast<const Error*>(&e)) {
    j["error"] = ge->kind();
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const InvalidParameter*>(&e)) code = kExitConfig;
    if (dynamic_cast<const InsufficientSample*>(&e)) code = kExitStatistical;
  } else {
    j["error"] = "internal";
  }
  j["message"] = e.what();
  j["exit_code"] = code;
  err << j.dump() << '\n';
  return code;
}

}  // namespace gflab

#endif  // GFLAB_HARNESS_HPP
