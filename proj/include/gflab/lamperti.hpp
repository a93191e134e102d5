#ifndef GFLAB_LAMPERTI_HPP
#define GFLAB_LAMPERTI_HPP

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <mutex>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "levy.hpp"
#include "rng.hpp"
#include "sampling.hpp"

namespace gflab {

struct SsmpPath {
  double z = 0.0;
  std::vector<double> levels;
  std::vector<double> Z;    // value at each node, after any jump there
  std::vector<double> dZ;   // jump at each node, 0 if none
  std::vector<double> tau;  // xi-time of each node
  std::vector<std::pair<double, double>> jumps;  // (level, dZ)
  double zeta = 0.0;  // death level, or the last level reached when censored
  bool censored = false;

  /// Z(a) with linear interpolation between nodes; 0 once dead.
  double value_at(double a) const {
    if (levels.empty() || a < 0.0) throw InvalidParameter("SsmpPath::value_at: bad level");
    if (a >= zeta) {
      if (censored && a > zeta) throw OutOfHorizon("SsmpPath::value_at: level beyond horizon");
      if (!censored) return 0.0;
    }
    auto it = std::upper_bound(levels.begin(), levels.end(), a);
    if (it == levels.begin()) return Z.front();
    std::size_t k = static_cast<std::size_t>(it - levels.begin()) - 1;
    if (k + 1 >= levels.size()) return Z.back();
    const double l0 = levels[k], l1 = levels[k + 1];
    const double z0 = Z[k], z1 = Z[k + 1] - dZ[k + 1];
    if (!(l1 > l0)) return z0;
    return z0 + (a - l0) / (l1 - l0) * (z1 - z0);
  }
};

/// Lamperti transform of a sampled xi: Z(a) = z exp(xi(tau(a / |z|))) with
/// the clock integral of e^xi accumulated by the trapezoid rule. Nodes are the
/// requested grid levels together with the images of the jumps of xi.
inline SsmpPath lamperti_Z(const LevyPath& xi, double z, const std::vector<double>& level_grid) {
  if (z == 0.0 || !std::isfinite(z)) throw InvalidParameter("lamperti_Z: z must be nonzero");
  if (xi.times.empty()) throw InvalidParameter("lamperti_Z: empty xi path");
  if (!std::is_sorted(level_grid.begin(), level_grid.end()))
    throw InvalidParameter("lamperti_Z: level grid must be increasing");
  const double az = std::fabs(z);
  SsmpPath p;
  p.z = z;
  auto push = [&](double lev, double zz, double dz, double t) {
    p.levels.push_back(lev);
    p.Z.push_back(zz);
    p.dZ.push_back(dz);
    p.tau.push_back(t);
  };
  push(0.0, z, 0.0, 0.0);
  std::size_t g = 0;
  while (g < level_grid.size() && level_grid[g] <= 0.0) ++g;
  double lev = 0.0;
  for (std::size_t k = 1; k < xi.times.size(); ++k) {
    const double h = xi.times[k] - xi.times[k - 1];
    const double x0 = xi.xi[k - 1], x1 = xi.left_limit(k);
    const double e0 = std::exp(x0), e1 = std::exp(x1);
    const double next = lev + az * 0.5 * h * (e0 + e1);
    // grid levels inside this trapezoid cell
    while (g < level_grid.size() && level_grid[g] < next) {
      const double f = (level_grid[g] - lev) / (next - lev);
      const double x = x0 + f * (x1 - x0);
      push(level_grid[g], z * std::exp(x), 0.0, xi.times[k - 1] + f * h);
      ++g;
    }
    lev = next;
    const double d = xi.delta[k];
    const double zk = z * std::exp(xi.xi[k]);
    if (d != 0.0) {
      const double dz = z * std::exp(x1) * std::expm1(d);
      push(lev, zk, dz, xi.times[k]);
      p.jumps.emplace_back(lev, dz);
    } else if (k + 1 == xi.times.size()) {
      push(lev, zk, 0.0, xi.times[k]);
    }
  }
  p.zeta = lev;
  p.censored = !xi.hit_floor;
  return p;
}

/// xi sampled with fixed cutoff and step until the Lamperti clock |z| int e^xi
/// passes a_max or |Z| drops below floor_size, then transformed.
inline SsmpPath sample_ssmp(double z, double a_max, const LevyConfig& cfg, CounterRng& rng,
                            double floor_size, const std::vector<double>& level_grid = {}) {
  if (z == 0.0 || !std::isfinite(z)) throw InvalidParameter("sample_ssmp: z must be nonzero");
  if (!(a_max > 0.0)) throw InvalidParameter("sample_ssmp: a_max must be positive");
  if (!(floor_size > 0.0 && floor_size < std::fabs(z)))
    throw InvalidParameter("sample_ssmp: floor_size must lie in (0, |z|)");
  cfg.validate();
  const double az = std::fabs(z);
  const double floor = std::log(floor_size / az);
  auto tab = levy_tables(cfg.eps);
  LevyPath xi;
  xi.times.push_back(0.0);
  xi.xi.push_back(0.0);
  xi.delta.push_back(0.0);
  LevyStepper st(*tab, rng);
  double t = 0.0, x = 0.0, lev = 0.0, prev = 1.0;
  bool stop = false;
  while (!stop) {
    st.step(t, x, cfg.dt, [&](double tn, double xn, double d) {
      if (stop) return;
      const double el = std::exp(xn - d);
      lev += az * 0.5 * (tn - xi.times.back()) * (prev + el);
      prev = std::exp(xn);
      xi.times.push_back(tn);
      xi.xi.push_back(xn);
      xi.delta.push_back(d);
      if (d != 0.0) xi.jumps.emplace_back(tn, d);
      if (xn < floor) {
        xi.hit_floor = true;
        stop = true;
      } else if (lev >= a_max) {
        stop = true;
      }
    });
  }
  return lamperti_Z(xi, z, level_grid);
}

/// Child created by a jump of a cell path, relative to a positive parent.
struct Birth {
  double level = 0.0;      // level within the parent path
  double size = 0.0;       // -dZ of the positive parent
  double runmax = 0.0;     // max of the parent size up to and including the pre-jump value
  std::uint64_t ordinal = 0;  // index among the recorded births, in level order
};

struct CellStepping {
  double dt = 1e-3;         // xi-time step for a cell of unit size
  double ds_max = 0.25;     // largest xi-time step
  double s_min = 1e-3;      // births below this size need not be explicit
  double floor_ratio = 0.05;  // death when size < floor_ratio * s_min
  std::size_t max_steps = std::size_t{1} << 24;

  void validate() const {
    if (!(dt > 0.0)) throw InvalidParameter("cell dt must be positive");
    if (!(ds_max >= dt)) throw InvalidParameter("ds_max must be >= dt");
    if (!(s_min > 0.0)) throw InvalidParameter("s_min must be positive");
    if (!(floor_ratio > 0.0 && floor_ratio < 1.0)) throw InvalidParameter("floor_ratio must lie in (0, 1)");
  }
};

namespace detail {

// Cutoff ladder eps_k = 0.1 * 2^{-k/2}, k = 0..kLadder-1, smallest about 1e-4.
inline constexpr int kLadder = 21;

inline double ladder_eps(int k) { return 0.1 * std::exp2(-0.5 * k); }

inline const LevyTables& ladder_table(int k) {
  static std::array<std::atomic<const LevyTables*>, kLadder> tabs{};
  static std::mutex mu;
  const LevyTables* t = tabs[k].load(std::memory_order_acquire);
  if (t) return *t;
  std::lock_guard<std::mutex> lock(mu);
  t = tabs[k].load(std::memory_order_relaxed);
  if (!t) {
    static std::vector<std::shared_ptr<const LevyTables>> keep;
    keep.push_back(levy_tables(ladder_eps(k)));
    t = keep.back().get();
    tabs[k].store(t, std::memory_order_release);
  }
  return *t;
}

// Largest ladder cutoff not exceeding ln(1 + s_min / x).
inline int ladder_index(double x, double s_min) {
  const double want = std::log1p(s_min / x);
  if (want >= 0.1) return 0;
  const int k = static_cast<int>(std::ceil(-2.0 * std::log2(want / 0.1) - 1e-12));
  return std::min(k, kLadder - 1);
}

}  // namespace detail

/// Positive self-similar path from x0 > 0, simulated directly in the level
/// parametrization: xi advances in steps ds chosen so that d(level) = X ds
/// stays near dt, and the small-jump cutoff follows the current size so that
/// every jump creating a child of size >= s_min is explicit. Stops when X
/// falls below the death floor or the level reaches `horizon`.
inline SsmpPath simulate_cell_path(double x0, double horizon, const CellStepping& st,
                                   CounterRng& rng, std::vector<Birth>* births = nullptr,
                                   bool keep_path = true) {
  if (!(x0 > 0.0) || !std::isfinite(x0)) throw InvalidParameter("cell path: x0 must be positive");
  if (!(horizon > 0.0)) throw InvalidParameter("cell path: horizon must be positive");
  st.validate();
  SsmpPath p;
  p.z = x0;
  auto push = [&](double lev, double zz, double dz, double t) {
    if (!keep_path) return;
    p.levels.push_back(lev);
    p.Z.push_back(zz);
    p.dZ.push_back(dz);
    p.tau.push_back(t);
  };
  const double floor = st.floor_ratio * st.s_min;
  double t = 0.0, xi = 0.0, lev = 0.0, runmax = x0;
  double prev_t = 0.0, prev_x = x0;
  bool dead = false;
  std::uint64_t ordinal = 0;
  push(0.0, x0, 0.0, 0.0);
  int cur = -1;
  const LevyTables* tab = nullptr;
  LevyStepper stepper(detail::ladder_table(0), rng);
  for (std::size_t n = 0; n < st.max_steps; ++n) {
    const double x = x0 * std::exp(xi);
    const int k = detail::ladder_index(x, st.s_min);
    if (k != cur) {
      cur = k;
      tab = &detail::ladder_table(k);
      stepper.set_tables(*tab);
    }
    const double ds = std::clamp(st.dt / x, st.dt, st.ds_max);
    bool stop = false;
    stepper.step(t, xi, ds, [&](double tn, double xn, double d) {
      if (stop) return;
      const double xl = x0 * std::exp(xn - d);
      lev += 0.5 * (tn - prev_t) * (prev_x + xl);
      runmax = std::max(runmax, xl);
      const double xr = x0 * std::exp(xn);
      if (d != 0.0) {
        const double dz = xl * std::expm1(d);
        if (births && std::fabs(dz) >= st.s_min && lev < horizon)
          births->push_back({lev, -dz, runmax, ordinal++});
        push(lev, xr, dz, tn);
        if (keep_path && lev < horizon) p.jumps.emplace_back(lev, dz);
      } else {
        push(lev, xr, 0.0, tn);
      }
      runmax = std::max(runmax, xr);
      prev_t = tn;
      prev_x = xr;
      if (xr < floor) {
        dead = true;
        stop = true;
      } else if (lev >= horizon) {
        stop = true;
      }
    });
    if (stop) break;
  }
  p.zeta = lev;
  p.censored = !dead;
  return p;
}

struct CauchyOracleSample {
  std::vector<double> values;   // eta_a on kept paths
  std::vector<double> weights;  // x^2 / eta_a^2
  std::size_t n_paths = 0;
  std::size_t n_kept = 0;

  double total_weight() const {
    double s = 0.0;
    for (double w : weights) s += w;
    return s;
  }
  /// Estimate of the probability that the locally largest fragment is alive at a.
  double alive_mass() const { return n_paths ? total_weight() / static_cast<double>(n_paths) : 0.0; }
};

/// Weighted sample of eta_a from N Cauchy paths (scale 2) started at x,
/// keeping paths whose every increment satisfies |eta_b| >= |delta eta_b|.
inline CauchyOracleSample cauchy_weighted_xi_oracle(double x, double a, const GridSpec& grid,
                                                    CounterRng& rng, std::size_t N) {
  if (!(x > 0.0)) throw InvalidParameter("cauchy oracle: x must be positive");
  if (!(a > 0.0)) throw InvalidParameter("cauchy oracle: a must be positive");
  if (N == 0) throw InvalidParameter("cauchy oracle: N must be positive");
  grid.validate();
  const std::vector<double> times = uniform_grid(a, grid);
  CauchyOracleSample s;
  s.n_paths = N;
  for (std::size_t i = 0; i < N; ++i) {
    CounterRng r = rng.split(i);
    double eta = x;
    bool keep = true;
    for (std::size_t k = 1; k < times.size(); ++k) {
      const double inc = 2.0 * (times[k] - times[k - 1]) * r.cauchy();
      eta += inc;
      if (std::fabs(eta) < std::fabs(inc)) {
        keep = false;
        break;
      }
    }
    if (!keep) continue;
    ++s.n_kept;
    s.values.push_back(eta);
    s.weights.push_back(x * x / (eta * eta));
  }
  if (s.n_kept == 0) throw InsufficientSample("cauchy oracle: every path was rejected");
  return s;
}

}  // namespace gflab

#endif  // GFLAB_LAMPERTI_HPP
