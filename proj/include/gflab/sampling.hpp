#ifndef GFLAB_SAMPLING_HPP
#define GFLAB_SAMPLING_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace gflab {

struct GridSpec {
  double dt = 1e-4;
  double level_da = 1e-2;
  std::uint64_t seed = 20240917;
  std::uint64_t replica_index = 0;
  // Upper bound on the number of grid steps of one path. Longer paths are
  // discretized with the uniform step duration / max_steps instead.
  std::size_t max_steps = std::size_t{1} << 21;

  void validate() const {
    if (!(dt > 0.0) || !std::isfinite(dt)) throw InvalidParameter("grid dt must be positive");
    if (!(level_da > 0.0) || !std::isfinite(level_da))
      throw InvalidParameter("grid level_da must be positive");
    if (max_steps < 1) throw InvalidParameter("grid max_steps must be at least 1");
  }

  CounterRng rng() const { return CounterRng(seed, replica_index); }
};

struct ExcursionPath {
  double z = 0.0;
  double duration = 0.0;
  std::vector<double> times;
  std::vector<double> x;
  std::vector<double> y;

  std::size_t size() const { return times.size(); }
};

struct CauchyPath {
  double start = 0.0;
  std::vector<double> times;
  std::vector<double> values;
  std::vector<std::pair<double, double>> jumps;  // (time, increment)
};

struct HExcursionPath {
  double start = 0.0;
  double level = 0.0;
  std::vector<double> times;
  std::vector<double> x;
  std::vector<double> y;
  double hit_time = 0.0;  // linearly interpolated first passage time
  double hit_x = 0.0;     // x at hit_time, interpolated on the same cell
  bool truncated = false;
};

/// Uniform grid on [0, r] with step dt and a final partial step, so that the
/// last time equals r exactly. If more than max_steps steps would be needed
/// the step becomes r / max_steps.
inline std::vector<double> uniform_grid(double r, double dt, std::size_t max_steps) {
  if (!(r > 0.0) || !std::isfinite(r)) throw InvalidParameter("grid length must be positive");
  double ratio = r / dt;
  std::size_t n;
  double h = dt;
  if (ratio > static_cast<double>(max_steps)) {
    n = max_steps;
    h = r / static_cast<double>(n);
  } else {
    n = static_cast<std::size_t>(std::ceil(ratio));
    if (n == 0) n = 1;
  }
  std::vector<double> t(n + 1);
  for (std::size_t k = 0; k < n; ++k) t[k] = static_cast<double>(k) * h;
  t[n] = r;
  return t;
}

inline std::vector<double> uniform_grid(double r, const GridSpec& grid) {
  return uniform_grid(r, grid.dt, grid.max_steps);
}

/// r = z^2 / (2W), W ~ Exp(1).
inline double sample_duration(double z, CounterRng& rng) {
  if (z == 0.0 || !std::isfinite(z)) throw InvalidParameter("sample_duration: z must be nonzero");
  double w;
  do {
    w = rng.exponential();
  } while (w == 0.0);
  return z * z / (2.0 * w);
}

namespace detail {

// Brownian bridge 0 -> endpoint on the given times, written into out.
inline void bridge_into(const std::vector<double>& t, double endpoint, CounterRng& rng,
                        std::vector<double>& out) {
  const std::size_t n = t.size();
  out.resize(n);
  out[0] = 0.0;
  double b = 0.0;
  for (std::size_t k = 1; k < n; ++k) {
    b += std::sqrt(t[k] - t[k - 1]) * rng.normal();
    out[k] = b;
  }
  const double r = t[n - 1];
  const double shift = out[n - 1] - endpoint;
  for (std::size_t k = 1; k + 1 < n; ++k) out[k] -= (t[k] / r) * shift;
  out[n - 1] = endpoint;
}

inline void bessel3_bridge_into(const std::vector<double>& t, CounterRng& rng,
                                std::vector<double>& out, std::vector<double>& work) {
  const std::size_t n = t.size();
  out.assign(n, 0.0);
  for (int c = 0; c < 3; ++c) {
    bridge_into(t, 0.0, rng, work);
    for (std::size_t k = 1; k + 1 < n; ++k) out[k] += work[k] * work[k];
  }
  for (std::size_t k = 1; k + 1 < n; ++k) out[k] = std::sqrt(out[k]);
  out[0] = 0.0;
  out[n - 1] = 0.0;
}

}  // namespace detail

inline std::vector<double> sample_brownian_bridge(const std::vector<double>& times,
                                                  double endpoint, CounterRng& rng) {
  if (times.size() < 2 || !(times.back() > 0.0))
    throw InvalidParameter("sample_brownian_bridge: r must be positive");
  std::vector<double> out;
  detail::bridge_into(times, endpoint, rng, out);
  return out;
}

inline std::vector<double> sample_brownian_bridge(double r, double endpoint, const GridSpec& grid,
                                                  CounterRng& rng) {
  if (!(r > 0.0)) throw InvalidParameter("sample_brownian_bridge: r must be positive");
  return sample_brownian_bridge(uniform_grid(r, grid), endpoint, rng);
}

inline std::vector<double> sample_bessel3_bridge(const std::vector<double>& times,
                                                 CounterRng& rng) {
  if (times.size() < 2 || !(times.back() > 0.0))
    throw InvalidParameter("sample_bessel3_bridge: r must be positive");
  std::vector<double> out, work;
  detail::bessel3_bridge_into(times, rng, out, work);
  return out;
}

inline std::vector<double> sample_bessel3_bridge(double r, const GridSpec& grid, CounterRng& rng) {
  if (!(r > 0.0)) throw InvalidParameter("sample_bessel3_bridge: r must be positive");
  return sample_bessel3_bridge(uniform_grid(r, grid), rng);
}

/// Excursion under gamma_z. `path` is reused as workspace when passed in.
inline void sample_excursion_into(double z, const GridSpec& grid, CounterRng& rng,
                                  ExcursionPath& path, std::vector<double>& work) {
  const double r = sample_duration(z, rng);
  path.z = z;
  path.duration = r;
  path.times = uniform_grid(r, grid);
  detail::bridge_into(path.times, z, rng, path.x);
  detail::bessel3_bridge_into(path.times, rng, path.y, work);
}

inline ExcursionPath sample_excursion(double z, const GridSpec& grid, CounterRng& rng) {
  grid.validate();
  ExcursionPath p;
  std::vector<double> work;
  sample_excursion_into(z, grid, rng, p, work);
  return p;
}

/// Symmetric Cauchy path with characteristic function exp(-2 t |lambda|).
inline CauchyPath sample_cauchy_path(double start, double horizon, const GridSpec& grid,
                                     CounterRng& rng, double threshold = -1.0) {
  if (!(horizon > 0.0)) throw InvalidParameter("sample_cauchy_path: horizon must be positive");
  if (threshold < 0.0) threshold = 10.0 * std::sqrt(grid.dt);
  CauchyPath p;
  p.start = start;
  p.times = uniform_grid(horizon, grid);
  p.values.resize(p.times.size());
  p.values[0] = start;
  for (std::size_t k = 1; k < p.times.size(); ++k) {
    const double h = p.times[k] - p.times[k - 1];
    const double inc = 2.0 * h * rng.cauchy();
    p.values[k] = p.values[k - 1] + inc;
    if (std::fabs(inc) > threshold) p.jumps.emplace_back(p.times[k], inc);
  }
  return p;
}

/// Brownian x from `start` and BES3 y from 0, stopped when y first reaches
/// a. Besides grid crossings, a cell whose end points both lie below a is
/// declared hitting with the Brownian-bridge crossing probability
/// exp(-2 (a - y0)(a - y1) / h); the hit is then placed at the cell midpoint.
/// The last stored point is (hit_time, hit_x, a). When `keep_path` is false
/// only the hit data is filled.
inline HExcursionPath sample_h_excursion(double start, double a, const GridSpec& grid,
                                         CounterRng& rng, std::size_t max_steps = 0,
                                         bool keep_path = true) {
  if (!(a > 0.0)) throw InvalidParameter("sample_h_excursion: a must be positive");
  grid.validate();
  if (max_steps == 0) max_steps = grid.max_steps;
  HExcursionPath p;
  p.start = start;
  p.level = a;
  const double h = grid.dt;
  const double sh = std::sqrt(h);
  double t = 0.0, x = start, b1 = 0.0, b2 = 0.0, b3 = 0.0, y = 0.0;
  if (keep_path) {
    p.times.push_back(t);
    p.x.push_back(x);
    p.y.push_back(y);
  }
  auto finish = [&](double th, double xh) {
    p.hit_time = th;
    p.hit_x = xh;
    if (keep_path) {
      p.times.push_back(th);
      p.x.push_back(xh);
      p.y.push_back(a);
    }
  };
  for (std::size_t k = 1; k <= max_steps; ++k) {
    const double xp = x, yp = y;
    x += sh * rng.normal();
    b1 += sh * rng.normal();
    b2 += sh * rng.normal();
    b3 += sh * rng.normal();
    y = std::sqrt(b1 * b1 + b2 * b2 + b3 * b3);
    const double tp = t;
    t = static_cast<double>(k) * h;
    if (y >= a) {
      const double f = (a - yp) / (y - yp);
      finish(tp + f * h, xp + f * (x - xp));
      return p;
    }
    const double e = 2.0 * (a - yp) * (a - y) / h;
    if (e < 40.0 && rng.uniform() < std::exp(-e)) {
      finish(tp + 0.5 * h, 0.5 * (xp + x));
      return p;
    }
    if (keep_path) {
      p.times.push_back(t);
      p.x.push_back(x);
      p.y.push_back(y);
    }
  }
  p.truncated = true;
  p.hit_time = t;
  p.hit_x = x;
  return p;
}

}  // namespace gflab

#endif  // GFLAB_SAMPLING_HPP
