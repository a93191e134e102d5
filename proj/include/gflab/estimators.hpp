#ifndef GFLAB_ESTIMATORS_HPP
#define GFLAB_ESTIMATORS_HPP

#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

#include "cell_system.hpp"
#include "errors.hpp"
#include "level_cut.hpp"
#include "rng.hpp"
#include "sampling.hpp"
#include "stats.hpp"

namespace gflab {

struct MartingaleReport {
  double a = 0.0;
  double z = 0.0;
  double mean = 0.0;
  double se = 0.0;  // bootstrap
  double lo = 0.0;
  double hi = 0.0;
  std::size_t resamples = 0;
  double target = 0.0;  // z^2
  std::size_t n = 0;
  bool vacuous = false;  // no sampled excursion reached a

  bool within(double rel_tol = 0.05, double n_se = 3.0) const {
    return std::fabs(mean - target) <= std::max(n_se * se, rel_tol * std::fabs(target));
  }
};

/// Report from per-excursion values of M_a.
inline MartingaleReport martingale_report(const std::vector<double>& m, double z, double a,
                                          CounterRng rng, std::size_t resamples = 1000) {
  if (!(a > 0.0)) throw InvalidParameter("estimate_M_a: a must be positive");
  if (m.empty()) throw InvalidParameter("estimate_M_a: empty sample");
  const BootstrapResult b = bootstrap_mean(m, resamples, rng);
  MartingaleReport r;
  r.a = a;
  r.z = z;
  r.mean = b.estimate;
  r.se = b.se;
  r.lo = b.lo;
  r.hi = b.hi;
  r.resamples = b.resamples;
  r.target = z * z;
  r.n = m.size();
  r.vacuous = true;
  for (double v : m)
    if (v != 0.0) r.vacuous = false;
  return r;
}

inline MartingaleReport estimate_M_a(const std::vector<ExcursionPath>& excursions, double a,
                                     CounterRng rng, std::size_t resamples = 1000) {
  if (!(a > 0.0)) throw InvalidParameter("estimate_M_a: a must be positive");
  if (excursions.empty()) throw InvalidParameter("estimate_M_a: empty sample");
  std::vector<double> m;
  m.reserve(excursions.size());
  for (const auto& p : excursions) m.push_back(martingale_value(p, a));
  return martingale_report(m, excursions.front().z, a, rng, resamples);
}

/// x at the first crossing of y = a, interpolated on the crossing cell.
inline std::optional<double> first_hit_x(const ExcursionPath& p, double a) {
  for (std::size_t i = 1; i < p.y.size(); ++i) {
    if (p.y[i] >= a) {
      const double f = (a - p.y[i - 1]) / (p.y[i] - p.y[i - 1]);
      return p.x[i - 1] + f * (p.x[i] - p.x[i - 1]);
    }
  }
  return std::nullopt;
}

/// Every m-th grid point of p, keeping the endpoint.
inline ExcursionPath coarsen(const ExcursionPath& p, std::size_t m) {
  if (m == 0) throw InvalidParameter("coarsen: factor must be positive");
  ExcursionPath q;
  q.z = p.z;
  q.duration = p.duration;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; i += m) {
    q.times.push_back(p.times[i]);
    q.x.push_back(p.x[i]);
    q.y.push_back(p.y[i]);
  }
  if ((n - 1) % m != 0) {
    q.times.push_back(p.times[n - 1]);
    q.x.push_back(p.x[n - 1]);
    q.y.push_back(p.y[n - 1]);
  }
  return q;
}

struct MuCheckReport {
  double a = 0.0;
  double z = 0.0;
  KsResult ks;
  double p_bootstrap = -1.0;  // -1 when not computed
  double mean_weight = 0.0;
  double se_weight = 0.0;
  double ess = 0.0;
  std::size_t n_excursions = 0;
  std::size_t n_reached = 0;
  std::size_t n_reference = 0;
};

/// x(T_a) under gamma_z reweighted by M_a / z^2 against draws of x(T_a)
/// under the reference law. hit_x is ignored where the weight is 0. With
/// resamples > 0 a bootstrap p-value is added.
inline MuCheckReport mu_z_check(const std::vector<double>& hit_x, const std::vector<double>& weights,
                                const std::vector<double>& reference_x, double z, double a,
                                std::size_t resamples = 0, CounterRng rng = CounterRng(0, 0)) {
  if (hit_x.size() != weights.size()) throw InvalidParameter("mu_z_check: size mismatch");
  if (hit_x.empty() || reference_x.empty()) throw InvalidParameter("mu_z_check: empty sample");
  MuCheckReport r;
  r.a = a;
  r.z = z;
  r.n_excursions = hit_x.size();
  r.n_reference = reference_x.size();
  const MeanSe ms = mean_se(weights);
  r.mean_weight = ms.mean;
  r.se_weight = ms.se;
  std::vector<double> xs, ws;
  for (std::size_t i = 0; i < hit_x.size(); ++i) {
    if (weights[i] < 0.0) throw InvalidParameter("mu_z_check: negative weight");
    if (weights[i] == 0.0) continue;
    xs.push_back(hit_x[i]);
    ws.push_back(weights[i]);
  }
  r.n_reached = xs.size();
  r.ess = effective_sample_size(ws);
  if (r.ess < 100.0) throw InsufficientSample("mu_z_check: effective sample size below 100");
  const std::vector<double> ones(reference_x.size(), 1.0);
  r.ks = ks_weighted(xs, ws, reference_x, ones);
  if (resamples > 0) r.p_bootstrap = ks_weighted_bootstrap_p(xs, ws, reference_x, ones, resamples, rng);
  return r;
}

inline MuCheckReport mu_z_check(const std::vector<ExcursionPath>& excursions,
                                const std::vector<HExcursionPath>& reference, double a) {
  if (excursions.empty() || reference.empty()) throw InvalidParameter("mu_z_check: empty sample");
  const double z = excursions.front().z;
  std::vector<double> hx, w, rx;
  for (const auto& p : excursions) {
    const auto h = first_hit_x(p, a);
    hx.push_back(h.value_or(0.0));
    w.push_back(h ? martingale_value(p, a) / (z * z) : 0.0);
  }
  for (const auto& h : reference) rx.push_back(h.hit_x);
  return mu_z_check(hx, w, rx, z, a);
}

/// Value at s -> 0 of f(s) = f0 + c1 s + c2 s ln s from f(h), f(2h), f(4h).
inline double extrapolate_smin(double f1, double f2, double f4) { return 4.0 * f1 - 4.0 * f2 + f4; }

/// M_n, D_n and DC_n of one system for n = 0..n_count-1, extrapolated to
/// s_min -> 0 from the system itself and its restrictions to birth sizes
/// >= 2 s_min and 4 s_min.
inline std::vector<BrwReport> brw_extrapolated(const CellSystem& cs, int n_count, double C) {
  const double s = cs.cfg.s_min;
  const CellSystem c2 = restrict_min_size(cs, 2.0 * s);
  const CellSystem c4 = restrict_min_size(cs, 4.0 * s);
  std::vector<BrwReport> out;
  for (int n = 0; n < n_count; ++n) {
    const BrwReport r1 = brw_observables(cs, n, C);
    const BrwReport r2 = brw_observables(c2, n, C);
    const BrwReport r4 = brw_observables(c4, n, C);
    BrwReport r = r1;
    r.M_n = extrapolate_smin(r1.M_n, r2.M_n, r4.M_n);
    r.D_n = extrapolate_smin(r1.D_n, r2.D_n, r4.D_n);
    r.DC_n = extrapolate_smin(r1.DC_n, r2.DC_n, r4.DC_n);
    out.push_back(r);
  }
  return out;
}

}  // namespace gflab

#endif  // GFLAB_ESTIMATORS_HPP
