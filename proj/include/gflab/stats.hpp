#ifndef GFLAB_STATS_HPP
#define GFLAB_STATS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace gflab {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

inline MeanSe mean_se(const std::vector<double>& v) {
  MeanSe r;
  r.n = v.size();
  if (v.empty()) return r;
  double s = 0.0;
  for (double x : v) s += x;
  r.mean = s / static_cast<double>(v.size());
  if (v.size() < 2) return r;
  double ss = 0.0;
  for (double x : v) ss += (x - r.mean) * (x - r.mean);
  r.se = std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
  return r;
}

/// Standard error of the difference of means of paired samples.
inline MeanSe paired_difference(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw InvalidParameter("paired_difference: size mismatch");
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return mean_se(d);
}

/// Kolmogorov survival function Q(lambda) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 0.2) return 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += (k % 2 == 1 ? term : -term);
    if (term < 1e-18) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

struct KsResult {
  double d = 0.0;
  double p = 1.0;
  double n_eff_a = 0.0;
  double n_eff_b = 0.0;
};

inline double effective_sample_size(const std::vector<double>& w) {
  double s = 0.0, s2 = 0.0;
  for (double x : w) {
    s += x;
    s2 += x * x;
  }
  return s2 > 0.0 ? s * s / s2 : 0.0;
}

/// Weighted two-sample KS. The p-value uses the effective sample sizes in
/// place of n and m and is therefore approximate.
inline KsResult ks_weighted(std::vector<double> a, std::vector<double> wa, std::vector<double> b,
                            std::vector<double> wb) {
  if (a.empty() || b.empty()) throw InvalidParameter("ks test: empty sample");
  if (a.size() != wa.size() || b.size() != wb.size())
    throw InvalidParameter("ks test: weights do not match the sample");
  auto sort_pair = [](std::vector<double>& v, std::vector<double>& w) {
    std::vector<std::size_t> idx(v.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t i, std::size_t j) { return v[i] < v[j]; });
    std::vector<double> v2(v.size()), w2(v.size());
    double tot = 0.0;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      v2[k] = v[idx[k]];
      w2[k] = w[idx[k]];
      tot += w2[k];
    }
    if (!(tot > 0.0)) throw InsufficientSample("ks test: total weight is zero");
    for (double& x : w2) x /= tot;
    v.swap(v2);
    w.swap(w2);
  };
  KsResult r;
  r.n_eff_a = effective_sample_size(wa);
  r.n_eff_b = effective_sample_size(wb);
  sort_pair(a, wa);
  sort_pair(b, wb);
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, d = 0.0;
  while (i < a.size() || j < b.size()) {
    double v;
    if (j >= b.size() || (i < a.size() && a[i] <= b[j]))
      v = a[i];
    else
      v = b[j];
    while (i < a.size() && a[i] == v) fa += wa[i++];
    while (j < b.size() && b[j] == v) fb += wb[j++];
    d = std::max(d, std::fabs(fa - fb));
  }
  r.d = std::min(d, 1.0);
  const double ne = r.n_eff_a * r.n_eff_b / (r.n_eff_a + r.n_eff_b);
  r.p = kolmogorov_q(r.d * std::sqrt(ne));
  return r;
}

inline KsResult ks_two_sample(const std::vector<double>& a, const std::vector<double>& b) {
  return ks_weighted(a, std::vector<double>(a.size(), 1.0), b, std::vector<double>(b.size(), 1.0));
}

/// Bootstrap p-value of the weighted KS distance: both samples are redrawn
/// with replacement from the pooled (value, weight) pairs, sizes kept.
inline double ks_weighted_bootstrap_p(const std::vector<double>& a, const std::vector<double>& wa,
                                      const std::vector<double>& b, const std::vector<double>& wb,
                                      std::size_t resamples, CounterRng rng) {
  const double d0 = ks_weighted(a, wa, b, wb).d;
  std::vector<double> px(a), pw(wa);
  px.insert(px.end(), b.begin(), b.end());
  pw.insert(pw.end(), wb.begin(), wb.end());
  const std::uint64_t n = px.size();
  std::vector<double> xa(a.size()), ya(a.size()), xb(b.size()), yb(b.size());
  std::size_t hits = 0, done = 0;
  for (std::size_t r = 0; r < resamples; ++r) {
    double sa = 0.0, sb = 0.0;
    for (std::size_t i = 0; i < xa.size(); ++i) {
      const std::uint64_t k = rng.next_u64() % n;
      xa[i] = px[k];
      ya[i] = pw[k];
      sa += ya[i];
    }
    for (std::size_t i = 0; i < xb.size(); ++i) {
      const std::uint64_t k = rng.next_u64() % n;
      xb[i] = px[k];
      yb[i] = pw[k];
      sb += yb[i];
    }
    if (!(sa > 0.0) || !(sb > 0.0)) continue;
    ++done;
    if (ks_weighted(xa, ya, xb, yb).d >= d0) ++hits;
  }
  if (done == 0) throw InsufficientSample("ks bootstrap: every resample had zero weight");
  return static_cast<double>(hits + 1) / static_cast<double>(done + 1);
}

/// One-sample KS against a continuous CDF.
inline KsResult ks_one_sample(std::vector<double> a, const std::function<double(double)>& cdf) {
  if (a.empty()) throw InvalidParameter("ks test: empty sample");
  std::sort(a.begin(), a.end());
  const double n = static_cast<double>(a.size());
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double f = cdf(a[i]);
    d = std::max({d, static_cast<double>(i + 1) / n - f, f - static_cast<double>(i) / n});
  }
  KsResult r;
  r.d = d;
  r.n_eff_a = n;
  r.p = kolmogorov_q(d * std::sqrt(n));
  return r;
}

struct BootstrapResult {
  double estimate = 0.0;
  double se = 0.0;
  double lo = 0.0;  // 2.5% percentile
  double hi = 0.0;  // 97.5% percentile
  std::size_t resamples = 0;
};

/// Nonparametric bootstrap of stat(sample) with resampling indices from rng.
template <class Stat>
BootstrapResult bootstrap(const std::vector<double>& v, Stat stat, std::size_t resamples,
                          CounterRng rng) {
  BootstrapResult r;
  r.estimate = stat(v);
  r.resamples = resamples;
  if (v.size() < 2 || resamples < 2) return r;
  std::vector<double> reps(resamples), buf(v.size());
  const std::uint64_t n = v.size();
  for (std::size_t b = 0; b < resamples; ++b) {
    for (auto& x : buf) x = v[rng.next_u64() % n];
    reps[b] = stat(buf);
  }
  const MeanSe ms = mean_se(reps);
  r.se = ms.se * std::sqrt(static_cast<double>(resamples));
  std::sort(reps.begin(), reps.end());
  r.lo = reps[static_cast<std::size_t>(0.025 * static_cast<double>(resamples - 1))];
  r.hi = reps[static_cast<std::size_t>(0.975 * static_cast<double>(resamples - 1))];
  return r;
}

inline BootstrapResult bootstrap_mean(const std::vector<double>& v, std::size_t resamples,
                                      CounterRng rng) {
  return bootstrap(
      v,
      [](const std::vector<double>& s) {
        double t = 0.0;
        for (double x : s) t += x;
        return t / static_cast<double>(s.size());
      },
      resamples, rng);
}

}  // namespace gflab

#endif  // GFLAB_STATS_HPP
