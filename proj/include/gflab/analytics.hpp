#ifndef GFLAB_ANALYTICS_HPP
#define GFLAB_ANALYTICS_HPP

#include <cmath>
#include <limits>
#include <numbers>
#include <utility>
#include <vector>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "errors.hpp"
#include "levy.hpp"

namespace gflab {

/// kappa(q) = psi(q) + int (1 - e^y)^q Lambda(dy) over (-ln 2, 0), for 1 < q < 3.
inline double kappa(double q, const LevyConfig& cfg = {}) {
  if (!(q > 1.0)) throw DomainError("kappa: q must be > 1");
  if (!(q < 3.0)) throw DomainError("kappa: q must be < 3");
  thread_local boost::math::quadrature::tanh_sinh<double> ts;
  // Substituting w = 1 - e^y: (2/pi) int_0^{1/2} w^{q-2} / (1-w)^2 dw.
  auto f = [q](double w) { return std::pow(w, q - 2.0) / ((1.0 - w) * (1.0 - w)); };
  double err = 0.0;
  const double tol = std::min(1e-12, cfg.quadrature_tol);
  const double neg = kTwoOverPi * ts.integrate(f, 0.0, 0.5, tol, &err);
  return psi(q, cfg) + neg;
}

/// -2 cos(pi q) Gamma(q-1) Gamma(3-q) / pi on 1 < q < 3.
inline double kappa_closed(double q) {
  if (!(q > 1.0 && q < 3.0)) throw DomainError("kappa_closed: q must lie in (1, 3)");
  if (q == 1.5 || q == 2.5) return 0.0;
  if (q == 2.0) return -2.0 / std::numbers::pi;
  const double g = std::exp(std::lgamma(q - 1.0) + std::lgamma(3.0 - q));
  return -2.0 * std::cos(std::numbers::pi * q) / std::numbers::pi * g;
}

namespace detail {

inline double rgamma(double x) {
  if (x <= 0.0 && x == std::floor(x)) return 0.0;
  return 1.0 / std::tgamma(x);
}

}  // namespace detail

/// -2 Gamma(1/2 - q) Gamma(3/2 + q) / (Gamma(-q) Gamma(1 + q)) on -3/2 < q < 1/2.
inline double phi_plus(double q) {
  if (!(q > -1.5 && q < 0.5)) throw DomainError("phi_plus: q must lie in (-3/2, 1/2)");
  return -2.0 * std::tgamma(0.5 - q) * std::tgamma(1.5 + q) * detail::rgamma(-q) *
         detail::rgamma(1.0 + q);
}

struct Roots {
  double omega_minus = 0.0;
  double omega_plus = 0.0;
};

inline Roots find_roots(const LevyConfig& cfg = {}, double tol = 1e-10) {
  auto bisect = [&](double lo, double hi) {
    double flo = kappa(lo, cfg), fhi = kappa(hi, cfg);
    if (!(flo * fhi < 0.0)) throw NumericFailure("find_roots: no sign change of kappa");
    while (hi - lo > tol) {
      const double mid = 0.5 * (lo + hi);
      const double fm = kappa(mid, cfg);
      if ((fm < 0.0) == (flo < 0.0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  return {bisect(1.05, 2.0), bisect(2.0, 2.95)};
}

/// Green function at 0 of the Cauchy process killed on leaving (-C/2, C/2).
inline double green_RC(double z, double C) {
  if (!(C > 0.0)) throw InvalidParameter("green_RC: C must be positive");
  const double zt = 2.0 * z / C;
  if (std::fabs(zt) > 1.0) throw DomainError("green_RC: |z| must be <= C/2");
  if (std::fabs(zt) == 1.0) return 0.0;
  if (zt == 0.0) return std::numeric_limits<double>::infinity();
  const double s = std::sqrt((1.0 + zt) / (1.0 - zt));
  return -(std::log(std::fabs(s - 1.0)) - std::log(std::fabs(s + 1.0))) / (2.0 * std::numbers::pi);
}

struct CumulantGrid {
  std::vector<double> q;
  std::vector<double> kappa_numeric;
  std::vector<double> kappa_closed;
  std::vector<double> phi_q;
  std::vector<double> phi_plus;
  std::vector<double> phi_residual;  // phi_plus(q) - kappa(q + 5/2)
  Roots roots;
  double max_kappa_diff = 0.0;
};

inline CumulantGrid cumulant_grid(const LevyConfig& cfg = {}) {
  CumulantGrid g;
  for (int i = 11; i <= 29; ++i) {
    const double q = i / 10.0;
    g.q.push_back(q);
    g.kappa_numeric.push_back(kappa(q, cfg));
    g.kappa_closed.push_back(kappa_closed(q));
    g.max_kappa_diff = std::max(g.max_kappa_diff, std::fabs(g.kappa_numeric.back() - g.kappa_closed.back()));
  }
  for (double q : {-1.2, -0.6, -0.5, 0.0, 0.3}) {
    g.phi_q.push_back(q);
    g.phi_plus.push_back(phi_plus(q));
    g.phi_residual.push_back(g.phi_plus.back() - kappa(q + 2.5, cfg));
  }
  g.roots = find_roots(cfg);
  return g;
}

}  // namespace gflab

#endif  // GFLAB_ANALYTICS_HPP
