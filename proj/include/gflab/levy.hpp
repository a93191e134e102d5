#ifndef GFLAB_LEVY_HPP
#define GFLAB_LEVY_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <utility>
#include <vector>

#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace gflab {

inline constexpr double kLn2 = std::numbers::ln2;
inline constexpr double kTwoOverPi = 2.0 / std::numbers::pi;

struct LevyConfig {
  double eps = 1e-3;
  double dt = 1e-3;
  double quadrature_tol = 1e-12;

  void validate() const {
    if (!(eps > 0.0) || !(eps < kLn2)) throw InvalidParameter("levy eps must lie in (0, ln 2)");
    if (!(dt > 0.0)) throw InvalidParameter("levy dt must be positive");
    if (!(quadrature_tol > 0.0)) throw InvalidParameter("quadrature_tol must be positive");
  }
};

/// (2/pi) e^{-y} / (e^y - 1)^2 on y > -ln 2, zero below; +inf at y = 0.
inline double levy_density(double y) {
  if (y <= -kLn2) return 0.0;
  if (y == 0.0) return std::numeric_limits<double>::infinity();
  if (y > 1.0) {
    const double e = std::exp(-y);
    return kTwoOverPi * e * e * e / ((1.0 - e) * (1.0 - e));
  }
  const double m = std::expm1(y);
  return kTwoOverPi * std::exp(-y) / (m * m);
}

namespace detail {

// (e^{qy} - 1 - q(e^y - 1)) times the Levy density, continuous at y = 0.
inline double psi_integrand(double q, double y) {
  if (y > 1.0) {
    const double e = std::exp(-y);
    const double num = std::exp((q - 3.0) * y) - q * e * e + (q - 1.0) * e * e * e;
    return kTwoOverPi * num / ((1.0 - e) * (1.0 - e));
  }
  if (std::fabs(y) < 1e-8) {
    return kTwoOverPi * (0.5 * (q * q - q) + y * ((q * q * q - q) / 6.0 - (q * q - q)));
  }
  if (std::fabs(y) < 0.1 && std::fabs(q * y) < 0.5) {
    // sum_{k>=2} (q^k - q) y^k / k!
    double num = 0.0, yk = y, qk = q, fact = 1.0;
    for (int k = 2; k <= 30; ++k) {
      yk *= y;
      qk *= q;
      fact *= k;
      const double bound = (std::fabs(qk) + std::fabs(q)) * std::fabs(yk) / fact;
      num += (qk - q) * yk / fact;
      if (bound < 1e-18 * std::fabs(num)) break;
    }
    // e^{-y} / (e^y - 1)^2 = e^{-y} (y / expm1 y)^2 / y^2
    const double r = y / std::expm1(y);
    const double ny2 = num / (y * y);
    return kTwoOverPi * std::exp(-y) * r * r * ny2;
  }
  const double m = std::expm1(y);
  return (std::expm1(q * y) - q * m) * kTwoOverPi * std::exp(-y) / (m * m);
}

// Antiderivative of e^{-y}/(e^y-1)^2, zero at -ln 2 and at +inf.
inline double G(double y) {
  if (y > 1.0) {
    // -sum_{k>=3} ((k-2)/k) w^k, w = e^{-y}
    const double w = std::exp(-y);
    double s = 0.0, wk = w * w;
    for (int k = 3; k < 200; ++k) {
      wk *= w;
      const double term = (static_cast<double>(k - 2) / k) * wk;
      s += term;
      if (term < 1e-18 * s) break;
    }
    return -s;
  }
  const double m = std::expm1(y);
  return -std::exp(-y) + 2.0 * y - 1.0 / m - 2.0 * std::log(std::fabs(m));
}

inline double G_prime(double y) {
  if (y > 0.0) {
    const double e = std::exp(-y);
    return e * e * e / ((1.0 - e) * (1.0 - e));
  }
  const double m = std::expm1(y);
  return std::exp(-y) / (m * m);
}

// Antiderivative of (e^y - 1) e^{-y}/(e^y-1)^2 = e^{-y}/(e^y-1); H(-ln 2) = 2, H(+inf) = 0.
inline double H(double y) {
  if (y > 1.0) {
    const double w = std::exp(-y);
    return std::log1p(-w) + w;
  }
  return std::log(std::fabs(std::expm1(y))) - y + std::exp(-y);
}

// Solve G(y) = target on (lo, hi), G increasing; safeguarded Newton.
inline double invert_G(double target, double lo, double hi) {
  if (!std::isfinite(hi)) {
    hi = std::max(1.0, lo + 1.0);
    while (G(hi) < target) hi *= 2.0;
  }
  double y = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    const double f = G(y) - target;
    if (f > 0.0)
      hi = y;
    else
      lo = y;
    double yn = y - f / G_prime(y);
    if (!(yn > lo && yn < hi)) yn = 0.5 * (lo + hi);
    const double step = std::fabs(yn - y);
    y = yn;
    if (step <= 1e-15 * std::max(1.0, std::fabs(y)) || hi - lo <= 1e-15 * std::max(1.0, std::fabs(y)))
      break;
  }
  return y;
}

template <class F>
double gk(F f, double a, double b) {
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, 1e-14);
}

}  // namespace detail

/// Laplace exponent by quadrature. Valid for q < 3.
inline double psi(double q, const LevyConfig& cfg = {}) {
  if (!(q < 3.0)) throw DomainError("psi: q must be < 3");
  if (q == 0.0) return 0.0;
  using namespace boost::math::quadrature;
  thread_local tanh_sinh<double> ts;
  thread_local exp_sinh<double> es;
  const double tol = std::min(1e-12, cfg.quadrature_tol);
  auto f = [q](double y) { return detail::psi_integrand(q, y); };
  double err = 0.0;
  const double i1 = ts.integrate(f, -kLn2, 0.0, tol, &err);
  const double i2 = detail::gk(f, 0.0, 1.0);
  const double i3 = es.integrate(f, 1.0, std::numeric_limits<double>::infinity(), tol, &err);
  const double v = -4.0 / std::numbers::pi * q + i1 + i2 + i3;
  if (!std::isfinite(v)) throw NumericFailure("psi: quadrature did not converge");
  return v;
}

/// The same exponent written with the compensator restricted to
/// |e^y - 1| < 1 and drift -(2/pi)(ln 2 + 3/2) q.
inline double psi_indicator_form(double q, const LevyConfig& cfg = {}) {
  if (!(q < 3.0)) throw DomainError("psi: q must be < 3");
  using namespace boost::math::quadrature;
  thread_local tanh_sinh<double> ts;
  thread_local exp_sinh<double> es;
  const double tol = std::min(1e-12, cfg.quadrature_tol);
  auto inner = [q](double y) { return detail::psi_integrand(q, y); };
  auto outer = [q](double y) {
    // e^{qy} - 1 without the compensator, times the density
    const double e = std::exp(-y);
    return kTwoOverPi * (std::exp((q - 3.0) * y) - e * e * e) / ((1.0 - e) * (1.0 - e));
  };
  double err = 0.0;
  const double i1 = ts.integrate(inner, -kLn2, 0.0, tol, &err);
  const double i2 = detail::gk(inner, 0.0, kLn2);
  const double i3 = es.integrate(outer, kLn2, std::numeric_limits<double>::infinity(), tol, &err);
  return -kTwoOverPi * (kLn2 + 1.5) * q + i1 + i2 + i3;
}

/// Small/large jump split of the Levy measure at cutoff eps, with the
/// inverse CDF of each large-jump side tabulated on an equispaced grid.
class LevyTables {
 public:
  static constexpr std::size_t kTableSize = 10000;

  explicit LevyTables(double eps) : eps_(eps) {
    if (!(eps > 0.0) || !(eps < kLn2)) throw InvalidParameter("levy eps must lie in (0, ln 2)");
    g_pos_ = detail::G(eps);   // < 0
    g_neg_ = detail::G(-eps);  // > 0
    mass_pos_ = -kTwoOverPi * g_pos_;
    mass_neg_ = kTwoOverPi * g_neg_;
    rate_ = mass_pos_ + mass_neg_;
    sigma2_ = detail::gk(
        [](double y) {
          const double r = (std::fabs(y) < 1e-12) ? 1.0 - 0.5 * y : y / std::expm1(y);
          return kTwoOverPi * std::exp(-y) * r * r;
        },
        -eps, eps);
    const double small = detail::gk(
        [](double y) {
          // (y - (e^y - 1)) times the density
          double d;
          if (std::fabs(y) < 1e-8) return -kTwoOverPi * (0.5 - y / 3.0);
          if (std::fabs(y) < 0.1) {
            double s = 0.0, yk = y, fact = 1.0;
            for (int k = 2; k <= 20; ++k) {
              yk *= y;
              fact *= k;
              s += yk / fact;
            }
            const double r = y / std::expm1(y);
            d = s / (y * y);
            return -kTwoOverPi * std::exp(-y) * r * r * d;
          }
          const double m = std::expm1(y);
          return (y - m) * kTwoOverPi * std::exp(-y) / (m * m);
        },
        -eps, eps);
    const double large = kTwoOverPi * (-detail::H(eps)) + kTwoOverPi * (detail::H(-eps) - 2.0);
    small_comp_ = small;
    drift_ = -4.0 / std::numbers::pi - large + small;

    inv_pos_.resize(kTableSize + 1);
    inv_neg_.resize(kTableSize + 1);
    inv_pos_[0] = 1.0 / eps;
    inv_pos_[kTableSize] = 0.0;
    inv_neg_[0] = -1.0 / kLn2;
    inv_neg_[kTableSize] = -1.0 / eps;
    for (std::size_t j = 1; j < kTableSize; ++j) {
      const double p = static_cast<double>(j) / kTableSize;
      inv_pos_[j] = 1.0 / exact_pos(p);
      inv_neg_[j] = 1.0 / exact_neg(p);
    }
  }

  double eps() const { return eps_; }
  double rate() const { return rate_; }
  double mass_pos() const { return mass_pos_; }
  double mass_neg() const { return mass_neg_; }
  double drift() const { return drift_; }
  double sigma2() const { return sigma2_; }
  double small_compensation() const { return small_comp_; }

  /// Positive jump with mass fraction p of (eps, y); exact inversion.
  double exact_pos(double p) const {
    return detail::invert_G((1.0 - p) * g_pos_, eps_, std::numeric_limits<double>::infinity());
  }
  /// Negative jump with mass fraction p of (-ln 2, y); exact inversion.
  double exact_neg(double p) const { return detail::invert_G(p * g_neg_, -kLn2, -eps_); }

  double sample_pos(double p) const {
    const double x = p * kTableSize;
    const std::size_t j = std::min(static_cast<std::size_t>(x), kTableSize - 1);
    if (j == kTableSize - 1) return exact_pos(p);
    const double f = x - static_cast<double>(j);
    const double y = 1.0 / (inv_pos_[j] + f * (inv_pos_[j + 1] - inv_pos_[j]));
    const double target = (1.0 - p) * g_pos_;
    return std::max(polish(polish(y, target), target), eps_);
  }
  double sample_neg(double p) const {
    const double x = p * kTableSize;
    const std::size_t j = std::min(static_cast<std::size_t>(x), kTableSize - 1);
    const double f = x - static_cast<double>(j);
    const double y = 1.0 / (inv_neg_[j] + f * (inv_neg_[j + 1] - inv_neg_[j]));
    const double target = p * g_neg_;
    return std::clamp(polish(polish(y, target), target), std::nextafter(-kLn2, 0.0), -eps_);
  }

  /// One jump of the compound Poisson part.
  double sample_jump(CounterRng& rng) const {
    const double u = rng.uniform() * rate_;
    if (u < mass_neg_) return sample_neg(u / mass_neg_);
    return sample_pos(std::min((u - mass_neg_) / mass_pos_, std::nextafter(1.0, 0.0)));
  }

 private:
  static double polish(double y, double target) {
    return y - (detail::G(y) - target) / detail::G_prime(y);
  }

  double eps_;
  double g_pos_, g_neg_;
  double mass_pos_, mass_neg_, rate_;
  double sigma2_, drift_, small_comp_;
  std::vector<double> inv_pos_, inv_neg_;
};

/// Process-wide cache of tables keyed by eps.
inline std::shared_ptr<const LevyTables> levy_tables(double eps) {
  static std::mutex mu;
  static std::map<double, std::shared_ptr<const LevyTables>> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(eps);
  if (it != cache.end()) return it->second;
  auto t = std::make_shared<const LevyTables>(eps);
  cache.emplace(eps, t);
  return t;
}

struct LevyPath {
  std::vector<double> times;
  std::vector<double> xi;     // value at each node, after any jump there
  std::vector<double> delta;  // jump at each node, 0 if none
  std::vector<std::pair<double, double>> jumps;  // (time, jump)
  bool hit_floor = false;  // stopped because xi fell below a floor

  double left_limit(std::size_t k) const { return xi[k] - delta[k]; }
};

/// Grid of step dt with the large jumps inserted as extra nodes. Exposes a
/// step-wise interface so that callers may stop early.
class LevyStepper {
 public:
  LevyStepper(const LevyTables& tab, CounterRng& rng) : tab_(&tab), rng_(&rng) {}

  void set_tables(const LevyTables& tab) { tab_ = &tab; }

  /// Advance xi over [t, t + h], appending nodes (jump nodes, then t + h).
  template <class Emit>
  void step(double& t, double& xi, double h, Emit&& emit) {
    const double rate = tab_->rate();
    const double drift = tab_->drift();
    const double sig = std::sqrt(tab_->sigma2());
    double s = 0.0;
    for (;;) {
      const double e = rng_->exponential() / rate;
      if (s + e >= h) break;
      diffuse(xi, e, drift, sig);
      s += e;
      const double d = tab_->sample_jump(*rng_);
      xi += d;
      emit(t + s, xi, d);
    }
    diffuse(xi, h - s, drift, sig);
    t += h;
    emit(t, xi, 0.0);
  }

 private:
  void diffuse(double& xi, double h, double drift, double sig) {
    if (h <= 0.0) return;
    xi += drift * h + sig * std::sqrt(h) * rng_->normal();
  }

  const LevyTables* tab_;
  CounterRng* rng_;
};

/// xi on [0, horizon]. If floor is finite the path stops at the first node
/// with xi < floor and `hit_floor` is set.
inline LevyPath sample_levy_xi(double horizon, const LevyConfig& cfg, CounterRng& rng,
                               double floor = -std::numeric_limits<double>::infinity()) {
  cfg.validate();
  if (!(horizon > 0.0)) throw InvalidParameter("sample_levy_xi: horizon must be positive");
  auto tab = levy_tables(cfg.eps);
  LevyPath p;
  p.times.push_back(0.0);
  p.xi.push_back(0.0);
  p.delta.push_back(0.0);
  LevyStepper st(*tab, rng);
  double t = 0.0, xi = 0.0;
  const std::size_t n = static_cast<std::size_t>(std::ceil(horizon / cfg.dt));
  for (std::size_t k = 1; k <= n && !p.hit_floor; ++k) {
    const double h = (k == n) ? horizon - t : cfg.dt;
    if (h <= 0.0) break;
    st.step(t, xi, h, [&](double tn, double xn, double d) {
      if (p.hit_floor) return;
      p.times.push_back(tn);
      p.xi.push_back(xn);
      p.delta.push_back(d);
      if (d != 0.0) p.jumps.emplace_back(tn, d);
      if (xn < floor) p.hit_floor = true;
    });
    if (k == n && !p.hit_floor) p.times.back() = horizon;
  }
  return p;
}

}  // namespace gflab

#endif  // GFLAB_LEVY_HPP
