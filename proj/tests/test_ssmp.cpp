#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>

#include "gflab/lamperti.hpp"
#include "gflab/stats.hpp"

using namespace gflab;

namespace {

// Deterministic xi(t) = -t on [0, T] with step h, optionally with one jump.
LevyPath linear_xi(double T, double h, double jump_time = -1.0, double jump = 0.0) {
  LevyPath p;
  const int n = static_cast<int>(std::lround(T / h));
  double shift = 0.0;
  p.times.push_back(0.0);
  p.xi.push_back(0.0);
  p.delta.push_back(0.0);
  for (int i = 1; i <= n; ++i) {
    const double t = i * h;
    double d = 0.0;
    if (jump_time > 0.0 && std::fabs(t - jump_time) < 0.5 * h) {
      shift += jump;
      d = jump;
      p.jumps.emplace_back(t, d);
    }
    p.times.push_back(t);
    p.xi.push_back(-t + shift);
    p.delta.push_back(d);
  }
  return p;
}

}  // namespace

TEST(Lamperti, ClockOfLinearXi) {
  // xi = -t gives level 2(1 - e^{-t}) and Z = 2 e^{-t} = 2 - level.
  auto xi = linear_xi(3.0, 1e-3);
  xi.hit_floor = true;
  const std::vector<double> grid{0.25, 0.5, 1.0, 1.5};
  SsmpPath p = lamperti_Z(xi, 2.0, grid);
  for (double a : grid) EXPECT_NEAR(p.value_at(a), 2.0 - a, 1e-6) << a;
  EXPECT_NEAR(p.zeta, 2.0 * (1.0 - std::exp(-3.0)), 1e-6);
  EXPECT_FALSE(p.censored);
  EXPECT_DOUBLE_EQ(p.value_at(p.zeta + 1.0), 0.0);
  for (std::size_t k = 1; k < p.levels.size(); ++k) EXPECT_GE(p.levels[k], p.levels[k - 1]);
}

TEST(Lamperti, JumpImage) {
  const double d = std::log(1.5);
  auto xi = linear_xi(1.0, 1e-3, 0.5, d);
  SsmpPath p = lamperti_Z(xi, 1.0, {});
  ASSERT_EQ(p.jumps.size(), 1u);
  const double lev = 1.0 - std::exp(-0.5);
  EXPECT_NEAR(p.jumps[0].first, lev, 1e-6);
  EXPECT_NEAR(p.jumps[0].second, 0.5 * std::exp(-0.5), 1e-9);
  EXPECT_NEAR(p.value_at(lev - 1e-4), std::exp(-0.5), 1e-3);
  EXPECT_NEAR(p.value_at(lev + 1e-4), 1.5 * std::exp(-0.5), 1e-3);
  EXPECT_TRUE(p.censored);
  EXPECT_THROW(p.value_at(p.zeta + 0.1), OutOfHorizon);
}

TEST(Lamperti, NegativeStartIsMirrored) {
  auto xi = linear_xi(2.0, 1e-3, 1.0, 0.3);
  SsmpPath pp = lamperti_Z(xi, 1.5, {0.5});
  SsmpPath pn = lamperti_Z(xi, -1.5, {0.5});
  EXPECT_DOUBLE_EQ(pn.value_at(0.5), -pp.value_at(0.5));
  ASSERT_EQ(pn.jumps.size(), 1u);
  EXPECT_DOUBLE_EQ(pn.jumps[0].second, -pp.jumps[0].second);
  EXPECT_DOUBLE_EQ(pn.zeta, pp.zeta);
}

TEST(Lamperti, RejectsBadInput) {
  auto xi = linear_xi(1.0, 1e-2);
  EXPECT_THROW(lamperti_Z(xi, 0.0, {}), InvalidParameter);
  EXPECT_THROW(lamperti_Z(xi, 1.0, {0.5, 0.2}), InvalidParameter);
  EXPECT_THROW(lamperti_Z(LevyPath{}, 1.0, {}), InvalidParameter);
  CounterRng r(1, 0);
  EXPECT_THROW(sample_ssmp(1.0, 0.3, LevyConfig{}, r, 2.0), InvalidParameter);
}

TEST(Lamperti, SampledPathStopsAtLevelOrFloor) {
  for (std::uint64_t i = 0; i < 50; ++i) {
    CounterRng r(3, i);
    SsmpPath p = sample_ssmp(1.0, 0.3, LevyConfig{}, r, 1e-4, {0.1, 0.2, 0.3});
    if (p.censored) {
      EXPECT_GE(p.zeta, 0.3);
      EXPECT_GT(p.value_at(0.3), 0.0);
    } else {
      EXPECT_LT(p.Z.back(), 1e-4);
      EXPECT_DOUBLE_EQ(p.value_at(p.zeta), 0.0);
    }
  }
}

TEST(Lamperti, SelfSimilarity) {
  // Z from 2 at level 2a, halved, has the law of Z from 1 at level a.
  std::vector<double> s1, s2;
  for (std::uint64_t i = 0; i < 1500; ++i) {
    CounterRng r1(5, i), r2(6, i);
    auto p1 = sample_ssmp(1.0, 0.2, LevyConfig{}, r1, 1e-4);
    auto p2 = sample_ssmp(2.0, 0.4, LevyConfig{}, r2, 2e-4);
    s1.push_back(p1.value_at(0.2));
    s2.push_back(0.5 * p2.value_at(0.4));
  }
  EXPECT_GT(ks_two_sample(s1, s2).p, 1e-3);
}

TEST(CellPath, MeanLifetimeMatchesLaplaceExponent) {
  // E int_0^inf e^{xi_s} ds = -1 / Psi(1).
  CellStepping st;
  st.floor_ratio = 0.2;
  std::vector<double> life;
  for (std::uint64_t i = 0; i < 3000; ++i) {
    CounterRng r(7, i);
    auto p = simulate_cell_path(1.0, std::numeric_limits<double>::infinity(), st, r, nullptr, false);
    EXPECT_FALSE(p.censored);
    life.push_back(p.zeta);
  }
  const auto m = mean_se(life);
  EXPECT_NEAR(m.mean, -1.0 / psi(1.0), 4.0 * m.se);
}

TEST(CellPath, BirthsAndFloor) {
  CellStepping st;
  st.s_min = 1e-2;
  for (std::uint64_t i = 0; i < 30; ++i) {
    CounterRng r(8, i);
    std::vector<Birth> b;
    auto p = simulate_cell_path(1.0, std::numeric_limits<double>::infinity(), st, r, &b, true);
    EXPECT_FALSE(p.censored);
    EXPECT_LT(p.Z.back(), st.floor_ratio * st.s_min);
    for (std::size_t k = 0; k < b.size(); ++k) {
      EXPECT_GE(std::fabs(b[k].size), st.s_min);
      EXPECT_EQ(b[k].ordinal, k);
      EXPECT_GE(b[k].runmax, 1.0);
      if (k) { EXPECT_GE(b[k].level, b[k - 1].level); }
      EXPECT_LE(b[k].level, p.zeta);
    }
    // every birth is the negative of a recorded jump
    std::size_t matched = 0;
    for (const auto& bb : b)
      for (const auto& j : p.jumps)
        if (j.first == bb.level && j.second == -bb.size) ++matched;
    EXPECT_EQ(matched, b.size());
  }
}

TEST(CellPath, HorizonCensors) {
  CellStepping st;
  CounterRng r(9, 0);
  auto p = simulate_cell_path(5.0, 0.05, st, r);
  EXPECT_TRUE(p.censored);
  EXPECT_GE(p.zeta, 0.05);
  EXPECT_THROW(p.value_at(p.zeta + 1.0), OutOfHorizon);
}

TEST(CellPath, Deterministic) {
  CellStepping st;
  CounterRng r1(10, 4), r2(10, 4);
  auto a = simulate_cell_path(1.0, 1.0, st, r1);
  auto b = simulate_cell_path(1.0, 1.0, st, r2);
  EXPECT_EQ(a.Z, b.Z);
  EXPECT_EQ(a.levels, b.levels);
}

TEST(CellPath, RejectsBadInput) {
  CellStepping st;
  CounterRng r(1, 0);
  EXPECT_THROW(simulate_cell_path(-1.0, 1.0, st, r), InvalidParameter);
  EXPECT_THROW(simulate_cell_path(1.0, 0.0, st, r), InvalidParameter);
  st.floor_ratio = 1.5;
  EXPECT_THROW(simulate_cell_path(1.0, 1.0, st, r), InvalidParameter);
}

TEST(CauchyOracle, KeptPathsArePositiveWithUnitScaleWeights) {
  GridSpec g;
  g.dt = 1e-3;
  CounterRng r(11, 0);
  auto s = cauchy_weighted_xi_oracle(1.0, 0.3, g, r, 2000);
  EXPECT_EQ(s.values.size(), s.n_kept);
  EXPECT_LE(s.n_kept, s.n_paths);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    EXPECT_GT(s.values[i], 0.0);
    EXPECT_DOUBLE_EQ(s.weights[i], 1.0 / (s.values[i] * s.values[i]));
  }
  EXPECT_GT(s.alive_mass(), 0.0);
  EXPECT_LT(s.alive_mass(), 1.2);
}

TEST(CauchyOracle, AliveMassMatchesCellLifetime) {
  const double a = 0.3;
  GridSpec g;
  g.dt = 1e-3;
  CounterRng r(12, 0);
  const std::size_t N = 20000;
  auto s = cauchy_weighted_xi_oracle(1.0, a, g, r, N);
  std::vector<double> w(N, 0.0);
  for (std::size_t i = 0; i < s.weights.size(); ++i) w[i] = s.weights[i];
  const auto mw = mean_se(w);
  CellStepping st;
  std::vector<double> alive;
  for (std::uint64_t i = 0; i < 4000; ++i) {
    CounterRng rr(13, i);
    auto p = simulate_cell_path(1.0, a, st, rr, nullptr, false);
    alive.push_back(p.censored ? 1.0 : 0.0);
  }
  const auto ma = mean_se(alive);
  EXPECT_NEAR(mw.mean, ma.mean, 4.0 * std::hypot(mw.se, ma.se));
}

TEST(CauchyOracle, RejectsBadInput) {
  GridSpec g;
  CounterRng r(1, 0);
  EXPECT_THROW(cauchy_weighted_xi_oracle(-1.0, 0.3, g, r, 10), InvalidParameter);
  EXPECT_THROW(cauchy_weighted_xi_oracle(1.0, 0.0, g, r, 10), InvalidParameter);
  EXPECT_THROW(cauchy_weighted_xi_oracle(1.0, 0.3, g, r, 0), InvalidParameter);
}
