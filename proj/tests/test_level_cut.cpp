#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "gflab/level_cut.hpp"
#include "gflab/stats.hpp"

using namespace gflab;

namespace {

ExcursionPath make_path(std::vector<double> x, std::vector<double> y) {
  ExcursionPath p;
  p.x = std::move(x);
  p.y = std::move(y);
  for (std::size_t i = 0; i < p.x.size(); ++i) p.times.push_back(static_cast<double>(i));
  p.duration = p.times.back();
  p.z = p.x.back();
  return p;
}

// Piecewise linear function through the given knots, sampled on a fine grid.
ExcursionPath fine_path(const std::vector<double>& kt, const std::vector<double>& ky, double h) {
  ExcursionPath p;
  const int n = static_cast<int>(std::lround(kt.back() / h));
  for (int i = 0; i <= n; ++i) {
    const double t = i * h;
    std::size_t k = 0;
    while (k + 2 < kt.size() && t > kt[k + 1]) ++k;
    const double f = (t - kt[k]) / (kt[k + 1] - kt[k]);
    p.times.push_back(t);
    p.x.push_back(t);
    p.y.push_back(i == 0 || i == n ? 0.0 : ky[k] + f * (ky[k + 1] - ky[k]));
  }
  p.duration = p.times.back();
  p.z = p.x.back();
  return p;
}

// Independent oracle: crossing abscissa of level b on segment (i, j).
double xcross(const ExcursionPath& p, std::size_t i, std::size_t j, double b) {
  return p.x[i] + (b - p.y[i]) * (p.x[j] - p.x[i]) / (p.y[j] - p.y[i]);
}

// Size of the run of {y > b} containing index i.
double run_size(const ExcursionPath& p, std::size_t i, double b) {
  std::size_t l = i, r = i;
  while (p.y[l - 1] > b) --l;
  while (p.y[r + 1] > b) ++r;
  return xcross(p, r + 1, r, b) - xcross(p, l - 1, l, b);
}

std::size_t count_minima(const std::vector<double>& y) {
  std::size_t c = 0;
  for (std::size_t i = 1; i + 1 < y.size(); ++i) {
    const bool l = y[i] < y[i - 1];
    const bool r = y[i] < y[i + 1] || (y[i] == y[i + 1]);
    if (l && r) ++c;
  }
  return c;
}

double brute_tc(const ExcursionPath& p, double C) {
  std::vector<double> ys(p.y.begin(), p.y.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  double total = 0.0;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    double mx = std::fabs(p.z);
    if (i > 0 && i + 1 < n) {
      for (double v : ys) {
        if (v >= p.y[i]) break;
        mx = std::max(mx, std::fabs(run_size(p, i, v)));
        const double below = std::nextafter(v, -1.0);
        if (below >= 0.0) mx = std::max(mx, std::fabs(run_size(p, i, below)));
      }
      mx = std::max(mx, std::fabs(run_size(p, i, std::nextafter(p.y[i], -1.0))));
    }
    if (mx < C) {
      if (i > 0) total += 0.5 * (p.times[i] - p.times[i - 1]);
      if (i + 1 < n) total += 0.5 * (p.times[i + 1] - p.times[i]);
    }
  }
  return total;
}

GridSpec grid(double dt, double da) {
  GridSpec g;
  g.dt = dt;
  g.level_da = da;
  return g;
}

}  // namespace

TEST(SplitTree, TentHasNoSplits) {
  auto p = make_path({0, 1, 2, 3, 4}, {0, 1, 2, 1, 0});
  auto t = build_split_tree(p);
  EXPECT_EQ(t.nodes.size(), 1u);
  EXPECT_EQ(t.split_count(), 0u);
  EXPECT_EQ(t.nodes[0].birth_size, 4.0);
  EXPECT_EQ(t.nodes[0].end_level, 2.0);
  auto ll = locally_largest(t, p, grid(1, 0.25));
  EXPECT_TRUE(ll.jumps.empty());
  EXPECT_EQ(ll.values.front(), 4.0);
  for (std::size_t k = 0; k < ll.levels.size(); ++k)
    EXPECT_NEAR(ll.values[k], 4.0 - 2.0 * ll.levels[k], 1e-15);
  EXPECT_EQ(ll.apex_height, 2.0);
  EXPECT_EQ(ll.apex_time, 2.0);
}

TEST(SplitTree, TwoHumpHandPath) {
  auto p = make_path({0, 1, 2, 3, 4}, {0, 2, 1, 3, 0});
  auto t = build_split_tree(p);
  ASSERT_EQ(t.split_count(), 1u);
  const auto& root = t.nodes[0];
  EXPECT_EQ(root.split_index, 2);
  EXPECT_EQ(root.end_level, 1.0);
  const auto& l = t.nodes[root.left];
  const auto& r = t.nodes[root.right];
  // Level 1 crossings: t = 0.5 on the way up, t = 2 at the minimum, t = 11/3 on the way down.
  EXPECT_NEAR(l.birth_size, 1.5, 1e-15);
  EXPECT_NEAR(r.birth_size, 11.0 / 3.0 - 2.0, 1e-15);
  EXPECT_EQ(l.birth_size + r.birth_size, (xcross(p, 4, 3, 1.0) - xcross(p, 0, 1, 1.0)));

  auto ll = locally_largest(t, p, grid(1, 0.5));
  ASSERT_EQ(ll.jumps.size(), 1u);
  EXPECT_EQ(ll.jumps[0].level, 1.0);
  EXPECT_NEAR(ll.jumps[0].size, 1.5, 1e-15);
  EXPECT_NEAR(ll.value_at(1.0), 5.0 / 3.0, 1e-15);
  // Left limit at the jump equals Xi(a) + z.
  const double below = xcross(p, 4, 3, 1.0) - xcross(p, 0, 1, 1.0);
  EXPECT_NEAR(below, ll.value_at(1.0) + ll.jumps[0].size, 1e-15);
  EXPECT_EQ(ll.apex_height, 3.0);
  EXPECT_EQ(ll.apex_time, 3.0);
  EXPECT_EQ(ll.tie_count, 0u);

  auto off = offspring_of_locally_largest(t, p, ll);
  ASSERT_EQ(off.size(), 1u);
  EXPECT_EQ(off[0].sub_path.x.back(), off[0].size);
  EXPECT_EQ(off[0].sub_path.x.front(), 0.0);
  EXPECT_EQ(off[0].sub_path.y.front(), 0.0);
  EXPECT_EQ(off[0].sub_path.y.back(), 0.0);
  EXPECT_NEAR(off[0].sub_path.duration, 1.5, 1e-15);
}

TEST(Fragments, HandPathAtOneAndAHalf) {
  // Fine sampling of the piecewise-linear path through (0,0),(1,2),(2,1),(3,3),(4,0), x = t.
  auto p = fine_path({0, 1, 2, 3, 4}, {0, 2, 1, 3, 0}, 1.0 / 64);
  auto fs = fragments_at_level(p, 1.5);
  ASSERT_EQ(fs.sizes.size(), 2u);
  // Crossings: t = 0.75 and 1.5 for the left hump, 2.25 and 3.5 for the right one.
  EXPECT_NEAR(fs.sizes[0], 3.5 - 2.25, 1e-12);
  EXPECT_NEAR(fs.sizes[1], 1.5 - 0.75, 1e-12);
  EXPECT_LT(fs.intervals[1].first, fs.intervals[0].first);
}

TEST(Fragments, LevelZeroAndAboveMax) {
  CounterRng rng(1, 0);
  auto p = sample_excursion(-0.8, grid(1e-3, 0.01), rng);
  auto f0 = fragments_at_level(p, 0.0);
  ASSERT_EQ(f0.sizes.size(), 1u);
  EXPECT_EQ(f0.sizes[0], -0.8);
  const double ymax = *std::max_element(p.y.begin(), p.y.end());
  EXPECT_TRUE(fragments_at_level(p, ymax).sizes.empty());
  EXPECT_TRUE(fragments_at_level(p, ymax + 1).sizes.empty());
  EXPECT_EQ(martingale_value(p, ymax + 1), 0.0);
}

TEST(SplitTree, MalformedPath) {
  auto p = make_path({0, 1, 2, 3}, {0, 1, 0, 0});
  EXPECT_THROW(build_split_tree(p), MalformedPath);
}

TEST(SplitTree, PlateauIsTotalOrder) {
  auto p = make_path({0, 1, 2, 3, 4, 5}, {0, 2, 1, 1, 2, 0});
  auto t = build_split_tree(p);
  EXPECT_EQ(t.split_count(), 1u);
  EXPECT_EQ(t.nodes[0].split_index, 2);
}

class SampledPaths : public ::testing::TestWithParam<int> {};

TEST_P(SampledPaths, TreeProperties) {
  const int seed = GetParam();
  CounterRng rng(1000 + seed, 0);
  GridSpec g = grid(2e-3, 0.02);
  for (int rep = 0; rep < 20; ++rep) {
    auto p = sample_excursion(seed % 2 ? 1.0 : -0.7, g, rng);
    auto t = build_split_tree(p);
    ASSERT_EQ(t.split_count(), count_minima(p.y));
    for (std::size_t v = 0; v < t.nodes.size(); ++v) {
      const auto& nd = t.nodes[v];
      if (nd.parent >= 0) {
        ASSERT_GT(nd.birth_level, t.nodes[nd.parent].birth_level);
      }
      if (nd.is_leaf()) continue;
      const auto& l = t.nodes[nd.left];
      const auto& r = t.nodes[nd.right];
      const double h = nd.end_level;
      ASSERT_GT(l.end_level, h);
      ASSERT_GT(r.end_level, h);
      ASSERT_EQ(l.hi + 1, static_cast<std::uint32_t>(nd.split_index));
      ASSERT_EQ(r.lo - 1, static_cast<std::uint32_t>(nd.split_index));
      // Conservation against a direct scan just below the split height.
      const double below = run_size(p, nd.split_index, h);
      ASSERT_NEAR(l.birth_size + r.birth_size, below, 1e-12 * (1 + std::fabs(below)));
    }
    auto ll = locally_largest(t, p, g);
    ASSERT_EQ(ll.values.front(), p.z);
    for (const auto& j : ll.jumps) {
      ASSERT_GE(std::fabs(ll.value_at(j.level)), std::fabs(j.size));
    }
    for (std::size_t k = 0; k < ll.levels.size(); ++k) {
      const double a = ll.levels[k];
      auto fs = fragments_at_level(p, a);
      bool found = false;
      for (std::size_t f = 0; f < fs.sizes.size(); ++f) {
        if (fs.intervals[f].first < ll.apex_index && ll.apex_index < fs.intervals[f].second) {
          ASSERT_EQ(fs.sizes[f], ll.values[k]) << "level " << a;
          found = true;
        }
      }
      ASSERT_TRUE(found);
      for (std::size_t f = 0; f + 1 < fs.sizes.size(); ++f)
        ASSERT_GE(std::fabs(fs.sizes[f]), std::fabs(fs.sizes[f + 1]));
    }
    for (const auto& o : offspring_of_locally_largest(t, p, ll)) {
      ASSERT_EQ(o.sub_path.x.back(), o.size);
      ASSERT_EQ(o.sub_path.z, o.size);
      ASSERT_NO_THROW(build_split_tree(o.sub_path));
    }
    // Intervals shrink as the level rises.
    auto f1 = fragments_at_level(p, 0.05), f2 = fragments_at_level(p, 0.07);
    for (const auto& iv : f2.intervals) {
      bool inside = false;
      for (const auto& ov : f1.intervals) inside |= (ov.first <= iv.first && iv.second <= ov.second);
      ASSERT_TRUE(inside);
    }
  }
}

TEST_P(SampledPaths, TimeInSmallExcursionsMatchesBruteForce) {
  const int seed = GetParam();
  CounterRng rng(2000 + seed, 0);
  GridSpec g = grid(5e-3, 0.02);
  for (int rep = 0; rep < 30; ++rep) {
    auto p = sample_excursion(0.5, g, rng);
    if (p.size() > 400) continue;
    auto t = build_split_tree(p);
    for (double C : {0.3, 0.6, 0.9, 1.5, 4.0}) {
      ASSERT_NEAR(time_in_small_excursions(t, p, C), brute_tc(p, C), 1e-12) << "C " << C;
    }
    EXPECT_EQ(time_in_small_excursions(t, p, 0.5), 0.0);
    EXPECT_NEAR(time_in_small_excursions(t, p, 1e9), p.duration, 1e-12);
  }
}

INSTANTIATE_TEST_SUITE_P(Seeds, SampledPaths, ::testing::Values(1, 2, 3, 4));

TEST(Offspring, ScaledDurationLaw) {
  // Offspring rescaled by 1/z_i have gamma_1 durations: P(r <= s) = exp(-1/(2s)).
  CounterRng rng(77, 0);
  GridSpec g = grid(1e-4, 0.01);
  std::vector<double> d;
  ExcursionPath p;
  std::vector<double> work;
  for (int i = 0; i < 2000; ++i) {
    sample_excursion_into(1.0, g, rng, p, work);
    auto t = build_split_tree(p);
    auto ll = locally_largest(t, p, g);
    for (const auto& o : offspring_of_locally_largest(t, p, ll))
      if (std::fabs(o.size) >= 0.1) d.push_back(o.sub_path.duration / (o.size * o.size));
  }
  ASSERT_GT(d.size(), 1000u);
  auto r = ks_one_sample(d, [](double s) { return s <= 0 ? 0.0 : std::exp(-1.0 / (2.0 * s)); });
  EXPECT_GT(r.p, 0.01) << "n " << d.size() << " D " << r.d;
}
