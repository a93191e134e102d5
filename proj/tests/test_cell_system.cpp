#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>

#include "gflab/cell_system.hpp"
#include "gflab/estimators.hpp"
#include "gflab/stats.hpp"

using namespace gflab;

namespace {

CellConfig small_cfg() {
  CellConfig c;
  c.s_min = 1e-2;
  c.G = 3;
  c.floor_ratio = 0.2;
  return c;
}

}  // namespace

TEST(CellSystem, EveCell) {
  auto cs = simulate_cell_system(1.0, small_cfg(), CounterRng(1, 0));
  ASSERT_FALSE(cs.cells.empty());
  const Cell& e = cs.cells[0];
  EXPECT_TRUE(e.label.empty());
  EXPECT_EQ(e.label_string(), "0");
  EXPECT_EQ(e.generation, 0);
  EXPECT_DOUBLE_EQ(e.birth_size, 1.0);
  EXPECT_DOUBLE_EQ(e.birth_level, 0.0);
  EXPECT_TRUE(e.simulated);
  EXPECT_FALSE(e.censored);
}

TEST(CellSystem, ChildrenAreNegatedJumps) {
  for (std::uint64_t s = 0; s < 10; ++s) {
    auto cs = simulate_cell_system(s % 2 ? -1.0 : 1.0, small_cfg(), CounterRng(2, s));
    for (std::size_t i = 1; i < cs.cells.size(); ++i) {
      const Cell& c = cs.cells[i];
      const Cell& p = cs.cells[c.parent];
      EXPECT_EQ(c.generation, p.generation + 1);
      EXPECT_GE(std::fabs(c.birth_size), cs.cfg.s_min);
      EXPECT_NEAR(c.birth_level, p.birth_level + c.parent_jump_level, 1e-12);
      EXPECT_LE(c.parent_jump_level, p.lifetime);
      bool found = false;
      for (const auto& j : p.path.jumps)
        if (j.first == c.parent_jump_level && j.second == -c.birth_size) found = true;
      EXPECT_TRUE(found) << c.label_string();
    }
  }
}

TEST(CellSystem, LabelsArePrefixClosedAndOrdered) {
  auto cs = simulate_cell_system(1.0, small_cfg(), CounterRng(3, 0));
  std::set<std::string> labels;
  for (const auto& c : cs.cells) labels.insert(c.label_string());
  EXPECT_EQ(labels.size(), cs.cells.size());
  std::map<std::int64_t, std::vector<std::size_t>> kids;
  for (std::size_t i = 1; i < cs.cells.size(); ++i) {
    const Cell& c = cs.cells[i];
    auto pl = c.label;
    pl.pop_back();
    EXPECT_EQ(pl, cs.cells[c.parent].label);
    kids[c.parent].push_back(i);
  }
  for (const auto& [p, v] : kids) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      EXPECT_EQ(cs.cells[v[j]].label.back(), j + 1);
      if (j) { EXPECT_LE(std::fabs(cs.cells[v[j]].birth_size), std::fabs(cs.cells[v[j - 1]].birth_size)); }
    }
  }
}

TEST(CellSystem, Deterministic) {
  auto a = simulate_cell_system(1.0, small_cfg(), CounterRng(4, 2));
  auto b = simulate_cell_system(1.0, small_cfg(), CounterRng(4, 2));
  ASSERT_EQ(a.cells.size(), b.cells.size());
  for (std::size_t i = 0; i < a.cells.size(); ++i) {
    EXPECT_EQ(a.cells[i].birth_size, b.cells[i].birth_size);
    EXPECT_EQ(a.cells[i].lifetime, b.cells[i].lifetime);
  }
}

TEST(CellSystem, SnapshotAtZeroIsEve) {
  auto cs = simulate_cell_system(-0.7, small_cfg(), CounterRng(5, 0));
  auto s = snapshot_Xbar(cs, 0.0);
  ASSERT_EQ(s.sizes.size(), 1u);
  EXPECT_DOUBLE_EQ(s.sizes[0], -0.7);
  EXPECT_EQ(s.labels[0], "0");
}

TEST(CellSystem, SnapshotSlotsMatchPaths) {
  CellConfig c = small_cfg();
  c.A = 0.3;
  c.G = 6;
  c.snapshot_levels = {0.1, 0.3};
  auto with = simulate_cell_system(1.0, c, CounterRng(6, 1));
  CellConfig c2 = c;
  c2.snapshot_levels.clear();
  auto without = simulate_cell_system(1.0, c2, CounterRng(6, 1));
  for (double a : {0.1, 0.3}) {
    auto s1 = snapshot_Xbar(with, a);
    auto s2 = snapshot_Xbar(without, a);
    ASSERT_EQ(s1.sizes.size(), s2.sizes.size());
    for (std::size_t i = 0; i < s1.sizes.size(); ++i) {
      EXPECT_DOUBLE_EQ(s1.sizes[i], s2.sizes[i]);
      if (i) { EXPECT_LE(std::fabs(s1.sizes[i]), std::fabs(s1.sizes[i - 1])); }
    }
  }
  CellConfig c3 = c;
  c3.keep_paths = false;
  auto dropped = simulate_cell_system(1.0, c3, CounterRng(6, 1));
  EXPECT_EQ(snapshot_Xbar(dropped, 0.3).sizes, snapshot_Xbar(with, 0.3).sizes);
  EXPECT_THROW(snapshot_Xbar(dropped, 0.2), InvalidParameter);
  EXPECT_THROW(snapshot_Xbar(with, 0.31), OutOfHorizon);
}

TEST(CellSystem, LastGenerationNotSimulated) {
  CellConfig c = small_cfg();
  c.G = 1;
  c.simulate_last_generation = false;
  auto cs = simulate_cell_system(1.0, c, CounterRng(7, 0));
  for (const auto& cell : cs.cells) {
    EXPECT_LE(cell.generation, 1);
    EXPECT_EQ(cell.simulated, cell.generation == 0);
  }
  if (cs.cells.size() > 1) {
    const double b = cs.cells[1].birth_level;
    EXPECT_THROW(snapshot_Xbar(cs, b + 1e-9), InvalidParameter);
  }
}

TEST(CellSystem, PositiveSubsystem) {
  auto cs = simulate_cell_system(1.0, small_cfg(), CounterRng(8, 0));
  auto pos = positive_gf_X(cs);
  std::size_t expected = 0;
  for (std::size_t i = 0; i < cs.cells.size(); ++i) {
    bool ok = true;
    for (std::int64_t j = static_cast<std::int64_t>(i); j >= 0; j = cs.cells[j].parent)
      if (cs.cells[j].birth_size <= 0.0) ok = false;
    expected += ok;
  }
  EXPECT_EQ(pos.cells.size(), expected);
  for (const auto& c : pos.cells) {
    EXPECT_GT(c.birth_size, 0.0);
    if (c.parent >= 0) { EXPECT_LT(static_cast<std::size_t>(c.parent), pos.cells.size()); }
  }
  EXPECT_TRUE(positive_gf_X(simulate_cell_system(-1.0, small_cfg(), CounterRng(8, 1))).cells.empty());
}

TEST(CellSystem, RestrictMinSize) {
  auto cs = simulate_cell_system(1.0, small_cfg(), CounterRng(9, 0));
  auto r = restrict_min_size(cs, 0.05);
  EXPECT_DOUBLE_EQ(r.cfg.s_min, 0.05);
  EXPECT_LE(r.cells.size(), cs.cells.size());
  for (std::size_t i = 1; i < r.cells.size(); ++i) {
    EXPECT_GE(std::fabs(r.cells[i].birth_size), 0.05);
    EXPECT_LT(r.cells[i].parent, static_cast<std::int64_t>(i));
    auto pl = r.cells[i].label;
    pl.pop_back();
    EXPECT_EQ(pl, r.cells[r.cells[i].parent].label);
  }
  EXPECT_EQ(restrict_min_size(cs, 1e-3).cells.size(), cs.cells.size());
}

TEST(CellSystem, BrwObservablesByHand) {
  CellConfig c = small_cfg();
  c.G = 1;
  c.simulate_last_generation = false;
  auto cs = simulate_cell_system(1.0, c, CounterRng(10, 0));
  EXPECT_THROW(brw_observables(cs, 1, 4.0), InvalidParameter);
  EXPECT_THROW(brw_observables(cs, 0, 0.0), InvalidParameter);
  auto r = brw_observables(cs, 0, 4.0);
  double m = 0.0, d = 0.0, dc = 0.0;
  for (std::size_t i = 1; i < cs.cells.size(); ++i) {
    const double x = std::fabs(cs.cells[i].birth_size);
    m += x * x;
    d -= x * x * std::log(x);
    if (x < 4.0 && cs.cells[i].parent_runmax < 4.0 && std::fabs(cs.cells[0].birth_size) < 4.0)
      dc += std::numbers::pi * green_RC(x / 2.0, 4.0) * x * x;
  }
  EXPECT_EQ(r.cells, cs.cells.size() - 1);
  EXPECT_NEAR(r.M_n, m, 1e-12);
  EXPECT_NEAR(r.D_n, d, 1e-12);
  EXPECT_NEAR(r.DC_n, dc, 1e-12);
  EXPECT_FALSE(r.biased);
}

TEST(CellSystem, PrunedMembershipRequiresSmallAncestors) {
  auto cs = simulate_cell_system(1.0, small_cfg(), CounterRng(11, 0));
  EXPECT_FALSE(pruned_membership(cs, 1.0)[0]);
  auto in = pruned_membership(cs, 4.0);
  for (std::size_t i = 1; i < cs.cells.size(); ++i)
    if (in[i]) {
      EXPECT_TRUE(in[cs.cells[i].parent]);
      EXPECT_LT(cs.cells[i].parent_runmax, 4.0);
    }
}

TEST(CellSystem, RejectsBadConfig) {
  CellConfig c = small_cfg();
  EXPECT_THROW(simulate_cell_system(0.0, c, CounterRng(1, 0)), InvalidParameter);
  c.s_min = 0.0;
  EXPECT_THROW(simulate_cell_system(1.0, c, CounterRng(1, 0)), InvalidParameter);
  c = small_cfg();
  c.A = 0.3;
  c.snapshot_levels = {0.5};
  EXPECT_THROW(simulate_cell_system(1.0, c, CounterRng(1, 0)), InvalidParameter);
}

TEST(CellSystem, FirstGenerationSecondMoment) {
  // E sum over first-generation sizes of x^2 equals z^2.
  CellConfig c = small_cfg();
  c.G = 1;
  c.simulate_last_generation = false;
  std::vector<double> m;
  for (std::uint64_t i = 0; i < 3000; ++i)
    m.push_back(brw_observables(simulate_cell_system(1.0, c, CounterRng(12, i)), 0, 4.0).M_n);
  const auto ms = mean_se(m);
  EXPECT_NEAR(ms.mean, 1.0, std::max(4.0 * ms.se, 0.03));
}

TEST(Extrapolation, RecoversModelExactly) {
  auto f = [](double s) { return 0.7 + 3.0 * s - 5.0 * s * std::log(s); };
  EXPECT_NEAR(extrapolate_smin(f(1e-3), f(2e-3), f(4e-3)), 0.7, 1e-12);
  EXPECT_DOUBLE_EQ(extrapolate_smin(2.0, 2.0, 2.0), 2.0);
}
