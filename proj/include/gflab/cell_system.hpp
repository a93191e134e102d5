#ifndef GFLAB_CELL_SYSTEM_HPP
#define GFLAB_CELL_SYSTEM_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "analytics.hpp"
#include "errors.hpp"
#include "lamperti.hpp"
#include "rng.hpp"

namespace gflab {

struct CellConfig {
  double A = std::numeric_limits<double>::infinity();  // level horizon
  double s_min = 1e-3;
  int G = 6;
  double dt = 1e-3;
  double ds_max = 0.25;
  double floor_ratio = 0.05;
  // When false, cells of generation G are recorded from their birth only.
  bool simulate_last_generation = true;
  // When false, paths are dropped after the snapshot levels are evaluated.
  bool keep_paths = true;
  std::vector<double> snapshot_levels;

  void validate() const {
    if (!(s_min > 0.0)) throw InvalidParameter("s_min must be positive");
    if (G < 0) throw InvalidParameter("G must be >= 0");
    if (!(A > 0.0)) throw InvalidParameter("A must be positive");
    for (double a : snapshot_levels)
      if (!(a >= 0.0 && a <= A)) throw InvalidParameter("snapshot level outside [0, A]");
    stepping().validate();
  }

  CellStepping stepping() const {
    CellStepping st;
    st.dt = dt;
    st.ds_max = ds_max;
    st.s_min = s_min;
    st.floor_ratio = floor_ratio;
    return st;
  }
};

struct Cell {
  std::vector<std::uint32_t> label;  // Ulam label, empty for the Eve cell
  int generation = 0;
  std::int64_t parent = -1;
  double birth_level = 0.0;   // b_u
  double birth_size = 0.0;    // X_u(0)
  double parent_jump_level = 0.0;
  double parent_runmax = 0.0;  // parent's max |size| before this birth
  bool simulated = false;
  double lifetime = 0.0;  // zeta_u, or the level span reached when censored
  bool censored = false;
  double runmax = 0.0;    // max |size| over the simulated path
  SsmpPath path;          // signed
  std::vector<double> snap;  // X_u(a - b_u) at cfg.snapshot_levels, 0 if not alive

  bool alive_at(double a) const {
    if (a < birth_level) return false;
    const double age = a - birth_level;
    return censored ? age <= lifetime : age < lifetime;
  }

  std::string label_string() const {
    std::string s = "0";
    for (auto j : label) s += "." + std::to_string(j);
    return s;
  }
};

struct CellSystem {
  double z = 0.0;
  CellConfig cfg;
  std::vector<Cell> cells;
};

/// Cell system from z; cells of negative size evolve as the negative of a
/// positive path. Children are labelled by decreasing |size| within each
/// parent; child seeds come from the parent seed and the birth ordinal.
inline CellSystem simulate_cell_system(double z, const CellConfig& cfg, CounterRng rng) {
  if (z == 0.0 || !std::isfinite(z)) throw InvalidParameter("simulate_cell_system: z must be nonzero");
  cfg.validate();
  const CellStepping st = cfg.stepping();
  CellSystem cs;
  cs.z = z;
  cs.cfg = cfg;
  std::vector<CounterRng> seeds;
  Cell eve;
  eve.birth_size = z;
  eve.parent_runmax = 0.0;
  cs.cells.push_back(eve);
  seeds.push_back(rng);
  std::vector<Birth> births;
  for (std::size_t i = 0; i < cs.cells.size(); ++i) {
    if (cs.cells[i].generation == cfg.G && !cfg.simulate_last_generation) continue;
    const double x0 = std::fabs(cs.cells[i].birth_size);
    const double sign = cs.cells[i].birth_size > 0.0 ? 1.0 : -1.0;
    const double b = cs.cells[i].birth_level;
    births.clear();
    CounterRng r = seeds[i];
    const bool want_births = cs.cells[i].generation < cfg.G;
    SsmpPath p = simulate_cell_path(x0, cfg.A - b, st, r, want_births ? &births : nullptr, true);
    Cell& c = cs.cells[i];
    c.simulated = true;
    c.lifetime = p.zeta;
    c.censored = p.censored;
    c.runmax = *std::max_element(p.Z.begin(), p.Z.end());
    for (double a : cfg.snapshot_levels) c.snap.push_back(c.alive_at(a) ? sign * p.value_at(a - b) : 0.0);
    if (sign < 0.0) {
      p.z = -p.z;
      for (double& v : p.Z) v = -v;
      for (double& v : p.dZ) v = -v;
      for (auto& j : p.jumps) j.second = -j.second;
    }
    if (cfg.keep_paths) c.path = std::move(p);
    std::stable_sort(births.begin(), births.end(),
                     [](const Birth& u, const Birth& v) { return std::fabs(u.size) > std::fabs(v.size); });
    const CounterRng parent_seed = seeds[i];
    const auto parent_label = c.label;
    const int gen = c.generation;
    for (std::size_t j = 0; j < births.size(); ++j) {
      Cell ch;
      ch.label = parent_label;
      ch.label.push_back(static_cast<std::uint32_t>(j + 1));
      ch.generation = gen + 1;
      ch.parent = static_cast<std::int64_t>(i);
      ch.birth_level = b + births[j].level;
      ch.birth_size = sign * births[j].size;
      ch.parent_jump_level = births[j].level;
      ch.parent_runmax = births[j].runmax;
      cs.cells.push_back(std::move(ch));
      seeds.push_back(parent_seed.split(births[j].ordinal));
    }
  }
  return cs;
}

/// Removes every cell with |birth size| < s together with its progeny.
inline CellSystem restrict_min_size(const CellSystem& cs, double s) {
  CellSystem out;
  out.z = cs.z;
  out.cfg = cs.cfg;
  out.cfg.s_min = std::max(cs.cfg.s_min, s);
  std::vector<std::int64_t> map(cs.cells.size(), -1);
  for (std::size_t i = 0; i < cs.cells.size(); ++i) {
    const Cell& c = cs.cells[i];
    if (c.parent >= 0 && map[c.parent] < 0) continue;
    if (c.parent >= 0 && std::fabs(c.birth_size) < s) continue;
    map[i] = static_cast<std::int64_t>(out.cells.size());
    out.cells.push_back(c);
    if (c.parent >= 0) out.cells.back().parent = map[c.parent];
  }
  return out;
}

struct Snapshot {
  double level = 0.0;
  std::vector<double> sizes;  // decreasing |.|
  std::vector<std::string> labels;
};

inline Snapshot snapshot_Xbar(const CellSystem& cs, double a) {
  if (a > cs.cfg.A) throw OutOfHorizon("snapshot_Xbar: level beyond the horizon");
  if (a < 0.0) throw InvalidParameter("snapshot_Xbar: level must be >= 0");
  std::size_t slot = cs.cfg.snapshot_levels.size();
  for (std::size_t k = 0; k < cs.cfg.snapshot_levels.size(); ++k)
    if (cs.cfg.snapshot_levels[k] == a) slot = k;
  std::vector<std::pair<double, std::size_t>> v;
  for (std::size_t i = 0; i < cs.cells.size(); ++i) {
    const Cell& c = cs.cells[i];
    if (c.birth_level > a) continue;
    if (!c.simulated) throw InvalidParameter("snapshot_Xbar: cell born below the level was not simulated");
    if (!c.alive_at(a)) continue;
    double x;
    if (slot < cs.cfg.snapshot_levels.size())
      x = c.snap[slot];
    else if (!c.path.levels.empty())
      x = c.path.value_at(a - c.birth_level);
    else
      throw InvalidParameter("snapshot_Xbar: paths were dropped and the level was not recorded");
    if (x != 0.0) v.emplace_back(x, i);
  }
  std::stable_sort(v.begin(), v.end(),
                   [](const auto& p, const auto& q) { return std::fabs(p.first) > std::fabs(q.first); });
  Snapshot s;
  s.level = a;
  for (const auto& [x, i] : v) {
    s.sizes.push_back(x);
    s.labels.push_back(cs.cells[i].label_string());
  }
  return s;
}

/// Cells whose every ancestor, inclusive, has positive birth size.
inline CellSystem positive_gf_X(const CellSystem& cs) {
  CellSystem out;
  out.z = cs.z;
  out.cfg = cs.cfg;
  std::vector<std::int64_t> map(cs.cells.size(), -1);
  for (std::size_t i = 0; i < cs.cells.size(); ++i) {
    const Cell& c = cs.cells[i];
    if (!(c.birth_size > 0.0)) continue;
    if (c.parent >= 0 && map[c.parent] < 0) continue;
    map[i] = static_cast<std::int64_t>(out.cells.size());
    out.cells.push_back(c);
    if (c.parent >= 0) out.cells.back().parent = map[c.parent];
  }
  return out;
}

struct BrwReport {
  int n = 0;
  double C = 0.0;
  double M_n = 0.0;
  double D_n = 0.0;
  double DC_n = 0.0;
  std::size_t cells = 0;   // generation n+1 cells counted
  bool biased = false;     // some generation <= n cell was censored by the horizon
};

/// Membership in the tree pruned at C: the cell and all its ancestors have
/// |size| < C from birth up to the birth of the next cell on the line.
inline std::vector<char> pruned_membership(const CellSystem& cs, double C) {
  std::vector<char> in(cs.cells.size(), 0);
  for (std::size_t i = 0; i < cs.cells.size(); ++i) {
    const Cell& c = cs.cells[i];
    const bool ok = std::fabs(c.birth_size) < C;
    if (c.parent < 0)
      in[i] = ok;
    else
      in[i] = ok && in[c.parent] && c.parent_runmax < C;
  }
  return in;
}

inline BrwReport brw_observables(const CellSystem& cs, int n, double C) {
  if (n < 0 || n >= cs.cfg.G) throw InvalidParameter("brw_observables: need 0 <= n < G");
  if (!(C > 0.0)) throw InvalidParameter("brw_observables: C must be positive");
  const auto in = pruned_membership(cs, C);
  BrwReport r;
  r.n = n;
  r.C = C;
  for (std::size_t i = 0; i < cs.cells.size(); ++i) {
    const Cell& c = cs.cells[i];
    if (c.generation <= n && c.simulated && c.censored) r.biased = true;
    if (c.generation != n + 1) continue;
    const double x = std::fabs(c.birth_size);
    ++r.cells;
    r.M_n += x * x;
    r.D_n -= std::log(x) * x * x;
    if (in[i]) r.DC_n += std::numbers::pi * green_RC(c.birth_size / 2.0, C) * x * x;
  }
  return r;
}

}  // namespace gflab

#endif  // GFLAB_CELL_SYSTEM_HPP
