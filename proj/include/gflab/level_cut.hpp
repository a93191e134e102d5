#ifndef GFLAB_LEVEL_CUT_HPP
#define GFLAB_LEVEL_CUT_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include "errors.hpp"
#include "sampling.hpp"

namespace gflab {

/// A fragment of the excursion above some level, alive on the level range
/// [birth_level, end_level). Its time interval at birth is the run of grid
/// indices [lo, hi]; the bracketing indices are lo - 1 and hi + 1.
struct SplitNode {
  std::int32_t parent = -1;
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t split_index = -1;  // grid index of the splitting minimum, -1 for leaves
  std::uint32_t lo = 0;
  std::uint32_t hi = 0;
  std::uint32_t depth = 0;
  double birth_level = 0.0;
  double end_level = 0.0;  // split height, or peak height for a leaf
  double birth_size = 0.0;
  double max_abs_size = 0.0;  // sup of |size| over [birth_level, end_level]

  bool is_leaf() const { return split_index < 0; }
};

struct SplitTree {
  std::vector<SplitNode> nodes;  // nodes[0] is the root
  // For each grid index: the node whose level range contains y[i], and the
  // running maximum of that node's |size| from its birth up to level y[i].
  std::vector<std::int32_t> owner;
  std::vector<double> owner_runmax;

  std::size_t split_count() const { return (nodes.size() - 1) / 2; }
};

struct FragmentSet {
  double level = 0.0;
  std::vector<double> sizes;
  std::vector<std::pair<std::size_t, std::size_t>> intervals;  // bracketing (i-, i+)
  std::vector<bool> short_interval;                             // fewer than 2 grid points above
};

struct JumpRecord {
  double level = 0.0;
  double size = 0.0;  // z_i, the discarded child's birth size
  std::int32_t node = -1;
};

struct LocallyLargestPath {
  std::vector<double> levels;
  std::vector<double> values;
  std::vector<JumpRecord> jumps;
  double apex_height = 0.0;
  double apex_time = 0.0;
  std::size_t apex_index = 0;
  std::size_t tie_count = 0;
  std::vector<std::int32_t> branch;  // node ids from root to leaf

  /// Xi at level a (right-continuous); 0 at or above the apex.
  double value_at(double a) const;
};

struct Offspring {
  double size = 0.0;
  double level = 0.0;
  std::int32_t node = -1;
  ExcursionPath sub_path;
};

namespace detail {

// Total order on grid indices: by height, ties broken by index.
inline bool lower(const std::vector<double>& y, std::size_t i, std::size_t j) {
  return y[i] < y[j] || (y[i] == y[j] && i < j);
}

// Abscissa where the segment (i0, i1) meets level `lev`, with y[i0] <= lev
// on the outside end. Shared by every size computation so that conservation
// holds exactly.
inline double cross(const std::vector<double>& v, const std::vector<double>& y, std::size_t out,
                    std::size_t in, double lev) {
  const double f = (lev - y[out]) / (y[in] - y[out]);
  return v[out] + f * (v[in] - v[out]);
}

inline void check_path(const ExcursionPath& p) {
  const std::size_t n = p.size();
  if (n < 2 || p.x.size() != n || p.y.size() != n)
    throw MalformedPath("excursion path needs matching times, x, y of length >= 2");
  if (p.y.front() != 0.0 || p.y.back() != 0.0)
    throw MalformedPath("excursion path must start and end at height 0");
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (!(p.y[i] > 0.0)) throw MalformedPath("excursion path touches height 0 in the interior");
}

// Pointer state of a fragment between events: the fragment's run is [L, R].
struct Sweep {
  std::size_t L, R;
  double size_at(const ExcursionPath& p, double lev) const {
    return cross(p.x, p.y, R + 1, R, lev) - cross(p.x, p.y, L - 1, L, lev);
  }
};

}  // namespace detail

inline SplitTree build_split_tree(const ExcursionPath& path) {
  detail::check_path(path);
  const auto& y = path.y;
  const std::size_t n = y.size();
  if (n > static_cast<std::size_t>(std::numeric_limits<std::int32_t>::max()))
    throw InvalidParameter("path too long for split tree");

  std::vector<std::uint32_t> minima;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (detail::lower(y, i, i - 1) && detail::lower(y, i, i + 1))
      minima.push_back(static_cast<std::uint32_t>(i));

  // Cartesian tree of the minima by (height, index).
  const std::size_t m = minima.size();
  std::vector<std::int32_t> cl(m, -1), cr(m, -1);
  std::vector<std::int32_t> stack;
  stack.reserve(64);
  for (std::size_t j = 0; j < m; ++j) {
    std::int32_t last = -1;
    while (!stack.empty() && detail::lower(y, minima[j], minima[stack.back()])) {
      last = stack.back();
      stack.pop_back();
    }
    cl[j] = last;
    if (!stack.empty()) cr[stack.back()] = static_cast<std::int32_t>(j);
    stack.push_back(static_cast<std::int32_t>(j));
  }
  const std::int32_t croot = stack.empty() ? -1 : stack.front();

  SplitTree tree;
  tree.nodes.reserve(2 * m + 1);
  tree.owner.assign(n, 0);
  tree.owner_runmax.assign(n, std::fabs(path.z));

  SplitNode root;
  root.lo = 1;
  root.hi = static_cast<std::uint32_t>(n - 2);
  root.birth_level = 0.0;
  root.birth_size = path.x[n - 1] - path.x[0];
  tree.nodes.push_back(root);

  // Work items: (node id, Cartesian node or -1).
  std::vector<std::pair<std::int32_t, std::int32_t>> work;
  work.emplace_back(0, croot);
  while (!work.empty()) {
    auto [id, cn] = work.back();
    work.pop_back();
    SplitNode node = tree.nodes[id];
    double runmax = std::fabs(node.birth_size);
    if (n == 2) {
      node.end_level = 0.0;
      node.max_abs_size = runmax;
      tree.nodes[id] = node;
      continue;
    }
    detail::Sweep s{node.lo, node.hi};
    const std::size_t k = cn >= 0 ? minima[cn] : std::size_t(-1);
    std::size_t last = node.lo;
    while (s.L <= s.R) {
      const std::size_t c = detail::lower(y, s.L, s.R) ? s.L : s.R;
      if (cn >= 0 && !detail::lower(y, c, k)) break;
      const double lev = y[c];
      runmax = std::max(runmax, std::fabs(s.size_at(path, lev)));
      tree.owner[c] = id;
      tree.owner_runmax[c] = runmax;
      last = c;
      if (c == s.L)
        ++s.L;
      else
        --s.R;
    }
    if (cn < 0) {
      node.end_level = y[last];
      node.split_index = -1;
      node.max_abs_size = runmax;
      tree.nodes[id] = node;
      continue;
    }
    const double h = y[k];
    runmax = std::max(runmax, std::fabs(s.size_at(path, h)));
    tree.owner[k] = id;
    tree.owner_runmax[k] = runmax;
    node.end_level = h;
    node.split_index = static_cast<std::int32_t>(k);
    node.max_abs_size = runmax;

    SplitNode lc, rc;
    lc.parent = rc.parent = id;
    lc.depth = rc.depth = node.depth + 1;
    lc.birth_level = rc.birth_level = h;
    lc.lo = static_cast<std::uint32_t>(s.L);
    lc.hi = static_cast<std::uint32_t>(k - 1);
    rc.lo = static_cast<std::uint32_t>(k + 1);
    rc.hi = static_cast<std::uint32_t>(s.R);
    lc.birth_size = path.x[k] - detail::cross(path.x, y, s.L - 1, s.L, h);
    rc.birth_size = detail::cross(path.x, y, s.R + 1, s.R, h) - path.x[k];
    node.left = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back(lc);
    node.right = static_cast<std::int32_t>(tree.nodes.size());
    tree.nodes.push_back(rc);
    tree.nodes[id] = node;
    work.emplace_back(node.right, cr[cn]);
    work.emplace_back(node.left, cl[cn]);
  }
  return tree;
}

/// Fragments above level a by a direct scan of the path.
inline FragmentSet fragments_at_level(const ExcursionPath& path, double a) {
  if (!(a >= 0.0)) throw InvalidParameter("fragments_at_level: level must be non-negative");
  FragmentSet fs;
  fs.level = a;
  const auto& y = path.y;
  const std::size_t n = y.size();
  std::size_t i = 1;
  while (i + 1 < n) {
    if (!(y[i] > a)) {
      ++i;
      continue;
    }
    const std::size_t lo = i;
    while (i + 1 < n && y[i] > a) ++i;
    const std::size_t hi = i - 1;
    const double s =
        detail::cross(path.x, y, hi + 1, hi, a) - detail::cross(path.x, y, lo - 1, lo, a);
    fs.sizes.push_back(s);
    fs.intervals.emplace_back(lo - 1, hi + 1);
    fs.short_interval.push_back(hi - lo + 1 < 2);
  }
  std::vector<std::size_t> order(fs.sizes.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t p, std::size_t q) {
    return std::fabs(fs.sizes[p]) > std::fabs(fs.sizes[q]);
  });
  FragmentSet out;
  out.level = a;
  for (std::size_t j : order) {
    out.sizes.push_back(fs.sizes[j]);
    out.intervals.push_back(fs.intervals[j]);
    out.short_interval.push_back(fs.short_interval[j]);
  }
  return out;
}

inline FragmentSet fragments_at_level(const SplitTree&, const ExcursionPath& path, double a) {
  return fragments_at_level(path, a);
}

/// Sum of squared fragment sizes above a, or 0 if the path stays below a.
inline double martingale_value(const ExcursionPath& path, double a) {
  double m = 0.0;
  for (double s : fragments_at_level(path, a).sizes) m += s * s;
  return m;
}

inline double LocallyLargestPath::value_at(double a) const {
  if (levels.empty() || a >= apex_height || a < 0.0) return 0.0;
  auto it = std::upper_bound(levels.begin(), levels.end(), a);
  const std::size_t j = static_cast<std::size_t>(it - levels.begin()) - 1;
  return values[j];
}

namespace detail {

// Branch of the locally largest fragment, as node ids from the root.
inline std::vector<std::int32_t> largest_branch(const SplitTree& tree, std::size_t* ties) {
  std::vector<std::int32_t> branch{0};
  std::int32_t cur = 0;
  while (!tree.nodes[cur].is_leaf()) {
    const auto& nd = tree.nodes[cur];
    const double l = std::fabs(tree.nodes[nd.left].birth_size);
    const double r = std::fabs(tree.nodes[nd.right].birth_size);
    if (l == r && ties) ++*ties;
    cur = (l >= r) ? nd.left : nd.right;
    branch.push_back(cur);
  }
  return branch;
}

}  // namespace detail

/// Xi on the uniform level grid {0, da, 2da, ...} below the apex, with every
/// split height along the branch inserted.
inline LocallyLargestPath locally_largest(const SplitTree& tree, const ExcursionPath& path,
                                          const GridSpec& grid) {
  LocallyLargestPath ll;
  ll.branch = detail::largest_branch(tree, &ll.tie_count);
  const auto& y = path.y;
  const SplitNode& leaf = tree.nodes[ll.branch.back()];
  ll.apex_height = leaf.end_level;
  if (path.size() > 2) {
    // Peak index: the highest point of the leaf's run.
    std::size_t best = leaf.lo;
    for (std::size_t i = leaf.lo; i <= leaf.hi; ++i)
      if (detail::lower(y, best, i)) best = i;
    ll.apex_index = best;
  }
  ll.apex_time = path.times[ll.apex_index];

  const double da = grid.level_da;
  std::size_t g = 0;  // next uniform grid level index
  for (std::size_t b = 0; b < ll.branch.size(); ++b) {
    const std::int32_t id = ll.branch[b];
    const SplitNode& nd = tree.nodes[id];
    if (b > 0) {
      const SplitNode& par = tree.nodes[nd.parent];
      const std::int32_t sib = (par.left == id) ? par.right : par.left;
      ll.jumps.push_back({nd.birth_level, tree.nodes[sib].birth_size, sib});
    }
    std::vector<double> lv;
    lv.push_back(nd.birth_level);
    while (static_cast<double>(g) * da <= nd.birth_level) ++g;
    for (; static_cast<double>(g) * da < nd.end_level; ++g) lv.push_back(static_cast<double>(g) * da);
    if (path.size() == 2) {
      ll.levels.push_back(0.0);
      ll.values.push_back(nd.birth_size);
      continue;
    }
    detail::Sweep s{nd.lo, nd.hi};
    for (double a : lv) {
      if (a == nd.birth_level) {
        ll.levels.push_back(a);
        ll.values.push_back(nd.birth_size);
        continue;
      }
      while (s.L <= s.R) {
        const std::size_t c = detail::lower(y, s.L, s.R) ? s.L : s.R;
        if (!(y[c] <= a)) break;
        if (c == s.L)
          ++s.L;
        else
          --s.R;
      }
      if (s.L > s.R) break;
      ll.levels.push_back(a);
      ll.values.push_back(s.size_at(path, a));
    }
  }
  return ll;
}

/// Discarded sub-excursions along the locally largest branch, rebased so
/// that each starts at the origin and ends at its size z_i.
inline std::vector<Offspring> offspring_of_locally_largest(const SplitTree& tree,
                                                           const ExcursionPath& path,
                                                           const LocallyLargestPath& ll) {
  std::vector<Offspring> out;
  const auto& y = path.y;
  for (const JumpRecord& jr : ll.jumps) {
    const SplitNode& nd = tree.nodes[jr.node];
    const double h = nd.birth_level;
    const std::size_t lo = nd.lo, hi = nd.hi;
    const double x0 = detail::cross(path.x, y, lo - 1, lo, h);
    const double t0 = detail::cross(path.times, y, lo - 1, lo, h);
    const double x1 = detail::cross(path.x, y, hi + 1, hi, h);
    const double t1 = detail::cross(path.times, y, hi + 1, hi, h);
    Offspring o;
    o.size = jr.size;
    o.level = h;
    o.node = jr.node;
    ExcursionPath& sp = o.sub_path;
    sp.z = x1 - x0;
    sp.duration = t1 - t0;
    sp.times.push_back(0.0);
    sp.x.push_back(0.0);
    sp.y.push_back(0.0);
    for (std::size_t i = lo; i <= hi; ++i) {
      sp.times.push_back(path.times[i] - t0);
      sp.x.push_back(path.x[i] - x0);
      sp.y.push_back(y[i] - h);
    }
    sp.times.push_back(sp.duration);
    sp.x.push_back(sp.z);
    sp.y.push_back(0.0);
    out.push_back(std::move(o));
  }
  return out;
}

/// Time spent at points all of whose enclosing fragments, at every level up
/// to the point's height, have |size| < C. Grid cells are weighted by the
/// trapezoid rule, i.e. each index carries half of each adjacent cell.
inline double time_in_small_excursions(const SplitTree& tree, const ExcursionPath& path, double C) {
  if (!(C > 0.0)) throw InvalidParameter("time_in_small_excursions: C must be positive");
  const std::size_t nn = tree.nodes.size();
  // ok[v]: every strict ancestor of v kept |size| < C over its whole life.
  std::vector<char> ok(nn, 0);
  ok[0] = 1;
  for (std::size_t v = 0; v < nn; ++v) {
    const SplitNode& nd = tree.nodes[v];
    if (nd.is_leaf()) continue;
    const char c = (ok[v] && nd.max_abs_size < C) ? 1 : 0;
    ok[nd.left] = c;
    ok[nd.right] = c;
  }
  const auto& t = path.times;
  const std::size_t n = t.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[tree.owner[i]] || !(tree.owner_runmax[i] < C)) continue;
    double w = 0.0;
    if (i > 0) w += 0.5 * (t[i] - t[i - 1]);
    if (i + 1 < n) w += 0.5 * (t[i + 1] - t[i]);
    total += w;
  }
  return total;
}

}  // namespace gflab

#endif  // GFLAB_LEVEL_CUT_HPP
