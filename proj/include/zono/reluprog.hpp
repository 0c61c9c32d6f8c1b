#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

#include "zono/geom.hpp"
#include "zono/geom2d.hpp"
#include "zono/linalg.hpp"
#include "zono/lp.hpp"
#include "zono/netio.hpp"

namespace zono {

/// min_{z in S} c1.z + c2.relu(z) over some feasible set S.
struct ReluObjective {
  Vec c1, c2;
};

inline double relu_objective_at(const ReluObjective& obj, const Vec& z) {
  double v = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i)
    v += obj.c1[i] * z[i] + obj.c2[i] * std::max(z[i], 0.0);
  return v;
}

/// `value` is always a certified lower bound; `argmin` is present exactly
/// when the solve was exact.
struct ReluSolution {
  double value = 0.0;
  std::optional<Vec> argmin;
  bool exact = false;
};

/// Candidate optima over an interval are the endpoints plus 0 when it is
/// interior; ties break toward the smallest z.
inline ReluSolution solve_interval(double l, double u, double c1, double c2) {
  if (!(l <= u)) throw std::invalid_argument("solve_interval: l > u");
  double cands[3];
  std::size_t n = 0;
  cands[n++] = l;
  if (l < 0.0 && 0.0 < u) cands[n++] = 0.0;
  cands[n++] = u;
  double best = std::numeric_limits<double>::infinity();
  double arg = l;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = c1 * cands[i] + c2 * std::max(cands[i], 0.0);
    if (v < best) {
      best = v;
      arg = cands[i];
    }
  }
  return {best, Vec{arg}, true};
}

/// Coordinates of a box are independent: the sum of d interval solves.
inline ReluSolution solve_box(const Hyperbox& h, const ReluObjective& obj) {
  if (obj.c1.size() != h.dim() || obj.c2.size() != h.dim())
    throw std::invalid_argument("solve_box: objective dimension mismatch");
  double value = 0.0;
  Vec arg(h.dim());
  for (std::size_t i = 0; i < h.dim(); ++i) {
    const ReluSolution s = solve_interval(h.lo[i], h.hi[i], obj.c1[i], obj.c2[i]);
    value += s.value;
    arg[i] = (*s.argmin)[0];
  }
  return {value, std::move(arg), true};
}

/// Exact 2-D solve by candidate enumeration.  A precomputed candidate set
/// may be supplied (the dual caches one per block); with it each call is
/// O(#candidates).  An empty-intersection marker falls back to the
/// zonotope-only candidates, a sound superset of the feasible set.
inline ReluSolution solve_zono2d(const Zono2D& z, const ReluObjective& obj,
                                 const std::optional<Hyperbox>& rect = std::nullopt,
                                 const CandidateSet* cache = nullptr) {
  if (obj.c1.size() != 2 || obj.c2.size() != 2)
    throw std::invalid_argument("solve_zono2d: objective dimension mismatch");
  CandidateSet local;
  const CandidateSet* cs = cache;
  if (!cs) {
    local = rect ? relu_candidates_boxed(z, *rect) : relu_candidates(z);
    cs = &local;
  }
  if (cs->empty_intersection) {
    local = relu_candidates(z);
    cs = &local;
  }
  double best = std::numeric_limits<double>::infinity();
  P2 arg = z.center;
  for (const P2& p : cs->points) {
    const double v = obj.c1[0] * p[0] + obj.c1[1] * p[1] + obj.c2[0] * std::max(p[0], 0.0) +
                     obj.c2[1] * std::max(p[1], 0.0);
    if (v < best) {
      best = v;
      arg = p;
    }
  }
  if (cs->points.empty()) {  // point zonotope
    arg = z.center;
    best = obj.c1[0] * arg[0] + obj.c1[1] * arg[1] + obj.c2[0] * std::max(arg[0], 0.0) +
           obj.c2[1] * std::max(arg[1], 0.0);
  }
  return {best, Vec{arg[0], arg[1]}, true};
}

struct SolveBudget {
  std::uint64_t max_patterns = std::uint64_t{1} << 20;  // leaf LPs
  double time_limit_s = 10.0;                           // <= 0 disables
};

namespace detail {

/// min of c1*z + c2*relu(z) over [l, u] clipped to one side of zero.
/// For unstable coordinates both clipped intervals are nonempty.
inline double side_min(double l, double u, double c1, double c2, bool positive) {
  if (positive) {
    const double a = std::max(l, 0.0);
    const double w = c1 + c2;
    return std::min(w * a, w * u);
  }
  const double b = std::min(u, 0.0);
  return std::min(c1 * l, c1 * b);
}

struct OrthantSearch {
  OrthantSearch(const Zonotope& z_, const ReluObjective& obj_, const Hyperbox& bounds_,
                const SolveBudget& budget_)
      : z(z_), obj(obj_), bounds(bounds_), budget(budget_) {}

  const Zonotope& z;
  const ReluObjective& obj;
  const Hyperbox& bounds;  // tightest per-coordinate intervals
  const SolveBudget& budget;

  std::vector<std::size_t> unstable;
  std::vector<double> free_min;   // per unstable coordinate
  std::vector<Vec> box_rows;      // constraint rows shared by all patterns
  std::vector<double> box_rhs;
  Vec mask_base;                  // relu mask for stable coordinates
  double stable_bound = 0.0;      // box-relax contribution of stable coords

  double incumbent = std::numeric_limits<double>::infinity();
  Vec incumbent_y;
  double frontier = std::numeric_limits<double>::infinity();
  std::uint64_t leaves = 0;
  bool exhausted = false;
  bool lp_fallback = false;
  std::chrono::steady_clock::time_point deadline;
  bool use_deadline = false;

  std::vector<signed char> pattern;  // per unstable coord: +1 / -1

  void prepare(const Hyperbox& zono_box, bool have_box) {
    const std::size_t d = z.dim();
    mask_base.assign(d, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      const double l = bounds.lo[i], u = bounds.hi[i];
      if (l >= 0.0) {
        mask_base[i] = 1.0;
        stable_bound += side_min(l, u, obj.c1[i], obj.c2[i], true);
      } else if (u <= 0.0) {
        stable_bound += side_min(l, u, obj.c1[i], obj.c2[i], false);
      } else {
        unstable.push_back(i);
      }
      if (have_box) {
        // add box rows only where they tighten what the generators imply
        if (bounds.lo[i] > zono_box.lo[i]) {
          Vec row(z.num_generators());
          for (std::size_t j = 0; j < z.num_generators(); ++j) row[j] = z.generators(i, j);
          box_rows.push_back(std::move(row));
          box_rhs.push_back(bounds.lo[i] - z.center[i]);
        }
        if (bounds.hi[i] < zono_box.hi[i]) {
          Vec row(z.num_generators());
          for (std::size_t j = 0; j < z.num_generators(); ++j) row[j] = -z.generators(i, j);
          box_rows.push_back(std::move(row));
          box_rhs.push_back(z.center[i] - bounds.hi[i]);
        }
      }
    }
    // branch on the coordinates with the largest potential swing first
    std::sort(unstable.begin(), unstable.end(), [&](std::size_t a, std::size_t b) {
      const double sa = (bounds.hi[a] - bounds.lo[a]) * std::abs(obj.c2[a]);
      const double sb = (bounds.hi[b] - bounds.lo[b]) * std::abs(obj.c2[b]);
      if (sa != sb) return sa > sb;
      return a < b;
    });
    free_min.resize(unstable.size());
    for (std::size_t k = 0; k < unstable.size(); ++k) {
      const std::size_t i = unstable[k];
      free_min[k] = solve_interval(bounds.lo[i], bounds.hi[i], obj.c1[i], obj.c2[i]).value;
    }
    pattern.assign(unstable.size(), 0);
    if (budget.time_limit_s > 0.0) {
      use_deadline = true;
      deadline = std::chrono::steady_clock::now() +
                 std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                     std::chrono::duration<double>(budget.time_limit_s));
    }
  }

  bool out_of_budget() {
    if (leaves >= budget.max_patterns) return true;
    if (use_deadline && (leaves & 0x3f) == 0 &&
        std::chrono::steady_clock::now() > deadline)
      return true;
    return false;
  }

  void solve_leaf(double bound) {
    if (exhausted || out_of_budget()) {
      exhausted = true;
      frontier = std::min(frontier, bound);
      return;
    }
    ++leaves;
    const std::size_t m = z.num_generators();
    LinearProgram lp;
    lp.var_lo.assign(m, -1.0);
    lp.var_hi.assign(m, 1.0);
    Vec w = mask_base;
    for (std::size_t k = 0; k < unstable.size(); ++k)
      w[unstable[k]] = pattern[k] > 0 ? 1.0 : 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = obj.c1[i] + w[i] * obj.c2[i];
    lp.objective = tmatvec(z.generators, w);
    const double constant = dot(w, z.center);
    for (std::size_t r = 0; r < box_rows.size(); ++r)
      lp.constraints.emplace_back(box_rows[r], box_rhs[r]);
    for (std::size_t k = 0; k < unstable.size(); ++k) {
      const std::size_t i = unstable[k];
      const double s = pattern[k] > 0 ? 1.0 : -1.0;
      Vec row(m);
      for (std::size_t j = 0; j < m; ++j) row[j] = s * z.generators(i, j);
      lp.constraints.emplace_back(std::move(row), -s * z.center[i]);
    }
    const LpResult res = solve_lp(lp);
    if (res.status == LpStatus::Infeasible) return;
    if (res.status == LpStatus::IterLimit) {
      // numerical trouble: fall back to the pattern's interval bound
      lp_fallback = true;
      frontier = std::min(frontier, bound);
      return;
    }
    const double value = res.value + constant;
    if (value < incumbent - 1e-12 ||
        (value < incumbent + 1e-12 &&
         (incumbent_y.empty() || std::lexicographical_compare(res.x.begin(), res.x.end(),
                                                              incumbent_y.begin(),
                                                              incumbent_y.end())))) {
      incumbent = std::min(incumbent, value);
      incumbent_y = res.x;
    }
  }

  void descend(std::size_t depth, double bound) {
    if (bound >= incumbent + 1e-12) return;  // cannot improve
    if (exhausted) {
      frontier = std::min(frontier, bound);
      return;
    }
    if (depth == unstable.size()) {
      solve_leaf(bound);
      return;
    }
    const std::size_t i = unstable[depth];
    const double bp = bound - free_min[depth] +
                      side_min(bounds.lo[i], bounds.hi[i], obj.c1[i], obj.c2[i], true);
    const double bm = bound - free_min[depth] +
                      side_min(bounds.lo[i], bounds.hi[i], obj.c1[i], obj.c2[i], false);
    const signed char first = bp <= bm ? 1 : -1;
    for (int round = 0; round < 2; ++round) {
      const signed char s = round == 0 ? first : static_cast<signed char>(-first);
      pattern[depth] = s;
      descend(depth + 1, s > 0 ? bp : bm);
    }
    pattern[depth] = 0;
  }
};

}  // namespace detail

/// Exact d-dimensional solve by orthant branch-and-bound: every sign pattern
/// of the unstable coordinates makes the objective linear, giving one LP over
/// y in [-1,1]^m with pattern (and optional box) constraints.  Children are
/// explored best-bound-first with interval-relaxation pruning.  On budget
/// exhaustion the returned value min(incumbent, open-node bounds) is still a
/// valid lower bound, flagged exact=false.
inline ReluSolution solve_zono_exact(const Zonotope& z, const ReluObjective& obj,
                                     const std::optional<Hyperbox>& box = std::nullopt,
                                     const SolveBudget& budget = SolveBudget{}) {
  const std::size_t d = z.dim();
  if (obj.c1.size() != d || obj.c2.size() != d)
    throw std::invalid_argument("solve_zono_exact: objective dimension mismatch");
  if (z.num_generators() == 0) {
    Vec c = z.center;
    return {relu_objective_at(obj, c), std::move(c), true};
  }
  const Hyperbox zb = concretize(z);
  Hyperbox tight = zb;
  bool have_box = false;
  if (box) {
    try {
      tight = intersect(zb, *box, 1e-9);
      have_box = true;
    } catch (const std::runtime_error&) {
      // inconsistent external box: keep the sound zonotope intervals
      tight = zb;
    }
  }
  detail::OrthantSearch search(z, obj, tight, budget);
  search.prepare(zb, have_box);
  double root = search.stable_bound;
  for (double f : search.free_min) root += f;
  search.descend(0, root);

  ReluSolution sol;
  if (search.incumbent_y.empty()) {
    // every pattern infeasible or budget hit before any leaf: fall back to
    // the interval relaxation over the tightest box
    sol.value = std::min(solve_box(tight, obj).value, search.frontier);
    sol.exact = false;
    return sol;
  }
  if ((search.exhausted || search.lp_fallback) && search.frontier < search.incumbent) {
    sol.value = search.frontier;
    sol.exact = false;
    return sol;
  }
  sol.value = search.incumbent;
  sol.argmin = z.point(search.incumbent_y);
  sol.exact = true;
  return sol;
}

/// 2-layer scalar network over [-1,1]^m whose output at y equals the ReLU
/// program objective at c + E y (via x = relu(x) - relu(-x)).  An exact
/// identity, used to cross-validate the solvers against network oracles.
inline NetworkSpec hardness_reduction_net(const Zonotope& z, const ReluObjective& obj) {
  const std::size_t d = z.dim();
  if (obj.c1.size() != d || obj.c2.size() != d)
    throw std::invalid_argument("hardness_reduction_net: objective dimension mismatch");
  const std::size_t m = std::max<std::size_t>(z.num_generators(), 1);
  Matrix w1(2 * d, m);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < z.num_generators(); ++j) {
      w1(i, j) = z.generators(i, j);
      w1(d + i, j) = -z.generators(i, j);
    }
  Vec b(2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    b[i] = z.center[i];
    b[d + i] = -z.center[i];
  }
  Matrix w2(1, 2 * d);
  for (std::size_t i = 0; i < d; ++i) {
    w2(0, i) = obj.c1[i] + obj.c2[i];
    w2(0, d + i) = -obj.c1[i];
  }
  NetworkSpec net;
  net.input_dim = m;
  net.layers.push_back(LayerSpec{std::move(w1), std::move(b), std::nullopt});
  net.layers.push_back(LayerSpec{std::move(w2), Vec{0.0}, std::nullopt});
  validate(net);
  return net;
}

}  // namespace zono
